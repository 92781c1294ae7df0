import pytest

from selectiveqa.errors import FeatureMaskError, MissingFieldError
from selectiveqa.features import (
    BASE_CATALOG,
    DROPOUT_CATALOG,
    EMPTY_MASK,
    FeatureMask,
    extract_base_features,
    extract_dropout_features,
    masked_catalog,
    negative_variance,
)

from .conftest import make_record


class TestBaseFeatures:
    def test_canonical_order(self):
        r = make_record(passage_len=120, prediction_len=3, top_probs=(0.6, 0.2, 0.1, 0.06, 0.04))
        fv = extract_base_features(r)
        assert fv.values == (120.0, 3.0, 0.6, 0.2, 0.1, 0.06, 0.04)
        assert fv.names == BASE_CATALOG

    def test_all_softmax_mask(self):
        r = make_record(passage_len=120, prediction_len=3, top_probs=(0.6, 0.2, 0.1, 0.06, 0.04))
        fv = extract_base_features(r, FeatureMask.of("all_softmax"))
        assert fv.values == (120.0, 3.0)
        assert fv.names == ("passage_len", "prediction_len")

    def test_top1_mask(self):
        r = make_record(passage_len=120, prediction_len=3, top_probs=(0.6, 0.2, 0.1, 0.06, 0.04))
        fv = extract_base_features(r, FeatureMask.of("top1"))
        assert fv.values == (120.0, 3.0, 0.2, 0.1, 0.06, 0.04)

    def test_never_reads_dropout_fields(self):
        # record without any dropout fields extracts fine
        fv = extract_base_features(make_record())
        assert len(fv.values) == 7

    def test_mask_cannot_empty_vector(self):
        with pytest.raises(FeatureMaskError, match="every feature"):
            masked_catalog("base", FeatureMask.of("all_softmax", "passage_len", "prediction_len"))

    def test_unknown_group_rejected(self):
        with pytest.raises(FeatureMaskError, match="unknown feature group"):
            FeatureMask.of("nonsense")

    def test_dropout_var_invalid_for_base(self):
        with pytest.raises(FeatureMaskError, match="does not exist in the base variant"):
            masked_catalog("base", FeatureMask.of("dropout_var"))


class TestDropoutFeatures:
    def test_zero_variance(self):
        r = make_record(
            passage_len=120,
            prediction_len=3,
            dropout_probs=(0.5, 0.5),
            dropout_mean_top_probs=(0.5, 0.3, 0.1, 0.06, 0.04),
        )
        fv = extract_dropout_features(r)
        assert fv.values == (120.0, 3.0, 0.5, 0.3, 0.1, 0.06, 0.04, 0.0)
        assert fv.names == DROPOUT_CATALOG

    def test_variance_feature_value(self):
        # population variance of {0.4, 0.6} is 0.01
        r = make_record(
            dropout_probs=(0.4, 0.6),
            dropout_mean_top_probs=(0.5, 0.3, 0.1, 0.06, 0.04),
        )
        fv = extract_dropout_features(r)
        assert fv.values[-1] == pytest.approx(-0.01, abs=1e-12)

    def test_mask_dropout_var(self):
        r = make_record(
            dropout_probs=(0.4, 0.6),
            dropout_mean_top_probs=(0.5, 0.3, 0.1, 0.06, 0.04),
        )
        fv = extract_dropout_features(r, FeatureMask.of("dropout_var"))
        assert len(fv.values) == 7
        assert "dropout_neg_var" not in fv.names

    def test_missing_fields_names_id(self):
        with pytest.raises(MissingFieldError, match="r1"):
            extract_dropout_features(make_record())


class TestMaskAlgebra:
    def test_mask_equals_post_deletion(self):
        r = make_record(
            dropout_probs=(0.3, 0.5, 0.7),
            dropout_mean_top_probs=(0.5, 0.3, 0.1, 0.06, 0.04),
        )
        for variant, extractor in (
            ("base", extract_base_features),
            ("dropout", extract_dropout_features),
        ):
            full = extractor(r, EMPTY_MASK)
            for group in ("top1", "top2_5", "passage_len", "prediction_len"):
                masked = extractor(r, FeatureMask.of(group))
                kept = masked_catalog(variant, FeatureMask.of(group))
                expected = tuple(v for v, n in zip(full.values, full.names) if n in kept)
                assert masked.values == expected

    def test_stable_order_across_calls(self):
        r = make_record()
        assert extract_base_features(r).names == extract_base_features(r).names == BASE_CATALOG

    def test_label(self):
        assert EMPTY_MASK.label() == "full"
        assert FeatureMask.of("top1", "all_softmax").label() == "-all_softmax,top1"


def test_negative_variance_constant_is_zero():
    assert negative_variance((0.7, 0.7, 0.7)) == 0.0


def test_negative_variance_extremes():
    assert negative_variance((0.0, 1.0)) == pytest.approx(-0.25, abs=1e-15)
