"""Experiment orchestration: calibrator training, sweeps, and reports.

The pipeline mirrors a fixed recipe.  A test mixture (alpha in-domain,
1-alpha unknown OOD) is sampled once per run.  Calibrator-style methods then
repeat over ``n_splits`` seeded train/validation splits of a calibration pool
drawn from held-out source data and known OOD data, grid-search forest
hyperparameters on the validation selective AUC, and score the fixed test
mixture.  Untrained methods (MaxProb, dropout statistics) are evaluated once
and reported alongside.

The calibration source pool and the test mixture's source pool are separate
inputs and must be id-disjoint; the engine refuses to train on any record
that appears in the test mixture.

All derived randomness flows from ``master_seed`` through
:func:`selectiveqa.seeding.derive_seed` with purpose tags (test mixture, pool
sampling, per-split, per-forest), so a report is a pure function of
(input files, config).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .confidence import ConfidenceMethod, ScoredRecord, score_all
from .errors import DegenerateLabelsError, ToolkitError
from .evaluation import (
    DomainSlice,
    auc,
    best_possible_curve,
    coverage_at_accuracy,
    per_domain_breakdown,
    risk_coverage_curve,
)
from .features import EMPTY_MASK, FeatureMask, extract, masked_catalog
from .forest import DEFAULT_GRID, ForestConfig, grid_search, predict_proba_matrix
from .records import (
    PredictionRecord,
    RecordSet,
    concat,
    load_records,
    round_half_up,
    sample_mixture,
    split,
    subset,
)
from .seeding import derive_seed

METHOD_KEYS = (
    "maxprob",
    "dropout_mean",
    "dropout_var",
    "calibrator",
    "calibrator_source_only",
    "calibrator_dropout",
    "calibrator_dropout_source_only",
    "outlier",
)

# method -> (feature variant, calibration pool, label kind)
_TRAINED = {
    "calibrator": ("base", "mixed", "correct"),
    "calibrator_source_only": ("base", "source_only", "correct"),
    "calibrator_dropout": ("dropout", "mixed", "correct"),
    "calibrator_dropout_source_only": ("dropout", "source_only", "correct"),
    "outlier": ("base", "mixed", "in_domain"),
}

_TRAINING_TAGS = {
    "maxprob": "none",
    "dropout_mean": "none",
    "dropout_var": "none",
    "calibrator": "source+known_ood",
    "calibrator_source_only": "source_only",
    "calibrator_dropout": "source+known_ood",
    "calibrator_dropout_source_only": "source_only",
    "outlier": "source+known_ood",
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Wiring for one experiment.

    ``source_records`` is the held-out source pool used to train the
    calibrator; ``test_source_records`` is a disjoint source pool feeding the
    test mixture.  ``calib_per_domain`` sets the per-domain calibration pool
    size at alpha = 0.5; the total calibration pool is always
    ``2 * calib_per_domain``, divided between source and known OOD according
    to alpha (source-only calibrators take all of it from source data).
    """

    source_records: str = ""
    known_ood_records: str = ""
    unknown_ood_records: str = ""
    test_source_records: str = ""
    alpha: float = 0.5
    test_n: int = 8000
    calib_per_domain: int = 2000
    train_fraction: float = 0.8
    n_splits: int = 10
    methods: tuple[str, ...] = ("maxprob", "calibrator")
    grid: tuple[ForestConfig, ...] = DEFAULT_GRID
    acc_levels: tuple[float, ...] = (0.8, 0.9)
    master_seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.test_n < 1:
            raise ValueError("test_n must be >= 1")
        if self.calib_per_domain < 1:
            raise ValueError("calib_per_domain must be >= 1")
        if self.n_splits < 1:
            raise ValueError("n_splits must be >= 1")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")
        for m in self.methods:
            if m not in METHOD_KEYS:
                raise ValueError(f"unknown method {m!r}")
        if len(self.grid) == 0:
            raise ValueError("grid must be non-empty")
        for lvl in self.acc_levels:
            if not 0.0 < lvl <= 1.0:
                raise ValueError("acc_levels must lie in (0, 1]")

    def to_dict(self) -> dict:
        return {
            "source_records": str(self.source_records),
            "known_ood_records": str(self.known_ood_records),
            "unknown_ood_records": str(self.unknown_ood_records),
            "test_source_records": str(self.test_source_records),
            "alpha": self.alpha,
            "test_n": self.test_n,
            "calib_per_domain": self.calib_per_domain,
            "train_fraction": self.train_fraction,
            "n_splits": self.n_splits,
            "methods": list(self.methods),
            "grid": [g.to_dict() for g in self.grid],
            "acc_levels": list(self.acc_levels),
            "master_seed": self.master_seed,
        }


def load_experiment_config(path: str | Path) -> ExperimentConfig:
    """Read a flat JSON config whose keys match the ExperimentConfig fields."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ToolkitError(f"{path}: invalid config file ({exc.msg})") from exc
    if not isinstance(raw, dict):
        raise ToolkitError(f"{path}: config must be a JSON object")
    known = set(ExperimentConfig.__dataclass_fields__)
    unknown = set(raw) - known
    if unknown:
        raise ToolkitError(f"{path}: unknown config key {sorted(unknown)[0]!r}")
    kwargs = dict(raw)
    if "methods" in kwargs:
        kwargs["methods"] = tuple(kwargs["methods"])
    if "acc_levels" in kwargs:
        kwargs["acc_levels"] = tuple(float(v) for v in kwargs["acc_levels"])
    if "grid" in kwargs:
        try:
            kwargs["grid"] = tuple(ForestConfig.from_dict(g) for g in kwargs["grid"])
        except (TypeError, ValueError) as exc:
            raise ToolkitError(f"{path}: bad grid entry ({exc})") from exc
    try:
        return ExperimentConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ToolkitError(f"{path}: bad config ({exc})") from exc


@dataclass(frozen=True)
class RecordPools:
    """The four record pools an experiment draws from."""

    source_calib: RecordSet
    known_ood: RecordSet | None
    source_test: RecordSet
    unknown_ood: RecordSet


@dataclass(frozen=True)
class MethodResult:
    method: str
    training_data: str
    skipped: bool = False
    skip_reason: str = ""
    auc_per_split: tuple[float, ...] = ()
    cov_per_split: dict[float, tuple[float, ...]] = field(default_factory=dict)
    per_domain: dict[float, dict[str, DomainSlice]] = field(default_factory=dict)

    @property
    def auc_mean(self) -> float:
        return float(np.mean(self.auc_per_split)) if self.auc_per_split else math.nan

    @property
    def auc_sd(self) -> float:
        return _sample_sd(self.auc_per_split)

    def cov_mean(self, level: float) -> float:
        vals = self.cov_per_split.get(level, ())
        return float(np.mean(vals)) if vals else math.nan

    def cov_sd(self, level: float) -> float:
        return _sample_sd(self.cov_per_split.get(level, ()))


def _sample_sd(values: Sequence[float]) -> float:
    if len(values) == 0:
        return math.nan
    if len(values) == 1:
        return 0.0
    return float(np.std(np.asarray(values), ddof=1))


@dataclass(frozen=True)
class ExperimentReport:
    methods: dict[str, MethodResult]
    best_possible: MethodResult
    acc_levels: tuple[float, ...]
    config_echo: dict

    def to_json_dict(self) -> dict:
        return {
            "config": self.config_echo,
            "acc_levels": list(self.acc_levels),
            "methods": {
                k: _method_to_dict(v, self.acc_levels) for k, v in self.methods.items()
            },
            "best_possible": _method_to_dict(self.best_possible, self.acc_levels),
        }


def _nan_to_none(x: float) -> float | None:
    return None if math.isnan(x) else float(x)


def _method_to_dict(m: MethodResult, levels: tuple[float, ...]) -> dict:
    return {
        "method": m.method,
        "training_data": m.training_data,
        "skipped": m.skipped,
        "skip_reason": m.skip_reason,
        "auc": {
            "mean": _nan_to_none(m.auc_mean),
            "sd": _nan_to_none(m.auc_sd),
            "per_split": list(m.auc_per_split),
        },
        "cov_at_acc": {
            repr(lvl): {
                "mean": _nan_to_none(m.cov_mean(lvl)),
                "sd": _nan_to_none(m.cov_sd(lvl)),
                "per_split": list(m.cov_per_split.get(lvl, ())),
            }
            for lvl in levels
        },
        "per_domain": {
            repr(lvl): {
                domain: {
                    "share": _nan_to_none(s.share),
                    "accuracy": _nan_to_none(s.accuracy),
                    "count": s.count,
                }
                for domain, s in sorted(table.items())
            }
            for lvl, table in m.per_domain.items()
        },
    }


# ---------------------------------------------------------------------------
# Synthetic record generation (experiment fixture and demo data)


@dataclass(frozen=True)
class SyntheticDomainSpec:
    """Generator parameters for one synthetic domain.

    Each record draws a latent correctness probability p uniformly from
    ``accuracy_range``; the correct flag is Bernoulli(p) and the displayed
    confidence is ``1 - (1 - p) ** overconfidence``, so a factor of 1 is
    perfectly calibrated and larger factors inflate confidence while leaving
    correctness untouched.  Passage lengths come from a per-domain range so a
    calibrator can learn to tell domains apart.
    """

    domain: str
    n: int
    accuracy_range: tuple[float, float] = (0.3, 0.9)
    overconfidence: float = 1.0
    passage_len_range: tuple[int, int] = (80, 160)
    prediction_len_range: tuple[int, int] = (1, 6)
    dropout_masks: int = 0
    dropout_spread: float = 0.05
    id_prefix: str = ""

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("n must be >= 1")
        lo, hi = self.accuracy_range
        if not 0.0 <= lo <= hi <= 1.0:
            raise ValueError("accuracy_range must satisfy 0 <= lo <= hi <= 1")
        if self.overconfidence <= 0.0:
            raise ValueError("overconfidence must be positive")
        for name in ("passage_len_range", "prediction_len_range"):
            lo_i, hi_i = getattr(self, name)
            if lo_i < 0 or hi_i < lo_i:
                raise ValueError(f"{name} must satisfy 0 <= lo <= hi")
        if self.dropout_masks < 0 or self.dropout_spread < 0:
            raise ValueError("dropout parameters must be non-negative")


_TOP5_WEIGHTS = (0.4, 0.3, 0.2, 0.1)


def _top5_from(conf: float) -> tuple[float, ...]:
    remainder = 1.0 - conf
    probs = [conf]
    for w in _TOP5_WEIGHTS:
        probs.append(min(probs[-1], remainder * w))
    return tuple(probs)


def generate_synthetic(
    specs: SyntheticDomainSpec | Sequence[SyntheticDomainSpec], seed: int
) -> RecordSet:
    """Seeded synthetic record pool; see :class:`SyntheticDomainSpec`."""
    if isinstance(specs, SyntheticDomainSpec):
        specs = [specs]
    if len(specs) == 0:
        raise ValueError("at least one domain spec is required")
    out: list[PredictionRecord] = []
    for j, spec in enumerate(specs):
        rng = np.random.default_rng(derive_seed(seed, "synthetic", j))
        prefix = spec.id_prefix or spec.domain
        lo, hi = spec.accuracy_range
        for i in range(spec.n):
            p = float(rng.uniform(lo, hi))
            correct = bool(rng.random() < p)
            conf = 1.0 - (1.0 - p) ** spec.overconfidence
            passage_len = int(
                rng.integers(spec.passage_len_range[0], spec.passage_len_range[1] + 1)
            )
            prediction_len = int(
                rng.integers(spec.prediction_len_range[0], spec.prediction_len_range[1] + 1)
            )
            dropout_probs = None
            dropout_mean_top = None
            if spec.dropout_masks > 0:
                noise = rng.normal(0.0, spec.dropout_spread, size=spec.dropout_masks)
                dropout_probs = tuple(float(np.clip(conf + e, 0.0, 1.0)) for e in noise)
                dropout_mean_top = _top5_from(float(np.mean(dropout_probs)))
            out.append(
                PredictionRecord(
                    id=f"{prefix}-{i:06d}",
                    domain=spec.domain,
                    passage_len=passage_len,
                    prediction_len=prediction_len,
                    top_probs=_top5_from(conf),
                    correct=correct,
                    dropout_probs=dropout_probs,
                    dropout_mean_top_probs=dropout_mean_top,
                )
            )
    return RecordSet(records=tuple(out), provenance=f"synthetic(seed={seed})")


# ---------------------------------------------------------------------------
# Engine


def build_test_mixture(
    source_test: RecordSet, unknown_ood: RecordSet, alpha: float, n: int, seed: int
) -> RecordSet:
    """Alpha mixture of the two pools; the endpoints take one pool only."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    if alpha == 0.0:
        return subset(unknown_ood, n, seed, provenance=f"mixture(alpha=0, n={n}, seed={seed})")
    if alpha == 1.0:
        return subset(source_test, n, seed, provenance=f"mixture(alpha=1, n={n}, seed={seed})")
    return sample_mixture(source_test, unknown_ood, alpha, n, seed)


def _feature_matrix(records: Iterable, variant: str, mask: FeatureMask) -> np.ndarray:
    return np.asarray([extract(r, variant, mask).values for r in records], dtype=np.float64)


def _dropout_ready(records: Iterable, need_variance: bool) -> bool:
    for r in records:
        if r.dropout_probs is None or r.dropout_mean_top_probs is None:
            return False
        if need_variance and len(r.dropout_probs) < 2:
            return False
    return True


def _split_or_empty(part: RecordSet, fraction: float, seed: int) -> tuple[RecordSet, RecordSet]:
    if len(part) == 0:
        return part, part
    return split(part, fraction, seed)


def _metrics_for(
    scored: list[ScoredRecord], acc_levels: tuple[float, ...]
) -> tuple[float, dict[float, float], dict[float, dict[str, DomainSlice]]]:
    a = auc(risk_coverage_curve(scored))
    covs = {lvl: coverage_at_accuracy(scored, lvl) for lvl in acc_levels}
    domains: dict[float, dict[str, DomainSlice]] = {}
    if len({s.record.domain for s in scored}) >= 2:
        domains = {lvl: per_domain_breakdown(scored, lvl) for lvl in acc_levels}
    return a, covs, domains


def _average_domain_tables(
    tables: list[dict[float, dict[str, DomainSlice]]],
) -> dict[float, dict[str, DomainSlice]]:
    """Average per-domain shares over splits; accuracy averages over the
    splits where the domain was actually answered."""
    if not tables or not tables[0]:
        return {}
    out: dict[float, dict[str, DomainSlice]] = {}
    for lvl in tables[0]:
        domains = sorted({d for t in tables for d in t.get(lvl, {})})
        merged: dict[str, DomainSlice] = {}
        for domain in domains:
            slices = [t[lvl][domain] for t in tables if domain in t.get(lvl, {})]
            accs = [s.accuracy for s in slices if not math.isnan(s.accuracy)]
            merged[domain] = DomainSlice(
                share=float(np.mean([s.share for s in slices])),
                accuracy=float(np.mean(accs)) if accs else math.nan,
                count=round_half_up(float(np.mean([s.count for s in slices]))),
            )
        out[lvl] = merged
    return out


def _run_engine(
    cfg: ExperimentConfig,
    pools: RecordPools,
    mask: FeatureMask = EMPTY_MASK,
    n_jobs: int = 1,
) -> ExperimentReport:
    master = cfg.master_seed
    test = build_test_mixture(
        pools.source_test,
        pools.unknown_ood,
        cfg.alpha,
        cfg.test_n,
        derive_seed(master, "test-mixture"),
    )
    test_ids = test.ids()

    # Test feature matrices are shared across splits and methods.
    test_matrices: dict[str, np.ndarray] = {}

    def test_matrix(variant: str, eff_mask: FeatureMask) -> np.ndarray:
        key = f"{variant}|{eff_mask.label()}"
        if key not in test_matrices:
            test_matrices[key] = _feature_matrix(test, variant, eff_mask)
        return test_matrices[key]

    results: dict[str, MethodResult] = {}
    for method in cfg.methods:
        if method in ("maxprob", "dropout_mean", "dropout_var"):
            results[method] = _run_untrained(method, test, cfg.acc_levels)
        else:
            results[method] = _run_trained(
                method, cfg, pools, test, test_ids, mask, test_matrix, n_jobs
            )

    oracle_scored = [ScoredRecord(r, 1.0 if r.correct else 0.0) for r in test]
    best = MethodResult(
        method="best_possible",
        training_data="oracle",
        auc_per_split=(auc(best_possible_curve(test)),),
        cov_per_split={
            lvl: (coverage_at_accuracy(oracle_scored, lvl),) for lvl in cfg.acc_levels
        },
    )
    return ExperimentReport(
        methods=results,
        best_possible=best,
        acc_levels=cfg.acc_levels,
        config_echo=cfg.to_dict(),
    )


def _run_untrained(
    method: str, test: RecordSet, acc_levels: tuple[float, ...]
) -> MethodResult:
    factory = {
        "maxprob": ConfidenceMethod.maxprob,
        "dropout_mean": ConfidenceMethod.dropout_mean,
        "dropout_var": ConfidenceMethod.dropout_neg_var,
    }[method]
    if method in ("dropout_mean", "dropout_var") and not _dropout_ready(
        test, need_variance=(method == "dropout_var")
    ):
        return MethodResult(
            method=method,
            training_data="none",
            skipped=True,
            skip_reason="test records lack dropout fields",
        )
    scored = score_all(test, factory())
    a, covs, domains = _metrics_for(scored, acc_levels)
    return MethodResult(
        method=method,
        training_data="none",
        auc_per_split=(a,),
        cov_per_split={lvl: (c,) for lvl, c in covs.items()},
        per_domain=domains,
    )


def _run_trained(
    method: str,
    cfg: ExperimentConfig,
    pools: RecordPools,
    test: RecordSet,
    test_ids: frozenset[str],
    mask: FeatureMask,
    test_matrix,
    n_jobs: int,
) -> MethodResult:
    master = cfg.master_seed
    variant, pool_kind, label_kind = _TRAINED[method]
    effective_mask = mask if method != "outlier" else EMPTY_MASK
    feature_names = masked_catalog(variant, effective_mask)

    total = 2 * cfg.calib_per_domain
    if pool_kind == "source_only":
        n_source, n_known = total, 0
    else:
        n_source = round_half_up(cfg.alpha * total)
        n_known = total - n_source

    if n_known > 0 and (pools.known_ood is None or len(pools.known_ood) == 0):
        raise ToolkitError(f"method {method!r} requires known OOD records")

    source_tag = "calib-source-only" if pool_kind == "source_only" else "calib-source"
    source_part = subset(pools.source_calib, n_source, derive_seed(master, source_tag))
    known_part = (
        subset(pools.known_ood, n_known, derive_seed(master, "calib-known"))
        if n_known > 0
        else RecordSet(records=(), provenance="empty")
    )

    leaked = (source_part.ids() | known_part.ids()) & test_ids
    if leaked:
        raise ToolkitError(
            f"calibrator training data leaks into the test mixture "
            f"(e.g. record {sorted(leaked)[0]!r}); use disjoint pools"
        )

    if variant == "dropout":
        pool_records = list(source_part) + list(known_part)
        if not (
            _dropout_ready(pool_records, need_variance=True)
            and _dropout_ready(test, need_variance=True)
        ):
            return MethodResult(
                method=method,
                training_data=_TRAINING_TAGS[method],
                skipped=True,
                skip_reason="records lack dropout fields",
            )

    aucs: list[float] = []
    covs: dict[float, list[float]] = {lvl: [] for lvl in cfg.acc_levels}
    domain_tables: list[dict[float, dict[str, DomainSlice]]] = []
    source_domains = set(source_part.domains())

    for i in range(cfg.n_splits):
        src_tag = "split-source-only" if pool_kind == "source_only" else "split-source"
        src_train, src_val = _split_or_empty(
            source_part, cfg.train_fraction, derive_seed(master, src_tag, i)
        )
        known_train, known_val = _split_or_empty(
            known_part, cfg.train_fraction, derive_seed(master, "split-known", i)
        )
        train = concat([src_train, known_train], provenance="calibrator train")
        val = concat([src_val, known_val], provenance="calibrator validation")

        if label_kind == "correct":
            train_labels = [r.correct for r in train]
        else:
            train_labels = [r.domain in source_domains for r in train]
        if all(train_labels) or not any(train_labels):
            raise DegenerateLabelsError(
                "degenerate labels: calibrator training data has a single class"
            )

        grid = tuple(
            replace(g, seed=derive_seed(master, f"forest:{method}:split{i}", gi))
            for gi, g in enumerate(cfg.grid)
        )
        search = grid_search(
            _feature_matrix(train, variant, effective_mask),
            train_labels,
            _feature_matrix(val, variant, effective_mask),
            list(val),
            grid,
            feature_names=feature_names,
            n_jobs=n_jobs,
        )
        confidences = predict_proba_matrix(
            search.best_forest, test_matrix(variant, effective_mask)
        )
        scored = [ScoredRecord(r, float(c)) for r, c in zip(test, confidences)]
        a, cov, domains = _metrics_for(scored, cfg.acc_levels)
        aucs.append(a)
        for lvl, c in cov.items():
            covs[lvl].append(c)
        if domains:
            domain_tables.append(domains)

    return MethodResult(
        method=method,
        training_data=_TRAINING_TAGS[method],
        auc_per_split=tuple(aucs),
        cov_per_split={lvl: tuple(v) for lvl, v in covs.items()},
        per_domain=_average_domain_tables(domain_tables),
    )


def _needs_known(cfg: ExperimentConfig) -> bool:
    mixed = any(m in _TRAINED and _TRAINED[m][1] == "mixed" for m in cfg.methods)
    return mixed and cfg.alpha < 1.0


def _load_pools(cfg: ExperimentConfig, need_known: bool | None = None) -> RecordPools:
    for field_name in ("source_records", "unknown_ood_records", "test_source_records"):
        if not getattr(cfg, field_name):
            raise ToolkitError(f"config is missing {field_name}")
    if need_known is None:
        need_known = _needs_known(cfg)
    known = None
    if need_known:
        if not cfg.known_ood_records:
            raise ToolkitError("config is missing known_ood_records")
        known = load_records(cfg.known_ood_records)
    elif cfg.known_ood_records:
        known = load_records(cfg.known_ood_records)
    return RecordPools(
        source_calib=load_records(cfg.source_records),
        known_ood=known,
        source_test=load_records(cfg.test_source_records),
        unknown_ood=load_records(cfg.unknown_ood_records),
    )


def run_experiment(
    cfg: ExperimentConfig,
    pools: RecordPools | None = None,
    mask: FeatureMask = EMPTY_MASK,
    n_jobs: int = 1,
) -> ExperimentReport:
    """Run every configured method against one seeded test mixture.

    ``pools`` may be passed directly (e.g. synthetic record sets); otherwise
    they are loaded from the config's file paths.
    """
    if pools is None:
        pools = _load_pools(cfg)
    return _run_engine(cfg, pools, mask=mask, n_jobs=n_jobs)


def run_source_only_calibrator(
    cfg: ExperimentConfig, pools: RecordPools | None = None, n_jobs: int = 1
) -> ExperimentReport:
    """Calibrator trained on held-out source data only, sizes doubled."""
    renames = {
        "calibrator": "calibrator_source_only",
        "calibrator_dropout": "calibrator_dropout_source_only",
    }
    methods = tuple(renames.get(m, m) for m in cfg.methods if m != "outlier")
    if not any(m.startswith("calibrator") for m in methods):
        methods = methods + ("calibrator_source_only",)
    return run_experiment(replace(cfg, methods=methods), pools=pools, n_jobs=n_jobs)


def run_outlier_baseline(
    cfg: ExperimentConfig, pools: RecordPools | None = None, n_jobs: int = 1
) -> ExperimentReport:
    """Forest trained on the in-domain indicator; same pipeline and metrics."""
    return run_experiment(replace(cfg, methods=("outlier",)), pools=pools, n_jobs=n_jobs)


# ---------------------------------------------------------------------------
# Sweeps and grids


@dataclass(frozen=True)
class LearningCurveRow:
    budget: int
    auc_mean: float
    auc_sd: float
    monotone_ok: bool


LEARNING_CURVE_NOISE = 0.02  # tolerated AUC increase between growing budgets


def learning_curve(
    cfg: ExperimentConfig,
    budgets: Sequence[int],
    pools: RecordPools | None = None,
    n_jobs: int = 1,
) -> list[LearningCurveRow]:
    """Calibrator AUC as a function of the known-OOD budget.

    Each budget b runs the experiment with a calibration pool of b source +
    b known-OOD records, split train/validation by the configured fraction.
    ``monotone_ok`` flags whether the row's AUC stayed within noise of the
    previous (smaller) budget's AUC.
    """
    if len(budgets) == 0:
        raise ValueError("at least one budget is required")
    if pools is None:
        pools = _load_pools(replace(cfg, methods=("calibrator",)))
    rows: list[LearningCurveRow] = []
    previous: float | None = None
    for b in budgets:
        if b < 1:
            raise ValueError("budgets must be positive")
        report = run_experiment(
            replace(cfg, methods=("calibrator",), calib_per_domain=b),
            pools=pools,
            n_jobs=n_jobs,
        )
        result = report.methods["calibrator"]
        ok = previous is None or result.auc_mean <= previous + LEARNING_CURVE_NOISE
        rows.append(LearningCurveRow(int(b), result.auc_mean, result.auc_sd, bool(ok)))
        previous = result.auc_mean
    return rows


@dataclass(frozen=True)
class AlphaSweepRow:
    alpha: float
    maxprob_auc: float
    calibrator_auc: float
    auc_difference: float  # calibrator - maxprob; negative favors the calibrator


def alpha_sweep(
    cfg: ExperimentConfig,
    alphas: Sequence[float],
    pools: RecordPools | None = None,
    n_jobs: int = 1,
) -> list[AlphaSweepRow]:
    """Vary the source fraction of both the calibrator training mixture and
    the test mixture; report AUC(calibrator) - AUC(MaxProb) per alpha.

    Duplicate alphas are deduplicated, keeping first occurrence order.
    """
    deduped: dict[float, None] = {}
    for a in alphas:
        if not 0.0 <= a <= 1.0:
            raise ValueError("alphas must lie in [0, 1]")
        deduped.setdefault(float(a), None)
    if not deduped:
        raise ValueError("at least one alpha is required")
    if pools is None:
        pools = _load_pools(
            replace(cfg, methods=("maxprob", "calibrator")),
            need_known=any(a < 1.0 for a in deduped),
        )
    rows: list[AlphaSweepRow] = []
    for a in deduped:
        report = run_experiment(
            replace(cfg, alpha=a, methods=("maxprob", "calibrator")),
            pools=pools,
            n_jobs=n_jobs,
        )
        mp = report.methods["maxprob"].auc_mean
        cal = report.methods["calibrator"].auc_mean
        rows.append(AlphaSweepRow(a, mp, cal, cal - mp))
    return rows


def extrapolation_cell(maxprob_auc: float, calib_auc: float, best_auc: float) -> float:
    """Percent of the possible AUC improvement captured by the calibrator:
    100 * (maxprob - calibrator) / (maxprob - best)."""
    if best_auc > min(maxprob_auc, calib_auc) + 1e-9:
        raise ToolkitError("best-possible AUC exceeds a method AUC; inputs are inconsistent")
    denominator = maxprob_auc - best_auc
    if denominator <= 1e-12:
        raise ToolkitError("MaxProb already matches the best possible AUC; no headroom")
    return 100.0 * (maxprob_auc - calib_auc) / denominator


@dataclass(frozen=True)
class MatrixCell:
    known: str
    unknown: str
    percent_improvement: float
    oracle_access: bool  # known == unknown assumes access to the unknown OOD
    maxprob_auc: float
    calibrator_auc: float
    best_auc: float


@dataclass(frozen=True)
class MatrixResult:
    source: str
    ood_names: tuple[str, ...]
    cells: tuple[MatrixCell, ...]
    averaged: dict  # Table-1-style means over the off-diagonal cells


def run_matrix(
    cfg: ExperimentConfig,
    datasets: dict[str, str | Path],
    source: str,
    pools_by_name: dict[str, RecordSet] | None = None,
    n_jobs: int = 1,
) -> MatrixResult:
    """Every ordered (known, unknown) OOD pair, plus the oracle diagonal.

    The source dataset is carved once into disjoint calibration and test
    halves shared by all cells.  Diagonal cells (known == unknown) exclude
    the test sample from the calibration pool and are flagged as oracle
    access.
    """
    if source not in datasets:
        raise ToolkitError(f"source dataset {source!r} missing from the dataset map")
    ood_names = tuple(sorted(name for name in datasets if name != source))
    if len(ood_names) < 2:
        raise ToolkitError("the extrapolation matrix needs at least 2 OOD datasets")

    if pools_by_name is None:
        pools_by_name = {name: load_records(path) for name, path in datasets.items()}
    source_set = pools_by_name[source]
    calib_half, test_half = split(
        source_set, 0.5, derive_seed(cfg.master_seed, "matrix-source-carve")
    )

    cells: list[MatrixCell] = []
    off_diagonal: list[ExperimentReport] = []
    for known in ood_names:
        for unknown in ood_names:
            unknown_set = pools_by_name[unknown]
            test = build_test_mixture(
                test_half,
                unknown_set,
                cfg.alpha,
                cfg.test_n,
                derive_seed(cfg.master_seed, "test-mixture"),
            )
            known_set = pools_by_name[known]
            if known == unknown:
                test_ids = test.ids()
                known_set = RecordSet(
                    records=tuple(r for r in known_set if r.id not in test_ids),
                    provenance=f"{known} minus test sample",
                )
            pools = RecordPools(
                source_calib=calib_half,
                known_ood=known_set,
                source_test=test_half,
                unknown_ood=unknown_set,
            )
            report = run_experiment(
                replace(cfg, methods=("maxprob", "calibrator")), pools=pools, n_jobs=n_jobs
            )
            mp = report.methods["maxprob"].auc_mean
            cal = report.methods["calibrator"].auc_mean
            best = report.best_possible.auc_mean
            cells.append(
                MatrixCell(
                    known=known,
                    unknown=unknown,
                    percent_improvement=extrapolation_cell(mp, cal, best),
                    oracle_access=(known == unknown),
                    maxprob_auc=mp,
                    calibrator_auc=cal,
                    best_auc=best,
                )
            )
            if known != unknown:
                off_diagonal.append(report)

    averaged = _average_reports(off_diagonal, cfg.acc_levels)
    return MatrixResult(source=source, ood_names=ood_names, cells=tuple(cells), averaged=averaged)


def _average_reports(reports: list[ExperimentReport], levels: tuple[float, ...]) -> dict:
    """Mean per-method AUC / coverage over a list of reports."""
    out: dict = {}
    if not reports:
        return out
    method_keys = list(reports[0].methods) + ["best_possible"]
    for key in method_keys:
        rows = [
            r.best_possible if key == "best_possible" else r.methods[key] for r in reports
        ]
        out[key] = {
            "auc_mean": float(np.mean([m.auc_mean for m in rows])),
            "cov_at_acc": {
                repr(lvl): float(np.mean([m.cov_mean(lvl) for m in rows])) for lvl in levels
            },
        }
    return out


def ablation_run(
    cfg: ExperimentConfig,
    masks: Sequence[FeatureMask],
    pools: RecordPools | None = None,
    n_jobs: int = 1,
) -> dict[str, ExperimentReport]:
    """One experiment per ablation mask, sharing splits and seeds so the
    rows differ only in the removed feature group."""
    if len(masks) == 0:
        raise ValueError("at least one mask is required")
    if pools is None:
        pools = _load_pools(cfg)
    out: dict[str, ExperimentReport] = {}
    for mask in masks:
        out[mask.label()] = run_experiment(cfg, pools=pools, mask=mask, n_jobs=n_jobs)
    return out


# ---------------------------------------------------------------------------
# Report writers


def _format_level(level: float) -> str:
    return repr(level)


def write_report_json(report: ExperimentReport, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(report.to_json_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _method_csv_rows(report: ExperimentReport) -> list[list]:
    rows = []
    entries = list(report.methods.values()) + [report.best_possible]
    for m in entries:
        row: list = [m.method, m.training_data, "yes" if m.skipped else "no"]
        row += [
            "" if math.isnan(m.auc_mean) else repr(m.auc_mean),
            "" if math.isnan(m.auc_sd) else repr(m.auc_sd),
        ]
        for lvl in report.acc_levels:
            mean, sd = m.cov_mean(lvl), m.cov_sd(lvl)
            row += [
                "" if math.isnan(mean) else repr(mean),
                "" if math.isnan(sd) else repr(sd),
            ]
        rows.append(row)
    return rows


def write_method_table(report: ExperimentReport, path: str | Path) -> None:
    """Table-1-style CSV: one row per method plus the best-possible bound."""
    header = ["method", "training_data", "skipped", "auc_mean", "auc_sd"]
    for lvl in report.acc_levels:
        header += [f"cov_at_{_format_level(lvl)}_mean", f"cov_at_{_format_level(lvl)}_sd"]
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(_method_csv_rows(report))


def write_ablation_table(
    reports: dict[str, ExperimentReport], path: str | Path
) -> None:
    """Table-4-style CSV: one row per (mask, method)."""
    first = next(iter(reports.values()))
    header = ["mask", "method", "auc_mean", "auc_sd"]
    for lvl in first.acc_levels:
        header += [f"cov_at_{_format_level(lvl)}_mean", f"cov_at_{_format_level(lvl)}_sd"]
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for label, report in reports.items():
            for m in list(report.methods.values()) + [report.best_possible]:
                row: list = [label, m.method]
                row += [
                    "" if math.isnan(m.auc_mean) else repr(m.auc_mean),
                    "" if math.isnan(m.auc_sd) else repr(m.auc_sd),
                ]
                for lvl in report.acc_levels:
                    mean, sd = m.cov_mean(lvl), m.cov_sd(lvl)
                    row += [
                        "" if math.isnan(mean) else repr(mean),
                        "" if math.isnan(sd) else repr(sd),
                    ]
                writer.writerow(row)


def write_learning_curve(rows: Sequence[LearningCurveRow], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["budget", "auc_mean", "auc_sd", "monotone_ok"])
        for r in rows:
            writer.writerow([r.budget, repr(r.auc_mean), repr(r.auc_sd), "yes" if r.monotone_ok else "no"])


def write_alpha_sweep(rows: Sequence[AlphaSweepRow], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["alpha", "maxprob_auc", "calibrator_auc", "auc_difference"])
        for r in rows:
            writer.writerow(
                [repr(r.alpha), repr(r.maxprob_auc), repr(r.calibrator_auc), repr(r.auc_difference)]
            )


def write_matrix(result: MatrixResult, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "known_ood",
                "unknown_ood",
                "percent_improvement",
                "oracle_access",
                "maxprob_auc",
                "calibrator_auc",
                "best_auc",
            ]
        )
        for c in result.cells:
            writer.writerow(
                [
                    c.known,
                    c.unknown,
                    repr(c.percent_improvement),
                    "yes" if c.oracle_access else "no",
                    repr(c.maxprob_auc),
                    repr(c.calibrator_auc),
                    repr(c.best_auc),
                ]
            )
