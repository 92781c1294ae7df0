"""Command-line surface.

Every subcommand is a thin wrapper over one library operation; no metric
logic lives here.  Exit codes: 0 success, 1 usage error, 2 data/validation
error.  All randomness flows from an explicit ``--seed`` flag with a fixed
default (never wall-clock time).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import evaluation, harness
from .confidence import ConfidenceMethod, score_all
from .errors import ToolkitError
from .features import EMPTY_MASK, FeatureMask, MASK_GROUPS, extract, masked_catalog
from .forest import DEFAULT_GRID, ForestConfig, grid_search, load_forest, save_forest
from .harness import (
    SyntheticDomainSpec,
    ablation_run,
    alpha_sweep,
    generate_synthetic,
    learning_curve,
    load_experiment_config,
    run_experiment,
    run_matrix,
    run_outlier_baseline,
)
from .records import load_records, sample_mixture, save_records, split
from .seeding import derive_seed

DEFAULT_SEED = 0

_METHOD_FLAGS = {
    "maxprob": "maxprob",
    "dropout-mean": "dropout_mean",
    "dropout-var": "dropout_var",
    "calibrator": "calibrator",
    "outlier": "outlier",
}


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; remap to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _parse_mask(spec: str | None) -> FeatureMask:
    if not spec:
        return EMPTY_MASK
    groups = [g.strip() for g in spec.split(",") if g.strip()]
    for g in groups:
        if g not in MASK_GROUPS:
            raise ToolkitError(
                f"unknown ablation group {g!r}; choose from {', '.join(MASK_GROUPS)}"
            )
    return FeatureMask.of(*groups)


def _confidence_method(args) -> ConfidenceMethod:
    kind = _METHOD_FLAGS[args.method]
    mask = _parse_mask(getattr(args, "ablate", None))
    if kind in ("calibrator", "outlier"):
        if not getattr(args, "model", None):
            raise ToolkitError(f"--method {args.method} requires --model FOREST_FILE")
        model = load_forest(args.model)
        if kind == "calibrator":
            return ConfidenceMethod.calibrator(model, variant=args.variant, mask=mask)
        return ConfidenceMethod.outlier(model, mask=mask)
    return ConfidenceMethod(kind={"maxprob": "max_prob", "dropout_mean": "dropout_mean", "dropout_var": "dropout_neg_var"}[kind])


def _load_grid(path: str | None) -> tuple[ForestConfig, ...]:
    if not path:
        return DEFAULT_GRID
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        return tuple(ForestConfig.from_dict(g) for g in raw)
    except (json.JSONDecodeError, TypeError, ValueError) as exc:
        raise ToolkitError(f"{path}: bad grid file ({exc})") from exc


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# Subcommand handlers


def _cmd_validate(args) -> int:
    for path in args.records:
        record_set = load_records(path)
        print(f"{path}: OK ({len(record_set)} records)")
    return 0


def _cmd_synth(args) -> int:
    spec = SyntheticDomainSpec(
        domain=args.domain,
        n=args.n,
        accuracy_range=(args.accuracy[0], args.accuracy[1]),
        overconfidence=args.overconfidence,
        passage_len_range=(args.passage_len[0], args.passage_len[1]),
        prediction_len_range=(args.prediction_len[0], args.prediction_len[1]),
        dropout_masks=args.dropout_masks,
        dropout_spread=args.dropout_spread,
        id_prefix=args.id_prefix,
    )
    record_set = generate_synthetic(spec, seed=args.seed)
    save_records(record_set, args.out)
    print(f"{args.out}: wrote {len(record_set)} synthetic records")
    return 0


def _cmd_mix(args) -> int:
    source = load_records(args.source)
    ood = load_records(args.ood)
    mixed = sample_mixture(source, ood, args.alpha, args.n, args.seed)
    save_records(mixed, args.out)
    print(f"{args.out}: wrote {len(mixed)} records (alpha={args.alpha})")
    return 0


def _cmd_train_calibrator(args) -> int:
    record_set = load_records(args.records)
    mask = _parse_mask(args.ablate)
    train_set, val_set = split(record_set, args.train_fraction, args.seed)
    if args.target == "correct":
        labels = [r.correct for r in train_set]
    else:
        tags = set(args.source_domain or [])
        if not tags:
            raise ToolkitError("--target in-domain requires --source-domain TAG")
        labels = [r.domain in tags for r in train_set]
    variant = args.variant if args.target == "correct" else "base"
    names = masked_catalog(variant, mask)
    train_X = np.asarray([extract(r, variant, mask).values for r in train_set])
    val_X = np.asarray([extract(r, variant, mask).values for r in val_set])
    grid = tuple(
        ForestConfig(**{**g.to_dict(), "seed": derive_seed(args.seed, "train-calibrator", i)})
        for i, g in enumerate(_load_grid(args.grid_file))
    )
    result = grid_search(train_X, labels, val_X, list(val_set), grid, feature_names=names, n_jobs=args.jobs)
    save_forest(result.best_forest, args.out)
    chosen = result.best_config.to_dict()
    print(f"{args.out}: saved forest (validation AUC {result.val_auc:.6f})")
    print(f"chosen config: {json.dumps(chosen, sort_keys=True)}")
    return 0


def _cmd_score(args) -> int:
    record_set = load_records(args.records)
    method = _confidence_method(args)
    scored = score_all(record_set, method)
    with Path(args.out).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "domain", "correct", "confidence"])
        for s in scored:
            writer.writerow([s.record.id, s.record.domain, int(s.record.correct), repr(s.confidence)])
    print(f"{args.out}: wrote {len(scored)} scored records")
    return 0


def _cmd_eval(args) -> int:
    record_set = load_records(args.records)
    method = _confidence_method(args)
    scored = score_all(record_set, method)
    out = _outdir(args)
    levels = tuple(args.acc_levels)

    curve = evaluation.risk_coverage_curve(scored)
    evaluation.curve_to_csv(curve, out / "curve.csv")
    auc_value = evaluation.auc(curve)
    cov = {lvl: evaluation.coverage_at_accuracy(scored, lvl) for lvl in levels}
    best_auc = evaluation.auc(evaluation.best_possible_curve(record_set))
    accuracy = sum(r.correct for r in record_set) / len(record_set)

    confidences = [s.confidence for s in scored]
    reliability_note = ""
    if min(confidences) >= 0.0 and max(confidences) <= 1.0:
        bins = evaluation.reliability_diagram(scored, n_bins=args.bins)
        evaluation.bins_to_csv(bins, out / "reliability.csv")
    else:
        reliability_note = "skipped: confidences outside [0, 1]"

    report: dict = {
        "method": args.method,
        "n": len(record_set),
        "accuracy": accuracy,
        "auc": auc_value,
        "best_possible_auc": best_auc,
        "cov_at_acc": {repr(lvl): cov[lvl] for lvl in levels},
    }
    if reliability_note:
        report["reliability"] = reliability_note
    if len(set(record_set.domains())) >= 2:
        report["per_domain"] = {
            repr(lvl): {
                d: {
                    "share": s.share,
                    "accuracy": None if math.isnan(s.accuracy) else s.accuracy,
                    "count": s.count,
                }
                for d, s in sorted(evaluation.per_domain_breakdown(scored, lvl).items())
            }
            for lvl in levels
        }
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    print(f"AUC {auc_value:.6f} (best possible {best_auc:.6f})")
    for lvl in levels:
        print(f"coverage at {lvl:.0%} accuracy: {cov[lvl]:.2%}")
    return 0


def _cmd_experiment(args) -> int:
    cfg = load_experiment_config(args.config)
    report = run_experiment(cfg, n_jobs=args.jobs)
    out = _outdir(args)
    harness.write_report_json(report, out / "report.json")
    harness.write_method_table(report, out / "table1.csv")
    for key, m in report.methods.items():
        status = "skipped" if m.skipped else f"AUC {m.auc_mean:.6f} +- {m.auc_sd:.6f}"
        print(f"{key}: {status}")
    print(f"best_possible: AUC {report.best_possible.auc_mean:.6f}")
    return 0


def _cmd_outlier_baseline(args) -> int:
    cfg = load_experiment_config(args.config)
    report = run_outlier_baseline(cfg, n_jobs=args.jobs)
    out = _outdir(args)
    harness.write_report_json(report, out / "report.json")
    harness.write_method_table(report, out / "table1.csv")
    m = report.methods["outlier"]
    print(f"outlier: AUC {m.auc_mean:.6f} +- {m.auc_sd:.6f}")
    return 0


def _cmd_ablate(args) -> int:
    cfg = load_experiment_config(args.config)
    masks = [EMPTY_MASK] + [_parse_mask(g) for g in args.groups]
    reports = ablation_run(cfg, masks, n_jobs=args.jobs)
    out = _outdir(args)
    harness.write_ablation_table(reports, out / "table4.csv")
    doc = {label: r.to_json_dict() for label, r in reports.items()}
    (out / "report.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    for label, r in reports.items():
        for key, m in r.methods.items():
            if key.startswith("calibrator"):
                print(f"{label}: {key} AUC {m.auc_mean:.6f}")
    return 0


def _cmd_learning_curve(args) -> int:
    cfg = load_experiment_config(args.config)
    rows = learning_curve(cfg, args.budgets, n_jobs=args.jobs)
    out = _outdir(args)
    harness.write_learning_curve(rows, out / "fig2.csv")
    for r in rows:
        flag = "" if r.monotone_ok else "  [non-monotone]"
        print(f"budget {r.budget}: AUC {r.auc_mean:.6f} +- {r.auc_sd:.6f}{flag}")
    return 0


def _cmd_alpha_sweep(args) -> int:
    cfg = load_experiment_config(args.config)
    rows = alpha_sweep(cfg, args.alphas, n_jobs=args.jobs)
    out = _outdir(args)
    harness.write_alpha_sweep(rows, out / "fig5.csv")
    for r in rows:
        print(
            f"alpha {r.alpha:g}: maxprob {r.maxprob_auc:.6f}, calibrator "
            f"{r.calibrator_auc:.6f}, difference {r.auc_difference:+.6f}"
        )
    return 0


def _cmd_matrix(args) -> int:
    cfg = load_experiment_config(args.config)
    datasets: dict[str, str] = {}
    for item in args.dataset:
        name, _, path = item.partition("=")
        if not name or not path:
            raise ToolkitError(f"--dataset expects NAME=PATH, got {item!r}")
        if name in datasets:
            raise ToolkitError(f"duplicate dataset name {name!r}")
        datasets[name] = path
    result = run_matrix(cfg, datasets, args.source, n_jobs=args.jobs)
    out = _outdir(args)
    harness.write_matrix(result, out / "fig4.csv")
    doc = {
        "source": result.source,
        "ood_names": list(result.ood_names),
        "averaged": result.averaged,
    }
    (out / "matrix.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    for c in result.cells:
        star = "*" if c.oracle_access else ""
        print(f"known={c.known} unknown={c.unknown}: {c.percent_improvement:.2f}%{star}")
    return 0


def _cmd_tune_unanswerable(args) -> int:
    record_set = load_records(args.records)
    method = _confidence_method(args)
    scored = score_all(record_set, method)
    result = evaluation.tune_unanswerable_threshold(scored)
    if args.out:
        out = _outdir(args)
        doc = {"gamma_prime": _json_float(result.gamma_prime), "em_score": result.em_score}
        (out / "unanswerable.json").write_text(
            json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    print(f"gamma_prime {result.gamma_prime:g}, EM {result.em_score:.6f}")
    return 0


def _json_float(x: float) -> float | str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _cmd_report(args) -> int:
    written = render_plots(args.report_dir)
    for path in written:
        print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# SVG rendering (no plotting dependency; deterministic bytes per input)

_WIDTH, _HEIGHT = 640, 480
_ML, _MR, _MT, _MB = 70, 20, 40, 55


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _svg_chart(
    title: str,
    x_label: str,
    y_label: str,
    x_range: tuple[float, float],
    y_range: tuple[float, float],
    series: list[tuple[str, list[tuple[float, float]], str]],
    diagonal: bool = False,
    zero_line: bool = False,
) -> str:
    x0, x1 = x_range
    y0, y1 = y_range
    plot_w = _WIDTH - _ML - _MR
    plot_h = _HEIGHT - _MT - _MB

    def px(x: float) -> float:
        return _ML + (x - x0) / (x1 - x0) * plot_w

    def py(y: float) -> float:
        return _HEIGHT - _MB - (y - y0) / (y1 - y0) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<text x="{_WIDTH / 2:.0f}" y="24" text-anchor="middle" font-family="sans-serif" '
        f'font-size="16">{title}</text>',
    ]
    # axes
    parts.append(
        f'<line x1="{_ML}" y1="{_HEIGHT - _MB}" x2="{_WIDTH - _MR}" y2="{_HEIGHT - _MB}" '
        f'stroke="black" stroke-width="1"/>'
    )
    parts.append(
        f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_HEIGHT - _MB}" stroke="black" stroke-width="1"/>'
    )
    for i in range(5):
        xv = x0 + (x1 - x0) * i / 4
        yv = y0 + (y1 - y0) * i / 4
        parts.append(
            f'<line x1="{_fmt(px(xv))}" y1="{_HEIGHT - _MB}" x2="{_fmt(px(xv))}" '
            f'y2="{_HEIGHT - _MB + 5}" stroke="black" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{_fmt(px(xv))}" y="{_HEIGHT - _MB + 20}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{xv:.3g}</text>'
        )
        parts.append(
            f'<line x1="{_ML - 5}" y1="{_fmt(py(yv))}" x2="{_ML}" y2="{_fmt(py(yv))}" '
            f'stroke="black" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{_ML - 9}" y="{_fmt(py(yv) + 4)}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{yv:.3g}</text>'
        )
    parts.append(
        f'<text x="{_ML + plot_w / 2:.0f}" y="{_HEIGHT - 12}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13">{x_label}</text>'
    )
    parts.append(
        f'<text x="18" y="{_MT + plot_h / 2:.0f}" text-anchor="middle" font-family="sans-serif" '
        f'font-size="13" transform="rotate(-90 18 {_MT + plot_h / 2:.0f})">{y_label}</text>'
    )
    if diagonal:
        lo, hi = max(x0, y0), min(x1, y1)
        parts.append(
            f'<line x1="{_fmt(px(lo))}" y1="{_fmt(py(lo))}" x2="{_fmt(px(hi))}" y2="{_fmt(py(hi))}" '
            f'stroke="gray" stroke-width="1" stroke-dasharray="5,4"/>'
        )
    if zero_line and y0 < 0.0 < y1:
        parts.append(
            f'<line x1="{_ML}" y1="{_fmt(py(0.0))}" x2="{_WIDTH - _MR}" y2="{_fmt(py(0.0))}" '
            f'stroke="gray" stroke-width="1" stroke-dasharray="5,4"/>'
        )
    for label_i, (name, points, color) in enumerate(series):
        if len(points) > 1:
            coords = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in points)
            parts.append(
                f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="2"/>'
            )
        for x, y in points:
            parts.append(
                f'<circle cx="{_fmt(px(x))}" cy="{_fmt(py(y))}" r="3" fill="{color}"/>'
            )
        parts.append(
            f'<text x="{_WIDTH - _MR - 6}" y="{_MT + 16 + 16 * label_i}" text-anchor="end" '
            f'font-family="sans-serif" font-size="12" fill="{color}">{name}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _read_csv(path: Path) -> list[dict[str, str]]:
    with path.open("r", encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def render_plots(report_dir: str | Path) -> list[Path]:
    """Render SVG charts for the CSV outputs present in ``report_dir``."""
    report_dir = Path(report_dir)
    written: list[Path] = []

    curve_csv = report_dir / "curve.csv"
    if curve_csv.exists():
        rows = _read_csv(curve_csv)
        points = [(float(r["coverage"]), float(r["risk"])) for r in rows]
        svg = _svg_chart(
            "Risk vs coverage",
            "coverage",
            "risk",
            (0.0, 1.0),
            (0.0, 1.0),
            [("risk", points, "#1f77b4")],
        )
        out = report_dir / "risk_coverage.svg"
        out.write_text(svg, encoding="utf-8")
        written.append(out)

    reliability_csv = report_dir / "reliability.csv"
    if reliability_csv.exists():
        rows = [r for r in _read_csv(reliability_csv) if r["mean_conf"]]
        points = [(float(r["mean_conf"]), float(r["accuracy"])) for r in rows]
        svg = _svg_chart(
            "Reliability diagram",
            "mean confidence",
            "accuracy",
            (0.0, 1.0),
            (0.0, 1.0),
            [("bins", points, "#d62728")],
            diagonal=True,
        )
        out = report_dir / "reliability.svg"
        out.write_text(svg, encoding="utf-8")
        written.append(out)

    fig5_csv = report_dir / "fig5.csv"
    if fig5_csv.exists():
        rows = _read_csv(fig5_csv)
        points = sorted((float(r["alpha"]), float(r["auc_difference"])) for r in rows)
        spread = max(0.05, max(abs(y) for _, y in points) * 1.2)
        svg = _svg_chart(
            "Calibrator minus MaxProb AUC vs test mixture",
            "alpha (source fraction)",
            "AUC difference",
            (0.0, 1.0),
            (-spread, spread),
            [("difference", points, "#2ca02c")],
            zero_line=True,
        )
        out = report_dir / "alpha_sweep.svg"
        out.write_text(svg, encoding="utf-8")
        written.append(out)

    if not written:
        raise ToolkitError(
            f"{report_dir}: no renderable CSVs found (curve.csv, reliability.csv, fig5.csv)"
        )
    return written


# ---------------------------------------------------------------------------
# Parser wiring


def _add_method_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--method", required=True, choices=sorted(_METHOD_FLAGS))
    p.add_argument("--variant", choices=("base", "dropout"), default="base")
    p.add_argument("--ablate", default="", help="comma-separated feature groups to remove")
    p.add_argument("--model", default="", help="forest file for calibrator/outlier methods")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="selectiveqa", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate record files")
    p.add_argument("records", nargs="+")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("synth", help="generate a synthetic record file")
    p.add_argument("--out", required=True)
    p.add_argument("--domain", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--accuracy", type=float, nargs=2, default=(0.3, 0.9), metavar=("LO", "HI"))
    p.add_argument("--overconfidence", type=float, default=1.0)
    p.add_argument("--passage-len", type=int, nargs=2, default=(80, 160), metavar=("LO", "HI"))
    p.add_argument("--prediction-len", type=int, nargs=2, default=(1, 6), metavar=("LO", "HI"))
    p.add_argument("--dropout-masks", type=int, default=0)
    p.add_argument("--dropout-spread", type=float, default=0.05)
    p.add_argument("--id-prefix", default="")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("mix", help="sample an alpha mixture of two record files")
    p.add_argument("--source", required=True)
    p.add_argument("--ood", required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_mix)

    p = sub.add_parser("train-calibrator", help="grid-search and save a forest")
    p.add_argument("--records", required=True)
    p.add_argument("--variant", choices=("base", "dropout"), default="base")
    p.add_argument("--ablate", default="")
    p.add_argument("--target", choices=("correct", "in-domain"), default="correct")
    p.add_argument("--source-domain", action="append", help="in-domain tag (repeatable)")
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--grid-file", default="")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train_calibrator)

    p = sub.add_parser("score", help="write per-record confidences as CSV")
    p.add_argument("--records", required=True)
    _add_method_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("eval", help="risk-coverage evaluation of one method")
    p.add_argument("--records", required=True)
    _add_method_flags(p)
    p.add_argument("--acc-levels", type=float, nargs="+", default=(0.8, 0.9))
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("experiment", help="run the configured experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("outlier-baseline", help="outlier-detector baseline experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=_cmd_outlier_baseline)

    p = sub.add_parser("ablate", help="feature-ablation grid")
    p.add_argument("--config", required=True)
    p.add_argument("--groups", nargs="+", required=True, help="feature groups to remove, one row each")
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=_cmd_ablate)

    p = sub.add_parser("learning-curve", help="calibrator AUC vs known-OOD budget")
    p.add_argument("--config", required=True)
    p.add_argument("--budgets", type=int, nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=_cmd_learning_curve)

    p = sub.add_parser("alpha-sweep", help="AUC difference across test mixtures")
    p.add_argument("--config", required=True)
    p.add_argument("--alphas", type=float, nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=_cmd_alpha_sweep)

    p = sub.add_parser("matrix", help="known/unknown OOD extrapolation matrix")
    p.add_argument("--config", required=True)
    p.add_argument("--dataset", action="append", required=True, metavar="NAME=PATH")
    p.add_argument("--source", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=_cmd_matrix)

    p = sub.add_parser("tune-unanswerable", help="tune the unanswerable threshold")
    p.add_argument("--records", required=True)
    _add_method_flags(p)
    p.add_argument("--out", default="")
    p.set_defaults(func=_cmd_tune_unanswerable)

    p = sub.add_parser("report", help="render SVG plots from a report directory")
    p.add_argument("report_dir")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ToolkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
