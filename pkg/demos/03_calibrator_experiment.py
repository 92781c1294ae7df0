"""The full experiment: train a calibrator on known OOD data, test on a
mixture containing a *different*, unseen OOD distribution.

Pipeline per split: sample a calibration pool (held-out source + known OOD),
split it train/validation, grid-search a random forest on correctness labels
using validation selective AUC, then score the fixed test mixture.  MaxProb
needs no training and is evaluated once.

Writes report.json, table1.csv and SVG plots under demos/out/experiment/.
"""

from pathlib import Path

from selectiveqa import ExperimentConfig, ForestConfig
from selectiveqa.cli import render_plots
from selectiveqa.confidence import ConfidenceMethod, score_all
from selectiveqa.evaluation import bins_to_csv, curve_to_csv, reliability_diagram, risk_coverage_curve
from selectiveqa.harness import (
    RecordPools,
    SyntheticDomainSpec,
    build_test_mixture,
    generate_synthetic,
    run_experiment,
    run_source_only_calibrator,
    write_method_table,
    write_report_json,
)
from selectiveqa.seeding import derive_seed

OUT = Path(__file__).parent / "out" / "experiment"
OUT.mkdir(parents=True, exist_ok=True)
SEED = 0

# Source is calibrated; both OOD domains are overconfident, with the known
# and unknown OOD drawn from related but non-identical distributions.
pools = RecordPools(
    source_calib=generate_synthetic(
        SyntheticDomainSpec(domain="wiki", n=6000, passage_len_range=(60, 140), id_prefix="srccal"),
        seed=derive_seed(SEED, "source-calib"),
    ),
    known_ood=generate_synthetic(
        SyntheticDomainSpec(
            domain="news", n=2000, overconfidence=3.0,
            passage_len_range=(200, 360), accuracy_range=(0.15, 0.75), id_prefix="known",
        ),
        seed=derive_seed(SEED, "known"),
    ),
    source_test=generate_synthetic(
        SyntheticDomainSpec(domain="wiki", n=2000, passage_len_range=(60, 140), id_prefix="srctest"),
        seed=derive_seed(SEED, "source-test"),
    ),
    unknown_ood=generate_synthetic(
        SyntheticDomainSpec(
            domain="web", n=2000, overconfidence=2.8,
            passage_len_range=(240, 400), accuracy_range=(0.15, 0.75), id_prefix="unknown",
        ),
        seed=derive_seed(SEED, "unknown"),
    ),
)

cfg = ExperimentConfig(
    alpha=0.5,
    test_n=4000,
    calib_per_domain=1000,
    n_splits=3,
    methods=("maxprob", "calibrator"),
    grid=(ForestConfig(n_trees=80, max_depth=8, min_samples_leaf=25),),
    master_seed=SEED,
)

report = run_experiment(cfg, pools=pools, n_jobs=2)
source_only = run_source_only_calibrator(cfg, pools=pools, n_jobs=2)

print("method                         AUC (lower is better)   Cov@80%")
rows = [
    report.methods["maxprob"],
    source_only.methods["calibrator_source_only"],
    report.methods["calibrator"],
    report.best_possible,
]
for m in rows:
    print(f"{m.method:28s}   {m.auc_mean:.4f} +- {m.auc_sd:.4f}      {m.cov_mean(0.8):.3f}")

print(
    "\nThe calibrator recovers part of the gap between MaxProb and the"
    "\noracle bound because passage length tells it which records come"
    "\nfrom the overconfident domain."
)

# Persist the full report plus plot-ready CSVs, then render SVGs.
write_report_json(report, OUT / "report.json")
write_method_table(report, OUT / "table1.csv")

test_mixture = build_test_mixture(
    pools.source_test, pools.unknown_ood, cfg.alpha, cfg.test_n,
    derive_seed(cfg.master_seed, "test-mixture"),
)
test_scored = score_all(test_mixture, ConfidenceMethod.maxprob())
curve_to_csv(risk_coverage_curve(test_scored), OUT / "curve.csv")
bins_to_csv(reliability_diagram(test_scored, n_bins=10), OUT / "reliability.csv")
for path in render_plots(OUT):
    print(f"wrote {path}")
