"""A reduced version of the forward-noise sweep: five policies across a grid
of lognormal scales, written to a CSV with the same schema the command-line
sweep emits.  The full-size sweeps live behind `aoi-sampling sweep`; render
the CSVs with the companion figures package:

    render_figures artifacts/demo_sweep.csv --x sigma1 --out demo_sweep.svg
"""

from pathlib import Path

from aoi_sampling.cli import ExperimentConfig, sweep_rows, write_sweep_csv

cfg = ExperimentConfig(
    backward="lognormal:1.0",
    alpha=0.5,
    penalty="linear:2",
    epochs=30_000,
    samples=30_000,
    seed=11,
    param="sigma1",
    grid=[0.6, 1.0, 1.4, 1.8],
)

rows, failed = sweep_rows(cfg)
out = Path(__file__).resolve().parent.parent / "artifacts" / "demo_sweep.csv"
out.parent.mkdir(exist_ok=True)
write_sweep_csv(rows, out)
print(f"wrote {out}")

for row in rows:
    results = row.comparison.results
    ranked = sorted(results, key=lambda name: results[name].avg_penalty)
    summary = ", ".join(f"{name} {results[name].avg_penalty:.1f}" for name in ranked)
    print(f"sigma1 = {row.value:.2f}: {summary}")
