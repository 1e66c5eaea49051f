"""Acceptance for the figure package: render the three sweep CSVs, five
curves each, the optimal curve lowest everywhere, and the failure-probability
figure drawn against 1/(1-alpha).

Uses the CSVs written by the solver package's acceptance sweep when present;
otherwise generates reduced sweeps through the `aoi-sampling` command line
(the only interface this package consumes).
"""

import math
import subprocess
import sys
from pathlib import Path

import pytest

from aoi_figures import FigureSpec, build_figure, load_rows, render
from aoi_figures.render import POLICY_COLUMNS, x_values

ARTIFACTS = Path(__file__).resolve().parents[2] / "artifacts"

REDUCED_GRIDS = {
    "sigma1": "0.6,1.2,1.8",
    "sigma2": "0.6,1.2,1.8",
    "alpha": "0.5,0.8",
}


def sweep_csv(param: str, tmp_path: Path) -> Path:
    canonical = ARTIFACTS / f"sweep_{param}.csv"
    if canonical.exists():
        return canonical
    out = tmp_path / f"sweep_{param}.csv"
    cmd = [
        sys.executable, "-m", "aoi_sampling.cli", "sweep",
        "--param", param, "--grid", REDUCED_GRIDS[param],
        "--penalty", "linear:2", "--epochs", "40000", "--samples", "40000",
        "--seed", "42", "--out", str(out),
    ]
    if param == "alpha":
        cmd += ["--backward", "lognormal:2.3"]
    subprocess.run(cmd, check=True, capture_output=True, text=True)
    return out


@pytest.mark.parametrize("param", ["sigma1", "sigma2", "alpha"])
def test_render_sweep_figures(param, tmp_path):
    csv_path = sweep_csv(param, tmp_path)
    out = tmp_path / f"fig_{param}.svg"
    spec = FigureSpec(csv_path=str(csv_path), x_param=param, out_path=str(out))
    render(spec)
    assert out.exists() and out.stat().st_size > 0

    rows = load_rows(str(csv_path))
    fig = build_figure(spec, rows)
    ax = fig.axes[0]
    _, labels = ax.get_legend_handles_labels()
    assert labels == ["Optimal", "Zero-wait", "1-way", "2-wayEF", "1-wayEF"]

    # the optimal curve lies lowest at every plotted x (up to joint noise)
    for row in rows:
        for _, avg_col, se_col in POLICY_COLUMNS[1:]:
            slack = 3.0 * math.hypot(row["opt_se"], row[se_col])
            assert row["opt_avg"] <= row[avg_col] + slack, (param, row["value"], avg_col)

    if param == "alpha":
        expected = [1.0 / (1.0 - row["value"]) for row in rows]
        assert list(ax.lines[0].get_xdata()) == pytest.approx(expected)
        assert x_values(rows, "alpha") == pytest.approx(expected)
    print(f"PASS criterion 9 ({param}): five curves, optimal lowest at every x")
