"""Turn aoi-sampling sweep CSVs into five-policy comparison figures.

One line per policy with error bars at one standard error; the failure
probability sweep is drawn against 1/(1-alpha), the mean number of attempts
per delivery.  Rendering is a pure function of the CSV bytes: fixed hash salt
and stripped date metadata keep SVG output identical across runs.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

EXPECTED_HEADER = [
    "param", "value", "beta", "b",
    "opt_avg", "opt_se", "zw_avg", "zw_se", "oneway_avg", "oneway_se",
    "twowayef_avg", "twowayef_se", "onewayef_avg", "onewayef_se",
]

POLICY_COLUMNS = [
    ("Optimal", "opt_avg", "opt_se"),
    ("Zero-wait", "zw_avg", "zw_se"),
    ("1-way", "oneway_avg", "oneway_se"),
    ("2-wayEF", "twowayef_avg", "twowayef_se"),
    ("1-wayEF", "onewayef_avg", "onewayef_se"),
]

X_LABELS = {
    "sigma1": "forward delay scale sigma1",
    "sigma2": "backward delay scale sigma2",
    "alpha": "mean attempts per delivery 1/(1-alpha)",
}


class RenderError(ValueError):
    """Schema mismatch, unparsable cell, or NaN in a policy column."""


@dataclass(frozen=True)
class FigureSpec:
    csv_path: str
    x_param: str  # sigma1 | sigma2 | alpha
    out_path: str
    fmt: str = "svg"
    title: str | None = None
    x_label: str | None = None
    y_label: str = field(default="long-run average age penalty")

    def __post_init__(self):
        if self.x_param not in X_LABELS:
            raise RenderError(f"unknown x parameter {self.x_param!r}; choose sigma1, sigma2, or alpha")
        if self.fmt not in ("svg", "png"):
            raise RenderError(f"unsupported format {self.fmt!r}; choose svg or png")


def load_rows(csv_path: str) -> list[dict]:
    """Parse and validate a sweep CSV; every policy cell must be a finite number."""
    try:
        with open(csv_path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            raw = [row for row in reader if row]
    except OSError as exc:
        raise RenderError(f"cannot read {csv_path}: {exc}") from None
    if header != EXPECTED_HEADER:
        missing = [c for c in EXPECTED_HEADER if c not in (header or [])]
        raise RenderError(
            f"{csv_path}: header mismatch; missing column(s): {', '.join(missing) or '(order differs)'}"
        )
    rows = []
    for lineno, cells in enumerate(raw, start=2):
        if len(cells) != len(EXPECTED_HEADER):
            raise RenderError(f"{csv_path}:{lineno}: expected {len(EXPECTED_HEADER)} cells, got {len(cells)}")
        row = {"param": cells[0]}
        for name, cell in zip(EXPECTED_HEADER[1:], cells[1:]):
            try:
                value = float(cell)
            except ValueError:
                raise RenderError(f"{csv_path}:{lineno}: column {name} is not a number: {cell!r}") from None
            if not math.isfinite(value):
                raise RenderError(f"{csv_path}:{lineno}: column {name} is {cell}; refusing to drop a curve")
            row[name] = value
        rows.append(row)
    if not rows:
        raise RenderError(f"{csv_path}: no data rows")
    return rows


def x_values(rows: list[dict], x_param: str) -> list[float]:
    if x_param == "alpha":
        return [1.0 / (1.0 - row["value"]) for row in rows]
    return [row["value"] for row in rows]


def build_figure(spec: FigureSpec, rows: list[dict]):
    xs = x_values(rows, spec.x_param)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for label, avg_col, se_col in POLICY_COLUMNS:
        ax.errorbar(
            xs,
            [row[avg_col] for row in rows],
            yerr=[row[se_col] for row in rows],
            marker="o",
            markersize=3.5,
            capsize=2.5,
            linewidth=1.4,
            label=label,
        )
    ax.set_xlabel(spec.x_label or X_LABELS[spec.x_param])
    ax.set_ylabel(spec.y_label)
    if spec.title:
        ax.set_title(spec.title)
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return fig


def render(spec: FigureSpec) -> str:
    """Render the figure for ``spec``; returns the output path."""
    rows = load_rows(spec.csv_path)
    with plt.rc_context({"svg.hashsalt": "aoi-figures"}):
        fig = build_figure(spec, rows)
        metadata = {"Date": None} if spec.fmt == "svg" else None
        fig.savefig(spec.out_path, format=spec.fmt, metadata=metadata)
        plt.close(fig)
    return spec.out_path


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="render_figures", description="Render an aoi-sampling sweep CSV as a figure"
    )
    parser.add_argument("csv", help="sweep CSV produced by `aoi-sampling sweep`")
    parser.add_argument("--x", required=True, choices=sorted(X_LABELS), help="swept parameter")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--format", default=None, choices=["svg", "png"], help="default: from --out suffix, else svg")
    parser.add_argument("--title", default=None)
    args = parser.parse_args(argv)

    fmt = args.format
    if fmt is None:
        fmt = "png" if args.out.lower().endswith(".png") else "svg"
    try:
        spec = FigureSpec(csv_path=args.csv, x_param=args.x, out_path=args.out, fmt=fmt, title=args.title)
        render(spec)
    except RenderError as exc:
        print(f"render error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
