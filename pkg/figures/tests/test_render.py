"""Render contract: schema validation, the five-policy figure, the
1/(1-alpha) axis transform, loud failures on NaN, and deterministic output."""

import math

import pytest

from aoi_figures import FigureSpec, RenderError, build_figure, load_rows, render
from aoi_figures.render import EXPECTED_HEADER, main

HEADER = ",".join(EXPECTED_HEADER)

STUB_ROWS = [
    "sigma1,0.5,10.1,2.5,10.2,0.1,11.0,0.12,10.6,0.11,10.4,0.1,10.7,0.11",
    "sigma1,1.0,12.3,3.1,12.4,0.2,14.0,0.25,13.1,0.22,12.8,0.2,13.3,0.23",
    "sigma1,1.5,15.9,4.0,16.0,0.4,19.5,0.5,17.2,0.45,16.6,0.42,17.5,0.46",
]


def write_stub(path, rows=None, header=HEADER):
    lines = [header] + (STUB_ROWS if rows is None else rows)
    path.write_text("\n".join(lines) + "\n")
    return str(path)


def test_load_rows_parses_stub(tmp_path):
    rows = load_rows(write_stub(tmp_path / "s.csv"))
    assert len(rows) == 3
    assert rows[0]["value"] == 0.5
    assert rows[2]["zw_avg"] == 19.5


def test_render_produces_svg_with_five_curves(tmp_path):
    csv_path = write_stub(tmp_path / "s.csv")
    out = tmp_path / "fig.svg"
    render(FigureSpec(csv_path=csv_path, x_param="sigma1", out_path=str(out)))
    assert out.exists() and out.stat().st_size > 0
    fig = build_figure(FigureSpec(csv_path=csv_path, x_param="sigma1", out_path=str(out)), load_rows(csv_path))
    handles, labels = fig.axes[0].get_legend_handles_labels()
    assert labels == ["Optimal", "Zero-wait", "1-way", "2-wayEF", "1-wayEF"]


def test_alpha_axis_transform(tmp_path):
    rows = [
        "alpha,0.5,1,1,1,0.1,2,0.1,2,0.1,2,0.1,2,0.1",
        "alpha,0.8,1,1,1,0.1,2,0.1,2,0.1,2,0.1,2,0.1",
    ]
    csv_path = write_stub(tmp_path / "a.csv", rows)
    spec = FigureSpec(csv_path=csv_path, x_param="alpha", out_path=str(tmp_path / "a.svg"))
    fig = build_figure(spec, load_rows(csv_path))
    xs = fig.axes[0].lines[0].get_xdata()
    assert list(xs) == pytest.approx([2.0, 5.0])


def test_nan_cell_fails_loudly(tmp_path):
    rows = list(STUB_ROWS)
    rows[1] = rows[1].replace("14.0", "nan")
    csv_path = write_stub(tmp_path / "n.csv", rows)
    with pytest.raises(RenderError, match="zw_avg"):
        load_rows(csv_path)
    assert main([csv_path, "--x", "sigma1", "--out", str(tmp_path / "n.svg")]) != 0


def test_missing_column_named(tmp_path):
    broken = HEADER.replace(",twowayef_avg", "")
    csv_path = write_stub(tmp_path / "m.csv", ["sigma1,0.5" + ",1" * 11], header=broken)
    with pytest.raises(RenderError, match="twowayef_avg"):
        load_rows(csv_path)


def test_empty_and_ragged_rejected(tmp_path):
    with pytest.raises(RenderError):
        load_rows(write_stub(tmp_path / "e.csv", []))
    with pytest.raises(RenderError):
        load_rows(write_stub(tmp_path / "r.csv", ["sigma1,0.5,1,2"]))


def test_render_is_deterministic(tmp_path):
    csv_path = write_stub(tmp_path / "s.csv")
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    render(FigureSpec(csv_path=csv_path, x_param="sigma1", out_path=str(a)))
    render(FigureSpec(csv_path=csv_path, x_param="sigma1", out_path=str(b)))
    assert a.read_bytes() == b.read_bytes()


def test_png_output(tmp_path):
    csv_path = write_stub(tmp_path / "s.csv")
    out = tmp_path / "fig.png"
    assert main([csv_path, "--x", "sigma1", "--out", str(out)]) == 0
    assert out.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_cli_exit_codes(tmp_path):
    csv_path = write_stub(tmp_path / "s.csv")
    assert main([csv_path, "--x", "sigma1", "--out", str(tmp_path / "ok.svg")]) == 0
    assert main([str(tmp_path / "missing.csv"), "--x", "sigma1", "--out", str(tmp_path / "x.svg")]) == 2


def test_spec_validation(tmp_path):
    with pytest.raises(RenderError):
        FigureSpec(csv_path="x.csv", x_param="gamma", out_path="y.svg")
    with pytest.raises(RenderError):
        FigureSpec(csv_path="x.csv", x_param="alpha", out_path="y.pdf", fmt="pdf")
