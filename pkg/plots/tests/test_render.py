import subprocess
import sys
from pathlib import Path

import pytest

PLOTS_DIR = Path(__file__).resolve().parents[1]
SAMPLES = PLOTS_DIR / "samples"
RENDER = PLOTS_DIR / "render.py"

sys.path.insert(0, str(PLOTS_DIR))

import render  # noqa: E402


def run_cli(*args):
    return subprocess.run(
        [sys.executable, str(RENDER), *args], capture_output=True, text=True
    )


@pytest.mark.parametrize("figure", ["fig1", "fig2", "fig3", "fig4"])
def test_samples_render(tmp_path, figure):
    out = tmp_path / f"{figure}.svg"
    proc = run_cli(
        "--figure", figure,
        "--in", str(SAMPLES / figure / "aggregate.csv"),
        "--out", str(out),
    )
    assert proc.returncode == 0, proc.stderr
    assert out.exists() and out.stat().st_size > 0


def _svg_text(path):
    return path.read_text()


@pytest.mark.parametrize("figure", ["fig1", "fig2", "fig3", "fig4"])
def test_one_series_per_method(tmp_path, figure):
    out = tmp_path / f"{figure}.svg"
    src = SAMPLES / figure / "aggregate.csv"
    rows = render.load_aggregate(src, figure)
    methods = sorted({r["method"] for r in rows} - {"floor"})
    assert run_cli("--figure", figure, "--in", str(src),
                   "--out", str(out)).returncode == 0
    svg = _svg_text(out)
    for method in methods:
        assert method in svg


def test_fig3_has_four_panels(tmp_path):
    out = tmp_path / "fig3.svg"
    assert run_cli("--figure", "fig3", "--in",
                   str(SAMPLES / "fig3" / "aggregate.csv"),
                   "--out", str(out)).returncode == 0
    svg = _svg_text(out)
    assert svg.count('id="axes_') == 4
    for link in ("constant", "logarithmic", "sqrt", "linear"):
        assert f"{link} link" in svg


def test_fig4_includes_dashed_floor(tmp_path):
    out = tmp_path / "fig4.svg"
    assert run_cli("--figure", "fig4", "--in",
                   str(SAMPLES / "fig4" / "aggregate.csv"),
                   "--out", str(out)).returncode == 0
    svg = _svg_text(out)
    assert "sampling error only" in svg
    assert "stroke-dasharray" in svg


def test_empty_aggregate_exits_zero(tmp_path):
    empty = tmp_path / "aggregate.csv"
    empty.write_text("model,method,r,max_abs_error,rmse\n")
    out = tmp_path / "empty.svg"
    proc = run_cli("--figure", "fig1", "--in", str(empty), "--out", str(out))
    assert proc.returncode == 0
    assert "no data rows" in proc.stderr
    assert out.exists()


def test_missing_columns_schema_error(tmp_path):
    broken = tmp_path / "aggregate.csv"
    broken.write_text("model,method,r\n")
    out = tmp_path / "broken.svg"
    proc = run_cli("--figure", "fig1", "--in", str(broken), "--out", str(out))
    assert proc.returncode == 2
    assert "max_abs_error" in proc.stderr
    assert "rmse" in proc.stderr
    assert not out.exists()


def test_synthetic_half_slope_curve(tmp_path):
    # a constructed error = r^(-1/2) series renders parallel to the guide
    rows = ["model,method,r,max_abs_error,rmse"]
    for r in (4, 16, 64, 256):
        rows.append(f"toy,mc,{r},{r**-0.5},{r**-0.5}")
    path = tmp_path / "aggregate.csv"
    path.write_text("\n".join(rows) + "\n")
    out = tmp_path / "toy.svg"
    proc = run_cli("--figure", "fig1", "--in", str(path), "--out", str(out))
    assert proc.returncode == 0
    svg = _svg_text(out)
    assert "mc" in svg and "slope -0.5" in svg


def test_fig4_rmse_equal_to_floor(tmp_path):
    rows = ["model,method,n,r,rmse,reps_used,nonconverged"]
    for r in (2, 8, 32):
        rows.append(f"toy,gh,100,{r},0.25,10,0")
    rows.append("toy,floor,100,100,0.25,10,0")
    path = tmp_path / "aggregate.csv"
    path.write_text("\n".join(rows) + "\n")
    out = tmp_path / "coincide.svg"
    proc = run_cli("--figure", "fig4", "--in", str(path), "--out", str(out))
    assert proc.returncode == 0
    assert "sampling error only" in _svg_text(out)


def test_idempotent_rendering(tmp_path):
    out = tmp_path / "fig2.svg"
    src = str(SAMPLES / "fig2" / "aggregate.csv")
    before = Path(src).read_bytes()
    assert run_cli("--figure", "fig2", "--in", src, "--out", str(out)).returncode == 0
    first = out.read_bytes()
    assert run_cli("--figure", "fig2", "--in", src, "--out", str(out)).returncode == 0
    assert Path(src).read_bytes() == before  # read-only over the CSV
    assert out.read_bytes() == first


def test_png_flag(tmp_path):
    out = tmp_path / "fig1.svg"
    proc = run_cli("--figure", "fig1", "--in",
                   str(SAMPLES / "fig1" / "aggregate.csv"),
                   "--out", str(out), "--png")
    assert proc.returncode == 0
    assert out.with_suffix(".png").exists()
