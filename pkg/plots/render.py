#!/usr/bin/env python3
"""Render the benchmark figures from experiment aggregate CSVs.

Reads only the CSV files the experiment runner writes; the library itself is
never imported.  One figure per invocation:

    python plots/render.py --figure fig1 --in fig1/aggregate.csv --out fig1.svg

fig1 / fig2   two log-log panels (max abs error, RMSE) against the rule
              size, one series per method, with r^(-1/2) and r^(-1) guide
              lines drawn from the known rate labels (not fitted).
fig3          a 2x2 panel grid, one panel per link kind, showing
              sqrt(n) * E(R(n)) against the sample size.
fig4          one panel per sample size: estimator RMSE against rule size
              with the sampling-error floor as a dashed line.

Output is SVG (add --png for a PNG next to it).  An aggregate with a valid
header but no data rows renders an empty figure with a warning and exits 0;
missing columns exit with a schema error listing the missing names.
"""
from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# keep legend/axis text as real <text> elements in the SVG and make the
# element ids reproducible across runs
plt.rcParams["svg.fonttype"] = "none"
plt.rcParams["svg.hashsalt"] = "male-plots"

REQUIRED_COLUMNS = {
    "fig1": ("method", "r", "max_abs_error", "rmse"),
    "fig2": ("method", "r", "max_abs_error", "rmse"),
    "fig3": ("link", "method", "n", "scaled_error"),
    "fig4": ("method", "n", "r", "rmse"),
}

LINK_PANEL_ORDER = ("constant", "logarithmic", "sqrt", "linear")


class SchemaError(Exception):
    pass


def load_aggregate(path, figure):
    required = REQUIRED_COLUMNS[figure]
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [col for col in required if col not in header]
        if missing:
            raise SchemaError(
                f"{path}: missing required columns {', '.join(missing)}"
            )
        rows = list(reader)
    return rows


def _series(rows, key_field, x_field, y_field):
    """Group rows into {key: (xs, ys)} sorted by x."""
    grouped = {}
    for row in rows:
        grouped.setdefault(row[key_field], []).append(
            (float(row[x_field]), float(row[y_field]))
        )
    return {
        key: tuple(zip(*sorted(points))) for key, points in grouped.items()
    }


def _guide_lines(ax, xs, ys):
    """Rate guides r^(-1/2) and r^(-1) anchored at the first data point."""
    if not xs or not ys:
        return
    x0, x1 = min(xs), max(xs)
    y0 = max(ys)
    grid = [x0 * (x1 / x0) ** (k / 40.0) for k in range(41)]
    for slope, style in ((-0.5, ":"), (-1.0, "--")):
        ax.plot(
            grid, [y0 * (x / x0) ** slope for x in grid],
            style, color="gray", linewidth=0.8,
            label=f"slope {slope:g}",
        )


def render_error_panels(rows, out_path, title):
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    panels = (("max_abs_error", "maximum absolute error"), ("rmse", "RMSE"))
    all_x, all_y = [], []
    for ax, (column, label) in zip(axes, panels):
        series = _series(rows, "method", "r", column)
        for method, (xs, ys) in sorted(series.items()):
            ax.plot(xs, ys, marker="o", markersize=3, label=method)
            all_x += list(xs)
            all_y += list(ys)
        _guide_lines(ax, all_x, all_y)
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("rule size r")
        ax.set_ylabel(label)
        ax.legend(fontsize=8)
    fig.suptitle(title)
    fig.tight_layout()
    return fig


def render_fig3(rows, out_path):
    fig, axes = plt.subplots(2, 2, figsize=(10, 8))
    present = [l for l in LINK_PANEL_ORDER if any(r["link"] == l for r in rows)]
    extra = sorted({r["link"] for r in rows} - set(LINK_PANEL_ORDER))
    panels = (present + extra + list(LINK_PANEL_ORDER))[:4]
    for ax, link in zip(axes.ravel(), panels):
        link_rows = [r for r in rows if r["link"] == link]
        series = _series(link_rows, "method", "n", "scaled_error")
        for method, (xs, ys) in sorted(series.items()):
            ax.plot(xs, ys, marker="o", markersize=3, label=method)
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_title(f"{link} link")
        ax.set_xlabel("sample size n")
        ax.set_ylabel("sqrt(n) * E(R(n))")
        if series:
            ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def render_fig4(rows, out_path):
    ns = sorted({int(float(r["n"])) for r in rows})
    ncols = max(1, len(ns))
    fig, axes = plt.subplots(1, ncols, figsize=(5 * ncols, 4), squeeze=False)
    for ax, n in zip(axes.ravel(), ns):
        n_rows = [r for r in rows if int(float(r["n"])) == n]
        floor_rows = [r for r in n_rows if r["method"] == "floor"]
        method_rows = [r for r in n_rows if r["method"] != "floor"]
        series = _series(method_rows, "method", "r", "rmse")
        r_grid = sorted({float(r["r"]) for r in method_rows}) or [1.0, 2.0]
        for method, (xs, ys) in sorted(series.items()):
            ax.plot(xs, ys, marker="o", markersize=3, label=method)
        if floor_rows:
            floor = float(floor_rows[0]["rmse"])
            ax.plot(
                [min(r_grid), max(r_grid)], [floor, floor], "--", color="black",
                label="sampling error only",
            )
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_title(f"n = {n}")
        ax.set_xlabel("rule size r")
        ax.set_ylabel("RMSE")
        if series or floor_rows:
            ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def render(figure, in_path, out_path, png=False):
    rows = load_aggregate(in_path, figure)
    if not rows:
        print(f"warning: {in_path} has no data rows; rendering an empty figure",
              file=sys.stderr)
    if figure in ("fig1", "fig2"):
        title = "smooth model" if figure == "fig1" else "indicator model"
        fig = render_error_panels(rows, out_path, f"convergence, {title}")
    elif figure == "fig3":
        fig = render_fig3(rows, out_path)
    else:
        fig = render_fig4(rows, out_path)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    # drop the date stamp so repeated renders are byte-identical
    fig.savefig(out_path, metadata={"Date": None})
    if png:
        fig.savefig(out_path.with_suffix(".png"), dpi=150)
    plt.close(fig)
    return out_path


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--figure", required=True,
                        choices=("fig1", "fig2", "fig3", "fig4"))
    parser.add_argument("--in", dest="in_path", required=True,
                        help="aggregate.csv from the experiment runner")
    parser.add_argument("--out", required=True, help="output SVG path")
    parser.add_argument("--png", action="store_true",
                        help="also write a PNG next to the SVG")
    args = parser.parse_args(argv)
    try:
        out = render(args.figure, args.in_path, args.out, png=args.png)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
