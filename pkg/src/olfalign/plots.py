"""Deterministic SVG chart rendering.

Hand-rolled SVG (no plotting library) so that identical inputs produce
byte-identical files: fixed canvas geometry, fixed fonts, fixed-precision
coordinate formatting, no timestamps or generated ids. Every chart also has
a structured-CSV twin written by the pipelines, so plots never need image
diffing.
"""

from __future__ import annotations

import numpy as np

from .metrics import RocCurve
from .pipelines import AGGREGATE, AlignmentReport, PcaScatterData
from .rsa import Rsm

W, H = 640.0, 480.0
MARGIN = dict(left=64.0, right=20.0, top=28.0, bottom=48.0)
PALETTE = ["#3465a4", "#cc0000", "#4e9a06", "#f57900", "#75507b",
           "#c17d11", "#2e8b8b", "#888a85"]
FONT = 'font-family="sans-serif" font-size="12"'


def _f(v: float) -> str:
    return f"{v:.3f}"


class _Canvas:
    def __init__(self, title: str = ""):
        self.parts = [
            '<?xml version="1.0" encoding="UTF-8"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{W:.0f}" height="{H:.0f}" '
            f'viewBox="0 0 {W:.0f} {H:.0f}">',
            f'<rect width="{W:.0f}" height="{H:.0f}" fill="white"/>',
        ]
        if title:
            self.text(W / 2, MARGIN["top"] - 10, title, anchor="middle", size=14)

    def line(self, x1, y1, x2, y2, color="#000000", width=1.0, dash=None):
        d = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(
            f'<line x1="{_f(x1)}" y1="{_f(y1)}" x2="{_f(x2)}" y2="{_f(y2)}" '
            f'stroke="{color}" stroke-width="{_f(width)}"{d}/>'
        )

    def polyline(self, pts, color, width=1.0, opacity=1.0):
        coords = " ".join(f"{_f(x)},{_f(y)}" for x, y in pts)
        op = f' stroke-opacity="{_f(opacity)}"' if opacity != 1.0 else ""
        self.parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{color}" '
            f'stroke-width="{_f(width)}"{op}/>'
        )

    def rect(self, x, y, w, h, fill, stroke="none"):
        self.parts.append(
            f'<rect x="{_f(x)}" y="{_f(y)}" width="{_f(w)}" height="{_f(h)}" '
            f'fill="{fill}" stroke="{stroke}"/>'
        )

    def circle(self, x, y, r, fill, stroke="none", stroke_width=1.0):
        sw = f' stroke-width="{_f(stroke_width)}"' if stroke != "none" else ""
        self.parts.append(
            f'<circle cx="{_f(x)}" cy="{_f(y)}" r="{_f(r)}" fill="{fill}" '
            f'stroke="{stroke}"{sw}/>'
        )

    def text(self, x, y, s, anchor="start", size=12, color="#000000"):
        self.parts.append(
            f'<text x="{_f(x)}" y="{_f(y)}" text-anchor="{anchor}" '
            f'font-family="sans-serif" font-size="{size}" fill="{color}">{_esc(s)}</text>'
        )

    def save(self, path):
        self.parts.append("</svg>")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(self.parts) + "\n")


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


class _Axes:
    """Linear data-to-pixel mapping with simple ticks."""

    def __init__(self, canvas, xlim, ylim, xlabel="", ylabel=""):
        self.c = canvas
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        self.px0 = MARGIN["left"]
        self.px1 = W - MARGIN["right"]
        self.py0 = H - MARGIN["bottom"]
        self.py1 = MARGIN["top"]
        c = canvas
        c.line(self.px0, self.py0, self.px1, self.py0)
        c.line(self.px0, self.py0, self.px0, self.py1)
        for t in np.linspace(self.x0, self.x1, 5):
            px = self.px(t)
            c.line(px, self.py0, px, self.py0 + 4)
            c.text(px, self.py0 + 18, f"{t:g}", anchor="middle")
        for t in np.linspace(self.y0, self.y1, 5):
            py = self.py(t)
            c.line(self.px0 - 4, py, self.px0, py)
            c.text(self.px0 - 8, py + 4, f"{t:g}", anchor="end")
        if xlabel:
            c.text((self.px0 + self.px1) / 2, H - 12, xlabel, anchor="middle")
        if ylabel:
            c.text(14, (self.py0 + self.py1) / 2, ylabel, anchor="middle")

    def px(self, x):
        return self.px0 + (x - self.x0) / (self.x1 - self.x0) * (self.px1 - self.px0)

    def py(self, y):
        return self.py0 + (y - self.y0) / (self.y1 - self.y0) * (self.py1 - self.py0)

    def pts(self, xs, ys):
        return [(self.px(x), self.py(y)) for x, y in zip(xs, ys)]


def render_roc_svg(curves: list[RocCurve], path, title="ROC curves across splits") -> None:
    """Thin curve per split, thick vertical-average curve, dashed diagonal."""
    c = _Canvas(title)
    ax = _Axes(c, (0.0, 1.0), (0.0, 1.0), "false positive rate", "true positive rate")
    ax_grid = np.linspace(0.0, 1.0, 101)
    mean_tpr = np.zeros_like(ax_grid)
    for curve in curves:
        c.polyline(ax.pts(curve.fpr, curve.tpr), PALETTE[0], width=0.7, opacity=0.35)
        mean_tpr += np.interp(ax_grid, curve.fpr, curve.tpr)
    if curves:
        mean_tpr /= len(curves)
        c.polyline(ax.pts(ax_grid, mean_tpr), PALETTE[0], width=2.5)
    c.line(ax.px(0.0), ax.py(0.0), ax.px(1.0), ax.py(1.0), color=PALETTE[1],
           width=1.0, dash="6,4")
    if curves:
        mean_auc = float(np.mean([cu.auc for cu in curves]))
        c.text(ax.px(0.55), ax.py(0.08), f"mean AUC = {mean_auc:.3f}")
    c.text(ax.px(0.55), ax.py(0.02), "mean curve: vertical average of splits", size=10)
    c.save(path)


def render_descriptor_bars_svg(report: AlignmentReport, metric: str, path,
                               title: str | None = None) -> None:
    """Per-descriptor bars with one-std whiskers for the given metric."""
    rows = [r for r in report.rows if r.metric == metric and r.descriptor != AGGREGATE
            and r.descriptor != "__pooled__"]
    if not rows:
        raise ValueError(f"report has no per-descriptor rows for metric {metric!r}")
    values = [r.mean for r in rows]
    stds = [r.std if r.std is not None else 0.0 for r in rows]
    lo = min(0.0, min(v - s for v, s in zip(values, stds)))
    hi = max(v + s for v, s in zip(values, stds)) * 1.1 or 1.0
    c = _Canvas(title or f"{metric} per descriptor")
    ax = _Axes(c, (0.0, float(len(rows))), (lo, hi), "", metric)
    bw = (ax.px1 - ax.px0) / max(len(rows), 1) * 0.7
    for i, r in enumerate(rows):
        x = ax.px(i + 0.5)
        y = ax.py(max(r.mean, 0.0))
        h = abs(ax.py(0.0) - ax.py(r.mean))
        c.rect(x - bw / 2, y if r.mean >= 0 else ax.py(0.0), bw, h, PALETTE[0])
        if r.std:
            c.line(x, ax.py(r.mean - r.std), x, ax.py(r.mean + r.std),
                   color="#2e3436", width=1.2)
        label = r.descriptor if len(r.descriptor) <= 10 else r.descriptor[:9] + "~"
        c.text(x, ax.py0 + 30, label, anchor="middle", size=9)
    c.save(path)


def render_layer_lines_svg(series: dict[str, list[tuple[float, float]]], path,
                           ylabel: str, title: str = "") -> None:
    """One line per named series of (layer, value) points."""
    if not series:
        raise ValueError("no series to plot")
    all_pts = [p for pts in series.values() for p in pts]
    xs = [p[0] for p in all_pts]
    ys = [p[1] for p in all_pts]
    pad = (max(ys) - min(ys) or 1.0) * 0.1
    c = _Canvas(title or f"{ylabel} by layer")
    ax = _Axes(c, (min(xs), max(xs) if max(xs) > min(xs) else min(xs) + 1),
               (min(ys) - pad, max(ys) + pad), "layer", ylabel)
    for i, (name, pts) in enumerate(sorted(series.items())):
        color = PALETTE[i % len(PALETTE)]
        pts = sorted(pts)
        c.polyline(ax.pts([p[0] for p in pts], [p[1] for p in pts]), color, width=1.8)
        for x, y in pts:
            c.circle(ax.px(x), ax.py(y), 3.0, color)
        c.text(ax.px1 - 150, MARGIN["top"] + 16 * (i + 1), name, color=color, size=11)
    c.save(path)


def render_scatter_svg(data: PcaScatterData, path, title="embedding map (PC1 vs PC2)") -> None:
    """Broad categories as filled colors, narrow categories as dark outlines."""
    xs, ys = data.coords[:, 0], data.coords[:, 1]
    padx = (xs.max() - xs.min() or 1.0) * 0.08
    pady = (ys.max() - ys.min() or 1.0) * 0.08
    c = _Canvas(title)
    ax = _Axes(c, (float(xs.min() - padx), float(xs.max() + padx)),
               (float(ys.min() - pady), float(ys.max() + pady)), "PC1", "PC2")
    for i in range(len(data.odorants)):
        broad = np.flatnonzero(data.broad_membership[i])
        fill = PALETTE[broad[0] % len(PALETTE)] if broad.size else "#babdb6"
        outlined = bool(data.narrow_membership[i].any()) if data.narrow_membership.size else False
        c.circle(ax.px(float(xs[i])), ax.py(float(ys[i])), 3.2, fill,
                 stroke="#2e3436" if outlined else "none", stroke_width=1.2)
    for j, name in enumerate(data.broad_names):
        c.text(ax.px1 - 150, MARGIN["top"] + 16 * (j + 1), f"broad: {name}",
               color=PALETTE[j % len(PALETTE)], size=11)
    if data.narrow_names:
        c.text(ax.px1 - 150, MARGIN["top"] + 16 * (len(data.broad_names) + 1),
               "outlined: narrow labels", size=11)
    c.save(path)


def render_plots(report: AlignmentReport, out_dir, curves=None, scatter=None,
                 rsms=None) -> list:
    """Render every SVG the report's task supports into out_dir.

    Returns the written paths. An empty report is a no-op with a warning.
    Rendering is a pure function of the inputs, so rerendering the same
    report produces byte-identical files.
    """
    import logging
    from pathlib import Path

    log = logging.getLogger(__name__)
    out_dir = Path(out_dir)
    if not report.rows:
        log.warning("render_plots: empty report, nothing to render")
        return []
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    def bars(metric, name):
        path = out_dir / name
        render_descriptor_bars_svg(report, metric, path)
        written.append(path)

    per_desc_metrics = {r.metric for r in report.rows
                        if r.descriptor not in (AGGREGATE, "__pooled__")}
    if report.task == "classify":
        if curves:
            path = out_dir / "roc.svg"
            render_roc_svg(curves, path)
            written.append(path)
        if "roc_auc" in per_desc_metrics:
            bars("roc_auc", "bars_roc_auc.svg")
    elif report.task == "regress":
        for metric in ("cc", "nrmse"):
            if metric in per_desc_metrics or any(r.metric == metric for r in report.rows):
                bars2 = out_dir / f"bars_{metric}.svg"
                render_descriptor_bars_svg(report, metric, bars2)
                written.append(bars2)
    elif report.task == "physchem":
        layers = {r.layer for r in report.rows}
        if len(layers) > 1:
            series = {}
            for r in report.rows:
                if r.metric == "cc" and r.descriptor == AGGREGATE:
                    x = float(r.layer) if isinstance(r.layer, int) else float(len(series))
                    series.setdefault("mean cc", []).append((x, r.mean))
            path = out_dir / "layers.svg"
            render_layer_lines_svg(series, path, "mean decoding CC")
            written.append(path)
        else:
            bars("cc", "bars_cc.svg")
    elif report.task == "rsa":
        r_rows = [r for r in report.rows if r.metric == "rsa_r"]
        layers = {r.layer for r in r_rows}
        if len(layers) > 1:
            series = {}
            for i, r in enumerate(sorted(r_rows, key=lambda q: str(q.layer))):
                x = float(r.layer) if isinstance(r.layer, int) else float(i)
                series.setdefault(f"{r.model} {r.dataset}".strip(), []).append((x, r.mean))
            path = out_dir / "layers.svg"
            render_layer_lines_svg(series, path, "RSA r")
            written.append(path)
        elif r_rows:
            # relabel so each bar names its (model, layer, dataset) triple
            from types import SimpleNamespace

            relabeled = AlignmentReport("rsa", [
                SimpleNamespace(descriptor=f"{r.model} L{r.layer} {r.dataset}".strip(),
                                metric=r.metric, mean=r.mean, std=r.std)
                for r in r_rows], "")
            path = out_dir / "rsa.svg"
            render_descriptor_bars_svg(relabeled, "rsa_r", path, title="RSA correlation")
            written.append(path)
    elif report.task == "noise_ceiling":
        metric = next((r.metric for r in report.rows), "noise_ceiling")
        bars(metric, "bars_nc.svg")
    if scatter is not None:
        path = out_dir / "scatter.svg"
        render_scatter_svg(scatter, path)
        written.append(path)
    for name, rsm in (rsms or {}).items():
        path = out_dir / f"rsm_{name}.svg"
        render_rsm_svg(rsm, path, title=f"{name} RSM")
        written.append(path)
    return written


def render_rsm_svg(rsm: Rsm, path, title="representational similarity matrix") -> None:
    """Heatmap with unrated cells left white."""
    n = len(rsm.odorants)
    c = _Canvas(title)
    side = min(W - MARGIN["left"] - MARGIN["right"], H - MARGIN["top"] - MARGIN["bottom"])
    cell = side / max(n, 1)
    x0, y0 = MARGIN["left"], MARGIN["top"]
    vals = rsm.matrix[rsm.mask]
    lo = float(vals.min()) if vals.size else 0.0
    hi = float(vals.max()) if vals.size else 1.0
    span = hi - lo or 1.0
    for i in range(n):
        for j in range(n):
            if not rsm.mask[i, j]:
                continue
            t = (float(rsm.matrix[i, j]) - lo) / span
            red = int(round(40 + 215 * t))
            blue = int(round(255 - 215 * t))
            c.rect(x0 + j * cell, y0 + i * cell, cell, cell,
                   f"#{red:02x}50{blue:02x}")
    c.rect(x0, y0, side, side, "none", stroke="#2e3436")
    c.text(x0, H - 16, f"scale: {lo:.3f} (blue) to {hi:.3f} (red); white = unrated", size=10)
    c.save(path)
