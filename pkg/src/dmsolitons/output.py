"""File emission shared by the command-line front end.

Every JSON document carries a ``meta`` block with the config digest, the
profile's tau and the package version.  Nothing time- or host-dependent is
written, so identical configs give byte-identical files.
"""
from __future__ import annotations

import csv
import math
import os
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .analysis.report import digest, dumps

OUTPUT_ENV = "DMSOLITON_OUTPUT_DIR"


def version() -> str:
    from . import __version__

    return __version__


def output_dir(flag: str | None) -> Path:
    """``--out`` wins, then ``$DMSOLITON_OUTPUT_DIR``, then the working directory."""
    out = Path(flag or os.environ.get(OUTPUT_ENV) or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def meta(config: dict, tau: float | None) -> dict:
    return {"config_digest": digest(config), "tau": tau, "version": version(), "config": config}


def write_json(path: Path, payload: dict, config: dict, tau: float | None) -> None:
    doc = dict(payload)
    doc["meta"] = meta(config, tau)
    Path(path).write_text(dumps(doc))


def fmt(x) -> str:
    return f"{x:.17g}" if isinstance(x, (float, np.floating)) else str(x)


def write_rows(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])


def svg_log_plot(path: Path, series: list[tuple[str, np.ndarray, np.ndarray, str]],
                 title: str = "", xlabel: str = "n", width: int = 640, height: int = 420) -> None:
    """Polylines on a linear-x / log10-y frame; non-positive y values are dropped."""
    pts = []
    for _, x, y, _ in series:
        x, y = np.asarray(x, float), np.asarray(y, float)
        keep = (y > 0) & np.isfinite(y)
        pts.append((x[keep], np.log10(y[keep])))
    xs = np.concatenate([p[0] for p in pts] + [np.zeros(1)])
    ys = np.concatenate([p[1] for p in pts] + [np.zeros(1)])
    x0, x1 = float(xs.min()), float(max(xs.max(), xs.min() + 1))
    y0, y1 = math.floor(ys.min()), math.ceil(ys.max())
    y1 = max(y1, y0 + 1)
    ml, mr, mt, mb = 70, 20, 30, 45
    pw, ph = width - ml - mr, height - mt - mb

    def sx(v):
        return ml + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return mt + (y1 - v) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="11">',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    step = max(1, (y1 - y0) // 10)
    for k in range(y0, y1 + 1, step):
        y = sy(k)
        out.append(f'<line x1="{ml - 4}" y1="{y:.2f}" x2="{ml}" y2="{y:.2f}" stroke="black"/>')
        out.append(f'<text x="{ml - 6}" y="{y + 4:.2f}" text-anchor="end">1e{k}</text>')
    xstep = max(1, int(round((x1 - x0) / 8)))
    for k in range(int(x0), int(x1) + 1, xstep):
        x = sx(k)
        out.append(f'<line x1="{x:.2f}" y1="{mt + ph}" x2="{x:.2f}" y2="{mt + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{x:.2f}" y="{mt + ph + 16}" text-anchor="middle">{k}</text>')
    out.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 8}" text-anchor="middle">{escape(xlabel)}</text>')
    if title:
        out.append(f'<text x="{ml + pw / 2:.1f}" y="18" text-anchor="middle">{escape(title)}</text>')
    for i, ((label, _, _, colour), (px, py)) in enumerate(zip(series, pts)):
        if px.size:
            coords = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(px, py))
            out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{coords}"/>')
        ly = mt + 14 + 14 * i
        out.append(f'<line x1="{ml + pw - 150}" y1="{ly - 4}" x2="{ml + pw - 130}" y2="{ly - 4}" '
                   f'stroke="{colour}" stroke-width="2"/>')
        out.append(f'<text x="{ml + pw - 125}" y="{ly}">{escape(label)}</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")
