"""CMC curve output: CSV tables and a dependency-free SVG line plot."""
from __future__ import annotations

import csv
import io
from pathlib import Path
from xml.sax.saxutils import escape

from .identification import CmcCurve

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def cmc_csv(curve: CmcCurve) -> str:
    reps = curve.per_repetition.shape[0]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["rank", *(f"rate_rep{i + 1}" for i in range(reps)), "mean", "ci_low", "ci_high"])
    for k in range(len(curve.ranks)):
        row = [int(curve.ranks[k]), *(f"{curve.per_repetition[r, k]:.6f}" for r in range(reps)),
               f"{curve.mean[k]:.6f}", f"{curve.ci_low[k]:.6f}", f"{curve.ci_high[k]:.6f}"]
        writer.writerow(row)
    return buf.getvalue()


def read_cmc_csv(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def cmc_svg(curves: dict[str, CmcCurve], title: str = "CMC", width: int = 480, height: int = 360) -> str:
    """Plot mean CMC curves with shaded 95% bands, one colour per label."""
    left, right, top, bottom = 56, 16, 32, 44
    pw, ph = width - left - right, height - top - bottom
    k_max = max(len(c.ranks) for c in curves.values())

    def sx(k: float) -> float:
        return left + (k - 1) / max(k_max - 1, 1) * pw

    def sy(v: float) -> float:
        return top + (1.0 - min(max(v, 0.0), 1.0)) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
    ]
    for i in range(6):
        v = i / 5
        parts.append(f'<line x1="{left - 4}" y1="{sy(v):.1f}" x2="{left}" y2="{sy(v):.1f}" stroke="black"/>')
        parts.append(f'<text x="{left - 6}" y="{sy(v) + 4:.1f}" text-anchor="end">{v:.1f}</text>')
    step = max(1, k_max // 10)
    for k in range(1, k_max + 1, step):
        parts.append(f'<line x1="{sx(k):.1f}" y1="{top + ph}" x2="{sx(k):.1f}" y2="{top + ph + 4}" stroke="black"/>')
        parts.append(f'<text x="{sx(k):.1f}" y="{top + ph + 16}" text-anchor="middle">{k}</text>')
    parts.append(f'<text x="{left + pw / 2:.1f}" y="{height - 8}" text-anchor="middle">rank</text>')
    parts.append(f'<text x="14" y="{top + ph / 2:.1f}" text-anchor="middle" '
                 f'transform="rotate(-90 14 {top + ph / 2:.1f})">identification rate</text>')

    for i, (label, curve) in enumerate(sorted(curves.items())):
        colour = PALETTE[i % len(PALETTE)]
        ks = [int(k) for k in curve.ranks]
        upper = " ".join(f"{sx(k):.1f},{sy(v):.1f}" for k, v in zip(ks, curve.ci_high))
        lower = " ".join(f"{sx(k):.1f},{sy(v):.1f}" for k, v in reversed(list(zip(ks, curve.ci_low))))
        parts.append(f'<polygon points="{upper} {lower}" fill="{colour}" fill-opacity="0.15" stroke="none"/>')
        line = " ".join(f"{sx(k):.1f},{sy(v):.1f}" for k, v in zip(ks, curve.mean))
        parts.append(f'<polyline points="{line}" fill="none" stroke="{colour}" stroke-width="2"/>')
        ly = top + 14 + 16 * i
        parts.append(f'<line x1="{left + pw - 110}" y1="{ly}" x2="{left + pw - 90}" y2="{ly}" '
                     f'stroke="{colour}" stroke-width="2"/>')
        parts.append(f'<text x="{left + pw - 86}" y="{ly + 4}">{escape(label)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
