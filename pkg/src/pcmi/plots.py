"""Plot-ready CSV exports and minimal self-contained SVG charts."""
from __future__ import annotations

import csv
import io


def quartiles_csv(summary: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["group", "score", "min", "q1", "median", "q3", "max"])
    for group, scores in summary["quartiles"].items():
        for score_name, points in scores.items():
            writer.writerow(
                [group, score_name, points["min"], points["q1"], points["median"], points["q3"], points["max"]]
            )
    return buf.getvalue()


def histogram_csv(summary: dict, group: str) -> str:
    """Flattened 2-D histogram rows: k_bin, h_bin, count."""
    hist = summary["histograms"][group]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["k_bin", "h_bin", "count"])
    for i in range(hist.shape[0]):
        for j in range(hist.shape[1]):
            writer.writerow([i, j, int(hist[i, j])])
    return buf.getvalue()


def attribution_csv(ratios: dict[str, float]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["score", "mean_attribution_ratio"])
    for name, value in ratios.items():
        writer.writerow([name, value])
    return buf.getvalue()


def _svg_header(width: int, height: int) -> str:
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">'
        f'<rect width="{width}" height="{height}" fill="white"/>'
    )


def line_chart_svg(series: dict[str, list[float]], labels: list[str] | None = None,
                   width: int = 720, height: int = 280) -> str:
    """Token-level score traces (one polyline per series)."""
    colors = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd"]
    margin = 40
    all_values = [v for vals in series.values() for v in vals]
    if not all_values:
        return _svg_header(width, height) + "</svg>"
    lo, hi = min(all_values), max(all_values)
    if hi == lo:
        hi = lo + 1.0
    n = max(len(vals) for vals in series.values())
    parts = [_svg_header(width, height)]

    def sx(i: float) -> float:
        return margin + (width - 2 * margin) * (i / max(n - 1, 1))

    def sy(v: float) -> float:
        return height - margin - (height - 2 * margin) * ((v - lo) / (hi - lo))

    zero_y = sy(0.0) if lo <= 0 <= hi else None
    if zero_y is not None:
        parts.append(
            f'<line x1="{margin}" y1="{zero_y:.1f}" x2="{width - margin}" y2="{zero_y:.1f}" '
            'stroke="#999" stroke-dasharray="4 3"/>'
        )
    for idx, (name, vals) in enumerate(series.items()):
        points = " ".join(f"{sx(i):.1f},{sy(v):.1f}" for i, v in enumerate(vals))
        color = colors[idx % len(colors)]
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{points}"/>')
        parts.append(
            f'<text x="{margin + 4}" y="{16 + 14 * idx}" fill="{color}" font-size="12">{name}</text>'
        )
    if labels:
        step = max(1, len(labels) // 20)
        for i in range(0, len(labels), step):
            parts.append(
                f'<text x="{sx(i):.1f}" y="{height - margin + 14}" font-size="9" '
                f'text-anchor="middle">{labels[i]}</text>'
            )
    parts.append("</svg>")
    return "".join(parts)


def box_plot_svg(summary: dict, score: str, width: int = 480, height: int = 280) -> str:
    """One box per group for the given score (pcmi_h or pcmi_k)."""
    groups = list(summary["quartiles"])
    margin = 40
    values = []
    for group in groups:
        points = summary["quartiles"][group][score]
        values += [points["min"], points["max"]]
    lo, hi = min(values), max(values)
    if hi == lo:
        hi = lo + 1.0

    def sy(v: float) -> float:
        return height - margin - (height - 2 * margin) * ((v - lo) / (hi - lo))

    slot = (width - 2 * margin) / max(len(groups), 1)
    parts = [_svg_header(width, height)]
    for idx, group in enumerate(groups):
        p = summary["quartiles"][group][score]
        cx = margin + slot * (idx + 0.5)
        half = slot * 0.25
        parts.append(
            f'<line x1="{cx:.1f}" y1="{sy(p["min"]):.1f}" x2="{cx:.1f}" y2="{sy(p["max"]):.1f}" stroke="black"/>'
        )
        parts.append(
            f'<rect x="{cx - half:.1f}" y="{sy(p["q3"]):.1f}" width="{2 * half:.1f}" '
            f'height="{sy(p["q1"]) - sy(p["q3"]):.1f}" fill="#cfe2f3" stroke="black"/>'
        )
        parts.append(
            f'<line x1="{cx - half:.1f}" y1="{sy(p["median"]):.1f}" x2="{cx + half:.1f}" '
            f'y2="{sy(p["median"]):.1f}" stroke="black" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{cx:.1f}" y="{height - margin + 16}" font-size="11" text-anchor="middle">{group}</text>'
        )
    parts.append(f'<text x="{margin}" y="16" font-size="12">{score}</text>')
    parts.append("</svg>")
    return "".join(parts)
