"""Self-contained SVG rendering for reports.

Every function is a pure mapping from report data to an SVG string: no
external references, no timestamps, fixed float formatting, so identical
reports render byte-identical files.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

POSITIVE_COLOR = "#d62728"
NEGATIVE_COLOR = "#1f77b4"
FOLD_PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)


def _fmt(v: float) -> str:
    return f"{v:.4f}".rstrip("0").rstrip(".") or "0"


class SvgCanvas:
    def __init__(self, width: int, height: int):
        self.width = width
        self.height = height
        self.parts: list[str] = []

    def line(self, x1, y1, x2, y2, color="#333333", width=1.0, dash=None):
        d = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(
            f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}" '
            f'stroke="{color}" stroke-width="{_fmt(width)}"{d} />'
        )

    def rect(self, x, y, w, h, fill="none", stroke="#333333", stroke_width=1.0):
        self.parts.append(
            f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(w)}" height="{_fmt(h)}" '
            f'fill="{fill}" stroke="{stroke}" stroke-width="{_fmt(stroke_width)}" />'
        )

    def circle(self, cx, cy, r, color):
        self.parts.append(
            f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="{_fmt(r)}" fill="{color}" />'
        )

    def polyline(self, points, color, width=1.5):
        coords = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in points)
        self.parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{color}" '
            f'stroke-width="{_fmt(width)}" />'
        )

    def text(self, x, y, content, size=12, anchor="start", color="#111111", rotate=None):
        transform = f' transform="rotate({rotate} {_fmt(x)} {_fmt(y)})"' if rotate else ""
        self.parts.append(
            f'<text x="{_fmt(x)}" y="{_fmt(y)}" font-size="{size}" '
            f'font-family="sans-serif" text-anchor="{anchor}" fill="{color}"{transform}>'
            f"{escape(str(content))}</text>"
        )

    def render(self) -> str:
        body = "\n".join(self.parts)
        return (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" '
            f'height="{self.height}" viewBox="0 0 {self.width} {self.height}">\n'
            f'<rect x="0" y="0" width="{self.width}" height="{self.height}" fill="#ffffff" />\n'
            f"{body}\n</svg>\n"
        )


def roc_overlay_svg(report: dict) -> str:
    """Per-fold ROC curves with a legend of fold AUCs (first repeat shown)."""
    size, margin = 420, 55
    legend_w = 170
    canvas = SvgCanvas(size + legend_w, size + 20)
    plot = size - 2 * margin

    def sx(fpr):
        return margin + fpr * plot

    def sy(tpr):
        return size - margin - tpr * plot

    canvas.rect(margin, margin, plot, plot, stroke="#888888")
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        canvas.text(sx(tick), size - margin + 16, _fmt(tick), size=10, anchor="middle")
        canvas.text(margin - 8, sy(tick) + 4, _fmt(tick), size=10, anchor="end")
    canvas.text(size / 2, size - 12, "1 - specificity", anchor="middle")
    canvas.text(16, size / 2, "sensitivity", anchor="middle", rotate=-90)
    canvas.line(sx(0), sy(0), sx(1), sy(1), color="#aaaaaa", dash="4,4")

    folds = [f for f in report["folds"] if f["repeat"] == 0]
    for i, fold in enumerate(folds):
        color = FOLD_PALETTE[i % len(FOLD_PALETTE)]
        pts = [(sx(p[0]), sy(p[1])) for p in fold["roc_points"]]
        canvas.polyline(pts, color)
        ly = margin + 16 * i
        canvas.line(size + 8, ly, size + 28, ly, color=color, width=2)
        canvas.text(size + 34, ly + 4, f"fold {fold['fold']} (AUC={fold['auc']:.2f})", size=11)

    agg = report["aggregate"]["auc"]
    title = (
        f"{report['model']['family']} ROC, mean AUC "
        f"{agg['mean']:.2f} ± {agg['sd']:.2f}"
    )
    canvas.text(size / 2, 24, title, size=14, anchor="middle")
    return canvas.render()


def confusion_svg(report: dict) -> str:
    """Row-normalized confusion heatmap of the worst-AUC fold."""
    worst = min(report["folds"], key=lambda f: (f["auc"], f["repeat"], f["fold"]))
    matrix = worst["at_cutoff"]["normalized_confusion"]
    counts = worst["at_cutoff"]["confusion"]
    cell, margin_l, margin_t = 130, 120, 80
    canvas = SvgCanvas(margin_l + 2 * cell + 30, margin_t + 2 * cell + 60)

    labels = ("negative", "positive")
    raw = [[counts["tn"], counts["fp"]], [counts["fn"], counts["tp"]]]
    for i in range(2):
        for j in range(2):
            frac = matrix[i][j]
            # white -> blue ramp
            channel = int(round(255 - 155 * frac))
            fill = f"#{channel:02x}{channel:02x}ff"
            x = margin_l + j * cell
            y = margin_t + i * cell
            canvas.rect(x, y, cell, cell, fill=fill, stroke="#555555")
            canvas.text(x + cell / 2, y + cell / 2 - 4, f"{frac:.2f}", size=16, anchor="middle")
            canvas.text(x + cell / 2, y + cell / 2 + 16, f"n={raw[i][j]}", size=11, anchor="middle")

    for j, lab in enumerate(labels):
        canvas.text(margin_l + j * cell + cell / 2, margin_t - 10, lab, size=12, anchor="middle")
    for i, lab in enumerate(labels):
        canvas.text(margin_l - 10, margin_t + i * cell + cell / 2 + 4, lab, size=12, anchor="end")
    canvas.text(margin_l + cell, margin_t - 34, "predicted", size=12, anchor="middle")
    canvas.text(24, margin_t + cell, "actual", size=12, anchor="middle", rotate=-90)
    canvas.text(
        margin_l + cell,
        margin_t + 2 * cell + 36,
        f"{report['model']['family']}: worst fold (repeat {worst['repeat']}, "
        f"fold {worst['fold']}, AUC={worst['auc']:.2f})",
        size=12,
        anchor="middle",
    )
    return canvas.render()


def importance_svg(table: list[tuple[str, float]], title: str) -> str:
    """Horizontal importance bars, already sorted descending."""
    row_h, margin_l, margin_t, bar_max = 24, 110, 50, 320
    height = margin_t + row_h * len(table) + 30
    canvas = SvgCanvas(margin_l + bar_max + 70, height)
    canvas.text((margin_l + bar_max) / 2 + 40, 24, title, size=14, anchor="middle")
    for i, (name, value) in enumerate(table):
        y = margin_t + i * row_h
        canvas.text(margin_l - 8, y + 14, name, size=11, anchor="end")
        canvas.rect(margin_l, y + 2, bar_max * value / 100.0, row_h - 6,
                    fill=NEGATIVE_COLOR, stroke="none", stroke_width=0)
        canvas.text(margin_l + bar_max * value / 100.0 + 6, y + 14, f"{value:.1f}", size=10)
    return canvas.render()


def box_grid_svg(grid: dict, feature_order: list[str], cohort_order: list[str]) -> str:
    """Grid of box plots: rows are features, columns cohorts, boxes by label.

    ``grid[feature][cohort]`` holds {"negative": BoxSummary, "positive":
    BoxSummary, "p_value": float}.
    """
    cell_w, cell_h = 190, 96
    margin_l, margin_t = 90, 50
    width = margin_l + cell_w * len(cohort_order) + 20
    height = margin_t + cell_h * len(feature_order) + 20
    canvas = SvgCanvas(width, height)

    for c, cohort in enumerate(cohort_order):
        canvas.text(margin_l + c * cell_w + cell_w / 2, margin_t - 12, cohort,
                    size=13, anchor="middle")

    for r, feature in enumerate(feature_order):
        y0 = margin_t + r * cell_h
        canvas.text(margin_l - 8, y0 + cell_h / 2, feature, size=11, anchor="end")
        for c, cohort in enumerate(cohort_order):
            x0 = margin_l + c * cell_w
            cell = grid.get(feature, {}).get(cohort)
            canvas.rect(x0, y0, cell_w, cell_h, stroke="#dddddd")
            if cell is None:
                continue
            boxes = [(cell["negative"], NEGATIVE_COLOR), (cell["positive"], POSITIVE_COLOR)]
            lo = min(min(b.whisker_low, *(b.outliers or (b.whisker_low,))) for b, _ in boxes)
            hi = max(max(b.whisker_high, *(b.outliers or (b.whisker_high,))) for b, _ in boxes)
            span = (hi - lo) or 1.0
            pad = 10

            def vy(v):
                return y0 + cell_h - pad - (v - lo) / span * (cell_h - 2 * pad)

            for b_i, (summary, color) in enumerate(boxes):
                cx = x0 + cell_w * (0.3 + 0.35 * b_i)
                half = 14
                canvas.line(cx, vy(summary.whisker_low), cx, vy(summary.q1), color=color)
                canvas.line(cx, vy(summary.q3), cx, vy(summary.whisker_high), color=color)
                canvas.rect(cx - half, vy(summary.q3), 2 * half,
                            max(vy(summary.q1) - vy(summary.q3), 0.5),
                            fill="none", stroke=color, stroke_width=1.4)
                canvas.line(cx - half, vy(summary.median), cx + half, vy(summary.median),
                            color=color, width=2)
                for out in summary.outliers:
                    canvas.circle(cx, vy(out), 1.6, color)
            canvas.text(x0 + cell_w - 6, y0 + 14, f"p={cell['p_value']:.3g}", size=9, anchor="end")
    return canvas.render()
