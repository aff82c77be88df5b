"""Deterministic CSV emission and dependency-free SVG charts.

CSV rows follow the fixed schema (inequality, domain, coef, eps, sigma,
ball_kind, trials, constant, worst_trial, config_hash); floats are printed
with a fixed %.12g format so identical configs reproduce identical bytes.
"""

from __future__ import annotations

import math

CSV_COLUMNS = ("inequality", "domain", "coef", "eps", "sigma", "ball_kind",
               "trials", "constant", "worst_trial", "config_hash")


def _fmt(v):
    if isinstance(v, float):
        return "%.12g" % v
    return str(v)


def write_csv(rows, path, columns=CSV_COLUMNS):
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(row.get(c, "")) for c in columns))
    data = "\n".join(lines) + "\n"
    with open(path, "w", newline="") as fh:
        fh.write(data)
    return data


# ---------------------------------------------------------------------------
# SVG

W, H = 800, 600
MARGIN = 70


def _log_ticks(lo, hi):
    lo_e = math.floor(math.log10(lo))
    hi_e = math.ceil(math.log10(hi))
    return [10.0 ** e for e in range(lo_e, hi_e + 1)]


class _LogLogFrame:
    def __init__(self, xs, ys):
        self.x0, self.x1 = min(xs), max(xs)
        self.y0, self.y1 = min(ys), max(ys)
        if self.x0 == self.x1:
            self.x0, self.x1 = self.x0 * 0.5, self.x1 * 2
        if self.y0 == self.y1:
            self.y0, self.y1 = self.y0 * 0.5, self.y1 * 2

    def px(self, x):
        t = (math.log10(x) - math.log10(self.x0)) / \
            (math.log10(self.x1) - math.log10(self.x0))
        return MARGIN + t * (W - 2 * MARGIN)

    def py(self, y):
        t = (math.log10(y) - math.log10(self.y0)) / \
            (math.log10(self.y1) - math.log10(self.y0))
        return H - MARGIN - t * (H - 2 * MARGIN)


def _axes(frame, xlabel, ylabel, title):
    parts = [
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<line x1="{MARGIN}" y1="{H - MARGIN}" x2="{W - MARGIN}" '
        f'y2="{H - MARGIN}" stroke="black"/>',
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" '
        f'y2="{H - MARGIN}" stroke="black"/>',
        f'<text x="{W / 2}" y="{H - 15}" text-anchor="middle" '
        f'font-size="14">{xlabel}</text>',
        f'<text x="18" y="{H / 2}" text-anchor="middle" font-size="14" '
        f'transform="rotate(-90 18 {H / 2})">{ylabel}</text>',
        f'<text x="{W / 2}" y="30" text-anchor="middle" '
        f'font-size="16">{title}</text>',
    ]
    for t in _log_ticks(frame.x0, frame.x1):
        if frame.x0 <= t <= frame.x1:
            px = frame.px(t)
            parts.append(f'<line x1="{px:.1f}" y1="{H - MARGIN}" '
                         f'x2="{px:.1f}" y2="{H - MARGIN + 6}" stroke="black"/>')
            parts.append(f'<text x="{px:.1f}" y="{H - MARGIN + 22}" '
                         f'text-anchor="middle" font-size="11">{t:g}</text>')
    for t in _log_ticks(frame.y0, frame.y1):
        if frame.y0 <= t <= frame.y1:
            py = frame.py(t)
            parts.append(f'<line x1="{MARGIN - 6}" y1="{py:.1f}" '
                         f'x2="{MARGIN}" y2="{py:.1f}" stroke="black"/>')
            parts.append(f'<text x="{MARGIN - 10}" y="{py + 4:.1f}" '
                         f'text-anchor="end" font-size="11">{t:g}</text>')
    return parts


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def svg_loglog(series, path, xlabel="eps", ylabel="error", title="",
               annotations=()):
    """Log-log polyline chart; series is a list of (label, xs, ys)."""
    xs = [x for _, sx, _ in series for x in sx]
    ys = [y for _, _, sy in series for y in sy if y > 0]
    frame = _LogLogFrame(xs, ys)
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" '
             f'height="{H}" viewBox="0 0 {W} {H}">']
    parts += _axes(frame, xlabel, ylabel, title)
    for k, (label, sx, sy) in enumerate(series):
        color = _PALETTE[k % len(_PALETTE)]
        pts = " ".join(f"{frame.px(x):.1f},{frame.py(y):.1f}"
                       for x, y in zip(sx, sy) if y > 0)
        parts.append(f'<polyline points="{pts}" fill="none" '
                     f'stroke="{color}" stroke-width="2"/>')
        for x, y in zip(sx, sy):
            if y > 0:
                parts.append(f'<circle cx="{frame.px(x):.1f}" '
                             f'cy="{frame.py(y):.1f}" r="3" fill="{color}"/>')
        parts.append(f'<text x="{W - MARGIN + 5}" y="{MARGIN + 18 * k + 10}" '
                     f'font-size="12" fill="{color}">{label}</text>')
    for k, text in enumerate(annotations):
        parts.append(f'<text x="{MARGIN + 10}" y="{MARGIN + 18 * k + 10}" '
                     f'font-size="12">{text}</text>')
    parts.append("</svg>")
    data = "\n".join(parts) + "\n"
    with open(path, "w") as fh:
        fh.write(data)
    return data


def sweep_chart(report, path):
    """Constant vs eps line chart, one series per sigma."""
    by_sigma = {}
    for row in report.rows:
        if row.get("status", "ok") != "ok":
            continue
        by_sigma.setdefault(row["sigma"], []).append((row["eps"], row["constant"]))
    series = []
    for sg in sorted(by_sigma):
        pts = sorted(by_sigma[sg])
        series.append((f"sigma={sg:+g}", [p[0] for p in pts], [p[1] for p in pts]))
    uni = report.per_sigma_uniformity()
    notes = [f"max/min(sigma={sg:+g}) = {u:.3f}" for sg, u in sorted(uni.items())]
    return svg_loglog(series, path, xlabel="eps", ylabel="measured constant",
                      title=f"{report.config['domain']} / {report.config['coef']}"
                            f" [{report.hash}]", annotations=notes)


def rate_chart(fit, path, title="convergence"):
    notes = [f"fitted slope = {fit.slope:.3f}",
             f"fit residual = {fit.residual:.3f}"]
    return svg_loglog([("error", list(fit.ladder), list(fit.errors))], path,
                      title=title, annotations=notes)
