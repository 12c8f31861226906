"""CSV, JSON and self-contained SVG writers.

Every file states its units: CSVs in ``#`` comment headers, JSON in a
``units`` object.  Floats are written with ``repr`` and JSON keys sorted so
identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
from typing import Iterable, Sequence

import numpy as np

from .asymptotics import ConvergenceReport
from .floquet import BandStructure, GapReport

EIGEN_UNITS = "1/length^2"


def _num(x) -> str:
    x = float(x)
    return repr(x) if math.isfinite(x) else str(x)


def _csv(header_comments: Sequence[str], columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    for line in header_comments:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_num(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _clean(obj):
    """Convert numpy scalars/arrays to JSON-native values; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def to_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def spectrum_csv(eigenvalues, residuals, lid: str, epsilon: float) -> str:
    return _csv([f"lambda units: {EIGEN_UNITS}; residual: normwise backward error (dimensionless)",
                 f"lid: {lid}; epsilon: {_num(epsilon)}"],
                ["k", "lambda", "residual"],
                ((i + 1, float(v), float(r)) for i, (v, r) in enumerate(zip(eigenvalues, residuals))))


def bands_csv(bands: BandStructure) -> str:
    rows = ((float(phi), k + 1, float(bands.values[i, k]))
            for i, phi in enumerate(bands.phi_grid) for k in range(bands.k_max))
    return _csv([f"phi units: rad; lambda units: {EIGEN_UNITS}", f"epsilon: {_num(bands.epsilon)}"],
                ["phi", "k", "lambda"], rows)


def brackets_csv(bands: BandStructure) -> str:
    rows = ((k + 1, float(bands.lambda_N[k]), float(bands.lambda_D[k])) for k in range(bands.k_max))
    return _csv([f"lambda units: {EIGEN_UNITS}", f"epsilon: {_num(bands.epsilon)}"],
                ["k", "lambda_N", "lambda_D"], rows)


def gap_json(report: GapReport, alpha_eps: float, beta_eps: float) -> str:
    return to_json({
        "epsilon": report.epsilon,
        "window": report.window,
        "gaps": [g.as_dict() for g in report.gaps],
        "alpha_eps": alpha_eps,
        "beta_eps": beta_eps,
        "units": {"eigenvalues": EIGEN_UNITS, "epsilon": "dimensionless"},
    })


def convergence_csv(report: ConvergenceReport) -> str:
    ea, eb = report.err_alpha, report.err_beta
    rows = ((r.epsilon, r.alpha_eps, r.beta_eps, r.lambda_1_D, r.lambda_1_pi, r.lambda_2_N, r.lambda_2_0,
             float(ea[i]), float(eb[i])) for i, r in enumerate(report.records))
    return _csv([f"eigenvalue units: {EIGEN_UNITS}; errors relative to alpha={_num(report.alpha)}, "
                 f"beta={_num(report.beta)}",
                 f"h: {_num(report.h)}; richardson: {report.richardson}"],
                ["epsilon", "alpha_eps", "beta_eps", "l1D", "l1pi", "l2N", "l20", "err_alpha", "err_beta"], rows)


def convergence_json(report: ConvergenceReport) -> str:
    return to_json(report.to_dict())


# --- SVG -----------------------------------------------------------------

_W, _H, _PAD = 640, 420, 60
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def _fmt(x: float) -> str:
    return f"{x:.4g}"


class _Frame:
    def __init__(self, xlim, ylim, logx=False, logy=False):
        self.logx, self.logy = logx, logy
        self.x0, self.x1 = (self._t(v, logx) for v in xlim)
        self.y0, self.y1 = (self._t(v, logy) for v in ylim)
        if self.x1 == self.x0:
            self.x1 = self.x0 + 1
        if self.y1 == self.y0:
            self.y1 = self.y0 + 1

    @staticmethod
    def _t(v, log):
        return math.log10(v) if log else v

    def px(self, x):
        return _PAD + (self._t(x, self.logx) - self.x0) / (self.x1 - self.x0) * (_W - 2 * _PAD)

    def py(self, y):
        return _H - _PAD - (self._t(y, self.logy) - self.y0) / (self.y1 - self.y0) * (_H - 2 * _PAD)


def _axes(frame: _Frame, title: str, xlabel: str, ylabel: str, xticks, yticks) -> list[str]:
    out = [f'<rect x="{_PAD}" y="{_PAD}" width="{_W - 2 * _PAD}" height="{_H - 2 * _PAD}" '
           'fill="none" stroke="black"/>',
           f'<text x="{_W / 2}" y="{_PAD / 2}" text-anchor="middle" font-size="15">{title}</text>',
           f'<text x="{_W / 2}" y="{_H - 12}" text-anchor="middle" font-size="13">{xlabel}</text>',
           f'<text x="16" y="{_H / 2}" text-anchor="middle" font-size="13" '
           f'transform="rotate(-90 16 {_H / 2})">{ylabel}</text>']
    for t in xticks:
        x = frame.px(t)
        out.append(f'<line x1="{x:.2f}" y1="{_H - _PAD}" x2="{x:.2f}" y2="{_H - _PAD + 5}" stroke="black"/>')
        out.append(f'<text x="{x:.2f}" y="{_H - _PAD + 18}" text-anchor="middle" font-size="11">{_fmt(t)}</text>')
    for t in yticks:
        y = frame.py(t)
        out.append(f'<line x1="{_PAD - 5}" y1="{y:.2f}" x2="{_PAD}" y2="{y:.2f}" stroke="black"/>')
        out.append(f'<text x="{_PAD - 8}" y="{y + 4:.2f}" text-anchor="end" font-size="11">{_fmt(t)}</text>')
    return out


def _svg(body: list[str]) -> str:
    return ('<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">\n'
            '<rect width="100%" height="100%" fill="white"/>\n' + "\n".join(body) + "\n</svg>\n")


def _polyline(frame, xs, ys, color, dash=False) -> str:
    pts = " ".join(f"{frame.px(x):.2f},{frame.py(y):.2f}" for x, y in zip(xs, ys))
    extra = ' stroke-dasharray="5,4"' if dash else ""
    return f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.6"{extra}/>'


def bands_svg(bands: BandStructure, L: float, gaps: GapReport | None = None) -> str:
    """Band curves over ``phi`` in ``[0, 2 pi]`` with gaps shaded, clipped to ``[0, L]``."""
    ytop = float(L)
    frame = _Frame((0.0, 2 * math.pi), (0.0, ytop))
    body = _axes(frame, f"Floquet bands, epsilon = {_fmt(bands.epsilon)}", "phi",
                 f"lambda [{EIGEN_UNITS}]", np.linspace(0, 2 * math.pi, 5), np.linspace(0, ytop, 6))
    if gaps is not None:
        for g in gaps.gaps:
            y_hi, y_lo = frame.py(min(g.hi, ytop)), frame.py(g.lo)
            body.append(f'<rect x="{_PAD}" y="{y_hi:.2f}" width="{_W - 2 * _PAD}" height="{y_lo - y_hi:.2f}" '
                        f'fill="#ffd54f" fill-opacity="0.35"/>')
    phis = np.append(bands.phi_grid, 2 * math.pi)
    vals = np.vstack([bands.values, bands.values[:1]])
    for k in range(bands.k_max):
        ys = np.clip(vals[:, k], 0.0, ytop)
        body.append(_polyline(frame, phis, ys, _COLORS[k % len(_COLORS)]))
    return _svg(body)


def convergence_svg(report: ConvergenceReport) -> str:
    """Relative endpoint errors against ``epsilon`` on log-log axes."""
    eps = report.epsilons
    ea, eb = report.err_alpha, report.err_beta
    errs = np.concatenate([ea, eb])
    pos = errs[errs > 0]
    lo = float(pos.min()) if pos.size else 1e-6
    hi = float(pos.max()) if pos.size else 1.0
    frame = _Frame((float(eps.min()), float(eps.max())), (lo / 2, hi * 2), logx=True, logy=True)
    yt = [10.0**p for p in range(math.floor(math.log10(lo / 2)), math.ceil(math.log10(hi * 2)) + 1)
          if lo / 2 <= 10.0**p <= hi * 2]
    body = _axes(frame, "Gap endpoint convergence", "epsilon", "relative error", eps, yt)
    for series, color, name, row in ((ea, _COLORS[0], "alpha", 0), (eb, _COLORS[1], "beta", 1)):
        keep = series > 0
        body.append(_polyline(frame, eps[keep], series[keep], color))
        for x, y in zip(eps[keep], series[keep]):
            body.append(f'<circle cx="{frame.px(x):.2f}" cy="{frame.py(y):.2f}" r="3" fill="{color}"/>')
        body.append(f'<text x="{_W - _PAD - 70}" y="{_PAD + 18 + 16 * row}" font-size="12" fill="{color}">'
                    f'{name}</text>')
    return _svg(body)
