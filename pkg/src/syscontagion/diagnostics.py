"""Implied systemic intensity and the straight-line model check.

Under the model every ``mu_k**theta = lambda0 + lambda_k`` with
``lambda_k = lambda0 * (1 - alpha_k) / alpha_k``, so summing over entities gives
``lambda0_hat = sum mu_k**theta / sum 1/alpha_k``. The tau between that series
and each entity's intensity should then lie on ``(theta-1)/theta + alpha/theta``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

from .copula import ModelParams, tau_systemic
from .exceptions import ArgumentError, ExtractionError, UndefinedTauError
from .kendall import empirical_kendall_tau
from .panel import IntensityPanel

__all__ = [
    "ALPHA_FLOOR",
    "DEFAULT_THRESHOLD",
    "SystemicSeries",
    "EntityRecord",
    "SpecCheckReport",
    "extract_systemic_intensity",
    "systemic_tau_profile",
    "emit_scatter",
    "parse_scatter_csv",
    "systemic_to_csv",
    "svg_mapping",
]

ALPHA_FLOOR = 1e-6
DEFAULT_THRESHOLD = 0.05
SCATTER_COLUMNS = ("label", "alpha", "tau_hat", "tau_line", "residual")


@dataclass(frozen=True)
class SystemicSeries:
    dates: np.ndarray
    lambda0_hat: np.ndarray
    excluded: tuple = ()


@dataclass(frozen=True)
class EntityRecord:
    label: str
    alpha: float
    tau_hat: float
    tau_line: float
    residual: float


@dataclass(frozen=True)
class SpecCheckReport:
    records: tuple
    theta: float
    threshold: float = DEFAULT_THRESHOLD
    skipped: tuple = ()

    @property
    def intercept(self) -> float:
        return (self.theta - 1.0) / self.theta

    @property
    def slope(self) -> float:
        return 1.0 / self.theta

    @property
    def rmse(self) -> float:
        if not self.records:
            return math.nan
        return math.sqrt(sum(r.residual**2 for r in self.records) / len(self.records))

    @property
    def passed(self) -> bool:
        return bool(self.rmse <= self.threshold)

    def to_dict(self) -> dict:
        return {
            "theta": self.theta,
            "intercept": self.intercept,
            "slope": self.slope,
            "rmse": self.rmse,
            "threshold": self.threshold,
            "passed": self.passed,
            "skipped": list(self.skipped),
            "records": [r.__dict__ for r in self.records],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def _aligned(panel: IntensityPanel, params: ModelParams) -> IntensityPanel:
    missing = [lab for lab in params.labels if lab not in panel.entities]
    if missing:
        raise ArgumentError(f"panel lacks entities {missing}")
    return panel.select(params.labels)


def extract_systemic_intensity(panel: IntensityPanel, params: ModelParams,
                               floor: float = ALPHA_FLOOR) -> SystemicSeries:
    """Per-date ``lambda0_hat``; entities with ``alpha < floor`` are left out of both sums."""
    panel = _aligned(panel, params)
    keep = params.alphas >= floor
    excluded = tuple(lab for lab, k in zip(params.labels, keep) if not k)
    if not keep.any():
        raise ExtractionError(f"every alpha is below the floor {floor:g}; lambda0 cannot be extracted")
    if excluded:
        warnings.warn(f"entities excluded from the systemic estimate: {list(excluded)}",
                      RuntimeWarning, stacklevel=2)
    num = np.sum(panel.values[:, keep] ** params.theta, axis=1)
    lam0 = num / np.sum(1.0 / params.alphas[keep])
    return SystemicSeries(panel.dates, lam0, excluded)


def systemic_tau_profile(panel: IntensityPanel, params: ModelParams,
                         threshold: float = DEFAULT_THRESHOLD,
                         floor: float = ALPHA_FLOOR) -> SpecCheckReport:
    """Compare empirical systemic taus with the straight line in alpha."""
    if panel.d < 2:
        raise ArgumentError("the profile needs at least two entities")
    series = extract_systemic_intensity(panel, params, floor)
    panel = _aligned(panel, params)
    records, skipped = [], []
    for k, lab in enumerate(params.labels):
        try:
            t = empirical_kendall_tau(series.lambda0_hat, panel.values[:, k])
        except UndefinedTauError:
            skipped.append(lab)
            continue
        a = float(params.alphas[k])
        line = float(tau_systemic(a, params.theta))
        records.append(EntityRecord(lab, a, float(t), line, float(t) - line))
    if skipped:
        warnings.warn(f"tau undefined for {skipped}; left out of the report", RuntimeWarning, stacklevel=2)
    return SpecCheckReport(tuple(records), params.theta, float(threshold), tuple(skipped))


def systemic_to_csv(series: SystemicSeries) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["date", "lambda0_hat"])
    for dt, v in zip(series.dates, series.lambda0_hat):
        w.writerow([str(dt), repr(float(v))])
    return buf.getvalue()


def _scatter_csv(report: SpecCheckReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCATTER_COLUMNS)
    for r in report.records:
        w.writerow([r.label, repr(r.alpha), repr(r.tau_hat), repr(r.tau_line), repr(r.residual)])
    return buf.getvalue()


def parse_scatter_csv(text: str):
    """Inverse of the CSV scatter document: a list of ``EntityRecord``."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != SCATTER_COLUMNS:
        raise ArgumentError("not a scatter CSV document")
    return [EntityRecord(r[0], *(float(x) for x in r[1:])) for r in rows[1:]]


def svg_mapping(report: SpecCheckReport, width: int = 480, height: int = 360, pad: int = 48):
    """Affine maps from (alpha, tau) to SVG pixel coordinates."""
    lo = min([report.intercept] + [r.tau_hat for r in report.records])
    lo = max(-1.0, math.floor((lo - 0.05) * 10.0) / 10.0)
    span_x, span_y = width - 2 * pad, height - 2 * pad

    def px(a):
        return pad + a * span_x

    def py(t):
        return height - pad - (t - lo) / (1.0 - lo) * span_y

    return px, py, lo


def _scatter_svg(report: SpecCheckReport, width: int = 480, height: int = 360, pad: int = 48) -> str:
    px, py, lo = svg_mapping(report, width, height, pad)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<line class="axis" x1="{px(0):.6f}" y1="{py(lo):.6f}" x2="{px(1):.6f}" y2="{py(lo):.6f}" stroke="black"/>',
        f'<line class="axis" x1="{px(0):.6f}" y1="{py(lo):.6f}" x2="{px(0):.6f}" y2="{py(1):.6f}" stroke="black"/>',
        f'<line class="model" x1="{px(0):.6f}" y1="{py(report.intercept):.6f}" '
        f'x2="{px(1):.6f}" y2="{py(1.0):.6f}" stroke="steelblue" stroke-width="1.5"/>',
        f'<text x="{width / 2:.1f}" y="{height - 12}" text-anchor="middle" font-size="12">alpha</text>',
        f'<text x="14" y="{height / 2:.1f}" font-size="12" transform="rotate(-90 14 {height / 2:.1f})" '
        f'text-anchor="middle">Kendall tau with systemic shock</text>',
        f'<text x="{px(0):.1f}" y="{py(lo) + 16:.1f}" font-size="10" text-anchor="middle">0</text>',
        f'<text x="{px(1):.1f}" y="{py(lo) + 16:.1f}" font-size="10" text-anchor="middle">1</text>',
        f'<text x="{px(0) - 6:.1f}" y="{py(lo):.1f}" font-size="10" text-anchor="end">{lo:.1f}</text>',
        f'<text x="{px(0) - 6:.1f}" y="{py(1):.1f}" font-size="10" text-anchor="end">1</text>',
    ]
    for r in report.records:
        out.append(f'<circle class="point" cx="{px(r.alpha):.6f}" cy="{py(r.tau_hat):.6f}" r="4" '
                   f'fill="firebrick"><title>{escape(r.label)}</title></circle>')
        out.append(f'<text x="{px(r.alpha) + 6:.1f}" y="{py(r.tau_hat) - 6:.1f}" font-size="9">'
                   f'{escape(r.label)}</text>')
    out.append(f'<text x="{width - pad:.1f}" y="{pad - 16:.1f}" font-size="11" text-anchor="end">'
               f'theta={report.theta:.4f} RMSE={report.rmse:.4f}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_scatter(report: SpecCheckReport, fmt: str = "csv") -> str:
    """Scatter of empirical systemic taus against alpha, as CSV or standalone SVG."""
    if fmt not in ("csv", "svg"):
        raise ArgumentError(f"unknown scatter format {fmt!r}")
    if not report.records:
        raise ArgumentError("empty report")
    return _scatter_csv(report) if fmt == "csv" else _scatter_svg(report)
