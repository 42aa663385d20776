"""Monte Carlo oracle for shock and default times.

Every random draw goes through :func:`make_rng`, a Philox counter-based
generator keyed by ``(seed, *key)``, so a configuration always reproduces the
same stream regardless of what else ran before it.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_alpha, check_theta
from .copula import ModelParams, ShockIntensities, _as_generator
from .exceptions import ArgumentError, DegenerateModelError, DomainError
from .hac import HacSpec, shock_rates
from .kendall import empirical_kendall_tau
from .panel import IntensityPanel

__all__ = [
    "make_rng",
    "sample_positive_stable",
    "sample_gumbel_vector",
    "SimConfig",
    "DefaultTimeSample",
    "McTau",
    "simulate_default_times",
    "empirical_tau_mc",
    "simulate_hac_triple",
    "sample_to_csv",
    "panel_from_times",
    "synthetic_panel",
]


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Philox stream for ``seed``; ``key`` selects an independent sub-stream."""
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)) or seed < 0:
        raise DomainError(f"seed must be a non-negative integer, got {seed!r}")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def sample_positive_stable(a: float, rng: np.random.Generator, size=None):
    """Positive ``a``-stable draws with Laplace transform ``exp(-t**a)``.

    Uses the Kanter representation with ``U ~ Uniform(0, pi)`` and a unit
    exponential; ``a = 1`` is the point mass at 1.
    """
    a = float(a)
    if not 0.0 < a <= 1.0:
        raise DomainError(f"stable index must lie in (0, 1], got {a!r}")
    u = rng.uniform(0.0, math.pi, size)
    e = rng.exponential(1.0, size)
    if a == 1.0:
        return np.ones_like(u) if size is not None else 1.0
    out = (np.sin(a * u) / np.sin(u) ** (1.0 / a)) * (np.sin((1.0 - a) * u) / e) ** ((1.0 - a) / a)
    return out if size is not None else float(out)


def _neg_log_gumbel(dim: int, theta: float, rng, n: int):
    """``-log V`` for ``n`` draws of a ``dim``-variate Gumbel copula vector."""
    s = sample_positive_stable(1.0 / theta, rng, n)
    e = rng.exponential(1.0, (n, dim))
    return (e / s[:, None]) ** (1.0 / theta)


def sample_gumbel_vector(dim: int, gen, rng: np.random.Generator, size=None):
    """Draw ``V_i = psi(E_i / S)`` from the ``dim``-variate Gumbel copula."""
    if int(dim) != dim or dim < 1:
        raise DomainError("dim must be a positive integer")
    th = _as_generator(gen).theta
    n = 1 if size is None else int(size)
    v = np.exp(-_neg_log_gumbel(int(dim), th, rng, n))
    # uniforms in (0, 1): keep extreme draws off the boundary
    v = np.clip(v, np.finfo(float).tiny, np.nextafter(1.0, 0.0))
    return v[0] if size is None else v


@dataclass(frozen=True)
class SimConfig:
    n_samples: int
    seed: int
    shocks: ShockIntensities
    theta: float

    def __post_init__(self):
        if isinstance(self.n_samples, bool) or int(self.n_samples) != self.n_samples or self.n_samples < 1:
            raise DomainError(f"n_samples must be a positive integer, got {self.n_samples!r}")
        make_rng(self.seed)
        object.__setattr__(self, "n_samples", int(self.n_samples))
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "theta", check_theta(self.theta))


@dataclass(frozen=True)
class DefaultTimeSample:
    times: np.ndarray
    systemic_times: np.ndarray

    @property
    def n(self) -> int:
        return self.times.shape[0]

    @property
    def d(self) -> int:
        return self.times.shape[1]


def _shock_times(rates, theta: float, rng, n: int):
    """Shock times with survival ``exp(-rate**(1/theta) * t)``; rate 0 never fires."""
    rates = np.asarray(rates, dtype=float)
    w = _neg_log_gumbel(rates.size, theta, rng, n)
    scale = rates ** (1.0 / theta)
    with np.errstate(divide="ignore"):
        return np.where(scale > 0, w / np.where(scale > 0, scale, 1.0), np.inf)


def simulate_default_times(cfg: SimConfig) -> DefaultTimeSample:
    """Sample ``tau_k = min(X_0, X_k)`` under the Gumbel contagion model."""
    sh = cfg.shocks
    if sh.lambda0 == 0 and not np.any(sh.lambdas > 0):
        raise DegenerateModelError("all shock intensities are zero")
    rng = make_rng(cfg.seed)
    x = _shock_times(np.r_[sh.lambda0, sh.lambdas], cfg.theta, rng, cfg.n_samples)
    x0 = x[:, 0]
    return DefaultTimeSample(np.minimum(x0[:, None], x[:, 1:]), x0)


@dataclass(frozen=True)
class McTau:
    value: float
    stderr: float

    def __float__(self):
        return self.value


def _batch_stderr(x, y, batches: int = 20) -> float:
    n = x.size
    if n < 10 * batches:
        return math.nan
    size = n // batches
    taus = [empirical_kendall_tau(x[b * size:(b + 1) * size], y[b * size:(b + 1) * size])
            for b in range(batches)]
    return float(np.std(taus, ddof=1) / math.sqrt(batches))


def empirical_tau_mc(alpha_j, alpha_k, gen, n: int = 200_000, seed: int = 0) -> McTau:
    """Simulated Kendall's tau of ``(tau_j, tau_k)`` for given sensitivities.

    Rates are ``lambda0 = 1`` and ``lambda = (1 - alpha) / alpha``. An entity
    with ``alpha = 0`` is decoupled from the systemic shock entirely (its
    default time is its own shock time at unit rate), which is the exact
    ``lambda -> inf`` limit up to a rank-preserving rescaling.
    The standard error comes from 20 equal batches.
    """
    a = check_alpha([alpha_j, alpha_k], "alphas")
    th = _as_generator(gen).theta
    if int(n) != n or n < 2:
        raise DomainError("n must be an integer >= 2")
    exposed = a > 0
    rates = np.ones(3)
    rates[1:][exposed] = (1.0 - a[exposed]) / a[exposed]
    x = _shock_times(rates, th, make_rng(seed), int(n))
    t = np.where(exposed[None, :], np.minimum(x[:, [0]], x[:, 1:]), x[:, 1:])
    value = empirical_kendall_tau(t[:, 0], t[:, 1])
    return McTau(value, _batch_stderr(t[:, 0], t[:, 1]))


def simulate_hac_triple(spec: HacSpec, n: int, seed: int = 0) -> np.ndarray:
    """Observed default-time pairs under ``C_phi(C_theta(., .), .)``.

    The outer frailty ``V0`` is ``1/phi``-stable; the inner frailty is
    ``V0**(theta/phi) * S'`` with ``S'`` a ``phi/theta``-stable draw.
    """
    if int(n) != n or n < 1:
        raise DomainError("n must be a positive integer")
    rng = make_rng(seed)
    n = int(n)
    th, ph = spec.theta, spec.phi
    v0 = sample_positive_stable(1.0 / ph, rng, n)
    s_in = sample_positive_stable(ph / th, rng, n)
    v01 = v0 ** (th / ph) * s_in
    e = rng.exponential(1.0, (n, 3))
    rates = np.asarray(shock_rates(spec))
    # -log U: X_i and X_j share the inner copula in both placements
    w = np.empty((n, 3))
    w[:, :2] = (e[:, :2] / v01[:, None]) ** (1.0 / th)
    w[:, 2] = (e[:, 2] / v0) ** (1.0 / ph)
    with np.errstate(divide="ignore"):
        x = np.where(rates > 0, w / np.where(rates > 0, rates, 1.0), np.inf)
    xi, xj, xk = x[:, 0], x[:, 1], x[:, 2]
    if spec.systemic_position == "inner":
        return np.column_stack([np.minimum(xi, xj), np.minimum(xi, xk)])
    return np.column_stack([np.minimum(xi, xk), np.minimum(xj, xk)])


def sample_to_csv(sample: DefaultTimeSample, labels=None) -> str:
    """Long-format CSV text: ``replication, entity, tau_time, systemic_time``."""
    labels = labels or tuple(f"e{k}" for k in range(sample.d))
    if len(labels) != sample.d:
        raise ArgumentError("one label per column is required")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["replication", "entity", "tau_time", "systemic_time"])
    for r in range(sample.n):
        x0 = repr(float(sample.systemic_times[r]))
        for k, lab in enumerate(labels):
            w.writerow([r, lab, repr(float(sample.times[r, k])), x0])
    return buf.getvalue()


def panel_from_times(times, labels=None, *, scale: float = 0.02, power: float = 5.0,
                     start: str = "2000-01-01") -> IntensityPanel:
    """Map default times onto a daily intensity panel, one replication per date.

    The common increasing map ``scale * (tau / median)**power`` keeps every
    column's ranks, so pairwise taus of the panel equal those of the sample.
    """
    t = np.asarray(times, dtype=float)
    if t.ndim != 2 or not np.all(np.isfinite(t)) or np.any(t <= 0):
        raise DomainError("times must be a finite, positive (n, d) matrix")
    if not (scale > 0 and power > 0):
        raise DomainError("scale and power must be positive")
    med = np.median(t)
    values = scale * np.exp(power * (np.log(t) - np.log(med)))
    return IntensityPanel.from_array(values, labels, start=start)


def synthetic_panel(blocks, n_dates: int, seed: int = 0, *, scale: float = 0.02,
                    power: float = 5.0, start: str = "2000-01-01") -> IntensityPanel:
    """Intensity panel built from simulated default times (see :func:`panel_from_times`).

    ``blocks`` is one ``ModelParams`` or several; blocks are simulated
    independently (stream ``make_rng(seed, b)``) and placed side by side.
    """
    if isinstance(blocks, ModelParams):
        blocks = [blocks]
    if not blocks:
        raise ArgumentError("need at least one parameter block")
    cols, labels = [], []
    for b, params in enumerate(blocks):
        a = params.alphas
        exposed = a > 0
        rates = np.ones(params.d + 1)
        rates[1:][exposed] = (1.0 - a[exposed]) / a[exposed]
        x = _shock_times(rates, params.theta, make_rng(seed, b), int(n_dates))
        cols.append(np.where(exposed[None, :], np.minimum(x[:, [0]], x[:, 1:]), x[:, 1:]))
        labels.extend(params.labels if len(blocks) == 1 else (f"b{b}_{lab}" for lab in params.labels))
    return panel_from_times(np.hstack(cols), tuple(labels), scale=scale, power=power, start=start)
