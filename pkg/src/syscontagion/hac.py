"""Trivariate nested-Gumbel extension.

Three shock times ``X_i, X_j, X_k`` are coupled by ``C_phi(C_theta(., .), .)``
with ``theta >= phi >= 1``. Two placements of the systemic shock are covered:

``"inner"``
    ``X_i`` is systemic and shares the inner copula with ``X_j``; the observed
    pair is ``(min(X_i, X_j), min(X_i, X_k))``.
``"outer"``
    ``X_k`` is systemic and attached at the outer level; the observed pair is
    ``(min(X_i, X_k), min(X_j, X_k))``.

Exponential marginals follow from ``K(t) = t**phi``, ``K_hat(t) = t**theta``
and ``lambda_hat_i = lambda_i**(theta/phi)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from ._validation import check_nonnegative, check_rates, check_theta, check_unit_open_closed
from .exceptions import ArgumentError, ConsistencyError, DomainError, NestingError, NumericError

__all__ = [
    "HacSpec",
    "GFunction",
    "HacTau",
    "g_function",
    "g_inverse",
    "hac_bivariate_copula",
    "kendall_function",
    "hac_kendall_tau",
    "hac_tau_check",
    "hac_marginal_survival",
    "shock_survival",
    "shock_rates",
    "induced_alphas",
]

T_CLIP = 1e-10


@dataclass(frozen=True)
class HacSpec:
    theta: float
    phi: float
    lambda_i: float
    lambda_j: float
    lambda_k: float
    systemic_position: str = "inner"

    def __post_init__(self):
        theta = check_theta(self.theta)
        phi = check_theta(self.phi, "phi")
        if theta < phi:
            raise NestingError(f"inner theta={theta} must be >= outer phi={phi}")
        rates = check_rates([self.lambda_i, self.lambda_j, self.lambda_k], "lambdas")
        if np.count_nonzero(rates > 0) < 2:
            raise DomainError("at least two shock rates must be positive")
        if self.systemic_position not in ("inner", "outer"):
            raise ArgumentError("systemic_position must be 'inner' or 'outer'")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "phi", phi)
        for name, val in zip(("lambda_i", "lambda_j", "lambda_k"), rates):
            object.__setattr__(self, name, float(val))
        a, b = self.pair_rates
        if a <= 0 or b <= 0:
            raise DomainError("both observed default times need a positive total rate")

    @property
    def ratio(self) -> float:
        """theta / phi, the power linking the inner and outer scales."""
        return self.theta / self.phi

    @property
    def lambda_i_hat(self) -> float:
        return self.lambda_i**self.ratio

    @property
    def pair_rates(self):
        """``(mu_ij, mu_ik)`` for the inner case, ``(mu_ik, mu_jk)`` for the outer."""
        if self.systemic_position == "inner":
            return self.lambda_i_hat + self.lambda_j, self.lambda_i + self.lambda_k
        return self.lambda_i + self.lambda_k, self.lambda_j + self.lambda_k


@dataclass(frozen=True)
class GFunction:
    """``G(x) = sum_m coef_m * x**power_m`` with positive coefficients."""

    case: str
    coefs: tuple
    powers: tuple

    def __call__(self, x):
        return sum(c * np.power(x, p) for c, p in zip(self.coefs, self.powers))

    def derivative(self, x):
        return sum(c * p * np.power(x, p - 1.0) for c, p in zip(self.coefs, self.powers))


def g_function(spec: HacSpec) -> GFunction:
    """Boundary-curve map whose inverse locates the level-curve kink.

    Inner case: argument on the outer generator scale. Outer case: argument
    is ``K(t) = t**phi``. In both placements it is linear once the exponential
    restriction is imposed.
    """
    r = spec.ratio
    if spec.systemic_position == "inner":
        mu_ij, mu_ik = spec.pair_rates
        return GFunction("inner", ((mu_ij ** (1.0 / r) + spec.lambda_k) / mu_ik,), (1.0,))
    c = (spec.lambda_i**r + spec.lambda_j**r) ** (1.0 / r)
    return GFunction("outer", (c, spec.lambda_k), (1.0, 1.0))


def g_inverse(y: float, g: GFunction, rtol: float = 1e-12) -> float:
    """Root of ``G(x) = y`` by safeguarded Newton steps inside a bisection bracket."""
    y = float(y)
    if y < 0:
        raise DomainError("g_inverse needs y >= 0")
    if y == 0:
        return 0.0
    lo, hi = 0.0, 1.0
    while g(hi) < y:
        lo, hi = hi, hi * 2.0
        if hi > 1e300:
            raise NumericError("G is bounded below the target")
    x = 0.5 * (lo + hi)
    for _ in range(200):
        fx = g(x) - y
        if fx == 0:
            return x
        if fx > 0:
            hi = x
        else:
            lo = x
        if hi - lo <= rtol * hi or abs(fx) <= rtol * y:
            return x
        dg = g.derivative(x)
        step = x - fx / dg if dg > 0 else math.nan
        x = step if lo < step < hi else 0.5 * (lo + hi)
    return x


def shock_rates(spec: HacSpec):
    """Exponential rates of ``X_i, X_j, X_k`` under the adopted restriction."""
    if spec.systemic_position == "inner":
        inv = (1.0 / spec.phi, 1.0 / spec.theta, 1.0 / spec.phi)
    else:
        inv = (1.0 / spec.phi,) * 3
    lams = (spec.lambda_i, spec.lambda_j, spec.lambda_k)
    return tuple(lam**p for lam, p in zip(lams, inv))


def shock_survival(t, spec: HacSpec, shock: str, via: str = "phi"):
    """Survival of one shock time through the outer or inner parameterisation.

    ``via="theta"`` is only meaningful for shocks living in the inner copula;
    for ``X_i`` in the inner case it uses ``lambda_hat_i`` and ``K_hat``.
    """
    t = check_nonnegative(t, "t")
    lam = {"i": spec.lambda_i, "j": spec.lambda_j, "k": spec.lambda_k}[shock]
    if via == "phi":
        if spec.systemic_position == "inner" and shock == "j":
            raise ArgumentError("X_j has no outer-scale representation in the inner case")
        return np.exp(-np.power(lam * t**spec.phi, 1.0 / spec.phi))
    if via == "theta":
        if spec.systemic_position == "inner" and shock == "i":
            lam = spec.lambda_i_hat
        elif not (spec.systemic_position == "inner" and shock == "j"):
            raise ArgumentError("only inner-copula shocks have a theta-scale representation")
        return np.exp(-np.power(lam * t**spec.theta, 1.0 / spec.theta))
    raise ArgumentError(f"unknown scale {via!r}")


def hac_marginal_survival(t, spec: HacSpec, which: str = "first"):
    """Exponential survival of the first or second observed default time."""
    t = check_nonnegative(t, "t")
    a, b = spec.pair_rates
    if which == "first":
        p = 1.0 / spec.theta if spec.systemic_position == "inner" else 1.0 / spec.phi
        rate = a**p
    elif which == "second":
        rate = b ** (1.0 / spec.phi)
    else:
        raise ArgumentError("which must be 'first' or 'second'")
    out = np.exp(-rate * t)
    return float(out) if out.ndim == 0 else out


def induced_alphas(spec: HacSpec):
    """Systemic sensitivities of the two observed times (exact when theta == phi)."""
    a, b = spec.pair_rates
    if spec.systemic_position == "inner":
        return spec.lambda_i / a, spec.lambda_i / b
    return spec.lambda_k / a, spec.lambda_k / b


def hac_bivariate_copula(u, v, spec: HacSpec):
    """Survival copula of the observed pair under the Gumbel restriction."""
    u = check_unit_open_closed(u, "u")
    v = check_unit_open_closed(v, "v")
    th, ph, r = spec.theta, spec.phi, spec.ratio
    if spec.systemic_position == "inner":
        mu_ij, mu_ik = spec.pair_rates
        a = np.power(-np.log(u), th) / mu_ij
        b = np.power(-np.log(v), ph) / mu_ik
        inner = spec.lambda_i_hat * np.maximum(a, np.power(b, r)) + spec.lambda_j * a
        bracket = np.power(inner, 1.0 / r) + spec.lambda_k * b
    else:
        mu_ik, mu_jk = spec.pair_rates
        x = np.power(-np.log(u), ph) / mu_ik
        y = np.power(-np.log(v), ph) / mu_jk
        inner = np.power(spec.lambda_i * x, r) + np.power(spec.lambda_j * y, r)
        bracket = np.power(inner, 1.0 / r) + spec.lambda_k * np.maximum(x, y)
    out = np.exp(-np.power(bracket, 1.0 / ph))
    return float(out) if out.ndim == 0 else out


def _segments(spec: HacSpec, s: float, g: GFunction):
    """Inner-integral pieces for outer level ``s = (-ln t)**phi``.

    Each item is ``(c, r_lo, r_hi)``: integrate ``(s - c*r)**(1-ratio)`` over
    ``r`` (with Jacobian ``r**(ratio-1)`` in the z variable ``z = r**ratio``).
    """
    gi = g_inverse(s, g)
    if spec.systemic_position == "inner":
        _, mu_ik = spec.pair_rates
        if spec.lambda_i == 0:
            return []
        c = spec.lambda_k / spec.lambda_i
        return [(c, spec.lambda_i * gi / mu_ik, spec.lambda_i * s / mu_ik)]
    mu_ik, mu_jk = spec.pair_rates
    out = []
    for lam, mu in ((spec.lambda_i, mu_ik), (spec.lambda_j, mu_jk)):
        if lam > 0:
            out.append((spec.lambda_k / lam, lam * gi, lam * s / mu))
    return out


def _linear_terms(spec: HacSpec, s: float, g: GFunction) -> float:
    """Bracket terms outside the inner integrals."""
    a, b = spec.pair_rates
    if spec.systemic_position == "inner":
        return spec.lambda_k * s / b
    return spec.lambda_k * (s / a + s / b) - 2.0 * spec.lambda_k * g_inverse(s, g)


def _weight(t: float, phi: float) -> float:
    """``-psi_phi'(psi_phi^{-1}(t)) = (t/phi) * (-ln t)**(1-phi)``."""
    return t / phi * (-math.log(t)) ** (1.0 - phi)


def _quad(f, a, b, epsabs, epsrel, what):
    val, err, *rest = integrate.quad(f, a, b, epsabs=epsabs, epsrel=epsrel, limit=200, full_output=1)
    if len(rest) > 1 and err > 100 * max(epsabs, epsrel * abs(val)):
        raise NumericError(f"{what}: quadrature did not converge (value={val!r}, abserr={err!r})")
    return val


def kendall_function(t, spec: HacSpec, epsabs: float = 1e-12, epsrel: float = 1e-10):
    """``P(C(U, V) <= t)`` for the observed pair.

    Inner integrals are taken in the generator-scale variable ``z`` with
    integrand ``(phi/theta) * (s - c * z**(phi/theta))**(1 - theta/phi)``.
    """
    scalar = np.ndim(t) == 0
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(ts <= 0) or np.any(ts >= 1):
        raise DomainError("kendall_function needs 0 < t < 1")
    g = g_function(spec)
    r = spec.ratio
    q = 1.0 - r
    out = np.empty_like(ts)
    for n, tv in enumerate(ts):
        s = (-math.log(tv)) ** spec.phi
        total = _linear_terms(spec, s, g)
        for c, lo, hi in _segments(spec, s, g):
            def f(z, c=c):
                return (s - c * z ** (1.0 / r)) ** q / r
            try:
                total += _quad(f, lo**r, hi**r, epsabs, epsrel, "kendall_function")
            except NumericError as exc:
                raise NumericError(f"{exc} at t={tv!r}") from None
        out[n] = tv + _weight(tv, spec.phi) * total
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class HacTau:
    tau: float
    tau_check: float

    @property
    def difference(self) -> float:
        return abs(self.tau - self.tau_check)


def _tau_double_integral(spec: HacSpec, epsabs: float, epsrel: float) -> float:
    """Route (a): one double integral plus a single integral."""
    g = g_function(spec)
    r = spec.ratio
    q = 1.0 - r
    ph = spec.phi

    def clip(t):
        return T_CLIP <= t <= 1.0 - T_CLIP

    def outer(t):
        if not clip(t):
            return 0.0
        s = (-math.log(t)) ** ph
        return _weight(t, ph) * _linear_terms(spec, s, g)

    lin = _quad(outer, 0.0, 1.0, epsabs, epsrel, "tau (single)")

    double = 0.0
    if _segments(spec, 1.0, g):
        n_seg = len(_segments(spec, 1.0, g))
        for idx in range(n_seg):
            def lo(t, idx=idx):
                if not clip(t):
                    return 0.0
                return _segments(spec, (-math.log(t)) ** ph, g)[idx][1]

            def hi(t, idx=idx):
                if not clip(t):
                    return 0.0
                return _segments(spec, (-math.log(t)) ** ph, g)[idx][2]

            def f(rv, t, idx=idx):
                s = (-math.log(t)) ** ph
                c = _segments(spec, s, g)[idx][0]
                return _weight(t, ph) * (s - c * rv) ** q * rv ** (r - 1.0)

            val, err = integrate.dblquad(f, 0.0, 1.0, lo, hi, epsabs=epsabs, epsrel=epsrel)
            double += val
    return 1.0 - 4.0 * lin - 4.0 * double


def _tau_from_kendall_function(spec: HacSpec, epsabs: float, epsrel: float) -> float:
    def f(t):
        if t < T_CLIP or t > 1.0 - T_CLIP:
            return t
        return kendall_function(t, spec, epsabs=epsabs * 1e-2, epsrel=epsrel)

    return 3.0 - 4.0 * _quad(f, 0.0, 1.0, epsabs, epsrel, "tau via Kendall function")


def hac_tau_check(spec: HacSpec, epsabs: float = 1e-10, epsrel: float = 1e-10) -> HacTau:
    """Tau by the double-integral formula and by ``3 - 4 * int K(t) dt``."""
    return HacTau(
        _tau_double_integral(spec, epsabs, epsrel),
        _tau_from_kendall_function(spec, epsabs, epsrel),
    )


def hac_kendall_tau(spec: HacSpec, epsabs: float = 1e-10, epsrel: float = 1e-10,
                    max_disagreement: float = 1e-4) -> float:
    """Kendall's tau of the observed default-time pair.

    Raises
    ------
    ConsistencyError
        If the two evaluation routes differ by more than ``max_disagreement``.
    """
    res = hac_tau_check(spec, epsabs, epsrel)
    if not res.difference <= max_disagreement:
        raise ConsistencyError(
            f"tau routes disagree: {res.tau!r} vs {res.tau_check!r} (|diff|={res.difference:.3g})"
        )
    return res.tau
