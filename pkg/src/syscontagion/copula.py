"""Gumbel generator, the exchangeable contagion copula and its Kendall's taus.

Shock arrival times ``(X_0, X_1, ..., X_d)`` are coupled by an exchangeable
Archimedean copula; observed default times are ``tau_k = min(X_0, X_k)``.
With linear distortions and the Gumbel generator the model has exponential
marginals and closed-form pairwise Kendall's taus.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from ._validation import (
    check_alpha,
    check_labels,
    check_nonnegative,
    check_rates,
    check_theta,
    check_unit_open_closed,
)
from .exceptions import ArgumentError, DegenerateModelError, DomainError, NumericError

__all__ = [
    "ArchimedeanGenerator",
    "GumbelGenerator",
    "ShockIntensities",
    "ModelParams",
    "TauMatrix",
    "psi",
    "psi_inv",
    "marginal_survival",
    "joint_survival",
    "survival_copula",
    "bivariate_copula",
    "tau_mo",
    "tau_pair",
    "tau_systemic",
    "kendall_tau_general",
    "alphas_from_intensities",
    "shocks_from_alphas",
]


class ArchimedeanGenerator:
    """Interface for a strict Archimedean generator.

    Subclasses provide ``psi``, ``psi_inv`` and ``psi_prime``. ``kendall_tau``
    falls back to quadrature of ``1 - 4 * int_0^1 psi_inv(s) |psi'(psi_inv(s))| ds``
    when no closed form is available.
    """

    def psi(self, x):
        raise NotImplementedError

    def psi_inv(self, u):
        raise NotImplementedError

    def psi_prime(self, x):
        raise NotImplementedError

    def kendall_tau(self) -> float:
        def integrand(s):
            x = self.psi_inv(s)
            return x * -self.psi_prime(x) if x > 0 else 0.0

        val, _ = integrate.quad(integrand, 0.0, 1.0, epsabs=1e-12, epsrel=1e-10, limit=200)
        return 1.0 - 4.0 * val


@dataclass(frozen=True)
class GumbelGenerator(ArchimedeanGenerator):
    """``psi(x) = exp(-x**(1/theta))`` with ``theta >= 1``."""

    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", check_theta(self.theta))

    def psi(self, x):
        return np.exp(-np.power(x, 1.0 / self.theta))

    def psi_inv(self, u):
        return np.power(-np.log(u), self.theta)

    def psi_prime(self, x):
        x = np.asarray(x, dtype=float)
        a = 1.0 / self.theta
        with np.errstate(divide="ignore"):
            return -a * np.power(x, a - 1.0) * np.exp(-np.power(x, a))

    def kendall_tau(self) -> float:
        return (self.theta - 1.0) / self.theta


def _as_generator(gen) -> GumbelGenerator:
    if isinstance(gen, GumbelGenerator):
        return gen
    return GumbelGenerator(gen)


@dataclass(frozen=True)
class ShockIntensities:
    """Systemic rate ``lambda0`` and idiosyncratic rates ``lambdas`` (per annum)."""

    lambda0: float
    lambdas: np.ndarray

    def __post_init__(self):
        lam0 = float(check_rates(self.lambda0, "lambda0"))
        lams = check_rates(np.atleast_1d(np.asarray(self.lambdas, dtype=float)), "lambdas")
        if lams.ndim != 1:
            raise ArgumentError("lambdas must be a vector")
        if lam0 == 0 and not np.any(lams > 0):
            raise DegenerateModelError("all shock intensities are zero")
        if np.any(lam0 + lams <= 0):
            raise DomainError("lambda0 + lambda_k must be positive for every k")
        lams.setflags(write=False)
        object.__setattr__(self, "lambda0", lam0)
        object.__setattr__(self, "lambdas", lams)

    @property
    def d(self) -> int:
        return self.lambdas.size


@dataclass(frozen=True)
class ModelParams:
    """Calibrated systemic sensitivities and contagion parameter for one cluster."""

    alphas: np.ndarray
    theta: float
    labels: tuple = field(default=None)

    def __post_init__(self):
        alphas = check_alpha(np.atleast_1d(np.asarray(self.alphas, dtype=float)), "alphas")
        if alphas.ndim != 1 or alphas.size < 2:
            raise ArgumentError("need at least two alphas")
        labels = self.labels
        if labels is None:
            labels = tuple(f"e{k}" for k in range(alphas.size))
        alphas.setflags(write=False)
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "theta", check_theta(self.theta))
        object.__setattr__(self, "labels", check_labels(labels, alphas.size))

    @property
    def d(self) -> int:
        return self.alphas.size

    @property
    def generator(self) -> GumbelGenerator:
        return GumbelGenerator(self.theta)


@dataclass(frozen=True)
class TauMatrix:
    """Symmetric matrix of pairwise Kendall's taus; NaN marks an undefined pair."""

    entries: np.ndarray
    labels: tuple

    def __post_init__(self):
        m = np.array(self.entries, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 2:
            raise ArgumentError("tau matrix must be square with d >= 2")
        finite = np.isfinite(m)
        if not np.array_equal(finite, finite.T) or not np.allclose(m[finite], m.T[finite], atol=1e-12):
            raise ArgumentError("tau matrix must be symmetric")
        if np.any(np.abs(m[finite]) > 1):
            raise DomainError("tau entries must lie in [-1, 1]")
        np.fill_diagonal(m, 1.0)
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)
        object.__setattr__(self, "labels", check_labels(self.labels, m.shape[0]))

    @property
    def d(self) -> int:
        return self.entries.shape[0]

    def upper(self):
        """Row/column indices and values of the strict upper triangle."""
        i, j = np.triu_indices(self.d, 1)
        return i, j, self.entries[i, j]


def psi(x, gen):
    x = check_nonnegative(x, "x")
    out = _as_generator(gen).psi(x)
    return float(out) if out.ndim == 0 else out


def psi_inv(u, gen):
    u = check_unit_open_closed(u, "u")
    out = _as_generator(gen).psi_inv(u)
    return float(out) if out.ndim == 0 else out


def marginal_survival(t, lambda0, lambdak, gen):
    """Exponential survival with rate ``(lambda0 + lambdak)**(1/theta)``."""
    t = check_nonnegative(t, "t")
    gen = _as_generator(gen)
    rate = float(lambda0) + float(lambdak)
    if lambda0 < 0 or lambdak < 0 or rate <= 0:
        raise DomainError("rates must be non-negative with a positive sum")
    out = np.exp(-(rate ** (1.0 / gen.theta)) * t)
    return float(out) if out.ndim == 0 else out


def joint_survival(ts, shocks: ShockIntensities, gen):
    """Joint survival of the default times with ``K(t) = t**theta``.

    ``ts`` is a length-d vector or an ``(n, d)`` array of times.
    """
    gen = _as_generator(gen)
    ts = check_nonnegative(ts, "ts")
    if ts.shape[-1] != shocks.d or shocks.d < 2:
        raise ArgumentError(f"expected {shocks.d} times per row, got shape {ts.shape}")
    th = gen.theta
    expo = shocks.lambda0 * np.max(ts, axis=-1) ** th + np.sum(shocks.lambdas * ts**th, axis=-1)
    out = np.exp(-np.power(expo, 1.0 / th))
    return float(out) if out.ndim == 0 else out


def survival_copula(us, params: ModelParams):
    """Survival copula of the default times (Gumbel case).

    The active region is the index maximising ``alpha_i * (-ln u_i)**theta``;
    ties go to the smallest index. ``us`` may be a vector of length d or an
    ``(n, d)`` array.
    """
    us = check_unit_open_closed(us, "us")
    if us.shape[-1] != params.d:
        raise ArgumentError(f"expected {params.d} coordinates, got shape {us.shape}")
    th = params.theta
    a = params.alphas
    x = np.power(-np.log(us), th)
    j = np.argmax(a * x, axis=-1)
    x_j = np.take_along_axis(x, np.expand_dims(j, -1), axis=-1)[..., 0]
    bracket = np.sum((1.0 - a) * x, axis=-1) + a[j] * x_j
    out = np.exp(-np.power(bracket, 1.0 / th))
    return float(out) if out.ndim == 0 else out


def bivariate_copula(u, v, alpha_j, alpha_k, gen):
    """Two-branch Gumbel/Marshall-Olkin bivariate survival copula."""
    u = check_unit_open_closed(u, "u")
    v = check_unit_open_closed(v, "v")
    alpha_j = float(check_alpha(alpha_j, "alpha_j"))
    alpha_k = float(check_alpha(alpha_k, "alpha_k"))
    th = _as_generator(gen).theta
    xu = np.power(-np.log(u), th)
    xv = np.power(-np.log(v), th)
    first = alpha_j * xu >= alpha_k * xv
    bracket = np.where(first, xu + (1.0 - alpha_k) * xv, (1.0 - alpha_j) * xu + xv)
    out = np.exp(-np.power(bracket, 1.0 / th))
    return float(out) if out.ndim == 0 else out


def tau_mo(alpha_j, alpha_k):
    """Kendall's tau of the Marshall-Olkin copula; 0 at (0, 0) by continuity."""
    a = check_alpha(alpha_j, "alpha_j")
    b = check_alpha(alpha_k, "alpha_k")
    num = a * b
    den = a + b - num
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    return float(out) if out.ndim == 0 else out


def tau_pair(alpha_j, alpha_k, gen):
    """Pairwise default-time tau ``(theta-1)/theta + tau_mo/theta``."""
    th = _as_generator(gen).theta
    out = (th - 1.0) / th + np.asarray(tau_mo(alpha_j, alpha_k)) / th
    return float(out) if out.ndim == 0 else out


def tau_systemic(alpha_j, gen):
    """Tau between a default time and the systemic shock; affine in alpha."""
    th = _as_generator(gen).theta
    a = check_alpha(alpha_j, "alpha_j")
    out = (th - 1.0) / th + a / th
    return float(out) if out.ndim == 0 else out


def alphas_from_intensities(shocks: ShockIntensities) -> np.ndarray:
    return shocks.lambda0 / (shocks.lambda0 + shocks.lambdas)


def shocks_from_alphas(alphas, lambda0: float = 1.0) -> ShockIntensities:
    """Rates reproducing ``alphas`` with ``lambda0`` fixed; alpha=0 is rejected."""
    a = check_alpha(alphas, "alphas")
    if np.any(a <= 0):
        raise DomainError("alpha = 0 has no finite-rate representation with lambda0 > 0")
    return ShockIntensities(lambda0, lambda0 * (1.0 - a) / a)


def _increasing_root(f: Callable[[float], float], y: float, rtol: float = 1e-12) -> float:
    """Solve ``f(t) = y`` for increasing ``f`` with ``f(0) = 0`` by bisection."""
    if y <= 0:
        return 0.0
    lo, hi = 0.0, 1.0
    while f(hi) < y:
        lo, hi = hi, 2.0 * hi
        if hi > 1e300:
            raise NumericError(f"cannot bracket root for target {y!r}")
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if f(mid) < y:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rtol * hi:
            break
    return 0.5 * (lo + hi)


def kendall_tau_general(
    gen: ArchimedeanGenerator,
    survs: Sequence[Callable[[float], float]],
    *,
    epsabs: float = 1e-8,
    epsrel: float = 1e-10,
    limit: int = 400,
) -> float:
    """Kendall's tau of ``(tau_j, tau_k)`` for arbitrary marginals of the shocks.

    Evaluates ``tau_psi + 4 * int_0^inf psi'(x)**2 T(x) dx`` where
    ``T = psi_inv o F0 o (psi_inv o F0 + psi_inv o Fj + psi_inv o Fk)^{-1}``.
    The integral is taken in the variable ``s = psi(x)`` which maps it onto
    ``(0, 1)`` with a bounded integrand.

    Parameters
    ----------
    gen : ArchimedeanGenerator
        Strict generator with ``psi``, ``psi_inv`` and ``psi_prime``.
    survs : sequence of three callables
        Survival functions of the systemic shock and the two idiosyncratic
        shocks, each mapping a time ``t >= 0`` to ``(0, 1]``.
    """
    if len(survs) != 3:
        raise ArgumentError("need survival functions for X0, Xj and Xk")
    f0, fj, fk = survs

    def phi_of(f, t):
        p = float(f(t))
        if p >= 1.0:
            return 0.0
        if p <= 0.0:
            return math.inf
        return float(gen.psi_inv(p))

    def total(t):
        return phi_of(f0, t) + phi_of(fj, t) + phi_of(fk, t)

    def integrand(s):
        if s <= 0.0 or s >= 1.0:
            return 0.0
        x = float(gen.psi_inv(s))
        t = _increasing_root(total, x)
        return -float(gen.psi_prime(x)) * phi_of(f0, t)

    val, err, *rest = integrate.quad(
        integrand, 0.0, 1.0, epsabs=epsabs, epsrel=epsrel, limit=limit, full_output=1
    )
    if len(rest) > 1 or err > 10 * max(epsabs, epsrel * abs(val)):
        raise NumericError(f"tau quadrature did not converge (value={val!r}, abserr={err!r})")
    return gen.kendall_tau() + 4.0 * val
