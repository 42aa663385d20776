import math

import numpy as np
import pytest

from syscontagion.copula import bivariate_copula, tau_pair
from syscontagion.exceptions import ArgumentError, ConsistencyError, DomainError, NestingError
from syscontagion import hac
from syscontagion.hac import (
    GFunction,
    HacSpec,
    g_function,
    g_inverse,
    hac_bivariate_copula,
    hac_kendall_tau,
    hac_marginal_survival,
    hac_tau_check,
    induced_alphas,
    kendall_function,
    shock_survival,
)
from syscontagion.kendall import empirical_kendall_tau
from syscontagion.sampling import simulate_hac_triple

SPECS = [
    HacSpec(3.0, 1.5, 1.0, 1.0, 1.0, "inner"),
    HacSpec(2.0, 1.2, 0.5, 2.0, 1.0, "inner"),
    HacSpec(3.0, 1.5, 1.0, 1.0, 1.0, "outer"),
    HacSpec(4.0, 2.0, 0.3, 1.5, 0.8, "outer"),
]


def _uniforms(spec, n, seed):
    x = simulate_hac_triple(spec, n, seed=seed)
    return hac_marginal_survival(x[:, 0], spec, "first"), hac_marginal_survival(x[:, 1], spec, "second")


# -- structure and G -------------------------------------------------------------

def test_nesting_constraint():
    with pytest.raises(NestingError):
        HacSpec(1.5, 2.0, 1.0, 1.0, 1.0)


def test_needs_two_positive_rates():
    with pytest.raises(DomainError):
        HacSpec(2.0, 1.5, 1.0, 0.0, 0.0, "outer")
    with pytest.raises(ArgumentError):
        HacSpec(2.0, 1.5, 1.0, 1.0, 1.0, "middle")


def test_g_inverse_zero():
    assert g_inverse(0.0, g_function(SPECS[0])) == 0.0


def test_g_inverse_linear_case():
    g = GFunction("outer", (2.5,), (1.0,))
    for y in (0.1, 1.0, 37.0):
        assert g_inverse(y, g) == pytest.approx(y / 2.5, rel=1e-12)


def test_g_inverse_round_trip():
    rng = np.random.default_rng(0)
    g_lin = g_function(SPECS[3])
    g_pow = GFunction("test", (0.7, 1.3), (0.5, 2.0))
    for y in rng.exponential(3.0, 1000):
        for g in (g_lin, g_pow):
            assert g(g_inverse(y, g)) == pytest.approx(y, rel=1e-10)


def test_g_is_increasing():
    for spec in SPECS:
        x = np.linspace(0, 10, 200)
        assert np.all(np.diff(g_function(spec)(x)) > 0)


# -- copula ----------------------------------------------------------------------

@pytest.mark.parametrize("case", ["inner", "outer"])
def test_equal_parameters_reduce_to_exchangeable_copula(case):
    spec = HacSpec(2.5, 2.5, 0.7, 1.3, 0.4, case)
    aj, ak = induced_alphas(spec)
    rng = np.random.default_rng(1)
    u, v = rng.uniform(1e-6, 1.0, size=(2, 10_000))
    got = hac_bivariate_copula(u, v, spec)
    want = bivariate_copula(u, v, aj, ak, 2.5)
    assert np.max(np.abs(got - want)) <= 1e-10


def test_outer_without_systemic_rate_is_inner_gumbel():
    spec = HacSpec(3.0, 1.5, 1.0, 2.0, 0.0, "outer")
    rng = np.random.default_rng(2)
    u, v = rng.uniform(0.01, 1.0, size=(2, 500))
    gumbel = np.exp(-(((-np.log(u)) ** 3 + (-np.log(v)) ** 3) ** (1 / 3)))
    assert np.max(np.abs(hac_bivariate_copula(u, v, spec) - gumbel)) <= 1e-13


def test_copula_margins():
    spec = SPECS[1]
    u = np.linspace(0.05, 1.0, 20)
    assert np.allclose(hac_bivariate_copula(u, 1.0, spec), u, atol=1e-14)
    assert np.allclose(hac_bivariate_copula(1.0, u, spec), u, atol=1e-14)


def test_copula_monte_carlo():
    spec = SPECS[2]
    u, v = _uniforms(spec, 1_000_000, 3)
    emp = np.mean((u <= 0.4) & (v <= 0.6))
    assert abs(emp - hac_bivariate_copula(0.4, 0.6, spec)) <= 2e-3


# -- marginals -------------------------------------------------------------------

def test_marginal_survival_examples():
    # lambda_i = 1 and theta/phi = 2 give lambda_hat_i = 1, so mu_ij = 1 + 3 = 4
    inner = HacSpec(2.0, 1.0, 1.0, 3.0, 1.0, "inner")
    assert inner.pair_rates[0] == 4.0
    assert hac_marginal_survival(1.0, inner, "first") == pytest.approx(math.exp(-2), rel=1e-15)
    outer = HacSpec(3.0, 3.0, 5.0, 1.0, 3.0, "outer")
    assert outer.pair_rates[0] == 8.0
    assert hac_marginal_survival(1.0, outer, "first") == pytest.approx(math.exp(-2), rel=1e-15)
    assert hac_marginal_survival(0.0, outer, "second") == 1.0


def test_marginals_match_simulation():
    for spec in SPECS:
        x = simulate_hac_triple(spec, 200_000, seed=4)
        for col, which in ((0, "first"), (1, "second")):
            u = hac_marginal_survival(x[:, col], spec, which)
            assert abs(np.mean(u <= 0.3) - 0.3) < 4 * math.sqrt(0.21 / 200_000)


def test_consistency_between_scales():
    spec = HacSpec(3.0, 1.5, 0.8, 1.0, 1.2, "inner")
    t = np.random.default_rng(5).uniform(0, 5, 1000)
    a = shock_survival(t, spec, "i", via="phi")
    b = shock_survival(t, spec, "i", via="theta")
    assert np.max(np.abs(a - b)) <= 1e-14


# -- Kendall function ------------------------------------------------------------

@pytest.mark.parametrize("spec", SPECS)
def test_kendall_function_shape(spec):
    t = np.linspace(0.01, 0.99, 99)
    k = kendall_function(t, spec)
    assert np.all(k >= t - 1e-12)
    assert np.all(np.diff(k) >= -1e-12)
    assert kendall_function(1 - 1e-9, spec) == pytest.approx(1.0, abs=1e-6)


def test_independence_kendall_function():
    spec = HacSpec(1.0, 1.0, 0.0, 1.0, 2.0, "inner")
    t = np.linspace(0.05, 0.95, 19)
    assert np.allclose(kendall_function(t, spec), t - t * np.log(t), atol=1e-10)


@pytest.mark.parametrize("spec", [SPECS[1], SPECS[3]])
def test_kendall_function_monte_carlo(spec):
    u, v = _uniforms(spec, 100_000, 6)
    c = hac_bivariate_copula(u, v, spec)
    for t in np.arange(1, 10) / 10:
        assert abs(np.mean(c <= t) - kendall_function(t, spec)) <= 0.01


def test_kendall_function_domain():
    with pytest.raises(DomainError):
        kendall_function(1.0, SPECS[0])


# -- tau -------------------------------------------------------------------------

@pytest.mark.parametrize("case", ["inner", "outer"])
def test_tau_equal_parameters(case):
    spec = HacSpec(2.0, 2.0, 1.0, 0.5, 1.5, case)
    assert hac_kendall_tau(spec) == pytest.approx(tau_pair(*induced_alphas(spec), 2.0), abs=1e-5)


def test_tau_outer_without_systemic_rate():
    assert hac_kendall_tau(HacSpec(3.0, 1.5, 1.0, 1.0, 0.0, "outer")) == pytest.approx(2 / 3, abs=1e-5)


def test_tau_monte_carlo():
    spec = SPECS[2]
    x = simulate_hac_triple(spec, 200_000, seed=7)
    assert abs(empirical_kendall_tau(x[:, 0], x[:, 1]) - hac_kendall_tau(spec)) <= 0.01


@pytest.mark.parametrize("spec", SPECS)
def test_tau_routes_agree_and_are_stable(spec):
    fine = hac_tau_check(spec)
    coarse = hac_tau_check(spec, 1e-8, 1e-8)
    assert fine.difference <= 1e-5
    assert abs(fine.tau - coarse.tau) < 1e-6
    assert abs(fine.tau_check - coarse.tau_check) < 1e-6


def test_disagreement_is_surfaced(monkeypatch):
    monkeypatch.setattr(hac, "_tau_from_kendall_function", lambda spec, a, r: 0.0)
    with pytest.raises(ConsistencyError):
        hac_kendall_tau(SPECS[0])
