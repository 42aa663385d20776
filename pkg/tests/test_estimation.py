import json
import warnings

import numpy as np
import pytest

from syscontagion.copula import ModelParams, ShockIntensities, TauMatrix, shocks_from_alphas, tau_pair
from syscontagion.estimation import (
    FitConfig,
    FitResult,
    fit,
    fit_theta_fixed_alphas,
    harmonic_mean_alpha,
    objective,
    pairwise_tau_matrix,
    rolling_fit,
    rolling_to_csv,
)
from syscontagion.exceptions import ArgumentError, IdentifiabilityWarning, UndefinedTauError, UnfittableError
from syscontagion.kendall import empirical_kendall_tau, tau_null_stderr
from syscontagion.panel import IntensityPanel
from syscontagion.sampling import SimConfig, panel_from_times, simulate_default_times, synthetic_panel

TRUE_ALPHAS = np.array([0.2, 0.4, 0.5, 0.7, 0.9])
FAST = FitConfig(restarts=10, steps_per_temperature=100)


def model_matrix(alphas, theta, labels=None):
    d = len(alphas)
    m = np.eye(d)
    for i in range(d):
        for j in range(d):
            if i != j:
                m[i, j] = tau_pair(alphas[i], alphas[j], theta)
    return TauMatrix(m, labels or tuple(f"e{k}" for k in range(d)))


# -- tau matrix ------------------------------------------------------------------

def test_identical_columns_give_unit_tau():
    x = np.random.default_rng(0).uniform(0.01, 0.05, 50)
    t = pairwise_tau_matrix(IntensityPanel.from_array(np.c_[x, x]))
    assert t.entries[0, 1] == 1.0


def test_white_noise_columns_near_zero():
    rng = np.random.default_rng(1)
    panel = IntensityPanel.from_array(rng.uniform(0.01, 0.02, size=(500, 2)))
    t = pairwise_tau_matrix(panel)
    assert abs(t.entries[0, 1]) < 3 * tau_null_stderr(500)


def test_rank_invariance_against_raw_sample():
    smp = simulate_default_times(SimConfig(300, 2, ShockIntensities(1.0, [0.5, 1.0, 3.0]), 2.5))
    t = pairwise_tau_matrix(panel_from_times(smp.times))
    for i in range(3):
        for j in range(i + 1, 3):
            assert t.entries[i, j] == empirical_kendall_tau(smp.times[:, i], smp.times[:, j])


def test_undefined_pair_is_identified():
    vals = np.c_[np.full(40, 0.02), np.linspace(0.01, 0.02, 40), np.linspace(0.03, 0.01, 40)]
    panel = IntensityPanel.from_array(vals, ("flat", "up", "down"))
    with pytest.raises(UndefinedTauError, match="flat"):
        pairwise_tau_matrix(panel)
    t = pairwise_tau_matrix(panel, on_undefined="nan")
    assert np.isnan(t.entries[0, 1]) and t.entries[1, 2] == -1.0


def test_differences_flag():
    rng = np.random.default_rng(3)
    vals = np.cumsum(rng.normal(size=(200, 2)), axis=0) + 100
    panel = IntensityPanel.from_array(vals)
    d = np.diff(vals, axis=0)
    assert pairwise_tau_matrix(panel, differences=True).entries[0, 1] == empirical_kendall_tau(d[:, 0], d[:, 1])


# -- objective -------------------------------------------------------------------

def test_objective_zero_at_own_taus():
    p = ModelParams(TRUE_ALPHAS, 3.0)
    assert objective(p, model_matrix(TRUE_ALPHAS, 3.0)) == pytest.approx(0.0, abs=1e-28)


def test_objective_hand_values():
    target = TauMatrix([[1, 0.5], [0.5, 1]], ("e0", "e1"))
    p = ModelParams([0.0, 0.0], 4.0)  # tau_pair = 0.75
    assert objective(p, target) == pytest.approx(0.0625, rel=1e-14)
    assert objective(p, target, "absolute") == pytest.approx(0.25, rel=1e-14)


def test_objective_label_mismatch():
    with pytest.raises(ArgumentError):
        objective(ModelParams([0.3, 0.3], 2.0, ("a", "b")), TauMatrix(np.eye(2), ("a", "c")))
    with pytest.raises(ArgumentError):
        objective(ModelParams([0.3, 0.3], 2.0), TauMatrix(np.eye(2), ("e0", "e1")), "huber")


def test_objective_skips_undefined_pairs():
    m = model_matrix([0.3, 0.5, 0.8], 2.0).entries.copy()
    m[0, 2] = m[2, 0] = np.nan
    m[0, 1] = m[1, 0] = m[0, 1] + 0.1
    val = objective(ModelParams([0.3, 0.5, 0.8], 2.0), TauMatrix(m, ("e0", "e1", "e2")))
    assert val == pytest.approx(0.01, rel=1e-12)


# -- fit -------------------------------------------------------------------------

def test_noiseless_recovery():
    res = fit(model_matrix(TRUE_ALPHAS, 3.0))
    assert abs(res.theta - 3.0) <= 0.05
    assert np.max(np.abs(res.alphas - TRUE_ALPHAS)) <= 0.02
    assert res.objective == pytest.approx(objective(res.params, res.target), abs=1e-15)
    assert res.restarts.shape == (50,)


def test_monte_carlo_recovery():
    smp = simulate_default_times(SimConfig(2000, 0, shocks_from_alphas(TRUE_ALPHAS), 3.0))
    res = fit(pairwise_tau_matrix(IntensityPanel.from_array(smp.times)), FitConfig(seed=0))
    assert abs(res.theta - 3.0) <= 0.3
    assert np.max(np.abs(res.alphas - TRUE_ALPHAS)) <= 0.1


def test_fit_reproducible():
    target = model_matrix([0.3, 0.6, 0.9], 2.0)
    a, b = fit(target, FAST), fit(target, FAST)
    assert a.to_json() == b.to_json()
    assert np.array_equal(a.restarts, b.restarts)


def test_fit_d2_warns():
    target = TauMatrix([[1, 0.6], [0.6, 1]], ("a", "b"))
    with pytest.warns(IdentifiabilityWarning):
        res = fit(target, FAST)
    assert res.warnings
    assert res.objective < 1e-12


def test_fit_unfittable():
    m = np.full((3, 3), np.nan)
    with pytest.raises(UnfittableError):
        fit(TauMatrix(m, ("a", "b", "c")), FAST)


def test_fit_absolute_distance():
    target = model_matrix([0.25, 0.5, 0.75, 0.9], 2.5)
    res = fit(target, FitConfig(restarts=10, distance="absolute"))
    assert res.objective < 1e-6
    assert abs(res.theta - 2.5) < 0.05


def test_fit_respects_box():
    # taus below the Gumbel floor push theta to 1 and alphas to 0
    target = TauMatrix([[1, -0.2, 0.0], [-0.2, 1, -0.1], [0.0, -0.1, 1]], ("a", "b", "c"))
    res = fit(target, FAST)
    assert res.theta == pytest.approx(1.0, abs=1e-6)
    assert np.all((res.alphas >= 0) & (res.alphas <= 1))


def test_fit_result_json():
    res = fit(model_matrix([0.3, 0.6, 0.9], 2.0), FAST)
    doc = json.loads(res.to_json())
    assert set(doc) >= {"labels", "alphas", "theta", "objective", "residuals", "restarts", "seed", "config"}
    assert doc["residuals"][0][0] == 0.0
    p = FitResult.params_from_json(res.to_json())
    assert np.array_equal(p.alphas, res.alphas) and p.theta == res.theta


def test_fit_config_validation():
    with pytest.raises(ArgumentError):
        FitConfig(cooling=1.0)
    with pytest.raises(ArgumentError):
        FitConfig(theta_max=0.5)
    with pytest.raises(ArgumentError):
        FitConfig(restarts=0)
    with pytest.raises(ArgumentError):
        FitConfig(distance="l3")


# -- fixed alphas ----------------------------------------------------------------

def test_fixed_alpha_recovery():
    res = fit_theta_fixed_alphas(model_matrix(TRUE_ALPHAS, 3.0), TRUE_ALPHAS)
    assert res.theta == pytest.approx(3.0, abs=1e-4)
    assert np.array_equal(res.alphas, TRUE_ALPHAS)


def test_fixed_alpha_boundary():
    res = fit_theta_fixed_alphas(model_matrix(TRUE_ALPHAS, 1.0), TRUE_ALPHAS)
    assert res.theta == 1.0


def test_fixed_alpha_noisy():
    smp = simulate_default_times(SimConfig(2000, 4, shocks_from_alphas(TRUE_ALPHAS), 3.0))
    res = fit_theta_fixed_alphas(pairwise_tau_matrix(IntensityPanel.from_array(smp.times)), TRUE_ALPHAS)
    assert abs(res.theta - 3.0) <= 0.3


def test_fixed_alpha_length_check():
    with pytest.raises(ArgumentError):
        fit_theta_fixed_alphas(model_matrix(TRUE_ALPHAS, 3.0), [0.5, 0.5])


# -- rolling ---------------------------------------------------------------------

def test_rolling_single_window_equals_full_fit():
    panel = synthetic_panel(ModelParams([0.3, 0.6, 0.8], 2.0), 120, seed=3)
    out = rolling_fit(panel, 120, 7, FAST)
    assert len(out) == 1
    full = fit(pairwise_tau_matrix(panel, on_undefined="nan"), FAST)
    assert out[0][0] == panel.dates[-1]
    assert out[0][1].to_json() == full.to_json()


def test_rolling_argument_checks():
    panel = synthetic_panel(ModelParams([0.3, 0.6], 2.0), 60, seed=3)
    with pytest.raises(ArgumentError):
        rolling_fit(panel, 61, 1, FAST)
    with pytest.raises(ArgumentError):
        rolling_fit(panel, 29, 1, FAST)
    with pytest.raises(ArgumentError):
        rolling_fit(panel, 40, 0, FAST)
    with pytest.raises(ArgumentError):
        rolling_fit(panel, 40, 1, FAST, mode="sticky")


ROLL_ALPHAS = [0.1, 0.25, 0.4, 0.55, 0.7, 0.85]


def test_rolling_stationary_panel_is_stable():
    panel = synthetic_panel(ModelParams(ROLL_ALPHAS, 3.0), 1000, seed=5)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        out = rolling_fit(panel, 500, 100, FAST)
    thetas = np.array([r.theta for _, r in out])
    assert len(thetas) == 6
    assert thetas.std(ddof=1) < 0.5


def test_rolling_detects_regime_shift():
    p1 = synthetic_panel(ModelParams(ROLL_ALPHAS, 2.0), 500, seed=1)
    p2 = synthetic_panel(ModelParams(ROLL_ALPHAS, 5.0), 500, seed=2)
    panel = IntensityPanel.from_array(np.vstack([p1.values, p2.values]), p1.entities)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        out = rolling_fit(panel, 500, 500, FAST)
        fixed = rolling_fit(panel, 500, 500, FAST, mode="fixed-alpha")
    assert len(out) == 2
    assert out[-1][1].theta - out[0][1].theta >= 2.0
    assert fixed[-1][1].theta - fixed[0][1].theta >= 2.0
    assert np.array_equal(fixed[0][1].alphas, fixed[1][1].alphas)


def test_rolling_csv_layout():
    panel = synthetic_panel(ModelParams([0.3, 0.6], 2.0, ("x", "y")), 80, seed=2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        out = rolling_fit(panel, 40, 50, FAST)
    lines = rolling_to_csv(out).splitlines()
    assert lines[0] == "window_end,theta,alpha_x,alpha_y,objective"
    assert len(lines) == 2
    assert lines[1].startswith(str(panel.dates[39]))


# -- harmonic mean ---------------------------------------------------------------

def test_harmonic_mean():
    assert harmonic_mean_alpha([0.4, 0.4, 0.4]) == pytest.approx(0.4, rel=1e-15)
    assert harmonic_mean_alpha([0.5, 1.0]) == pytest.approx(2 / 3, rel=1e-15)
    with pytest.warns(RuntimeWarning):
        assert harmonic_mean_alpha([0.5, 0.0]) == 0.0
