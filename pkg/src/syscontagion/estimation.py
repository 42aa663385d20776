"""Moment-matching calibration of ``(alpha_1, ..., alpha_d, theta)``.

The target is a matrix of empirical pairwise Kendall's taus; the model side is
``tau_pair``. The free fit runs a batched simulated annealing over all
restarts at once, then polishes every restart with L-BFGS-B inside the box.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import optimize

from ._validation import check_alpha
from .copula import ModelParams, TauMatrix
from .exceptions import ArgumentError, IdentifiabilityWarning, UndefinedTauError, UnfittableError
from .kendall import empirical_kendall_tau
from .panel import IntensityPanel
from .sampling import make_rng

__all__ = [
    "DISTANCES",
    "MIN_WINDOW",
    "FitConfig",
    "FitResult",
    "pairwise_tau_matrix",
    "objective",
    "fit",
    "fit_theta_fixed_alphas",
    "rolling_fit",
    "rolling_to_csv",
    "harmonic_mean_alpha",
]

DISTANCES = ("quadratic", "absolute")
MIN_WINDOW = 30


def pairwise_tau_matrix(panel: IntensityPanel, differences: bool = False,
                        on_undefined: str = "raise") -> TauMatrix:
    """Empirical tau-b for every entity pair of ``panel``.

    ``differences=True`` uses first differences of the intensities instead of
    levels. An undefined pair raises, or becomes NaN with ``on_undefined="nan"``.
    """
    if on_undefined not in ("raise", "nan"):
        raise ArgumentError("on_undefined must be 'raise' or 'nan'")
    if panel.d < 2:
        raise ArgumentError("need at least two entities")
    x = np.diff(panel.values, axis=0) if differences else panel.values
    if x.shape[0] < 2:
        raise ArgumentError("need at least two observations")
    d = panel.d
    out = np.eye(d)
    for i in range(d):
        for j in range(i + 1, d):
            try:
                t = empirical_kendall_tau(x[:, i], x[:, j])
            except UndefinedTauError:
                if on_undefined == "raise":
                    raise UndefinedTauError(
                        f"tau undefined for pair ({panel.entities[i]}, {panel.entities[j]})"
                    ) from None
                t = math.nan
            out[i, j] = out[j, i] = t
    return TauMatrix(out, panel.entities)


def _model_taus(alphas, thetas, iu, ju):
    """Vectorised ``tau_pair`` for a batch of parameter vectors, shape (R, P)."""
    ai, aj = alphas[:, iu], alphas[:, ju]
    den = ai + aj - ai * aj
    with np.errstate(invalid="ignore", divide="ignore"):
        mo = np.where(den > 0, ai * aj / np.where(den > 0, den, 1.0), 0.0)
    th = thetas[:, None]
    return (th - 1.0) / th + mo / th


def _distance(resid, distance):
    if distance == "quadratic":
        return np.sum(resid * resid, axis=-1)
    return np.sum(np.abs(resid), axis=-1)


def _check_distance(distance):
    if distance not in DISTANCES:
        raise ArgumentError(f"distance must be one of {DISTANCES}, got {distance!r}")


def _defined_pairs(target: TauMatrix):
    iu, ju, vals = target.upper()
    ok = np.isfinite(vals)
    if not ok.any():
        raise UnfittableError("no defined off-diagonal tau to fit")
    return iu[ok], ju[ok], vals[ok]


def objective(params: ModelParams, target: TauMatrix, distance: str = "quadratic") -> float:
    """Distance between empirical and model taus summed over defined pairs."""
    _check_distance(distance)
    if tuple(params.labels) != tuple(target.labels):
        raise ArgumentError("parameter labels do not match the tau matrix labels")
    iu, ju, vals = target.upper()
    ok = np.isfinite(vals)
    model = _model_taus(params.alphas[None, :], np.array([params.theta]), iu[ok], ju[ok])[0]
    return float(_distance(vals[ok] - model, distance))


def _residual_matrix(params: ModelParams, target: TauMatrix) -> np.ndarray:
    iu, ju, vals = target.upper()
    model = _model_taus(params.alphas[None, :], np.array([params.theta]), iu, ju)[0]
    out = np.zeros((target.d, target.d))
    out[iu, ju] = out[ju, iu] = vals - model
    return out


@dataclass(frozen=True)
class FitConfig:
    """Annealing schedule and search box.

    The temperature starts at ``initial_temperature`` and is multiplied by
    ``cooling`` after every ``steps_per_temperature`` proposals until it drops
    below ``final_temperature``. Proposals move one coordinate by a Gaussian
    step, reflected back into the box; step sizes shrink with ``sqrt(T/T0)``.
    """

    restarts: int = 50
    initial_temperature: float = 0.05
    final_temperature: float = 1e-6
    cooling: float = 0.95
    steps_per_temperature: int = 200
    alpha_scale: float = 0.1
    theta_scale: float = 0.5
    theta_max: float = 50.0
    seed: int = 0
    distance: str = "quadratic"
    polish: bool = True

    def __post_init__(self):
        if int(self.restarts) != self.restarts or self.restarts < 1:
            raise ArgumentError("restarts must be a positive integer")
        if not 0.0 < self.cooling < 1.0:
            raise ArgumentError("cooling factor must lie in (0, 1)")
        if not self.initial_temperature > 0 or not 0 < self.final_temperature <= self.initial_temperature:
            raise ArgumentError("need initial_temperature >= final_temperature > 0")
        if int(self.steps_per_temperature) != self.steps_per_temperature or self.steps_per_temperature < 1:
            raise ArgumentError("steps_per_temperature must be a positive integer")
        if not (self.alpha_scale > 0 and self.theta_scale > 0):
            raise ArgumentError("proposal scales must be positive")
        if not (math.isfinite(self.theta_max) and self.theta_max >= 1):
            raise ArgumentError("theta_max must be a finite value >= 1")
        _check_distance(self.distance)
        make_rng(self.seed)

    @property
    def n_temperatures(self) -> int:
        ratio = math.log(self.final_temperature / self.initial_temperature)
        return max(1, math.ceil(ratio / math.log(self.cooling)) + 1) if ratio < 0 else 1


@dataclass(frozen=True)
class FitResult:
    params: ModelParams
    objective: float
    residuals: np.ndarray
    restarts: np.ndarray
    config: FitConfig
    target: TauMatrix = field(repr=False, default=None)
    warnings: tuple = ()

    @property
    def alphas(self):
        return self.params.alphas

    @property
    def theta(self) -> float:
        return self.params.theta

    @property
    def labels(self):
        return self.params.labels

    def to_dict(self) -> dict:
        def clean(a):
            return [[None if not math.isfinite(v) else float(v) for v in row] for row in a]

        return {
            "labels": list(self.labels),
            "alphas": [float(a) for a in self.alphas],
            "theta": float(self.theta),
            "objective": float(self.objective),
            "residuals": clean(self.residuals),
            "restarts": [float(r) for r in self.restarts],
            "seed": int(self.config.seed),
            "config": asdict(self.config),
            "warnings": list(self.warnings),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @staticmethod
    def params_from_json(text: str) -> ModelParams:
        """Parameters stored in a serialised fit (the rest is informational)."""
        doc = json.loads(text)
        try:
            return ModelParams(doc["alphas"], doc["theta"], tuple(doc["labels"]))
        except KeyError as exc:
            raise ArgumentError(f"fit document lacks field {exc.args[0]!r}") from None


def _reflect(x, lo, hi):
    width = hi - lo
    if width <= 0:
        return np.full_like(x, lo)
    y = np.mod(x - lo, 2.0 * width)
    return lo + np.where(y > width, 2.0 * width - y, y)


def _anneal(iu, ju, vals, d, cfg: FitConfig):
    """Batched annealing; returns best states (R, d+1) and their objectives."""
    R = int(cfg.restarts)
    steps = int(cfg.steps_per_temperature)
    rngs = [make_rng(cfg.seed, r) for r in range(R)]
    hi_start = min(cfg.theta_max, 10.0)
    state = np.empty((R, d + 1))
    for r, g in enumerate(rngs):
        state[r, :d] = g.uniform(0.0, 1.0, d)
        state[r, d] = g.uniform(1.0, hi_start)

    def f(s):
        return _distance(vals - _model_taus(s[:, :d], s[:, d], iu, ju), cfg.distance)

    cur = f(state)
    best, best_val = state.copy(), cur.copy()
    scales = np.r_[np.full(d, cfg.alpha_scale), cfg.theta_scale]
    rows = np.arange(R)
    temp = cfg.initial_temperature
    for _ in range(cfg.n_temperatures):
        coords = np.empty((R, steps), dtype=np.int64)
        noise = np.empty((R, steps))
        unif = np.empty((R, steps))
        for r, g in enumerate(rngs):
            coords[r] = g.integers(0, d + 1, steps)
            noise[r] = g.standard_normal(steps)
            unif[r] = g.uniform(0.0, 1.0, steps)
        shrink = max(math.sqrt(temp / cfg.initial_temperature), 1e-2)
        for s in range(steps):
            c = coords[:, s]
            prop = state.copy()
            moved = prop[rows, c] + shrink * scales[c] * noise[:, s]
            prop[rows, c] = np.where(
                c < d, _reflect(moved, 0.0, 1.0), _reflect(moved, 1.0, cfg.theta_max)
            )
            new = f(prop)
            with np.errstate(over="ignore"):
                accept = (new <= cur) | (unif[:, s] < np.exp(-(new - cur) / temp))
            state[accept] = prop[accept]
            cur = np.where(accept, new, cur)
            better = cur < best_val
            best[better] = state[better]
            best_val = np.where(better, cur, best_val)
        temp *= cfg.cooling
    return best, best_val


def _polish(x0, iu, ju, vals, d, cfg: FitConfig):
    def f(x):
        return float(_distance(vals - _model_taus(x[None, :d], x[d:], iu, ju)[0], cfg.distance))

    bounds = [(0.0, 1.0)] * d + [(1.0, cfg.theta_max)]
    res = optimize.minimize(f, x0, method="L-BFGS-B", bounds=bounds,
                            options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 2000})
    x = np.clip(res.x, [b[0] for b in bounds], [b[1] for b in bounds])
    return x, f(x)


def _finish(params, target, cfg, restarts, warn=()):
    obj = objective(params, target, cfg.distance)
    return FitResult(params, obj, _residual_matrix(params, target), np.asarray(restarts, dtype=float),
                     cfg, target, tuple(warn))


def _identifiability(d):
    if d == 2:
        msg = "d=2: one tau cannot identify (alpha_1, alpha_2, theta); the fit is one of many minimisers"
        warnings.warn(msg, IdentifiabilityWarning, stacklevel=3)
        return (msg,)
    return ()


def fit(target: TauMatrix, cfg: FitConfig = FitConfig()) -> FitResult:
    """Global minimisation of the tau distance over ``[0,1]^d x [1, theta_max]``.

    Restart ``r`` draws from its own stream ``make_rng(seed, r)``; the winner
    is the lowest objective, ties going to the lowest restart index.
    """
    iu, ju, vals = _defined_pairs(target)
    d = target.d
    warn = _identifiability(d)
    best, best_val = _anneal(iu, ju, vals, d, cfg)
    if cfg.polish:
        for r in range(best.shape[0]):
            x, v = _polish(best[r], iu, ju, vals, d, cfg)
            if v < best_val[r]:
                best[r], best_val[r] = x, v
    win = int(np.argmin(best_val))
    params = ModelParams(np.clip(best[win, :d], 0.0, 1.0), float(best[win, d]), target.labels)
    return _finish(params, target, cfg, best_val, warn)


def _golden(f, lo, hi, tol=1e-12):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, e = b - invphi * (b - a), a + invphi * (b - a)
    fc, fe = f(c), f(e)
    while b - a > tol * max(1.0, abs(a) + abs(b)):
        if fc <= fe:
            b, e, fe = e, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, e, fe
            e = a + invphi * (b - a)
            fe = f(e)
    x = 0.5 * (a + b)
    return min(((f(x), x), (f(lo), lo), (f(hi), hi)))


def fit_theta_fixed_alphas(target: TauMatrix, alphas, cfg: FitConfig = FitConfig()) -> FitResult:
    """Golden-section search over ``theta`` in ``[1, theta_max]`` with fixed alphas.

    The quadratic and absolute distances are both convex in ``1/theta``, so
    the objective is unimodal in ``theta``; the box ends are checked as well.
    """
    iu, ju, vals = _defined_pairs(target)
    a = check_alpha(np.asarray(alphas, dtype=float).ravel(), "alphas")
    if a.size != target.d:
        raise ArgumentError(f"expected {target.d} alphas, got {a.size}")

    def f(th):
        return float(_distance(vals - _model_taus(a[None, :], np.array([th]), iu, ju)[0], cfg.distance))

    val, th = _golden(f, 1.0, float(cfg.theta_max))
    params = ModelParams(a, th, target.labels)
    return _finish(params, target, cfg, [val])


def rolling_fit(panel: IntensityPanel, window: int, step: int, cfg: FitConfig = FitConfig(),
                mode: str = "free", differences: bool = False):
    """Fit every contiguous window; returns ``[(window_end_date, FitResult), ...]``.

    Each window uses ``cfg`` unchanged, so a window covering the whole panel
    reproduces the full-sample fit exactly. ``mode="fixed-alpha"`` takes the
    alphas from the full-sample fit and re-estimates only theta.
    """
    if mode not in ("free", "fixed-alpha"):
        raise ArgumentError("mode must be 'free' or 'fixed-alpha'")
    window, step = int(window), int(step)
    if step < 1:
        raise ArgumentError("step must be >= 1")
    if window > panel.m:
        raise ArgumentError(f"window {window} exceeds panel length {panel.m}")
    if window < MIN_WINDOW:
        raise ArgumentError(f"windows shorter than {MIN_WINDOW} observations are rejected")
    alphas = None
    if mode == "fixed-alpha":
        alphas = fit(pairwise_tau_matrix(panel, differences, "nan"), cfg).alphas
    out = []
    for start in range(0, panel.m - window + 1, step):
        sub = panel.window(start, start + window)
        target = pairwise_tau_matrix(sub, differences, "nan")
        res = fit(target, cfg) if alphas is None else fit_theta_fixed_alphas(target, alphas, cfg)
        out.append((sub.dates[-1], res))
    return out


def rolling_to_csv(results) -> str:
    """CSV text with columns ``window_end, theta, alpha_<label>..., objective``."""
    if not results:
        raise ArgumentError("no rolling results")
    labels = results[0][1].labels
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["window_end", "theta", *(f"alpha_{lab}" for lab in labels), "objective"])
    for date, res in results:
        w.writerow([str(date), repr(float(res.theta)), *(repr(float(a)) for a in res.alphas),
                    repr(float(res.objective))])
    return buf.getvalue()


def harmonic_mean_alpha(alphas) -> float:
    """``d / sum(1/alpha_k)``; a zero entry gives 0 with a warning."""
    a = check_alpha(np.asarray(alphas, dtype=float).ravel(), "alphas")
    if a.size == 0:
        raise ArgumentError("empty alpha vector")
    if np.any(a == 0):
        warnings.warn("zero alpha present: harmonic mean taken as 0", RuntimeWarning, stacklevel=2)
        return 0.0
    return float(a.size / np.sum(1.0 / a))
