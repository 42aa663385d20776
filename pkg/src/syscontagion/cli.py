"""Command line: ingest, estimate, diagnose, rolling, simulate and hac-tau.

Machine-readable JSON goes to stdout, a short human summary to stderr.
Exit codes: 0 ok, 1 I/O or usage, 2 domain/data, 3 diagnostic threshold
failed, 4 internal consistency failure.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import os
import sys
import warnings
from pathlib import Path

from . import __version__
from .copula import ShockIntensities
from .dataio import (
    IngestConfig,
    intensity_to_csv,
    ingest_with_report,
    parse_intensity_csv,
    parse_spreads_csv,
    write_text_atomic,
)
from .diagnostics import (
    DEFAULT_THRESHOLD,
    emit_scatter,
    extract_systemic_intensity,
    systemic_tau_profile,
    systemic_to_csv,
)
from .estimation import (
    FitConfig,
    FitResult,
    fit,
    fit_theta_fixed_alphas,
    pairwise_tau_matrix,
    rolling_fit,
    rolling_to_csv,
)
from .exceptions import ArgumentError, ContagionError, DomainError, NumericError
from .hac import HacSpec, hac_tau_check
from .sampling import SimConfig, panel_from_times, sample_to_csv, simulate_default_times

EXIT_OK, EXIT_IO, EXIT_DATA, EXIT_DIAGNOSTIC, EXIT_CONSISTENCY = 0, 1, 2, 3, 4
SEED_ENV = "SYSCONTAGION_SEED"
MANIFEST = "manifest.json"
HAC_TOLERANCE = 1e-4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _floats(text: str):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _read(path) -> str:
    return Path(path).read_text(encoding="utf-8")


def _digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _say(msg: str) -> None:
    print(msg, file=sys.stderr)


class _Run:
    """Collects outputs and writes the manifest when the command finishes."""

    def __init__(self, args, inputs=()):
        self.args = args
        self.out = Path(args.out) if getattr(args, "out", None) else None
        self.inputs = {str(p): _digest(p) for p in inputs if p}
        self.started = _dt.datetime.now(_dt.timezone.utc).isoformat()
        self.files = []

    def write(self, name: str, text: str) -> None:
        write_text_atomic(self.out / name, text)
        self.files.append(name)

    def close(self, status: int) -> int:
        if self.out is None:
            return status
        flags = {k: v for k, v in sorted(vars(self.args).items()) if k != "func"}
        doc = {
            "command": self.args.command,
            "flags": flags,
            "inputs": self.inputs,
            "outputs": sorted(self.files),
            "seed": getattr(self.args, "seed", None),
            "version": __version__,
            "exit_code": status,
            "started": self.started,
            "finished": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        }
        write_text_atomic(self.out / MANIFEST, json.dumps(doc, sort_keys=True, indent=2, default=str) + "\n")
        return status


def _tau_csv(tau) -> str:
    lines = ["entity," + ",".join(tau.labels)]
    for lab, row in zip(tau.labels, tau.entries):
        lines.append(lab + "," + ",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def _fit_config(args) -> FitConfig:
    return FitConfig(restarts=args.restarts, theta_max=args.theta_max, seed=args.seed,
                     distance=args.distance)


def cmd_ingest(args) -> int:
    text = _read(args.input)
    run = _Run(args, [args.input])
    cfg = IngestConfig(recovery=args.recovery, policy=args.policy, max_gap=args.max_gap,
                       scale=args.scale, shift=args.shift)
    panel, report = ingest_with_report(parse_spreads_csv(text), cfg)
    run.write("intensities.csv", intensity_to_csv(panel))
    run.write("ingest_report.json", report.to_json())
    _emit({"entities": list(panel.entities), "dates": panel.m, "dropped_dates": len(report.dropped_dates)})
    _say(f"ingested {panel.d} entities over {panel.m} dates")
    return run.close(EXIT_OK)


def cmd_estimate(args) -> int:
    text = _read(args.input)
    fixed = _read(args.fix_alphas) if args.fix_alphas else None
    run = _Run(args, [args.input, args.fix_alphas])
    panel = parse_intensity_csv(text)
    target = pairwise_tau_matrix(panel, args.differences, on_undefined="nan")
    cfg = _fit_config(args)
    if fixed is not None:
        try:
            given = FitResult.params_from_json(fixed)
        except json.JSONDecodeError as exc:
            raise ArgumentError(f"cannot parse {args.fix_alphas}: {exc}") from None
        if tuple(given.labels) != tuple(target.labels):
            raise ArgumentError(f"--fix-alphas labels {list(given.labels)} do not match panel {list(target.labels)}")
        res = fit_theta_fixed_alphas(target, given.alphas, cfg)
    else:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = fit(target, cfg)
    for w in res.warnings:
        _say(f"warning: {w}")
    run.write("fit.json", res.to_json())
    run.write("tau_matrix.csv", _tau_csv(target))
    _emit(res.to_dict())
    _say(f"theta={res.theta:.6f} objective={res.objective:.3g}")
    return run.close(EXIT_OK)


def cmd_diagnose(args) -> int:
    text, ptext = _read(args.input), _read(args.params)
    run = _Run(args, [args.input, args.params])
    panel = parse_intensity_csv(text)
    try:
        params = FitResult.params_from_json(ptext)
    except json.JSONDecodeError as exc:
        raise ArgumentError(f"cannot parse {args.params}: {exc}") from None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        series = extract_systemic_intensity(panel, params)
        report = systemic_tau_profile(panel, params, threshold=args.threshold)
    run.write("systemic.csv", systemic_to_csv(series))
    run.write(f"scatter.{args.format}", emit_scatter(report, args.format))
    run.write("spec_check.json", report.to_json())
    _emit(report.to_dict())
    verdict = "pass" if report.passed else "FAIL"
    _say(f"line check {verdict}: RMSE={report.rmse:.4f} threshold={report.threshold}")
    return run.close(EXIT_OK if report.passed else EXIT_DIAGNOSTIC)


def cmd_rolling(args) -> int:
    text = _read(args.input)
    run = _Run(args, [args.input])
    panel = parse_intensity_csv(text)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        results = rolling_fit(panel, args.window, args.step, _fit_config(args), mode=args.mode,
                              differences=args.differences)
    run.write("rolling.csv", rolling_to_csv(results))
    _emit({"windows": len(results), "theta": [float(r.theta) for _, r in results]})
    _say(f"{len(results)} windows fitted")
    return run.close(EXIT_OK)


def cmd_simulate(args) -> int:
    run = _Run(args)
    lams = args.lambdas
    if len(lams) != args.d:
        raise ArgumentError(f"--lambdas has {len(lams)} entries, --d is {args.d}")
    cfg = SimConfig(args.n, args.seed, ShockIntensities(args.lambda0, lams), args.theta)
    sample = simulate_default_times(cfg)
    labels = tuple(f"e{k}" for k in range(args.d))
    run.write("sample.csv", sample_to_csv(sample, labels))
    if args.panel:
        run.write("intensities.csv", intensity_to_csv(panel_from_times(sample.times, labels)))
    _emit({"n": cfg.n_samples, "d": args.d, "seed": cfg.seed})
    _say(f"simulated {cfg.n_samples} replications of {args.d} default times")
    return run.close(EXIT_OK)


def cmd_hac_tau(args) -> int:
    run = _Run(args)
    if len(args.lambdas) != 3:
        raise ArgumentError("--lambdas needs exactly three rates i,j,k")
    spec = HacSpec(args.theta, args.phi, *args.lambdas, systemic_position=args.case)
    res = hac_tau_check(spec)
    doc = {"tau": res.tau, "tau_check": res.tau_check, "difference": res.difference}
    _emit(doc)
    if run.out is not None:
        run.write("hac_tau.json", json.dumps(doc, sort_keys=True, indent=2) + "\n")
    if not res.difference <= HAC_TOLERANCE:
        _say(f"inconsistent tau routes: |difference| = {res.difference:.3g}")
        return run.close(EXIT_CONSISTENCY)
    return run.close(EXIT_OK)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="syscontagion", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def fit_flags(sp):
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--restarts", type=int, default=50)
        sp.add_argument("--distance", choices=("quadratic", "absolute"), default="quadratic")
        sp.add_argument("--theta-max", type=float, default=50.0)
        sp.add_argument("--differences", action="store_true",
                        help="taus on first differences instead of levels")

    sp = sub.add_parser("ingest", help="CDS spreads to an aligned intensity panel")
    sp.add_argument("--input", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--recovery", type=float, default=0.40)
    sp.add_argument("--policy", choices=("intersection", "ffill"), default="intersection")
    sp.add_argument("--max-gap", type=int, default=0)
    sp.add_argument("--scale", type=float, default=1.0)
    sp.add_argument("--shift", type=float, default=0.0)
    sp.set_defaults(func=cmd_ingest)

    sp = sub.add_parser("estimate", help="fit alphas and theta to pairwise taus")
    sp.add_argument("--input", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--fix-alphas", default=None, help="JSON with labels and alphas; only theta is fitted")
    fit_flags(sp)
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("diagnose", help="systemic intensity and straight-line check")
    sp.add_argument("--input", required=True)
    sp.add_argument("--params", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--format", choices=("svg", "csv"), default="svg")
    sp.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    sp.set_defaults(func=cmd_diagnose)

    sp = sub.add_parser("rolling", help="rolling-window fits")
    sp.add_argument("--input", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--window", type=int, required=True)
    sp.add_argument("--step", type=int, default=1)
    sp.add_argument("--mode", choices=("free", "fixed-alpha"), default="free")
    fit_flags(sp)
    sp.set_defaults(func=cmd_rolling)

    sp = sub.add_parser("simulate", help="sample default times from the model")
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--theta", type=float, required=True)
    sp.add_argument("--lambda0", type=float, required=True)
    sp.add_argument("--lambdas", type=_floats, required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out", required=True)
    sp.add_argument("--panel", action="store_true", help="also write a synthetic intensity panel")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("hac-tau", help="Kendall's tau of a trivariate nested Gumbel structure")
    sp.add_argument("--theta", type=float, required=True)
    sp.add_argument("--phi", type=float, required=True)
    sp.add_argument("--lambdas", type=_floats, required=True)
    sp.add_argument("--case", choices=("inner", "outer"), default="inner")
    sp.add_argument("--out", default=None, help="optional directory for hac_tau.json and a manifest")
    sp.set_defaults(func=cmd_hac_tau)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if hasattr(args, "seed") and args.seed is None:
            args.seed = _default_seed()
        return args.func(args)
    except UsageError as exc:
        _say(str(exc))
        return EXIT_IO
    except OSError as exc:
        _say(f"error: {exc}")
        return EXIT_IO
    except NumericError as exc:
        _say(f"numeric error: {exc}")
        return EXIT_CONSISTENCY
    except (DomainError, ContagionError, ValueError) as exc:
        _say(f"error: {exc}")
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
