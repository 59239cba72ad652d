"""``ymheat`` command-line front end.

Exit status: 0 when every check passes, 1 when any check fails (or a run
ends abnormally), 2 on usage, configuration or input errors.
"""

import argparse
from concurrent.futures import ProcessPoolExecutor
import json
import os
import shutil
import sys
import tempfile

import numpy as np

from . import boundscheck as bc
from .config import KNOWN_KEYS, load_config
from .errors import BlowUpDetected, ConfigError, DomainError, StepFailure, YMHeatError
from .grid import read_columns, write_columns
from .profiles import Theta0Spec
from .scalinglaw import band_residual, classify_regime, fit_envelope, integrate_modulation

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

LAW_TRACE = ["t", "loglambda", "rate", "tau"]
SIM_TRACE = ["t", "lambda_empirical", "loglambda", "rate"]


class UsageError(Exception):
    pass


# -- helpers --------------------------------------------------------------

def _dump_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


class OutputDir:
    """Collect artifacts in a private directory, then move them into place."""

    def __init__(self, target):
        self.target = os.path.abspath(target)
        self._tmp = None

    @property
    def tmp(self):
        if self._tmp is None:
            parent = os.path.dirname(self.target)
            os.makedirs(parent, exist_ok=True)
            self._tmp = tempfile.mkdtemp(prefix=".ymheat-", dir=parent)
        return self._tmp

    def path(self, name):
        return os.path.join(self.tmp, name)

    def commit(self):
        if self._tmp is None:
            return
        if not os.path.exists(self.target):
            os.replace(self.tmp, self.target)
            return
        for name in sorted(os.listdir(self.tmp)):
            os.replace(os.path.join(self.tmp, name), os.path.join(self.target, name))
        os.rmdir(self.tmp)

    def discard(self):
        if self._tmp is not None:
            shutil.rmtree(self._tmp, ignore_errors=True)


def _config(args):
    cfg = load_config(args.config) if args.config else {}
    for item in args.set or ():
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = (p.strip() for p in item.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"--set: unknown key {key!r}")
        cfg[key] = value
    overrides = {"theta0": "theta0.family", "a": "theta0.a", "sign": "theta0.sign",
                 "amplitude": "theta0.amplitude", "table": "theta0.table_path"}
    for attr, key in overrides.items():
        val = getattr(args, attr, None)
        if val is not None:
            cfg[key] = str(val)
    return cfg


def _add_common(p):
    p.add_argument("--config", metavar="PATH", help="flat 'section.key = value' config file")
    p.add_argument("--out", metavar="DIR", default=None, help="output directory")
    p.add_argument("--jobs", type=int, default=1, metavar="N", help="worker processes")
    p.add_argument("--seed", type=int, default=0, metavar="U64", help="seed for sampled sweeps")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")


def _add_theta(p):
    p.add_argument("--theta0", help="initial-data family (PowerLog, oscillatory, table)")
    p.add_argument("--a", type=float, help="log-decay exponent a")
    p.add_argument("--sign", help="'+' or '-' (PowerLog)")
    p.add_argument("--amplitude", type=float)
    p.add_argument("--table", help="CSV table for the Custom-table family")


# -- commands -------------------------------------------------------------

def cmd_simulate(args, out):
    from .pdesolver import SimConfig, simulate

    cfg = _config(args)
    if args.t0 is not None:
        cfg["sim.t0"] = str(args.t0)
    if args.T is not None:
        cfg["sim.horizon"] = str(args.T)
    if args.epsilon is not None:
        cfg["data.epsilon"] = str(args.epsilon)
    sim_cfg = SimConfig.from_config(cfg)
    try:
        result = simulate(sim_cfg)
    except (BlowUpDetected, StepFailure) as exc:
        _dump_json(out.path("diagnostics.json"), {"error": type(exc).__name__, "message": str(exc)})
        return EXIT_FAIL
    result.write(out.tmp)
    d = result.diagnostics
    return EXIT_PASS if d.get("m_matrix", True) and d.get("origin_positive", True) else EXIT_FAIL


def cmd_law(args, out):
    cfg = _config(args)
    theta0 = Theta0Spec.from_config(cfg)
    try:
        t0 = float(args.t0 if args.t0 is not None else cfg.get("law.t0", 100.0))
        T = float(args.T if args.T is not None else cfg.get("law.horizon", 1e6))
        samples = int(args.samples if args.samples is not None else cfg.get("law.samples", 400))
        origin = float(cfg.get("law.origin", 0.0))
        C = float(cfg.get("law.C", 10.0))
        spacing = str(cfg.get("law.spacing", "loglog"))
    except ValueError as exc:
        raise ConfigError(f"bad law setting: {exc}") from None
    trace = integrate_modulation(theta0, t0, T, samples=samples, origin=origin, C=C, spacing=spacing)
    trace.to_csv(out.path("trace.csv"))
    label = classify_regime(trace, min_samples=min(100, max(2, samples // 2)))
    summary = label.to_dict(band_residual(trace, theta0) if theta0.family != "Custom-table" else None)
    summary.update({"theta0": theta0.describe(), "t0": t0, "T": T, "samples": samples,
                    "r2": None if np.isnan(label.r2) else label.r2,
                    "new_max": label.new_max, "new_min": label.new_min})
    _dump_json(out.path("regime.json"), summary)
    return EXIT_PASS


def cmd_kernel_check(args, out):
    from .suites import kernel_suite

    checks = kernel_suite()
    return _report_checks(checks, out.path("kernel_check.json"))


def cmd_identities_check(args, out):
    from .suites import identities_suite

    checks = identities_suite(seed=args.seed)
    return _report_checks(checks, out.path("identities_check.json"))


def _report_checks(checks, path):
    ok = all(c.passed for c in checks)
    _dump_json(path, {"verdict": "PASS" if ok else "FAIL", "checks": [c.to_dict() for c in checks]})
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.value:.3e} (tol {c.tolerance:.0e})")
    return EXIT_PASS if ok else EXIT_FAIL


def _sweep_job(job):
    case, kwargs = job
    return bc.ratio_sweep(case, **kwargs)


def cmd_bounds_check(args, out):
    cfg = _config(args)
    try:
        kwargs = {"t_end": float(cfg.get("bounds.t_end", 1e80)),
                  "samples": int(cfg.get("bounds.samples", 20))}
        if "bounds.t0_values" in cfg:
            kwargs["t0_values"] = tuple(float(v) for v in cfg["bounds.t0_values"].split(","))
    except ValueError as exc:
        raise ConfigError(f"bad bounds setting: {exc}") from None
    cases = bc.standard_cases() + [bc.mutation_case()]
    jobs = [(c, kwargs) for c in cases]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_job, jobs))
    else:
        results = [_sweep_job(j) for j in jobs]

    rows = [row for res in results for row in res.rows]
    cols = list(zip(*rows))
    ids = [f"{cid}@t0={t0:g}" for cid, t0 in zip(cols[0], cols[1])]
    write_columns(out.path("bounds.csv"), ["case_id", "t", "x", "lhs", "rhs", "ratio"],
                  [ids, cols[2], cols[3], cols[4], cols[5], cols[6]])

    verdicts = {}
    ok = True
    for res in results:
        mutant = res.case.log_shift > 0
        expected = "FAIL" if mutant else "PASS"
        good = res.verdict == expected
        ok &= good
        verdicts[res.case.case_id] = dict(res.to_dict(), expected=expected)
        print(f"{'PASS' if good else 'FAIL'}  {res.case.case_id}: sweep {res.verdict} "
              f"(max {res.max_ratio:.3g}, slope {res.slope:.3f}, t0 factor {res.stability:.3f})")
        if res.reading_flag:
            print(f"NOTE  {res.case.case_id}: the {res.alternative['reading']} reading gives "
                  f"{res.alternative['verdict']}")
    envelopes = {}
    for case in bc.theta_cases():
        env = bc.envelope_check(case)
        ok &= env["verdict"] == "PASS"
        envelopes[case.case_id] = env
        print(f"{env['verdict']}  {case.case_id}: doubling factor {env['doubling_factor']:.4f}")
    _dump_json(out.path("bounds.json"), {"verdict": "PASS" if ok else "FAIL", "sweeps": verdicts,
                                         "envelopes": envelopes})
    return EXIT_PASS if ok else EXIT_FAIL


def _load_trace(directory):
    path = os.path.join(directory, "trace.csv")
    if not os.path.isfile(path):
        raise UsageError(f"{directory}: no trace.csv")
    try:
        header, cols = read_columns(path)
    except (DomainError, ValueError) as exc:
        raise UsageError(f"{path}: {exc}") from None
    if header == LAW_TRACE:
        kind = "law"
    elif header == SIM_TRACE:
        kind = "simulate"
    else:
        raise UsageError(f"{path}: unrecognised trace columns {header}")
    data = dict(zip(header, cols))
    return kind, data["t"], data["loglambda"]


def cmd_report(args, out):
    if not args.runs:
        raise UsageError("report needs at least one run directory")
    series = []
    for d in args.runs:
        kind, t, loglam = _load_trace(d)
        name = os.path.basename(os.path.normpath(d)) or d
        series.append((name, kind, t, loglam))
    names = [s[0] for s in series]
    if len(set(names)) != len(names):
        series = [(f"{k}:{s[0]}", *s[1:]) for k, s in enumerate(series)]

    ref_logt, ref_y = np.log(series[0][2]), series[0][3]
    col_name, col_t, col_logt, col_y, col_d = [], [], [], [], []
    fits = {}
    for name, kind, t, y in series:
        logt = np.log(t)
        inside = (logt >= ref_logt[0]) & (logt <= ref_logt[-1])
        delta = np.where(inside, y - np.interp(logt, ref_logt, ref_y), np.nan)
        col_name += [name] * t.size
        col_t.append(t)
        col_logt.append(logt)
        col_y.append(y)
        col_d.append(delta)
        entry = {"kind": kind, "samples": int(t.size)}
        if t.size >= 4:
            half = t.size // 2
            p, alpha, beta, r2 = fit_envelope(t[half:], y[half:])
            entry.update({"exponent": p, "alpha": alpha, "beta": beta, "r2": r2})
        fits[name] = entry
    write_columns(out.path("loglambda_vs_logt.csv"),
                  ["series", "t", "logt", "loglambda", "delta_vs_first"],
                  [col_name, np.concatenate(col_t), np.concatenate(col_logt), np.concatenate(col_y),
                   np.concatenate(col_d)])
    _dump_json(out.path("envelope_fit.json"), {"reference": series[0][0], "series": fits})
    return EXIT_PASS


COMMANDS = {
    "simulate": cmd_simulate, "law": cmd_law, "kernel-check": cmd_kernel_check,
    "bounds-check": cmd_bounds_check, "identities-check": cmd_identities_check, "report": cmd_report,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="ymheat", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the radial PDE solver")
    _add_common(p)
    _add_theta(p)
    p.add_argument("--t0", type=float, help="start time (sim.t0)")
    p.add_argument("--T", type=float, help="horizon (sim.horizon)")
    p.add_argument("--epsilon", type=float, help="perturbation size (data.epsilon)")

    p = sub.add_parser("law", help="integrate the modulation law and classify the regime")
    _add_common(p)
    _add_theta(p)
    p.add_argument("--t0", type=float, help="start time (law.t0)")
    p.add_argument("--T", type=float, help="horizon (law.horizon)")
    p.add_argument("--samples", type=int, help="trace samples (law.samples)")

    for name, text in (("kernel-check", "heat-kernel golden checks"),
                       ("identities-check", "integral identities and Fubini checks"),
                       ("bounds-check", "convolution-bound ratio sweeps and envelope checks")):
        p = sub.add_parser(name, help=text)
        _add_common(p)

    p = sub.add_parser("report", help="merge run directories into plot-ready files")
    _add_common(p)
    p.add_argument("runs", nargs="*", help="run directories containing trace.csv")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    if args.jobs < 1:
        print("ymheat: --jobs must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    out = OutputDir(args.out or os.path.join("ymheat_out", args.command))
    try:
        status = COMMANDS[args.command](args, out)
    except (ConfigError, UsageError) as exc:
        out.discard()
        print(f"ymheat {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except YMHeatError as exc:
        out.discard()
        print(f"ymheat {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except BaseException:
        out.discard()
        raise
    out.commit()
    return status


if __name__ == "__main__":
    sys.exit(main())
