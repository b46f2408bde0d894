"""Command-line front end.

    noisestab analyze TABLE [--out DIR]
    noisestab simulate [--function NAME | --table FILE] --t T [T ...] [--out DIR]
    noisestab stability boolean (--function NAME | --table FILE) --rho R [R ...]
    noisestab stability gaussian --rho R --a A
    noisestab verify SUITE [--fast] [--json PATH]
    noisestab report --out DIR

Common options: --config FILE (JSON mirroring SimConfig), --seed, --paths,
--dt, --workers.  The default seed comes from NOISESTAB_SEED when set.
"""

import argparse
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import fourier, harness
from .coupling import (
    BrownianPath,
    TimeChange,
    clock_traces_csv,
    dictator_speed,
    simulate_model_process,
    time_change_on_shared_path,
)
from .gaussian import GaussianStabilityQuery, gaussian_stability, sheppard_formula
from .rbm import SimConfig, default_seed, run_N_process, simulate, variance_se
from . import rng


@dataclass
class RunManifest:
    subcommand: str
    config: dict
    seed: int
    corpus: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    wall_clock: float = 0.0

    def write(self, path):
        self.outputs = sorted(set(self.outputs) | {str(path)})
        Path(path).write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")


def parse_function(name):
    """dictator[N], majN, parityN, tribesWxS, constC:N."""
    name = name.strip().lower()
    try:
        if name.startswith("dictator"):
            return fourier.make_dictator(int(name[8:] or 1), 1)
        if name.startswith("maj"):
            return fourier.make_majority(int(name[3:]))
        if name.startswith("parity"):
            return fourier.make_parity(int(name[6:]))
        if name.startswith("tribes"):
            w, s = name[6:].split("x")
            return fourier.make_tribes(int(w), int(s))
        if name.startswith("const"):
            c, n = name[5:].split(":")
            return fourier.make_constant(int(n), float(c))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad function {name!r}: {exc}") from None
    raise argparse.ArgumentTypeError(
        f"unknown function {name!r}; use dictator[N], majN, parityN, tribesWxS or constC:N")


def _positive_int(v):
    k = int(v)
    if k < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return k


def _positive_float(v):
    x = float(v)
    if not x > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return x


def build_config(args):
    base = SimConfig.from_json(args.config) if args.config else SimConfig(seed=default_seed())
    kw = {"workers": args.workers}
    if args.seed is not None:
        kw["seed"] = args.seed
    if args.paths is not None:
        kw["n_paths"] = args.paths
    if args.dt is not None:
        kw["dt"] = args.dt
    return base.with_(**kw)


def _load_function(args):
    if getattr(args, "table", None):
        return fourier.load_table(args.table)
    if getattr(args, "function", None):
        return parse_function(args.function)
    return None


def _function_label(args):
    return args.table or args.function or f"coordinates(n={args.n})"


# ---------------------------------------------------------------- commands


def cmd_analyze(args):
    f = fourier.load_table(args.table)
    s = fourier.wht_forward(f)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fourier.write_spectrum_csv(s, out / "spectrum.csv")
    inf = fourier.influences(f)
    inf2 = fourier.influences_l2(s)
    with open(out / "influences.csv", "w") as fh:
        fh.write("coordinate,influence,influence_l2\n")
        for i, (a, b) in enumerate(zip(inf, inf2), start=1):
            fh.write(f"{i},{float(a)!r},{float(b)!r}\n")
    rhos = np.round(np.linspace(0.0, 1.0, 11), 10)
    summary = {"n": f.n, "mean": f.mean, "variance": f.variance, "is_boolean": f.is_boolean,
               "max_influence": float(inf.max()), "stability": {repr(float(r)): fourier.stability(s, r) for r in rhos}}
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"n={f.n} mean={f.mean:.6g} variance={f.variance:.6g}")
    print(f"{'i':>3} {'Inf_i':>12} {'Inf_i (L2)':>12}")
    for i, (a, b) in enumerate(zip(inf, inf2), start=1):
        print(f"{i:>3} {a:>12.6g} {b:>12.6g}")
    print("Stab_rho: " + "  ".join(f"{r:.1f}:{v:.6g}" for r, v in zip(rhos, summary["stability"].values())))
    return 0


def cmd_simulate(args):
    t0 = time.perf_counter()
    config = build_config(args)
    f = _load_function(args)
    times = sorted(set(args.t))
    if f is None:
        ens = simulate(args.n, times, config)
    else:
        ens = run_N_process(f, config, times)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ens.write_csv(out / "checkpoints.csv")
    (out / "summary.json").write_text(ens.summary_json() + "\n")
    for row in ens.summary():
        line = f"t={row['t']:.6g} var_x1={row['var_x1']['value']:.6g}±{row['var_x1']['se']:.2g}"
        if "mean_N2" in row:
            line += f" E[N^2]={row['mean_N2']['value']:.6g}±{row['mean_N2']['se']:.2g}"
        print(line)
    man = RunManifest("simulate", config.to_dict(), config.seed,
                      corpus=[_function_label(args)],
                      outputs=[str(out / "checkpoints.csv"), str(out / "summary.json")],
                      wall_clock=time.perf_counter() - t0)
    man.write(out / "manifest.json")
    return 0


def cmd_stability(args):
    if args.kind == "gaussian":
        if len(args.rho) != 1 or args.a is None:
            print("stability gaussian needs one --rho and --a", file=sys.stderr)
            return 2
        try:
            q = GaussianStabilityQuery(args.rho[0], args.a)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        print(repr(gaussian_stability(q)))
        return 0
    f = _load_function(args)
    if f is None:
        print("stability boolean needs --function or --table", file=sys.stderr)
        return 2
    s = fourier.wht_forward(f)
    for r in args.rho:
        print(f"{float(r)!r} {float(fourier.stability(s, r))!r}")
    return 0


def cmd_verify(args):
    config = build_config(args)
    try:
        if args.suite == "ck-variant" and (args.n or args.phi):
            reports = harness.suite_ck_variant(config, args.fast, n_values=(args.n or 3,),
                                               phis=tuple(args.phi) if args.phi else ("square", "entropy", "quartic"))
        else:
            reports = harness.run_suite(args.suite, config, args.fast)
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return 2
    text = harness.reports_json(reports)
    if args.json == "-":
        print(text)
    else:
        for r in reports:
            print(r.line())
            if r.check_id.startswith("ck-variant"):
                rows = r.details["rows"]
                for row in rows:
                    where = "dictator" if row["argmax_in_dictator_family"] else f"code {row['argmax']}"
                    print(f"      t={row['t']:g} phi={row['phi']}: argmax {where}, margin "
                          f"{row['margin']:.4g} ± {row['margin_se']:.2g}")
        if args.json:
            Path(args.json).write_text(text + "\n")
    return 0 if all(r.passed for r in reports) else 1


def cmd_report(args):
    """Plot-ready CSV data for the main identities; no plotting."""
    t0 = time.perf_counter()
    config = build_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    times = np.round(np.linspace(0.1, 3.0, 30), 10)
    ens = simulate(1, times, config)
    p = out / "variance_law.csv"
    with open(p, "w") as fh:
        fh.write("t,var,se,exact\n")
        for j, t in enumerate(ens.times):
            v = variance_se(ens.x[:, j, 0])
            fh.write(f"{float(t)!r},{float(v['value'])!r},{float(v['se'])!r},{float(1 - math.exp(-t))!r}\n")
    written.append(p)

    rhos = np.round(np.linspace(0.0, 1.0, 51), 10)
    p = out / "stability_curves.csv"
    funcs = {"dictator": fourier.make_dictator(1), "maj3": fourier.make_majority(3),
             "maj11": fourier.make_majority(11), "parity2": fourier.make_parity(2),
             "tribes2x3": fourier.make_tribes(2, 3)}
    specs = {k: fourier.wht_forward(v) for k, v in funcs.items()}
    with open(p, "w") as fh:
        fh.write("rho,gaussian_half," + ",".join(specs) + "\n")
        for r in rhos:
            vals = [fourier.stability(s, r) for s in specs.values()]
            fh.write(f"{float(r)!r},{float(sheppard_formula(r))!r}," + ",".join(repr(float(v)) for v in vals) + "\n")
    written.append(p)

    p = out / "model_process.csv"
    mt = np.round(np.linspace(0.1, 3.0, 30), 10)
    with open(p, "w") as fh:
        fh.write("m0,t,second_moment,se,exact\n")
        for k, m0 in enumerate((0.3, 0.5, 0.7)):
            me = simulate_model_process(m0, config, mt, path0=k * config.n_paths)
            for j, t in enumerate(me.times):
                est = me.second_moment(j)
                ex = gaussian_stability(GaussianStabilityQuery(1 - math.exp(-t), m0))
                fh.write(f"{float(m0)!r},{float(t)!r},{float(est['value'])!r},{float(est['se'])!r},{float(ex)!r}\n")
    written.append(p)

    # one coupled pair of clocks: g = Maj_3 against the dictator on a shared path
    g = fourier.make_majority(3)
    t_end = math.log(2.0)
    steps = np.round(np.arange(0.0, t_end, config.dt), 12)
    grid = np.append(steps, t_end)
    one = simulate(3, grid, config.with_(n_paths=1), f=g)
    gen = rng.generator(config.seed, rng.TAG_BRIDGE, 0)
    w = BrownianPath.from_observations(one.qv[0], one.N[0], gen, coarse_dt=config.dt)
    tc_d = time_change_on_shared_path(w, dictator_speed, t_end, config.dt)
    tc_g = TimeChange(one.times, np.maximum.accumulate(one.qv[0]), one.N[0])
    p = out / "clock_traces.csv"
    clock_traces_csv(p, tc_d, tc_g, w)
    written.append(p)

    p = out / "majority_gaps.csv"
    with open(p, "w") as fh:
        fh.write("n,rho,stab,gap\n")
        for n in (1, 3, 5, 7, 9, 11, 21, 51, 101, 1001):
            for r in (0.25, 0.5, 0.75):
                st = harness.majority_stability_exact(n, r)
                fh.write(f"{n},{float(r)!r},{float(st)!r},{float(st - gaussian_stability(GaussianStabilityQuery(r, 0.5)))!r}\n")
    written.append(p)

    man = RunManifest("report", config.to_dict(), config.seed,
                      corpus=list(funcs), outputs=[str(x) for x in written],
                      wall_clock=time.perf_counter() - t0)
    man.write(out / "manifest.json")
    for x in written:
        print(x)
    return 0


# ------------------------------------------------------------------ parser


def _add_common(p):
    p.add_argument("--config", help="JSON file with SimConfig fields")
    p.add_argument("--seed", type=int, help="64-bit seed (default: $NOISESTAB_SEED or built-in)")
    p.add_argument("--paths", type=_positive_int, help="number of simulated paths")
    p.add_argument("--dt", type=_positive_float, help="base time step")
    p.add_argument("--workers", type=_positive_int, default=os.cpu_count() or 1,
                   help="worker threads (default: available cores)")


def _add_function(p):
    p.add_argument("--function", help="dictator[N], majN, parityN, tribesWxS, constC:N")
    p.add_argument("--table", help="truth-table file (n=<k> header, then 'index value' lines)")


def build_parser():
    ap = argparse.ArgumentParser(prog="noisestab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="spectrum, influences and stability of a truth table")
    p.add_argument("table")
    p.add_argument("--out", default="analysis")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="simulate paths and dump checkpoints")
    _add_common(p)
    _add_function(p)
    p.add_argument("--n", type=_positive_int, default=1, help="dimension when no function is given")
    p.add_argument("--t", type=float, nargs="+", required=True, help="checkpoint times")
    p.add_argument("--out", default="simulation")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("stability", help="Stab_rho of a Boolean function or Gaussian Lambda_rho(a)")
    p.add_argument("kind", choices=["boolean", "gaussian"])
    _add_function(p)
    p.add_argument("--rho", type=float, nargs="+", required=True)
    p.add_argument("--a", type=float)
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("verify", help="run a verification suite")
    _add_common(p)
    p.add_argument("suite", help="suite name or 'all': " + ", ".join(harness.SUITES))
    p.add_argument("--fast", action="store_true", help="reduced sizes")
    p.add_argument("--json", help="write the JSON report here ('-' prints it instead of the table)")
    p.add_argument("--n", type=int, choices=[1, 2, 3, 4], help="dimension for ck-variant")
    p.add_argument("--phi", action="append", choices=["square", "entropy", "quartic"],
                   help="convex function for ck-variant (repeatable)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", help="write plot-ready CSV data")
    _add_common(p)
    p.add_argument("--out", default="report")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, argparse.ArgumentTypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
