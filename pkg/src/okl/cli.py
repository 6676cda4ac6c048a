"""Command-line entry point ``okl``.

Exit codes: 0 when every criterion passes, 1 when a criterion fails (its
name is printed on stderr), 2 for invalid input.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .errors import OklError
from .experiments import EXPERIMENTS, ExperimentConfig, report_lines, run_experiment, write_result
from .params import AsepParams, ScalingSpec, scaling_to_asep


def _writer():
    return csv.writer(sys.stdout, lineterminator="\n")


def _asep_params(args) -> AsepParams:
    if args.u is not None:
        params, _, _ = scaling_to_asep(ScalingSpec(args.n_sites, args.u, args.v))
        return params
    return AsepParams(args.alpha, args.beta, args.gamma, args.delta, args.q, args.n_sites)


def _cmd_asep_exact(args) -> int:
    from .asep import generator_stationary, stationary_residual
    params = _asep_params(args)
    law = generator_stationary(params, method=args.method)
    w = _writer()
    w.writerow(["state", "probability"])
    for tau, p in zip(law.outcomes, law.probs):
        w.writerow(["".join(map(str, tau)), repr(float(p))])
    print(f"# residual {stationary_residual(params, law):.3e}", file=sys.stderr)
    return 0


def _cmd_asep_sim(args) -> int:
    from .asep import generator_stationary, gillespie_simulate
    from .stats import total_variation
    params = _asep_params(args)
    traj = gillespie_simulate(params, args.t_end, args.seed, max_events=args.max_events)
    t_burn = args.burn_in * traj.t_final
    mean, se = traj.batch_means(t_burn, traj.t_final)
    w = _writer()
    w.writerow(["state", "occupation", "stderr"])
    for i, tau in enumerate(traj.occupation_law().outcomes):
        w.writerow(["".join(map(str, tau)), repr(float(mean[i])), repr(float(se[i]))])
    msg = (f"# events {traj.n_events}, t_final {traj.t_final:.6g}, counters "
           f"{traj.counters.tolist()}")
    if params.n_sites <= 14:
        exact = generator_stationary(params)
        emp = traj.occupation_law(t_burn)
        msg += f", TV to exact {total_variation(emp, exact):.4g}"
    print(msg, file=sys.stderr)
    return 0


def _cmd_mpa_eval(args) -> int:
    from .mpa import mpa_law, mpa_state_probability_adaptive
    _, abcd, _ = scaling_to_asep(ScalingSpec(args.n_sites, args.u, args.v))
    q = math.exp(-2.0 / math.sqrt(args.n_sites))
    w = _writer()
    if args.state:
        tau = tuple(int(c) for c in args.state)
        p, dim = mpa_state_probability_adaptive(abcd, q, tau)
        w.writerow(["state", "probability", "dimension"])
        w.writerow([args.state, repr(p), dim])
        return 0
    law = mpa_law(abcd, q, args.n_sites)
    w.writerow(["state", "probability"])
    for tau, p in zip(law.outcomes, law.probs):
        w.writerow(["".join(map(str, tau)), repr(float(p))])
    return 0


def _cmd_rw_law(args) -> int:
    from .rw import increment_law, partition_function
    spec = ScalingSpec(args.n_steps, args.u, args.v)
    params, abcd, _ = scaling_to_asep(spec)
    law = increment_law(abcd, params.q, args.n_steps)
    w = _writer()
    w.writerow(["increments", "probability"])
    for s, p in zip(law.outcomes, law.probs):
        w.writerow([" ".join(f"{x:+d}" for x in s), repr(float(p))])
    print(f"# log Z {partition_function(abcd, params.q, args.n_steps):.15g}", file=sys.stderr)
    return 0


def _cmd_zn_sweep(args) -> int:
    from .scaling import zn_partition
    w = _writer()
    w.writerow(["n", "method", "z", "stderr", "exact", "ess"])
    for n in args.ladder:
        spec = ScalingSpec(n, args.u, args.v, args.L)
        est = zn_partition(spec, method=args.method, n_samples=args.samples, seed=args.seed)
        w.writerow([n, est.method, repr(est.value), repr(est.stderr), est.exact,
                    "" if est.ess is None else repr(est.ess)])
    return 0


def _cmd_pointwise(args) -> int:
    from .scaling import pointwise_convergence_check
    g = {"zero": lambda t: 0.0 * np.asarray(t),
         "sine": lambda t: np.sin(2.0 * np.pi * np.asarray(t)),
         "quadratic": lambda t: np.asarray(t) ** 2 - 0.5 * np.asarray(t)}[args.path]
    rows = pointwise_convergence_check(args.x, g, args.u, args.v, args.ladder, args.L)
    w = _writer()
    w.writerow(["n", "hn", "h", "abs_error", "max_abs_c", "sum_c", "sum_c_limit", "taylor_remainder"])
    for r in rows:
        w.writerow([r.n_steps, repr(r.hn_value), repr(r.h_value), repr(r.abs_error), repr(r.max_abs_c),
                    repr(r.sum_c), repr(r.sum_c_limit), repr(r.taylor_remainder)])
    return 0


def _cmd_combapprox(args) -> int:
    from .scaling import combapprox_check
    w = _writer()
    w.writerow(["a", "n", "sup_ratio", "argsup_k", "inf_ratio", "n_points"])
    for a in args.a:
        for r in combapprox_check(a, args.ladder):
            w.writerow([a, r.n, repr(r.sup_ratio), r.argsup_k, repr(r.inf_ratio), r.n_points])
    return 0


def _cmd_kpz_z(args) -> int:
    from .kpz import partition_bound_integral, z_continuum
    z = z_continuum(args.u, args.v, args.L, n_samples=args.samples, seed=args.seed, n_grid=args.grid)
    out = {"u": args.u, "v": args.v, "L": args.L, "z": z.value, "stderr": z.stderr,
           "window": list(z.window), "window_rel_change": z.window_rel_change,
           "n_samples": z.n_samples, "n_grid": z.n_grid}
    if args.v >= 0:
        out["bound_integral"] = partition_bound_integral(args.u, args.v)
    print(json.dumps(out, indent=2))
    return 0


def _cmd_kpz_sample(args) -> int:
    from .kpz import q_sampler
    s = q_sampler(args.u, args.v, args.L, n_samples=args.samples, seed=args.seed, n_grid=args.grid)
    w = _writer()
    w.writerow(["x", "g_end", "h_end", "weight"])
    for row in zip(s.x, s.g_end, s.h_end, s.weights):
        w.writerow([repr(float(c)) for c in row])
    print(f"# ESS {s.ess:.1f} of {len(s)}", file=sys.stderr)
    return 0


def _cmd_bessel(args) -> int:
    from .kpz import bessel_mellin_check
    chk = bessel_mellin_check(args.mu, args.nu, args.a)
    print(json.dumps({"mu": args.mu, "nu": args.nu, "a": args.a, "quadrature": chk.quadrature,
                      "closed_form": chk.closed_form, "residual": chk.residual}, indent=2))
    return 0 if chk.residual <= args.tol else 1


def _run_config(args, experiment: str | None) -> int:
    doc = {}
    if args.config:
        doc = json.loads(Path(args.config).read_text())
    elif experiment is None:
        raise OklError("run needs --config")
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.workers is not None:
        doc["workers"] = args.workers
    cfg = ExperimentConfig.from_dict(doc, experiment)
    result = run_experiment(cfg)
    out = args.out or cfg.output_dir
    csv_path, json_path = write_result(result, out)
    for line in report_lines(result):
        print(line)
    print(f"wrote {csv_path} and {json_path}")
    if not result.passed:
        print("failing criteria: " + ", ".join(result.failing()), file=sys.stderr)
        return 1
    return 0


def _scaling_args(p, n_flag: str = "--n-steps"):
    p.add_argument(n_flag, type=int, required=True, dest=n_flag.lstrip("-").replace("-", "_"))
    p.add_argument("--u", type=float, required=True)
    p.add_argument("--v", type=float, required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="okl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    asep = sub.add_parser("asep", help="finite open ASEP").add_subparsers(dest="action", required=True)
    for name, fn in (("exact", _cmd_asep_exact), ("sim", _cmd_asep_sim)):
        p = asep.add_parser(name)
        p.add_argument("--n-sites", type=int, required=True)
        p.add_argument("--u", type=float, help="use the weak-asymmetry scaling with this u")
        p.add_argument("--v", type=float)
        for rate in ("alpha", "beta", "gamma", "delta", "q"):
            p.add_argument(f"--{rate}", type=float, default=0.0 if rate in ("gamma", "delta", "q") else 1.0)
        if name == "exact":
            p.add_argument("--method", choices=["auto", "dense", "sparse", "power"], default="auto")
        else:
            p.add_argument("--t-end", type=float, default=1e4)
            p.add_argument("--max-events", type=int, default=None)
            p.add_argument("--burn-in", type=float, default=0.01, help="fraction of the run discarded")
            p.add_argument("--seed", type=int, default=0)
        p.set_defaults(func=fn)

    mpa = sub.add_parser("mpa", help="matrix product ansatz").add_subparsers(dest="action", required=True)
    p = mpa.add_parser("eval")
    _scaling_args(p, "--n-sites")
    p.add_argument("--state", help="bit string; omit for the full law")
    p.set_defaults(func=_cmd_mpa_eval)

    rw = sub.add_parser("rw", help="reweighted random walks").add_subparsers(dest="action", required=True)
    p = rw.add_parser("law")
    _scaling_args(p)
    p.set_defaults(func=_cmd_rw_law)

    sc = sub.add_parser("scaling", help="rescaled lattice measures").add_subparsers(dest="action", required=True)
    p = sc.add_parser("zn-sweep")
    p.add_argument("--u", type=float, default=1.0)
    p.add_argument("--v", type=float, default=1.0)
    p.add_argument("--L", type=float, default=1.0)
    p.add_argument("--ladder", type=int, nargs="+", default=[4, 8, 16, 32, 64])
    p.add_argument("--method", choices=["exact-dp", "importance-sampling"], default="exact-dp")
    p.add_argument("--samples", type=int, default=100000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_zn_sweep)
    p = sc.add_parser("pointwise")
    p.add_argument("--path", choices=["zero", "sine", "quadratic"], default="zero")
    p.add_argument("--x", type=float, default=0.0)
    p.add_argument("--u", type=float, default=1.0)
    p.add_argument("--v", type=float, default=1.0)
    p.add_argument("--L", type=float, default=1.0)
    p.add_argument("--ladder", type=int, nargs="+", default=[2 ** k for k in range(4, 15)])
    p.set_defaults(func=_cmd_pointwise)
    p = sc.add_parser("combapprox")
    p.add_argument("--a", type=float, nargs="+", default=[0.5, 1.0, 2.0])
    p.add_argument("--ladder", type=int, nargs="+", default=[100, 1000, 10000])
    p.set_defaults(func=_cmd_combapprox)

    kpz = sub.add_parser("kpz", help="continuum measures").add_subparsers(dest="action", required=True)
    for name, fn in (("z", _cmd_kpz_z), ("sample", _cmd_kpz_sample)):
        p = kpz.add_parser(name)
        p.add_argument("--u", type=float, required=True)
        p.add_argument("--v", type=float, required=True)
        p.add_argument("--L", type=float, default=1.0)
        p.add_argument("--samples", type=int, default=20000)
        p.add_argument("--grid", type=int, default=1024)
        p.add_argument("--seed", type=int, default=0)
        p.set_defaults(func=fn)
    p = kpz.add_parser("bessel-check")
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--nu", type=float, required=True)
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--tol", type=float, default=1e-8)
    p.set_defaults(func=_cmd_bessel)

    run = sub.add_parser("run", help="run an experiment described by a JSON config")
    run.add_argument("--config", required=True)
    run.set_defaults(func=lambda a: _run_config(a, None))
    parents = [run]
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", help="JSON config; built-in defaults when omitted")
        p.set_defaults(func=lambda a, _n=name: _run_config(a, _n))
        parents.append(p)
    for p in parents:
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--workers", type=int, default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except OklError as exc:
        print(f"okl: error: {exc}", file=sys.stderr)
        return 2
    except BrokenPipeError:
        # downstream closed early (e.g. `| head`); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 0
    except Exception as exc:  # schema violations and similar
        if exc.__class__.__name__ == "ValidationError":
            print(f"okl: invalid config: {exc.message}", file=sys.stderr)
            return 2
        raise


if __name__ == "__main__":
    sys.exit(main())
