"""Experiment runner: configuration, seeding, ladders and result tables.

Each experiment returns ``(rows, criteria)``. ``rows`` become a CSV whose
bytes depend only on the configuration; ``criteria`` become the JSON
summary with ``{criterion, value, tolerance, pass}`` entries.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
import scipy

from . import __version__, kernels
from .asep import generator_stationary, height_increment_law
from .errors import DomainError, FanRegionError
from .kpz import bessel_mellin_check, envelope_ratio, partition_bound_integral, q_sampler, z_continuum
from .mpa import mpa_law
from .params import ScalingSpec, scaling_to_asep
from .rw import increment_law
from .scaling import (combapprox_check, combapprox_log_ratio, combapprox_log_ratio_exact,
                      admissible_k, pointwise_convergence_check, qn_exact_marginals,
                      qn_increment_law, qn_sampler, zn_exact)
from .stats import EmpiricalSample, ks_distance, total_variation, trend_report

EXPERIMENTS = ("triple-check", "pointwise", "zn-convergence", "weak-convergence", "bounds", "bessel")

DEFAULT_BESSEL_GRID = [
    [1.0, 0.0, 1.0], [0.0, 0.0, 1.0], [2.0, 0.5, 2.0], [0.5, -0.3, 0.7], [1.2, 1.5, 1.0],
    [3.0, 0.0, math.sqrt(2.0)], [-0.5, 0.2, 3.0], [0.1, 1.0, 0.5], [2.5, -2.0, 0.8],
]

DEFAULTS: dict[str, dict] = {
    "triple-check": {
        "uv_pairs": [[1.0, 1.0], [2.0, 0.5], [0.3, 0.4]],
        "n_ladder": [2, 3, 4, 5, 6, 7],
        "tolerances": {"tv_rw_generator": 1e-9, "mpa_generator": 1e-8, "tv_qn_rw": 1e-9},
    },
    "pointwise": {
        "u": 1.0, "v": 1.0, "L": 1.0,
        "n_ladder": [2 ** k for k in range(4, 15)],
        "tolerances": {"halving_ratio_slack": 0.2},
    },
    "zn-convergence": {
        "u": 1.0, "v": 1.0, "L": 1.0,
        "n_ladder": [4, 8, 12, 16, 32, 64],
        "exact_max_n": 12,
        "n_samples": 200000,
        "continuum_samples": 100000,
        "n_grid": 1024,
        "tolerances": {"final_gap": 0.05, "trend_slack": 0.10, "min_ess": 1000.0,
                       "bound_factor": 1.5, "is_vs_exact_se": 4.0},
    },
    "weak-convergence": {
        "u": 1.0, "v": 1.0, "L": 1.0,
        "n_ladder": [4, 8, 12, 32, 64],
        "exact_max_n": 12,
        "n_samples": 200000,
        "continuum_samples": 100000,
        "n_grid": 1024,
        "tolerances": {"final_ks": 0.05, "trend_slack": 0.10, "min_ess": 1000.0},
    },
    "bounds": {
        "u": 1.0, "v": 1.0, "L": 1.0,
        "n_ladder": [4, 8, 16, 32, 64, 128, 256, 512, 1024],
        "a_values": [0.5, 1.0, 2.0],
        "combapprox_n": [100, 1000, 10000],
        "continuum_samples": 20000,
        "n_grid": 1024,
        "tolerances": {"combapprox_factor": 1.5, "combapprox_exact": 1e-10, "bound_factor": 1.5},
    },
    "bessel": {
        "uv_pairs": [[0.5, 0.5], [1.0, 1.0], [1.5, -0.5], [0.2, 0.1]],
        "bessel_grid": DEFAULT_BESSEL_GRID,
        "continuum_samples": 20000,
        "n_grid": 1024,
        "tolerances": {"bessel_residual": 1e-8, "window_rtol": 1e-8},
    },
}

COMMON_DEFAULTS = {"seed": 0, "workers": 1, "output_dir": "results"}


def load_schema() -> dict:
    return json.loads(resources.files("okl").joinpath("config_schema.json").read_text())


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    params: dict
    seed: int
    workers: int
    output_dir: str

    @classmethod
    def from_dict(cls, doc: dict, experiment: str | None = None) -> "ExperimentConfig":
        """Validate against the schema, fill defaults, and check the fan region."""
        doc = dict(doc)
        if experiment is not None:
            doc.setdefault("experiment", experiment)
            if doc["experiment"] != experiment:
                raise DomainError(f"config is for {doc['experiment']!r}, not {experiment!r}")
        jsonschema.validate(doc, load_schema())
        name = doc.pop("experiment")
        merged = {**COMMON_DEFAULTS, **DEFAULTS[name]}
        tolerances = {**DEFAULTS[name].get("tolerances", {}), **doc.pop("tolerances", {})}
        merged.update(doc)
        merged["tolerances"] = tolerances
        seed = merged.pop("seed")
        workers = merged.pop("workers")
        out = merged.pop("output_dir")
        cfg = cls(name, merged, int(seed), int(workers), str(out))
        cfg.check_fan_region()
        return cfg

    def check_fan_region(self) -> None:
        pairs = list(self.params.get("uv_pairs", []))
        if "u" in self.params:
            pairs.append([self.params["u"], self.params["v"]])
        for u, v in pairs:
            if not u + v > 0:
                raise FanRegionError(f"u + v must be positive, got u={u}, v={v}")

    def canonical(self) -> dict:
        return {"experiment": self.experiment, "seed": self.seed, **self.params}

    def config_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def tol(self, key: str) -> float:
        return float(self.params["tolerances"][key])


@dataclass
class Criterion:
    criterion: str
    value: float
    tolerance: float | str
    passed: bool
    detail: str = ""

    def as_json(self) -> dict:
        return {"criterion": self.criterion, "value": _json_num(self.value),
                "tolerance": _json_num(self.tolerance), "pass": bool(self.passed),
                "detail": self.detail}


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list = field(default_factory=list)
    criteria: list = field(default_factory=list)
    seeds: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.criteria)

    def failing(self) -> list[str]:
        return [c.criterion for c in self.criteria if not c.passed]


def _json_num(x):
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    return x


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def derive_seeds(base: int, n: int) -> list[int]:
    """Independent child seeds from a base seed (stable across runs)."""
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(base).spawn(n)]


def _pmap(fn, args: list, workers: int) -> list:
    if workers <= 1 or len(args) <= 1:
        return [fn(a) for a in args]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, args))


# triple-check --------------------------------------------------------------

def _triple_task(arg):
    u, v, n = arg
    spec = ScalingSpec(n, u, v)
    params, abcd, _ = scaling_to_asep(spec)
    gen = generator_stationary(params)
    gen_inc = height_increment_law(gen)
    rw_inc = increment_law(abcd, params.q, n)
    tv_rw = total_variation(rw_inc, gen_inc)
    if abcd.a_param < 1.0 and abcd.c_param < 1.0:
        mpa = mpa_law(abcd, params.q, n)
        mpa_err = float(np.max(np.abs(mpa.probs - gen.probs)))
    else:
        mpa_err = float("nan")
    tv_qn = total_variation(qn_increment_law(spec), rw_inc)
    return {"u": u, "v": v, "n": n, "tv_rw_generator": tv_rw, "max_abs_mpa_generator": mpa_err,
            "tv_qn_rw": tv_qn, "exact": True}


def run_triple_check(cfg: ExperimentConfig) -> ExperimentResult:
    p = cfg.params
    tasks = [(float(u), float(v), int(n)) for u, v in p["uv_pairs"] for n in p["n_ladder"]]
    rows = _pmap(_triple_task, tasks, cfg.workers)
    res = ExperimentResult(cfg, rows)
    worst_rw = max(r["tv_rw_generator"] for r in rows)
    mpa_vals = [r["max_abs_mpa_generator"] for r in rows if not math.isnan(r["max_abs_mpa_generator"])]
    worst_mpa = max(mpa_vals) if mpa_vals else 0.0
    worst_qn = max(r["tv_qn_rw"] for r in rows)
    res.criteria = [
        Criterion("tv_rw_vs_generator", worst_rw, cfg.tol("tv_rw_generator"),
                  worst_rw <= cfg.tol("tv_rw_generator"), f"max over {len(rows)} cases"),
        Criterion("mpa_vs_generator", worst_mpa, cfg.tol("mpa_generator"),
                  worst_mpa <= cfg.tol("mpa_generator"), f"{len(mpa_vals)} cases with A, C < 1"),
        Criterion("tv_qn_vs_rw", worst_qn, cfg.tol("tv_qn_rw"), worst_qn <= cfg.tol("tv_qn_rw")),
    ]
    return res


# pointwise -----------------------------------------------------------------

POINTWISE_PATHS = {
    "zero": (0.0, lambda t: 0.0 * np.asarray(t)),
    "sine": (0.3, lambda t: np.sin(2.0 * np.pi * np.asarray(t))),
    "quadratic": (-0.2, lambda t: np.asarray(t) ** 2 - 0.5 * np.asarray(t)),
}


def run_pointwise(cfg: ExperimentConfig) -> ExperimentResult:
    p = cfg.params
    ladder = [int(n) for n in p["n_ladder"]]
    res = ExperimentResult(cfg)
    slack = cfg.tol("halving_ratio_slack")
    for name, (x, g) in POINTWISE_PATHS.items():
        rows = pointwise_convergence_check(x, g, p["u"], p["v"], ladder, p["L"])
        for r in rows:
            res.rows.append({"path": name, "x": x, "n": r.n_steps, "hn": r.hn_value, "h": r.h_value,
                             "abs_error": r.abs_error, "max_abs_c": r.max_abs_c, "sum_c": r.sum_c,
                             "sum_c_limit": r.sum_c_limit, "sum_abs_c": r.sum_abs_c,
                             "taylor_remainder": r.taylor_remainder, "exact": True})
        errs = [r.abs_error for r in rows]
        if name == "zero":
            ratios = [errs[i] / errs[i + 1] for i in range(len(errs) - 1)]
            worst = max(abs(rt / 2.0 - 1.0) for rt in ratios)
            res.criteria.append(Criterion("pointwise_zero_path_halving", worst, slack, worst <= slack,
                                          "max |ratio/2 - 1| over successive doublings"))
        else:
            dec = all(errs[i + 1] < errs[i] for i in range(len(errs) - 1))
            res.criteria.append(Criterion(f"pointwise_{name}_strictly_decreasing", errs[-1], "strict",
                                          dec))
        max_c = [r.max_abs_c for r in rows]
        sum_gap = [abs(r.sum_c - r.sum_c_limit) for r in rows]
        durrett = (all(max_c[i + 1] < max_c[i] for i in range(len(max_c) - 1))
                   and all(sum_gap[i + 1] < sum_gap[i] for i in range(len(sum_gap) - 1))
                   and all(math.isfinite(r.sum_abs_c) for r in rows))
        res.criteria.append(Criterion(f"durrett_conditions_{name}", max(r.sum_abs_c for r in rows),
                                      "finite", durrett,
                                      "max|c| and |sum c - limit| decrease; sup sum|c| finite"))
        tail = max(r.taylor_remainder for r in rows)
        res.criteria.append(Criterion(f"taylor_remainder_nonpositive_{name}", tail, 0.0, tail <= 0.0))
    return res


# zn-convergence ------------------------------------------------------------

def _zn_task(arg):
    n, u, v, length, method, n_samples, seed = arg
    spec = ScalingSpec(n, u, v, length)
    exact = zn_exact(spec)
    if method == "exact-dp":
        return {"n": n, "method": method, "value": exact.value, "stderr": 0.0, "ess": "",
                "exact_value": exact.value, "window_rel_change": exact.window_rel_change,
                "seed": ""}
    s = qn_sampler(spec, n_samples, seed)
    return {"n": n, "method": method, "value": s.z_value, "stderr": s.z_stderr, "ess": s.ess,
            "exact_value": exact.value, "window_rel_change": exact.window_rel_change, "seed": seed}


def run_zn_convergence(cfg: ExperimentConfig) -> ExperimentResult:
    p = cfg.params
    ladder = [int(n) for n in p["n_ladder"]]
    seeds = derive_seeds(cfg.seed, len(ladder) + 1)
    tasks = [(n, p["u"], p["v"], p["L"], "exact-dp" if n <= p["exact_max_n"] else "importance-sampling",
              int(p["n_samples"]), seeds[i]) for i, n in enumerate(ladder)]
    rows = _pmap(_zn_task, tasks, cfg.workers)
    zc = z_continuum(p["u"], p["v"], p["L"], n_samples=int(p["continuum_samples"]), seed=seeds[-1],
                     n_grid=int(p["n_grid"]))
    res = ExperimentResult(cfg, list(rows), seeds={"ladder": seeds[:-1], "continuum": seeds[-1]})
    for r in rows:
        r["gap"] = abs(r["value"] - zc.value) / zc.value
    res.rows.append({"n": "continuum", "method": "monte-carlo", "value": zc.value, "stderr": zc.stderr,
                     "ess": "", "exact_value": "", "window_rel_change": zc.window_rel_change,
                     "seed": seeds[-1], "gap": 0.0})
    gaps = [r["gap"] for r in rows]
    trend = trend_report(gaps, slack=cfg.tol("trend_slack"))
    bound = cfg.tol("bound_factor") * zc.value
    zmax = max(r["value"] for r in rows)
    is_rows = [r for r in rows if r["method"] != "exact-dp"]
    min_ess = min((r["ess"] for r in is_rows), default=float("inf"))
    worst_dev = max((abs(r["value"] - r["exact_value"]) / r["stderr"] for r in is_rows), default=0.0)
    res.criteria = [
        Criterion("zn_bounded", zmax, bound, bool(np.isfinite(zmax) and zmax <= bound),
                  "max Z^(N) over the ladder against bound_factor * Z_continuum"),
        Criterion("zn_gap_decreasing", gaps[-1], cfg.tol("trend_slack"), trend.decreasing, trend.summary()),
        Criterion("zn_final_gap", gaps[-1], cfg.tol("final_gap"), gaps[-1] < cfg.tol("final_gap"),
                  f"N={ladder[-1]}, Z_continuum={zc.value:.6f} +- {zc.stderr:.6f}"),
        Criterion("zn_is_ess", min_ess, cfg.tol("min_ess"), min_ess > cfg.tol("min_ess")),
        Criterion("zn_is_vs_exact", worst_dev, cfg.tol("is_vs_exact_se"),
                  worst_dev <= cfg.tol("is_vs_exact_se"), "in standard errors"),
    ]
    return res


# weak-convergence ----------------------------------------------------------

def _weak_task(arg):
    n, u, v, length, exact_max, n_samples, seed, ref_values, ref_weights = arg
    spec = ScalingSpec(n, u, v, length)
    ref = EmpiricalSample(ref_values, ref_weights)
    if n <= exact_max:
        law = qn_exact_marginals(spec)["s"]
        return {"n": n, "method": "exact-dp", "ks": ks_distance(law, ref), "ess": "", "seed": "",
                "mean": law.mean(), "variance": law.variance()}
    s = qn_sampler(spec, n_samples, seed)
    samp = EmpiricalSample(s.s_end, s.weights)
    mean = float(np.sum(s.weights * s.s_end))
    var = float(np.sum(s.weights * s.s_end ** 2) - mean ** 2)
    return {"n": n, "method": "importance-sampling", "ks": ks_distance(samp, ref), "ess": s.ess,
            "seed": seed, "mean": mean, "variance": var}


def run_weak_convergence(cfg: ExperimentConfig) -> ExperimentResult:
    p = cfg.params
    ladder = [int(n) for n in p["n_ladder"]]
    seeds = derive_seeds(cfg.seed, len(ladder) + 1)
    cont = q_sampler(p["u"], p["v"], p["L"], n_samples=int(p["continuum_samples"]), seed=seeds[-1],
                     n_grid=int(p["n_grid"]))
    tasks = [(n, p["u"], p["v"], p["L"], int(p["exact_max_n"]), int(p["n_samples"]), seeds[i],
              cont.s_end, cont.weights) for i, n in enumerate(ladder)]
    rows = _pmap(_weak_task, tasks, cfg.workers)
    res = ExperimentResult(cfg, list(rows), seeds={"ladder": seeds[:-1], "continuum": seeds[-1]})
    mean = float(np.sum(cont.weights * cont.s_end))
    res.rows.append({"n": "continuum", "method": "monte-carlo", "ks": 0.0, "ess": cont.ess,
                     "seed": seeds[-1], "mean": mean, "ks_mc_scale": "",
                     "variance": float(np.sum(cont.weights * cont.s_end ** 2) - mean ** 2)})
    for r in rows:
        # sampling scale of the KS statistic from both weighted samples
        inv = 1.0 / cont.ess + (1.0 / r["ess"] if r["ess"] != "" else 0.0)
        r["ks_mc_scale"] = math.sqrt(inv)
    ks = [r["ks"] for r in rows]
    trend = trend_report(ks, slack=cfg.tol("trend_slack"))
    ess_vals = [r["ess"] for r in rows if r["ess"] != ""] + [cont.ess]
    res.criteria = [
        Criterion("ks_trend_decreasing", ks[-1], cfg.tol("trend_slack"), trend.decreasing, trend.summary()),
        Criterion("ks_final", ks[-1], cfg.tol("final_ks"), ks[-1] < cfg.tol("final_ks"),
                  f"N={ladder[-1]} against {len(cont)} continuum samples"),
        Criterion("weak_ess", min(ess_vals), cfg.tol("min_ess"), min(ess_vals) > cfg.tol("min_ess")),
    ]
    return res


# bounds --------------------------------------------------------------------

def run_bounds(cfg: ExperimentConfig) -> ExperimentResult:
    p = cfg.params
    res = ExperimentResult(cfg)
    seeds = derive_seeds(cfg.seed, 1)
    res.seeds = {"envelope": seeds[0]}
    # Z^(N) bounded along a long exact ladder
    zs = []
    for n in p["n_ladder"]:
        z = zn_exact(ScalingSpec(int(n), p["u"], p["v"], p["L"]))
        zs.append(z.value)
        res.rows.append({"check": "zn_exact", "param": "", "n": int(n), "value": z.value,
                         "aux": z.window_rel_change, "exact": True})
    z_bound = cfg.tol("bound_factor") * partition_bound_integral(p["u"], p["v"]) if p["v"] >= 0 else math.inf
    # Lemma 3.2 envelope (v >= 0)
    if p["v"] >= 0:
        xs = np.linspace(-3.0, 6.0, 19)
        ratios = envelope_ratio(p["u"], p["v"], xs, p["L"], int(p["continuum_samples"]), seeds[0],
                                int(p["n_grid"]))
        for x, r in zip(xs, ratios):
            res.rows.append({"check": "envelope_ratio", "param": "", "n": "", "value": float(r),
                             "aux": float(x), "exact": False})
        env_ok = bool(np.all(np.isfinite(ratios)) and np.all(ratios > 0))
        res.criteria.append(Criterion("envelope_ratio_bounded", float(np.max(ratios)), "finite", env_ok,
                                      "E[H(x)] e^{2(u+v)x} / K0(sqrt2 e^-x) on x in [-3, 6]"))
    zmax = max(zs)
    res.criteria.append(Criterion("zn_bounded_exact_ladder", zmax, z_bound,
                                  bool(np.all(np.isfinite(zs)) and zmax <= z_bound),
                                  "max exact Z^(N) against bound_factor * 2^(s-2) Gamma(s)^2"))
    # binomial ratio
    factor = cfg.tol("combapprox_factor")
    for a in p["a_values"]:
        rows = combapprox_check(float(a), [int(n) for n in p["combapprox_n"]])
        limit = math.exp(a * a + 2.0 * abs(a) / 3.0)
        for r in rows:
            res.rows.append({"check": "combapprox_sup", "param": a, "n": r.n, "value": r.sup_ratio,
                             "aux": r.argsup_k, "exact": True})
        sups = [r.sup_ratio for r in rows]
        ok = all(math.isfinite(s) for s in sups) and max(sups) <= factor * limit
        res.criteria.append(Criterion(f"combapprox_bounded_a{a:g}", max(sups), factor * limit, ok,
                                      "sup over admissible k against factor * exp(a^2 + 2|a|/3)"))
        ks = admissible_k(float(a), 100)
        approx = combapprox_log_ratio(float(a), ks, 100)
        exact = np.array([combapprox_log_ratio_exact(float(a), int(k), 100) for k in ks])
        dev = float(np.max(np.abs(approx - exact)))
        res.criteria.append(Criterion(f"combapprox_exact_check_a{a:g}", dev, cfg.tol("combapprox_exact"),
                                      dev <= cfg.tol("combapprox_exact"), "max |log ratio error| at N=100"))
    return res


# bessel --------------------------------------------------------------------

def run_bessel(cfg: ExperimentConfig) -> ExperimentResult:
    p = cfg.params
    res = ExperimentResult(cfg)
    tol = cfg.tol("bessel_residual")
    worst = 0.0
    for mu, nu, a in p["bessel_grid"]:
        chk = bessel_mellin_check(float(mu), float(nu), float(a))
        worst = max(worst, chk.residual)
        res.rows.append({"check": "mellin_k", "mu": mu, "nu": nu, "a": a, "value": chk.quadrature,
                         "reference": chk.closed_form, "residual": chk.residual, "stderr": "", "seed": ""})
    res.criteria.append(Criterion("bessel_mellin_residual", worst, tol, worst <= tol,
                                  f"{len(p['bessel_grid'])}-point grid"))
    worst_part = 0.0
    for u, v in p["uv_pairs"]:
        s = u + v
        chk = bessel_mellin_check(2 * s - 1, 0.0, math.sqrt(2.0))
        ref = partition_bound_integral(u, v)
        r = abs(chk.quadrature - ref) / ref
        worst_part = max(worst_part, r)
        res.rows.append({"check": "partition_bound", "mu": 2 * s - 1, "nu": 0.0, "a": math.sqrt(2.0),
                         "value": chk.quadrature, "reference": ref, "residual": r, "stderr": "", "seed": ""})
    res.criteria.append(Criterion("partition_bound_integral", worst_part, tol, worst_part <= tol))
    seeds = derive_seeds(cfg.seed, len(p["uv_pairs"]))
    res.seeds = {"z_continuum": seeds}
    all_ok, worst_rel = True, 0.0
    for (u, v), seed in zip(p["uv_pairs"], seeds):
        try:
            z = z_continuum(u, v, 1.0, n_samples=int(p["continuum_samples"]), seed=seed,
                            n_grid=int(p["n_grid"]), window_rtol=cfg.tol("window_rtol"))
            ok, val, se, rel = z.finite, z.value, z.stderr, z.window_rel_change
        except DomainError:
            ok, val, se, rel = False, float("nan"), float("nan"), float("inf")
        all_ok &= ok
        worst_rel = max(worst_rel, rel)
        res.rows.append({"check": "z_continuum", "mu": u, "nu": v, "a": "", "value": val,
                         "reference": "", "residual": rel, "stderr": se, "seed": seed})
    res.criteria.append(Criterion("z_continuum_finite_window_stable", worst_rel, cfg.tol("window_rtol"),
                                  all_ok and worst_rel <= cfg.tol("window_rtol")))
    return res


RUNNERS = {
    "triple-check": run_triple_check,
    "pointwise": run_pointwise,
    "zn-convergence": run_zn_convergence,
    "weak-convergence": run_weak_convergence,
    "bounds": run_bounds,
    "bessel": run_bessel,
}


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    return RUNNERS[cfg.experiment](cfg)


# output --------------------------------------------------------------------

def rows_to_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    header = list(rows[0].keys())
    for r in rows[1:]:
        header += [k for k in r if k not in header]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for r in rows:
        writer.writerow([_fmt(r.get(k, "")) for k in header])
    return buf.getvalue()


def provenance(cfg: ExperimentConfig, seeds: dict) -> dict:
    return {
        "config_sha256": cfg.config_hash(),
        "base_seed": cfg.seed,
        "derived_seeds": seeds,
        "versions": {"okl": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "kernel_backend": kernels.BACKEND,
    }


def write_result(result: ExperimentResult, out_dir: str | Path) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    name = result.config.experiment
    csv_path = out / f"{name}.csv"
    csv_path.write_text(rows_to_csv(result.rows))
    summary = {
        "experiment": name,
        "pass": result.passed,
        "criteria": [c.as_json() for c in result.criteria],
        "config": result.config.canonical(),
        "provenance": provenance(result.config, result.seeds),
    }
    json_path = out / f"{name}.summary.json"
    json_path.write_text(json.dumps(summary, indent=2, sort_keys=True, default=_json_num) + "\n")
    return csv_path, json_path


def report_lines(result: ExperimentResult) -> list[str]:
    lines = []
    for c in result.criteria:
        tag = "PASS" if c.passed else "FAIL"
        lines.append(f"[{tag}] {c.criterion}: value={_fmt(c.value)} tolerance={_fmt(c.tolerance)}"
                     + (f" ({c.detail})" if c.detail else ""))
    return lines


def dump_config(cfg: ExperimentConfig, stream=sys.stdout) -> None:
    json.dump(asdict(cfg), stream, indent=2, sort_keys=True)
