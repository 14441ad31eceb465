"""Experiment runner: seeded, replicated, deterministic.

Given a normalized config, runs the experiment and writes ``results.json``
plus one CSV per time-series observable into the output directory.  Floats
serialize at 12 significant digits, so identical (config, seed) pairs emit
byte-identical results.  Replicas execute on a small thread pool and merge in
replica order, which keeps aggregates independent of scheduling.

Exit codes: 0 all configured thresholds pass, 1 validation failure,
2 runtime alarm (overflow, non-recurrence cap).
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import expansion as expn
from . import fractal as frac
from . import lattice as lat
from . import markov as mk
from .config import ExperimentConfig
from .rng import Stream

EXIT_PASS = 0
EXIT_VALIDATION = 1
EXIT_ALARM = 2


def _round_floats(obj):
    if isinstance(obj, dict):
        return {str(k): _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isfinite(v):
            return float(f"{v:.12g}")
        return None
    if isinstance(obj, np.ndarray):
        return _round_floats(obj.tolist())
    return obj


def write_results(out_dir: str, results: dict) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "results.json")
    payload = json.dumps(_round_floats(results), indent=2, sort_keys=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(payload + "\n")
    return path


def write_series_csv(out_dir: str, name: str, values, stride: int = 1) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{name}.csv")
    with open(path, "w", newline="\n") as fh:
        fh.write("step,value\n")
        for k in range(0, len(values), stride):
            fh.write(f"{k},{float(values[k]):.12g}\n")
    return path


def _pool_map(fn, args_list, max_workers=None):
    if len(args_list) == 1:
        return [fn(*args_list[0])]
    workers = max_workers or min(len(args_list), os.cpu_count() or 1)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, *a) for a in args_list]
        return [f.result() for f in futures]


def _run_lyapunov(cfg: ExperimentConfig, out_dir: str):
    rep = cfg.options["representation"]
    if isinstance(rep, list):
        rep = tuple(rep)
    rng = Stream(cfg.seed, 0)
    report = expn.lyapunov_spectrum(cfg.chain, rep, cfg.steps, cfg.replicas, rng)
    results = {
        "exponents": report.exponent_estimates,
        "std_errors": report.std_errors,
        "partial_sums": report.partial_sums,
        "steps": cfg.steps,
        "replicas": cfg.replicas,
    }
    growth = {}
    for spec in cfg.options.get("growth_vectors", []):
        v = np.asarray(spec["vector"], dtype=float)
        rate, se = expn.vector_growth_rate(
            cfg.chain, rep, v, cfg.steps, cfg.replicas, Stream(cfg.seed, 1)
        )
        growth[spec.get("name", "v")] = {"rate": rate, "se": se}
    if growth:
        results["growth_rates"] = growth
    sig = cfg.thresholds.get("sum_rule_sigma", 3.0)
    total = float(report.exponent_estimates.sum())
    tol = sig * float(np.sqrt(np.nansum(report.std_errors ** 2))) + 1e-12
    results["sum_rule"] = {"total": total, "tolerance": tol, "pass": abs(total) <= tol}
    ok = results["sum_rule"]["pass"]
    # running estimate of the top exponent along replica 0
    mats = expn.representation_matrices(cfg.chain, rep)
    path = mk.sample_path(cfg.chain, cfg.steps, Stream(cfg.seed, 0).spawn(0))
    from . import kernels

    logs = kernels.qr_lyapunov(mats, path, mats.shape[1])
    running = np.cumsum(logs[:, 0]) / np.arange(1, cfg.steps + 1)
    write_series_csv(out_dir, "top_exponent_running", running,
                     stride=max(1, cfg.steps // 10_000))
    return results, ok


def _run_expansion(cfg: ExperimentConfig, out_dir: str):
    rep = cfg.options["representation"]
    results = {"grades": {}}
    ok = True
    for k in cfg.options["grades"]:
        verdict = expn.grassmannian_expansion_check(
            cfg.chain,
            int(k),
            cfg.steps,
            cfg.options["n_samples"],
            cfg.options["mc_block"],
            Stream(cfg.seed, int(k)),
            rep=rep,
            n_replicas=cfg.replicas,
            mc_samples=cfg.options["mc_samples"],
        )
        results["grades"][str(k)] = {
            "verdict": verdict.verdict,
            "min_sampled_rate": verdict.min_sampled_rate,
            "min_rate_se": verdict.min_rate_se,
            "mc_criterion_value": verdict.mc_criterion_value,
            "mc_criterion_se": verdict.mc_criterion_se,
            "witness": verdict.witness,
        }
        expect = cfg.thresholds.get("expect_verdict")
        if expect is not None and verdict.verdict != expect:
            ok = False
        min_rate = cfg.thresholds.get("min_rate")
        if min_rate is not None and verdict.min_sampled_rate < min_rate:
            ok = False
    return results, ok


def _run_walk(cfg: ExperimentConfig, out_dir: str):
    obs = lat.WalkObservables(
        eps=tuple(cfg.options["eps"]),
        radii=tuple(cfg.options["radii"]),
        joint=bool(cfg.options["joint"]),
        joint_stride=int(cfg.options["joint_stride"]),
    )
    x0 = lat.LatticePoint.standard(cfg.chain.dim)

    def one(replica_id):
        return lat.walk_with_series(
            cfg.chain, x0, cfg.steps, obs, Stream(cfg.seed, replica_id)
        )

    outs = _pool_map(one, [(r,) for r in range(cfg.replicas)])
    acc = lat.EmpiricalAccumulator.empty()
    for a, _ in outs:
        acc = acc.merge(a)
    report = lat.equidistribution_report(acc, cfg.chain)
    results = {
        "steps_total": acc.step_count,
        "escape_fractions": {f"{k:g}": v for k, v in report.escape_fractions.items()},
        "siegel_averages": report.siegel_averages,
        "siegel_targets": report.siegel_targets,
        "siegel_rel_errors": report.siegel_rel_errors,
        "independence": {
            "chi2": report.independence_chi2,
            "dof": report.independence_dof,
            "pvalue": report.independence_pvalue,
        },
        "accumulator": acc.to_json(),
    }
    stride = max(1, int(cfg.options.get("series_stride", 100)))
    write_series_csv(out_dir, "shortest_sup_replica0", outs[0][1]["shortest_sup"],
                     stride=stride)
    write_series_csv(
        out_dir, "shortest_euclidean_replica0",
        outs[0][1]["shortest_euclidean"], stride=stride,
    )
    th = cfg.thresholds
    ok = True
    if "max_escape" in th:
        ok &= all(v <= th["max_escape"] for v in report.escape_fractions.values())
    if "siegel_rtol" in th:
        ok &= all(v <= th["siegel_rtol"] for v in report.siegel_rel_errors.values())
    if "independence_alpha" in th and report.independence_dof > 0:
        ok &= report.independence_pvalue > th["independence_alpha"]
    return results, bool(ok)


def _run_renewal(cfg: ExperimentConfig, out_dir: str):
    anchor = cfg.options["anchor"]
    lhs, rhs, z, se = mk.renewal_t_identity(
        cfg.chain, anchor, cfg.steps, Stream(cfg.seed, 0)
    )
    stat, dof, pval = mk.excursion_word_chisquare(
        cfg.chain, anchor, cfg.steps, Stream(cfg.seed, 1),
        mass=cfg.options["chisq_mass"],
    )
    results = {
        "anchor": str(anchor),
        "samples": cfg.steps,
        "lhs": lhs,
        "rhs": rhs,
        "z_score": z,
        "se": se,
        "word_chisq": {"stat": stat, "dof": dof, "pvalue": pval},
    }
    ok = abs(z) <= cfg.thresholds["max_abs_z"] and pval > cfg.thresholds["chisq_alpha"]
    return results, ok


def _run_fractal(cfg: ExperimentConfig, out_dir: str):
    g = cfg.gdifs
    s = frac.hausdorff_dimension(g)
    n_points = int(cfg.options["points"])
    digits = int(cfg.options["digits"])
    points = frac.wang_point_sample(g, n_points, digits, Stream(cfg.seed, 0))
    gauss = frac.gauss_statistics(points, digits)
    results = {
        "hausdorff_dimension": s,
        "n_points": n_points,
        "digits_per_point": digits,
        "digit1_frequency": gauss.digit1_frequency,
        "digit1_predicted": frac.gauss_digit_probability(1),
        "gauss_chisq": {"stat": gauss.chi2, "dof": gauss.dof, "pvalue": gauss.pvalue},
        "degenerate": gauss.degenerate,
    }
    traj = cfg.options.get("trajectory")
    if traj:
        alpha = float(points[0]) if traj.get("alpha_from") == "wang" else traj["alpha"]
        rep = frac.dioph_report(
            alpha,
            float(traj.get("T", 30.0)),
            float(traj.get("dt", 0.05)),
            int(traj.get("q_max", 1000)),
        )
        results["trajectory"] = {
            "alpha": float(np.asarray(alpha).ravel()[0]),
            "min_shortest": rep.trajectory_min_shortest,
            "badly_approx_evidence": rep.badly_approx_evidence,
            "dirichlet_improvable_evidence": rep.dirichlet_improvable_evidence,
            "generic_type_evidence": rep.generic_type_evidence,
            "siegel_time_average": rep.siegel_time_average,
            "direct_search_liminf": rep.direct_search_curve.liminf_estimate,
        }
    th = cfg.thresholds
    ok = abs(gauss.digit1_frequency - frac.gauss_digit_probability(1)) <= th["digit1_tol"]
    ok = ok and gauss.pvalue > th["chisq_alpha"]
    if "dimension_expect" in th:
        ok = ok and abs(s - th["dimension_expect"]) <= th.get("dimension_tol", 1e-9)
    return results, bool(ok)


def _run_magic(cfg: ExperimentConfig, out_dir: str):
    g = cfg.gdifs
    chain = frac.wang_measure(g)
    pairs = int(cfg.options["pairs"])
    max_prefix = int(cfg.options["max_prefix"])
    worst = -math.log(max(e.sim.ratio for e in g.edges))
    tail = int(math.ceil((math.log(1e10) + math.log(g.diameter_bound() + 1.0))
                         / worst)) + 4
    rng = Stream(cfg.seed, 0)
    residuals = []
    for j in range(pairs):
        sub = rng.spawn(j)
        n = 1 + int(sub.uniforms(1)[0] * max_prefix)
        omega = mk.sample_path(chain, n + tail, sub)
        residuals.append(frac.magic_formula_check(g, omega, n))
    worst_res = max(residuals)
    results = {
        "pairs": pairs,
        "max_prefix": max_prefix,
        "max_residual": worst_res,
        "mean_residual": float(np.mean(residuals)),
    }
    ok = worst_res <= cfg.thresholds["max_residual"]
    return results, ok


_RUNNERS = {
    "lyapunov": _run_lyapunov,
    "expansion_check": _run_expansion,
    "walk_equidistribution": _run_walk,
    "renewal_identity": _run_renewal,
    "fractal_dioph": _run_fractal,
    "magic_formula": _run_magic,
}


def run_experiment(cfg: ExperimentConfig, out_dir: str):
    """Execute a normalized config; returns (results dict, exit code)."""
    header = {
        "schema": "latwalk-results/1",
        "kind": cfg.kind,
        "seed": cfg.seed,
        "replicas": cfg.replicas,
        "steps": cfg.steps,
    }
    try:
        body, ok = _RUNNERS[cfg.kind](cfg, out_dir)
    except (lat.WalkAlarm, mk.NonRecurrenceAlarm, frac.DivergenceAlarm) as exc:
        results = dict(header)
        results["alarm"] = {"type": type(exc).__name__, "message": str(exc)}
        results["pass"] = False
        write_results(out_dir, results)
        return results, EXIT_ALARM
    results = dict(header)
    results.update(body)
    results["pass"] = bool(ok)
    write_results(out_dir, results)
    return results, EXIT_PASS if ok else EXIT_VALIDATION
