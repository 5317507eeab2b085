"""Configuration-driven experiment runner.

Usage:
    massmin --config experiment.toml [--out DIR] [--set task.c=2.0 ...]
            [--threads N] [--seed S]
    massmin --list

Each run executes exactly one task from the config and writes CSV/text
artifacts under the output directory (mass curves, field dumps, certificate
scans, solver traces, reports), printing a one-line summary.  Numeric output
uses 17 significant digits so reruns diff cleanly; with a fixed seed the
outputs are byte-identical.  ``--threads`` parallelizes the independent
multistart solves inside each sweep point (the warm-start chain across points
stays sequential), so results do not depend on the worker count.

Exit codes: 0 success, 2 invalid configuration, 3 a required solve failed to
converge (or a bisection found no sign change).
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from .catalog import catalog_text
from .ccdiag import (
    MCCurve,
    certificate_choquard,
    certificate_quasilinear,
    check_subadditivity,
    decay_check,
    default_curve_tol,
    estimate_rho0,
    inequality_audit,
)
from .config import ConfigError, ExperimentConfig, apply_overrides, load_config
from .energy import constraint_value, total_energy
from .grid import Field, dump_field_csv, lp_norm
from .rearrange import (
    add_disjoint_mass,
    fill_dip,
    plateau_insert,
    schwarz_rearrange,
    surgery_csv_row,
    truncate_renormalize,
)
from .solve import minimize_constrained, project_to_constraint

__all__ = ["main"]


def _fmt(x: float) -> str:
    return f"{x:.16e}"


def _write_report(path, rows: dict) -> None:
    with open(path, "w") as fh:
        for k, v in rows.items():
            if isinstance(v, float):
                fh.write(f"{k} = {_fmt(v)}\n")
            else:
                fh.write(f"{k} = {v}\n")


def _solve_one(args):
    """Worker for one start of one sweep point (config-serializable)."""
    raw, c, seed, init_vals = args
    cfg = ExperimentConfig(raw=raw)
    p = cfg.problem()
    scfg = replace(cfg.solve_config(), seed=seed)
    init = Field(p.grid, init_vals) if init_vals is not None else None
    res = minimize_constrained(p, c, scfg, init=init)
    return {
        "m": res.m_value,
        "beta": res.beta,
        "iters": res.iterations,
        "converged": res.converged,
        "values": np.asarray(res.minimizer.values),
        "el_residual": res.el_residual,
    }


def _map_starts(raw, c, start_seeds, warm_vals, threads):
    jobs = []
    if warm_vals is not None:
        jobs.append((raw, c, start_seeds[0], warm_vals))
        tail = start_seeds[1:]
    else:
        tail = start_seeds
    jobs.extend((raw, c, s, None) for s in tail)
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_solve_one, jobs))
    return [_solve_one(j) for j in jobs]


def _run_solve(cfg: ExperimentConfig, out: str, threads: int) -> int:
    p = cfg.problem()
    scfg = cfg.solve_config()
    c = float(cfg.task["c"])
    res = minimize_constrained(p, c, scfg, trace_path=os.path.join(out, "solver_trace.csv"))
    dump_field_csv(res.minimizer, os.path.join(out, "minimizer.csv"))
    with open(os.path.join(out, "mass_curve.csv"), "w") as fh:
        fh.write("c,m,beta,iters,converged\n")
        beta = _fmt(res.beta) if res.beta is not None else "nan"
        fh.write(f"{_fmt(c)},{_fmt(res.m_value)},{beta},{res.iterations},{int(res.converged)}\n")
    _write_report(
        os.path.join(out, "report.txt"),
        {
            "task": "solve",
            "c": c,
            "m": res.m_value,
            "beta": res.beta if res.beta is not None else float("nan"),
            "el_residual": res.el_residual if res.el_residual is not None else float("nan"),
            "iterations": res.iterations,
            "converged": res.converged,
            "constraint_error": res.constraint_error,
        },
    )
    print(
        f"[massmin] solve: c={c:g} m={res.m_value:.6g} beta="
        f"{res.beta if res.beta is not None else float('nan'):.6g} "
        f"converged={res.converged} iters={res.iterations}"
    )
    return 0 if res.converged else 3


def _run_sweep(cfg: ExperimentConfig, out: str, threads: int) -> int:
    p = cfg.problem()
    scfg = cfg.solve_config()
    c_list = [float(c) for c in cfg.task["c_list"]]
    n_starts = int(cfg.task.get("seeds", 3))
    warm = None
    rows = []
    for c in c_list:
        seeds = [scfg.seed + i for i in range(max(1, n_starts))]
        outs = _map_starts(cfg.raw, c, seeds, warm, threads)
        best = min(range(len(outs)), key=lambda i: outs[i]["m"])
        rows.append(outs[best])
        warm_field = Field(p.grid, outs[best]["values"])
        warm = project_to_constraint(p, warm_field, c).values  # rescaled next level
    curve = MCCurve(
        c_values=tuple(c_list),
        m_values=tuple(r["m"] for r in rows),
        betas=tuple(r["beta"] for r in rows),
        iterations=tuple(r["iters"] for r in rows),
        converged=tuple(bool(r["converged"]) for r in rows),
    )
    curve.to_csv(os.path.join(out, "mass_curve.csv"))
    m_inf_mode = cfg.task.get("m_inf", "zero")
    tol = default_curve_tol(curve.m_values)
    if len(c_list) >= 2:
        m_inf = curve if m_inf_mode == "self" else None
        rep = check_subadditivity(curve, m_inf, tol)
        rep.notes += f"; m_inf mode = {m_inf_mode}"
        rep.to_text(os.path.join(out, "cc_report.txt"))
    all_ok = all(curve.converged)
    print(
        f"[massmin] sweep: {len(c_list)} levels, m in "
        f"[{min(curve.m_values):.6g}, {max(curve.m_values):.6g}], all_converged={all_ok}"
    )
    return 0 if all_ok else 3


def _run_certify_choquard(cfg: ExperimentConfig, out: str) -> int:
    p = cfg.problem()
    c = float(cfg.task.get("c", 1.0))
    width = float(cfg.task.get("seed_width", 1.0))
    r = p.grid.axis(0)
    seed = Field(p.grid, np.exp(-((r / width) ** 2)))
    seed = Field(p.grid, seed.values * np.sqrt(c) / lp_norm(seed, 2.0))
    scan = certificate_choquard(p, c, seed, cfg.param_grid("t_grid"))
    scan.to_csv(os.path.join(out, "certificate.csv"))
    _write_report(
        os.path.join(out, "report.txt"),
        {
            "task": "certify_choquard",
            "c": c,
            "best_param": scan.best_param,
            "best_value": scan.best_value,
            "succeeded": scan.succeeded,
        },
    )
    print(
        f"[massmin] certify_choquard: best J(w_t)={scan.best_value:.6g} at "
        f"t={scan.best_param:.6g}, negative={scan.succeeded}"
    )
    return 0


def _run_certify_quasilinear(cfg: ExperimentConfig, out: str) -> int:
    p = cfg.problem()
    scan = certificate_quasilinear(p, cfg.param_grid("theta_grid"))
    scan.to_csv(os.path.join(out, "certificate.csv"))
    _write_report(
        os.path.join(out, "report.txt"),
        {
            "task": "certify_quasilinear",
            "best_param": scan.best_param,
            "best_value": scan.best_value,
            "succeeded": scan.succeeded,
            "constraint_dev": scan.constraint_dev,
        },
    )
    print(
        f"[massmin] certify_quasilinear: best value={scan.best_value:.6g} at "
        f"theta={scan.best_param:.6g}, constraint_dev={scan.constraint_dev:.3g}"
    )
    return 0


def _run_rho0(cfg: ExperimentConfig, out: str) -> int:
    p = cfg.problem()
    scfg = cfg.solve_config()
    lo, hi = cfg.task["rho_bracket"]
    try:
        est = estimate_rho0(p, (float(lo), float(hi)), scfg)
    except ValueError as exc:
        print(f"[massmin] rho0: failed: {exc}")
        return 3
    with open(os.path.join(out, "rho0_evaluations.csv"), "w") as fh:
        fh.write("rho,m\n")
        for rho, m in est.evaluations:
            fh.write(f"{_fmt(rho)},{_fmt(m)}\n")
    _write_report(
        os.path.join(out, "report.txt"),
        {
            "task": "rho0",
            "rho0": est.rho0,
            "bracket_lo": est.bracket[0],
            "bracket_hi": est.bracket[1],
            "m_lo": est.m_at_bracket[0],
            "m_hi": est.m_at_bracket[1],
            "tol": est.tol,
        },
    )
    print(f"[massmin] rho0: {est.rho0:.6g} in [{est.bracket[0]:.6g}, {est.bracket[1]:.6g}]")
    return 0


def _random_smooth_field(grid, rng) -> Field:
    r = grid.axis(0)
    vals = np.zeros_like(r)
    for _ in range(4):
        vals += rng.uniform(-1, 1) * np.exp(-(((r - rng.uniform(0, 4)) / rng.uniform(1, 4)) ** 2))
    return Field(grid, vals)


def _run_audit(cfg: ExperimentConfig, out: str) -> int:
    p = cfg.problem()
    n_random = int(cfg.task.get("n_random", 100))
    rng = np.random.default_rng(cfg.solve_config().seed)
    rows = []
    r = p.grid.axis(0)
    fields = [("gaussian", Field(p.grid, np.exp(-(r**2))))]
    fields += [(f"random_{i}", _random_smooth_field(p.grid, rng)) for i in range(n_random)]
    worst_q1 = -np.inf
    hls = float("nan")
    for name, f in fields:
        if not np.any(f.values != 0.0):
            continue
        rep = inequality_audit(f)
        worst_q1 = max(worst_q1, rep.q1)
        hls = rep.hls_constant
        rows.append((name, rep.q1, rep.q2, rep.q3))
    with open(os.path.join(out, "audit.csv"), "w") as fh:
        fh.write("field,q1,q2,q3\n")
        for name, q1, q2, q3 in rows:
            fh.write(f"{name},{_fmt(q1)},{_fmt(q2)},{_fmt(q3)}\n")
    _write_report(
        os.path.join(out, "report.txt"),
        {"task": "audit", "fields": len(rows), "worst_q1": worst_q1, "hls_constant": hls},
    )
    print(f"[massmin] audit: {len(rows)} fields, worst q1={worst_q1:.6g} vs HLS={hls:.6g}")
    return 0


def _run_surgery_demo(cfg: ExperimentConfig, out: str) -> int:
    p = cfg.problem()
    if p.grid.kind != "line":
        raise ConfigError("task surgery_demo needs a line-grid problem")
    c = float(cfg.task.get("c", 4.0))
    x = p.grid.axis(0)
    base = Field(p.grid, 1.0 / np.cosh(x))
    base = project_to_constraint(p, base, c)
    rows = []
    plat, rep = plateau_insert(
        base, float(cfg.task.get("plateau_mass", 0.25)), p.constraint, rho=2.0, problem=p
    )
    rows.append(surgery_csv_row("plateau_insert", rep))
    double = Field(p.grid, np.exp(-((x - 3.0) ** 2)) + np.exp(-((x + 3.0) ** 2)))
    _, rep = fill_dip(double, -1.0, 1.0, problem=p)
    rows.append(surgery_csv_row("fill_dip", rep))
    trunc = truncate_renormalize(base, 0.5 * p.grid.extent[0])
    bd_t = total_energy(p, trunc)
    rows.append(
        f"truncate_renormalize,{_fmt(constraint_value(p, base))},{_fmt(bd_t.constraint_value)},"
        f"{_fmt(total_energy(p, base).total)},{_fmt(bd_t.total)}"
    )
    small = truncate_renormalize(base, 6.0)
    _, rep = add_disjoint_mass(p, small, c + 1.0, float(cfg.task.get("eps", 1e-3)))
    rows.append(surgery_csv_row("add_disjoint_mass", rep))
    sym = schwarz_rearrange(base)
    bd_s = total_energy(p, sym)
    rows.append(
        f"schwarz_rearrange,{_fmt(constraint_value(p, base))},{_fmt(bd_s.constraint_value)},"
        f"{_fmt(total_energy(p, base).total)},{_fmt(bd_s.total)}"
    )
    with open(os.path.join(out, "surgery.csv"), "w") as fh:
        fh.write("surgery,mass_before,mass_after,total_before,total_after\n")
        fh.write("\n".join(rows) + "\n")
    print(f"[massmin] surgery_demo: {len(rows)} surgeries recorded")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="massmin", description="norm-constrained minimization lab")
    parser.add_argument("--config", help="TOML or JSON experiment file")
    parser.add_argument("--out", help="output directory (default from config)")
    parser.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE", help="dotted-path override"
    )
    parser.add_argument("--threads", type=int, default=1, help="multistart worker pool size")
    parser.add_argument("--seed", type=int, help="override solver.seed")
    parser.add_argument("--list", action="store_true", help="print the built-in catalog and exit")
    args = parser.parse_args(argv)

    if args.list:
        sys.stdout.write(catalog_text())
        return 0
    if not args.config:
        parser.print_usage(sys.stderr)
        print("error: --config is required unless --list is given", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config)
        apply_overrides(cfg, args.set)
        if args.seed is not None:
            cfg.raw.setdefault("solver", {})["seed"] = args.seed
        if args.out is not None:
            cfg.raw.setdefault("output", {})["dir"] = args.out
        cfg.validate()
    except (ConfigError, FileNotFoundError) as exc:
        print(f"[massmin] invalid config: {exc}", file=sys.stderr)
        return 2

    out = cfg.out_dir
    os.makedirs(out, exist_ok=True)
    task = cfg.task_type
    try:
        if task == "solve":
            return _run_solve(cfg, out, args.threads)
        if task == "sweep":
            return _run_sweep(cfg, out, args.threads)
        if task == "certify_choquard":
            return _run_certify_choquard(cfg, out)
        if task == "certify_quasilinear":
            return _run_certify_quasilinear(cfg, out)
        if task == "rho0":
            return _run_rho0(cfg, out)
        if task == "audit":
            return _run_audit(cfg, out)
        if task == "surgery_demo":
            return _run_surgery_demo(cfg, out)
    except (ConfigError, ValueError) as exc:
        # task parameters incompatible with the configured problem
        print(f"[massmin] invalid config: {exc}", file=sys.stderr)
        return 2
    raise AssertionError(f"unhandled task {task}")


if __name__ == "__main__":
    sys.exit(main())
