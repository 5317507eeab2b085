"""Constrained minimization by normalized gradient flow with symmetrization.

The flow steps along the constraint-tangential part of the energy gradient and
rescales back onto the constraint set after every step (exactly, for
homogeneous constraint densities; by scalar bisection otherwise).  Armijo
backtracking guarantees that accepted energies never increase, and every
``symmetrize_every`` accepted steps the iterate is replaced by its
symmetric-decreasing rearrangement whenever that does not increase the
discrete energy.

Convergence means the weighted L^2 norm of the projected gradient fell below
``grad_tol * (1 + |energy|)`` with the constraint satisfied to 1e-8 relative.
The energy-stall tolerance is a secondary exit for flat landscapes; a stalled
run only counts as converged if the gradient criterion also holds at exit.

On a bounded grid the discrete infimum can exceed the whole-space value by a
domain-truncation error; mass-curve comparisons should therefore use one fixed
grid, which is what the sweep driver does.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .energy import (
    EnergyBreakdown,
    NonFiniteEnergyError,
    ProblemSpec,
    constraint_gradient,
    constraint_value,
    energy_gradient,
    total_energy,
)
from .grid import Field, GridSpec, cylindrical_grid, line_grid, radial_grid, resample
from .rearrange import schwarz_rearrange

__all__ = [
    "SolveConfig",
    "SolveResult",
    "minimize_constrained",
    "lagrange_multiplier",
    "el_residual",
    "project_to_constraint",
    "default_init",
]

CONSTRAINT_RTOL = 1e-8


@dataclass(frozen=True)
class SolveConfig:
    """Tuning knobs for the projected gradient flow."""

    max_iters: int = 50000
    tau0: float = 1e-2
    backtrack: float = 0.5
    stall_tol: float = 1e-10
    stall_window: int = 10
    grad_tol: float = 1e-6
    symmetrize_every: int = 100
    seed: int = 0
    tau_grow: float = 1.25
    tau_max: float = 10.0
    coarse_init: bool = True

    def __post_init__(self):
        if not (0.0 < self.backtrack < 1.0):
            raise ValueError("backtrack factor must lie in (0, 1)")
        for name in ("tau0", "stall_tol", "grad_tol", "tau_grow", "tau_max"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.symmetrize_every < 0:
            raise ValueError("symmetrize_every must be >= 0 (0 disables)")


@dataclass(frozen=True)
class SolveResult:
    minimizer: Field
    energy: EnergyBreakdown
    m_value: float
    beta: Optional[float]
    el_residual: Optional[float]
    iterations: int
    converged: bool
    constraint_error: float
    notes: str = ""


def _weighted_inner(grid: GridSpec, a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sum(grid.weights()[None, :] * a * b))


def project_to_constraint(p: ProblemSpec, u: Field, c: float) -> Field:
    """Scale u onto the constraint set {sum int G(u_k) = c}."""
    val = constraint_value(p, u)
    if val <= 0:
        raise ValueError("cannot project a field with zero constraint mass")
    q = p.constraint.homogeneity
    if q is not None:
        return Field(u.grid, (c / val) ** (1.0 / q) * u.values)
    lo, hi = 0.5, 2.0
    mass = lambda rho: constraint_value(p, Field(u.grid, rho * u.values))
    while mass(hi) < c:
        hi *= 2.0
        if hi > 1e12:
            raise ValueError("constraint projection bracket blew up")
    while mass(lo) > c:
        lo *= 0.5
        if lo < 1e-12:
            raise ValueError("constraint projection bracket collapsed")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mass(mid) < c:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    return Field(u.grid, 0.5 * (lo + hi) * u.values)


def _projected_gradient(p: ProblemSpec, u: Field, grad: Field) -> np.ndarray:
    """Component of the gradient tangential to the constraint set."""
    n = constraint_gradient(p, u).values
    gn = _weighted_inner(p.grid, grad.values, n)
    nn = _weighted_inner(p.grid, n, n)
    if nn == 0.0:
        return grad.values
    return grad.values - (gn / nn) * n


def _coarsen(grid: GridSpec) -> Optional[GridSpec]:
    floor_1d, floor_2d = 128, 32
    if grid.kind == "cylindrical":
        ns, nw = grid.counts
        if min(ns, nw) <= floor_2d * 2:
            return None
        return cylindrical_grid(
            grid.split, grid.dim, grid.extent[0], grid.extent[1], (ns // 2, nw // 2)
        )
    n = grid.counts[0]
    if n <= floor_1d * 2:
        return None
    if grid.kind == "radial":
        return radial_grid(grid.dim, grid.extent[0], n // 2)
    return line_grid(grid.extent[0], n // 2)


def _gaussian_init(p: ProblemSpec, c: float, seed: int) -> Field:
    """Seed-jittered Gaussian bump, scaled onto the constraint."""
    rng = np.random.default_rng(seed)
    g = p.grid
    width = 0.18 * min(g.extent) * (1.0 + 0.3 * rng.uniform(-1.0, 1.0))
    if g.kind == "cylindrical":
        s, w = g.coords()
        base = s * np.exp(-(s**2 + w**2) / width**2)  # vanishes at the axis
    else:
        r = g.radii()
        base = np.exp(-(r**2) / width**2)
    vals = np.vstack([base for _ in range(p.m)])
    if seed != 0:
        vals = vals * (1.0 + 0.05 * np.sin(rng.uniform(0.5, 3.0) * g.radii()))[None, :]
    return project_to_constraint(p, Field(g, vals), c)


def default_init(p: ProblemSpec, c: float, cfg: SolveConfig) -> Field:
    """Default start: recursive coarse-grid solve, interpolated up.

    The coarse pass runs the same flow on a half-resolution grid (where the
    explicit step-size limit is far larger), so the fine grid starts within
    discretization error of the minimizer.
    """
    coarse = _coarsen(p.grid) if cfg.coarse_init else None
    if coarse is None:
        return _gaussian_init(p, c, cfg.seed)
    p_c = replace(p, grid=coarse)
    cfg_c = replace(cfg, max_iters=min(cfg.max_iters, 20000))
    res = minimize_constrained(p_c, c, cfg_c)
    lifted = resample(res.minimizer, 1.0, "dilation", target=p.grid)
    if not np.any(lifted.values != 0.0):
        return _gaussian_init(p, c, cfg.seed)
    return project_to_constraint(p, lifted, c)


def minimize_constrained(
    p: ProblemSpec,
    c: float,
    cfg: SolveConfig = SolveConfig(),
    init: Optional[Field] = None,
    trace_path=None,
) -> SolveResult:
    """Minimize the family energy over the constraint set {G(u) = c}.

    Steps follow the projected gradient with Armijo backtracking (accepted
    energies are non-increasing by construction) and periodic symmetrization.
    Runs are deterministic given (problem, c, cfg, init).
    """
    if c <= 0:
        raise ValueError("constraint level c must be positive")
    if init is None:
        u = default_init(p, c, cfg)
    else:
        if init.grid != p.grid:
            raise ValueError("init lives on the wrong grid")
        u = project_to_constraint(p, init, c)

    W = p.grid.weights()
    can_symmetrize = p.grid.kind != "cylindrical" and cfg.symmetrize_every > 0
    bd = total_energy(p, u)
    tau = cfg.tau0
    energies = [bd.total]
    trace_rows = []
    converged = False
    iters_done = 0
    grad_norm = math.inf

    for it in range(1, cfg.max_iters + 1):
        grad = energy_gradient(p, u)
        pg = _projected_gradient(p, u, grad)
        grad_norm = math.sqrt(max(_weighted_inner(p.grid, pg, pg), 0.0))
        scale = 1.0 + abs(bd.total)
        if grad_norm <= cfg.grad_tol * scale:
            converged = True
            iters_done = it - 1
            break

        accepted = False
        while tau >= 1e-17:
            try:
                trial = project_to_constraint(p, Field(p.grid, u.values - tau * pg), c)
                bd_trial = total_energy(p, trial)
            except (NonFiniteEnergyError, ValueError):
                tau *= cfg.backtrack
                continue
            if bd_trial.total <= bd.total - 1e-4 * tau * grad_norm**2:
                accepted = True
                break
            tau *= cfg.backtrack
        if not accepted:
            iters_done = it
            break
        u, bd = trial, bd_trial
        tau = min(tau * cfg.tau_grow, cfg.tau_max)
        iters_done = it

        if can_symmetrize and it % cfg.symmetrize_every == 0:
            try:
                cand = project_to_constraint(p, schwarz_rearrange(u), c)
                bd_cand = total_energy(p, cand)
                if bd_cand.total <= bd.total:
                    u, bd = cand, bd_cand
            except (NonFiniteEnergyError, ValueError):
                pass

        energies.append(bd.total)
        if trace_path is not None:
            err = abs(bd.constraint_value - c) / c
            trace_rows.append(f"{it},{bd.total:.16e},{err:.16e},{tau:.16e}")
        if len(energies) > cfg.stall_window:
            window = energies[-(cfg.stall_window + 1) :]
            drop = window[0] - window[-1]
            if drop <= cfg.stall_tol * max(1.0, abs(window[-1])):
                break
    else:
        iters_done = cfg.max_iters

    if can_symmetrize:
        # leave a symmetric-decreasing representative when that costs nothing
        try:
            cand = project_to_constraint(p, schwarz_rearrange(u), c)
            bd_cand = total_energy(p, cand)
            if bd_cand.total <= bd.total:
                u, bd = cand, bd_cand
        except (NonFiniteEnergyError, ValueError):
            pass

    # final stationarity check (covers stall and max-iteration exits)
    grad = energy_gradient(p, u)
    pg = _projected_gradient(p, u, grad)
    grad_norm = math.sqrt(max(_weighted_inner(p.grid, pg, pg), 0.0))
    constraint_err = abs(bd.constraint_value - c) / c
    converged = grad_norm <= cfg.grad_tol * (1.0 + abs(bd.total)) and (
        constraint_err <= CONSTRAINT_RTOL
    )

    beta = None
    res = None
    if p.constraint.homogeneity == 2.0 and p.constraint.name in ("G_square", "G_power"):
        beta = lagrange_multiplier(p, u, grad=grad)
    if p.family in ("stuart", "badiale_rolando") and beta is not None:
        res = el_residual(p, u, beta, grad=grad)

    if trace_path is not None:
        with open(trace_path, "w") as fh:
            fh.write("iter,energy,constraint_error,step_size\n")
            fh.write("\n".join(trace_rows))
            if trace_rows:
                fh.write("\n")

    return SolveResult(
        minimizer=u,
        energy=bd,
        m_value=bd.total,
        beta=beta,
        el_residual=res,
        iterations=iters_done,
        converged=converged,
        constraint_error=constraint_err,
        notes="discrete stationary point; bounded-grid value may exceed the whole-space infimum",
    )


def lagrange_multiplier(p: ProblemSpec, u: Field, grad: Optional[Field] = None) -> float:
    """Multiplier beta = <grad E(u), u> / |u|_2^2 for squared-norm constraints."""
    if p.constraint.homogeneity != 2.0:
        raise ValueError("lagrange_multiplier needs an L^2-type constraint")
    norm2 = _weighted_inner(p.grid, u.values, u.values)
    if norm2 == 0.0:
        raise ValueError("zero field has no multiplier")
    if grad is None:
        grad = energy_gradient(p, u)
    return _weighted_inner(p.grid, grad.values, u.values) / norm2


def el_residual(p: ProblemSpec, u: Field, beta: float, grad: Optional[Field] = None) -> float:
    """Euler-Lagrange defect |grad E(u) - beta u|_2 / |u|_2 (stationarity check)."""
    if p.family not in ("stuart", "badiale_rolando"):
        raise ValueError("el_residual applies to the stuart and badiale_rolando families")
    if grad is None:
        grad = energy_gradient(p, u)
    resid = grad.values - beta * u.values
    norm2 = _weighted_inner(p.grid, u.values, u.values)
    if norm2 == 0.0:
        raise ValueError("zero field has no residual scale")
    return math.sqrt(max(_weighted_inner(p.grid, resid, resid), 0.0) / norm2)
