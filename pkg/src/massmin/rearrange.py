"""Constructive field surgeries: rearrangement, plateaus, dips, far bumps.

These are the executable versions of the mass-addition constructions used to
repair constraint deficits: symmetric-decreasing rearrangement, insertion of a
constant plateau that adds constraint mass at zero gradient cost, filling a
local dip (which adds mass while strictly lowering the Dirichlet term),
compact truncation at fixed norm, and placing far-field bumps with certified
small energy, disjointly from an existing field.

Rearrangement works in the quadrature measure: cell values are sorted by
magnitude with their weights, and the decreasing profile is rebuilt by
cumulative measure matching (each output cell averages the sorted layer
profile over its own measure interval, so the constraint integral is
conserved to rounding and ties are broken by original radius).

The plateau surgery solves for the exact half-width making the *discrete*
constraint gain hit the target, so the reported mass change is exact to the
bisection tolerance rather than to quadrature accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .energy import (
    Constraint,
    EnergyBreakdown,
    ProblemSpec,
    constraint_value,
    coulomb_bilinear,
    dirichlet_energy,
    total_energy,
)
from .grid import Field, lp_norm

__all__ = [
    "SurgeryReport",
    "BumpPlacement",
    "schwarz_rearrange",
    "plateau_insert",
    "fill_dip",
    "truncate_renormalize",
    "far_field_bump",
    "add_disjoint_mass",
    "surgery_csv_row",
]


@dataclass(frozen=True)
class SurgeryReport:
    """Constraint mass and itemized energy before/after a surgery."""

    mass_before: float
    mass_after: float
    energy_before: Optional[EnergyBreakdown]
    energy_after: Optional[EnergyBreakdown]
    description: str = ""


def surgery_csv_row(name: str, rep: SurgeryReport) -> str:
    tb = rep.energy_before.total if rep.energy_before is not None else math.nan
    ta = rep.energy_after.total if rep.energy_after is not None else math.nan
    return f"{name},{rep.mass_before:.16e},{rep.mass_after:.16e},{tb:.16e},{ta:.16e}"


# ---------------------------------------------------------------------------
# Schwarz rearrangement
# ---------------------------------------------------------------------------


def _layer_cumulative(values: np.ndarray, weights: np.ndarray, radii: np.ndarray):
    """Knots of the cumulative integral of the decreasing layer profile.

    Sort cells by value (descending, ties by radius then index) and return the
    cumulative measure breakpoints B_k and cumulative integral I(B_k); the
    layer profile is the step function taking the sorted values on [B_{k-1}, B_k].
    """
    order = np.lexsort((np.arange(len(values)), radii, -values))
    v = values[order]
    w = weights[order]
    B = np.concatenate(([0.0], np.cumsum(w)))
    I = np.concatenate(([0.0], np.cumsum(v * w)))
    return B, I


def _cell_averages(B: np.ndarray, I: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Average of the layer step function over measure intervals [edges[i], edges[i+1]]."""
    Ivals = np.interp(edges, B, I)
    widths = np.diff(edges)
    prof = np.diff(Ivals) / widths
    # exact monotonicity: averaging is non-increasing up to rounding noise
    return np.minimum.accumulate(prof)


def schwarz_rearrange(u: Field) -> Field:
    """Symmetric-decreasing rearrangement of |u|, applied per component.

    The result is nonnegative, non-increasing in the radius, and equimeasurable
    with |u| up to one-cell resolution.  Cylindrical grids are unsupported
    (monotonization in |z| alone is out of scope here).
    """
    g = u.grid
    if g.kind == "cylindrical":
        raise ValueError("schwarz_rearrange supports line and radial grids only")
    W = g.weights()
    n = g.num_nodes
    rows = []
    if g.kind == "radial":
        edges = np.concatenate(([0.0], np.cumsum(W)))
        r = g.axis(0)
        for k in range(u.m):
            v = np.abs(u.component(k))
            B, I = _layer_cumulative(v, W, r)
            rows.append(_cell_averages(B, I, edges))
    else:
        half = n // 2
        center = None if n % 2 == 0 else half
        # group mirror nodes: measure interval of width 2h per |x| level
        for k in range(u.m):
            v = np.abs(u.component(k))
            B, I = _layer_cumulative(v, W, np.abs(g.axis(0)))
            if center is None:
                group_w = 2.0 * W[half:]
            else:
                group_w = np.concatenate(([W[center]], 2.0 * W[center + 1 :]))
            edges = np.concatenate(([0.0], np.cumsum(group_w)))
            prof = _cell_averages(B, I, edges)  # indexed by increasing |x|
            out = np.empty(n)
            if center is None:
                out[half:] = prof
                out[:half] = prof[::-1]
            else:
                out[center] = prof[0]
                out[center + 1 :] = prof[1:]
                out[:center] = prof[1:][::-1]
            rows.append(out)
    return Field(g, np.vstack(rows))


# ---------------------------------------------------------------------------
# Plateau insertion (1D)
# ---------------------------------------------------------------------------


def _half_profile(u: Field, component: int = 0):
    """Positive-axis view (xs, vals) of an even line field."""
    g = u.grid
    n = g.num_nodes
    x = g.axis(0)
    vals = u.component(component)
    half = n // 2
    return x[half:], vals[half:]


def _check_even_decreasing(u: Field, component: int = 0, tol: float = 1e-8):
    g = u.grid
    vals = u.component(component)
    n = g.num_nodes
    scale = float(np.max(np.abs(vals))) or 1.0
    if np.any(vals < -tol * scale):
        raise ValueError("field must be nonnegative")
    mirror = vals[::-1]
    if np.max(np.abs(vals - mirror)) > tol * scale:
        raise ValueError("field must be even about 0")
    xs, half = _half_profile(u, component)
    if np.max(np.diff(half)) > tol * scale:
        raise ValueError("field must be non-increasing in |x|")


def plateau_insert(
    u: Field,
    target_mass: float,
    G: Constraint,
    rho: float | None = None,
    problem: Optional[ProblemSpec] = None,
    delta: float | None = None,
) -> tuple[Field, SurgeryReport]:
    """Insert a constant plateau at height u(rho) on [rho, rho + L] (both sides).

    The outer profile shifts outward by a whole number of cells, so the new
    edge slopes are exactly the old ones plus zero-slope plateau edges and the
    gradient term is preserved to rounding; the height of the plateau interior
    is then adjusted by a tiny amount (quadratically small in the edge slopes)
    to make the discrete constraint gain equal ``target_mass`` exactly.  L is
    target / (2 G(u(rho))) to leading order.  ``rho`` snaps to a node; when
    omitted it defaults to the smallest radius where the profile has dropped
    to ``delta``.
    """
    g = u.grid
    if g.kind != "line":
        raise ValueError("plateau_insert works on line grids")
    if target_mass < 0:
        raise ValueError("target_mass must be >= 0")
    _check_even_decreasing(u)
    xs, half = _half_profile(u)
    n_half = len(xs)
    h = g.spacing[0]
    if rho is None:
        if delta is None:
            if problem is not None and problem.nonlinearity is not None:
                delta = problem.nonlinearity.delta
            else:
                raise ValueError("pass rho or delta (or a problem with a nonlinearity)")
        below = np.nonzero(half <= delta)[0]
        if len(below) == 0:
            raise ValueError("profile never drops below delta inside the grid")
        i0 = int(below[0])
    else:
        i0 = int(np.argmin(np.abs(xs - rho)))
    rho_snap = float(xs[i0])
    eta = float(half[i0])
    if eta <= 0:
        raise ValueError("u(rho) must be positive")
    g_eta = float(G.g(np.asarray([eta]))[0])
    if g_eta <= 0:
        raise ValueError("constraint density vanishes at the plateau height")

    W = g.weights()
    mass_before = float(np.dot(W, G.g(u.component(0))))
    if target_mass == 0.0:
        rep = _make_report(problem, u, u, mass_before, mass_before, "plateau_insert: empty")
        return Field(g, u.values.copy()), rep

    # move outward until the plateau spans enough strictly decreasing cells for
    # the two-level construction to bracket the target exactly
    per_cell = target_mass / (2.0 * h)
    while i0 + 2 < n_half:
        eta = float(half[i0])
        lvl_b = float(half[i0 + 1])
        g_eta = float(G.g(np.asarray([eta]))[0])
        g_b = float(G.g(np.asarray([lvl_b]))[0])
        if eta > lvl_b > 0 and per_cell / g_eta >= 6.0:
            k_lo = int(math.ceil(per_cell / g_eta))
            k_hi = int(math.floor(per_cell / g_b))
            if k_hi > k_lo:
                break
        i0 += 1
    else:
        raise ValueError("no insertion point supports the requested mass; enlarge the grid")
    rho_snap = float(xs[i0])
    k = min(k_lo + 1, k_hi)
    if rho_snap + k * h > g.extent[0] * 0.9:
        raise ValueError("plateau would exceed the grid extent")
    if g_eta > g_b:
        k1 = int(round((per_cell - k * g_b) / (g_eta - g_b)))
        k1 = min(max(k1, 3), k)
    else:
        k1 = k
    k2 = k - k1

    # the mass micro-correction rides on the longer run, where its slope cost
    # is cubically small in the run length
    if k1 >= k2:
        b_start, b_len = i0 + 2, k1 - 2
    else:
        b_start, b_len = i0 + 2 + k1, k2 - 2
    jj = np.arange(1, b_len + 1, dtype=float)
    bump_shape = (jj * (b_len + 1 - jj)) / (0.5 * (b_len + 1)) ** 2

    def build_half(bump_amp: float) -> np.ndarray:
        out = np.empty(n_half + k)
        out[: i0 + 1] = half[: i0 + 1]
        out[i0 + 1 : i0 + 1 + k1] = eta
        out[i0 + 1 + k1 : i0 + 1 + k] = lvl_b
        out[b_start : b_start + b_len] += bump_amp * bump_shape
        out[i0 + 1 + k :] = half[i0 + 1 :]
        return out[:n_half]

    def mass_of(amp: float) -> float:
        return 2.0 * float(np.sum(W[:n_half] * G.g(build_half(amp))))

    target_total = mass_before + target_mass
    span = max(abs(eta), 1.0) * 1e-6
    lo, hi = 0.0, 0.0
    while mass_of(hi) < target_total:
        hi += span
        span *= 2.0
        if hi > abs(eta):
            raise ValueError("mass correction cannot reach the target")
    span = max(abs(eta), 1.0) * 1e-6
    while mass_of(lo) > target_total:
        lo -= span
        span *= 2.0
        if lo < -abs(eta):
            raise ValueError("mass correction cannot reach the target")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mass_of(mid) < target_total:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * max(abs(eta), 1.0):
            break
    d_star = 0.5 * (lo + hi)
    new_half = build_half(d_star)
    w_line = np.concatenate((new_half[::-1], new_half)) if g.num_nodes % 2 == 0 else None
    if w_line is None:
        raise ValueError("plateau_insert needs an even node count")
    new_vals = u.values.copy()
    new_vals[0] = w_line
    out = Field(g, new_vals)
    mass_after = float(np.dot(W, G.g(w_line)))
    rep = _make_report(
        problem,
        u,
        out,
        mass_before,
        mass_after,
        f"plateau_insert: rho={rho_snap:.6g} height={eta:.6g} half_width={k * h:.8g} "
        f"levels=({k1},{k2}) bump={d_star:.3e}",
    )
    return out, rep


def _make_report(problem, before: Field, after: Field, mb, ma, desc) -> SurgeryReport:
    eb = ea = None
    if problem is not None:
        eb = total_energy(problem, before)
        ea = total_energy(problem, after)
    return SurgeryReport(
        mass_before=mb, mass_after=ma, energy_before=eb, energy_after=ea, description=desc
    )


# ---------------------------------------------------------------------------
# Dip filling (1D)
# ---------------------------------------------------------------------------


def fill_dip(
    u: Field,
    x1: float,
    x2: float,
    problem: Optional[ProblemSpec] = None,
) -> tuple[Field, SurgeryReport]:
    """Replace a local trough on [x1, x2] by the constant level u(x1).

    Requires u(x1) = u(x2) within one cell's interpolation slack and
    u <= u(x1) strictly inside (a genuine dip, or a flat stretch, in which
    case the field is returned unchanged).  The Dirichlet term can only
    decrease; the report records the added squared-norm mass.
    """
    g = u.grid
    if g.kind != "line":
        raise ValueError("fill_dip works on line grids")
    if not x1 < x2:
        raise ValueError("need x1 < x2")
    x = g.axis(0)
    vals = u.component(0)
    i1 = int(np.argmin(np.abs(x - x1)))
    i2 = int(np.argmin(np.abs(x - x2)))
    if i2 <= i1 + 0:
        raise ValueError("x1 and x2 must be distinct grid locations")
    level = float(vals[i1])
    scale = float(np.max(np.abs(vals))) or 1.0
    # endpoint match allowed up to the local one-cell variation
    local = max(
        abs(vals[min(i1 + 1, len(x) - 1)] - vals[i1]),
        abs(vals[i2] - vals[max(i2 - 1, 0)]),
        1e-12 * scale,
    )
    if abs(vals[i2] - level) > 4.0 * local:
        raise ValueError("u(x1) and u(x2) differ by more than one cell's variation")
    inner = vals[i1 + 1 : i2]
    if np.any(inner > level + 1e-9 * scale):
        raise ValueError("no dip between x1 and x2 (interior exceeds the endpoint level)")
    w = vals.copy()
    w[i1 + 1 : i2] = level
    new_vals = u.values.copy()
    new_vals[0] = w
    out = Field(g, new_vals)
    W = g.weights()
    added = float(np.dot(W[i1 + 1 : i2], level**2 - inner**2))
    mass_before = float(np.dot(W, vals**2))
    rep = _make_report(
        problem,
        u,
        out,
        mass_before,
        mass_before + added,
        f"fill_dip: [{x[i1]:.6g},{x[i2]:.6g}] level={level:.6g} added_mass={added:.6g}",
    )
    return out, rep


# ---------------------------------------------------------------------------
# Truncation at fixed norm
# ---------------------------------------------------------------------------


def truncate_renormalize(u: Field, R_cut: float) -> Field:
    """Cut the field off smoothly beyond R_cut and restore each L^2 norm exactly.

    The cutoff is identically 1 below 0.9 R_cut, a squared cosine ramp over the
    last 10 percent, and 0 beyond; each nonzero component is then rescaled by
    the scalar restoring its discrete L^2 norm.
    """
    g = u.grid
    if g.kind == "cylindrical":
        raise ValueError("truncate_renormalize supports line and radial grids only")
    if not 0 < R_cut <= g.extent[0]:
        raise ValueError("R_cut must lie within the grid extent")
    if not np.any(u.values != 0.0):
        raise ValueError("cannot renormalize the zero field")
    r = np.abs(g.axis(0))
    ramp = np.clip((r - 0.9 * R_cut) / (0.1 * R_cut), 0.0, 1.0)
    chi = np.where(r > R_cut, 0.0, np.cos(0.5 * np.pi * ramp) ** 2)
    W = g.weights()
    rows = []
    for k in range(u.m):
        v = u.component(k)
        cut = v * chi
        norm_old = float(np.dot(W, v**2))
        norm_new = float(np.dot(W, cut**2))
        if norm_old == 0.0:
            rows.append(cut)
            continue
        if norm_new == 0.0:
            raise ValueError("cutoff removed all mass of a component; increase R_cut")
        rows.append(cut * math.sqrt(norm_old / norm_new))
    return Field(g, np.vstack(rows))


# ---------------------------------------------------------------------------
# Far-field bumps and disjoint mass addition
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BumpPlacement:
    """A far bump with certified energy interval.

    ``t0`` is the spreading factor applied to the seed (smaller means flatter),
    ``i_lo``/``i_hi`` bracket the bump's total energy by freezing the coupling
    weight at the support's endpoints, and ``satisfied`` records whether
    i_hi <= eps was achieved within the grid extent.
    """

    field: Field
    center: float
    half_width: float
    t0: float
    sup_value: float
    i_lo: float
    i_hi: float
    satisfied: bool


def _cap_profile(xi: np.ndarray) -> np.ndarray:
    """Smooth compactly supported seed: cos^2(pi xi / 2) on |xi| <= 1."""
    out = np.zeros_like(xi)
    inside = np.abs(xi) <= 1.0
    out[inside] = np.cos(0.5 * np.pi * xi[inside]) ** 2
    return out


def _bump_field(grid, center: float, half_width: float, amp: float) -> Field:
    coord = grid.axis(0)
    vals = amp * _cap_profile((np.abs(coord) - center) / half_width)
    if grid.kind == "line":
        # one-sided placement keeps the support connected and far out
        vals = amp * _cap_profile((coord - center) / half_width)
    return Field(grid, vals)


def far_field_bump(
    p: ProblemSpec,
    d: float,
    R0: float,
    eps: float,
    seed_half_width: float = 1.0,
) -> tuple[BumpPlacement, SurgeryReport]:
    """Place a bump of squared-norm mass d beyond R0 with energy at most eps.

    A fixed smooth cap is spread by the norm-preserving scaling until its sup
    falls below the coupling's smallness threshold and its Dirichlet energy
    below eps, then amplitude-corrected so the discrete L^2 mass equals d
    exactly.  The returned interval [i_lo, i_hi] brackets the energy by
    freezing the coupling's radial weight over the support; when the extent is
    too small to spread far enough the result is flagged unsatisfied.
    """
    g = p.grid
    if g.kind not in ("line", "radial"):
        raise ValueError("far_field_bump needs a line or radial grid")
    if p.family not in ("stuart", "choquard", "quasilinear"):
        raise ValueError("far_field_bump supports local 1D-symmetric families")
    if d <= 0 or eps <= 0:
        raise ValueError("d and eps must be positive")
    nl = p.nonlinearity
    delta = nl.delta if nl is not None else math.inf
    r0_weight = float(nl.params.get("r0", 0.0)) if nl is not None else 0.0
    inner = max(R0, r0_weight)
    h = g.spacing[0]
    extent = g.extent[0]
    a_max = 0.5 * (extent - inner) - 3.0 * h
    if a_max <= 2.0 * h:
        raise ValueError("no room beyond R0 within the grid extent")
    t_min = seed_half_width / a_max

    def make(t: float):
        a = seed_half_width / t
        center = inner + a + 2.0 * h
        bump = _bump_field(g, center, a, 1.0)
        mass = lp_norm(bump, 2.0) ** 2
        amp = math.sqrt(d / mass)
        return Field(g, amp * bump.values), center, a

    def assess(bump: Field, center: float, a: float, t: float) -> BumpPlacement:
        sup = float(np.max(bump.values))
        bd = total_energy(p, bump)
        K = p.kinetic_prefactor * bd.j_term + bd.hardy_term
        i_lo = i_hi = K
        if nl is not None and nl.radial_weight is not None and nl.profile is not None:
            S = float(np.dot(g.weights(), nl.profile(bump.values)))
            w_in = float(nl.radial_weight(np.asarray([max(center - a, 0.0)]))[0])
            w_out = float(nl.radial_weight(np.asarray([center + a]))[0])
            i_lo = K - max(w_in, w_out) * S
            i_hi = K - min(w_in, w_out) * S
        ok = i_hi <= eps and sup <= delta * (1.0 + 1e-9)
        return BumpPlacement(bump, center, a, t, sup, i_lo, i_hi, ok)

    # the seed's Dirichlet energy sets the eps-driven spreading factor
    seed, _, _ = make(1.0)
    K_seed = p.kinetic_prefactor * dirichlet_energy(seed)
    amp_seed = float(np.max(seed.values))
    t_eps = math.sqrt(eps / max(K_seed, 1e-300))
    t_delta = (0.95 * delta / amp_seed) ** 2 if np.isfinite(delta) else 1.0
    t0 = min(1.0, t_eps, t_delta)

    best = assess(*make(max(t0, t_min)), max(t0, t_min))
    t = best.t0
    for _ in range(40):
        if best.satisfied or t * 0.7 < t_min:
            break
        t *= 0.7  # spread further while the extent allows it
        cand = assess(*make(t), t)
        if cand.i_hi < best.i_hi or cand.satisfied:
            best = cand
    mass = lp_norm(best.field, 2.0) ** 2
    rep = _make_report(
        p,
        Field(g, np.zeros_like(best.field.values)),
        best.field,
        0.0,
        mass,
        f"far_field_bump: center={best.center:.6g} t0={best.t0:.6g} "
        f"I in [{best.i_lo:.6g},{best.i_hi:.6g}] satisfied={best.satisfied}",
    )
    return best, rep


def add_disjoint_mass(
    p: ProblemSpec,
    u: Field,
    c: float,
    eps: float,
) -> tuple[Field, SurgeryReport]:
    """Top the constraint up to c by a far bump with support disjoint from u.

    Requires an L^2-type constraint (the bump's mass is fixed by exact
    amplitude scaling).  Local energy terms are exactly additive across the
    disjoint supports; for the Coulomb family the long-range cross term is
    computed and reported rather than bounded.
    """
    if p.constraint.homogeneity != 2.0 or p.constraint.name not in ("G_square", "G_power"):
        raise ValueError("add_disjoint_mass needs a squared-norm constraint")
    g = u.grid
    if g.kind not in ("line", "radial"):
        raise ValueError("add_disjoint_mass needs a line or radial grid")
    mass_u = constraint_value(p, u)
    if not mass_u < c:
        raise ValueError("field already carries at least the requested constraint mass")
    coord = np.abs(g.axis(0))
    active = np.abs(u.component(0)) > 0.0
    if not np.any(active):
        R_u = 0.0
    else:
        R_u = float(np.max(coord[active]))
    if R_u > 0.8 * g.extent[0]:
        raise ValueError("field support leaves no room for a disjoint bump; truncate first")
    bump, _ = far_field_bump(p, c - mass_u, R_u + 2.0 * g.spacing[0], eps)
    v = bump.field
    overlap = np.logical_and(np.abs(u.component(0)) > 0, np.abs(v.component(0)) > 0)
    if np.any(overlap):
        raise ValueError("insufficient grid extent for disjoint placement")
    w = Field(g, u.values + v.values)
    eb = total_energy(p, u)
    ea = total_energy(p, w)
    desc = f"add_disjoint_mass: bump at {bump.center:.6g}, satisfied={bump.satisfied}"
    if p.family == "choquard":
        cross = 2.0 * coulomb_bilinear(u, v)
        desc += f", coulomb_cross_term={cross:.10e}"
    return w, SurgeryReport(
        mass_before=mass_u,
        mass_after=constraint_value(p, w),
        energy_before=eb,
        energy_after=ea,
        description=desc,
    )
