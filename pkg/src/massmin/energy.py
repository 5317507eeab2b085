"""Energy functionals for the four problem families, itemized by term.

The total energy of a field u is assembled as

    total = prefactor * sum_k int j_k(u_k, |grad u_k|)     (j_term)
          + (mu/2) * int u^2 / |y|^2                       (hardy_term)
          - int F(|x|, u_1, ..., u_m)                      (f_term)
          - double integral of u^2(x) u^2(y) / |x-y|       (coulomb_term)

with the Coulomb term present only for the ``choquard`` family (radial grids
in R^3, computed via the spherical Newton potential in O(n)) and the Hardy
term only for ``badiale_rolando`` (cylindrical grids).

Gradient-carrying terms are discretized on cell edges: for 1D symmetry classes

    j_term = sum_edges W_e * j((u_i + u_{i+1})/2, |u_{i+1} - u_i| / h)

with a zero ghost value beyond the extent.  Two properties follow.  First,
inserting a run of constant nodal values adds exactly zero to the j_term (the
new edges carry zero slope and built-in Lagrangians vanish at zero slope), so
the plateau surgeries preserve it to rounding.  Second, ``energy_gradient``
returns the exact derivative of this discrete functional (in the weighted
L^2 pairing), so central finite differences of ``total_energy`` reproduce it
to truncation error; for quadratic Lagrangians the kinetic part reduces to
the standard conservative finite-volume Laplacian.

Cylindrical grids carry only quadratic Lagrangians (the cylinder family's
energy is quadratic in the gradient); the edge sums then split per direction.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .grid import Field, GridSpec, sphere_area

__all__ = [
    "Lagrangian",
    "Nonlinearity",
    "Constraint",
    "ProblemSpec",
    "EnergyBreakdown",
    "NonFiniteEnergyError",
    "make_problem",
    "coulomb_potential",
    "coulomb_energy",
    "coulomb_bilinear",
    "total_energy",
    "constraint_value",
    "energy_gradient",
    "constraint_gradient",
    "dirichlet_energy",
    "validate_coupling",
    "CouplingReport",
]

FAMILIES = ("choquard", "quasilinear", "stuart", "badiale_rolando")


class NonFiniteEnergyError(ArithmeticError):
    """An energy term evaluated to inf or nan (signals blow-up)."""


@dataclass(frozen=True)
class Lagrangian:
    """Gradient-term integrand j(s, t), t >= 0, with optional partials.

    ``j_t_over_t`` is j_t(s, t)/t, which stays finite at t = 0 for the
    built-ins and is what the flux discretization actually needs.  ``p`` and
    ``nu`` record the coercivity j >= nu * t^p; ``growth_C`` caps
    j <= C(|s|^6 + t^2) and ``cap_beta``/``cap_alpha`` cap j <= beta * t^p for
    arguments below alpha.  The caps are configuration (used by certificate
    bounds), not enforced pointwise.
    """

    name: str
    j: Callable
    j_s: Optional[Callable] = None
    j_t_over_t: Optional[Callable] = None
    p: float = 2.0
    nu: float = 1.0
    growth_C: float = 1.0
    cap_beta: float = 1.0
    cap_alpha: float = 1.0
    params: dict = field(default_factory=dict)

    @property
    def has_partials(self) -> bool:
        return self.j_s is not None and self.j_t_over_t is not None


@dataclass(frozen=True)
class Nonlinearity:
    """Coupling term F(r, s_1, ..., s_m) with optional partials f_k.

    ``F`` maps (r, S) with S of shape (m, n) to shape (n,); ``partials`` maps
    the same arguments to shape (m, n).  Separable nonlinearities expose
    ``radial_weight`` and ``profile`` with F = radial_weight(r) * profile(S);
    the far-field surgery brackets energies through them.  ``params`` carries
    the growth records (A, d, alpha, r0, delta) / (mu_F, tau, sigma, delta, r0)
    when meaningful.
    """

    name: str
    m: int
    F: Callable
    partials: Optional[Callable] = None
    params: dict = field(default_factory=dict)
    radial_weight: Optional[Callable] = None
    profile: Optional[Callable] = None

    @property
    def delta(self) -> float:
        return float(self.params.get("delta", 1e-2))


@dataclass(frozen=True)
class Constraint:
    """Per-component constraint density G(s) >= gamma |s|^p, G(0) = 0.

    The same evaluator is applied to every component; ``homogeneity`` is the
    degree q with G(a s) = a^q G(s) when G is homogeneous, else None.
    """

    name: str
    g: Callable
    g_prime: Optional[Callable] = None
    gamma: float = 1.0
    p: float = 2.0
    homogeneity: Optional[float] = None


@dataclass(frozen=True)
class ProblemSpec:
    """One of the four problem families, fully specified on a grid."""

    family: str
    grid: GridSpec
    lagrangians: tuple[Lagrangian, ...]
    nonlinearity: Optional[Nonlinearity]
    constraint: Constraint
    mu: float = 0.0
    kinetic_prefactor: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        g = self.grid
        if self.family == "choquard":
            if not (g.kind == "radial" and g.dim == 3):
                raise ValueError("choquard requires a radial grid in R^3")
            if len(self.lagrangians) != 1:
                raise ValueError("choquard is single-component")
        elif self.family in ("quasilinear", "stuart"):
            if g.kind not in ("line", "radial"):
                raise ValueError(f"{self.family} requires a line or radial grid")
            if self.family == "stuart" and len(self.lagrangians) != 1:
                raise ValueError("stuart is single-component")
        else:
            if g.kind != "cylindrical":
                raise ValueError("badiale_rolando requires a cylindrical grid")
            if len(self.lagrangians) != 1:
                raise ValueError("badiale_rolando is single-component")
            if self.mu < 0:
                raise ValueError("Hardy coefficient mu must be >= 0")
        if g.kind == "cylindrical":
            for lag in self.lagrangians:
                if lag.name != "j_quadratic":
                    raise ValueError("cylindrical grids support only j_quadratic")
        if self.nonlinearity is not None and self.nonlinearity.m != len(self.lagrangians):
            raise ValueError("nonlinearity component count does not match lagrangians")

    @property
    def m(self) -> int:
        return len(self.lagrangians)


def make_problem(
    family: str,
    grid: GridSpec,
    lagrangians,
    constraint: Constraint,
    nonlinearity: Optional[Nonlinearity] = None,
    mu: float = 0.0,
) -> ProblemSpec:
    """Assemble a ProblemSpec with the family's kinetic prefactor (1 or 1/2)."""
    if isinstance(lagrangians, Lagrangian):
        lagrangians = (lagrangians,)
    prefactor = 0.5 if family in ("stuart", "badiale_rolando") else 1.0
    return ProblemSpec(
        family=family,
        grid=grid,
        lagrangians=tuple(lagrangians),
        nonlinearity=nonlinearity,
        constraint=constraint,
        mu=mu,
        kinetic_prefactor=prefactor,
    )


@dataclass(frozen=True)
class EnergyBreakdown:
    j_term: float
    f_term: float
    coulomb_term: float
    hardy_term: float
    total: float
    constraint_value: float


# ---------------------------------------------------------------------------
# Edge geometry for the staggered kinetic term
# ---------------------------------------------------------------------------


def _edge_weights_1d(grid: GridSpec) -> np.ndarray:
    """Quadrature weight of each edge; see _edge_values for the edge layout."""
    h = grid.spacing[0]
    n = grid.counts[0]
    if grid.kind == "line":
        return np.full(n + 1, h)
    r_e = (np.arange(n) + 1.0) * h
    return sphere_area(grid.dim) * r_e ** (grid.dim - 1) * h


def _edge_values(grid: GridSpec, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Midpoint values and slopes on edges, with zero ghosts beyond the extent.

    Line grids have n+1 edges (both boundaries); radial grids have n edges
    (node i to node i+1, last node to the zero ghost at the extent) and no
    edge at the origin, where symmetry forces zero slope.
    """
    h = grid.spacing[0]
    if grid.kind == "line":
        up = np.concatenate(([0.0], u, [0.0]))
    else:
        up = np.concatenate((u, [0.0]))
    sbar = 0.5 * (up[1:] + up[:-1])
    slope = (up[1:] - up[:-1]) / h
    return sbar, slope


def _jterm_1d(grid: GridSpec, lag: Lagrangian, u: np.ndarray) -> float:
    sbar, slope = _edge_values(grid, u)
    return float(np.dot(_edge_weights_1d(grid), lag.j(sbar, np.abs(slope))))


def _kinetic_grad_1d(grid: GridSpec, lag: Lagrangian, u: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Exact derivative of _jterm_1d w.r.t. nodal values, in the W-weighted pairing."""
    h = grid.spacing[0]
    sbar, slope = _edge_values(grid, u)
    We = _edge_weights_1d(grid)
    js = We * lag.j_s(sbar, np.abs(slope))
    flux = We * lag.j_t_over_t(sbar, np.abs(slope)) * slope
    out = np.zeros_like(u)
    if grid.kind == "line":
        # node i touches edges i (left) and i+1 (right)
        out += 0.5 * (js[:-1] + js[1:])
        out += (flux[:-1] - flux[1:]) / h
    else:
        # node i touches edges i-1 (absent for i=0) and i
        out += 0.5 * js
        out[1:] += 0.5 * js[:-1]
        out -= flux / h
        out[1:] += flux[:-1] / h
    return out / W


def _cyl_edge_data(grid: GridSpec):
    ns, nw = grid.counts
    hs, hw = grid.spacing
    k, nk = grid.split, grid.dim - grid.split
    s_n = grid.axis(0)
    w_n = grid.axis(1)
    s_e = (np.arange(ns) + 1.0) * hs
    w_e = (np.arange(nw) + 1.0) * hw
    ws_node = sphere_area(k) * s_n ** (k - 1) * hs
    ww_node = sphere_area(nk) * w_n ** (nk - 1) * hw
    ws_edge = sphere_area(k) * s_e ** (k - 1) * hs
    ww_edge = sphere_area(nk) * w_e ** (nk - 1) * hw
    # s-edges: (ns, nw) array, edge i between rows i and i+1 (ghost after last)
    Ws = np.outer(ws_edge, ww_node)
    # w-edges: (ns, nw) array, edge j between cols j and j+1 (ghost after last)
    Ww = np.outer(ws_node, ww_edge)
    return Ws, Ww


def _dirichlet_cyl(grid: GridSpec, u2d: np.ndarray) -> float:
    hs, hw = grid.spacing
    Ws, Ww = _cyl_edge_data(grid)
    gs = (np.vstack([u2d[1:], np.zeros((1, u2d.shape[1]))]) - u2d) / hs
    gw = (np.hstack([u2d[:, 1:], np.zeros((u2d.shape[0], 1))]) - u2d) / hw
    return float(np.sum(Ws * gs**2) + np.sum(Ww * gw**2))


def _dirichlet_grad_cyl(grid: GridSpec, u2d: np.ndarray, W2d: np.ndarray) -> np.ndarray:
    """Derivative of _dirichlet_cyl in the weighted pairing (= -2 Laplacian)."""
    hs, hw = grid.spacing
    Ws, Ww = _cyl_edge_data(grid)
    gs = (np.vstack([u2d[1:], np.zeros((1, u2d.shape[1]))]) - u2d) / hs
    gw = (np.hstack([u2d[:, 1:], np.zeros((u2d.shape[0], 1))]) - u2d) / hw
    fs = Ws * gs
    fw = Ww * gw
    out = -2.0 * fs / hs
    out[1:] += 2.0 * fs[:-1] / hs
    out -= 2.0 * fw / hw
    out[:, 1:] += 2.0 * fw[:, :-1] / hw
    return out / W2d


def dirichlet_energy(f: Field, component: int = 0) -> float:
    """Edge-based value of the squared-gradient integral for one component."""
    g = f.grid
    if g.kind == "cylindrical":
        return _dirichlet_cyl(g, f.component(component).reshape(g.counts))
    sbar, slope = _edge_values(g, f.component(component))
    return float(np.dot(_edge_weights_1d(g), slope**2))


# ---------------------------------------------------------------------------
# Coulomb machinery (radial grids in R^3)
# ---------------------------------------------------------------------------


def _require_radial3(grid: GridSpec, what: str):
    if not (grid.kind == "radial" and grid.dim == 3):
        raise ValueError(f"{what} requires a radial grid in R^3")


def _newton_potential(grid: GridSpec, rho: np.ndarray) -> np.ndarray:
    """Potential of a radial density: 4*pi*[(1/r) int_0^r rho s^2 ds + int_r^inf rho s ds]."""
    r = grid.axis(0)
    h = grid.spacing[0]
    inner = np.cumsum(rho * r**2) * h
    outer_rev = np.cumsum((rho * r)[::-1])[::-1] * h
    outer = np.concatenate((outer_rev[1:], [0.0]))
    return 4.0 * np.pi * (inner / r + outer)


def coulomb_potential(u: Field, component: int = 0) -> Field:
    """Newton potential of u^2 on a radial R^3 grid, computed by prefix sums."""
    _require_radial3(u.grid, "coulomb_potential")
    rho = u.component(component) ** 2
    return Field(u.grid, _newton_potential(u.grid, rho))


def coulomb_energy(u: Field, component: int = 0) -> float:
    """Self-interaction double integral of u^2(x) u^2(y) / |x - y|."""
    _require_radial3(u.grid, "coulomb_energy")
    rho = u.component(component) ** 2
    phi = _newton_potential(u.grid, rho)
    return float(np.dot(u.grid.weights(), rho * phi))


def coulomb_bilinear(v: Field, w: Field) -> float:
    """Cross term: double integral of v^2(x) w^2(y) / |x - y|; symmetric in (v, w)."""
    _require_radial3(v.grid, "coulomb_bilinear")
    if v.grid != w.grid:
        raise ValueError("coulomb_bilinear needs both fields on the same grid")
    rho_w = w.component(0) ** 2
    phi_w = _newton_potential(v.grid, rho_w)
    return float(np.dot(v.grid.weights(), v.component(0) ** 2 * phi_w))


# ---------------------------------------------------------------------------
# Assembled energy, constraint, and gradient
# ---------------------------------------------------------------------------


def constraint_value(p: ProblemSpec, u: Field) -> float:
    """Sum over components of the integral of G(u_k)."""
    W = p.grid.weights()
    total = 0.0
    for k in range(u.m):
        total += float(np.dot(W, p.constraint.g(u.component(k))))
    return total


def _f_term(p: ProblemSpec, u: Field) -> float:
    if p.nonlinearity is None:
        return 0.0
    W = p.grid.weights()
    if p.grid.kind == "cylindrical":
        r = np.zeros(p.grid.num_nodes)  # autonomous coupling on cylinders
    else:
        r = p.grid.radii()
    return float(np.dot(W, p.nonlinearity.F(r, u.values)))


def total_energy(p: ProblemSpec, u: Field) -> EnergyBreakdown:
    """Itemized energy; raises NonFiniteEnergyError if any term blows up."""
    if u.grid != p.grid:
        raise ValueError("field grid does not match problem grid")
    with np.errstate(over="ignore", invalid="ignore"):
        if p.grid.kind == "cylindrical":
            u2d = u.component(0).reshape(p.grid.counts)
            j_term = _dirichlet_cyl(p.grid, u2d)
            s = p.grid.coords()[0]
            hardy = 0.5 * p.mu * float(np.dot(p.grid.weights(), u.component(0) ** 2 / s**2))
        else:
            j_term = sum(
                _jterm_1d(p.grid, lag, u.component(k)) for k, lag in enumerate(p.lagrangians)
            )
            hardy = 0.0
        f_term = _f_term(p, u)
        coulomb = coulomb_energy(u) if p.family == "choquard" else 0.0
        cval = constraint_value(p, u)
    total = p.kinetic_prefactor * j_term + hardy - f_term - coulomb
    if not all(np.isfinite(x) for x in (j_term, f_term, coulomb, hardy, cval)):
        raise NonFiniteEnergyError("non-finite energy term")
    return EnergyBreakdown(
        j_term=j_term,
        f_term=f_term,
        coulomb_term=coulomb,
        hardy_term=hardy,
        total=total,
        constraint_value=cval,
    )


def energy_gradient(p: ProblemSpec, u: Field) -> Field:
    """L^2-gradient of the total energy w.r.t. the weighted nodal pairing.

    This is the exact derivative of the discrete functional evaluated by
    ``total_energy``, so <grad, v> with the quadrature inner product matches
    directional finite differences of the energy.
    """
    if u.grid != p.grid:
        raise ValueError("field grid does not match problem grid")
    W = p.grid.weights()
    rows = []
    if p.grid.kind == "cylindrical":
        W2d = W.reshape(p.grid.counts)
        u2d = u.component(0).reshape(p.grid.counts)
        kin = p.kinetic_prefactor * _dirichlet_grad_cyl(p.grid, u2d, W2d).ravel()
        s = p.grid.coords()[0]
        kin = kin + p.mu * u.component(0) / s**2
        rows.append(kin)
    else:
        for k, lag in enumerate(p.lagrangians):
            if not lag.has_partials:
                raise ValueError(f"Lagrangian {lag.name!r} provides no partials")
            rows.append(p.kinetic_prefactor * _kinetic_grad_1d(p.grid, lag, u.component(k), W))
    grad = np.vstack(rows)
    if p.nonlinearity is not None:
        if p.nonlinearity.partials is None:
            raise ValueError(f"Nonlinearity {p.nonlinearity.name!r} provides no partials")
        r = np.zeros(p.grid.num_nodes) if p.grid.kind == "cylindrical" else p.grid.radii()
        grad = grad - p.nonlinearity.partials(r, u.values)
    if p.family == "choquard":
        phi = _newton_potential(p.grid, u.component(0) ** 2)
        grad = grad - 4.0 * phi[None, :] * u.values
    return Field(p.grid, grad)


def constraint_gradient(p: ProblemSpec, u: Field) -> Field:
    """L^2-gradient of the constraint functional (G' applied per component)."""
    if p.constraint.g_prime is None:
        raise ValueError(f"Constraint {p.constraint.name!r} provides no derivative")
    return Field(p.grid, p.constraint.g_prime(u.values))


# ---------------------------------------------------------------------------
# Cooperativity sampling
# ---------------------------------------------------------------------------


@dataclass
class CouplingReport:
    """Sampled violations of the two cooperativity inequalities.

    ``mixed``: entries (r, s, i, j, h, k, defect) where the mixed second
    difference F(s + h e_i + k e_j) + F(s) - F(s + h e_i) - F(s + k e_j)
    came out below -tol.  ``radial``: entries (r0, r1, s, i, h, defect) where
    the increment F(r, s + h e_i) - F(r, s) failed to decrease in r.
    """

    mixed: list
    radial: list

    @property
    def passed(self) -> bool:
        return not self.mixed and not self.radial


def validate_coupling(
    nl: Nonlinearity,
    r_values,
    s_values,
    increments,
    tol: float = 1e-12,
) -> CouplingReport:
    """Sample the cooperativity inequalities over a box of arguments.

    ``s_values`` are base values used for every component, ``increments`` the
    positive bumps h, k.  All violations are recorded with their signed defect.
    """
    r_values = sorted(float(r) for r in r_values)
    s_values = [float(s) for s in s_values]
    increments = [float(h) for h in increments]
    m = nl.m

    def F_at(r, svec):
        S = np.asarray(svec, dtype=float).reshape(m, 1)
        return float(nl.F(np.asarray([r]), S)[0])

    mixed = []
    radial = []
    base_points = list(itertools.product(s_values, repeat=m))
    for r in r_values:
        for s in base_points:
            for i in range(m):
                for j in range(m):
                    if i == j:
                        continue
                    for h in increments:
                        for kk in increments:
                            sp = list(s)
                            s_hi = list(s)
                            s_kj = list(s)
                            s_both = list(s)
                            s_hi[i] += h
                            s_kj[j] += kk
                            s_both[i] += h
                            s_both[j] += kk
                            defect = F_at(r, s_both) + F_at(r, sp) - F_at(r, s_hi) - F_at(r, s_kj)
                            if defect < -tol:
                                mixed.append((r, tuple(s), i, j, h, kk, defect))
    for r0, r1 in itertools.combinations(r_values, 2):
        for s in base_points:
            for i in range(m):
                for h in increments:
                    s_hi = list(s)
                    s_hi[i] += h
                    defect = (
                        F_at(r1, s_hi) + F_at(r0, list(s)) - F_at(r1, list(s)) - F_at(r0, s_hi)
                    )
                    if defect > tol:
                        radial.append((r0, r1, tuple(s), i, h, defect))
    return CouplingReport(mixed=mixed, radial=radial)
