"""Mass-energy curves and compactness diagnostics.

The central object is the curve c -> m(c), the infimum of the energy over the
constraint set at level c, sampled by repeated constrained solves.  On top of
it sit the checks that drive existence arguments: monotonicity, the large
subadditivity inequalities m(c) <= m(lambda) + m_inf(c - lambda) against a
problem-at-infinity curve, homogeneity bounds m(lambda c) <= lambda^alpha m(c),
and negativity certificates built from explicit one-parameter test families.

Certificate scans evaluate their test functions on parameter-adapted grids
(same node count, rescaled extent) so the one-parameter scalings map nodes to
nodes; the constraint normalization of the quasilinear family is then exact to
rounding instead of quadrature accuracy, and the small-parameter limits of the
Coulomb family remain resolved.

All strictness claims are reported as signed margins with an explicit additive
tolerance; a numerical margin is evidence, not a proof.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .energy import (
    ProblemSpec,
    constraint_value,
    coulomb_energy,
    dirichlet_energy,
    total_energy,
)
from .grid import Field, GridSpec, line_grid, lp_norm, radial_grid, resample
from .solve import SolveConfig, SolveResult, minimize_constrained, project_to_constraint

__all__ = [
    "MCCurve",
    "CCReport",
    "HomogeneityReport",
    "CertificateScan",
    "Rho0Estimate",
    "scan_mass_curve",
    "check_monotone",
    "check_subadditivity",
    "homogeneity_bound_check",
    "certificate_choquard",
    "certificate_quasilinear",
    "estimate_rho0",
    "decay_check",
    "inequality_audit",
    "AuditReport",
    "sharp_hls_constant",
    "tail_mass",
]


@dataclass(frozen=True)
class MCCurve:
    """Sampled mass-energy curve with per-point solve metadata."""

    c_values: tuple[float, ...]
    m_values: tuple[float, ...]
    betas: tuple[Optional[float], ...]
    iterations: tuple[int, ...]
    converged: tuple[bool, ...]

    def __post_init__(self):
        n = len(self.c_values)
        if not all(len(t) == n for t in (self.m_values, self.betas, self.iterations, self.converged)):
            raise ValueError("curve columns must have equal length")
        if any(c <= 0 for c in self.c_values):
            raise ValueError("constraint levels must be positive")
        if any(b >= a for a, b in zip(self.c_values[1:], self.c_values[:-1])):
            raise ValueError("constraint levels must be strictly increasing")

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("c,m,beta,iters,converged\n")
            for c, m, b, it, ok in zip(
                self.c_values, self.m_values, self.betas, self.iterations, self.converged
            ):
                btxt = f"{b:.16e}" if b is not None else "nan"
                fh.write(f"{c:.16e},{m:.16e},{btxt},{it},{int(ok)}\n")

    def interpolator(self, zero_at_origin: bool = True):
        """Linear interpolation in c, pinned to m(0) = 0 at the origin."""
        cs = np.asarray(self.c_values)
        ms = np.asarray(self.m_values)
        if zero_at_origin:
            cs = np.concatenate(([0.0], cs))
            ms = np.concatenate(([0.0], ms))
        return lambda x: np.interp(x, cs, ms)


@dataclass
class CCReport:
    """Monotonicity and subadditivity findings for one curve."""

    monotone: Optional[bool] = None
    monotone_worst: Optional[tuple[float, float, float]] = None  # (c1, c2, defect)
    subadditive: Optional[bool] = None
    subadditive_worst: Optional[tuple[float, float, float]] = None  # (c, lambda, defect)
    strict_margin: Optional[float] = None
    notes: str = ""

    def to_text(self, path) -> None:
        rows = []
        for key in ("monotone", "subadditive"):
            val = getattr(self, key)
            rows.append(f"{key} = {val}")
        if self.monotone_worst is not None:
            c1, c2, d = self.monotone_worst
            rows.append(f"monotone_worst = {c1:.16e},{c2:.16e},{d:.16e}")
        if self.subadditive_worst is not None:
            c, lam, d = self.subadditive_worst
            rows.append(f"subadditive_worst = {c:.16e},{lam:.16e},{d:.16e}")
        if self.strict_margin is not None:
            rows.append(f"strict_margin = {self.strict_margin:.16e}")
        rows.append(f"notes = {self.notes}")
        with open(path, "w") as fh:
            fh.write("\n".join(rows) + "\n")


def default_curve_tol(m_values) -> float:
    """Additive slack absorbing solver error: 1e-6 times the curve scale."""
    scale = max((abs(m) for m in m_values), default=0.0)
    return 1e-6 * max(scale, 1e-12)


def scan_mass_curve(
    p: ProblemSpec,
    c_list: Sequence[float],
    cfg: SolveConfig = SolveConfig(),
    n_starts: int = 3,
    keep_minimizers: bool = False,
):
    """One constrained solve per level, warm-started along the sweep.

    Each level runs ``n_starts`` flows (the previous minimizer rescaled onto
    the new level, plus seeded fresh starts) and keeps the lowest energy.
    Non-converged points are flagged in the curve, not fatal.
    """
    if len(c_list) == 0:
        raise ValueError("c_list must be nonempty")
    cs = [float(c) for c in c_list]
    if any(c <= 0 for c in cs) or any(nxt <= prev for prev, nxt in zip(cs[:-1], cs[1:])):
        raise ValueError("c_list must be positive and ascending")
    results: list[SolveResult] = []
    prev: Optional[Field] = None
    for c in cs:
        starts: list[Optional[Field]] = []
        if prev is not None:
            starts.append(project_to_constraint(p, prev, c))
        while len(starts) < max(1, n_starts):
            starts.append(None)
        best: Optional[SolveResult] = None
        for i, init in enumerate(starts):
            res = minimize_constrained(p, c, replace(cfg, seed=cfg.seed + i), init=init)
            if best is None or res.m_value < best.m_value:
                best = res
        results.append(best)
        prev = best.minimizer
    curve = MCCurve(
        c_values=tuple(cs),
        m_values=tuple(r.m_value for r in results),
        betas=tuple(r.beta for r in results),
        iterations=tuple(r.iterations for r in results),
        converged=tuple(r.converged for r in results),
    )
    if keep_minimizers:
        return curve, results
    return curve


def check_monotone(curve: MCCurve, tol: float) -> CCReport:
    """Non-increase of m over all ordered pairs of curve points (with slack tol)."""
    if len(curve.c_values) < 2:
        raise ValueError("need at least two curve points")
    worst = None
    for i, c1 in enumerate(curve.c_values):
        for j in range(i + 1, len(curve.c_values)):
            defect = curve.m_values[j] - curve.m_values[i]
            if worst is None or defect > worst[2]:
                worst = (c1, curve.c_values[j], defect)
    return CCReport(
        monotone=bool(worst[2] <= tol),
        monotone_worst=worst,
        notes="pairwise non-increase check",
    )


def check_subadditivity(
    curve: MCCurve,
    m_inf: Optional[MCCurve],
    tol: float,
    include_zero_endpoint: bool = True,
) -> CCReport:
    """Large inequalities m(c) <= m(lambda) + m_inf(c - lambda) over curve pairs.

    ``m_inf = None`` means the constant-zero curve (translation-invariant
    problems with vanishing limit coupling), in which case the check reduces
    to monotonicity.  The strict margin is the minimum over pairs of
    m(lambda) + m_inf(c - lambda) - m(c); positive margin is numerical
    evidence for the strict inequalities.
    """
    inf_interp = (lambda x: np.zeros_like(np.asarray(x, dtype=float))) if m_inf is None else m_inf.interpolator()
    worst = None
    lambdas_of = {}
    for i, c in enumerate(curve.c_values):
        lams = [curve.c_values[j] for j in range(len(curve.c_values)) if curve.c_values[j] < c]
        if include_zero_endpoint:
            lams = [0.0] + lams
        lambdas_of[i] = lams
        for lam in lams:
            m_lam = 0.0 if lam == 0.0 else curve.m_values[curve.c_values.index(lam)]
            rhs = m_lam + float(inf_interp(c - lam))
            defect = curve.m_values[i] - rhs
            if worst is None or defect > worst[2]:
                worst = (c, lam, defect)
    if worst is None:
        raise ValueError("no comparable (c, lambda) pairs in the curve")
    mono = check_monotone(curve, tol) if len(curve.c_values) >= 2 else CCReport()
    return CCReport(
        monotone=mono.monotone,
        monotone_worst=mono.monotone_worst,
        subadditive=bool(worst[2] <= tol),
        subadditive_worst=worst,
        strict_margin=-worst[2],
        notes="m_inf = 0" if m_inf is None else "m_inf interpolated from sampled curve",
    )


@dataclass(frozen=True)
class HomogeneityReport:
    alpha: float
    pairs_checked: int
    violations: tuple[tuple[float, float, float], ...]  # (c, lambda, defect)

    @property
    def passed(self) -> bool:
        return not self.violations


def homogeneity_bound_check(curve: MCCurve, alpha: float, tol: Optional[float] = None) -> HomogeneityReport:
    """Check m(lambda c) <= lambda^alpha m(c) on curve pairs with lambda >= 1."""
    if alpha < 1:
        raise ValueError("homogeneity exponent must be >= 1")
    if tol is None:
        tol = default_curve_tol(curve.m_values)
    cs = np.asarray(curve.c_values)
    violations = []
    pairs = 0
    for i, c in enumerate(cs):
        for j, cl in enumerate(cs):
            lam = cl / c
            if lam < 1.0 - 1e-12:
                continue
            # only compare points that are genuine multiples on the sampled grid
            if abs(round(lam) - lam) > 1e-9 and abs(lam - 1.0) > 1e-12:
                continue
            pairs += 1
            defect = curve.m_values[j] - lam**alpha * curve.m_values[i]
            if defect > tol:
                violations.append((float(c), float(lam), float(defect)))
    if pairs == 0:
        raise ValueError("curve contains no (c, lambda c) pairs with lambda >= 1")
    return HomogeneityReport(alpha=alpha, pairs_checked=pairs, violations=tuple(violations))


# ---------------------------------------------------------------------------
# Negativity certificates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CertificateScan:
    """Scan of a one-parameter test family: exact energies and an upper bound."""

    params: tuple[float, ...]
    exact: tuple[float, ...]
    bound: tuple[float, ...]
    best_param: float
    best_value: float
    succeeded: bool
    constraint_dev: float = 0.0

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("param,exact,bound\n")
            for t, e, b in zip(self.params, self.exact, self.bound):
                fh.write(f"{t:.16e},{e:.16e},{b:.16e}\n")


def _adapted_radial(grid: GridSpec, factor: float) -> GridSpec:
    return radial_grid(grid.dim, grid.extent[0] * factor, grid.counts[0])


def _adapted_1d(grid: GridSpec, factor: float) -> GridSpec:
    if grid.kind == "radial":
        return _adapted_radial(grid, factor)
    return line_grid(grid.extent[0] * factor, grid.counts[0])


def certificate_choquard(
    p: ProblemSpec,
    c: float,
    w_seed: Field,
    t_grid: Sequence[float],
) -> CertificateScan:
    """Negativity certificate from the norm-preserving rescalings of a seed.

    For each t the exact energy of w_t(x) = t^{3/2} w(tx) is evaluated on a
    grid whose extent is stretched by 1/t (node-exact rescaling), alongside
    the upper bound C t^6 |w|_6^6 + C t^2 |grad w|_2^2 - t D(w).  The
    certificate succeeds when the best exact value is negative.
    """
    if p.family != "choquard":
        raise ValueError("certificate_choquard needs a choquard problem")
    mass = lp_norm(w_seed, 2.0) ** 2
    if abs(mass - c) > 1e-6 * c:
        raise ValueError("seed must satisfy |w|_2^2 = c")
    C = p.lagrangians[0].growth_C
    s6 = lp_norm(w_seed, 6.0) ** 6
    dir_w = dirichlet_energy(w_seed)
    d_w = coulomb_energy(w_seed)
    ts, exacts, bounds = [], [], []
    for t in t_grid:
        t = float(t)
        if t <= 0:
            raise ValueError("t grid must be positive")
        g_t = _adapted_radial(p.grid, 1.0 / t)
        w_t = resample(w_seed, t, "mass_preserving", target=g_t)
        exact = total_energy(replace(p, grid=g_t), w_t).total
        bound = C * t**6 * s6 + C * t**2 * dir_w - t * d_w
        ts.append(t)
        exacts.append(exact)
        bounds.append(bound)
    k = int(np.argmin(exacts))
    return CertificateScan(
        params=tuple(ts),
        exact=tuple(exacts),
        bound=tuple(bounds),
        best_param=ts[k],
        best_value=exacts[k],
        succeeded=bool(exacts[k] < 0.0),
    )


def certificate_quasilinear(p: ProblemSpec, theta_grid: Sequence[float]) -> CertificateScan:
    """Negativity certificate from normalized stretched exponentials.

    The test family is theta^{N/p^2} d^{-1/p} exp(-theta |x|^p) in the first
    component (d the discrete normalizer), evaluated on theta-adapted grids so
    the unit constraint holds to rounding for every theta.  The reported bound
    is the small-theta envelope theta*(C - theta^{(N sigma + p tau - p^2)/p^2} C'),
    meaningful when the coupling carries the (mu_F, tau, sigma) record.
    """
    if p.family != "quasilinear":
        raise ValueError("certificate_quasilinear needs a quasilinear problem")
    q = p.constraint.homogeneity
    if q is None:
        raise ValueError("certificate needs a homogeneous first-component constraint")
    pexp = float(q)
    N = p.grid.dim
    base = p.grid
    x0 = np.abs(base.axis(0)) if base.kind == "line" else base.axis(0)
    W0 = base.weights()
    seed_vals = np.exp(-(x0**pexp))
    d = float(np.dot(W0, p.constraint.g(seed_vals)))
    nl = p.nonlinearity
    params = nl.params if nl is not None else {}
    have_record = all(k in params for k in ("mu_F", "tau", "sigma"))
    if have_record:
        tau = float(params["tau"])
        sigma = float(params["sigma"])
        mu_F = float(params["mu_F"])
        r0 = float(params.get("r0", 1.0))
        lag = p.lagrangians[0]
        c_upper = lag.cap_beta * pexp**pexp / d * float(
            np.dot(W0, np.exp(-pexp * x0**pexp) * x0 ** (pexp * (pexp - 1.0)))
        )
        far = x0 >= r0
        c_lower = mu_F * d ** (-(sigma + pexp) / pexp) * float(
            np.dot(
                W0[far],
                x0[far] ** (-tau) * np.exp(-(sigma + pexp) * x0[far] ** pexp),
            )
        )
        exponent = (N * sigma + pexp * tau) / pexp**2
        envelope = lambda th: th * c_upper - th**exponent * c_lower
    else:
        envelope = lambda th: math.nan

    ts, exacts, bounds = [], [], []
    devs = []
    for th in theta_grid:
        th = float(th)
        if th <= 0:
            raise ValueError("theta grid must be positive")
        factor = th ** (-1.0 / pexp)
        g_t = _adapted_1d(base, factor)
        x_t = np.abs(g_t.axis(0)) if g_t.kind == "line" else g_t.axis(0)
        top = th ** (N / pexp**2) / d ** (1.0 / pexp) * np.exp(-th * x_t**pexp)
        vals = np.zeros((p.m, g_t.num_nodes))
        vals[0] = top
        u = Field(g_t, vals)
        p_t = replace(p, grid=g_t)
        bd = total_energy(p_t, u)
        devs.append(abs(bd.constraint_value - 1.0))
        ts.append(th)
        exacts.append(bd.total)
        bounds.append(envelope(th))
    k = int(np.argmin(exacts))
    return CertificateScan(
        params=tuple(ts),
        exact=tuple(exacts),
        bound=tuple(bounds),
        best_param=ts[k],
        best_value=exacts[k],
        succeeded=bool(exacts[k] < 0.0),
        constraint_dev=float(max(devs)),
    )


@dataclass(frozen=True)
class Rho0Estimate:
    rho0: float
    bracket: tuple[float, float]
    m_at_bracket: tuple[float, float]
    evaluations: tuple[tuple[float, float], ...]
    tol: float


def estimate_rho0(
    p: ProblemSpec,
    rho_bracket: tuple[float, float],
    cfg: SolveConfig = SolveConfig(),
    rel_width: float = 0.01,
    tol: Optional[float] = None,
) -> Rho0Estimate:
    """Bisect for the constraint level where the infimum turns negative.

    Maintains m(lo) >= -tol and m(hi) <= -tol while narrowing the bracket to
    the requested relative width; each evaluation is a warm-started solve.
    """
    lo, hi = float(rho_bracket[0]), float(rho_bracket[1])
    if not 0 < lo < hi:
        raise ValueError("need 0 < lo < hi")
    cache: dict[float, SolveResult] = {}

    def concentrated_init(rho: float) -> Field:
        # off-axis torus bump: seeds the self-binding basin when it exists
        s, w = p.grid.coords()
        sig = min(p.grid.extent) / 16.0
        s0 = min(p.grid.extent) / 8.0
        prof = np.exp(-(((s - s0) ** 2 + w**2)) / sig**2)
        return project_to_constraint(p, Field(p.grid, prof), rho)

    def m_at(rho: float) -> float:
        if rho not in cache:
            # try both basins: rescaled minimizers from the nearest cached
            # levels on each side, plus default and concentrated starts
            inits = [None]
            if not cache:
                inits.append(concentrated_init(rho))
            below = [r for r in cache if r <= rho]
            above = [r for r in cache if r > rho]
            if below:
                inits.append(project_to_constraint(p, cache[max(below)].minimizer, rho))
            if above:
                inits.append(project_to_constraint(p, cache[min(above)].minimizer, rho))
            best = None
            for init in inits:
                res = minimize_constrained(p, rho, cfg, init=init)
                if best is None or res.m_value < best.m_value:
                    best = res
            cache[rho] = best
        return cache[rho].m_value

    m_hi = m_at(hi)
    if tol is None:
        tol = 1e-6 * max(abs(m_hi), 1e-12)
    if not m_hi <= -tol:
        raise ValueError(f"m at the right bracket end is not negative (m={m_hi:.3e})")
    m_lo = m_at(lo)
    if m_lo <= -tol:
        raise ValueError("no sign change in bracket: m is already negative at the left end")
    while (hi - lo) > rel_width * 0.5 * (hi + lo):
        mid = 0.5 * (lo + hi)
        if m_at(mid) <= -tol:
            hi = mid
        else:
            lo = mid
    evals = tuple(sorted((r, res.m_value) for r, res in cache.items()))
    return Rho0Estimate(
        rho0=0.5 * (lo + hi),
        bracket=(lo, hi),
        m_at_bracket=(m_at(lo), m_at(hi)),
        evaluations=evals,
        tol=tol,
    )


# ---------------------------------------------------------------------------
# Decay and inequality audits
# ---------------------------------------------------------------------------


def decay_check(u: Field, N: int, p: float, component: int = 0, tol: float = 1e-9) -> float:
    """Largest r^{N/p} u(r) over the grid for a nonnegative decreasing profile.

    The value itself is always finite on a grid; the diagnostic content is its
    stability under refinement and consistency with the L^p norm.
    """
    g = u.grid
    if g.kind == "cylindrical":
        raise ValueError("decay_check supports line and radial grids")
    vals = u.component(component)
    scale = float(np.max(np.abs(vals))) or 1.0
    if np.any(vals < -tol * scale):
        raise ValueError("profile must be nonnegative")
    r = np.abs(g.axis(0))
    if g.kind == "line":
        half = vals[g.num_nodes // 2 :]
        if np.max(np.diff(half)) > tol * scale:
            raise ValueError("profile must be non-increasing in |x|")
    else:
        if np.max(np.diff(vals)) > tol * scale:
            raise ValueError("profile must be non-increasing in r")
    return float(np.max(r ** (N / p) * vals))


def sharp_hls_constant(N: int = 3, lam: float = 1.0) -> float:
    """Best constant in the double-integral inequality with kernel |x-y|^-lam.

    Closed form for the diagonal exponents p = q = 2N/(2N - lam):
    pi^{lam/2} * Gamma(N/2 - lam/2)/Gamma(N - lam/2) * (Gamma(N/2)/Gamma(N))^{lam/N - 1}.
    """
    g = math.gamma
    return (
        math.pi ** (lam / 2.0)
        * g(N / 2.0 - lam / 2.0)
        / g(N - lam / 2.0)
        * (g(N / 2.0) / g(N)) ** (lam / N - 1.0)
    )


@dataclass(frozen=True)
class AuditReport:
    q1: float
    q2: float
    q3: float
    hls_constant: float

    @property
    def hls_ok(self) -> bool:
        return self.q1 <= self.hls_constant * (1.0 + 1e-9)


def inequality_audit(u: Field) -> AuditReport:
    """Quotients of the functional inequalities used by the continuity estimates.

    q1 = D(u) / |u|_{12/5}^4            (kernel inequality, sharp constant known)
    q2 = |u|_{12/5}^4 / (|u|_2^3 |u|_{H1})
    q3 = |u|_{10/3}^{10/3} / (|u|_2^{4/3} |grad u|_2^2)   (scale invariant)
    """
    g = u.grid
    if not (g.kind == "radial" and g.dim == 3):
        raise ValueError("inequality_audit needs a radial grid in R^3")
    if not np.any(u.values != 0.0):
        raise ValueError("audit needs a nonzero field")
    l2 = lp_norm(u, 2.0)
    l125 = lp_norm(u, 12.0 / 5.0)
    l103 = lp_norm(u, 10.0 / 3.0)
    dir2 = dirichlet_energy(u)
    h1 = math.sqrt(l2**2 + dir2)
    d = coulomb_energy(u)
    q1 = d / l125**4
    q2 = l125**4 / (l2**3 * h1)
    q3 = l103 ** (10.0 / 3.0) / (l2 ** (4.0 / 3.0) * dir2)
    return AuditReport(q1=q1, q2=q2, q3=q3, hls_constant=sharp_hls_constant(3, 1.0))


def tail_mass(u: Field, R: float, component: int = 0, window: float = 1.0) -> tuple[float, float]:
    """Tail diagnostics beyond radius R: total tail mass and worst local mass.

    Returns (integral of u^2 over |x| > R, max over tail nodes of the u^2 mass
    inside a coordinate window of half-width ``window`` around the node).  The
    local column is a grid substitute for ball-localized mass; no vanishing
    conclusion is drawn from it.
    """
    g = u.grid
    W = g.weights()
    v2 = u.component(component) ** 2
    r = g.radii()
    tail = r > R
    total = float(np.dot(W[tail], v2[tail]))
    worst = 0.0
    if np.any(tail):
        if g.kind == "cylindrical":
            s, w = g.coords()
            centers = np.nonzero(tail)[0]
            # subsample centers to keep the scan cheap
            for idx in centers[:: max(1, len(centers) // 256)]:
                box = (np.abs(s - s[idx]) <= window) & (np.abs(w - w[idx]) <= window)
                worst = max(worst, float(np.dot(W[box], v2[box])))
        else:
            x = g.axis(0)
            centers = np.nonzero(tail)[0]
            for idx in centers[:: max(1, len(centers) // 256)]:
                box = np.abs(x - x[idx]) <= window
                worst = max(worst, float(np.dot(W[box], v2[box])))
    return total, worst
