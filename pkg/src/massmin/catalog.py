"""Built-in Lagrangians, nonlinearities, and constraints, selectable by name.

Every entry is constructed from a name plus a flat parameter table, so problem
definitions can live in config files.  All evaluators are vectorized over
numpy arrays.  Nonlinearities act on stacked component arrays of shape
(m, n_nodes) and receive the radial coordinate as first argument; separable
ones also expose their radial weight and profile factors, which the far-field
surgery uses to bracket energies over a support interval.
"""

from __future__ import annotations

import numpy as np

from .energy import Constraint, Lagrangian, Nonlinearity

__all__ = [
    "make_lagrangian",
    "make_nonlinearity",
    "make_constraint",
    "catalog_text",
    "LAGRANGIANS",
    "NONLINEARITIES",
    "CONSTRAINTS",
]

_PLAPLACE_EPS = 1e-12  # gradient regularization (|g|^2 + eps)^((p-2)/2)


def _j_quadratic(_params) -> Lagrangian:
    return Lagrangian(
        name="j_quadratic",
        j=lambda s, t: t**2,
        j_s=lambda s, t: np.zeros_like(np.asarray(s, dtype=float)),
        j_t_over_t=lambda s, t: np.full_like(np.asarray(t, dtype=float), 2.0),
        p=2.0,
        nu=1.0,
    )


def _j_plaplace(params) -> Lagrangian:
    p = float(params.get("p", 2.0))
    if p <= 1:
        raise ValueError("j_plaplace needs p > 1")

    def j(s, t):
        return np.asarray(t, dtype=float) ** p

    def j_t_over_t(s, t):
        return p * (np.asarray(t, dtype=float) ** 2 + _PLAPLACE_EPS) ** ((p - 2.0) / 2.0)

    return Lagrangian(
        name="j_plaplace",
        j=j,
        j_s=lambda s, t: np.zeros_like(np.asarray(s, dtype=float)),
        j_t_over_t=j_t_over_t,
        p=p,
        nu=1.0,
        params={"p": p},
    )


def _j_quad_plus_quartic(params) -> Lagrangian:
    a = float(params.get("a", 1.0))
    if a < 0:
        raise ValueError("j_quad_plus_quartic needs a >= 0")
    return Lagrangian(
        name="j_quad_plus_quartic",
        j=lambda s, t: t**2 * (1.0 + a * np.asarray(s, dtype=float) ** 2),
        j_s=lambda s, t: 2.0 * a * np.asarray(s, dtype=float) * np.asarray(t) ** 2,
        j_t_over_t=lambda s, t: 2.0 * (1.0 + a * np.asarray(s, dtype=float) ** 2),
        p=2.0,
        nu=1.0,
        params={"a": a},
    )


def _F_power(params) -> Nonlinearity:
    A = float(params.get("A", 1.0))
    d = float(params.get("d", 1.0))
    alpha = float(params.get("alpha", 0.5))
    r0 = float(params.get("r0", 1.0))
    delta = float(params.get("delta", 1e-2))
    q = 2.0 + alpha

    def weight(r):
        return A * (1.0 + np.asarray(r, dtype=float)) ** (-d)

    def profile(S):
        return np.abs(S[0]) ** q

    def F(r, S):
        return weight(r) * profile(S)

    def partials(r, S):
        return weight(r)[None, :] * (q * np.abs(S) ** (q - 1.0) * np.sign(S))

    return Nonlinearity(
        name="F_power",
        m=1,
        F=F,
        partials=partials,
        params={"A": A, "d": d, "alpha": alpha, "r0": r0, "delta": delta},
        radial_weight=weight,
        profile=profile,
    )


def _F_coupled(params) -> Nonlinearity:
    a0 = float(params.get("a0", 1.0))
    tau = float(params.get("tau", 0.0))
    sigma = float(params.get("sigma", 1.0))
    beta = float(params.get("beta", 0.0))
    p = float(params.get("p", 2.0))
    m = int(params.get("m", 1))
    if beta < 0:
        raise ValueError("F_coupled needs beta >= 0")
    q = p + sigma

    def weight(r):
        return a0 * (1.0 + np.asarray(r, dtype=float)) ** (-tau)

    def profile(S):
        S = np.abs(np.asarray(S, dtype=float))
        own = np.sum(S**q, axis=0)
        if m == 1 or beta == 0.0:
            return own / q
        half = S ** (q / 2.0)
        tot = np.sum(half, axis=0)
        cross = np.sum(half * (tot - half), axis=0)  # ordered pairs i != j
        return (own + 2.0 * beta * cross) / q

    def F(r, S):
        return weight(r) * profile(S)

    def partials(r, S):
        S = np.asarray(S, dtype=float)
        sgn = np.sign(S)
        A_ = np.abs(S)
        own = q * A_ ** (q - 1.0) * sgn
        if m == 1 or beta == 0.0:
            return weight(r)[None, :] * own / q
        half = A_ ** (q / 2.0)
        tot = np.sum(half, axis=0)
        cross = 2.0 * beta * q * A_ ** (q / 2.0 - 1.0) * sgn * (tot[None, :] - half)
        return weight(r)[None, :] * (own + cross) / q

    # lower-bound record for the first component: F >= mu_F r^-tau s^(sigma+p)
    mu_F = a0 * 2.0 ** (-tau) / q
    return Nonlinearity(
        name="F_coupled",
        m=m,
        F=F,
        partials=partials,
        params={
            "a0": a0,
            "tau": tau,
            "sigma": sigma,
            "beta": beta,
            "p": p,
            "m": m,
            "mu_F": mu_F,
            "delta": float(params.get("delta", 1.0)),
            "r0": float(params.get("r0", 1.0)),
        },
        radial_weight=weight,
        profile=profile,
    )


def _F_relu_power(params) -> Nonlinearity:
    A = float(params.get("A", 1.0))
    p = float(params.get("p", 4.0))

    def profile(S):
        return np.maximum(S[0], 0.0) ** p / p

    def F(r, S):
        del r
        return A * profile(S)

    def partials(r, S):
        del r
        return A * np.maximum(S, 0.0) ** (p - 1.0)

    return Nonlinearity(
        name="F_relu_power",
        m=1,
        F=F,
        partials=partials,
        params={"A": A, "p": p, "delta": float(params.get("delta", 1e-2)), "r0": 0.0},
        radial_weight=lambda r: A * np.ones_like(np.asarray(r, dtype=float)),
        profile=profile,
    )


def _F_saturating(params) -> Nonlinearity:
    """A t_+^p0 / (1 + t_+^(p0-pinf)): p0-power growth near zero, pinf at infinity."""
    A = float(params.get("A", 1.0))
    p0 = float(params.get("p0", 4.0))
    pinf = float(params.get("pinf", 3.0))
    if p0 <= pinf:
        raise ValueError("F_saturating needs p0 > pinf")
    d = p0 - pinf

    def profile(S):
        t = np.maximum(S[0], 0.0)
        return t**p0 / (1.0 + t**d)

    def F(r, S):
        del r
        return A * profile(S)

    def partials(r, S):
        del r
        t = np.maximum(S, 0.0)
        td = t**d
        return A * t ** (p0 - 1.0) * (p0 + pinf * td) / (1.0 + td) ** 2

    return Nonlinearity(
        name="F_saturating",
        m=1,
        F=F,
        partials=partials,
        params={"A": A, "p0": p0, "pinf": pinf, "delta": float(params.get("delta", 0.5)), "r0": 0.0},
        radial_weight=lambda r: A * np.ones_like(np.asarray(r, dtype=float)),
        profile=profile,
    )


def _G_square(_params) -> Constraint:
    return Constraint(
        name="G_square",
        g=lambda s: np.asarray(s, dtype=float) ** 2,
        g_prime=lambda s: 2.0 * np.asarray(s, dtype=float),
        gamma=1.0,
        p=2.0,
        homogeneity=2.0,
    )


def _G_power(params) -> Constraint:
    p = float(params.get("p", 2.0))
    if p < 1:
        raise ValueError("G_power needs p >= 1")
    return Constraint(
        name="G_power",
        g=lambda s: np.abs(s) ** p,
        g_prime=lambda s: p * np.abs(s) ** (p - 1.0) * np.sign(s),
        gamma=1.0,
        p=p,
        homogeneity=p,
    )


LAGRANGIANS = {
    "j_quadratic": (_j_quadratic, {}),
    "j_plaplace": (_j_plaplace, {"p": 2.0}),
    "j_quad_plus_quartic": (_j_quad_plus_quartic, {"a": 1.0}),
}

NONLINEARITIES = {
    "F_power": (_F_power, {"A": 1.0, "d": 1.0, "alpha": 0.5, "r0": 1.0, "delta": 1e-2}),
    "F_coupled": (_F_coupled, {"a0": 1.0, "tau": 0.0, "sigma": 1.0, "beta": 0.0, "p": 2.0, "m": 1}),
    "F_relu_power": (_F_relu_power, {"A": 1.0, "p": 4.0}),
    "F_saturating": (_F_saturating, {"A": 1.0, "p0": 4.0, "pinf": 3.0}),
}

CONSTRAINTS = {
    "G_square": (_G_square, {}),
    "G_power": (_G_power, {"p": 2.0}),
}


def _lookup(table, kind, name):
    try:
        return table[name]
    except KeyError:
        known = ", ".join(sorted(table))
        raise KeyError(f"unknown {kind} {name!r}; built-ins: {known}") from None


def make_lagrangian(name: str, **params) -> Lagrangian:
    builder, _ = _lookup(LAGRANGIANS, "Lagrangian", name)
    return builder(params)


def make_nonlinearity(name: str, **params) -> Nonlinearity:
    builder, _ = _lookup(NONLINEARITIES, "Nonlinearity", name)
    return builder(params)


def make_constraint(name: str, **params) -> Constraint:
    builder, _ = _lookup(CONSTRAINTS, "Constraint", name)
    return builder(params)


def catalog_text() -> str:
    """Stable, human-readable listing of all built-ins and their parameters."""
    lines = []
    for title, table in (
        ("Lagrangians", LAGRANGIANS),
        ("Nonlinearities", NONLINEARITIES),
        ("Constraints", CONSTRAINTS),
    ):
        lines.append(f"{title}:")
        for name in sorted(table):
            defaults = table[name][1]
            if defaults:
                args = ", ".join(f"{k}={v}" for k, v in sorted(defaults.items()))
                lines.append(f"  {name}({args})")
            else:
                lines.append(f"  {name}()")
    return "\n".join(lines) + "\n"
