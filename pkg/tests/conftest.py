import numpy as np
import pytest

from massmin import (
    Field,
    line_grid,
    make_constraint,
    make_lagrangian,
    make_nonlinearity,
    make_problem,
    radial_grid,
)


@pytest.fixture(scope="session")
def radial3():
    return radial_grid(3, 20.0, 2048)


@pytest.fixture(scope="session")
def line4096():
    return line_grid(40.0, 4096)


@pytest.fixture(scope="session")
def choquard_problem(radial3):
    return make_problem(
        "choquard", radial3, make_lagrangian("j_quadratic"), make_constraint("G_square")
    )


@pytest.fixture(scope="session")
def stuart_problem(line4096):
    return make_problem(
        "stuart",
        line4096,
        make_lagrangian("j_quadratic"),
        make_constraint("G_square"),
        make_nonlinearity("F_power", A=1.0, d=1.0, alpha=0.5, r0=1.0, delta=1e-2),
    )


def random_smooth_field(grid, rng, n_bumps=4):
    """Superposition of random Gaussians; smooth, sign-changing, decaying."""
    r = grid.axis(0)
    vals = np.zeros_like(r)
    lo = 0.0 if grid.kind != "line" else -0.3 * grid.extent[0]
    hi = 0.3 * grid.extent[0] if grid.kind == "line" else 0.25 * grid.extent[0]
    for _ in range(n_bumps):
        vals += rng.uniform(-1, 1) * np.exp(
            -(((r - rng.uniform(lo, hi)) / rng.uniform(1.0, 4.0)) ** 2)
        )
    return Field(grid, vals)
