import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from massmin import (
    Field,
    GridSpec,
    cylindrical_grid,
    dump_field_csv,
    integrate,
    line_grid,
    lp_norm,
    radial_derivative,
    radial_grid,
    resample,
)


def test_grid_validation():
    with pytest.raises(ValueError):
        radial_grid(3, 20.0, 8)  # below the per-axis node floor
    with pytest.raises(ValueError):
        GridSpec("radial", 3, (-1.0,), (64,))
    with pytest.raises(ValueError):
        cylindrical_grid(1, 3)  # k >= 2 required
    with pytest.raises(ValueError):
        GridSpec("banana", 3, (1.0,), (64,))


def test_cell_centered_nodes():
    g = radial_grid(3, 20.0, 2048)
    h = g.spacing[0]
    assert g.axis(0)[0] == pytest.approx(0.5 * h)
    gl = line_grid(40.0, 4096)
    x = gl.axis(0)
    assert np.allclose(x, -x[::-1])  # symmetric about 0
    gc = cylindrical_grid(2, 3, 10.0, 10.0, (64, 64))
    assert gc.axis(0)[0] > 0 and gc.axis(1)[0] > 0


def test_unit_ball_volume():
    g = radial_grid(3, 20.0, 2000)  # cell edge lands exactly on r = 1
    ball = Field.from_function(g, lambda r: (r <= 1.0).astype(float))
    assert integrate(ball) == pytest.approx(4 * math.pi / 3, rel=2e-3)


def test_gaussian_integral_radial():
    g = radial_grid(3, 20.0, 2048)
    f = Field.from_function(g, lambda r: np.exp(-(r**2)))
    assert integrate(f) == pytest.approx(math.pi**1.5, rel=1e-12)


def test_line_indicator_integral():
    g = line_grid(40.0, 4096)
    f = Field.from_function(g, lambda x: ((x >= 0) & (x <= 1)).astype(float))
    assert integrate(f) == pytest.approx(1.0, abs=2 * g.spacing[0])


def test_integrate_linear_to_machine_precision(radial3):
    rng = np.random.default_rng(0)
    r = radial3.axis(0)
    f = Field(radial3, np.exp(-(r**2)))
    g = Field(radial3, np.exp(-((r - 2) ** 2) / 4))
    a, b = -3.2, 1.7
    combo = Field(radial3, a * f.values + b * g.values)
    assert integrate(combo) == pytest.approx(a * integrate(f) + b * integrate(g), rel=1e-13)


def test_lp_norm_gaussian_and_homogeneity(radial3):
    f = Field.from_function(radial3, lambda r: np.exp(-(r**2)))
    assert lp_norm(f, 2) == pytest.approx((math.pi / 2) ** 0.75, rel=1e-12)
    scaled = Field(radial3, -3.0 * f.values)
    assert lp_norm(scaled, 2) == pytest.approx(3 * lp_norm(f, 2), rel=1e-13)
    zero = Field(radial3, np.zeros(radial3.num_nodes))
    assert lp_norm(zero, 2) == 0.0
    with pytest.raises(ValueError):
        lp_norm(f, 0.5)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1), st.sampled_from([2.0, 2.4, 6.0]))
def test_lp_triangle_inequality(seed, p):
    g = line_grid(10.0, 256)
    rng = np.random.default_rng(seed)
    x = g.axis(0)
    u = Field(g, rng.standard_normal(g.num_nodes) * np.exp(-(x**2) / 9))
    v = Field(g, rng.standard_normal(g.num_nodes) * np.exp(-(x**2) / 9))
    s = Field(g, u.values + v.values)
    assert lp_norm(s, p) <= lp_norm(u, p) + lp_norm(v, p) + 1e-12


def test_derivative_constant_and_linear(line4096):
    c = Field(line4096, np.full(line4096.num_nodes, 3.3))
    assert np.max(np.abs(radial_derivative(c).values)) < 1e-12
    lin = Field.from_function(line4096, lambda x: x)
    d = radial_derivative(lin).component(0)
    assert np.allclose(d, 1.0, atol=1e-10)


def test_derivative_refinement_second_order():
    errs = []
    for n in (512, 1024, 2048):
        g = radial_grid(3, 10.0, n)
        f = Field.from_function(g, lambda r: np.exp(-(r**2)))
        d = radial_derivative(f).component(0)
        exact = -2 * g.axis(0) * np.exp(-(g.axis(0) ** 2))
        errs.append(np.max(np.abs(d - exact)))
    assert errs[0] / errs[1] > 3.0
    assert errs[1] / errs[2] > 3.0


def test_derivative_cylindrical_magnitude():
    g = cylindrical_grid(2, 3, 8.0, 8.0, (128, 128))
    s, w = g.coords()
    f = Field(g, np.exp(-(s**2) - w**2))
    mag = radial_derivative(f).component(0)
    exact = np.hypot(-2 * s * np.exp(-(s**2) - w**2), -2 * w * np.exp(-(s**2) - w**2))
    assert np.max(np.abs(mag - exact)) < 5e-3


def test_resample_identity(radial3):
    f = Field.from_function(radial3, lambda r: np.exp(-(r**2)))
    same = resample(f, 1.0, "mass_preserving")
    assert np.allclose(same.values, f.values, atol=1e-13)
    with pytest.raises(ValueError):
        resample(f, -1.0, "mass_preserving")
    with pytest.raises(ValueError):
        resample(f, 1.0, "bogus")


def test_resample_mass_preserving_norm():
    g = radial_grid(3)  # default 4096-node grid
    f = Field.from_function(g, lambda r: np.exp(-((r / 3.0) ** 2)))
    n2 = lp_norm(f, 2) ** 2
    for t in (0.5, 2.0, 4.0):
        ft = resample(f, t, "mass_preserving")
        assert abs(lp_norm(ft, 2) ** 2 / n2 - 1.0) < 1e-6


def test_resample_dilation_mass_scaling():
    g = radial_grid(3, 20.0, 2048)
    target = radial_grid(3, 40.0, 4096)
    f = Field.from_function(g, lambda r: np.exp(-(r**2)))
    t = 2.0**3
    ft = resample(f, t, "dilation", target=target)
    assert lp_norm(ft, 2) ** 2 == pytest.approx(t * lp_norm(f, 2) ** 2, rel=1e-4)


def test_resample_derivative_chain():
    g = radial_grid(3, 20.0, 4096)
    f = Field.from_function(g, lambda r: np.exp(-(r**2)))
    t = 2.0
    ft = resample(f, t, "mass_preserving")
    d = radial_derivative(ft).component(0)
    r = g.axis(0)
    exact = t ** (3 / 2 + 1) * (-2 * (t * r) * np.exp(-((t * r) ** 2)))
    # derivative of interpolated data: first-order in h near curvature peaks
    assert np.max(np.abs(d - exact)) < 30 * g.spacing[0]


def test_field_validation(radial3):
    with pytest.raises(ValueError):
        Field(radial3, np.ones(7))
    bad = np.ones(radial3.num_nodes)
    bad[0] = np.inf
    with pytest.raises(ValueError):
        Field(radial3, bad)
    f = Field(radial3, np.ones(radial3.num_nodes))
    with pytest.raises(IndexError):
        f.component(1)
    with pytest.raises(ValueError):
        f.values[0, 0] = 2.0  # read-only storage


def test_dump_csv_roundtrip(tmp_path, line4096):
    f = Field.from_function(line4096, lambda x: np.exp(-(x**2)))
    path = tmp_path / "field.csv"
    dump_field_csv(f, path)
    rows = path.read_text().strip().split("\n")
    assert rows[0] == "coord1,component,value"
    data = np.array([[float(v) for v in row.split(",")] for row in rows[1:]])
    assert np.allclose(data[:, 0], line4096.axis(0))
    assert np.allclose(data[:, 2], f.component(0))


def test_dump_csv_cylindrical(tmp_path):
    g = cylindrical_grid(2, 3, 4.0, 4.0, (16, 16))
    f = Field(g, np.ones(g.num_nodes))
    path = tmp_path / "field.csv"
    dump_field_csv(f, path)
    header = path.read_text().split("\n", 1)[0]
    assert header == "coord1,coord2,component,value"


def test_cylindrical_quadrature_gaussian():
    # int over R^3 of exp(-|x|^2) via the (|y|, |z|) reduction, k = 2
    g = cylindrical_grid(2, 3, 12.0, 12.0, (512, 512))
    s, w = g.coords()
    f = Field(g, np.exp(-(s**2) - w**2))
    # second-order boundary error at the axis bounds the accuracy here
    assert integrate(f) == pytest.approx(math.pi**1.5, rel=1e-4)
