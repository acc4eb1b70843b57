import math

import numpy as np
import pytest

from invsqnls.params_grid import (
    ComplexRadialField,
    PhysicalParams,
    build_grid,
    indicial_exponent,
)


def test_hardy_constant_closed_form():
    for ndim in (3, 4, 5, 6):
        par = PhysicalParams.critical(ndim, 0.0)
        assert par.c_star == 0.25 * (ndim - 2) ** 2
        assert par.p_critical == 1.0 + 4.0 / ndim


def test_indicial_exponent_values():
    # sigma = -(N-2)/2 + sqrt(c* - c)
    assert indicial_exponent(3, 0.0) == 0.0
    got = indicial_exponent(3, 0.125)
    assert got == pytest.approx(-0.5 + math.sqrt(0.125), rel=1e-15)
    got = indicial_exponent(4, 0.9)
    assert got == pytest.approx(-1.0 + math.sqrt(0.1), rel=1e-14)


def test_params_validation():
    with pytest.raises(ValueError, match=r"\(N-2\)\^2/4"):
        PhysicalParams(3, 0.3, 2.0)
    with pytest.raises(ValueError):
        PhysicalParams(3, -0.1, 2.0)
    with pytest.raises(ValueError):
        PhysicalParams(2, 0.0, 2.0)
    with pytest.raises(ValueError):
        PhysicalParams(3, 0.1, 6.0)
    par = PhysicalParams.critical(4, 0.25)
    assert par.exponent_p == 2.0
    assert par.is_critical


def test_quadrature_monomial_accuracy(par3):
    # positivity repair near the origin trades strict monomial
    # exactness for positive weights; the residual sits at 1e-9
    grid = build_grid(par3, 512, 10.0)
    r_max = grid.nodes[-1]
    for mu in (2.0, 2.0 * grid.sigma + 2.0, 2.0 * grid.sigma):
        w = grid.power_weights(mu)
        for k in range(4):
            exact = r_max ** (mu + k + 1) / (mu + k + 1)
            got = float(w @ grid.nodes**k)
            assert got == pytest.approx(exact, rel=1e-8)


def test_quadrature_positive(grid_small):
    ndim = grid_small.params.dim_n
    s = grid_small.sigma
    for mu in (2 * s + ndim - 1, 2 * s + ndim - 3, 2 * s + ndim + 1):
        assert np.all(grid_small.power_weights(mu) > 0.0)


def test_gaussian_integral(grid_run):
    # int_0^inf r^(N-1) e^(-r^2) dr = Gamma(N/2)/2
    ndim = grid_run.params.dim_n
    w = grid_run.power_weights(float(ndim - 1))
    got = float(w @ np.exp(-grid_run.nodes**2))
    assert got == pytest.approx(math.gamma(ndim / 2.0) / 2.0, rel=5e-9)


def test_radial_derivative_accuracy(grid_run):
    r = grid_run.nodes
    f = np.exp(-(r**2)) * r**2
    df_exact = np.exp(-(r**2)) * (2.0 * r - 2.0 * r**3)
    df = grid_run.radial_derivative(f)
    assert np.max(np.abs(df - df_exact)) < 1e-8


def test_log_mesh_ratio(par3):
    grid = build_grid(par3, 1024, 30.0, mesh_kind="logarithmic", r_min=1e-4)
    ratios = grid.nodes[1:] / grid.nodes[:-1]
    assert np.max(ratios) <= 1.03
    auto = build_grid(par3, 1024, 30.0, mesh_kind="logarithmic")
    assert auto.nodes[0] > 0.0
    with pytest.raises(ValueError):
        build_grid(par3, 64, 30.0, mesh_kind="logarithmic", r_min=1e-12)


def test_build_grid_validation(par3):
    with pytest.raises(ValueError):
        build_grid(par3, 8, 30.0)
    with pytest.raises(ValueError):
        build_grid(par3, 256, -1.0)
    with pytest.raises(ValueError):
        build_grid(par3, 256, 30.0, mesh_kind="chebyshev")


def test_field_validation(grid_small):
    with pytest.raises(ValueError):
        ComplexRadialField(grid=grid_small, values=np.ones(7, dtype=complex))
    bad = np.ones(grid_small.nodes.size, dtype=complex)
    bad[3] = np.nan
    with pytest.raises(ValueError):
        ComplexRadialField(grid=grid_small, values=bad)
    u = ComplexRadialField.from_callable(grid_small, lambda r: np.exp(-r))
    v = u.copy(time=2.5)
    assert v.time == 2.5
    assert v.values is not u.values
    np.testing.assert_array_equal(v.values, u.values)


def test_resolution_guard(grid_small):
    with pytest.raises(ValueError, match="resample-out-of-range"):
        grid_small.assert_resolves_scale(1e9)
    grid_small.assert_resolves_scale(2.0)
