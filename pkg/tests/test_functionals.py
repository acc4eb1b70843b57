import math

import numpy as np
import pytest

from invsqnls import functionals as fn
from invsqnls.params_grid import ComplexRadialField, PhysicalParams, build_grid

PI32 = math.pi**1.5


def test_gaussian_closed_forms(par3, grid_run):
    # u = e^(-r^2/2) in N = 3: every functional has a closed form
    u = ComplexRadialField.from_callable(grid_run, lambda r: np.exp(-(r**2) / 2.0))
    rep = fn.functional_report(u, par3)
    c = par3.coupling_c
    a = (par3.exponent_p + 1.0) / 2.0
    assert rep.mass_sq == pytest.approx(PI32, rel=5e-6)
    assert rep.grad_sq == pytest.approx(1.5 * PI32, rel=5e-6)
    assert rep.hardy_term == pytest.approx(2.0 * PI32, rel=5e-6)
    assert rep.hardy_h == pytest.approx((1.5 - 2.0 * c) * PI32, rel=5e-6)
    assert rep.lp1 == pytest.approx(PI32 / a**1.5, rel=5e-6)
    expected_e = 0.5 * (1.5 - 2.0 * c) * PI32 - PI32 / a**1.5 / (par3.exponent_p + 1.0)
    assert rep.energy == pytest.approx(expected_e, rel=5e-6)


def _structured(grid, lam=1.0, mu=1.0):
    s = grid.sigma
    return ComplexRadialField.from_callable(
        grid,
        lambda r: mu
        * (lam * r) ** s
        * (np.exp(-((lam * r) ** 2)) + 0.5 * np.exp(-(((lam * r) - 1.0) ** 2))),
    )


def test_scaling_laws(par3, grid_run, rng):
    # fields with the exact r^sigma origin structure scale to near
    # machine precision; mass ~ mu^2 lam^-N etc. in the weighted sense
    base = fn.functional_report(_structured(grid_run), par3)
    ndim = par3.dim_n
    p = par3.exponent_p
    for _ in range(20):
        lam = float(rng.uniform(0.5, 2.0))
        mu = float(rng.uniform(0.25, 4.0))
        rep = fn.functional_report(_structured(grid_run, lam, mu), par3)
        assert rep.mass_sq == pytest.approx(
            mu**2 * lam**-ndim * base.mass_sq, rel=1e-7
        )
        assert rep.grad_sq == pytest.approx(
            mu**2 * lam ** (2 - ndim) * base.grad_sq, rel=1e-7
        )
        assert rep.hardy_h == pytest.approx(
            mu**2 * lam ** (2 - ndim) * base.hardy_h, rel=1e-7
        )
        assert rep.lp1 == pytest.approx(
            mu ** (p + 1) * lam**-ndim * base.lp1, rel=1e-7
        )


def test_weinstein_scale_invariance(par3, grid_run, rng):
    j0 = fn.weinstein_j(_structured(grid_run), par3)
    for _ in range(20):
        lam = float(rng.uniform(0.5, 2.0))
        mu = float(rng.uniform(0.25, 4.0))
        j = fn.weinstein_j(_structured(grid_run, lam, mu), par3)
        assert j == pytest.approx(j0, rel=1e-7)


def test_hardy_sandwich(par3, grid_run, rng):
    frac = 1.0 - par3.coupling_c / par3.c_star
    for _ in range(20):
        lam = float(rng.uniform(0.5, 2.0))
        rep = fn.functional_report(_structured(grid_run, lam), par3)
        assert rep.hardy_h <= rep.grad_sq * (1.0 + 1e-12)
        assert rep.hardy_h >= frac * rep.grad_sq * (1.0 - 1e-12)


def test_zero_field_raises(par3, grid_run):
    zero = ComplexRadialField(
        grid=grid_run, values=np.zeros(grid_run.nodes.size, dtype=complex)
    )
    with pytest.raises(ValueError, match="zero-field"):
        fn.weinstein_j(zero, par3)
    assert fn.mass(zero, par3) == 0.0


def test_form_matrix_matches_hardy(par3, grid_run, rng):
    form = fn.hamiltonian_form_matrix(grid_run)
    gap = form - form.T
    assert abs(gap).max() < 1e-13 * abs(form).max()
    s = grid_run.sigma
    for _ in range(5):
        a, b = rng.uniform(0.5, 2.0, 2)
        u = ComplexRadialField.from_callable(
            grid_run,
            lambda r: r**s * (a + 1j * b * r / (1.0 + r)) * np.exp(-(r**2)),
        )
        quad = float(np.real(np.conj(u.values) @ (form @ u.values)))
        rep = fn.functional_report(u, par3)
        assert quad == pytest.approx(rep.hardy_h, rel=1e-11)


def test_apply_linear_operator_consistent(par3, grid_run):
    s = grid_run.sigma
    u = ComplexRadialField.from_callable(grid_run, lambda r: r**s * np.exp(-(r**2)))
    form = fn.hamiltonian_form_matrix(grid_run)
    lu = fn.apply_linear_operator(u)
    quad = float(np.real(np.conj(u.values) @ (grid_run.quad_weights * lu.values)))
    direct = float(np.real(np.conj(u.values) @ (form @ u.values)))
    assert quad == pytest.approx(direct, rel=1e-11)


def test_gn_inequality_check(par3, grid_run, gs_run):
    slack_q = fn.gn_inequality_check(gs_run.as_field(), par3, gs_run.alpha)
    assert abs(slack_q) < 1e-6 * gs_run.alpha
    gauss = ComplexRadialField.from_callable(
        grid_run, lambda r: np.exp(-(r**2) / 2.0)
    )
    assert fn.gn_inequality_check(gauss, par3, gs_run.alpha) > 0.0
    with pytest.raises(ValueError):
        fn.gn_inequality_check(gauss, par3, -1.0)


def test_report_to_dict(par3, grid_run):
    u = ComplexRadialField.from_callable(grid_run, lambda r: np.exp(-(r**2)))
    d = fn.functional_report(u, par3).to_dict()
    for key in ("mass_sq", "grad_sq", "hardy_term", "hardy_h", "lp1", "energy"):
        assert isinstance(d[key], float)
