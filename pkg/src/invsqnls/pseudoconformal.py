"""The pseudo-conformal map and the exact minimal-mass blow-up family.

The family

    S(t, x) = e^{i gamma0} e^{i lambda0^2/(T-t)} e^{-i |x|^2/(4(T-t))}
              (lambda0/(T-t))^{N/2} Q(lambda0 x / (T-t))

is an exact solution blowing up at time T, obtained by applying the
pseudo-conformal transformation to the standing wave e^{it} Q.  It is
the oracle every evolution test measures against: mass stays pinned at
the ground-state mass, energy is conserved, and the gradient norm grows
like 1/(T-t).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.typing import NDArray
from scipy.interpolate import PchipInterpolator

from . import functionals as fn
from .ground_state import GroundState, resample_profile, scaled_ground_state
from .params_grid import ComplexRadialField
from .virial_diagnostics import variance

__all__ = [
    "BlowupFamilyParams",
    "exact_solution",
    "pseudo_conformal_transform",
    "standing_wave",
    "predicted_blowup_speed",
]


@dataclass(frozen=True)
class BlowupFamilyParams:
    """Parameters (T, lambda0, gamma0) of one member of the exact family."""

    blowup_time_T: float
    lambda0: float
    gamma0: float
    ground_state: GroundState

    def __post_init__(self) -> None:
        if not self.blowup_time_T > 0.0:
            raise ValueError(f"blow-up time must be positive, got {self.blowup_time_T}")
        if not self.lambda0 > 0.0:
            raise ValueError(f"lambda0 must be positive, got {self.lambda0}")


def exact_solution(fam: BlowupFamilyParams, t: float) -> ComplexRadialField:
    """Sample S(t, .) on the ground state's grid.

    Refuses t at or past T, and times whose focusing scale
    lambda0/(T-t) the grid cannot resolve (resample-out-of-range)
    rather than silently aliasing the profile.
    """
    big_t = fam.blowup_time_T
    if t >= big_t:
        raise ValueError(f"at-or-past-blowup: t = {t} >= T = {big_t}")
    gs = fam.ground_state
    grid = gs.grid
    lam = fam.lambda0 / (big_t - t)
    grid.assert_resolves_scale(lam)
    r = grid.nodes
    if lam * r[-1] < 10.0:
        raise ValueError(
            "resample-out-of-range: focusing scale too small, profile does "
            "not decay inside the grid"
        )
    prof = resample_profile(grid, gs.profile, lam * r)
    phase = (
        fam.gamma0
        + fam.lambda0**2 / (big_t - t)
        - r**2 / (4.0 * (big_t - t))
    )
    vals = lam ** (grid.params.dim_n / 2.0) * prof * np.exp(1j * phase)
    return ComplexRadialField(grid=grid, values=vals, time=t)


def _resample_complex(grid, values: NDArray[np.complex128], radii) -> NDArray[np.complex128]:
    # Interpolate the factored profile componentwise; zero beyond r_max
    # (generic complex fields carry no decay-envelope certificate).
    r = grid.nodes
    s = grid.sigma
    factored = values * r ** (-s)
    re = PchipInterpolator(r, factored.real, extrapolate=True)
    im = PchipInterpolator(r, factored.imag, extrapolate=True)
    radii = np.asarray(radii, dtype=float)
    out = np.zeros(radii.shape, dtype=complex)
    inside = radii <= r[-1]
    ri = radii[inside]
    out[inside] = (re(ri) + 1j * im(ri)) * ri**s
    return out


def pseudo_conformal_transform(
    u: Callable[[float], ComplexRadialField], big_t: float, t: float
) -> ComplexRadialField:
    """Pseudo-conformal image of a time-indexed solution generator.

    u_T(t, x) = e^{-i|x|^2/(4(T-t))} (T-t)^{-N/2} u(1/(T-t), x/(T-t)),
    with the inner field resampled on its own grid.  Mass is preserved
    up to resampling error; if u solves the equation, so does u_T.
    """
    if t >= big_t:
        raise ValueError(f"at-or-past-blowup: t = {t} >= T = {big_t}")
    tau = big_t - t
    inner = u(1.0 / tau)
    grid = inner.grid
    scale = 1.0 / tau
    if scale > grid.max_rescale():
        raise ValueError(
            "resample-out-of-range: 1/(T-t) exceeds the grid's resolvable scale"
        )
    vals = _resample_complex(grid, inner.values, grid.nodes * scale)
    r = grid.nodes
    out = (
        np.exp(-1j * r**2 / (4.0 * tau))
        * tau ** (-grid.params.dim_n / 2.0)
        * vals
    )
    return ComplexRadialField(grid=grid, values=out, time=t)


def standing_wave(
    gs: GroundState, lambda0: float, gamma0: float, t: float
) -> ComplexRadialField:
    """Global solution e^{i gamma0} e^{i lambda0^2 t} lambda0^{N/2} Q(lambda0 x)."""
    base = scaled_ground_state(gs, lambda0)
    phase = complex(np.exp(1j * (gamma0 + lambda0**2 * t)))
    return ComplexRadialField(grid=gs.grid, values=phase * base.values, time=t)


def predicted_blowup_speed(fam: BlowupFamilyParams, t: float) -> float:
    """Closed-form gradient norm ||grad S(t)|| of the exact family.

    ||grad S||^2 = lambda(t)^2 ||grad Q||^2 + Gamma(Q)/(4 lambda0^2)
    with lambda(t) = lambda0/(T-t): the quadratic-phase term contributes
    the constant second piece, so the speed is asymptotically
    lambda(t) ||grad Q|| ~ C/(T-t).
    """
    big_t = fam.blowup_time_T
    if t >= big_t:
        raise ValueError(f"at-or-past-blowup: t = {t} >= T = {big_t}")
    gs = fam.ground_state
    cache = gs.grid._op_cache.setdefault("speed-pieces", {})
    key = id(gs.profile)
    if key not in cache:
        field = gs.as_field()
        cache[key] = (fn.functional_report(field).grad_sq, variance(field))
    grad_sq, var_q = cache[key]
    lam = fam.lambda0 / (big_t - t)
    return math.sqrt(lam**2 * grad_sq + var_q / (4.0 * fam.lambda0**2))
