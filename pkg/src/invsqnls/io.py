"""CSV and JSON artifact formats shared by the CLI and the test suite.

All floats are written with %.17g (full round-trip precision) and JSON
is dumped with sorted keys, so a fixed config and seed reproduce every
output byte for byte.
"""

from __future__ import annotations

import json
from typing import Optional

import numpy as np
from numpy.typing import NDArray

from .params_grid import ComplexRadialField, PhysicalParams, RadialGrid, build_grid

__all__ = [
    "write_profile_csv",
    "read_profile_csv",
    "write_field_csv",
    "read_field_csv",
    "write_diagnostics_csv",
    "read_diagnostics_csv",
    "grid_descriptor",
    "grid_from_descriptor",
    "ground_state_sidecar",
    "write_json",
]

DIAG_HEADER = "t,mass,energy,H,gradnorm,variance,variance_rate"


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_profile_csv(path, radii: NDArray, profile: NDArray) -> None:
    with open(path, "w") as f:
        f.write("r,Q\n")
        for r, q in zip(radii, profile):
            f.write(f"{_fmt(r)},{_fmt(q)}\n")


def read_profile_csv(path) -> tuple[NDArray, NDArray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.size == 0 or data.shape[1] != 2:
        raise ValueError(f"profile file {path} is empty or malformed")
    return data[:, 0], data[:, 1]


def write_field_csv(path, field: ComplexRadialField) -> None:
    with open(path, "w") as f:
        f.write("r,re,im\n")
        for r, v in zip(field.grid.nodes, field.values):
            f.write(f"{_fmt(r)},{_fmt(v.real)},{_fmt(v.imag)}\n")


def read_field_csv(path) -> tuple[NDArray, NDArray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.size == 0 or data.shape[1] != 3:
        raise ValueError(f"field file {path} is empty or malformed")
    return data[:, 0], data[:, 1] + 1j * data[:, 2]


def write_diagnostics_csv(path, diag) -> None:
    cols = (
        diag.times,
        diag.mass_series,
        diag.energy_series,
        diag.hardy_series,
        diag.gradnorm_series,
        diag.variance_series,
        diag.variance_rate_series,
    )
    with open(path, "w") as f:
        f.write(DIAG_HEADER + "\n")
        for row in zip(*cols):
            f.write(",".join(_fmt(x) for x in row) + "\n")


def read_diagnostics_csv(path) -> dict:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.size == 0 or data.shape[1] != 7:
        raise ValueError(f"diagnostics file {path} is empty or malformed")
    names = DIAG_HEADER.split(",")
    return {name: data[:, i] for i, name in enumerate(names)}


def grid_descriptor(grid: RadialGrid) -> dict:
    desc = {
        "mesh_kind": grid.mesh_kind,
        "n_points": int(grid.nodes.size),
        "r_max": float(grid.nodes[-1]),
    }
    if grid.mesh_kind == "graded-power":
        desc["grading"] = float(grid.grading)
    else:
        desc["r_min"] = float(grid.nodes[0])
    return desc


def grid_from_descriptor(params: PhysicalParams, desc: dict) -> RadialGrid:
    kind = desc["mesh_kind"]
    kwargs = {}
    if kind == "graded-power" and "grading" in desc:
        kwargs["grading"] = float(desc["grading"])
    if kind == "logarithmic" and "r_min" in desc:
        kwargs["r_min"] = float(desc["r_min"])
    return build_grid(
        params,
        n_points=int(desc["n_points"]),
        r_max=float(desc["r_max"]),
        mesh_kind=kind,
        **kwargs,
    )


def ground_state_sidecar(gs, params: PhysicalParams, grid: RadialGrid) -> dict:
    return {
        "N": params.dim_n,
        "c": params.coupling_c,
        "p": params.exponent_p,
        "M_gs": gs.mass_gs,
        "H": gs.hardy_h,
        "E": gs.energy,
        "alpha": gs.alpha,
        "residual": gs.residual,
        "method": gs.method,
        "grid": grid_descriptor(grid),
    }


def write_json(path, obj) -> None:
    with open(path, "w") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")
