"""Command line front end.

Three subcommands: ``ground-state`` computes the stationary profile by
both solvers and writes the profile with a JSON sidecar, ``evolve``
integrates an initial state and writes diagnostics plus a run summary,
``verify`` runs the acceptance criteria and writes a report.

All output is deterministic for a fixed seed: JSON keys are sorted,
floats go through repr, and no timestamps or absolute paths are
written. Exit codes are part of the contract and documented per
subcommand below.
"""

from __future__ import annotations

import argparse
import configparser
import math
import os
import sys

import numpy as np

from . import evolution as ev
from . import io as artio
from . import pseudoconformal as pc
from . import verify as verify_mod
from . import virial_diagnostics as vd
from .functionals import functional_report
from .ground_state import sharp_constant, solve_gradient_flow, solve_shooting
from .params_grid import ComplexRadialField, PhysicalParams, build_grid

__all__ = ["main"]


def _fail(msg: str, code: int) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return code


def _load_config(path: str | None) -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    if path is not None:
        if not os.path.isfile(path):
            raise ValueError(f"config file not found: {path}")
        with open(path) as f:
            cp.read_file(f)
    return cp


def _config_echo(cp: configparser.ConfigParser) -> dict:
    return {section: dict(cp[section]) for section in cp.sections()}


def _get(cp, section, key, cast, default):
    if cp.has_option(section, key):
        return cast(cp.get(section, key))
    return default


def _params_from_config(cp: configparser.ConfigParser) -> PhysicalParams:
    if not cp.has_section("params"):
        raise ValueError("config needs a [params] section with dim_n and coupling_c")
    dim_n = int(cp.get("params", "dim_n"))
    coupling_c = float(cp.get("params", "coupling_c"))
    if cp.has_option("params", "exponent_p"):
        return PhysicalParams(dim_n, coupling_c, float(cp.get("params", "exponent_p")))
    return PhysicalParams.critical(dim_n, coupling_c)


def _grid_from_config(cp, params):
    return build_grid(
        params,
        n_points=_get(cp, "grid", "n_points", int, 2048),
        r_max=_get(cp, "grid", "r_max", float, 40.0),
        mesh_kind=_get(cp, "grid", "mesh_kind", str, "graded-power"),
        grading=_get(cp, "grid", "grading", float, 2.0),
        r_min=_get(cp, "grid", "r_min", float, None),
    )


def _evolution_config(cp) -> ev.EvolutionConfig:
    if not cp.has_option("evolution", "t_end"):
        raise ValueError("config needs [evolution] t_end")
    return ev.EvolutionConfig(
        t_end=float(cp.get("evolution", "t_end")),
        dt_initial=_get(cp, "evolution", "dt_initial", float, 1e-3),
        dt_min=_get(cp, "evolution", "dt_min", float, 1e-9),
        adapt=(
            cp.getboolean("evolution", "adapt")
            if cp.has_option("evolution", "adapt")
            else True
        ),
        scheme=_get(cp, "evolution", "scheme", str, "strang-split"),
        snapshot_stride=_get(cp, "evolution", "snapshot_stride", int, 10),
        h_blowup_threshold=_get(cp, "evolution", "h_blowup_threshold", float, None),
    )


def _sanitize(obj):
    # JSON with NaN/inf is not portable; map non-finite floats to null
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    return obj


def cmd_ground_state(args) -> int:
    """Exit 0 on success, 1 on invalid parameters, 2 on solver failure,
    3 when the two solvers disagree."""
    try:
        cp = _load_config(args.config)
        params = _params_from_config(cp)
        grid = _grid_from_config(cp, params)
    except (ValueError, KeyError, configparser.Error) as exc:
        return _fail(str(exc), 1)
    try:
        gs_shoot = solve_shooting(params, grid)
        gs_flow = solve_gradient_flow(params, grid, seed=args.seed)
    except ValueError as exc:
        return _fail(str(exc), 2)
    mass_gap = abs(gs_shoot.mass_gs - gs_flow.mass_gs) / gs_shoot.mass_gs
    if mass_gap > 1e-5:
        return _fail(
            f"solver masses disagree: shooting {gs_shoot.mass_gs!r} vs "
            f"gradient flow {gs_flow.mass_gs!r} (rel gap {mass_gap:.3e})",
            3,
        )
    try:
        alpha = sharp_constant(gs_shoot)
    except ValueError as exc:
        return _fail(str(exc), 2)
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "ground_state.csv")
    json_path = os.path.join(args.out, "ground_state.json")
    artio.write_profile_csv(csv_path, grid.nodes, gs_shoot.profile)
    sidecar = artio.ground_state_sidecar(gs_shoot, params, grid)
    sidecar["alpha"] = alpha
    sidecar["mass_gap_between_methods"] = mass_gap
    if args.config is not None:
        sidecar["config"] = _config_echo(cp)
    artio.write_json(json_path, _sanitize(sidecar))
    print(
        f"ground state: N={params.dim_n} c={params.coupling_c!r} "
        f"M={gs_shoot.mass_gs:.10g} H={gs_shoot.hardy_h:.10g} "
        f"E={gs_shoot.energy:.3e} alpha={alpha:.10g}"
    )
    print(f"wrote {os.path.basename(csv_path)}, {os.path.basename(json_path)}")
    return 0


def _initial_field(cp, params, grid) -> ComplexRadialField:
    kind = _get(cp, "initial", "kind", str, None)
    if kind is None:
        raise ValueError("config needs [initial] kind")
    if kind == "file":
        path = _get(cp, "initial", "path", str, None)
        if path is None:
            raise ValueError("[initial] kind = file needs a path")
        radii, values = artio.read_field_csv(path)
        if radii.size != grid.nodes.size or not np.allclose(
            radii, grid.nodes, rtol=1e-9, atol=0.0
        ):
            raise ValueError(
                "initial data radii do not match the configured grid nodes"
            )
        return ComplexRadialField(grid=grid, values=values)
    # remaining kinds are built from the ground state on this grid
    gs = solve_shooting(params, grid)
    lam0 = _get(cp, "initial", "lambda0", float, 1.0)
    gam0 = _get(cp, "initial", "gamma0", float, 0.0)
    if kind == "theta-q":
        theta = _get(cp, "initial", "theta", float, 1.0)
        return ComplexRadialField(
            grid=grid, values=theta * gs.profile.astype(complex)
        )
    if kind == "standing-wave":
        return pc.standing_wave(gs, lam0, gam0, 0.0)
    if kind == "exact-family":
        fam = pc.BlowupFamilyParams(
            blowup_time_T=_get(cp, "initial", "blowup_time_t", float, 1.0),
            lambda0=lam0,
            gamma0=gam0,
            ground_state=gs,
        )
        return pc.exact_solution(fam, 0.0)
    raise ValueError(
        f"unknown [initial] kind {kind!r}; expected file, theta-q, "
        "standing-wave or exact-family"
    )


def cmd_evolve(args) -> int:
    """Exit 0 on a completed run (blow-up detection included), 1 on bad
    config or initial data, 2 on a step failure, 4 when the tail
    certificate fails."""
    try:
        cp = _load_config(args.config)
        params = _params_from_config(cp)
        grid = _grid_from_config(cp, params)
        config = _evolution_config(cp)
    except (ValueError, KeyError, configparser.Error) as exc:
        return _fail(str(exc), 1)
    try:
        u0 = _initial_field(cp, params, grid)
    except ValueError as exc:
        msg = str(exc)
        if msg.startswith("no-convergence"):
            return _fail(msg, 2)
        return _fail(msg, 1)
    try:
        diag, snapshots = ev.evolve(u0, config, keep_snapshots=False)
    except ValueError as exc:
        return _fail(str(exc), 2)

    os.makedirs(args.out, exist_ok=True)
    artio.write_diagnostics_csv(os.path.join(args.out, "diagnostics.csv"), diag)
    artio.write_field_csv(os.path.join(args.out, "snapshot_initial.csv"), u0)
    artio.write_field_csv(os.path.join(args.out, "snapshot_final.csv"), snapshots[-1])

    m0 = diag.mass_series[0]
    mass_drift = float(np.max(np.abs(diag.mass_series - m0))) / m0 if m0 > 0 else 0.0
    e0 = diag.energy_series[0]
    energy_drift = float(np.max(np.abs(diag.energy_series - e0)))
    virial = vd.trajectory_virial_report(
        u0, params, times=diag.times, gamma_series=diag.variance_series
    ).to_dict()
    blowup_fit = None
    if diag.terminated == "blowup-detected":
        try:
            blowup_fit = ev.fit_blowup_rate(diag).to_dict()
        except ValueError:
            blowup_fit = None
    summary = {
        "config": _config_echo(cp),
        "terminated": diag.terminated,
        "tail_certified": diag.tail_certified,
        "final_time": float(diag.times[-1]),
        "n_records": int(diag.times.size),
        "conservation": {
            "initial_mass": m0,
            "initial_energy": e0,
            "initial_hardy": float(diag.hardy_series[0]),
            "mass_drift_rel": mass_drift,
            "energy_drift_abs": energy_drift,
        },
        "virial": virial,
        "blowup_fit": blowup_fit,
        "artifacts": {
            "diagnostics": "diagnostics.csv",
            "snapshot_initial": "snapshot_initial.csv",
            "snapshot_final": "snapshot_final.csv",
        },
    }
    artio.write_json(os.path.join(args.out, "summary.json"), _sanitize(summary))
    print(
        f"evolve: terminated={diag.terminated} t={diag.times[-1]:.6g} "
        f"records={diag.times.size} tail_certified={diag.tail_certified}"
    )
    if not diag.tail_certified:
        return _fail("tail certificate violated: mass reached the outer boundary", 4)
    return 0


def cmd_verify(args) -> int:
    """Exit 0 iff every selected criterion passes."""
    cp = _load_config(args.config) if args.config else configparser.ConfigParser()
    gs_files = None
    if cp.has_option("verify", "ground_state_csv") and cp.has_option(
        "verify", "ground_state_json"
    ):
        gs_files = (
            cp.get("verify", "ground_state_csv"),
            cp.get("verify", "ground_state_json"),
        )
    try:
        results = verify_mod.run_all(
            only=args.only, seed=args.seed, ground_state_files=gs_files
        )
    except ValueError as exc:
        return _fail(str(exc), 1)
    all_passed = bool(all(r.passed for r in results))
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        extra = ""
        if "runtime_s" in r.details:
            extra = f" ({r.details['runtime_s']:.1f}s)"
        print(f"{status} {r.name}{extra}")
    report = {
        "criteria": [
            {
                "name": r.name,
                "passed": bool(r.passed),
                # wall time is not deterministic; keep it out of the artifact
                "details": _sanitize(
                    {k: v for k, v in r.details.items() if k != "runtime_s"}
                ),
            }
            for r in results
        ],
        "all_passed": all_passed,
        "seed": args.seed,
        "only": args.only,
    }
    os.makedirs(args.out, exist_ok=True)
    artio.write_json(os.path.join(args.out, "verify_report.json"), report)
    print("all criteria passed" if all_passed else "some criteria FAILED")
    return 0 if all_passed else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="invsqnls",
        description=(
            "Ground states, sharp interpolation constant and blow-up "
            "dynamics for the critical NLS with inverse-square potential"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func, needs_only in (
        ("ground-state", cmd_ground_state, False),
        ("evolve", cmd_evolve, False),
        ("verify", cmd_verify, True),
    ):
        sp = sub.add_parser(name)
        sp.add_argument("--config", default=None, help="INI configuration file")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--seed", type=int, default=0, help="RNG seed")
        if needs_only:
            sp.add_argument(
                "--only",
                default=None,
                help="run only criteria whose name starts with this prefix",
            )
        sp.set_defaults(func=func)
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
