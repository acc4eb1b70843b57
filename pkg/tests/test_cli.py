import json

import jsonschema
import numpy as np
import pytest

from invsqnls import io as artio
from invsqnls.cli import main
from invsqnls.params_grid import ComplexRadialField, build_grid


def _schema(name):
    import importlib.resources as res

    with res.files("invsqnls.schemas").joinpath(f"{name}.schema.json").open() as f:
        return json.load(f)


def _write(path, text):
    path.write_text(text)
    return str(path)


BASE_INI = """\
[params]
dim_n = 3
coupling_c = 0.125

[grid]
n_points = 1024
r_max = 30.0
"""


# ---------------------------------------------------------------------------
# io round trips


def test_profile_roundtrip(tmp_path, gs_small):
    path = tmp_path / "q.csv"
    artio.write_profile_csv(path, gs_small.grid.nodes, gs_small.profile)
    r, q = artio.read_profile_csv(path)
    np.testing.assert_array_equal(r, gs_small.grid.nodes)
    np.testing.assert_array_equal(q, gs_small.profile)


def test_field_roundtrip(tmp_path, grid_small):
    u = ComplexRadialField.from_callable(
        grid_small, lambda r: np.exp(-r) * np.exp(1j * r)
    )
    path = tmp_path / "u.csv"
    artio.write_field_csv(path, u)
    r, vals = artio.read_field_csv(path)
    np.testing.assert_array_equal(r, grid_small.nodes)
    np.testing.assert_array_equal(vals, u.values)


def test_empty_profile_raises(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    with pytest.raises(ValueError):
        artio.read_profile_csv(path)
    path.write_text("r,Q\n")
    with pytest.raises(ValueError):
        artio.read_profile_csv(path)


def test_grid_descriptor_roundtrip(par3, grid_small):
    desc = artio.grid_descriptor(grid_small)
    rebuilt = artio.grid_from_descriptor(par3, desc)
    np.testing.assert_array_equal(rebuilt.nodes, grid_small.nodes)


# ---------------------------------------------------------------------------
# ground-state subcommand


def test_ground_state_cmd(tmp_path, capsys):
    cfg = _write(tmp_path / "gs.ini", BASE_INI)
    out = tmp_path / "out"
    assert main(["ground-state", "--config", cfg, "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "E=" in text and "H=" in text
    side = json.loads((out / "ground_state.json").read_text())
    jsonschema.validate(side, _schema("ground_state"))
    assert side["mass_gap_between_methods"] <= 1e-5
    r, q = artio.read_profile_csv(out / "ground_state.csv")
    assert r.size == 1024
    assert np.all(q > 0.0)


def test_ground_state_deterministic(tmp_path):
    cfg = _write(tmp_path / "gs.ini", BASE_INI)
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert main(["ground-state", "--config", cfg, "--out", str(out1), "--seed", "7"]) == 0
    assert main(["ground-state", "--config", cfg, "--out", str(out2), "--seed", "7"]) == 0
    for name in ("ground_state.csv", "ground_state.json"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_ground_state_invalid_coupling(tmp_path, capsys):
    cfg = _write(
        tmp_path / "bad.ini",
        "[params]\ndim_n = 3\ncoupling_c = 0.5\n",
    )
    assert main(["ground-state", "--config", cfg, "--out", str(tmp_path)]) == 1
    assert "(N-2)^2/4" in capsys.readouterr().err


def test_ground_state_missing_config(tmp_path):
    missing = str(tmp_path / "nope.ini")
    assert main(["ground-state", "--config", missing, "--out", str(tmp_path)]) == 1


# ---------------------------------------------------------------------------
# evolve subcommand


EVOLVE_INI = BASE_INI + """
[evolution]
t_end = 0.1
dt_initial = 2e-3
scheme = relaxation

[initial]
kind = standing-wave
lambda0 = 1.0
"""


def test_evolve_cmd(tmp_path):
    cfg = _write(tmp_path / "ev.ini", EVOLVE_INI)
    out = tmp_path / "run"
    assert main(["evolve", "--config", cfg, "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    jsonschema.validate(summary, _schema("run_summary"))
    assert summary["terminated"] == "reached-t-end"
    assert summary["tail_certified"] is True
    assert summary["conservation"]["mass_drift_rel"] <= 1e-10
    assert summary["config"]["initial"]["kind"] == "standing-wave"
    cols = artio.read_diagnostics_csv(out / "diagnostics.csv")
    assert cols["t"].size == summary["n_records"]
    r, vals = artio.read_field_csv(out / "snapshot_final.csv")
    assert vals.dtype == np.complex128


def test_evolve_from_file(tmp_path, grid_small, gs_small):
    state = ComplexRadialField(
        grid=grid_small, values=0.9 * gs_small.profile.astype(complex)
    )
    field_csv = tmp_path / "u0.csv"
    artio.write_field_csv(field_csv, state)
    ini = BASE_INI + (
        "\n[evolution]\nt_end = 0.05\ndt_initial = 2e-3\n"
        f"\n[initial]\nkind = file\npath = {field_csv}\n"
    )
    cfg = _write(tmp_path / "ev.ini", ini)
    out = tmp_path / "run"
    assert main(["evolve", "--config", cfg, "--out", str(out)]) == 0


def test_evolve_empty_file(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    ini = BASE_INI + (
        "\n[evolution]\nt_end = 0.05\n"
        f"\n[initial]\nkind = file\npath = {empty}\n"
    )
    cfg = _write(tmp_path / "ev.ini", ini)
    assert main(["evolve", "--config", cfg, "--out", str(tmp_path)]) == 1


def test_evolve_grid_mismatch(tmp_path, par3):
    other = build_grid(par3, 512, 30.0)
    state = ComplexRadialField.from_callable(other, lambda r: np.exp(-r))
    field_csv = tmp_path / "u0.csv"
    artio.write_field_csv(field_csv, state)
    ini = BASE_INI + (
        "\n[evolution]\nt_end = 0.05\n"
        f"\n[initial]\nkind = file\npath = {field_csv}\n"
    )
    cfg = _write(tmp_path / "ev.ini", ini)
    assert main(["evolve", "--config", cfg, "--out", str(tmp_path)]) == 1


def test_evolve_unknown_kind(tmp_path):
    ini = BASE_INI + "\n[evolution]\nt_end = 0.05\n\n[initial]\nkind = plane-wave\n"
    cfg = _write(tmp_path / "ev.ini", ini)
    assert main(["evolve", "--config", cfg, "--out", str(tmp_path)]) == 1


def test_evolve_tail_violation_exit4(tmp_path):
    # a spreading state reaches the outer wall: artifacts still written
    ini = BASE_INI + (
        "\n[evolution]\nt_end = 4.0\ndt_initial = 5e-3\nadapt = false\n"
        "scheme = relaxation\nsnapshot_stride = 20\n"
        "\n[initial]\nkind = theta-q\ntheta = 0.5\n"
    )
    cfg = _write(tmp_path / "ev.ini", ini)
    out = tmp_path / "run"
    assert main(["evolve", "--config", cfg, "--out", str(out)]) == 4
    summary = json.loads((out / "summary.json").read_text())
    jsonschema.validate(summary, _schema("run_summary"))
    assert summary["tail_certified"] is False


def test_evolve_blowup_summary(tmp_path):
    ini = BASE_INI + (
        "\n[evolution]\nt_end = 1.0\ndt_initial = 1e-3\ndt_min = 5e-4\n"
        "h_blowup_threshold = 130.0\n"
        "\n[initial]\nkind = exact-family\nblowup_time_t = 1.0\nlambda0 = 1.0\n"
    )
    cfg = _write(tmp_path / "ev.ini", ini)
    out = tmp_path / "run"
    assert main(["evolve", "--config", cfg, "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    jsonschema.validate(summary, _schema("run_summary"))
    assert summary["terminated"] == "blowup-detected"
    assert summary["blowup_fit"] is not None
    assert summary["blowup_fit"]["t_blowup_est"] > summary["final_time"]


# ---------------------------------------------------------------------------
# verify subcommand


def test_verify_only_concentration(tmp_path):
    out = tmp_path / "ver"
    assert main(["verify", "--only", "concentration", "--out", str(out)]) == 0
    report = json.loads((out / "verify_report.json").read_text())
    jsonschema.validate(report, _schema("verify_report"))
    assert report["all_passed"] is True
    assert [c["name"] for c in report["criteria"]] == ["concentration"]


def test_verify_unknown_only(tmp_path):
    assert main(["verify", "--only", "nonexistent", "--out", str(tmp_path)]) == 1


def test_verify_report_deterministic(tmp_path):
    out1, out2 = tmp_path / "v1", tmp_path / "v2"
    for out in (out1, out2):
        assert main(["verify", "--only", "concentration", "--out", str(out)]) == 0
    assert (out1 / "verify_report.json").read_bytes() == (
        out2 / "verify_report.json"
    ).read_bytes()


def test_verify_detects_corrupted_ground_state(tmp_path):
    cfg = _write(tmp_path / "gs.ini", BASE_INI)
    art = tmp_path / "art"
    assert main(["ground-state", "--config", cfg, "--out", str(art)]) == 0

    verify_ini = (
        f"[verify]\nground_state_csv = {art / 'ground_state.csv'}\n"
        f"ground_state_json = {art / 'ground_state.json'}\n"
    )
    vcfg = _write(tmp_path / "verify.ini", verify_ini)
    ok = tmp_path / "ok"
    assert (
        main(
            ["verify", "--config", vcfg, "--only", "sharp-constant", "--out", str(ok)]
        )
        == 0
    )

    # scale the stored profile: the constant from the file mass no
    # longer matches J evaluated on the stored profile
    r, q = artio.read_profile_csv(art / "ground_state.csv")
    artio.write_profile_csv(art / "ground_state.csv", r, 1.001 * q)
    bad = tmp_path / "bad"
    assert (
        main(
            ["verify", "--config", vcfg, "--only", "sharp-constant", "--out", str(bad)]
        )
        == 1
    )
    report = json.loads((bad / "verify_report.json").read_text())
    assert report["all_passed"] is False
    assert report["criteria"][0]["name"] == "sharp-constant"
    assert report["criteria"][0]["passed"] is False
