import json
import subprocess
import sys

import numpy as np
import pytest

from belltraj.cli import RunConfig, load_config, main, unit_scales

XI_REFERENCE = -0.03351573507249439


def read_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def test_find_state_payload(tmp_path):
    out = tmp_path / "state.json"
    code = main(["find-state", "--out", str(out), "--n-big", "32", "--no-convergence"])
    assert code == 0
    data = read_json(out)
    assert data["schema_version"] == 1
    assert data["command"] == "find-state"
    assert abs(data["xi_minus"] - XI_REFERENCE) < 1e-9
    assert data["violation"] is True
    assert data["converged"] is None
    assert set(data["convergence"]) == {"32"}
    assert len(data["state"]["re"]) == 81
    assert len(data["state"]["im"]) == 81
    assert data["units"]["system"] == "natural"
    assert data["units"]["length_scale"] == 1.0


def test_find_state_is_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["find-state", "--out", str(a), "--n-big", "24", "--no-convergence"]) == 0
    assert main(["find-state", "--out", str(b), "--n-big", "24", "--no-convergence"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_sweep_from_state_file(tmp_path):
    state = tmp_path / "state.json"
    assert main(["find-state", "--out", str(state), "--n-big", "24",
                 "--no-convergence"]) == 0
    out = tmp_path / "sweep.csv"
    code = main(["sweep", "--state", str(state), "--out", str(out),
                 "--n-big", "24", "--steps", "61"])
    assert code == 0
    lines = out.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "t,f00,f01,f10,f11,S"
    assert len(lines) == 62
    row = [float(v) for v in lines[1].split(",")]
    assert len(row) == 6 and row[0] == 0.0
    assert abs(row[1] + row[2] + row[3] - row[4] - row[5]) < 1e-12

    sidecar = read_json(str(out) + ".json")
    assert len(sidecar["negative_intervals"]) == 1
    lo, hi = sidecar["negative_intervals"][0]
    assert abs(lo - 1.485) < 0.02 and abs(hi - 1.665) < 0.02
    assert sidecar["window_integrals"][0] < 0.0
    assert sidecar["min_value"] < -0.03


def test_sweep_rejects_mismatched_state(tmp_path):
    state = tmp_path / "state.json"
    assert main(["find-state", "--out", str(state), "--n-big", "24",
                 "--no-convergence"]) == 0
    out = tmp_path / "sweep.csv"
    code = main(["sweep", "--state", str(state), "--out", str(out),
                 "--n-sub", "4", "--n-big", "24"])
    assert code == 2
    # and a state file without the expected block
    bad = tmp_path / "bad.json"
    bad.write_text('{"foo": 1}', encoding="utf-8")
    assert main(["sweep", "--state", str(bad), "--out", str(out)]) == 2


def test_si_units_scale_outputs(tmp_path):
    nat, si = tmp_path / "nat.json", tmp_path / "si.json"
    assert main(["find-state", "--out", str(nat), "--n-big", "24",
                 "--no-convergence"]) == 0
    assert main(["find-state", "--out", str(si), "--n-big", "24",
                 "--no-convergence", "--units", "si"]) == 0
    a, b = read_json(nat), read_json(si)
    scales = unit_scales(RunConfig(units="si"))
    length = np.sqrt(1.054571817e-34 / (1e-30 * 1e8))
    assert abs(scales["length_scale"] - length) < 1e-20
    assert abs(scales["time_scale"] - 1e-8) < 1e-22
    assert abs(b["xi_minus"] - a["xi_minus"] * length) < 1e-18
    assert abs(b["probe_time"] - np.pi / 2.0 * 1e-8) < 1e-20
    assert b["units"]["system"] == "si"
    assert b["units"]["mass_kg"] == 1e-30


def test_config_file_and_override_precedence(tmp_path):
    cfgfile = tmp_path / "run.json"
    cfgfile.write_text(json.dumps({"n_big": 16, "steps": 11}), encoding="utf-8")
    cfg = load_config(str(cfgfile), {"n_big": 24, "seed": None})
    assert cfg.n_big == 24  # command line wins
    assert cfg.steps == 11  # file wins over defaults
    assert cfg.seed == 7

    out = tmp_path / "state.json"
    code = main(["find-state", "--config", str(cfgfile), "--out", str(out),
                 "--n-big", "24", "--no-convergence"])
    assert code == 0
    assert read_json(out)["n_big"] == 24


def test_bad_configs_exit_2(tmp_path):
    unknown = tmp_path / "u.json"
    unknown.write_text('{"n_bigg": 32}', encoding="utf-8")
    assert main(["find-state", "--config", str(unknown), "--out",
                 str(tmp_path / "x.json")]) == 2
    invalid = tmp_path / "i.json"
    invalid.write_text('{"n_big": -3}', encoding="utf-8")
    assert main(["find-state", "--config", str(invalid), "--out",
                 str(tmp_path / "y.json")]) == 2
    assert main(["find-state", "--config", str(tmp_path / "missing.json"),
                 "--out", str(tmp_path / "z.json")]) == 2


def test_hv_demo_pass_and_corrupt(tmp_path):
    out = tmp_path / "hv.json"
    code = main(["hv-demo", "--out", str(out), "--samples", "200000"])
    assert code == 0
    data = read_json(out)
    assert data["passed"] is True
    assert data["sampler"]["mode"] == "joint"
    assert data["sampler"]["max_sigma"] <= 3.0
    assert max(data["reconstruction_errors"]) <= 1e-10
    assert all(n <= data["term_bound"] for n in data["term_counts"])

    bad = tmp_path / "hv_bad.json"
    code = main(["hv-demo", "--out", str(bad), "--samples", "200000", "--corrupt"])
    assert code == 4
    assert read_json(bad)["passed"] is False


def test_hv_demo_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["hv-demo", "--out", str(a), "--samples", "50000"]) == 0
    assert main(["hv-demo", "--out", str(b), "--samples", "50000"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_hv_demo_random_walk(tmp_path):
    out = tmp_path / "hv.json"
    code = main(["hv-demo", "--out", str(out), "--kind", "random",
                 "--sites", "3", "--walk-steps", "2", "--samples", "200000"])
    assert code == 0
    data = read_json(out)
    assert data["walk_kind"] == "random" and data["n_sites"] == 3
    assert data["passed"] is True


def test_classical_check_command(tmp_path):
    out = tmp_path / "cl.json"
    code = main(["classical-check", "--out", str(out), "--ensembles", "60",
                 "--members", "4", "--time-points", "16"])
    assert code == 0
    data = read_json(out)
    assert data["passed"] is True
    assert set(data["minima"]) == {"pointwise", "integrated", "gen_integral",
                                   "gen_peak", "gen_skew"}
    assert all(v >= -1e-10 for v in data["minima"].values())


def test_console_script_help():
    proc = subprocess.run([sys.executable, "-m", "belltraj.cli", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    for name in ("find-state", "sweep", "hv-demo", "classical-check"):
        assert name in proc.stdout


def test_m0_out_of_range_exits_2(tmp_path):
    code = main(["hv-demo", "--out", str(tmp_path / "x.json"), "--m0", "9",
                 "--samples", "1000"])
    assert code == 2
