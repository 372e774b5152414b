"""Command line interface: exit codes, output files, determinism.

Every test drives main(argv) in process; with an explicit argv list the
function returns the exit code instead of calling sys.exit.
"""

import json
import math

import pytest

from fibersolve.cli import main


def write_config(path, **sections):
    raw = {
        "domain": {"x0": 0.0, "x1": math.pi, "n": 49},
        "nonlinearity": {"kind": "smooth", "alpha": 1.25, "beta": 0.65},
        "band": {"a": 0.5, "b": 2.0},
    }
    raw.update(sections)
    path.write_text(json.dumps(raw))
    return str(path)


# -- info ---------------------------------------------------------------


def test_info_prints_summary_and_writes_json(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", rhs={"kind": "coeffs", "values": [1.0]})
    out = tmp_path / "out"
    assert main(["info", "--config", cfg, "--out", str(out)]) == 0
    doc = json.loads((out / "decomposition.json").read_text())
    assert doc["fiber_dim"] == 1
    assert doc["indices"] == [1]
    assert doc["slope_range"][0] < doc["slope_range"][1]
    assert doc["rhs_norm"] > 0
    assert (out / "config.resolved.json").exists()
    printed = capsys.readouterr().out
    assert '"fiber_dim": 1' in printed


def test_info_empty_fiber_prints_uniqueness_message(tmp_path, capsys):
    cfg = write_config(
        tmp_path / "c.json",
        nonlinearity={"kind": "smooth", "alpha": 2.5, "beta": 0.3},
        band={"a": 2.0, "b": 3.0},
    )
    assert main(["info", "--config", cfg]) == 0
    printed = capsys.readouterr().out
    assert "exactly one solution" in printed


def test_info_band_on_eigenvalue_exits_2(tmp_path, capsys):
    # discrete first eigenvalue sits within gap_tol of the band edge
    cfg = write_config(tmp_path / "c.json", band={"a": 1.0, "b": 2.0, "gap_tol": 0.05})
    assert main(["info", "--config", cfg]) == 2
    assert "band endpoint error" in capsys.readouterr().err


def test_bad_configs_exit_1(tmp_path, capsys):
    missing = str(tmp_path / "nope.json")
    assert main(["info", "--config", missing]) == 1

    bad = tmp_path / "bad.json"
    write_config(bad)
    raw = json.loads(bad.read_text())
    raw["scan"] = {"bogus_knob": 3}
    bad.write_text(json.dumps(raw))
    assert main(["info", "--config", str(bad)]) == 1
    assert "config error" in capsys.readouterr().err


# -- solve --------------------------------------------------------------


def test_solve_empty_fiber_returns_unique_solution(tmp_path, capsys):
    cfg = write_config(
        tmp_path / "c.json",
        nonlinearity={"kind": "smooth", "alpha": 2.5, "beta": 0.3},
        band={"a": 2.0, "b": 3.0},
        rhs={"kind": "coeffs", "values": [1.0, 0.5]},
    )
    out = tmp_path / "out"
    assert main(["solve", "--config", cfg, "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert len(manifest["solutions"]) == 1
    assert (out / "solutions" / "sol_0.csv").exists()
    assert "solutions: 1" in capsys.readouterr().out


def test_solve_two_and_zero_solutions(tmp_path, capsys):
    # convex slope family crossing the first eigenvalue: the component of
    # the right-hand side along the ground mode decides 0 versus 2 roots
    scan = {"t_min": -16.0, "t_max": 16.0, "n_samples": 96}
    cfg2 = write_config(
        tmp_path / "two.json", rhs={"kind": "coeffs", "values": [-2.5]}, scan=scan
    )
    out2 = tmp_path / "out_two"
    assert main(["solve", "--config", cfg2, "--out", str(out2)]) == 0
    manifest = json.loads((out2 / "manifest.json").read_text())
    assert len(manifest["solutions"]) == 2

    cfg0 = write_config(
        tmp_path / "zero.json", rhs={"kind": "coeffs", "values": [2.5]}, scan=scan
    )
    out0 = tmp_path / "out_zero"
    assert main(["solve", "--config", cfg0, "--out", str(out0)]) == 3
    manifest = json.loads((out0 / "manifest.json").read_text())
    assert manifest["solutions"] == []
    assert "solutions: 0" in capsys.readouterr().out


def test_solve_high_dimensional_fiber_needs_seeds(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", band={"a": 0.5, "b": 10.5})
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "o")]) == 1
    assert "scan.seeds" in capsys.readouterr().err


def test_solve_manifest_deterministic(tmp_path):
    cfg = write_config(
        tmp_path / "c.json",
        rhs={"kind": "coeffs", "values": [-2.5]},
        scan={"t_min": -16.0, "t_max": 16.0, "n_samples": 96},
    )
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert main(["solve", "--config", cfg, "--out", str(out_a)]) == 0
    assert main(["solve", "--config", cfg, "--out", str(out_b)]) == 0
    assert (out_a / "manifest.json").read_bytes() == (out_b / "manifest.json").read_bytes()
    assert (
        out_a / "solutions" / "sol_0.csv"
    ).read_bytes() == (out_b / "solutions" / "sol_0.csv").read_bytes()


# -- trace and scan -----------------------------------------------------


def test_trace_writes_csv_and_sidecar(tmp_path):
    cfg = write_config(
        tmp_path / "c.json",
        rhs={"kind": "coeffs", "values": [1.0]},
        scan={"t_min": -2.0, "t_max": 2.0, "n_samples": 9},
    )
    out = tmp_path / "out"
    assert main(["trace", "--config", cfg, "--out", str(out)]) == 0
    lines = (out / "trace.csv").read_text().strip().splitlines()
    assert lines[0] == "t_1,height_1,iterations,residual_horizontal"
    assert len(lines) == 1 + 9
    sidecar = json.loads((out / "trace.json").read_text())
    assert sidecar["decomposition"]["fiber_dim"] == 1
    assert "g_hash" in sidecar


def test_trace_rejects_empty_fiber(tmp_path, capsys):
    cfg = write_config(
        tmp_path / "c.json",
        nonlinearity={"kind": "smooth", "alpha": 2.5, "beta": 0.3},
        band={"a": 2.0, "b": 3.0},
    )
    assert main(["trace", "--config", cfg, "--out", str(tmp_path / "o")]) == 1
    assert "fiber dimension" in capsys.readouterr().err


def test_scan_counts_and_csv(tmp_path, capsys):
    cfg = write_config(
        tmp_path / "c.json",
        scan={
            "s_values": [-2.0, 0.0, 2.0],
            "t_min": -16.0,
            "t_max": 16.0,
            "n_samples": 96,
        },
    )
    out = tmp_path / "out"
    assert main(["scan", "--config", cfg, "--out", str(out)]) == 0
    lines = (out / "scan.csv").read_text().strip().splitlines()
    assert lines[0] == "s,count,continuum"
    assert len(lines) == 1 + 3
    manifest = json.loads((out / "manifest.json").read_text())
    counts = [r["count"] for r in manifest["records"]]
    assert counts == sorted(counts)  # counts only grow along this family
    assert counts[0] == 0 and counts[-1] == 2
    printed = capsys.readouterr().out
    assert printed.count("count=") == 3

    out_b = tmp_path / "out_b"
    assert main(["scan", "--config", cfg, "--out", str(out_b)]) == 0
    assert (out / "scan.csv").read_bytes() == (out_b / "scan.csv").read_bytes()


def test_scan_requires_s_values(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json")
    assert main(["scan", "--config", cfg, "--out", str(tmp_path / "o")]) == 1
    assert "s_values" in capsys.readouterr().err


# -- gallery ------------------------------------------------------------


@pytest.mark.parametrize("preset", ["flat", "halfline", "separable2d", "symmetric"])
def test_gallery_presets_verify(tmp_path, preset):
    out = tmp_path / preset
    assert main(["gallery", preset, "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["passed"] is True
    assert report["preset"] == preset


def test_gallery_bad_parameters_exit_1(tmp_path, capsys):
    out = str(tmp_path / "o")
    assert main(["gallery", "halfline", "--out", out, "--a", "4.5"]) == 1
    # resonant shallow slope: the matching upper slope hits the spectrum
    assert main(["gallery", "halfline", "--out", out, "--a", "2.25"]) == 1
    err = capsys.readouterr().err
    assert "gallery input error" in err


# -- oracle -------------------------------------------------------------


def test_oracle_matches_fiber_route(tmp_path, capsys):
    cfg = write_config(
        tmp_path / "c.json",
        nonlinearity={"kind": "smooth", "alpha": 2.5, "beta": 0.3},
        band={"a": 2.0, "b": 3.0},
        rhs={"kind": "coeffs", "values": [1.0, 0.5]},
        scan={"n_starts": 20, "seed": 1, "box_scale": 4.0},
    )
    out = tmp_path / "out"
    assert main(["solve", "--config", cfg, "--out", str(out)]) == 0
    assert main(["oracle", "--config", cfg, "--out", str(out)]) == 0
    oracle = json.loads((out / "oracle.json").read_text())
    assert len(oracle["solutions"]) == 1
    comparison = json.loads((out / "comparison.json").read_text())
    assert comparison["agree"] is True
    assert comparison["fiber_count"] == comparison["oracle_count"] == 1
    assert "agree=True" in capsys.readouterr().out


def test_oracle_standalone_writes_report(tmp_path):
    cfg = write_config(
        tmp_path / "c.json",
        rhs={"kind": "coeffs", "values": [-2.5]},
        scan={"n_starts": 60, "seed": 3, "box_scale": 12.0},
    )
    out = tmp_path / "out"
    assert main(["oracle", "--config", cfg, "--out", str(out)]) == 0
    oracle = json.loads((out / "oracle.json").read_text())
    assert len(oracle["solutions"]) == 2
    assert (out / "oracle_solutions" / "sol_0.csv").exists()
    assert not (out / "comparison.json").exists()


def test_oracle_mismatch_exits_6(tmp_path, capsys):
    # starve the oracle of starts so it misses one of the two roots
    cfg = write_config(
        tmp_path / "c.json",
        rhs={"kind": "coeffs", "values": [-2.5]},
        scan={"t_min": -16.0, "t_max": 16.0, "n_samples": 96},
    )
    out = tmp_path / "out"
    assert main(["solve", "--config", cfg, "--out", str(out)]) == 0
    code = main(
        ["oracle", "--config", cfg, "--out", str(out), "--n-starts", "1", "--seed", "0"]
    )
    assert code == 6
    comparison = json.loads((out / "comparison.json").read_text())
    assert comparison["agree"] is False


# -- overrides ----------------------------------------------------------


def test_flag_overrides_reach_resolved_config(tmp_path):
    cfg = write_config(tmp_path / "c.json")
    out = tmp_path / "out"
    assert main(["info", "--config", cfg, "--out", str(out), "--n", "31"]) == 0
    resolved = json.loads((out / "config.resolved.json").read_text())
    assert resolved["domain"]["n"] == 31
