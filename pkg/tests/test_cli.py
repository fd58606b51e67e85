import json

import numpy as np
import pytest

from tabukit.cli import ConfigError, RunConfig, bundled, main, run_campaign
from tabukit.fourbar import reference_target, synthesis_objective


def _write_json(path, doc):
    path.write_text(json.dumps(doc) + "\n")
    return str(path)


@pytest.fixture
def mech_json(tmp_path):
    return _write_json(tmp_path / "mech.json", {
        "a12": 30, "a23": 52, "a34": 57, "a41": 71,
        "a25": 50, "alpha_deg": -52,
    })


@pytest.fixture
def design_json(tmp_path):
    return _write_json(tmp_path / "design.json",
                       {"Dp_cc": 150, "Dm_cc": 740, "Ki": 50})


def test_check_classifies_mechanisms(mech_json, tmp_path, capsys):
    assert main(["check", mech_json]) == 0
    assert capsys.readouterr().out.strip() == "crank_rocker"

    swapped = _write_json(tmp_path / "swapped.json", {
        "a12": 52, "a23": 30, "a34": 57, "a41": 71,
        "a25": 50, "alpha_deg": -52,
    })
    assert main(["check", swapped]) == 1
    assert capsys.readouterr().out.strip() == "grashof_non_crank_rocker"

    locked = _write_json(tmp_path / "locked.json", {
        "a12": 100, "a23": 20, "a34": 20, "a41": 200,
        "a25": 10, "alpha_deg": 0,
    })
    assert main(["check", locked]) == 1
    assert capsys.readouterr().out.strip() == "non_grashof"


def test_check_bounds_transmission_designs(design_json, tmp_path, capsys):
    assert main(["check", design_json]) == 0
    assert capsys.readouterr().out.strip() == "within bounds"

    oversized = _write_json(tmp_path / "oversized.json",
                            {"Dp": 600, "Dm": 740, "Ki": 50})
    assert main(["check", oversized]) == 1
    assert "Dp_cc = 600" in capsys.readouterr().out


def test_check_rejects_unreadable_payloads(tmp_path, capsys):
    garbage = tmp_path / "garbage.json"
    garbage.write_text("not json at all")
    assert main(["check", str(garbage)]) == 2
    assert main(["check", str(tmp_path / "missing.json")]) == 2
    unknown = _write_json(tmp_path / "unknown.json", {"foo": 1})
    assert main(["check", unknown]) == 2
    err = capsys.readouterr().err
    assert "cannot infer problem" in err


def test_trace_writes_coupler_paths(mech_json, tmp_path):
    out = tmp_path / "path.csv"
    assert main(["trace", mech_json, "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "theta2_deg,x,y"
    assert len(lines) == 361

    fine = tmp_path / "fine.csv"
    assert main(["trace", mech_json, "--out", str(fine),
                 "--resolution", "24"]) == 0
    assert len(fine.read_text().splitlines()) == 25

    assert main(["trace", mech_json, "--out", str(tmp_path / "x.csv"),
                 "--resolution", "12.5"]) == 2
    assert main(["trace", mech_json, "--out", str(tmp_path / "x.csv"),
                 "--resolution", "-5"]) == 2


def test_trace_refuses_a_locking_mechanism(tmp_path):
    locked = _write_json(tmp_path / "locked.json", {
        "a12": 100, "a23": 20, "a34": 20, "a41": 200,
        "a25": 10, "alpha_deg": 0,
    })
    out = tmp_path / "never.csv"
    assert main(["trace", locked, "--out", str(out)]) == 1
    assert not out.exists()


def test_trace_writes_trajectories(design_json, tmp_path):
    out = tmp_path / "traj.csv"
    assert main(["trace", design_json, "--out", str(out),
                 "--resolution", "0.01"]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("t,omega_desired_rpm,omega_actual_rpm")
    assert len(lines) == 402

    bad = _write_json(tmp_path / "bad.json", {"Dp": 600, "Dm": 740, "Ki": 50})
    assert main(["trace", bad, "--out", str(tmp_path / "never.csv")]) == 1
    assert not (tmp_path / "never.csv").exists()


def _tiny_fourbar_config(tmp_path, out_name, **extra):
    doc = {"problem": "fourbar", "trials": 2, "seed": 0, "budget": 60,
           "out": str(tmp_path / out_name)}
    doc.update(extra)
    return _write_json(tmp_path / f"{out_name}.json", doc)


def test_run_campaign_writes_all_artifacts(tmp_path, capsys):
    cfg = _tiny_fourbar_config(tmp_path, "runA")
    assert main(["run", cfg]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0].split() == [
        "RUN", "A12", "A23", "A34", "A41", "A25", "ALPHA", "OBFN",
        "NO.", "EVALS"]
    assert "best: run" in out
    run_dir = tmp_path / "runA"
    for name in ("report.csv", "report.txt", "trial0_convergence.csv",
                 "trial0_best.json", "trial1_convergence.csv",
                 "trial1_best.json"):
        assert (run_dir / name).exists(), name
    assert (run_dir / "report.txt").read_text() == out


def test_run_campaigns_reproduce_byte_identically(tmp_path):
    a = _tiny_fourbar_config(tmp_path, "A")
    b = _tiny_fourbar_config(tmp_path, "B")
    assert main(["run", a]) == 0
    assert main(["run", b]) == 0
    files_a = sorted(p.name for p in (tmp_path / "A").iterdir())
    files_b = sorted(p.name for p in (tmp_path / "B").iterdir())
    assert files_a == files_b
    for name in files_a:
        assert (tmp_path / "A" / name).read_bytes() \
            == (tmp_path / "B" / name).read_bytes(), name


def test_report_rows_reproduce_their_scores(tmp_path):
    cfg = _tiny_fourbar_config(tmp_path, "scores")
    assert main(["run", cfg]) == 0
    lines = (tmp_path / "scores" / "report.csv").read_text().splitlines()
    assert lines[0] == "trial,a12,a23,a34,a41,a25,alpha_deg,obfn,n_evals"
    objective = synthesis_objective(reference_target(12), "cyclic")
    for line in lines[1:]:
        cells = line.split(",")
        design = np.array([float(x) for x in cells[1:7]])
        value, _ = objective(design)
        assert value == pytest.approx(float(cells[7]), rel=1e-8)
        assert 1 <= int(cells[8]) <= 60


def test_flags_override_config_values(tmp_path):
    cfg = _tiny_fourbar_config(tmp_path, "flagged")
    assert main(["run", cfg, "--trials", "1", "--budget", "30",
                 "--out", str(tmp_path / "flagged_out")]) == 0
    lines = (tmp_path / "flagged_out" / "report.csv").read_text().splitlines()
    assert len(lines) == 2
    assert int(lines[1].split(",")[-1]) <= 30


def test_run_uses_the_bundled_campaign_by_default(tmp_path):
    out = tmp_path / "bundled_out"
    assert main(["run", "--problem", "fourbar", "--trials", "1",
                 "--budget", "40", "--out", str(out)]) == 0
    doc = json.loads(bundled("fourbar_campaign.json").read_text())
    assert doc["problem"] == "fourbar"
    assert (out / "report.csv").exists()


def test_tiny_hydraulic_campaign(tmp_path):
    cfg = _write_json(tmp_path / "hyd.json", {
        "problem": "hydraulic", "trials": 1, "seed": 0, "budget": 12,
        "out": str(tmp_path / "hyd_out"),
    })
    assert main(["run", cfg]) == 0
    run_dir = tmp_path / "hyd_out"
    assert (run_dir / "trial0_best.json").exists()
    assert (run_dir / "trial0_trajectory.csv").exists()
    header = (run_dir / "report.csv").read_text().splitlines()[0]
    assert header == "trial,Dp_cc,Dm_cc,Ki,obfn,n_evals"


def test_run_rejects_bad_configurations(tmp_path, capsys):
    assert main(["run"]) == 2
    assert "no problem given" in capsys.readouterr().err

    assert main(["run", str(tmp_path / "missing.json")]) == 2

    alien = _write_json(tmp_path / "alien.json",
                        {"problem": "fourbar", "colour": "red"})
    assert main(["run", alien]) == 2
    assert "unknown config keys: colour" in capsys.readouterr().err

    badsearch = _write_json(tmp_path / "badsearch.json", {
        "problem": "fourbar", "search": {"budget": 10},
    })
    assert main(["run", badsearch]) == 2
    assert "top-level" in capsys.readouterr().err

    zero = _write_json(tmp_path / "zero.json",
                       {"problem": "fourbar", "trials": 0})
    assert main(["run", zero]) == 2

    aslist = tmp_path / "aslist.json"
    aslist.write_text("[1, 2]")
    assert main(["run", str(aslist)]) == 2

    badthr = _write_json(tmp_path / "badthr.json", {
        "problem": "fourbar", "trials": 1, "budget": 10,
        "out": str(tmp_path / "never"),
        "search": {"intensify_after": 9, "diversify_after": 5},
    })
    assert main(["run", badthr]) == 2
    assert "stall thresholds" in capsys.readouterr().err


def test_config_precedence_is_flags_over_file():
    cfg = RunConfig.load(None, {"problem": "hydraulic", "seed": 7})
    assert cfg.problem == "hydraulic"
    assert cfg.seed == 7
    with pytest.raises(ConfigError):
        RunConfig.load(None, {})


def test_bench_reports_both_backends(capsys):
    assert main(["bench", "--repeats", "1"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("active implementation:")
    assert "speedup" in out
    assert "transmission simulation" in out
