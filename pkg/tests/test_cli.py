"""Command-line interface: subcommands, exit codes, serialization."""
import json

import numpy as np
import pytest

from swarmk.cli import run_cli


def _run(capsys, *argv):
    code = run_cli(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_list(capsys):
    code, out, _ = _run(capsys, "list")
    assert code == 0
    assert "stickpull-simple" in out.splitlines()
    assert "foraging" in out.splitlines()


def test_steady(capsys):
    code, out, _ = _run(capsys, "steady", "--model", "stickpull-simple",
                        "--set", "beta=0.5", "--set", "gamma=0.2")
    assert code == 0
    lines = dict(l.split("=", 1) for l in out.strip().splitlines())
    assert float(lines["n"]) == pytest.approx(0.2801, abs=1e-4)
    assert float(lines["residual"]) < 1e-12


def test_run_csv_header_and_values(capsys):
    code, out, _ = _run(capsys, "run", "--model", "stickpull-simple",
                        "--t-end", "1", "--dt", "0.5")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "t,s,g,m"
    assert len(lines) == 4
    first = lines[1].split(",")
    assert first == ["0.0", "1.0", "0.0", "1.0"]


def test_run_json_round_trip(capsys, tmp_path):
    out_file = tmp_path / "traj.json"
    code, _, _ = _run(capsys, "run", "--model", "stickpull-simple",
                      "--t-end", "2", "--dt", "0.25", "--format", "json",
                      "--out", str(out_file))
    assert code == 0
    payload = json.loads(out_file.read_text())
    assert payload["columns"] == ["t", "s", "g", "m"]
    import swarmk as sk

    traj = sk.integrate(sk.compile_rhs(sk.build_stickpull_simple()),
                        t_end=2.0, dt=0.25)
    rows = np.array(payload["rows"])
    assert np.array_equal(rows[:, 0], traj.times)
    assert np.array_equal(rows[:, 1:], traj.data)


def test_identical_invocations_identical_bytes(capsys):
    args = ("mc", "--model", "stickpull-counts", "--t-end", "5",
            "--runs", "10", "--seed", "3", "--grid-points", "5")
    _, out1, _ = _run(capsys, *args)
    _, out2, _ = _run(capsys, *args)
    assert out1 == out2


def test_run_mas_file(capsys, tmp_path):
    f = tmp_path / "toy.mas"
    f.write_text("state a = 1\nstate b = 0\nrate(a): a -> b\n")
    code, out, _ = _run(capsys, "run", "--model", str(f),
                        "--t-end", "1", "--dt", "0.5")
    assert code == 0
    assert out.splitlines()[0] == "t,a,b"


def test_validate_bad_file_exit_2(capsys, tmp_path):
    f = tmp_path / "bad.mas"
    f.write_text("state s = 1\nrate(q * s): s -> s\n")
    code, _, err = _run(capsys, "validate", "--model", str(f))
    assert code == 2
    assert "unknown identifier" in err
    assert "2:6" in err


def test_validate_good_model(capsys):
    code, out, _ = _run(capsys, "validate", "--model", "foraging")
    assert code == 0
    assert "no defects" in out


def test_usage_errors_exit_1(capsys):
    assert _run(capsys, "nosuch")[0] == 1
    assert _run(capsys)[0] == 1
    assert _run(capsys, "run")[0] == 1  # missing --model
    assert _run(capsys, "run", "--model", "stickpull-simple",
                "--set", "beta")[0] == 1
    assert _run(capsys, "sweep", "--model", "stickpull-simple")[0] == 1


def test_unknown_model_exit_2(capsys):
    code, _, err = _run(capsys, "run", "--model", "not-a-model")
    assert code == 2
    assert "unknown model" in err


def test_unknown_override_exit_2(capsys):
    code, _, err = _run(capsys, "run", "--model", "stickpull-simple",
                        "--set", "zz=1")
    assert code == 2


def test_sweep_csv_schema_and_monotone_r(capsys):
    code, out, _ = _run(capsys, "sweep", "--model", "stickpull-delayed",
                        "--set", "beta=1.5", "--param", "tau",
                        "--from", "0", "--to", "20", "--sweep-steps", "40")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "param,nstar,R"
    r = [float(l.split(",")[2]) for l in lines[1:]]
    assert all(b >= a - 1e-12 for a, b in zip(r, r[1:]))


def test_sweep_builder_field_group_size(capsys):
    code, out, _ = _run(capsys, "sweep", "--model", "foraging",
                        "--param", "n0", "--from", "1", "--to", "10",
                        "--sweep-steps", "10", "--observables", "T",
                        "--counter", "m", "--threshold", "1",
                        "--t-end", "1600", "--dt", "0.25")
    assert code == 0
    lines = out.strip().splitlines()
    T = [float(l.split(",")[1]) for l in lines[1:]]
    i = T.index(min(T))
    assert 0 < i < len(T) - 1  # interior optimal group size


def test_set_builder_field(capsys):
    code, out, _ = _run(capsys, "run", "--model", "stickpull-counts",
                        "--set", "n0=5", "--t-end", "1", "--dt", "0.5")
    assert code == 0
    assert out.splitlines()[1].split(",")[1] == "5.0"


def test_mc_csv_schema(capsys):
    code, out, _ = _run(capsys, "mc", "--model", "stickpull-counts",
                        "--t-end", "2", "--runs", "5", "--grid-points", "2")
    assert code == 0
    assert out.splitlines()[0] == "t,s_mean,s_stderr,g_mean,g_stderr"


def test_exact_csv(capsys):
    code, out, _ = _run(capsys, "exact", "--model", "stickpull-counts",
                        "--t-end", "2", "--dt", "0.01")
    assert code == 0
    assert out.splitlines()[0] == "t,s,g"


def test_exact_rejects_delayed_model(capsys):
    code, _, err = _run(capsys, "exact", "--model", "stickpull-delayed",
                        "--t-end", "1")
    assert code == 2


def test_compare_has_gap_columns(capsys):
    code, out, _ = _run(capsys, "compare", "--model", "stickpull-counts",
                        "--t-end", "2", "--runs", "5", "--grid-points", "2")
    assert code == 0
    header = out.splitlines()[0].split(",")
    assert "s_gap_exact" in header
    assert "s_gap_mc" in header


def test_numeric_failure_exit_3(capsys, tmp_path):
    # a rate that blows up in finite time
    f = tmp_path / "explode.mas"
    f.write_text("state a = 1\nstate b = 0\n"
                 "rate(a * a * a * 1e6): a -> b\nrate(b * b * b * 1e6): b -> a\n")
    code, _, err = _run(capsys, "run", "--model", str(f),
                        "--t-end", "10", "--dt", "0.5")
    assert code == 3


def test_difference_model_runs_by_steps(capsys):
    code, out, _ = _run(capsys, "run", "--model", "collab-difference",
                        "--steps", "10")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0].startswith("t,s,")
    assert len(lines) == 12
