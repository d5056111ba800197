from __future__ import annotations

import json
import subprocess
import sys

import pytest

from gameconn.cli import build_parser, main
from gameconn.game import dump_game, figure_one_game


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_classify_bundled_figure(capsys, tmp_path):
    dot = tmp_path / "g.dot"
    code, out, _ = run_cli(capsys, "classify", "@figure1", "--emit-dot", str(dot))
    assert code == 0
    rec = json.loads(out)
    assert rec["num_pne"] == 2 and rec["connected"] and rec["super_connected"] and not rec["acyclic"]
    assert dot.read_text().count("->") == 12


def test_classify_file_and_vertex_flags(capsys, tmp_path):
    path = tmp_path / "g.json"
    dump_game(figure_one_game(), path)
    code, out, _ = run_cli(capsys, "classify", str(path), "--vertex-flags")
    assert code == 0 and len(json.loads(out)["v_connected"]) == 8


def test_enumerate(capsys):
    code, out, _ = run_cli(capsys, "enumerate", "--players", "2", "--actions", "2")
    data = json.loads(out)
    assert code == 0
    assert (data["with_pne"], data["total"]) == (14, 16)
    assert data["given_pne"]["connected"]["value"] == 1
    assert (data["given_pne"]["super_connected"]["numerator"], data["given_pne"]["super_connected"]["denominator"]) == (1, 7)


def test_figure2_deterministic(capsys, tmp_path):
    args = ["figure2", "--players", "2..3", "--actions", "2", "--trials", "200", "--seed", "7"]
    code, first, _ = run_cli(capsys, *args)
    assert code == 0
    _, again, _ = run_cli(capsys, *args, "--threads", "2")
    assert first == again
    rows = first.splitlines()
    assert rows[0] == "shape_n,shape_k,flag,trials,successes,proportion,ci_low,ci_high,seed"
    assert len(rows) == 7
    out = tmp_path / "f.svg"
    assert main(args + ["--format", "svg", "--out", str(out)]) == 0
    assert out.read_text().startswith("<svg")


def test_figure2_cells_and_config(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# small run\ntrials = 100\nseed = 3\ncells = 2:2 3:3\nflags = connected\n")
    code, out, _ = run_cli(capsys, "figure2", "--config", str(cfg))
    assert code == 0
    rows = out.splitlines()[1:]
    assert [r.split(",")[:3] for r in rows] == [["2", "2", "connected"], ["3", "3", "connected"]]
    # command-line options win over the file
    _, out2, _ = run_cli(capsys, "figure2", "--config", str(cfg), "--trials", "50")
    assert out2.splitlines()[1].split(",")[3] == "50"


def test_seed_from_environment(capsys, monkeypatch):
    monkeypatch.setenv("GAMECONN_SEED", "11")
    _, env_out, _ = run_cli(capsys, "sample", "--players", "3", "--winners-only")
    _, flag_out, _ = run_cli(capsys, "sample", "--players", "3", "--winners-only", "--seed", "11")
    _, other, _ = run_cli(capsys, "sample", "--players", "3", "--winners-only", "--seed", "12")
    assert env_out == flag_out != other


def test_sample_conditioned(capsys):
    code, out, _ = run_cli(capsys, "sample", "--players", "3", "--actions", "2,3,2", "--count", "3", "--condition", "pne=1")
    games = json.loads(out)
    assert code == 0 and len(games) == 3 and games[0]["k"] == [2, 3, 2]


@pytest.mark.parametrize(
    "argv",
    [
        ["figure2", "--players", "x"],
        ["figure2", "--flags", "loopy"],
        ["figure2", "--cells", "3"],
        ["figure2", "--trials", "0"],
        ["sample", "--players", "3", "--actions", "2,2"],
        ["sample", "--players", "1"],
        ["dynamics", "--players", "4", "--p", "1.5"],
        ["enumerate", "--players", "2,3"],
        ["nonsense"],
        ["figure2", "--unknown-flag"],
        ["figure2", "--config", "/does/not/exist"],
    ],
)
def test_usage_errors_exit_1(capsys, argv):
    code, out, err = run_cli(capsys, *argv)
    assert code == 1
    assert "usage:" in err and "error:" in err
    assert out == ""


def test_runtime_errors_exit_2(capsys, tmp_path):
    code, _, err = run_cli(capsys, "reach-stats", "--players", "17")
    assert code == 2 and "budget" in err
    code, _, err = run_cli(capsys, "classify", str(tmp_path / "missing.json"))
    assert code == 2
    code, _, _ = run_cli(capsys, "enumerate", "--players", "4", "--actions", "3")
    assert code == 2


def test_dynamics_outputs(capsys, tmp_path):
    traj = tmp_path / "t.txt"
    code, out, _ = run_cli(
        capsys, "dynamics", "--players", "4", "--fixture", "sticky", "--trials", "2", "--starts", "2",
        "--steps", "500", "--trajectory", str(traj),
    )
    rows = out.splitlines()
    assert code == 0 and rows[0] == "seed,game,start,absorbed,steps,final"
    assert all(r.split(",")[3] == "0" for r in rows[1:])
    assert len(traj.read_text().split()) == 501
    code, out, _ = run_cli(capsys, "dynamics", "--players", "5", "--trials", "3", "--format", "json")
    assert code == 0 and json.loads(out)["runs"] == 30


def test_pne_dist_and_reach_stats(capsys):
    code, out, _ = run_cli(capsys, "pne-dist", "--players", "6", "--trials", "200")
    assert code == 0 and out.startswith("z,count,frequency,poisson")
    code, out, _ = run_cli(capsys, "reach-stats", "--players", "5", "--trials", "5", "--format", "json")
    assert code == 0 and json.loads(out)["threshold"] == 1.0


def test_every_subcommand_has_help():
    parser = build_parser()
    sub = next(a for a in parser._actions if a.__class__.__name__ == "_SubParsersAction")
    assert set(sub.choices) == {"sample", "classify", "figure2", "pne-dist", "reach-stats", "dynamics", "enumerate"}
    for p in sub.choices.values():
        assert p.description


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "gameconn", "classify", "@figure1"], capture_output=True, text=True)
    assert res.returncode == 0 and json.loads(res.stdout)["super_connected"] is True
