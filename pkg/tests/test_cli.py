import json
import socket

import numpy as np
import pytest

from conftest import S2_MISSION, S2_MODIFIED, S3_MISSION, load_scenario
from sff.cli import main
from sff.fields import Grid, ValueField, write_field
from sff.stl import Trajectory, parse_stl, robustness


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, [json.loads(line) for line in out.splitlines() if line.strip()]


@pytest.fixture
def no_network(monkeypatch):
    def refuse(*args, **kw):
        raise OSError("network access is disabled in tests")

    monkeypatch.setattr(socket.socket, "connect", refuse)
    monkeypatch.setattr(socket, "create_connection", refuse)


def test_translate_ok(capsys):
    code, (doc,) = run(capsys, "translate", "--scenario", "scenario1", "--adapter", "gpt4o-scenario1",
                       "--command", "pick up the kids")
    assert code == 0 and doc["stl_formula"].startswith("G[0,60]")


def test_translate_error_exit_3(capsys, tmp_path, monkeypatch):
    from sff import feedback

    monkeypatch.setattr(feedback.FixtureAdapter, "complete",
                        lambda self, s, u: '{"stl_formula": "G[0,60](!nosuch)", "atomic_predicates": {}}')
    code, (doc,) = run(capsys, "translate", "--scenario", "scenario1", "--adapter", "gpt4o-scenario1",
                       "--command", "x")
    assert code == 3 and doc["error"] == "TranslationError"
    assert "nosuch" in doc["raw"]


def test_check_modified_mission_exit_4(capsys):
    code, (doc,) = run(capsys, "check", "--scenario", "scenario2", "--stl", S2_MODIFIED, "--level", "1")
    assert code == 4 and doc["decision"] == "Reject"
    assert [doc["verdicts"][i]["formula"] for i in doc["inf"]] == ["F[0,30] (g2 & r1)"]


def test_check_proceed_exit_0(capsys):
    code, (doc,) = run(capsys, "check", "--scenario", "scenario2", "--stl", S2_MISSION, "--level", "1")
    assert code == 0 and doc["decision"] == "Proceed"


def test_check_dumps_fields(capsys, tmp_path):
    code, (doc,) = run(capsys, "check", "--scenario", "scenario2", "--stl", "F[0,30] g1", "--level", "1",
                       "--dump-fields", str(tmp_path))
    assert code == 0 and (tmp_path / "subformula_0.bin").exists()


def test_plan_scenario3_level0(capsys, tmp_path):
    lp = tmp_path / "m.lp"
    code, (doc,) = run(capsys, "plan", "--scenario", "scenario3", "--stl", S3_MISSION, "--level", "0",
                       "--export-lp", str(lp))
    assert code == 0
    sc = load_scenario("scenario3")
    traj = Trajectory(doc["dt"], np.asarray(doc["states"]))
    for conj in parse_stl(S3_MISSION, sc.table).items:
        assert robustness(traj, 0, conj, sc) >= 0
    assert lp.read_text().startswith("\\") and "Binaries" in lp.read_text()


def test_plan_rejected_exit_4(capsys):
    code, _ = run(capsys, "plan", "--scenario", "scenario2", "--stl", S2_MODIFIED, "--level", "1")
    assert code == 4


def test_plan_infeasible_exit_5(capsys):
    # Each subformula is feasible alone; together they ask for two places at once.
    code, (doc,) = run(capsys, "plan", "--scenario", "scenario2", "--stl", "G[0,30] g1 & G[0,30] g2",
                       "--level", "1", "--skip-check")
    assert code == 5 and doc["error"] == "Infeasible"


def test_bad_formula_exit_1(capsys):
    assert main(["check", "--scenario", "scenario2", "--stl", "F[0,30] (g1 &", "--level", "1"]) == 1
    assert "StlSyntaxError" in capsys.readouterr().err


def test_missing_scenario_exit_1(capsys, tmp_path):
    assert main(["check", "--scenario", str(tmp_path / "nope.json"), "--stl", "g1"]) == 1


def test_usage_error_exit_2(capsys):
    with pytest.raises(SystemExit) as info:
        main(["check", "--scenario", "scenario2"])
    assert info.value.code == 2


def test_pipeline_reject_offline(capsys, no_network):
    code, lines = run(capsys, "pipeline", "--scenario", "scenario1", "--adapter", "gpt4o-scenario1",
                      "--command", "pick up the kids")
    assert code == 4
    assert [d["stage"] for d in lines] == ["translate", "check", "feedback"]
    assert "g3" in lines[-1]["text"]


def test_pipeline_plan_offline(capsys, no_network):
    code, lines = run(capsys, "pipeline", "--scenario", "scenario2", "--adapter", "gpt4o-scenario2",
                      "--command", "visit both goals")
    assert code == 0
    assert [d["stage"] for d in lines] == ["translate", "check", "plan"]
    assert lines[-1]["robustness_original"] >= 0


def test_plot_map_only(capsys, tmp_path):
    out = tmp_path / "map.svg"
    assert main(["plot", "--scenario", "scenario1", "--out", str(out)]) == 0
    text = out.read_text()
    assert text.startswith("<svg") or text.startswith("<?xml")
    # Regions are drawn as polygons, each labelled with its name.
    for name in load_scenario("scenario1").regions:
        assert f">{name}</text>" in text
    assert text.count("<polygon") >= len(load_scenario("scenario1").regions)


def test_plot_deterministic_with_field_and_trajectory(capsys, tmp_path):
    sc = load_scenario("scenario3")
    g = Grid.from_bounds(sc.workspace.tolist(), (41, 41))
    h = ValueField(g, np.linalg.norm(g.states() - np.array([5.0, 5.0]), axis=-1) - 2.0)
    write_field(h, tmp_path / "f.bin")
    (tmp_path / "t.json").write_text(json.dumps({"states": [[2, 0.5], [4, 3], [8.5, 7]]}))
    outs = []
    for k in range(2):
        path = tmp_path / f"p{k}.svg"
        args = ["plot", "--scenario", "scenario3", "--field", str(tmp_path / "f.bin"),
                "--traj", str(tmp_path / "t.json"), "--out", str(path)]
        assert main(args) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]
    assert b"<polyline" in outs[0]
