import copy
import csv
import io
import json
import math
from pathlib import Path

import numpy as np
import pytest

from twotime.cli import run_command
from twotime.documents import dumps, fmt, parse_scenario, serialize_scenario
from twotime.errors import ParseError, ValidationError
from twotime.qcore import make_projector
from twotime.scenario import pauli_embed, random_scenario, three_boxes_preset
from twotime.twostate import ProjectiveDecomposition, TwoTimeState, abl_probabilities, weak_value

DATA = Path(__file__).parent / "data"


def _same(a, b, tol):
    assert a.dim == b.dim and a.name == b.name
    for x, y in ((a.epsilon, b.epsilon), (a.t_i, b.t_i), (a.t_f, b.t_f)):
        assert abs(x - y) <= tol
    assert np.max(np.abs(a.pre - b.pre)) <= tol
    assert np.max(np.abs(a.post - b.post)) <= tol
    assert len(a.segments) == len(b.segments) and len(a.events) == len(b.events)
    for s, t in zip(a.segments, b.segments):
        assert abs(s.t_start - t.t_start) <= tol and abs(s.t_end - t.t_end) <= tol
        assert np.max(np.abs(s.H.matrix - t.H.matrix)) <= tol
    for e, f in zip(a.events, b.events):
        assert abs(e.time - f.time) <= tol and e.label == f.label
        assert np.max(np.abs(e.U - f.U)) <= tol
    assert a.schedule.keys() == b.schedule.keys()


def test_round_trip_preset():
    s = three_boxes_preset(1.0)
    back = parse_scenario(dumps(serialize_scenario(s)))
    _same(s, back, 1e-15)


def test_round_trip_random(rng):
    for _ in range(20):
        s = random_scenario(rng)
        _same(s, parse_scenario(dumps(serialize_scenario(s))), 1e-15)


def test_non_hermitian_names_segment():
    doc = serialize_scenario(three_boxes_preset())
    doc["segments"][0]["H"][0][1] = [1.0, 0.5]
    with pytest.raises(ValidationError, match=r"segments\[0\]\.H"):
        parse_scenario(doc)


@pytest.mark.parametrize(
    "mutate, path",
    [
        (lambda d: d.pop("t_f"), "t_f"),
        (lambda d: d.__setitem__("dim", "three"), "dim"),
        (lambda d: d["segments"][0]["H"][1].__setitem__(2, [0.0]), "segments[0].H[1][2]"),
        (lambda d: d["pre"].__setitem__(1, ["x", 0.0]), "pre[1][0]"),
        (lambda d: d["segments"][0].pop("t_end"), "segments[0].t_end"),
        (lambda d: d.__setitem__("events", {}), "events"),
    ],
)
def test_parse_error_paths(mutate, path):
    doc = copy.deepcopy(serialize_scenario(three_boxes_preset()))
    mutate(doc)
    with pytest.raises(ParseError) as info:
        parse_scenario(doc)
    assert info.value.path == path


def test_bad_json_text():
    with pytest.raises(ParseError):
        parse_scenario("{not json")


def test_normalization_rules():
    doc = serialize_scenario(three_boxes_preset())
    doc["pre"] = [[0.5773505, 0.0], [0.0, 0.5773505], [0.5773505, 0.0]]
    s = parse_scenario(doc)
    assert abs(np.linalg.norm(s.pre) - 1) < 1e-15
    doc["pre"] = [[0.6, 0.0], [0.0, 0.6], [0.6, 0.0]]
    with pytest.raises(ValidationError):
        parse_scenario(doc)


def test_hand_written_document_matches_preset():
    s = parse_scenario((DATA / "three_boxes.json").read_text())
    preset = three_boxes_preset(1.0)
    _same(s, parse_scenario(serialize_scenario(s)), 1e-15)
    tt, ref = TwoTimeState(s), TwoTimeState(preset)
    ops = [make_projector(3, k) for k in range(3)] + [pauli_embed(a, 3) for a in "xyz"]
    for t in np.linspace(0, math.pi, 50):
        for A in ops:
            assert abs(weak_value(tt, A, t).value - weak_value(ref, A, t).value) <= 1e-12
    p = abl_probabilities(tt, ProjectiveDecomposition.boxes(3), s.time("t2"))
    assert p == pytest.approx([0, 0, 1], abs=1e-12)


def test_fmt_and_dumps():
    assert fmt(0.1) == "0.10000000000000001"
    assert float(fmt(math.pi)) == math.pi
    assert dumps({"a": [1.0, 2], "b": None, "c": float("nan")}) == '{\n  "a": [1, 2],\n  "b": null,\n  "c": null\n}'


def _rows(path):
    return list(csv.DictReader(io.StringIO(Path(path).read_text())))


def test_cli_weak_sweep(tmp_path):
    out = tmp_path / "w.csv"
    res = run_command(["weak-sweep", "--preset", "three-boxes", "--observables", "P1,P2,P3,SY", "--steps", "200", "--out", str(out)])
    assert res.exit_code == 0 and res.artifacts == [str(out)]
    rows = _rows(out)
    assert len(rows) == 800
    first = {r["observable"]: float(r["re"]) for r in rows[:4]}
    assert first["P1"] == pytest.approx(1, abs=1e-12)
    assert first["P2"] == pytest.approx(-1, abs=1e-12)
    assert first["P3"] == pytest.approx(1, abs=1e-12)


def test_cli_abl_t2(tmp_path):
    out = tmp_path / "abl.csv"
    assert run_command(["abl", "--preset", "three-boxes", "--time", "t2", "--projectors", "boxes", "--out", str(out)]).exit_code == 0
    p = [float(r["p"]) for r in _rows(out)]
    assert p == pytest.approx([0, 0, 1], abs=1e-12)


def test_cli_mc_rate(tmp_path):
    out = tmp_path / "mc.json"
    assert run_command(["mc", "--preset", "three-boxes", "--trials", "100000", "--seed", "42", "--out", str(out)]).exit_code == 0
    doc = json.loads(out.read_text())
    rate = doc["postselected"] / doc["total_trials"]
    assert abs(rate - 1 / 9) <= 4 * math.sqrt((1 / 9) * (8 / 9) / 1e5)


def test_cli_scenario_file_and_event(tmp_path):
    out = tmp_path / "p.json"
    argv = ["pointer", "--scenario", str(DATA / "three_boxes.json"), "--event", "solenoid@t2",
            "--observable", "SY", "--time", "t2", "--out", str(out)]
    assert run_command(argv).exit_code == 0
    doc = json.loads(out.read_text())
    assert doc["estimate_re"] == pytest.approx(2, abs=0.05)


def test_cli_deterministic_set_and_theorem(tmp_path):
    out = tmp_path / "d.csv"
    assert run_command(["deterministic-set", "--time", "t2", "--out", str(out)]).exit_code == 0
    kinds = {r["observable"]: r["kind"] for r in _rows(out)}
    assert kinds["P3"] == "deterministic" and kinds["SY"] == "anomalous"
    out = tmp_path / "t.json"
    assert run_command(["theorem-check", "--random", "20", "--seed", "3", "--out", str(out)]).exit_code == 0
    assert json.loads(out.read_text())["violations"] == 0


def test_cli_preset_round_trip(tmp_path):
    out = tmp_path / "s.json"
    assert run_command(["preset", "three-boxes", "--epsilon", "1", "--out", str(out)]).exit_code == 0
    _same(parse_scenario(out.read_text()), three_boxes_preset(1.0), 1e-15)


@pytest.mark.parametrize(
    "argv",
    [
        ["mc", "--trials", "20000", "--seed", "7", "--time", "0.4"],
        ["weak-sweep", "--steps", "31", "--observables", "P1,SX"],
        ["pointer", "--observable", "P2", "--time", "t1", "--points", "256", "--length", "20"],
    ],
)
def test_cli_byte_identical(tmp_path, argv):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run_command(argv + ["--out", str(a)]).exit_code == 0
    assert run_command(argv + ["--out", str(b)]).exit_code == 0
    assert a.read_bytes() == b.read_bytes()


def test_cli_mc_workers_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    base = ["mc", "--trials", "30000", "--seed", "1", "--time", "t1"]
    run_command(base + ["--out", str(a)])
    run_command(base + ["--workers", "4", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_cli_exit_codes(tmp_path, capsys):
    assert run_command(["abl", "--bogus"]).exit_code == 2
    assert run_command(["abl", "--time", "t9"]).exit_code == 1
    assert "TimeRangeError" in capsys.readouterr().err
    assert run_command(["weak-sweep", "--observables", "Q7"]).exit_code == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"dim": 3}')
    assert run_command(["abl", "--scenario", str(bad), "--time", "0"]).exit_code == 2
    assert "ParseError" in capsys.readouterr().err


def test_cli_no_partial_file_on_error(tmp_path):
    out = tmp_path / "never.json"
    s = three_boxes_preset()
    doc = serialize_scenario(s)
    doc["post"] = [[0.7071067811865476, 0.0], [0.0, 0.0], [0.7071067811865476, 0.0]]
    scen = tmp_path / "orth.json"
    scen.write_text(dumps(doc))
    res = run_command(["mc", "--scenario", str(scen), "--trials", "1000", "--out", str(out)])
    assert res.exit_code == 1
    assert not out.exists()
    assert list(tmp_path.iterdir()) == [scen]
