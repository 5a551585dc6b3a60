import json

import pytest

from metachem.cli import main

GOOD = """
[nodes]
s:move sampler start
T:a tank
S:b sample
[control]
s:move -> s:move
[info]
s:move read,pull T:a
s:move read,push S:b
"""

ROGUE = """
[nodes]
a:rogue action start
T:t tank
[control]
a:rogue -> a:rogue
[info]
a:rogue io T:t
"""


@pytest.fixture
def write(tmp_path):
    def _w(name, text):
        p = tmp_path / name
        p.write_text(text)
        return str(p)

    return _w


def test_validate(write, capsys):
    assert main(["validate", write("g.mcg", GOOD)]) == 0
    assert "0 hard" in capsys.readouterr().out


def test_validate_hard_violation(write, capsys):
    assert main(["validate", write("r.mcg", ROGUE)]) == 1
    assert "ACCESS_PUSH" in capsys.readouterr().out


def test_validate_parse_error(write, capsys):
    assert main(["validate", write("bad.mcg", "[nodes]\nq:what\n")]) == 2
    assert main(["validate", "/no/such/file"]) == 2
    assert "error" in capsys.readouterr().err


def test_export_dot(write, tmp_path, capsys):
    out = tmp_path / "g.dot"
    assert main(["export-dot", write("g.mcg", GOOD), "-o", str(out)]) == 0
    text = out.read_text()
    assert text.startswith("digraph") and "s:move" in text
    assert main(["export-dot", write("g.mcg", GOOD)]) == 0
    assert capsys.readouterr().out == text


def test_usage_errors(capsys):
    assert main([]) == 2
    assert main(["run", "ja"]) == 2
    assert main(["run", "swarm", "--recipe", "/nope/recipe.txt"]) == 2
    assert main(["run", "stringcat", "--steps", "2", "--frames-every", "1"]) == 2


def test_run_stringcat_logs_are_reproducible(tmp_path, capsys):
    logs = []
    for name in ("a.log", "b.log"):
        p = tmp_path / name
        assert main(["run", "stringcat", "--seed", "5", "--max-transitions", "80", "--log-out", str(p)]) == 0
        logs.append(p.read_text())
    assert logs[0] == logs[1]
    lines = [json.loads(x) for x in logs[0].splitlines()]
    assert sum(e["depth"] == 0 for e in lines) == 80
    out = capsys.readouterr().out
    assert "transitions=80" in out and f"events={len(lines)}" in out


def test_run_swarm_frames_and_snapshot(tmp_path):
    frames, snap = tmp_path / "f.csv", tmp_path / "s.json"
    recipe = tmp_path / "r.txt"
    recipe.write_text("5 * (20, 1, 2, 0.1, 0.1, 1, 0, 0.5)\n")
    code = main(["run", "swarm", "--recipe", str(recipe), "--steps", "3", "--frames-every", "1", "--frames-out", str(frames), "--snapshot-out", str(snap)])
    assert code == 0
    rows = frames.read_text().splitlines()
    assert rows[0].startswith("step,boid_id") and len(rows) == 1 + 4 * 5
    doc = json.loads(snap.read_text())
    assert doc["halted"] is True and len(doc["particles"]["S:n"]) == 5


def test_run_with_config(tmp_path, capsys):
    conf = tmp_path / "c.txt"
    conf.write_text("[run]\nseed 2\n[nested]\nvariant IV\nrecipe 4 * (30, 1, 2, 0.1, 0.1, 1, 0, 0.5)\nsteps 3\n")
    log = tmp_path / "n.log"
    assert main(["run", "nested", "--config", str(conf), "--log-out", str(log)]) == 0
    assert "Transfer" not in log.read_text()
    assert "halted=True" in capsys.readouterr().out
    conf.write_text("[run]\nseed x\n")
    assert main(["run", "nested", "--config", str(conf)]) != 0


def test_run_ja_with_grid_transfers(tmp_path, capsys):
    conf = tmp_path / "c.txt"
    conf.write_text("[ja]\ntanks 4\natoms_per_tank 4\ntransfer_mode grid\ngrid_shape 2 2\n")
    assert main(["run", "ja", "--config", str(conf), "--max-transitions", "40"]) == 0
    conf.write_text("[ja]\ntanks 5\ntransfer_mode grid\ngrid_shape 2 2\n")
    assert main(["run", "ja", "--config", str(conf), "--max-transitions", "5"]) == 1
