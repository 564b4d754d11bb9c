import json
import subprocess
import sys

import pytest

from conftest import boxed, make_scenario
from dscd_nav.cli import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, main
from dscd_nav.scenario_io import save_scenario


@pytest.fixture
def suite_dir(tmp_path):
    d = tmp_path / "suite"
    for i, goal in enumerate([(8, 5), (9, 6)]):
        save_scenario(make_scenario(boxed(20, 20), (5, 5), goal, cell_size=0.1, name=f"tiny_{i}"), d / f"tiny_{i}.map")
    return d


def test_run_writes_trace(suite_dir, tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["run", str(suite_dir / "tiny_0.map"), "--out", str(out)]) == EXIT_OK
    assert "tiny_0: success in 1 steps" in capsys.readouterr().out
    assert (out / "tiny_0.jsonl").exists()


def test_batch_then_eval_and_render(suite_dir, tmp_path, capsys):
    out = tmp_path / "batch"
    assert main(["batch", str(suite_dir), "--out", str(out), "--workers", "1"]) == EXIT_OK
    capsys.readouterr()
    assert main(["eval", str(out), "--json"]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["sr"] == 1.0
    assert main(["eval", str(out), "--baseline", str(out)]) == EXIT_OK
    capsys.readouterr()
    svg = tmp_path / "t.svg"
    assert main(["render", str(out / "tiny_0.jsonl"), "--svg", str(svg)]) == EXIT_OK
    drawn = capsys.readouterr().out
    assert "S" in drawn and "T" in drawn
    assert svg.read_text().startswith("<svg")


def test_ablate_and_sweep(suite_dir, tmp_path, capsys):
    assert main(["ablate", str(suite_dir), "--configs", "full", "tsu-only", "rounds=2",
                 "--out", str(tmp_path / "abl")]) == EXIT_OK
    table = capsys.readouterr().out
    assert all(v in table for v in ("full", "tsu-only", "rounds=2"))
    assert (tmp_path / "abl" / "ablation.txt").read_text() == table
    assert main(["sweep-beta", str(suite_dir), "--out", str(tmp_path / "sw")]) == EXIT_OK
    assert len((tmp_path / "sw" / "sweep.txt").read_text().strip().splitlines()) >= 9


def test_generate(tmp_path, capsys):
    assert main(["generate", str(tmp_path / "g"), "-n", "3", "--families", "clutter"]) == EXIT_OK
    assert sorted(p.name for p in (tmp_path / "g").iterdir()) == [f"clutter_00{i}.map" for i in range(3)]


@pytest.mark.parametrize("argv", [
    [],
    ["fly"],
    ["run"],
    ["run", "missing.map"],
    ["batch", "no_such_dir"],
    ["ablate", "scenarios/acceptance", "--configs", "bogus"],
    ["eval", "no_such_trace.jsonl"],
    ["batch", "scenarios/acceptance", "--workers", "x"],
    ["generate", "/tmp/x", "--families", "maze"],
])
def test_usage_errors_exit_1(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        sys.exit(main(argv))
    assert exc.value.code == EXIT_USAGE


def test_bad_config_is_usage_error(suite_dir, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"rounds": 0}))
    assert main(["batch", str(suite_dir), "--config", str(cfg)]) == EXIT_USAGE
    cfg.write_text("{not json")
    assert main(["batch", str(suite_dir), "--config", str(cfg)]) == EXIT_USAGE


def test_runtime_failure_exits_2(suite_dir, tmp_path, monkeypatch):
    import dscd_nav.cli as cli

    def boom(*a, **k):
        raise RuntimeError("simulated crash")

    monkeypatch.setattr(cli, "run_suite", boom)
    assert main(["batch", str(suite_dir), "--out", str(tmp_path / "x")]) == EXIT_RUNTIME


def test_module_entry_point(suite_dir, tmp_path):
    res = subprocess.run([sys.executable, "-m", "dscd_nav", "run", str(suite_dir / "tiny_1.map"),
                          "--out", str(tmp_path / "m")], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    res = subprocess.run([sys.executable, "-m", "dscd_nav", "nope"], capture_output=True, text=True)
    assert res.returncode == 1
