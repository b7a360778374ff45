import json
import subprocess
import sys

import numpy as np
import pytest

from trussgrasp import synth
from trussgrasp._io import read_json, write_png
from trussgrasp.cli import main


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("corpus")
    synth.write_corpus(d, 2, seed=3)
    return d


def test_synth_writes_corpus(tmp_path):
    assert main(["synth", "--out", str(tmp_path / "c"), "--n", "2", "--seed", "42"]) == 0
    m = read_json(tmp_path / "c" / "manifest.json")
    assert m["n"] == 2 and m["seed"] == 42 and m["difficulty"] == "simple"
    names = sorted(p.name for p in (tmp_path / "c").iterdir())
    assert "scene_0000.png" in names and "scene_0001.json" in names


def test_synth_rerun_is_byte_identical(tmp_path):
    args = ["synth", "--out", str(tmp_path), "--n", "2", "--seed", "7", "--difficulty", "realistic"]
    main(args)
    first = {p.name: p.read_bytes() for p in tmp_path.iterdir()}
    main(args)
    assert {p.name: p.read_bytes() for p in tmp_path.iterdir()} == first
    assert read_json(tmp_path / "manifest.json")["difficulty"] == "realistic"


def test_synth_zero_scenes_is_usage_error(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["synth", "--out", str(tmp_path), "--n", "0"])
    assert exc.value.code == 1


def test_bad_seed_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["synth", "--out", str(tmp_path), "--seed", "-1"])
    assert exc.value.code == 1


def test_detect_scene(tmp_path, corpus_dir):
    out = tmp_path / "out"
    assert main(["detect", str(corpus_dir / "scene_0000.png"), "--out", str(out), "--overlay"]) == 0
    d = read_json(out / "scene_0000.json")
    assert d["ok"] and d["schema_version"] == 1
    assert len(d["tomatoes"]) == 4
    assert d["center_of_mass"] is not None
    assert len(d["peduncle"]["junctions"]) == 4
    assert d["grasp"]["waypoints"][0]["name"] == "pre_grasp"
    assert (out / "scene_0000_overlay.png").exists()
    assert read_json(out / "results.json")["results"]["scene_0000"] == d
    t = read_json(out / "timings.json")
    assert t["summary"]["n"] == 1 and t["per_image"]["scene_0000"]["total"] > 0


def test_detect_blank_image_records_failure(tmp_path):
    img = np.zeros((100, 100, 3), dtype=np.uint8)
    img[:] = synth.DEFAULT_PALETTE["background"]
    write_png(tmp_path / "blank.png", img)
    assert main(["detect", str(tmp_path / "blank.png"), "--out", str(tmp_path / "o")]) == 0
    d = read_json(tmp_path / "o" / "blank.json")
    assert not d["ok"]
    assert d["failure"]["error"] == "EmptyForeground"
    assert d["failure"]["stage"] == "segmentation"


def test_detect_unreadable_path(tmp_path):
    assert main(["detect", str(tmp_path / "missing.png"), "--out", str(tmp_path / "o")]) == 2
    (tmp_path / "junk.png").write_bytes(b"not an image")
    assert main(["detect", str(tmp_path / "junk.png"), "--out", str(tmp_path / "o")]) == 2


def test_detect_directory_with_workers(tmp_path, corpus_dir):
    out = tmp_path / "o"
    assert main(["detect", str(corpus_dir), "--out", str(out), "--workers", "2"]) == 0
    res = read_json(out / "results.json")["results"]
    # the corpus directory holds scenes and their label masks
    assert {"scene_0000", "scene_0001"} <= set(res)


def test_bad_config_is_usage_error(tmp_path, corpus_dir):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("grasp:\n  widht: 3\n")
    rc = main(["detect", str(corpus_dir / "scene_0000.png"), "--config", str(cfg), "--out", str(tmp_path)])
    assert rc == 1


def test_eval_one_scene(tmp_path):
    synth.write_corpus(tmp_path / "c", 1, seed=5)
    out = tmp_path / "r"
    assert main(["eval", str(tmp_path / "c" / "manifest.json"), "--out", str(out)]) == 0
    r = read_json(out / "report.json")
    assert r["n_scenes"] == 1
    assert r["tomatoes"]["fn"] == 0 and r["tomatoes"]["fp"] == 0
    assert r["errors"]["tomato_center"]["n"] == 4
    assert (out / "report.txt").read_text().startswith("scenes")


def test_eval_bad_manifests(tmp_path):
    m = tmp_path / "manifest.json"
    m.write_text(json.dumps({"schema_version": 1, "scenes": []}))
    assert main(["eval", str(m), "--out", str(tmp_path / "o")]) == 1
    m.write_text("{not json")
    assert main(["eval", str(m), "--out", str(tmp_path / "o")]) == 1
    assert main(["eval", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")]) == 2


def test_module_entry_point(tmp_path):
    r = subprocess.run(
        [sys.executable, "-m", "trussgrasp", "synth", "--out", str(tmp_path), "--n", "1"],
        capture_output=True,
        text=True,
    )
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "manifest.json").exists()
