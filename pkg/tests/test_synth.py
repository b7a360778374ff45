import hashlib
import math

import numpy as np
import pytest

from trussgrasp import synth
from trussgrasp._validation import Label
from trussgrasp.exceptions import ManifestError, SpecViolation
from trussgrasp.tomato import center_of_mass


def three_tomato_spec(**kw):
    return synth.TrussSpec(
        peduncle=[[-120, 0], [120, 0]],
        pedicels=[synth.Pedicel(a, (-1) ** k * math.radians(80), 16) for k, a in enumerate((40, 120, 200))],
        tomatoes=[synth.TomatoSpec(k, 20) for k in range(3)],
        **kw,
    )


def test_three_tomato_scene():
    img, truth = synth.render(three_tomato_spec())
    assert img.shape == (480, 640, 3) and img.dtype == np.uint8
    assert len(truth.circles) == 3
    assert truth.junctions.shape == (3, 2)
    assert list(truth.junction_arcs_mm) == [40, 120, 200]
    # junction 0 at 40 mm along a peduncle starting at -120 mm, image centre, 2 px/mm
    assert truth.junctions[0] == pytest.approx((320 - 160, 240))
    assert truth.com == pytest.approx(center_of_mass(truth.circles).point)
    assert truth.candidates_mm == [(70.0, 90.0), (150.0, 170.0)]


def test_tomato_centres_follow_pedicels():
    spec = three_tomato_spec()
    _, truth = synth.render(spec)
    for j, c, p in zip(truth.junctions, truth.circles, spec.pedicels):
        assert math.hypot(c.x - j[0], c.y - j[1]) == pytest.approx((p.length + 20) * 2)


def test_stem_only_scene():
    spec = synth.TrussSpec(peduncle=[[-100, 0], [100, 0]])
    img, truth = synth.render(spec)
    assert truth.circles == []
    assert truth.com is None
    assert not (truth.mask == Label.TOMATO).any()
    assert (truth.mask == Label.STEM).any()


def test_render_deterministic():
    spec = three_tomato_spec(noise_sigma=3.0, highlights=True)
    a, _ = synth.render(spec, seed=9)
    b, _ = synth.render(spec, seed=9)
    assert a.tobytes() == b.tobytes()
    c, _ = synth.render(spec, seed=10)
    assert a.tobytes() != c.tobytes()


def test_different_seeds_give_different_scenes():
    a = synth.corpus(3, seed=1)
    b = synth.corpus(3, seed=2)
    ha = {hashlib.sha256(img.tobytes()).hexdigest() for img, _ in a}
    hb = {hashlib.sha256(img.tobytes()).hexdigest() for img, _ in b}
    assert len(ha) == 3 and not ha & hb


def test_corpus_sizes():
    assert len(synth.corpus(1)) == 1
    assert len(synth.corpus(84, seed=0)) == 84
    with pytest.raises(ValueError):
        synth.corpus(0)


@pytest.mark.parametrize("difficulty", synth.DIFFICULTIES)
def test_raster_matches_truth_circles(difficulty):
    for img, truth in synth.corpus(10, seed=3, difficulty=difficulty):
        yy, xx = np.mgrid[: truth.mask.shape[0], : truth.mask.shape[1]]
        inside = np.zeros(truth.mask.shape, dtype=bool)
        for c in truth.circles:
            inside |= (xx - c.x) ** 2 + (yy - c.y) ** 2 <= c.r**2
        red = (img[..., 0].astype(int) - img[..., 2]) > 60
        assert (red[inside]).mean() >= 0.99


def test_realistic_scene_properties():
    for img, truth in synth.corpus(10, seed=5, difficulty="realistic"):
        assert len(truth.circles) == 5
        # only the single long gap between junctions can host a grasp
        assert len(truth.candidates_mm) == 1


def test_spec_violations():
    with pytest.raises(SpecViolation):
        synth.render(synth.TrussSpec(peduncle=[[-400, 0], [400, 0]]))
    overlap = synth.TrussSpec(
        peduncle=[[-100, 0], [100, 0]],
        pedicels=[synth.Pedicel(90, math.pi / 2, 16), synth.Pedicel(100, math.pi / 2, 16)],
        tomatoes=[synth.TomatoSpec(0, 20), synth.TomatoSpec(1, 20)],
    )
    with pytest.raises(SpecViolation):
        synth.render(overlap)
    bent = synth.TrussSpec(peduncle=[[-60, 0], [0, 0], [0, 80]])
    with pytest.raises(SpecViolation):
        synth.render(bent)


def test_spec_round_trip():
    spec = three_tomato_spec()
    again = synth.TrussSpec.from_dict(spec.to_dict())
    a, _ = synth.render(spec)
    b, _ = synth.render(again)
    assert np.array_equal(a, b)


def read_all(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_write_corpus_is_idempotent(tmp_path):
    m1 = synth.write_corpus(tmp_path / "a", 3, seed=42)
    first = read_all(tmp_path / "a")
    synth.write_corpus(tmp_path / "a", 3, seed=42)
    assert read_all(tmp_path / "a") == first
    synth.write_corpus(tmp_path / "b", 3, seed=42)
    assert read_all(tmp_path / "b") == first
    assert len([n for n in first if n.endswith(".png") and "mask" not in n]) == 3
    manifest, base = synth.load_manifest(m1)
    assert manifest["n"] == 3 and manifest["seed"] == 42
    img, truth = synth.load_scene(base, manifest["scenes"][0])
    ref_img, ref_truth = synth.corpus(3, seed=42)[0]
    assert np.array_equal(img, ref_img)
    assert np.array_equal(truth.mask, ref_truth.mask)
    assert np.allclose(truth.junctions, ref_truth.junctions)


def test_load_manifest_errors(tmp_path):
    bad = tmp_path / "m.json"
    bad.write_text('{"schema_version": 1, "scenes": []}')
    with pytest.raises(ManifestError):
        synth.load_manifest(bad)
    bad.write_text('{"scenes": [{"image": "a.png", "truth": "a.json"}]}')
    with pytest.raises(ManifestError):
        synth.load_manifest(bad)
    bad.write_text('{"schema_version": 1, "scenes": [{"image": "a.png"}]}')
    with pytest.raises(ManifestError):
        synth.load_manifest(bad)
