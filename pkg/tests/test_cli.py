import hashlib
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from benthicvpr import io
from benthicvpr.cli import EXIT_CONFIG, EXIT_DATA, EXIT_OK, main, view_seed
from benthicvpr.fusion import RangeMap
from benthicvpr.geometry import Intrinsics
from benthicvpr.linking import ThresholdModel, conservative_iou_threshold
from benthicvpr.synthetic import SurveyPlan, TerrainModel, generate_scene


def digest(root):
    h = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if p.is_file():
            h.update(str(p.relative_to(root)).encode())
            h.update(p.read_bytes())
    return h.hexdigest()


# -- color-correct --------------------------------------------------------

def test_color_empty_dir(tmp_path, caplog):
    (tmp_path / "imgs").mkdir()
    assert main(["color-correct", "--images", str(tmp_path / "imgs"), "--out", str(tmp_path / "o")]) == EXIT_DATA
    assert "no images" in caplog.text


def test_color_two_images_hit_targets(tmp_path, rng):
    src = tmp_path / "imgs"
    src.mkdir()
    imgs = [rng.integers(10000, 50000, (8, 9, 3)) / 65535 for _ in range(2)]
    for i, img in enumerate(imgs):
        io.write_image(src / f"{i}.png", img, 16)
    assert main(["color-correct", "--images", str(src), "--out", str(tmp_path / "o")]) == EXIT_OK
    out = np.stack([io.read_image(tmp_path / "o" / f"{i}.png")[0] for i in range(2)])
    stats = io.read_pixel_stats(tmp_path / "o" / "stats.pxs")
    assert stats.count == 2
    ok = np.all((out > 0) & (out < 1), axis=0) & (stats.std > 1e-3)
    np.testing.assert_allclose(out.mean(axis=0)[ok], 0.35, atol=1e-4)
    np.testing.assert_allclose(out.std(axis=0)[ok], 0.12, atol=1e-4)


def test_color_mismatched_dimensions(tmp_path):
    src = tmp_path / "imgs"
    src.mkdir()
    io.write_image(src / "a.png", np.zeros((4, 4)))
    io.write_image(src / "b.png", np.zeros((5, 4)))
    assert main(["color-correct", "--images", str(src), "--out", str(tmp_path / "o")]) == EXIT_DATA


# -- fuse -----------------------------------------------------------------

def _affine_fixture(root):
    st, rel = root / "st", root / "rel"
    st.mkdir()
    rel.mkdir()
    z = 1.0 + np.add.outer(np.arange(20), np.arange(30)) / 16.0
    io.write_range_map(st / "v1.rmp", RangeMap(z))
    io.write_range_map(rel / "v1.rmp", RangeMap((z - 0.5) / 2.0))
    return st, rel


def test_fuse_exact_affine(tmp_path):
    st, rel = _affine_fixture(tmp_path)
    args = ["fuse", "--stereo-dir", str(st), "--relative-dir", str(rel), "--out", str(tmp_path / "f"), "--seed", "3"]
    assert main(args) == EXIT_OK
    (rec,) = io.read_jsonl(tmp_path / "f" / "scale_offset.jsonl")
    assert rec["view_id"] == "v1"
    assert rec["a"] == pytest.approx(2.0, abs=1e-9)
    assert rec["b"] == pytest.approx(0.5, abs=1e-9)
    first = (tmp_path / "f" / "scale_offset.jsonl").read_bytes()
    assert main(args) == EXIT_OK
    assert (tmp_path / "f" / "scale_offset.jsonl").read_bytes() == first


def test_fuse_missing_stereo(tmp_path):
    st, rel = _affine_fixture(tmp_path)
    (st / "v1.rmp").unlink()
    args = ["fuse", "--stereo-dir", str(st), "--relative-dir", str(rel), "--out", str(tmp_path / "f"), "--seed", "3"]
    assert main(args) == EXIT_DATA


def test_fuse_requires_seed(tmp_path):
    st, rel = _affine_fixture(tmp_path)
    assert main(["fuse", "--stereo-dir", str(st), "--relative-dir", str(rel), "--out", str(tmp_path / "f")]) == EXIT_CONFIG


def test_fuse_bad_parameters(tmp_path):
    st, rel = _affine_fixture(tmp_path)
    args = ["fuse", "--stereo-dir", str(st), "--relative-dir", str(rel), "--out", str(tmp_path / "f"), "--seed", "1"]
    assert main(args + ["--huber-delta", "-1"]) == EXIT_CONFIG
    assert main(args + ["--valid-min", "5", "--valid-max", "1"]) == EXIT_CONFIG


def test_view_seed_is_stable():
    assert view_seed(7, "V0_00001") == view_seed(7, "V0_00001")
    assert view_seed(7, "V0_00001") != view_seed(7, "V0_00002")


# -- footprints -----------------------------------------------------------

@pytest.fixture(scope="module")
def flat_inputs(tmp_path_factory):
    root = tmp_path_factory.mktemp("flat")
    intr = Intrinsics.from_fov(160, 120, math.radians(45), math.radians(34))
    plans = {
        "V0": SurveyPlan(1.2, 0.6, 2.0, (-2, 2, -2, 2), attitude_noise=0.05, seed=1, t_start=0),
        "V1": SurveyPlan(1.2, 0.6, 2.0, (-2, 2, -2, 2), attitude_noise=0.05, position_noise=0.1, seed=2, t_start=1e6),
    }
    scene = generate_scene(TerrainModel.flat(-0.5), plans, intr)
    io.write_calibration(root / "cal.json", {scene.camera_id: (intr, scene.extrinsic)})
    io.write_poses(root / "poses.jsonl", scene.frame, scene.views)
    (root / "rm").mkdir()
    for vid, rm in scene.range_maps.items():
        io.write_range_map(root / "rm" / f"{vid}.rmp", rm)
    return root, scene


def _fp_args(root, out):
    return ["footprints", "--calibration", str(root / "cal.json"), "--poses", str(root / "poses.jsonl"),
            "--range-dir", str(root / "rm"), "--out", str(out)]


def test_footprints_flat_scene_matches_analytic(flat_inputs, tmp_path):
    root, scene = flat_inputs
    assert main(_fp_args(root, tmp_path)) == EXIT_OK
    rings = io.geojson_rings(tmp_path / "footprints.geojson", scene.frame)
    assert set(rings) == set(scene.footprints_2d)
    for vid, ring in rings.items():
        np.testing.assert_allclose(ring, scene.footprints_2d[vid].ring, atol=1e-6)
    _, fps, _ = io.read_footprints_jsonl(tmp_path / "footprints_3d.jsonl")
    for fp in fps:
        np.testing.assert_allclose(fp.local, scene.footprints[fp.view_id].local, atol=1e-6)
    assert json.loads((tmp_path / "skipped.json").read_text()) == []


def test_footprints_skip_invalid_corner(flat_inputs, tmp_path):
    root, scene = flat_inputs
    bad = tmp_path / "in"
    (bad / "rm").mkdir(parents=True)
    for f in ("cal.json", "poses.jsonl"):
        (bad / f).write_bytes((root / f).read_bytes())
    for p in (root / "rm").iterdir():
        (bad / "rm" / p.name).write_bytes(p.read_bytes())
    victim = scene.views[3].view_id
    v = io.read_range_map(bad / "rm" / f"{victim}.rmp").values.copy()
    v[-30:, -30:] = np.nan
    io.write_range_map(bad / "rm" / f"{victim}.rmp", RangeMap(v))
    assert main(_fp_args(bad, tmp_path / "o")) == EXIT_OK
    skipped = json.loads((tmp_path / "o" / "skipped.json").read_text())
    assert [s["view_id"] for s in skipped] == [victim]
    feats = json.loads((tmp_path / "o" / "footprints.geojson").read_text())["features"]
    assert victim not in {f["properties"]["view_id"] for f in feats}
    assert len(feats) == len(scene.views) - 1


def test_footprints_empty_poses(flat_inputs, tmp_path):
    root, _ = flat_inputs
    (tmp_path / "poses.jsonl").write_text("")
    (tmp_path / "cal.json").write_bytes((root / "cal.json").read_bytes())
    (tmp_path / "rm").mkdir()
    assert main(_fp_args(tmp_path, tmp_path / "o")) == EXIT_DATA


# -- link -----------------------------------------------------------------

def test_link_from_threshold_model(flat_inputs, tmp_path):
    root, scene = flat_inputs
    assert main(_fp_args(root, tmp_path / "fp")) == EXIT_OK
    args = ["link", "--footprints", str(tmp_path / "fp" / "footprints_3d.jsonl"), "--out", str(tmp_path / "l"),
            "--fov", "34", "--altitude", "2", "--translation-error", "0.16"]
    assert main(args) == EXIT_OK
    (rec,) = json.loads((tmp_path / "l" / "link_stats.json").read_text())
    tau = conservative_iou_threshold(ThresholdModel(math.radians(34), 2.0, 0.16))
    assert rec["tau_f"] == tau
    links = io.read_links(tmp_path / "l" / "V1__V0.links.jsonl")
    assert all(l.iou > tau for l in links)
    assert rec["link_count"] == len(links)
    loc = io.read_links(tmp_path / "l" / "V1__V0.location.jsonl")
    assert all(l.center_distance < rec["tau_d"] for l in loc)
    assert rec["location"]["link_count"] == len(loc)


def test_link_config_errors(flat_inputs, tmp_path):
    root, _ = flat_inputs
    assert main(_fp_args(root, tmp_path / "fp")) == EXIT_OK
    base = ["link", "--footprints", str(tmp_path / "fp" / "footprints_3d.jsonl"), "--out", str(tmp_path / "l")]
    assert main(base) == EXIT_CONFIG
    assert main(base + ["--fov", "34", "--altitude", "2", "--translation-error", "9"]) == EXIT_CONFIG
    assert main(base + ["--tau-f", "0.07", "--tau-d", "far"]) == EXIT_CONFIG


def test_config_file_and_flag_precedence(flat_inputs, tmp_path):
    root, _ = flat_inputs
    assert main(_fp_args(root, tmp_path / "fp")) == EXIT_OK
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"footprints": str(tmp_path / "fp" / "footprints_3d.jsonl"), "out": str(tmp_path / "l"),
                               "tau_f": 0.3, "tau_d": 1.0}))
    assert main(["link", "--config", str(cfg)]) == EXIT_OK
    assert json.loads((tmp_path / "l" / "link_stats.json").read_text())[0]["tau_f"] == 0.3
    assert main(["link", "--config", str(cfg), "--tau-f", "0.1"]) == EXIT_OK
    assert json.loads((tmp_path / "l" / "link_stats.json").read_text())[0]["tau_f"] == 0.1
    cfg.write_text("[1, 2]")
    assert main(["link", "--config", str(cfg)]) == EXIT_CONFIG
    assert main(["link", "--config", str(tmp_path / "nope.json")]) == EXIT_CONFIG


def test_unknown_subcommand_exits_2():
    assert main(["frobnicate"]) == 2


# -- synth + eval ---------------------------------------------------------

def test_synth_eval_reports_planted_recall(tmp_path):
    syn = tmp_path / "syn"
    assert main(["synth", "--out", str(syn), "--seed", "4", "--region", "3", "--terrain", "flat"]) == EXIT_OK
    pair = "V1__V0"
    rep_path = tmp_path / "rep.json"
    args = ["eval", "--query-descriptors", str(syn / "descriptors" / f"{pair}.query.dsc"),
            "--db-descriptors", str(syn / "descriptors" / f"{pair}.db.dsc"),
            "--links", str(syn / "truth" / f"{pair}.links.jsonl"), "--out", str(rep_path),
            "--per-query-csv", str(tmp_path / "q.csv"), "--k-values", "1", "10", "5"]
    assert main(args) == EXIT_OK
    rep = json.loads(rep_path.read_text())
    planted = json.loads((syn / "truth" / f"{pair}.planted.json").read_text())
    links = io.read_links(syn / "truth" / f"{pair}.links.jsonl")
    by_q = links.by_query()
    hits = sum(1 for q, ranking in planted.items() if q in by_q and by_q[q] & set(ranking[:1]))
    assert rep["k_values"] == [1, 5, 10]
    assert rep["recall_at_k"][0] == hits / len(by_q)
    assert all(tp + fn == rep["link_count"] for tp, fn in zip(rep["tp_at_k"], rep["fn_at_k"]))
    rows = (tmp_path / "q.csv").read_text().splitlines()
    assert len(rows) == 1 + rep["valid_query_count"] + rep["invalid_query_count"]


def test_eval_unknown_query(tmp_path):
    syn = tmp_path / "syn"
    assert main(["synth", "--out", str(syn), "--seed", "4", "--region", "2", "--terrain", "flat"]) == EXIT_OK
    (tmp_path / "l.jsonl").write_text('{"q": "ghost", "d": "V0_00000", "iou": 0.5, "dist_m": 1.0}\n')
    args = ["eval", "--query-descriptors", str(syn / "descriptors" / "V1__V0.query.dsc"),
            "--db-descriptors", str(syn / "descriptors" / "V1__V0.db.dsc"),
            "--links", str(tmp_path / "l.jsonl"), "--out", str(tmp_path / "r.json")]
    assert main(args) == EXIT_DATA


def test_console_script_runs(tmp_path):
    r = subprocess.run([sys.executable, "-m", "benthicvpr.cli", "synth", "--out", str(tmp_path)],
                       capture_output=True, text=True)
    assert r.returncode == EXIT_CONFIG
    assert "--seed" in r.stderr
