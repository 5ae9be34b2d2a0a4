import json

import numpy as np
import pytest

from oracles import fnv1a64_reference
from uavinspect.cli import main, read_config
from uavinspect.geometry import PointCloud, save_point_cloud
from uavinspect.imaging import write_gray
from uavinspect.report import file_hash, fnv1a64, read_body
from uavinspect.stitching import AffineTransform, read_transforms
from uavinspect.synthgen import (
    SceneSpec, gen_building_pair, write_building_fixture, write_layout_fixture, write_sequence_fixture,
)

SPEC = SceneSpec(gap=16.2, density=4, noise_sigma=0.02, outlier_fraction=0.03, seed=11)


@pytest.fixture(scope="module")
def building(tmp_path_factory):
    d = tmp_path_factory.mktemp("building")
    truth = write_building_fixture(d, SPEC, scale=2.5)
    return d, truth


def run(args):
    return main([str(a) for a in args])


def load(path):
    return json.loads(path.read_text())


# --- distances ---------------------------------------------------------------------------------


def test_distances_with_flight_log(building, tmp_path):
    d, truth = building
    out = tmp_path / "r.json"
    code = run(["distances", "--cloud", d / "cloud.ply", "--flight-log", d / "flight_log.csv",
                "--poses", d / "poses.txt", "--mode", "in-between", "--output", out])
    assert code == 0
    body = load(out)["body"]
    sec = body["sections"]
    assert sec["scale"]["scale"] == pytest.approx(2.5, rel=1e-6)
    metric = [r["metric"] for r in sec["distances"]["rows"]]
    assert len(metric) == 4
    assert abs(np.mean(metric) / truth["gap"] - 1) <= 0.01
    assert [m["path"] for m in body["manifest"]] == [str(d / "cloud.ply"), str(d / "flight_log.csv"),
                                                   str(d / "poses.txt")]
    assert body["parameters"]["mode"] == "in-between"


def test_distances_scale_override_without_poses(building, tmp_path):
    d, truth = building
    out = tmp_path / "r.json"
    assert run(["distances", "--cloud", d / "cloud.ply", "--scale", "1.0", "--output", out]) == 0
    sec = load(out)["body"]["sections"]
    assert sec["scale"]["scale_source"] == "override"
    rows = sec["distances"]["rows"]
    assert all(r["metric"] == r["unscaled"] for r in rows)
    assert abs(np.mean([r["unscaled"] for r in rows]) * 2.5 / truth["gap"] - 1) <= 0.01


def test_distances_one_building_exit_code(tmp_path, capsys):
    cloud, truth = gen_building_pair(SceneSpec(density=4, seed=1))
    lab = np.array(truth["labels"])
    save_point_cloud(PointCloud(cloud.points[lab == 0]), tmp_path / "one.ply")
    code = run(["distances", "--cloud", tmp_path / "one.ply", "--output", tmp_path / "r.json"])
    assert code == 3
    err = json.loads(capsys.readouterr().err)
    assert err["error"]["exit_code"] == 3 and "cluster" in err["error"]["message"]


def test_missing_file_and_bad_mode(tmp_path, building, capsys):
    assert run(["distances", "--cloud", tmp_path / "absent.ply"]) == 4
    d, _ = building
    assert run(["distances", "--cloud", d / "cloud.ply", "--mode", "sideways"]) == 2
    assert run(["distances"]) == 2  # --cloud required
    assert run(["nonsense"]) == 2


# --- roof-area -------------------------------------------------------------------------------------------


def test_roof_area_by_hand(tmp_path):
    write_gray(np.ones((1000, 1000), bool), tmp_path / "m.pgm")
    out = tmp_path / "r.json"
    assert run(["roof-area", "--mask", tmp_path / "m.pgm", "--depth", 50, "--focal", 1000, "--output", out]) == 0
    assert load(out)["body"]["sections"]["roof_area"]["area_m2"] == 2500.0


def test_roof_area_empty_mask(tmp_path, capsys):
    write_gray(np.zeros((50, 50), bool), tmp_path / "m.pgm")
    assert run(["roof-area", "--mask", tmp_path / "m.pgm", "--depth", 50, "--focal", 1000]) == 2
    assert "empty" in json.loads(capsys.readouterr().err)["error"]["message"]


def test_roof_area_batch_mean(tmp_path):
    names = []
    for k, side in enumerate((100, 200, 300)):
        m = np.zeros((400, 400), bool)
        m[:side, :side] = True
        write_gray(m, tmp_path / f"m{k}.pgm")
        names.append(tmp_path / f"m{k}.pgm")
    (tmp_path / "depth.csv").write_text("mask,depth_m\nm0.pgm,10\nm1.pgm,20\nm2.pgm,30\n")
    out = tmp_path / "r.json"
    code = run(["roof-area", "--mask", *names, "--depth-csv", tmp_path / "depth.csv", "--focal", 100,
                "--output", out])
    assert code == 0
    sec = load(out)["body"]["sections"]["roof_area"]
    hand = [100**2 * (10 / 100) ** 2, 200**2 * (20 / 100) ** 2, 300**2 * (30 / 100) ** 2]
    assert sec["area_m2"] == pytest.approx(sum(hand) / 3, rel=1e-12)
    assert [s["area_m2"] for s in sec["samples"]] == pytest.approx(hand, rel=1e-12)


# --- stitch ----------------------------------------------------------------------------------------------------


def test_stitch_writes_canvas_and_transforms(tmp_path):
    step = AffineTransform([[1, 0, 25.0], [0, 1, 3.0]])
    write_sequence_fixture(tmp_path / "seq", 3, 4, step, (200, 150))
    out = tmp_path / "r.json"
    code = run(["stitch", "--frames", tmp_path / "seq" / "frames", "--canvas", tmp_path / "c.pgm",
                "--transforms", tmp_path / "t.txt", "--output", out])
    assert code == 0
    est = read_transforms(tmp_path / "t.txt")
    truth = read_transforms(tmp_path / "seq" / "truth_transforms.txt")
    for e, t in zip(est, truth):
        assert np.abs(e.matrix - t.matrix).max() <= 0.5
    sec = load(out)["body"]["sections"]["stitching"]
    assert len(sec["pair_inliers"]) == 3 and (tmp_path / "c.pgm").exists()


def test_stitch_failing_pair(tmp_path, capsys):
    write_sequence_fixture(tmp_path / "seq", 3, 3, AffineTransform.translation(25, 3), (200, 150))
    write_gray(np.full((150, 200), 90, np.uint8), tmp_path / "seq" / "frames" / "frame_0002.pgm")
    assert run(["stitch", "--frames", tmp_path / "seq" / "frames"]) == 3
    err = json.loads(capsys.readouterr().err)["error"]
    assert err["code"] == "stitching.pair_failed" and "(1, 2)" in err["message"]


# --- layout ------------------------------------------------------------------------------------------------------


def test_layout_object_equals_roof(tmp_path):
    m = np.zeros((60, 80), bool)
    m[10:50, 10:70] = True
    write_gray(m, tmp_path / "roof.pgm")
    out = tmp_path / "r.json"
    assert run(["layout", "--roof-mask", tmp_path / "roof.pgm", "--object-mask", tmp_path / "roof.pgm",
                "--output", out]) == 0
    assert load(out)["body"]["sections"]["occupancy"]["percentage"] == 100.0


def test_layout_fixture_25(tmp_path):
    write_layout_fixture(tmp_path, 25.0)
    out = tmp_path / "r.json"
    assert run(["layout", "--canvas", tmp_path / "canvas.pgm", "--roof-mask", tmp_path / "roof_mask.pgm",
                "--object-mask", tmp_path / "object_mask.pgm", "--output", out]) == 0
    assert abs(load(out)["body"]["sections"]["occupancy"]["percentage"] - 25.0) <= 0.1


def test_layout_dimension_mismatch(tmp_path):
    write_layout_fixture(tmp_path, 25.0)
    write_gray(np.zeros((10, 10), np.uint8), tmp_path / "small.pgm")
    assert run(["layout", "--canvas", tmp_path / "small.pgm", "--roof-mask", tmp_path / "roof_mask.pgm",
                "--object-mask", tmp_path / "object_mask.pgm"]) == 2


# --- config and reports -----------------------------------------------------------------------------------------


def test_config_file_and_flag_override(tmp_path):
    write_gray(np.ones((100, 100), bool), tmp_path / "m.pgm")
    cfg = tmp_path / "c.cfg"
    cfg.write_text(f"# roof settings\nmask = {tmp_path / 'm.pgm'}\ndepth = 50\n--focal = 100\nthreshold=1\n")
    assert read_config(cfg)["focal"] == "100"
    out = tmp_path / "r.json"
    assert run(["roof-area", "--config", cfg, "--output", out]) == 0
    assert load(out)["body"]["sections"]["roof_area"]["area_m2"] == pytest.approx(2500.0)
    assert run(["roof-area", "--config", cfg, "--depth", 100, "--output", out]) == 0
    body = load(out)["body"]
    assert body["sections"]["roof_area"]["area_m2"] == pytest.approx(10000.0)
    assert body["parameters"]["depth"] == 100 and body["parameters"]["threshold"] == 1


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("colour = red\n")
    assert run(["layout", "--config", cfg]) == 2


def test_bodies_byte_identical(building, tmp_path):
    d, _ = building
    args = ["distances", "--cloud", d / "cloud.ply", "--flight-log", d / "flight_log.csv", "--poses", d / "poses.txt"]
    run(args + ["--output", tmp_path / "a.json"])
    run(args + ["--output", tmp_path / "b.json"])
    assert read_body(tmp_path / "a.json") == read_body(tmp_path / "b.json")
    header = load(tmp_path / "a.json")["header"]
    assert {"tool_version", "created_utc"} <= set(header)
    assert load(tmp_path / "a.json")["body"]["schema_version"] == "1.0"


def test_manifest_hash_matches_reference(building):
    d, _ = building
    data = (d / "poses.txt").read_bytes()
    assert file_hash(d / "poses.txt") == f"{fnv1a64_reference(data):016x}"
    assert fnv1a64(b"") == 0xCBF29CE484222325
    assert fnv1a64(b"a") == 0xAF63DC4C8601EC8C
