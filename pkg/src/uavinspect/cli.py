"""``inspect`` command line: distances, roof-area, stitch, layout.

Every flag may also be given in a ``--config`` file of ``key = value`` lines
(keys are flag names with or without leading dashes; ``-`` and ``_`` are
interchangeable).  Flags given on the command line override the file.

Exit codes: 0 success, 2 input error, 3 algorithm failure, 4 I/O error.
Failures print ``{"error": {...}}`` on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import InputError, InspectionError
from .report import build_report, write_report

log = logging.getLogger("uavinspect")

EXIT_OK, EXIT_INPUT, EXIT_ALGO, EXIT_IO = 0, 2, 3, 4


def _bool(v) -> bool:
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise InputError("cli_report.bad_config", f"not a boolean: {v!r}")


def _opt_float(v):
    return None if str(v).strip().lower() in ("none", "auto", "") else float(v)


def _offset(v):
    return "auto" if str(v).strip().lower() == "auto" else float(v)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, help="key = value config file")
    p.add_argument("--seed", type=int, default=None, help="RANSAC seed (default 0)")
    p.add_argument("--output", default=None, help="report path ('-' or omitted: stdout)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="inspect", description="UAV building inspection toolkit")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    d = sub.add_parser("distances", help="gap between two adjacent buildings")
    _common(d)
    d.add_argument("--cloud", default=None, help="PLY or XYZ point cloud")
    d.add_argument("--mode", default=None, help="roof | in-between | frontal (default in-between)")
    d.add_argument("--flight-log", default=None)
    d.add_argument("--poses", default=None, help="pose track: timestamp qw qx qy qz tx ty tz")
    d.add_argument("--scale", type=float, default=None, help="metric scale override")
    d.add_argument("--time-offset", type=_offset, default=None, help="seconds or 'auto' (default 0)")
    d.add_argument("--sync-tolerance", type=float, default=None, help="seconds (default 0.5)")
    d.add_argument("--min-baseline", type=float, default=None, help="meters (default 2)")
    d.add_argument("--use-gps-altitude", type=_bool, nargs="?", const=True, default=None)
    d.add_argument("--separation-axis", default=None)
    d.add_argument("--slice-axis", default=None)
    d.add_argument("--n-locations", type=int, default=None)
    d.add_argument("--cluster-radius", type=_opt_float, default=None)
    d.add_argument("--min-cluster-size", type=int, default=None)
    d.add_argument("--bin-width", type=_opt_float, default=None)
    d.add_argument("--max-angle", type=float, default=None, help="degrees (default 15)")
    d.add_argument("--roof-edge", default=None, help="quantile | strip-median")
    d.add_argument("--iterations", type=int, default=None)
    d.add_argument("--inlier-threshold", type=_opt_float, default=None)
    d.add_argument("--min-inliers", type=int, default=None)

    r = sub.add_parser("roof-area", help="roof plan area from masks")
    _common(r)
    r.add_argument("--mask", nargs="+", default=None, help="one or more mask/gray rasters")
    r.add_argument("--depth", type=float, default=None, help="roof depth from camera, meters")
    r.add_argument("--depth-csv", default=None, help="CSV with columns mask,depth_m")
    r.add_argument("--focal", type=float, default=None, help="focal length, pixels")
    r.add_argument("--threshold", type=int, default=None, help="binarization level (default 128)")
    r.add_argument("--connectivity", type=int, default=None, help="4 or 8 (default 8)")
    r.add_argument("--undistort", type=_bool, nargs="?", const=True, default=None)
    for k in ("cx", "cy", "k1", "k2", "p1", "p2"):
        r.add_argument(f"--{k}", type=float, default=None)

    s = sub.add_parser("stitch", help="mosaic a frame sequence")
    _common(s)
    s.add_argument("--frames", default=None, help="directory of frames (lexicographic order)")
    s.add_argument("--canvas", default=None, help="output canvas raster")
    s.add_argument("--transforms", default=None, help="output transforms file")
    s.add_argument("--decimate-hz", type=_opt_float, default=None, help="keep frames at this rate")
    s.add_argument("--max-corners", type=int, default=None)
    s.add_argument("--min-spacing", type=float, default=None)
    s.add_argument("--window", type=int, default=None)
    s.add_argument("--search-radius", type=int, default=None)
    s.add_argument("--min-ncc", type=float, default=None)
    s.add_argument("--iterations", type=int, default=None)
    s.add_argument("--inlier-threshold", type=float, default=None)
    s.add_argument("--min-inliers", type=int, default=None)
    s.add_argument("--max-canvas", type=int, default=None)
    s.add_argument("--blend", type=_bool, nargs="?", const=True, default=None)

    y = sub.add_parser("layout", help="rooftop object occupancy")
    _common(y)
    y.add_argument("--canvas", default=None, help="stitched canvas raster (dimension check)")
    y.add_argument("--roof-mask", default=None)
    y.add_argument("--object-mask", default=None)
    y.add_argument("--threshold", type=int, default=None)
    return ap


DEFAULTS = {
    "distances": {
        "mode": "in-between", "time_offset": 0.0, "sync_tolerance": 0.5, "min_baseline": 2.0,
        "use_gps_altitude": False, "n_locations": 4, "min_cluster_size": 50, "max_angle": 15.0,
        "roof_edge": "quantile", "iterations": 500, "min_inliers": 50, "seed": 0,
    },
    "roof-area": {"threshold": 128, "connectivity": 8, "undistort": False,
                  "k1": 0.0, "k2": 0.0, "p1": 0.0, "p2": 0.0},
    "stitch": {"max_corners": 250, "min_spacing": 10.0, "window": 15, "search_radius": 48,
               "min_ncc": 0.8, "iterations": 300, "inlier_threshold": 1.0, "min_inliers": 8,
               "max_canvas": 20000, "blend": False, "seed": 0},
    "layout": {"threshold": 128},
}


def read_config(path) -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError("cli_report.bad_config", f"{path}:{lineno}: expected 'key = value'")
        k, v = line.split("=", 1)
        out[k.strip().lstrip("-").replace("-", "_")] = v.strip()
    return out


def resolve(ns: argparse.Namespace, parser: argparse.ArgumentParser) -> dict:
    """Merge built-in defaults < config file < command-line flags."""
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    sp = sub.choices[ns.command]
    actions = {a.dest: a for a in sp._actions if a.dest not in ("help", "config")}
    vals = dict(DEFAULTS.get(ns.command, {}))
    if ns.config:
        for k, v in read_config(ns.config).items():
            if k not in actions:
                raise InputError("cli_report.bad_config", f"unknown config key {k!r} for {ns.command}")
            a = actions[k]
            try:
                if a.nargs == "+":
                    vals[k] = [x for x in v.replace(",", " ").split() if x]
                elif a.type is not None:
                    vals[k] = a.type(v)
                else:
                    vals[k] = v
            except ValueError:
                raise InputError("cli_report.bad_config", f"bad value for {k}: {v!r}") from None
    for k in actions:
        v = getattr(ns, k, None)
        if v is not None:
            vals[k] = v
    for k in actions:
        vals.setdefault(k, None)
    return vals


def _require(vals: dict, *keys) -> None:
    for k in keys:
        if vals.get(k) is None:
            raise InputError("cli_report.missing_argument", f"--{k.replace('_', '-')} is required")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_distances(v: dict) -> dict:
    from .distances import ModeConfig, Mode, estimate_distances
    from .geometry import load_point_cloud
    from .planes import RansacConfig
    from .scale import (estimate_scale, estimate_time_offset, load_pose_track, pairwise_scale_ratios,
                        parse_flight_log, sync_poses)

    _require(v, "cloud")
    mode = Mode.parse(v["mode"])
    inputs = [v["cloud"]]
    scale_section: dict
    if v["scale"] is not None:
        if not v["scale"] > 0:
            raise InputError("cli_report.bad_scale", "--scale must be > 0")
        scale = float(v["scale"])
        scale_section = {"scale": scale, "scale_source": "override"}
    elif v["flight_log"] and v["poses"]:
        inputs += [v["flight_log"], v["poses"]]
        records = parse_flight_log(v["flight_log"])
        poses = load_pose_track(v["poses"])
        offset = v["time_offset"]
        if offset == "auto":
            offset = estimate_time_offset(poses, records, v["sync_tolerance"])
        pairs = sync_poses(poses, records, offset, v["sync_tolerance"], v["use_gps_altitude"])
        ratios = pairwise_scale_ratios(pairs, v["min_baseline"])
        scale = estimate_scale(pairs, v["min_baseline"])
        scale_section = {
            "scale": scale, "scale_source": "flight_log", "time_offset_s": float(offset),
            "synced_pairs": len(pairs), "ratios_used": int(len(ratios)),
            "ratio_iqr": [float(np.percentile(ratios, 25)), float(np.percentile(ratios, 75))],
            "skipped_log_rows": int(records.skipped),
        }
    else:
        scale = 1.0
        scale_section = {"scale": 1.0, "scale_source": "none (unscaled only)"}

    overrides = {}
    for key, field in (("separation_axis", "separation_axis"), ("slice_axis", "slice_axis"),
                       ("cluster_radius", "cluster_radius"), ("bin_width", "bin_width")):
        if v[key] is not None:
            overrides[field] = v[key]
    mcfg = ModeConfig.for_mode(mode, n_sample_locations=v["n_locations"],
                               min_cluster_size=v["min_cluster_size"], max_angle_deg=v["max_angle"],
                               roof_edge=v["roof_edge"], **overrides)
    rcfg = RansacConfig(iterations=v["iterations"], inlier_threshold=v["inlier_threshold"],
                        min_inliers=v["min_inliers"], rng_seed=v["seed"])
    cloud = load_point_cloud(v["cloud"])
    rep = estimate_distances(cloud, mode, mcfg, rcfg, scale)
    params = {
        "mode": mode.value,
        "scale": {k: v[k] for k in ("scale", "time_offset", "sync_tolerance", "min_baseline", "use_gps_altitude")},
        **rep.parameters,
    }
    return build_report("distances", inputs, params, {"scale": scale_section, "distances": rep.to_dict()})


def _depths(v: dict, masks: Sequence[str]) -> list[float]:
    if v["depth_csv"]:
        table = {}
        with open(v["depth_csv"], newline="") as fh:
            for row in csv.DictReader(fh):
                try:
                    table[row["mask"].strip()] = float(row["depth_m"])
                except (KeyError, ValueError, AttributeError):
                    raise InputError("roof_metrics.bad_depth_csv", "depth CSV needs mask,depth_m columns") from None
        out = []
        for m in masks:
            key = next((k for k in (m, Path(m).name) if k in table), None)
            if key is None:
                raise InputError("roof_metrics.missing_depth", f"no depth for {m}")
            out.append(table[key])
        return out
    _require(v, "depth")
    return [float(v["depth"])] * len(masks)


def cmd_roof_area(v: dict) -> dict:
    from .imaging import CameraIntrinsics, read_gray, threshold, undistort
    from .roof import average_area, roof_area

    _require(v, "mask", "focal")
    masks = [v["mask"]] if isinstance(v["mask"], str) else list(v["mask"])
    depths = _depths(v, masks)
    samples = []
    for path, depth in zip(masks, depths):
        img = read_gray(path)
        if v["undistort"]:
            h, w = img.shape
            cx = v["cx"] if v["cx"] is not None else (w - 1) / 2.0
            cy = v["cy"] if v["cy"] is not None else (h - 1) / 2.0
            K = CameraIntrinsics(v["focal"], v["focal"], cx, cy, v["k1"], v["k2"], v["p1"], v["p2"])
            img = undistort(img, K)
        samples.append(roof_area(threshold(img, v["threshold"]), depth, v["focal"], v["connectivity"]))
    est = average_area(samples) if len(samples) > 1 else samples[0]
    inputs = masks + ([v["depth_csv"]] if v["depth_csv"] else [])
    params = {k: v[k] for k in ("depth", "focal", "threshold", "connectivity", "undistort",
                                "cx", "cy", "k1", "k2", "p1", "p2")}
    return build_report("roof-area", inputs, params, {"roof_area": est.to_dict()})


def cmd_stitch(v: dict) -> dict:
    from .imaging import read_gray, write_gray
    from .planes import RansacConfig
    from .stitching import StitchConfig, decimate_frames, stitch_sequence, write_transforms

    _require(v, "frames")
    d = Path(v["frames"])
    if not d.is_dir():
        raise FileNotFoundError(f"frames directory not found: {d}")
    paths = sorted(p for p in d.iterdir() if p.suffix.lower() in (".pgm", ".pbm", ".png", ".ppm"))
    if v["decimate_hz"]:
        paths = decimate_frames(paths, v["decimate_hz"])
    if len(paths) < 2:
        raise InputError("stitching.too_few_frames", "need at least 2 frames")
    cfg = StitchConfig(
        max_corners=v["max_corners"], min_spacing=v["min_spacing"], window=v["window"],
        search_radius=v["search_radius"], min_ncc=v["min_ncc"],
        ransac=RansacConfig(iterations=v["iterations"], inlier_threshold=v["inlier_threshold"],
                            min_inliers=v["min_inliers"], min_inlier_fraction=0.0, rng_seed=v["seed"]),
        max_canvas_dim=v["max_canvas"], blend=v["blend"],
    )
    images = [read_gray(p) for p in paths]
    res = stitch_sequence(images, cfg)
    for k, n in enumerate(res.pair_inliers, 1):
        log.info("pair %d-%d inliers %d", k - 1, k, n)
    section = {
        "frames": [p.name for p in paths],
        "pair_inliers": res.pair_inliers,
        "pair_matches": res.pair_matches,
        "transforms": [t.to_list() for t in res.transforms],
        "canvas_size": [int(res.canvas.shape[1]), int(res.canvas.shape[0])],
        "canvas_origin": [int(c) for c in res.canvas.origin],
        "coverage_fraction": float(res.canvas.coverage.mean()),
    }
    if v["canvas"]:
        write_gray(res.canvas.to_uint8(), v["canvas"])
        section["canvas_path"] = str(v["canvas"])
    if v["transforms"]:
        write_transforms(res.transforms, v["transforms"])
        section["transforms_path"] = str(v["transforms"])
    params = {"stitch": cfg.to_dict(), "decimate_hz": v["decimate_hz"]}
    return build_report("stitch", [str(p) for p in paths], params, {"stitching": section})


def cmd_layout(v: dict) -> dict:
    from .imaging import read_gray, read_mask
    from .roof import occupancy_percent

    _require(v, "roof_mask", "object_mask")
    roof = read_mask(v["roof_mask"], v["threshold"])
    obj = read_mask(v["object_mask"], v["threshold"])
    inputs = [v["roof_mask"], v["object_mask"]]
    if v["canvas"]:
        shape = read_gray(v["canvas"]).shape
        inputs.insert(0, v["canvas"])
        for name, m in (("roof", roof), ("object", obj)):
            if m.shape != shape:
                raise InputError("roof_metrics.dimension_mismatch",
                                 f"{name} mask {m.shape} does not match canvas {shape}")
    occ = occupancy_percent(obj, roof)
    return build_report("layout", inputs, {"threshold": v["threshold"]}, {"occupancy": occ.to_dict()})


COMMANDS = {"distances": cmd_distances, "roof-area": cmd_roof_area, "stitch": cmd_stitch, "layout": cmd_layout}


def _fail(code: str, message: str, exit_code: int) -> int:
    err = {"error": {"code": code, "message": message, "exit_code": exit_code}}
    print(json.dumps(err, sort_keys=True), file=sys.stderr)
    return exit_code


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        vals = resolve(ns, parser)
        report = COMMANDS[ns.command](vals)
        write_report(report, vals.get("output"))
    except InspectionError as exc:
        return _fail(exc.code, exc.message, exc.exit_code)
    except OSError as exc:
        return _fail("io_error", str(exc), EXIT_IO)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
