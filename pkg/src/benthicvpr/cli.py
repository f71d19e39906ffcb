"""Command-line front end: one subcommand per pipeline stage.

Every option may come from ``--config FILE`` (a flat JSON object keyed by
the option's long name with dashes as underscores) or from the command
line; command-line values win. Exit codes: 0 success, 2 invalid
configuration, 3 bad input data.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import warnings
import zlib
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import io
from .color import CorrectionTargets, StatsAccumulator, correct_image
from .errors import DataError, DegenerateRelativeMap, EmptyInput, EmptyStream, TooFewSamples
from .footprint import CornerRangeSpec, estimate_footprint, flatten
from .fusion import FusionParams, fuse
from .geometry import Intrinsics
from .linking import (
    ThresholdModel,
    VisitPair,
    build_footprint_links,
    build_location_links,
    conservative_iou_threshold,
    distance_threshold_p95,
    link_stats,
    temporal_pairs,
)
from .retrieval import recall_curve, retrieve

log = logging.getLogger("benthicvpr")

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3


class ConfigError(Exception):
    pass


def view_seed(seed: int, view_id: str) -> list[int]:
    """Per-view entropy derived from the run seed, independent of processing order."""
    return [int(seed), zlib.crc32(view_id.encode("utf-8"))]


DEFAULTS = {
    "color-correct": {"target_mean": 0.35, "target_std": 0.12, "no_clip": False, "stats_out": None},
    "fuse": {
        "valid_min": 0.2,
        "valid_max": 6.0,
        "sample_fraction": 0.10,
        "huber_delta": 0.1,
        "min_samples": 10,
        "max_iter": 50,
    },
    "footprints": {"patch_size": 30, "min_valid_fraction": 0.2},
    "link": {
        "tau_f": None,
        "fov": None,
        "altitude": None,
        "translation_error": None,
        "tau_d": "p95",
        "distance_mode": "3d",
        "no_grid": False,
    },
    "eval": {"k_values": [1, 5, 10, 20, 25], "per_query_csv": None, "query_visit": None, "db_visit": None},
    "synth": {
        "terrain": "step",
        "relief": 1.0,
        "visits": 2,
        "altitude": 2.5,
        "altitude_mode": "hold",
        "width": 160,
        "height": 120,
        "fov_x": 45.0,
        "fov_y": 34.0,
        "region": 6.0,
        "line_spacing": 1.2,
        "image_spacing": 0.6,
        "position_noise": 0.05,
        "attitude_noise": 0.05,
        "visit_offset": 0.4,
        "tau_f": 0.07,
        "dim": 128,
        "hit_fraction": 0.5,
        "hit_rank": 1,
        "depth": 25,
        "distractors": "random",
        "fusion_a": 2.0,
        "fusion_b": 0.5,
        "outlier_fraction": 0.05,
        "noise": 0.002,
    },
}

REQUIRED = {
    "color-correct": ["images", "out"],
    "fuse": ["stereo_dir", "relative_dir", "out", "seed"],
    "footprints": ["calibration", "poses", "range_dir", "out"],
    "link": ["footprints", "out"],
    "eval": ["query_descriptors", "db_descriptors", "links", "out"],
    "synth": ["out", "seed"],
}


def _resolve(cmd: str, args: argparse.Namespace) -> dict:
    opts = dict(DEFAULTS.get(cmd, {}))
    cfg_path = getattr(args, "config", None)
    if cfg_path:
        try:
            cfg = io.read_json(cfg_path)
        except (OSError, DataError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
        opts.update({k.replace("-", "_"): v for k, v in cfg.items()})
    opts.update({k: v for k, v in vars(args).items() if k not in ("config", "cmd", "func", "verbose")})
    missing = [k for k in REQUIRED[cmd] if opts.get(k) is None]
    if missing:
        raise ConfigError("missing required option(s): " + ", ".join("--" + m.replace("_", "-") for m in missing))
    return opts


def _num(opts, key, kind=float):
    try:
        return kind(opts[key])
    except (TypeError, ValueError):
        raise ConfigError(f"--{key.replace('_', '-')} must be a {kind.__name__}") from None


def _outdir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


# -- color-correct -------------------------------------------------------

def cmd_color_correct(opts: dict) -> int:
    try:
        targets = CorrectionTargets(_num(opts, "target_mean"), _num(opts, "target_std"), clip=not opts["no_clip"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    src = Path(opts["images"])
    if not src.is_dir():
        raise EmptyInput(f"no images: {src} is not a directory")
    files = sorted(p for p in src.iterdir() if p.suffix.lower() in io.IMAGE_SUFFIXES)
    if not files:
        raise EmptyStream("no images")
    acc = StatsAccumulator()
    depths = {}
    for f in files:
        img, depths[f.name] = io.read_image(f)
        acc.add(img)
    stats = acc.result()
    out = _outdir(opts["out"])
    for f in files:
        img, _ = io.read_image(f)
        io.write_image(out / (f.stem + ".png"), correct_image(img, stats, targets), depths[f.name])
    io.write_pixel_stats(opts["stats_out"] or out / "stats.pxs", stats)
    log.info("corrected %d images", len(files))
    return EXIT_OK


# -- fuse ----------------------------------------------------------------

def _fusion_params(opts: dict, seed) -> FusionParams:
    try:
        return FusionParams(
            valid_min=_num(opts, "valid_min"),
            valid_max=_num(opts, "valid_max"),
            sample_fraction=_num(opts, "sample_fraction"),
            huber_delta=_num(opts, "huber_delta"),
            seed=seed,
            min_samples=_num(opts, "min_samples", int),
            max_iter=_num(opts, "max_iter", int),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def cmd_fuse(opts: dict) -> int:
    seed = _num(opts, "seed", int)
    _fusion_params(opts, seed)
    rel_dir, st_dir = Path(opts["relative_dir"]), Path(opts["stereo_dir"])
    rel_files = sorted(rel_dir.glob("*.rmp"))
    if not rel_files:
        raise EmptyInput(f"no relative range maps in {rel_dir}")
    out = _outdir(opts["out"])
    records, skipped = [], []
    for rf in rel_files:
        view_id = rf.stem
        sf = st_dir / rf.name
        if not sf.exists():
            raise FileNotFoundError(f"missing stereo range map for {view_id}: {sf}")
        stereo, rel = io.read_range_map(sf), io.read_range_map(rf)
        try:
            fused, so = fuse(stereo, rel, _fusion_params(opts, view_seed(seed, view_id)))
        except (TooFewSamples, DegenerateRelativeMap) as exc:
            log.warning("%s: %s", view_id, exc)
            skipped.append({"view_id": view_id, "reason": f"{type(exc).__name__}: {exc}"})
            continue
        io.write_range_map(out / rf.name, fused)
        records.append(io.scale_offset_record(view_id, so))
    io.write_jsonl(out / "scale_offset.jsonl", records)
    io.write_json(out / "skipped.json", skipped)
    log.info("fused %d range maps, %d skipped", len(records), len(skipped))
    return EXIT_OK


# -- footprints ----------------------------------------------------------

def cmd_footprints(opts: dict) -> int:
    try:
        spec = CornerRangeSpec(_num(opts, "patch_size", int), _num(opts, "min_valid_fraction"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    cams = io.read_calibration(opts["calibration"])
    frame, views = io.read_poses(opts["poses"])
    rdir = Path(opts["range_dir"])
    fps, fps2, skipped, times = [], {}, [], {}
    for v in views:
        if v.camera_id not in cams:
            raise DataError(f"view {v.view_id}: unknown camera_id {v.camera_id!r}")
        intr, ext = cams[v.camera_id]
        path = rdir / f"{v.view_id}.rmp"
        if not path.exists():
            skipped.append({"view_id": v.view_id, "reason": "missing range map"})
            continue
        try:
            fp = estimate_footprint(v, intr, ext, io.read_range_map(path), frame, spec)
            fp2 = flatten(fp, frame)
        except DataError as exc:
            skipped.append({"view_id": v.view_id, "reason": f"{type(exc).__name__}: {exc}"})
            continue
        fps.append(fp)
        fps2[v.view_id] = fp2
        times[v.view_id] = v.t_unix
    out = _outdir(opts["out"])
    io.write_footprints_geojson(out / "footprints.geojson", fps, fps2)
    io.write_footprints_jsonl(out / "footprints_3d.jsonl", frame, fps, times)
    io.write_json(out / "skipped.json", skipped)
    log.info("%d footprints, %d skipped", len(fps), len(skipped))
    return EXIT_OK


# -- link ----------------------------------------------------------------

def _tau_f(opts: dict) -> float:
    if opts.get("tau_f") is not None:
        t = _num(opts, "tau_f")
        if not t >= 0:
            raise ConfigError("--tau-f must be non-negative")
        return t
    if all(opts.get(k) is not None for k in ("fov", "altitude", "translation_error")):
        try:
            m = ThresholdModel(math.radians(_num(opts, "fov")), _num(opts, "altitude"), _num(opts, "translation_error"))
        except DataError as exc:
            raise ConfigError(str(exc)) from None
        return conservative_iou_threshold(m)
    raise ConfigError("give --tau-f or all of --fov, --altitude, --translation-error")


def cmd_link(opts: dict) -> int:
    tau_f = _tau_f(opts)
    tau_d_opt = opts["tau_d"]
    if tau_d_opt != "p95":
        tau_d_opt = _num(opts, "tau_d")
    if opts["distance_mode"] not in ("2d", "3d"):
        raise ConfigError("--distance-mode must be 2d or 3d")
    frame, fps3, times = io.read_footprints_jsonl(opts["footprints"])
    fps2 = [flatten(fp, frame) for fp in fps3]
    visits: dict[str, list] = {}
    for fp in fps2:
        visits.setdefault(fp.visit_id, []).append(fp)
    visit_times = {}
    for fp in fps3:
        t = times.get(fp.view_id)
        if t is None:
            raise DataError(f"view {fp.view_id} has no timestamp; visit order is undefined")
        visit_times[fp.visit_id] = min(visit_times.get(fp.visit_id, t), t)
    out = _outdir(opts["out"])
    stats = []
    for pair in temporal_pairs(visit_times):
        q, d = visits[pair.query_visit_id], visits[pair.database_visit_id]
        fl = build_footprint_links(
            pair, q, d, tau_f, use_grid=not opts["no_grid"], distance_mode=opts["distance_mode"]
        )
        io.write_links(out / f"{pair.name}.links.jsonl", fl)
        rec = {"tau_f": tau_f}
        rec.update(io.link_stats_record(pair, link_stats(fl) if len(fl) else None, len(q)))
        tau_d = tau_d_opt
        if tau_d == "p95":
            tau_d = distance_threshold_p95(fl) if len(fl) else None
        if tau_d is not None:
            ll = build_location_links(
                pair,
                {f.view_id: f.camera_center for f in q},
                {f.view_id: f.camera_center for f in d},
                tau_d,
                query_fps={f.view_id: f for f in q},
                db_fps={f.view_id: f for f in d},
                distance_mode=opts["distance_mode"],
            )
            io.write_links(out / f"{pair.name}.location.jsonl", ll)
            rec["tau_d"] = tau_d
            rec["location"] = io.link_stats_record(pair, link_stats(ll) if len(ll) else None, len(q))
        stats.append(rec)
    io.write_json(out / "link_stats.json", stats)
    log.info("linked %d visit pairs", len(stats))
    return EXIT_OK


# -- eval ----------------------------------------------------------------

def cmd_eval(opts: dict) -> int:
    try:
        ks = [int(k) for k in opts["k_values"]]
    except (TypeError, ValueError):
        raise ConfigError("--k-values must be integers") from None
    if not ks or any(k < 1 for k in ks):
        raise ConfigError("--k-values must be positive")
    ks = sorted(set(ks))
    qs = io.read_descriptors(opts["query_descriptors"])
    db = io.read_descriptors(opts["db_descriptors"])
    pair = None
    if opts.get("query_visit") and opts.get("db_visit"):
        pair = VisitPair(opts["query_visit"], opts["db_visit"])
    links = io.read_links(opts["links"], pair)
    unknown = {q for q in links.queries() if q not in qs.view_ids}
    if unknown:
        raise DataError(f"{len(unknown)} linked queries have no descriptor, e.g. {sorted(unknown)[0]}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        results = retrieve(qs, db, max(ks))
    report = recall_curve(results, links, ks, pair)
    io.write_eval_report(opts["out"], report)
    if opts.get("per_query_csv"):
        io.write_per_query_csv(opts["per_query_csv"], report)
    log.info("R@%d = %.4f over %d valid queries", ks[0], report.recall_at_k[0], report.valid_query_count)
    return EXIT_OK


# -- synth ---------------------------------------------------------------

def cmd_synth(opts: dict) -> int:
    from . import synthetic as syn

    seed = _num(opts, "seed", int)
    half = _num(opts, "region") / 2
    margin = half + 4 * _num(opts, "altitude") + 4 * _num(opts, "relief") + 5
    extent = (-margin, margin, -margin, margin)
    kind = opts["terrain"]
    relief = _num(opts, "relief")
    try:
        if kind == "flat":
            terrain = syn.TerrainModel.flat(0.0, extent)
        elif kind == "step":
            terrain = syn.TerrainModel.step(-relief, 0.0, 0.0, extent)
        elif kind == "boulder":
            terrain = syn.TerrainModel.boulder_field(relief, 1.0, seed, 0.0, extent)
        else:
            raise ConfigError(f"unknown terrain {kind!r}")
        intr = Intrinsics.from_fov(
            _num(opts, "width", int), _num(opts, "height", int),
            math.radians(_num(opts, "fov_x")), math.radians(_num(opts, "fov_y")),
        )
        rng = np.random.default_rng([seed, 0])
        plans = {}
        for k in range(_num(opts, "visits", int)):
            off = rng.uniform(-1, 1, 2) * _num(opts, "visit_offset") if k else np.zeros(2)
            plans[f"V{k}"] = syn.SurveyPlan(
                line_spacing=_num(opts, "line_spacing"),
                image_spacing=_num(opts, "image_spacing"),
                altitude=_num(opts, "altitude"),
                region=(-half + off[0], half + off[0], -half + off[1], half + off[1]),
                altitude_mode=opts["altitude_mode"],
                position_noise=_num(opts, "position_noise"),
                attitude_noise=_num(opts, "attitude_noise"),
                seed=int(rng.integers(2**31)),
                t_start=1.0e6 * k,
            )
        model = syn.HitModel(
            _num(opts, "hit_fraction"), _num(opts, "hit_rank", int), _num(opts, "depth", int), opts["distractors"]
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    scene = syn.generate_scene(terrain, plans, intr, tau_f=_num(opts, "tau_f"))

    out = _outdir(opts["out"])
    io.write_calibration(out / "calibration.json", {scene.camera_id: (intr, scene.extrinsic)})
    io.write_poses(out / "poses.jsonl", scene.frame, scene.views)
    st_dir, rel_dir = _outdir(out / "stereo"), _outdir(out / "relative")
    for v in scene.views:
        vr = np.random.default_rng(view_seed(seed, v.view_id))
        st, rel = syn.synthesize_range_inputs(
            scene.range_maps[v.view_id], _num(opts, "fusion_a"), _num(opts, "fusion_b"),
            noise=_num(opts, "noise"), outlier_fraction=_num(opts, "outlier_fraction"), rng=vr,
        )
        io.write_range_map(st_dir / f"{v.view_id}.rmp", st)
        io.write_range_map(rel_dir / f"{v.view_id}.rmp", rel)
    truth = _outdir(out / "truth")
    io.write_footprints_jsonl(
        truth / "footprints_3d.jsonl", scene.frame, [scene.footprints[v.view_id] for v in scene.views],
        {v.view_id: v.t_unix for v in scene.views},
    )
    desc = _outdir(out / "descriptors")
    centers = scene.centers()
    for i, pair in enumerate(scene.pairs):
        links = scene.links[pair.name]
        io.write_links(truth / f"{pair.name}.links.jsonl", links)
        planted = syn.generate_descriptors(
            [v.view_id for v in scene.views_of(pair.query_visit_id)],
            [v.view_id for v in scene.views_of(pair.database_visit_id)],
            links, model, _num(opts, "dim", int), seed=int(zlib.crc32(pair.name.encode()) ^ seed), centers=centers,
        )
        io.write_descriptors(desc / f"{pair.name}.query.dsc", planted.queries)
        io.write_descriptors(desc / f"{pair.name}.db.dsc", planted.database)
        io.write_json(truth / f"{pair.name}.planted.json", {q: planted.rankings[q] for q in sorted(planted.rankings)})
    log.info("synthesized %d views in %d visits", len(scene.views), len(plans))
    return EXIT_OK


# -- parser --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="benthicvpr", description="Footprint-overlap ground truth and VPR evaluation.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="cmd", required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_, argument_default=argparse.SUPPRESS)
        sp.add_argument("--config", help="JSON file with option values")
        sp.set_defaults(func=func)
        return sp

    sp = add("color-correct", cmd_color_correct, "multi-image gray-world color correction")
    sp.add_argument("--images", help="directory of 8/16-bit images from one camera and visit")
    sp.add_argument("--out", help="output directory")
    sp.add_argument("--stats-out", help="statistics file (default OUT/stats.pxs)")
    sp.add_argument("--target-mean", type=float)
    sp.add_argument("--target-std", type=float)
    sp.add_argument("--no-clip", action="store_true")

    sp = add("fuse", cmd_fuse, "fuse relative and stereo range maps")
    sp.add_argument("--stereo-dir")
    sp.add_argument("--relative-dir")
    sp.add_argument("--out")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--valid-min", type=float)
    sp.add_argument("--valid-max", type=float)
    sp.add_argument("--sample-fraction", type=float)
    sp.add_argument("--huber-delta", type=float)
    sp.add_argument("--min-samples", type=int)
    sp.add_argument("--max-iter", type=int)

    sp = add("footprints", cmd_footprints, "estimate image footprints")
    sp.add_argument("--calibration")
    sp.add_argument("--poses")
    sp.add_argument("--range-dir", help="directory of VIEW_ID.rmp range maps")
    sp.add_argument("--out")
    sp.add_argument("--patch-size", type=int)
    sp.add_argument("--min-valid-fraction", type=float)

    sp = add("link", cmd_link, "build footprint and location links for every visit pair")
    sp.add_argument("--footprints", help="footprints_3d.jsonl from the footprints stage")
    sp.add_argument("--out")
    sp.add_argument("--tau-f", type=float)
    sp.add_argument("--fov", type=float, help="degrees, along the short footprint side")
    sp.add_argument("--altitude", type=float)
    sp.add_argument("--translation-error", type=float)
    sp.add_argument("--tau-d", help="meters, or p95")
    sp.add_argument("--distance-mode", choices=["2d", "3d"])
    sp.add_argument("--no-grid", action="store_true")

    sp = add("eval", cmd_eval, "score retrieval against a link set")
    sp.add_argument("--query-descriptors")
    sp.add_argument("--db-descriptors")
    sp.add_argument("--links")
    sp.add_argument("--out", help="EvalReport JSON path")
    sp.add_argument("--k-values", type=int, nargs="+")
    sp.add_argument("--per-query-csv")
    sp.add_argument("--query-visit")
    sp.add_argument("--db-visit")

    sp = add("synth", cmd_synth, "write a synthetic survey in the pipeline's file formats")
    sp.add_argument("--out")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--terrain", choices=["flat", "step", "boulder"])
    sp.add_argument("--relief", type=float)
    sp.add_argument("--visits", type=int)
    sp.add_argument("--altitude", type=float)
    sp.add_argument("--altitude-mode", choices=["hold", "depth"])
    sp.add_argument("--width", type=int)
    sp.add_argument("--height", type=int)
    sp.add_argument("--fov-x", type=float, help="degrees")
    sp.add_argument("--fov-y", type=float, help="degrees")
    sp.add_argument("--region", type=float, help="side of the surveyed square, meters")
    sp.add_argument("--line-spacing", type=float)
    sp.add_argument("--image-spacing", type=float)
    sp.add_argument("--position-noise", type=float)
    sp.add_argument("--attitude-noise", type=float, help="roll/pitch std, radians")
    sp.add_argument("--visit-offset", type=float)
    sp.add_argument("--tau-f", type=float)
    sp.add_argument("--dim", type=int)
    sp.add_argument("--hit-fraction", type=float)
    sp.add_argument("--hit-rank", type=int)
    sp.add_argument("--depth", type=int)
    sp.add_argument("--distractors", choices=["random", "nearest"])
    sp.add_argument("--fusion-a", type=float)
    sp.add_argument("--fusion-b", type=float)
    sp.add_argument("--outlier-fraction", type=float)
    sp.add_argument("--noise", type=float)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(stream=sys.stderr, level=level, format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)
    try:
        opts = _resolve(args.cmd, args)
        return args.func(opts)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except (DataError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
