"""
Command-line entry point: ``frustreg {gen,label,kitti-import,solve,pnp,bench,residuals,rerun}``.

Every subcommand writes a manifest (``<name>.manifest.json``) holding the
resolved configuration and the argv that produced it; ``frustreg rerun``
replays one.

Exit codes: 0 success, 1 runtime failure, 2 invalid input, 3 benchmark
failure rate above ``--max-failure-rate``.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import os
import sys
from dataclasses import asdict, replace
from pathlib import Path
from typing import List, Optional


from . import __version__
from .camera import CameraModel, label_cloud, load_labeled, save_labeled
from .cost import CostConfig, evaluate, residual_table
from .errors import AllStartsFailed, FrustRegError, IoFailure
from .evaluation import (
    SuiteConfig,
    derive_seed,
    emit_histogram,
    parse_sweep,
    registration_error,
    run_benchmark,
    write_summary_json,
    write_trials_csv,
)
from .liegroup import RigidTransform
from .pnp import PnpConfig, grid_to_correspondences, ransac_pnp, save_correspondences_csv
from .scene import (
    NoiseModel,
    PairProtocol,
    SceneConfig,
    corrupt_labels,
    downsample,
    generate_scene,
    load_kitti_bin,
    sample_pair,
    save_kitti_bin,
)
from .solver import Mode, SolverConfig, solve, solver_config_dict

ENV_OUT = "FRUSTREG_OUT"
ENV_THREADS = "FRUSTREG_THREADS"

EXIT_OK, EXIT_RUNTIME, EXIT_INPUT, EXIT_FAILURES = 0, 1, 2, 3


class InputError(Exception):
    """Invalid arguments or input files (exit code 2)."""


# ---------------------------------------------------------------------------
# helpers


def _out_dir(args) -> Path:
    d = Path(args.out or os.environ.get(ENV_OUT) or ".")
    try:
        d.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create output directory {d}: {exc}") from exc
    return d


def _write_json(path: Path, obj) -> None:
    try:
        path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _read_json(path) -> dict:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise InputError(f"cannot read {p}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{p}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc


def _load_pose(spec: str) -> RigidTransform:
    """A pose file (``{"pose": [...]}``) or 12 comma-separated numbers."""
    if Path(spec).exists():
        d = _read_json(spec)
        values = d.get("pose") if isinstance(d, dict) else d
    else:
        try:
            values = [float(v) for v in spec.split(",")]
        except ValueError as exc:
            raise InputError(f"pose {spec!r} is neither a file nor 12 numbers") from exc
    try:
        return RigidTransform.from_list(values)
    except (TypeError, ValueError) as exc:
        raise InputError(f"invalid pose: {exc}") from exc


def _load_camera(path: Optional[str], width=None, height=None) -> CameraModel:
    cam = CameraModel.from_dict(_read_json(path)) if path else CameraModel()
    if width is not None or height is not None:
        w = cam.width if width is None else width
        h = cam.height if height is None else height
        cam = replace(cam, width=w, height=h, cx=w / 2.0, cy=h / 2.0)
    return cam


def _pose_json(g: RigidTransform) -> dict:
    return {"pose": g.to_list()}


class Manifest:
    def __init__(self, command: str, argv: List[str]):
        self.data = {
            "subcommand": command,
            "argv": list(argv),
            "version": __version__,
            "config": {},
            "seeds": {},
            "inputs": {},
            "outputs": {},
            "start": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        }

    def write(self, path: Path) -> None:
        self.data["end"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
        self.data["outputs"]["manifest"] = str(path)
        _write_json(path, self.data)


def _positive_int(name):
    def conv(s):
        try:
            v = int(s)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be an integer, got {s!r}")
        if v < 1:
            raise argparse.ArgumentTypeError(f"{name} must be at least 1, got {v}")
        return v

    return conv


def _positive_float(name):
    def conv(s):
        try:
            v = float(s)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be a number, got {s!r}")
        if not v > 0:
            raise argparse.ArgumentTypeError(f"{name} must be positive, got {v}")
        return v

    return conv


def _unit_float(name):
    def conv(s):
        try:
            v = float(s)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be a number, got {s!r}")
        if not 0.0 <= v <= 1.0:
            raise argparse.ArgumentTypeError(f"{name} must lie in [0, 1], got {v}")
        return v

    return conv


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen(args, manifest: Manifest) -> int:
    out = _out_dir(args)
    cam = _load_camera(args.camera, args.width, args.height)
    if args.grid:
        cam.check_grid()
    scene = SceneConfig(num_points=args.points, cloud_radius=args.radius, seed=derive_seed(args.seed, "scene", 0))
    proto = PairProtocol(max_translation=args.tlimit, seed=derive_seed(args.seed, "pair", 0))
    noise = NoiseModel(args.noise, args.boundary_bias, args.grid_scatter, seed=derive_seed(args.seed, "noise", 0))
    cloud = generate_scene(scene)
    truth, labeled = sample_pair(cloud, cam, proto, with_grid=args.grid)
    if noise.flip_rate > 0 or noise.grid_scatter > 0:
        labeled = corrupt_labels(labeled, noise, cam, truth)
    paths = {
        "cloud": out / "cloud.bin",
        "labels": out / "labels.frlc",
        "gt_pose": out / "gt_pose.json",
        "camera": out / "camera.json",
    }
    try:
        save_kitti_bin(labeled.cloud, paths["cloud"])
        save_labeled(labeled, paths["labels"])
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    _write_json(paths["gt_pose"], _pose_json(truth))
    _write_json(paths["camera"], cam.to_dict())
    manifest.data["config"] = {
        "scene": asdict(scene), "protocol": asdict(proto), "noise": asdict(noise),
        "camera": cam.to_dict(), "grid": args.grid,
    }
    manifest.data["seeds"] = {"master": args.seed, "scene": scene.seed, "pair": proto.seed, "noise": noise.seed}
    manifest.data["outputs"] = {k: str(v) for k, v in paths.items()}
    manifest.write(out / "gen.manifest.json")
    print(f"wrote {len(labeled)} points ({labeled.num_in_frustum()} in frustum) to {out}")
    return EXIT_OK


def cmd_label(args, manifest: Manifest) -> int:
    out = _out_dir(args)
    cam = _load_camera(args.camera)
    cloud = load_labeled(args.cloud).cloud if str(args.cloud).endswith(".frlc") else load_kitti_bin(args.cloud)
    pose = _load_pose(args.pose)
    labeled = label_cloud(cam, pose, cloud, with_grid=args.grid)
    path = out / args.name
    try:
        save_labeled(labeled, path)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    manifest.data["config"] = {"camera": cam.to_dict(), "pose": pose.to_list(), "grid": args.grid}
    manifest.data["inputs"] = {"cloud": str(args.cloud)}
    manifest.data["outputs"] = {"labels": str(path)}
    manifest.write(out / "label.manifest.json")
    print(f"labeled {len(labeled)} points, {labeled.num_in_frustum()} in frustum -> {path}")
    return EXIT_OK


def cmd_kitti_import(args, manifest: Manifest) -> int:
    out = _out_dir(args)
    cloud = load_kitti_bin(args.input)
    if args.points:
        cloud = downsample(cloud, args.points, seed=derive_seed(args.seed, "points", 0))
    path = out / args.name
    try:
        save_kitti_bin(cloud, path)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    lo, hi = cloud.points.min(axis=0), cloud.points.max(axis=0)
    manifest.data["config"] = {"points": args.points}
    manifest.data["seeds"] = {"master": args.seed}
    manifest.data["inputs"] = {"input": str(args.input)}
    manifest.data["outputs"] = {"cloud": str(path)}
    manifest.write(out / "kitti-import.manifest.json")
    print(f"imported {len(cloud)} points, bounds {lo.round(3).tolist()} .. {hi.round(3).tolist()} -> {path}")
    return EXIT_OK


def _registration(pose, args) -> dict:
    if not args.gt:
        return {}
    err = registration_error(pose, _load_pose(args.gt))
    return {"rte": err.rte, "rre": err.rre}


def cmd_solve(args, manifest: Manifest) -> int:
    out = _out_dir(args)
    cam = _load_camera(args.camera)
    labeled = load_labeled(args.labels)
    cost_cfg = CostConfig(alpha=args.alpha)
    solver_cfg = SolverConfig(
        mode=Mode(args.mode), num_starts=args.starts, max_iters=args.max_iters,
        translation_init_radius=args.init_radius, seed=args.seed,
    )
    inits = None
    if args.init_from_pnp:
        if not labeled.has_grid:
            raise InputError("--init-from-pnp needs grid labels, but the labeled cloud has no grid channel")
        corr, down = grid_to_correspondences(labeled, cam)
        g, _ = ransac_pnp(corr, down, PnpConfig(seed=args.seed))
        inits = [g]
    workers = args.workers or int(os.environ.get(ENV_THREADS, "1"))
    try:
        report = solve(labeled, cam, cost_cfg, solver_cfg, inits=inits, workers=workers)
    except AllStartsFailed as exc:
        for reason in exc.reasons:
            print(reason, file=sys.stderr)
        raise
    result = report.to_dict(verbose=args.verbose)
    result.update(_registration(report.best_pose, args))
    path = out / args.name
    _write_json(path, result)
    manifest.data["config"] = {"cost": asdict(cost_cfg), "solver": solver_config_dict(solver_cfg),
                               "camera": cam.to_dict(), "init_from_pnp": args.init_from_pnp}
    manifest.data["seeds"] = {"solver": args.seed}
    manifest.data["inputs"] = {"labels": str(args.labels), "gt": args.gt}
    manifest.data["outputs"] = {"report": str(path)}
    manifest.write(out / "solve.manifest.json")
    summary = {k: result[k] for k in ("best_pose", "best_cost", "best_index") if k in result}
    summary.update({k: result[k] for k in ("rte", "rre") if k in result})
    print(json.dumps(summary))
    return EXIT_OK


def cmd_pnp(args, manifest: Manifest) -> int:
    out = _out_dir(args)
    cam = _load_camera(args.camera)
    labeled = load_labeled(args.labels)
    cfg = PnpConfig(args.threshold, args.iters, args.min_inliers, args.seed)
    corr, down = grid_to_correspondences(labeled, cam, center=args.center)
    g, mask = ransac_pnp(corr, down, cfg)
    result = {"pose": g.to_list(), "num_correspondences": len(corr), "num_inliers": int(mask.sum()),
              "inlier_ratio": float(mask.mean())}
    result.update(_registration(g, args))
    path = out / args.name
    _write_json(path, result)
    outputs = {"report": str(path)}
    if args.csv:
        try:
            save_correspondences_csv(corr, out / args.csv)
        except OSError as exc:
            raise IoFailure(str(exc)) from exc
        outputs["correspondences"] = str(out / args.csv)
    manifest.data["config"] = {"pnp": asdict(cfg), "camera": cam.to_dict(), "center": args.center}
    manifest.data["seeds"] = {"ransac": args.seed}
    manifest.data["inputs"] = {"labels": str(args.labels), "gt": args.gt}
    manifest.data["outputs"] = outputs
    manifest.write(out / "pnp.manifest.json")
    print(f"inliers {result['num_inliers']}/{result['num_correspondences']} "
          f"(ratio {result['inlier_ratio']:.3f})")
    print(json.dumps(result))
    return EXIT_OK


def cmd_bench(args, manifest: Manifest) -> int:
    out = _out_dir(args)
    base = _read_json(args.config) if args.config else {}
    overrides = {
        "trials": args.trials, "seed": args.seed, "method": args.method, "flip_rate": args.noise,
        "boundary_bias": args.boundary_bias, "num_points": args.points, "max_translation": args.tlimit,
    }
    base.update({k: v for k, v in overrides.items() if v is not None})
    if args.starts is not None:
        base["solver"] = dict(base.get("solver", {}), num_starts=args.starts)
    if args.tlimit is not None:
        base["solver"] = dict(base.get("solver", {}), translation_init_radius=args.tlimit)
    try:
        cfg = SuiteConfig.from_dict(base)
    except (TypeError, ValueError) as exc:
        raise InputError(f"suite config: {exc}") from exc
    sweep = parse_sweep(args.sweep) if args.sweep else None
    workers = args.workers or int(os.environ.get(ENV_THREADS, "1"))

    def progress(results):
        if not args.quiet:
            for r in results:
                print(f"trial {r.trial} {r.setting} {r.status} rte={r.rte:.3f} rre={r.rre:.3f}", file=sys.stderr)

    summary = run_benchmark(cfg, sweep, workers=workers, progress=progress)
    paths = {"summary": out / "summary.json", "trials": out / "trials.csv"}
    write_summary_json(summary, paths["summary"])
    write_trials_csv(summary, paths["trials"])
    if any(s.succeeded for s in summary.settings):
        for metric in ("rte", "rre"):
            for fmt in ("csv", "svg"):
                p = out / f"{metric}_hist.{fmt}"
                emit_histogram(summary, p, fmt, metric)
                paths[f"{metric}_hist_{fmt}"] = p
    manifest.data["config"] = cfg.to_dict()
    manifest.data["config"]["sweep"] = args.sweep
    manifest.data["seeds"] = {"master": cfg.seed}
    manifest.data["outputs"] = {k: str(v) for k, v in paths.items()}
    manifest.write(out / "bench.manifest.json")

    worst = 0.0
    for s in summary.settings:
        d = s.to_dict()
        worst = max(worst, s.failure_rate)
        label = s.setting or "all"
        print(f"{label}: rte {d['rte']['mean']:.3f} +- {d['rte']['std']:.3f} m, "
              f"rre {d['rre']['mean']:.3f} +- {d['rre']['std']:.3f} deg, failure rate {s.failure_rate:.3f}")
    return EXIT_FAILURES if worst > args.max_failure_rate else EXIT_OK


def cmd_residuals(args, manifest: Manifest) -> int:
    out = _out_dir(args)
    cam = _load_camera(args.camera)
    labeled = load_labeled(args.labels)
    pose = _load_pose(args.pose)
    cfg = CostConfig(alpha=args.alpha)
    rows = residual_table(labeled, pose, cam, cfg)
    path = out / args.name
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "label", "p_x", "p_y", "z", "r"])
            for row in rows:
                w.writerow([int(row[0]), int(row[1])] + [repr(float(v)) for v in row[2:]])
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    total = evaluate(labeled, pose, cam, cfg).total_cost
    manifest.data["config"] = {"cost": asdict(cfg), "camera": cam.to_dict(), "pose": pose.to_list()}
    manifest.data["inputs"] = {"labels": str(args.labels)}
    manifest.data["outputs"] = {"residuals": str(path)}
    manifest.write(out / "residuals.manifest.json")
    print(f"total cost {total!r} over {len(labeled)} points -> {path}")
    return EXIT_OK


def cmd_rerun(args, manifest: Manifest) -> int:
    d = _read_json(args.manifest)
    argv = d.get("argv")
    if not isinstance(argv, list) or not argv or argv[0] == "rerun":
        raise InputError(f"{args.manifest} does not hold a replayable argv")
    return main(argv)


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="frustreg", description="Frustum-label image/point-cloud registration.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--out", default=None, help=f"output directory (default: ${ENV_OUT} or .)")
        if seed:
            sp.add_argument("--seed", type=int, default=0, help="master seed (default: 0)")

    sp = sub.add_parser("gen", help="generate a synthetic scene, camera pair and labels")
    common(sp)
    sp.add_argument("--points", type=_positive_int("--points"), default=20480, help="cloud size (default: 20480)")
    sp.add_argument("--radius", type=_positive_float("--radius"), default=50.0, help="cloud radius in m (default: 50)")
    sp.add_argument("--tlimit", type=_positive_float("--tlimit"), default=10.0,
                    help="max camera distance from the cloud origin in m (default: 10)")
    sp.add_argument("--noise", type=_unit_float("--noise"), default=0.0, help="label flip rate (default: 0)")
    sp.add_argument("--boundary-bias", type=_unit_float("--boundary-bias"), default=0.5,
                    help="share of flips near frustum borders (default: 0.5)")
    sp.add_argument("--grid-scatter", type=_unit_float("--grid-scatter"), default=0.0,
                    help="probability of a random grid label (default: 0)")
    sp.add_argument("--grid", action="store_true", help="also write grid labels")
    sp.add_argument("--camera", default=None, help="camera JSON (default: built-in 640x384)")
    sp.add_argument("--width", type=_positive_int("--width"), default=None, help="override image width")
    sp.add_argument("--height", type=_positive_int("--height"), default=None, help="override image height")
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("label", help="label an existing cloud at a given pose")
    common(sp, seed=False)
    sp.add_argument("cloud", help="KITTI .bin cloud or .frlc labeled cloud")
    sp.add_argument("--pose", required=True, help="pose JSON file or 12 comma-separated numbers")
    sp.add_argument("--camera", default=None, help="camera JSON")
    sp.add_argument("--grid", action="store_true", help="also write grid labels")
    sp.add_argument("--name", default="labels.frlc", help="output file name (default: labels.frlc)")
    sp.set_defaults(func=cmd_label)

    sp = sub.add_parser("kitti-import", help="validate and normalise a KITTI Velodyne .bin file")
    common(sp)
    sp.add_argument("input", help="KITTI .bin file")
    sp.add_argument("--points", type=_positive_int("--points"), default=None, help="random downsample size")
    sp.add_argument("--name", default="cloud.bin", help="output file name (default: cloud.bin)")
    sp.set_defaults(func=cmd_kitti_import)

    sp = sub.add_parser("solve", help="multi-start inverse-projection solve")
    common(sp)
    sp.add_argument("labels", help="labeled cloud (.frlc)")
    sp.add_argument("--camera", default=None, help="camera JSON")
    sp.add_argument("--gt", default=None, help="ground-truth pose for RTE/RRE")
    sp.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.PLANAR.value,
                    help="3dof (planar, default) or 6dof")
    sp.add_argument("--starts", type=_positive_int("--starts"), default=60, help="random starts (default: 60)")
    sp.add_argument("--max-iters", type=_positive_int("--max-iters"), default=100, help="LM iterations (default: 100)")
    sp.add_argument("--init-radius", type=_positive_float("--init-radius"), default=10.0,
                    help="start disk radius in m (default: 10)")
    sp.add_argument("--alpha", type=_positive_float("--alpha"), default=50.0,
                    help="behind-camera weight in px/m (default: 50)")
    sp.add_argument("--init-from-pnp", action="store_true", help="single start from the RANSAC-PnP pose")
    sp.add_argument("--workers", type=_positive_int("--workers"), default=None,
                    help=f"worker threads (default: ${ENV_THREADS} or 1)")
    sp.add_argument("--verbose", action="store_true", help="include every start in the report")
    sp.add_argument("--name", default="solve.json", help="report file name (default: solve.json)")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("pnp", help="RANSAC-EPnP on grid labels")
    common(sp)
    sp.add_argument("labels", help="labeled cloud with grid labels (.frlc)")
    sp.add_argument("--camera", default=None, help="camera JSON")
    sp.add_argument("--gt", default=None, help="ground-truth pose for RTE/RRE")
    sp.add_argument("--threshold", type=_positive_float("--threshold"), default=0.6,
                    help="inlier threshold in 1/32-scale pixels (default: 0.6)")
    sp.add_argument("--iters", type=_positive_int("--iters"), default=500, help="RANSAC iterations (default: 500)")
    sp.add_argument("--min-inliers", type=_positive_int("--min-inliers"), default=6, help="(default: 6)")
    sp.add_argument("--center", action="store_true", help="use cell centres instead of cell corners")
    sp.add_argument("--csv", default=None, help="also export correspondences to this CSV name")
    sp.add_argument("--name", default="pnp.json", help="report file name (default: pnp.json)")
    sp.set_defaults(func=cmd_pnp)

    sp = sub.add_parser("bench", help="benchmark suite with optional sweeps")
    sp.add_argument("--out", default=None, help=f"output directory (default: ${ENV_OUT} or .)")
    sp.add_argument("--config", default=None, help="suite JSON; flags below override it")
    sp.add_argument("--seed", type=int, default=None, help="master seed (default: 0)")
    sp.add_argument("--trials", type=_positive_int("--trials"), default=None, help="trials per setting (default: 10)")
    sp.add_argument("--method", choices=["solver", "pnp"], default=None, help="(default: solver)")
    sp.add_argument("--noise", type=_unit_float("--noise"), default=None, help="label flip rate (default: 0)")
    sp.add_argument("--boundary-bias", type=_unit_float("--boundary-bias"), default=None, help="(default: 0.5)")
    sp.add_argument("--points", type=_positive_int("--points"), default=None, help="points per trial (default: 20480)")
    sp.add_argument("--starts", type=_positive_int("--starts"), default=None, help="solver starts (default: 60)")
    sp.add_argument("--tlimit", type=_positive_float("--tlimit"), default=None,
                    help="translation limit and start radius in m (default: 10)")
    sp.add_argument("--sweep", default=None, help="one of starts=..., points=..., tlimit=... (comma-separated)")
    sp.add_argument("--workers", type=_positive_int("--workers"), default=None,
                    help=f"worker threads (default: ${ENV_THREADS} or 1)")
    sp.add_argument("--max-failure-rate", type=float, default=0.0,
                    help="exit 3 when any setting fails more often (default: 0)")
    sp.add_argument("--quiet", action="store_true", help="no per-trial progress on stderr")
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("residuals", help="dump per-point residuals at a pose as CSV")
    common(sp, seed=False)
    sp.add_argument("labels", help="labeled cloud (.frlc)")
    sp.add_argument("--pose", required=True, help="pose JSON file or 12 comma-separated numbers")
    sp.add_argument("--camera", default=None, help="camera JSON")
    sp.add_argument("--alpha", type=_positive_float("--alpha"), default=50.0, help="(default: 50)")
    sp.add_argument("--name", default="residuals.csv", help="output file name (default: residuals.csv)")
    sp.set_defaults(func=cmd_residuals)

    sp = sub.add_parser("rerun", help="replay the command recorded in a manifest")
    sp.add_argument("manifest", help="*.manifest.json")
    sp.set_defaults(func=cmd_rerun, out=None)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    manifest = Manifest(args.command, argv)
    try:
        return args.func(args, manifest)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except IoFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except FrustRegError as exc:
        code = EXIT_INPUT if isinstance(exc, ValueError) else EXIT_RUNTIME
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FileNotFoundError as exc:
        print(f"error: no such file: {exc.filename}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
