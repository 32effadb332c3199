"""Command-line entry point.

Subcommands: synth (run the engine), eval (metrics over a motion file),
project (dump perception maps), bench (per-stage latency), gen-scene
(synthesize a scene from a spec). Exit codes: 0 success, 1 runtime failure,
2 configuration/validation error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .body import BodyModel, default_body_model, read_motion_jsonl, write_motion_jsonl
from .config import ConfigError, load_engine_config, load_scene_spec
from .engine import Engine
from .metrics import evaluate_motion
from .perception import PerceptionConfig, perceive
from .scene import (DynamicScene, PlyParseError, PointCloud, generate_synthetic,
                    load_ply, save_ply, snapshot)

_MODE_FLAGS = {"demos": "demos", "concat": "concat_baseline",
               "per-frame": "per_frame_baseline"}

_DIAG_COLUMNS = [
    "frame", "char", "x", "y", "z", "speed", "state", "phase",
    "goal_x", "goal_y", "goal_state", "goal_event", "clearance",
    "step_ms", "snapshot_ms", "perceive_ms", "plan_ms", "predict_ms",
    "blend_ms", "warning",
]


def _load_scene(path: str, seed: int) -> DynamicScene:
    p = Path(path)
    if p.suffix == ".ply":
        return DynamicScene(static_cloud=load_ply(p))
    spec = load_scene_spec(p)
    return generate_synthetic(spec, seed)


def _sha256_of(doc) -> str:
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()


def _write_manifest(out_dir: Path, config_doc, seed: int, outputs: list[str],
                    stages: dict) -> None:
    manifest = {
        "config_sha256": _sha256_of(config_doc),
        "seed": seed,
        "versions": {
            "scenemotion": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
        "outputs": outputs,
        "stage_wall_clock_s": stages,
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)


def cmd_synth(args) -> int:
    cfg, doc = load_engine_config(args.config)
    if args.seed is not None:
        doc["seed"] = args.seed
        cfg, _ = _reparse(doc)
    if args.mode is not None:
        doc["mode"] = _MODE_FLAGS[args.mode]
        cfg, _ = _reparse(doc)
    body = BodyModel.load(doc["body_path"]) if doc.get("body_path") else default_body_model()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stages = {}
    t0 = time.perf_counter()
    world = _load_scene(args.scene, cfg.seed)
    stages["scene_s"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    result = Engine(world, cfg, body).run()
    stages["run_s"] = time.perf_counter() - t0
    outputs = []
    for ci, motion in enumerate(result.motions):
        name = "motion.jsonl" if ci == 0 else f"motion_{ci}.jsonl"
        write_motion_jsonl(out / name, motion)
        outputs.append(name)
    with open(out / "diagnostics.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=_DIAG_COLUMNS, extrasaction="ignore")
        writer.writeheader()
        writer.writerows(result.diagnostics)
    outputs.append("diagnostics.csv")
    _write_manifest(out, doc, cfg.seed, outputs, stages)
    for warning in result.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    print(f"wrote {len(result.motions[0])} frames to {out / 'motion.jsonl'}")
    return 0


def _reparse(doc):
    from .config import engine_config_from_json

    return engine_config_from_json(doc), doc


def cmd_eval(args) -> int:
    motion, _ = read_motion_jsonl(args.motion)
    world = _load_scene(args.scene, args.seed)
    body = BodyModel.load(args.body) if args.body else default_body_model()
    snaps = [snapshot(world, f) for f in range(len(motion))] if world.actors \
        else snapshot(world, 0)
    reference = None
    if args.ref:
        reference, _ = read_motion_jsonl(args.ref)
    report = evaluate_motion(motion, snaps, body, reference=reference,
                             fps=world.frame_rate)
    text = json.dumps(report, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0


def _write_grid_csv(path, grid: np.ndarray) -> None:
    # row = second-axis bin ascending (latitude / y), column = first axis
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        for row in grid.T:
            writer.writerow([repr(float(v)) for v in row])


def _write_pgm(path, grid: np.ndarray) -> None:
    lo, hi = float(grid.min()), float(grid.max())
    span = hi - lo if hi > lo else 1.0
    scaled = np.round((grid - lo) / span * 255).astype(int)
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"P2\n{scaled.shape[0]} {scaled.shape[1]}\n255\n")
        for row in scaled.T:
            fh.write(" ".join(str(v) for v in row) + "\n")


def cmd_project(args) -> int:
    world = _load_scene(args.scene, args.seed)
    snap = snapshot(world, args.frame)
    root = np.array([float(v) for v in args.at.split(",")])
    if root.shape != (3,):
        raise ConfigError("--at expects x,y,z", "/at")
    sph, bev = perceive(snap, root, PerceptionConfig())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_grid_csv(out / "spherical.csv", sph.depth)
    _write_grid_csv(out / "bev.csv", bev.elevation)
    _write_pgm(out / "spherical.pgm", sph.depth)
    _write_pgm(out / "bev.pgm", bev.elevation)
    print(f"wrote spherical.csv/pgm and bev.csv/pgm to {out}")
    return 0


def _percentiles(samples):
    arr = np.asarray(samples)
    return {"p50_ms": float(np.percentile(arr, 50)), "p95_ms": float(np.percentile(arr, 95))}


def cmd_bench(args) -> int:
    cfg, doc = load_engine_config(args.config) if args.config else _reparse({})
    doc["frames"] = args.frames
    cfg, _ = _reparse(doc)
    world = _load_scene(args.scene, cfg.seed)
    engine = Engine(world, cfg)
    engine.run()
    rows = engine.diagnostics
    report = {"frames": args.frames}
    for stage in ("snapshot_ms", "perceive_ms", "plan_ms", "predict_ms", "blend_ms", "step_ms"):
        report[stage.replace("_ms", "")] = _percentiles([r[stage] for r in rows])
    from . import nn as nnmod
    from .predictor import compute_features, make_default_bundle, PredictorContext  # noqa: F401

    bundle = make_default_bundle(cfg.predictor.seed, horizon=cfg.blend.k)
    snap = snapshot(world, 0)
    root = np.asarray(cfg.characters[0].position, dtype=np.float64)
    sph, bev = perceive(snap, root, cfg.perception)
    for name, fn in (
        ("encode_spherical", lambda: nnmod.encode_spherical(sph, bundle.spherical_net)),
        ("encode_bev", lambda: nnmod.encode_bev(bev, bundle.bev_net)),
    ):
        times = []
        for _ in range(10):
            t0 = time.perf_counter()
            fn()
            times.append((time.perf_counter() - t0) * 1e3)
        report[name] = _percentiles(times)
    text = json.dumps(report, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0


def cmd_gen_scene(args) -> int:
    spec = load_scene_spec(args.spec)
    world = generate_synthetic(spec, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_ply(PointCloud(world.static_cloud.points), out / "scene.ply")
    actors = [
        {
            "id": a.id,
            "keyframes": [
                {"frame": int(f), "translation": t.tolist(), "yaw": float(y)}
                for f, t, y in zip(a.key_frames, a.key_translations, a.key_yaws)
            ],
            "points": len(a.cloud),
        }
        for a in world.actors
    ]
    with open(out / "actors.json", "w", encoding="utf-8") as fh:
        json.dump({"frame_rate": world.frame_rate, "actors": actors}, fh, indent=2)
    print(f"wrote {len(world.static_cloud)} static points to {out / 'scene.ply'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scenemotion",
                                     description="Scene-aware motion synthesis toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="run the synthesis engine")
    p.add_argument("scene", help="scene spec .json or static .ply")
    p.add_argument("config", help="engine config .json")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--mode", choices=sorted(_MODE_FLAGS), default=None)
    p.add_argument("--out", default="out")
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("eval", help="evaluate a motion file")
    p.add_argument("motion")
    p.add_argument("scene")
    p.add_argument("--body", default=None, help="body model .json")
    p.add_argument("--ref", default=None, help="reference motion for reconstruction metrics")
    p.add_argument("--seed", type=int, default=0, help="scene synthesis seed")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("project", help="dump perception maps at a position")
    p.add_argument("scene")
    p.add_argument("--at", required=True, help="x,y,z of the body root")
    p.add_argument("--frame", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out")
    p.set_defaults(fn=cmd_project)

    p = sub.add_parser("bench", help="per-stage latency report")
    p.add_argument("scene")
    p.add_argument("--frames", type=int, default=100)
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("gen-scene", help="synthesize a scene from a spec")
    p.add_argument("spec")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out")
    p.set_defaults(fn=cmd_gen_scene)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, PlyParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
