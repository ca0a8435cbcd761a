"""Command-line entry point: ``radartext <command> ...``.

Exit codes: 0 success, 1 module error (or failed validation), 2 missing
input or config, 3 feature/codebook dimension mismatch, 4 frame range out
of bounds.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from collections import Counter
from pathlib import Path

import numpy as np

from . import cloudio, dataset_io, procedural
from .errors import ConfigError, DimensionMismatchError, MotionFormatError, RadarTextError
from .fmcw_config import apply_overrides, default_config, derive, load_config

EXIT_OK, EXIT_ERROR, EXIT_MISSING, EXIT_DIM, EXIT_RANGE = 0, 1, 2, 3, 4
CORPUS_ENV = "RADARTEXT_CORPUS_ROOT"

log = logging.getLogger("radartext")


class CommandFailed(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _config(args):
    if getattr(args, "config", None):
        if not Path(args.config).is_file():
            raise CommandFailed(EXIT_MISSING, f"[fmcw_config] config not found: {args.config}")
        cfg = load_config(args.config)
    else:
        cfg = default_config()
    return apply_overrides(cfg, getattr(args, "set", None))


def _emit(args, summary: list[str], report: dict) -> None:
    print("\n".join(summary))
    if getattr(args, "report", None):
        Path(args.report).write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")


def _derived_lines(cfg) -> list[str]:
    dp = derive(cfg)
    return [
        f"wavelength_m {dp.wavelength_m:.6g}",
        f"range_resolution_m {dp.range_resolution_m:.6g}",
        f"max_range_m {dp.max_range_m:.6g}",
        f"velocity_resolution_mps {dp.velocity_resolution_mps:.6g}",
        f"max_velocity_mps {dp.max_velocity_mps:.6g}",
    ]


def cmd_derive_params(args) -> int:
    cfg = _config(args)
    dp = derive(cfg)
    _emit(args, _derived_lines(cfg), {"config": cfg.to_dict(), "derived": dp.__dict__})
    return EXIT_OK


def _load_motion(args):
    from .motion_scene import load_motion
    if not Path(args.motion).exists():
        raise CommandFailed(EXIT_MISSING, f"[motion_scene] motion not found: {args.motion}")
    return load_motion(args.motion, args.format, fps=args.mesh_fps)


def cmd_synth(args) -> int:
    from .pipeline import SynthOptions, synthesize_sequence

    cfg = _config(args).replace(rng_seed=args.seed)
    if args.snr is not None:
        cfg = cfg.replace(snr_db=args.snr)
    motion = _load_motion(args)
    opts = SynthOptions(density=args.density, rings=args.rings, sectors=args.sectors,
                        angle_mode=args.angle_mode, window=args.window,
                        mount_height_m=args.mount_height)
    timings: list = []
    print(f"synthesizing {args.motion} ({args.threads} thread(s))", file=sys.stderr)
    start = time.perf_counter()
    clouds = synthesize_sequence(motion, cfg, args.seed, opts, threads=args.threads, timings=timings)
    elapsed = time.perf_counter() - start
    cloudio.write_clouds(clouds, args.out)
    per_frame = [t for _, t in sorted(timings)]
    summary = [f"frames {len(clouds)}", f"points_per_frame {cloudio.POINTS_PER_FRAME}",
               f"output {args.out}", f"config_hash {cfg.config_hash()}",
               f"elapsed_s {elapsed:.3f}",
               f"per_frame_s mean {np.mean(per_frame):.4f} max {np.max(per_frame):.4f}"]
    summary += _derived_lines(cfg)
    _emit(args, summary, {"frames": len(clouds), "output": str(args.out), "config_hash": cfg.config_hash(),
                          "per_frame_s": per_frame, "derived": derive(cfg).__dict__})
    return EXIT_OK


def _parse_triple(values, name):
    if values is None:
        return None
    if len(values) != 3:
        raise CommandFailed(EXIT_ERROR, f"{name} needs three values")
    return tuple(float(v) for v in values)


def cmd_tokenize(args) -> int:
    from . import tokenizer_front as tf

    for p in (args.codebook,) + ((args.cloud,) if args.cloud else ()) + ((args.features,) if args.features else ()):
        if not Path(p).is_file():
            raise CommandFailed(EXIT_MISSING, f"[tokenizer_front] input not found: {p}")
    codebook = tf.read_codebook(args.codebook)
    if args.features:
        feats = tf.read_features(args.features)
        src = f"features {args.features}"
    else:
        if not args.cloud:
            raise CommandFailed(EXIT_ERROR, "either --cloud or --features is required")
        clouds = cloudio.read_clouds(args.cloud)
        nx, ny, nz = args.grid
        center = _parse_triple(args.center, "--center") or (0.0, 3.0, 0.0)
        extents = _parse_triple(args.extents, "--extents") or (2.0, 2.0, 2.0)
        lo = tuple(c - e / 2 for c, e in zip(center, extents))
        hi = tuple(c + e / 2 for c, e in zip(center, extents))
        grid = tf.build_grid((lo, hi), nx, ny, nz)
        grouped = tf.group(clouds, grid, args.radius, args.rate)
        feats = grouped.flattened()
        src = f"cloud {args.cloud} ({len(clouds)} frames)"
        if args.features_out:
            tf.write_features(feats, args.features_out)
    try:
        tokens = tf.quantize(feats, codebook)
    except DimensionMismatchError as e:
        raise CommandFailed(EXIT_DIM, str(e)) from e
    tf.write_tokens(tokens, args.out)
    hist = Counter(tokens.ids)
    top = ", ".join(f"{k}:{v}" for k, v in sorted(hist.items(), key=lambda kv: (-kv[1], kv[0]))[:8])
    summary = [f"source {src}", f"tokens {len(tokens)}", f"distinct {len(hist)} of {codebook.size}",
               f"histogram_total {sum(hist.values())}", f"top {top}", f"output {args.out}"]
    _emit(args, summary, {"tokens": list(tokens.ids), "histogram": {str(k): v for k, v in sorted(hist.items())},
                          "seed": args.seed})
    return EXIT_OK


def _frame_range(spec: str, count: int) -> range:
    try:
        if ":" in spec:
            a, b = spec.split(":", 1)
            start = int(a) if a else 0
            end = int(b) if b else count
        else:
            start = int(spec)
            end = start + 1
    except ValueError:
        raise CommandFailed(EXIT_RANGE, f"bad frame range {spec!r}") from None
    if start < 0 or end > count or end <= start:
        raise CommandFailed(EXIT_RANGE, f"frame range {spec!r} out of bounds for {count} frames")
    return range(start, end)


def cmd_export(args) -> int:
    if not Path(args.cloud).is_file():
        raise CommandFailed(EXIT_MISSING, f"[io] cloud not found: {args.cloud}")
    clouds = cloudio.read_clouds(args.cloud)
    frames = _frame_range(args.frames, len(clouds))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.cloud).stem
    written = []
    for i in frames:
        path = out / f"{stem}_{i:06d}.{args.format}"
        (cloudio.export_csv if args.format == "csv" else cloudio.export_ply)(clouds[i], path)
        written.append(str(path))
    _emit(args, [f"exported {len(written)} frame(s) as {args.format} to {out}"], {"files": written})
    return EXIT_OK


def cmd_inspect(args) -> int:
    if args.cloud:
        if not Path(args.cloud).is_file():
            raise CommandFailed(EXIT_MISSING, f"[io] cloud not found: {args.cloud}")
        clouds = cloudio.read_clouds(args.cloud)
        lines = [f"frames {len(clouds)}"]
        for c in clouds[: args.limit]:
            p = c.points
            lines.append(f"frame {c.frame_index} t={c.timestamp:.3f} r=[{p[:, 3].min():.3f},{p[:, 3].max():.3f}] "
                         f"v=[{p[:, 4].min():.3f},{p[:, 4].max():.3f}] peak_db={p[0, 5]:.2f}")
        _emit(args, lines, {"frames": len(clouds)})
        return EXIT_OK
    if not args.motion:
        raise CommandFailed(EXIT_ERROR, "inspect needs --cloud or --motion")
    from .pipeline import _sampling_seed, frame_meshes
    from .raytrace import AntennaArray, trace_frame

    cfg = _config(args)
    motion = _load_motion(args)
    _, meshes = frame_meshes(motion, cfg)
    if not 0 <= args.frame < len(meshes):
        raise CommandFailed(EXIT_RANGE, f"frame {args.frame} out of bounds for {len(meshes)} frames")
    paths = trace_frame(meshes[args.frame], AntennaArray.from_config(cfg), cfg, args.density,
                        _sampling_seed(args.seed))
    if args.if_out:
        from .if_synth import synthesize_if, write_if_cube
        write_if_cube(synthesize_if(paths, cfg, args.frame), args.if_out)
        print(f"noise-free IF cube written to {args.if_out}", file=sys.stderr)
    csv = paths.to_csv()
    if args.out:
        Path(args.out).write_text(csv, encoding="utf-8")
        print(f"paths {len(paths)} written to {args.out}")
    else:
        sys.stdout.write(csv)
    return EXIT_OK


def cmd_validate(args) -> int:
    root = args.root or os.environ.get(CORPUS_ENV)
    if not root:
        raise CommandFailed(EXIT_ERROR, f"no corpus root given and ${CORPUS_ENV} unset")
    report = dataset_io.validate(root)
    lines = report.lines()
    lines.append(f"{sum(r.ok for r in report.records)}/{len(report.records)} records pass")
    _emit(args, lines, {"ok": report.ok, "errors": report.errors,
                        "records": [r.__dict__ for r in report.records]})
    return report.exit_code


def cmd_demo_motion(args) -> int:
    from .motion_scene import save_motion

    seq = procedural.MOTIONS[args.kind](duration_s=args.duration, fps=args.fps, distance=args.distance)
    save_motion(seq, args.out)
    _emit(args, [f"{args.kind}: {len(seq)} frames at {args.fps} fps -> {args.out}"], {"frames": len(seq)})
    return EXIT_OK


def cmd_make_codebook(args) -> int:
    from .tokenizer_front import random_codebook, write_codebook

    cb = random_codebook(args.k, args.dim, args.seed, args.scale)
    write_codebook(cb, args.out)
    _emit(args, [f"codebook K={cb.size} D={cb.dim} -> {args.out}"], {"k": cb.size, "dim": cb.dim})
    return EXIT_OK


def cmd_corpus_add(args) -> int:
    root = args.root or os.environ.get(CORPUS_ENV)
    if not root:
        raise CommandFailed(EXIT_ERROR, f"no corpus root given and ${CORPUS_ENV} unset")
    if not Path(args.cloud).is_file():
        raise CommandFailed(EXIT_MISSING, f"[io] cloud not found: {args.cloud}")
    cfg = _config(args)
    tokens = None
    if args.tokens:
        tokens = [int(x) for x in Path(args.tokens).read_text(encoding="utf-8").split()]
    rec = dataset_io.add_sequence(root, args.id, cloudio.read_clouds(args.cloud), args.text, cfg,
                                  tokens, args.source_motion)
    _emit(args, [f"added {rec.id}: {rec.frame_count} frames, {len(rec.text)} text(s)"], json.loads(rec.to_json()))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="radartext", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def with_config(sp):
        sp.add_argument("--config", help="RadarConfig JSON file (defaults if omitted)")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config field")

    def with_report(sp):
        sp.add_argument("--report", help="also write a JSON report to this path")

    sp = sub.add_parser("derive-params", help="print derived resolution / ambiguity figures")
    with_config(sp)
    with_report(sp)
    sp.set_defaults(func=cmd_derive_params)

    sp = sub.add_parser("synth", help="simulate radar frame clouds from a motion")
    sp.add_argument("--motion", required=True, help="skeleton JSON file or PLY frame directory")
    sp.add_argument("--format", choices=("skeleton_json", "mesh_sequence"), default="skeleton_json")
    sp.add_argument("--mesh-fps", type=float, default=None, help="frame rate of a PLY mesh sequence")
    with_config(sp)
    sp.add_argument("--out", required=True, help="output RPC1 cloud file")
    sp.add_argument("--seed", type=int, required=True, help="RNG seed (mandatory)")
    sp.add_argument("--snr", type=float, default=None, help="override snr_db (inf disables noise)")
    sp.add_argument("--threads", type=int, default=1, help="frame-parallel workers")
    sp.add_argument("--density", type=float, default=600.0, help="surface samples per m^2")
    sp.add_argument("--rings", type=int, default=6)
    sp.add_argument("--sectors", type=int, default=12)
    sp.add_argument("--angle-mode", choices=("phase_array", "paper_literal"), default="phase_array")
    sp.add_argument("--window", choices=("hann",), default=None)
    sp.add_argument("--mount-height", type=float, default=0.0, help="z offset added to decoded points")
    with_report(sp)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("tokenize", help="group + quantize a cloud file into radar tokens")
    sp.add_argument("--cloud", help="RPC1 cloud file")
    sp.add_argument("--features", help="FEA1 features to quantize instead of grouping --cloud")
    sp.add_argument("--codebook", required=True, help="CBK1 codebook file")
    sp.add_argument("--out", required=True, help="token output, one id per line")
    sp.add_argument("--seed", type=int, required=True, help="RNG seed (mandatory)")
    sp.add_argument("--grid", type=int, nargs=3, default=(4, 4, 4), metavar=("NX", "NY", "NZ"))
    sp.add_argument("--center", nargs=3, metavar=("X", "Y", "Z"), help="anchor template centre (0 3 0)")
    sp.add_argument("--extents", nargs=3, metavar=("EX", "EY", "EZ"), help="anchor template size (2 2 2)")
    sp.add_argument("--radius", type=float, default=0.5, help="anchor neighbourhood radius, m")
    sp.add_argument("--rate", type=int, default=4, help="frames per token step")
    sp.add_argument("--features-out", help="also write the grouped features (FEA1)")
    with_report(sp)
    sp.set_defaults(func=cmd_tokenize)

    sp = sub.add_parser("export", help="write frames as CSV or PLY")
    sp.add_argument("--cloud", required=True)
    sp.add_argument("--format", choices=("csv", "ply"), default="csv")
    sp.add_argument("--frames", default=":", help="START[:END) frame range, e.g. 0 or 0:10")
    sp.add_argument("--out-dir", default=".")
    with_report(sp)
    sp.set_defaults(func=cmd_export)

    sp = sub.add_parser("inspect", help="summarise a cloud file or dump one frame's scatter paths")
    sp.add_argument("--cloud")
    sp.add_argument("--limit", type=int, default=10, help="frames to summarise")
    sp.add_argument("--motion")
    sp.add_argument("--format", choices=("skeleton_json", "mesh_sequence"), default="skeleton_json")
    sp.add_argument("--mesh-fps", type=float, default=None)
    sp.add_argument("--frame", type=int, default=0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--density", type=float, default=600.0)
    sp.add_argument("--out", help="CSV path (stdout if omitted)")
    sp.add_argument("--if-out", help="also dump the frame's noise-free IF cube (IFC1)")
    with_config(sp)
    with_report(sp)
    sp.set_defaults(func=cmd_inspect)

    sp = sub.add_parser("validate", help="check a corpus against its manifest")
    sp.add_argument("root", nargs="?", help=f"corpus root (default ${CORPUS_ENV})")
    with_report(sp)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("demo-motion", help="write a procedural skeleton motion")
    sp.add_argument("--kind", choices=sorted(procedural.MOTIONS), default="walk")
    sp.add_argument("--duration", type=float, default=9.0)
    sp.add_argument("--fps", type=float, default=10.0)
    sp.add_argument("--distance", type=float, default=3.0)
    sp.add_argument("--out", required=True)
    with_report(sp)
    sp.set_defaults(func=cmd_demo_motion)

    sp = sub.add_parser("make-codebook", help="write a seeded random CBK1 codebook")
    sp.add_argument("--k", type=int, default=512)
    sp.add_argument("--dim", type=int, default=640, help="640 = 64 anchors x 10 channels")
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--scale", type=float, default=1.0)
    sp.add_argument("--out", required=True)
    with_report(sp)
    sp.set_defaults(func=cmd_make_codebook)

    sp = sub.add_parser("corpus-add", help="add a cloud file plus descriptions to a corpus")
    sp.add_argument("--root", help=f"corpus root (default ${CORPUS_ENV})")
    sp.add_argument("--id", required=True)
    sp.add_argument("--cloud", required=True)
    sp.add_argument("--text", action="append", required=True, help="description (repeatable)")
    sp.add_argument("--tokens", help="token file to store alongside")
    sp.add_argument("--source-motion")
    with_config(sp)
    with_report(sp)
    sp.set_defaults(func=cmd_corpus_add)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except CommandFailed as e:
        print(str(e), file=sys.stderr)
        return e.code
    except ConfigError as e:
        code = EXIT_MISSING if "not found" in str(e) else EXIT_ERROR
        print(str(e), file=sys.stderr)
        return code
    except MotionFormatError as e:
        print(str(e), file=sys.stderr)
        return EXIT_MISSING if "not found" in str(e) else EXIT_ERROR
    except DimensionMismatchError as e:
        print(str(e), file=sys.stderr)
        return EXIT_DIM
    except RadarTextError as e:
        print(str(e), file=sys.stderr)
        return EXIT_ERROR
    except BrokenPipeError:
        # downstream pager closed early; keep the interpreter from complaining on exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
