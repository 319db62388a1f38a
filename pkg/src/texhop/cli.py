"""Command-line front end: analyze exemplars, generate textures, audit models.

Exit codes: 0 on success, 1 when a computation or consistency check fails,
2 for usage and input errors. Every command takes --seed; omitting it draws
one from OS entropy and prints it so the run can be reproduced.
"""

from __future__ import annotations

import argparse
import json
import os
import secrets
import sys
import time
from pathlib import Path

import numpy as np

from .errors import FormatError, TexhopError
from .image_io import Image, load_image, save_image
from .pipeline import (
    RunRecord,
    TrainConfig,
    audit_size,
    deserialize,
    generate_patches,
    serialize,
    timing_report,
    train,
)
from .quilting import QuiltConfig, quilt
from .saab import HopSpec


def _resolve_seed(args) -> int:
    if args.seed is None:
        args.seed = secrets.randbits(63)
        print(f"seed: {args.seed} (drawn from entropy)")
    return args.seed


def _parse_channels(text: str) -> tuple[HopSpec, ...] | None:
    """--channels auto|all|K1,K2[,K3...] -> hop specs (None = library default)."""
    if text == "auto":
        return None
    if text == "all":
        return (HopSpec(channels="all"), HopSpec(channels="all"))
    try:
        counts = [int(tok) for tok in text.split(",")]
    except ValueError:
        raise ValueError(f"--channels expects 'auto', 'all', or a comma list of counts, got {text!r}")
    if not counts or any(c < 1 for c in counts):
        raise ValueError(f"--channels counts must be positive, got {text!r}")
    return tuple(HopSpec(channels=c) for c in counts)


def _parse_size(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise ValueError(f"--image expects WIDTHxHEIGHT, got {text!r}")


def _quantize(patch: np.ndarray) -> Image:
    return Image(np.clip(np.rint(patch), 0, 255).astype(np.uint8))


def cmd_analyze(args) -> int:
    seed = _resolve_seed(args)
    exemplar = load_image(args.exemplar)
    cfg = TrainConfig(
        patch_size=args.patch_size,
        patch_stride=args.stride,
        hops=_parse_channels(args.channels),
        gamma=args.gamma,
        n_clusters=args.clusters,
        codebook_size=args.codebook,
        whiten_energy=args.energy,
        rejection_percentile=args.rejection_percentile,
        rejection_threshold=args.rejection_threshold,
        seed=seed,
    )
    model = train(exemplar, cfg)
    blob = serialize(model)
    Path(args.output).write_bytes(blob)

    report = audit_size(model, blob)
    dims = model.chain.dims()
    shapes = ["x".join(map(str, s)) for s in model.chain.shape_meta]
    if args.json:
        print(
            json.dumps(
                {
                    "seed": seed,
                    "model": args.output,
                    "dims": dims,
                    "shapes": shapes,
                    "channels": model.chain.channel_counts,
                    "reduced_dim": model.core.sdr.reduced_dim,
                    "components": report.components,
                    "total_parameters": report.total,
                    "analysis_seconds": model.provenance.timings.get("analysis"),
                },
                indent=2,
            )
        )
    else:
        print(f"wrote {args.output} ({len(blob):,} bytes)")
        print("shape chain: " + " -> ".join(f"{s} ({d})" for s, d in zip(shapes, dims)))
        print("kept channels per hop: " + ", ".join(map(str, model.chain.channel_counts)))
        print(f"reduced core dimension: {model.core.sdr.reduced_dim}")
        for line in report.lines():
            print(line)
    return 0


def cmd_generate(args) -> int:
    seed = _resolve_seed(args)
    model = deserialize(Path(args.model).read_bytes())
    record = RunRecord()
    threads = args.threads or os.cpu_count() or 1

    if args.patches is not None:
        out_dir = Path(args.output or "patches")
        out_dir.mkdir(parents=True, exist_ok=True)
        patches = generate_patches(model, args.patches, seed, threads=threads, record=record)
        for i, patch in enumerate(patches):
            save_image(_quantize(patch), out_dir / f"patch_{i:05d}.png")
        if not args.json:
            print(f"wrote {len(patches)} patches to {out_dir}")
    else:
        width, height = _parse_size(args.image)
        pool = generate_patches(model, args.pool, seed, threads=threads, record=record)
        cfg = QuiltConfig(
            out_height=height,
            out_width=width,
            patch_size=model.config.patch_size,
            overlap=args.overlap,
            tolerance=args.tolerance,
            seed=seed,
        )
        t0 = time.perf_counter()
        image = quilt(pool, cfg)
        record.quilting.append(time.perf_counter() - t0)
        out = args.output or "texture.png"
        save_image(image, out)
        if not args.json:
            print(f"wrote {out} ({width}x{height}, pool {args.pool})")

    if args.report_timing or args.json:
        rep = timing_report(model, record)
        if args.json:
            print(json.dumps({"seed": seed, "timing": rep}, indent=2))
        else:
            analysis = rep["analysis"]
            print(f"analysis:   {'n/a (amortized; model loaded from file)' if analysis is None else f'{analysis:.2f} s'}")
            print(f"generation: {' + '.join(f'{t:.2f}' for t in rep['generation']) or '0'} s")
            print(f"quilting:   {' + '.join(f'{t:.2f}' for t in rep['quilting']) or '0'} s")
            print(f"total:      {rep['total']:.2f} s")
    return 0


def cmd_stats(args) -> int:
    blob = Path(args.model).read_bytes()
    model = deserialize(blob)
    report = audit_size(model, blob)
    if args.json:
        print(
            json.dumps(
                {
                    "components": report.components,
                    "walked": report.walked,
                    "total": report.total,
                    "walked_total": report.walked_total,
                    "matches": report.matches,
                },
                indent=2,
            )
        )
    else:
        for line in report.lines():
            print(line)
    if args.check and not report.matches:
        print("size check FAILED: walked counts disagree with closed form", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="texhop",
        description="Explainable texture generation: multi-stage block transforms "
        "plus core-subspace sampling and patch quilting.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    pa = sub.add_parser("analyze", help="fit a model on an exemplar PNG")
    pa.add_argument("exemplar", help="exemplar PNG path")
    pa.add_argument("-o", "--output", required=True, help="model file to write")
    pa.add_argument("--patch-size", type=int, default=32)
    pa.add_argument("--stride", type=int, default=2, help="training patch stride")
    pa.add_argument(
        "--channels",
        default="auto",
        help="'auto' (spectrum knee within default bounds), 'all', or per-hop totals like '10,27'",
    )
    pa.add_argument("--gamma", type=float, default=0.0, help="variance floor for kept core components")
    pa.add_argument("--clusters", type=int, default=50)
    pa.add_argument("--codebook", type=int, default=200, help="CDF codebook size (capped at the CDF count)")
    pa.add_argument("--energy", type=float, default=0.99, help="whitening energy fraction per cluster")
    pa.add_argument("--rejection-percentile", type=float, default=90.0)
    pa.add_argument(
        "--rejection-threshold",
        type=float,
        default=None,
        help="absolute rejection threshold; -inf disables rejection",
    )
    pa.add_argument("--seed", type=int, default=None)
    pa.add_argument("--json", action="store_true")
    pa.set_defaults(func=cmd_analyze)

    pg = sub.add_parser("generate", help="sample patches or a quilted image from a model")
    pg.add_argument("model", help="model file from analyze")
    what = pg.add_mutually_exclusive_group(required=True)
    what.add_argument("--patches", type=int, help="write N patch PNGs")
    what.add_argument("--image", help="quilt one WIDTHxHEIGHT image")
    pg.add_argument("--pool", type=int, default=2000, help="patch pool size for quilting")
    pg.add_argument("-o", "--output", help="output file (--image) or directory (--patches)")
    pg.add_argument("--overlap", type=int, default=None, help="quilting overlap (default patch/6)")
    pg.add_argument("--tolerance", type=float, default=0.1, help="candidate SSD tolerance")
    pg.add_argument("--threads", type=int, default=None, help="worker threads (default: logical cores)")
    pg.add_argument("--seed", type=int, default=None)
    pg.add_argument("--report-timing", action="store_true")
    pg.add_argument("--json", action="store_true")
    pg.set_defaults(func=cmd_generate)

    ps = sub.add_parser("stats", help="print a model's parameter-count report")
    ps.add_argument("model", help="model file")
    ps.add_argument("--check", action="store_true", help="exit 1 if walked counts mismatch")
    ps.add_argument("--json", action="store_true")
    ps.set_defaults(func=cmd_stats)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, FormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TexhopError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
