"""Command-line pipelines: detect -> owt -> ucm -> fuse -> threshold / eval."""
from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import io
from .contours import DEFAULT_SIGMAS, multiscale_oriented_contours
from .evaluation import (
    DEFAULT_MAX_DIST,
    MAX_DIST,
    boundary_counts,
    default_thresholds,
    region_counts,
    summarize,
)
from .fusion import fuse
from .hierarchy import build_ucm, level_count, partition_at, ucm_grid
from .orientation import (
    GRADIENT_SIGMA,
    gt_orientations,
    local_gradient_orientation,
    orient_accuracy,
)
from .partition import PartitionError, labels_from_sparse, sparse_from_labels
from .timing import bench_pipeline
from .watershed import DEFAULT_EPSILON, arc_orientations, owt_reweight, watershed_oversegment


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _size(text: str) -> tuple[int, int]:
    try:
        h, w = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected HxW, got {text!r}") from None
    if h < 1 or w < 1:
        raise argparse.ArgumentTypeError("size must be positive")
    return h, w


def _scale(text: str) -> tuple[str, float]:
    path, sep, weight = text.rpartition(":")
    if not sep:
        return text, 1.0
    try:
        return path, float(weight)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected <ucm.json>:<weight>, got {text!r}") from None


def _jobs(args) -> int:
    if args.jobs is not None:
        return max(1, args.jobs)
    return max(1, int(os.environ.get("COB_JOBS", "1")))


def _read_image(path: Path) -> np.ndarray:
    if path.suffix.lower() == ".pgm":
        return io.read_pgm(path)
    arr = io.read_fmap(path)
    if arr.shape[0] != 1:
        raise io.FormatError(f"{path}: expected a 1-channel image, found {arr.shape[0]} channels")
    return arr[0]


def _sigma_tag(s: float) -> str:
    return f"{s:g}".replace(".", "p")


def cmd_detect(args) -> None:
    image = _read_image(Path(args.image))
    out = Path(args.output)
    for sigma, (strength, stack) in zip(args.sigmas, multiscale_oriented_contours(image, args.sigmas)):
        tag = _sigma_tag(sigma)
        io.write_fmap(out / f"strength_s{tag}.fmap", strength)
        io.write_fmap(out / f"stack_s{tag}.fmap", stack)


def cmd_owt(args) -> None:
    strength = io.read_fmap(args.strength)
    stack = io.read_fmap(args.stack)
    if strength.shape[0] != 1:
        raise io.FormatError(f"{args.strength}: expected 1 channel, found {strength.shape[0]}")
    labels = watershed_oversegment(strength[0])
    sb = sparse_from_labels(labels)
    geom = arc_orientations(sb, args.epsilon, stack.shape[0])
    io.write_sparse(args.output, owt_reweight(sb, geom, stack, args.convention))


def _maybe_grid(args, h) -> None:
    if args.grid:
        io.write_fmap(args.grid, ucm_grid(h))


def cmd_ucm(args) -> None:
    sb = io.read_sparse(args.boundaries)
    h = build_ucm(sb, labels_from_sparse(sb))
    io.write_hierarchy(args.output, h)
    _maybe_grid(args, h)


def cmd_fuse(args) -> None:
    fine = io.read_sparse(args.fine)
    labels = labels_from_sparse(fine)
    scales = [(io.read_hierarchy(p), w) for p, w in args.scale]
    h = fuse(scales, fine, args.radius, labels=labels)
    io.write_hierarchy(args.output, h)
    _maybe_grid(args, h)


def cmd_threshold(args) -> None:
    h = io.read_hierarchy(args.hierarchy)
    io.write_lmap(args.output, partition_at(h, args.t))


def _load_grid(path: Path) -> np.ndarray:
    if path.name.endswith(".ucm.json"):
        return ucm_grid(io.read_hierarchy(path))
    grid = io.read_fmap(path)
    if grid.shape[0] != 1:
        raise io.FormatError(f"{path}: a UCM grid must have 1 channel")
    return grid[0]


def _boundary_job(job):
    pred, gts, thresholds, max_dist = job
    grid = _load_grid(pred)
    labels = [io.read_lmap(g) for g in gts]
    expected = ((grid.shape[0] + 1) // 2, (grid.shape[1] + 1) // 2)
    for g, lab in zip(gts, labels):
        if lab.shape != expected:
            raise io.FormatError(f"{g}: ground truth is {lab.shape}, prediction is {expected}")
    return boundary_counts(grid, labels, thresholds, max_dist)


def _region_job(job):
    pred, gts, thresholds = job
    h = io.read_hierarchy(pred)
    labels = [io.read_lmap(g) for g in gts]
    return np.array([region_counts(partition_at(h, t), labels) for t in thresholds])


def _map_jobs(fn, jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def _thresholds_for(items, args) -> np.ndarray:
    levels = []
    for _, pred, _ in items:
        if pred.name.endswith(".ucm.json"):
            levels.extend(level_count(io.read_hierarchy(pred))[1])
        else:
            g = _load_grid(pred)
            levels.extend(np.unique(g[g > 0]).tolist())
    return default_thresholds(levels)


def _write_curve(args, curve) -> None:
    io.write_tsv(args.output, ["threshold", "precision", "recall", "f"], curve.rows())
    summary = Path(args.summary) if args.summary else Path(args.output).with_suffix(".json")
    io.write_json(summary, curve.summary())


def cmd_eval_boundary(args) -> None:
    items = io.read_manifest(args.manifest)
    if not items:
        raise io.FormatError(f"{args.manifest}: empty manifest")
    max_dist = args.max_dist if args.max_dist is not None else MAX_DIST[args.dataset]
    thresholds = _thresholds_for(items, args)
    jobs = [(pred, gts, thresholds, max_dist) for _, pred, gts in items]
    counts = _map_jobs(_boundary_job, jobs, _jobs(args))
    _write_curve(args, summarize(thresholds, counts))


def cmd_eval_region(args) -> None:
    items = io.read_manifest(args.manifest)
    if not items:
        raise io.FormatError(f"{args.manifest}: empty manifest")
    thresholds = _thresholds_for(items, args)
    jobs = [(pred, gts, thresholds) for _, pred, gts in items]
    counts = _map_jobs(_region_job, jobs, _jobs(args))
    _write_curve(args, summarize(thresholds, counts))


def cmd_eval_orient(args) -> None:
    curve = orient_accuracy(io.read_orientation(args.pred), io.read_orientation(args.gt))
    io.write_tsv(args.output, ["percentile", "accuracy"],
                 zip(curve.percentiles.astype(int).tolist(), curve.accuracy.tolist()))
    summary = Path(args.summary) if args.summary else Path(args.output).with_suffix(".json")
    io.write_json(summary, {"auc": curve.auc})


def cmd_orient_gt(args) -> None:
    io.write_orientation(args.output, gt_orientations(io.read_lmap(args.labels), args.epsilon))


def cmd_orient_local(args) -> None:
    contour = io.read_fmap(args.contour)
    if contour.shape[0] != 1:
        raise io.FormatError(f"{args.contour}: expected 1 channel")
    io.write_orientation(args.output, local_gradient_orientation(contour[0], args.sigma))


def cmd_bench(args) -> None:
    image = _read_image(Path(args.image)) if args.image else None
    report = bench_pipeline(image, args.size, args.mode, args.repeats)
    io.write_tsv(args.output, ["stage", "mode", "ms"], report.rows())
    summary = Path(args.summary) if args.summary else Path(args.output).with_suffix(".json")
    io.write_json(summary, report.summary())
    if report.speedup is not None:
        print(f"OWT+UCM speedup (dense/sparse): {report.speedup:.2f}x, "
              f"identical hierarchies: {report.identical}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hierseg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="multiscale oriented contours from a PGM or .fmap image")
    p.add_argument("image")
    p.add_argument("--sigmas", type=_floats, default=list(DEFAULT_SIGMAS))
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("owt", help="watershed + oriented reweighting -> .sb.json")
    p.add_argument("strength")
    p.add_argument("stack")
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    p.add_argument("--convention", choices=("tangent", "normal"), default="tangent")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_owt)

    p = sub.add_parser("ucm", help="build a hierarchy from sparse boundaries")
    p.add_argument("boundaries")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--grid", help="also export the dense UCM as .fmap")
    p.set_defaults(func=cmd_ucm)

    p = sub.add_parser("fuse", help="fuse hierarchies onto the finest boundaries")
    p.add_argument("--scale", type=_scale, action="append", required=True,
                   metavar="UCM_JSON:WEIGHT")
    p.add_argument("--fine", required=True)
    p.add_argument("--radius", type=float, default=None,
                   help="projection radius in pixels (default 0.0075 x diagonal)")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--grid", help="also export the dense UCM as .fmap")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("threshold", help="partition of a hierarchy at a level")
    p.add_argument("hierarchy")
    p.add_argument("--t", type=float, required=True)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_threshold)

    for name, func, doc in (("eval-boundary", cmd_eval_boundary, "boundary PR curve (F_b)"),
                            ("eval-region", cmd_eval_region, "region PR curve (F_op)")):
        p = sub.add_parser(name, help=doc)
        p.add_argument("--manifest", required=True)
        if name == "eval-boundary":
            p.add_argument("--max-dist", type=float, default=None,
                           help=f"fraction of the diagonal (default {DEFAULT_MAX_DIST})")
            p.add_argument("--dataset", choices=sorted(MAX_DIST), default="bsds",
                           help="pick the max-dist default of a dataset")
        p.add_argument("--jobs", type=int, default=None)
        p.add_argument("-o", "--output", required=True)
        p.add_argument("--summary", help="JSON summary path (default: output with .json)")
        p.set_defaults(func=func)

    p = sub.add_parser("eval-orient", help="orientation accuracy curve and AUC")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--summary")
    p.set_defaults(func=cmd_eval_orient)

    p = sub.add_parser("orient-gt", help="ground-truth orientations of a partition")
    p.add_argument("labels")
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_orient_gt)

    p = sub.add_parser("orient-local", help="local-gradient orientation baseline")
    p.add_argument("contour")
    p.add_argument("--sigma", type=float, default=GRADIENT_SIGMA)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_orient_local)

    p = sub.add_parser("bench", help="sparse vs dense OWT+UCM timing")
    p.add_argument("--size", type=_size, default=(321, 481))
    p.add_argument("--image", help="PGM or .fmap input instead of the synthetic scene")
    p.add_argument("--mode", choices=("sparse", "dense", "both"), default="both")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--summary")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (io.FormatError, PartitionError, ValueError, KeyError, OSError) as exc:
        print(f"hierseg {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
