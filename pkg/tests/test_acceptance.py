"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""
import math
import time

import numpy as np
import pytest

from conftest import brute_agglomeration, canonicalize, random_labels
from hierseg.evaluation import match_boundaries, seg_boundary_map
from hierseg.fusion import fuse_strengths, project
from hierseg.hierarchy import build_ucm, partition_at
from hierseg.orientation import (
    OrientationField,
    gt_orientations,
    local_gradient_orientation,
    mean_class_accuracy,
    orient_accuracy,
)
from hierseg.partition import dense_from_sparse, sparse_from_dense, sparse_from_labels
from hierseg.timing import bench_pipeline
from hierseg.watershed import arc_orientations, owt_reweight
from test_cli import run_full_pipeline
from test_evaluation import exact_tp, line_map
from test_hierarchy import coarsens
from test_orientation import rotated_step
from test_partition import check_erase_against_rebuild


@pytest.fixture
def report(capsys):
    def emit(name, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        assert ok, detail
    return emit


def random_strengths(sb, rng):
    return sb.with_strengths({k: float(rng.random()) for k in sb.entries})


def test_round_trip(report):
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    bad = 0
    for _ in range(500):
        h, w = rng.integers(8, 65, 2)
        lab = random_labels(rng, h, w, max_regions=int(rng.integers(2, 12)))
        sb = random_strengths(sparse_from_labels(lab), rng)
        labels2, sb2 = sparse_from_dense(dense_from_sparse(sb, lab))
        same = (np.array_equal(labels2, canonicalize(lab)) and sb2.pairs() == sb.pairs()
                and all(np.array_equal(sb2.entries[k].coords, e.coords)
                        and sb2.entries[k].strength == e.strength for k, e in sb.entries.items()))
        bad += not same
    elapsed = time.perf_counter() - t0
    report("sparse/dense round trip", bad == 0 and elapsed < 10,
           f"{bad} mismatches of 500, {elapsed:.2f} s (limit 10 s)")


def test_merge_oracle(report):
    rng = np.random.default_rng(102)
    failures = done = 0
    while done < 500:
        lab = random_labels(rng, int(rng.integers(4, 16)), int(rng.integers(4, 16)))
        sb = sparse_from_labels(lab)
        if not sb.entries:
            continue
        sb = random_strengths(sb, rng)
        pair = sb.pairs()[rng.integers(len(sb.entries))]
        try:
            check_erase_against_rebuild(lab, sb, pair)
        except AssertionError:
            failures += 1
        done += 1
    report("erase_boundary vs rebuild", failures == 0, f"{failures} mismatches of 500")


def test_ultrametric_coarsening(report):
    rng = np.random.default_rng(103)
    violations = checks = 0
    for _ in range(100):
        lab = random_labels(rng, 16, 16, max_regions=10)
        h = build_ucm(random_strengths(sparse_from_labels(lab), rng), lab)
        levels = [-1.0] + sorted(set(h.levels.tolist()))
        parts = [partition_at(h, t) for t in levels]
        for fine, coarse in zip(parts, parts[1:]):
            checks += 1
            violations += not coarsens(fine, coarse)
    report("ultrametric coarsening", violations == 0,
           f"{violations} violations over {checks} adjacent level pairs")


def test_ucm_oracle(report):
    rng = np.random.default_rng(104)
    bad = 0
    worst = 0.0
    for _ in range(100):
        lab = random_labels(rng, 8, 8, max_regions=8)
        sb = random_strengths(sparse_from_labels(lab), rng)
        h = build_ucm(sb, lab)
        ref = brute_agglomeration(h.finest, sb.strengths())
        if [m[:3] for m in h.merges] != [m[:3] for m in ref]:
            bad += 1
            continue
        for m, r in zip(h.merges, ref):
            worst = max(worst, abs(m[3] - r[3]))
    report("UCM vs brute-force agglomeration", bad == 0 and worst <= 1e-9,
           f"{bad} structural mismatches of 100, max level error {worst:.2e}")


def test_orientation_baselines(report):
    rng = np.random.default_rng(105)
    gts, preds, total = [], [], 0
    while total < 100_000:
        lab = random_labels(rng, 96, 96, max_regions=10)
        g = gt_orientations(lab)
        n = len(g)
        p = OrientationField(g.rows, g.cols, rng.integers(0, 8, n), rng.random(n), g.height, g.width)
        gts.append(g)
        preds.append(p)
        total += n
    auc = orient_accuracy(preds, gts).auc

    pred_bins, gt_bins = [], []
    for k in range(8):
        img, dist = rotated_step(64, k * math.pi / 8)
        bins = local_gradient_orientation(img).bins.reshape(64, 64)
        near = dist < 1.0
        near[:8] = near[-8:] = False
        near[:, :8] = near[:, -8:] = False
        pred_bins.append(bins[near])
        gt_bins.append(np.full(int(near.sum()), k))
    acc = mean_class_accuracy(np.concatenate(pred_bins), np.concatenate(gt_bins))
    ok = abs(auc - 0.125) <= 0.01 and acc >= 0.9
    report("orientation baselines", ok,
           f"random AUC {auc:.4f} over {total} pixels (0.125 +- 0.01); "
           f"local gradient mean per-class accuracy {acc:.4f} (>= 0.9)")


def test_boundary_measure(report):
    rng = np.random.default_rng(106)
    identity_ok = True
    for _ in range(20):
        lab = random_labels(rng, 24, 24)
        m = match_boundaries(seg_boundary_map(lab), [lab])
        if m.sum_gt:
            identity_ok &= m.precision == m.recall == m.f == 1.0

    size = 120
    agree = cases = 0
    for _ in range(200):
        n = int(rng.integers(10, 101))
        dr, dc = [(0, 1), (1, 0), (1, 1), (1, -1)][int(rng.integers(4))]
        gt = line_map((size, size), 20, 50, dr, dc, n // 2)
        pred = line_map((size, size), 20 + int(rng.integers(-3, 4)), 50 + int(rng.integers(-3, 4)),
                        dr, dc, n - n // 2)
        max_dist = float(rng.uniform(0.005, 0.03))
        tp = match_boundaries(pred, [gt], max_dist).tp
        cases += 1
        agree += tp == exact_tp(pred, gt, max_dist * math.hypot(size, size))

    monotone = True
    for _ in range(30):
        pred = seg_boundary_map(random_labels(rng, 24, 24))
        gts = [random_labels(rng, 24, 24) for _ in range(2)]
        tps = [match_boundaries(pred, gts, d).tp for d in np.linspace(0.005, 0.2, 12)]
        monotone &= tps == sorted(tps)
    report("boundary measure", identity_ok and agree == cases and monotone,
           f"identity P=R=F=1: {identity_ok}; exact-matcher agreement {agree}/{cases}; "
           f"TP monotone in max_dist: {monotone}")


@pytest.mark.slow
def test_efficiency(report):
    t0 = time.perf_counter()
    rep = bench_pipeline(size=(321, 481), mode="both", repeats=3)
    elapsed = time.perf_counter() - t0
    ok = rep.speedup >= 3.0 and rep.identical and elapsed < 120
    report("sparse vs dense OWT+UCM at 321x481", ok,
           f"speedup {rep.speedup:.2f}x (>= 3x), identical hierarchies {rep.identical}, "
           f"benchmark {elapsed:.1f} s (limit 120 s)")


def test_owt_topology(report):
    rng = np.random.default_rng(108)
    violations = 0
    for _ in range(100):
        h, w = rng.integers(6, 30, 2)
        lab = random_labels(rng, h, w, max_regions=8)
        sb = sparse_from_labels(lab)
        out = owt_reweight(sb, arc_orientations(sb, float(rng.uniform(0, 4))), rng.random((8, h, w)))
        same = out.pairs() == sb.pairs() and all(
            np.array_equal(out.entries[k].coords, sb.entries[k].coords) for k in sb.pairs())
        violations += not same
    report("OWT topology preservation", violations == 0, f"{violations} violations of 100")


def test_fusion_convexity(report):
    rng = np.random.default_rng(109)
    violations = 0
    for _ in range(100):
        h, w = rng.integers(8, 24, 2)
        fine = sparse_from_labels(random_labels(rng, h, w, max_regions=10))
        proj = []
        for _ in range(2):
            lab = random_labels(rng, h, w)
            proj.append(project(build_ucm(random_strengths(sparse_from_labels(lab), rng), lab), fine))
        fused = fuse_strengths(proj, rng.random(2) + 0.01)
        for k, v in fused.items():
            violations += not (min(p[k] for p in proj) <= v <= max(p[k] for p in proj))
    report("fusion convexity", violations == 0, f"{violations} violations over 100 cases")


def test_end_to_end_determinism(report, tmp_path):
    outs = [run_full_pipeline(tmp_path / name) for name in ("a", "b")]
    files = sorted(p.relative_to(outs[0]) for p in outs[0].rglob("*") if p.is_file())
    differ = [str(f) for f in files if (outs[0] / f).read_bytes() != (outs[1] / f).read_bytes()]
    others = sorted(p.relative_to(outs[1]) for p in outs[1].rglob("*") if p.is_file())
    ok = not differ and files == others and len(files) > 0
    report("end-to-end determinism", ok,
           f"{len(files)} output files compared, {len(differ)} differ {differ[:3]}")
