"""Shared fixtures: a deterministic on-disk image pool and a brute-force AP oracle."""

from __future__ import annotations

import numpy as np
import pytest
from PIL import Image

from cfskit.evaluation import RECALL_LEVELS, Detection, GroundTruth
from cfskit.geometry import iou
from cfskit.simulator import ImagePool

# (width, height) per pool image; aspect ratios kept in [0.7, 1.5] so default
# layouts hold a handful of images per band
_POOL_SIZES = [(160, 120), (120, 160), (200, 200), (180, 140), (140, 180), (240, 160)]
_CLASS_NAMES = ["micrograph", "stain", "chart"]


def _pool_image(rng: np.random.Generator, w: int, h: int) -> Image.Image:
    # flat stripes compress well; every value <= 200 so nothing reads as
    # white background to the separator
    arr = np.full((h, w, 3), rng.integers(40, 200, size=3), dtype=np.uint8)
    for _ in range(int(rng.integers(2, 5))):
        y0 = int(rng.integers(0, h - 4))
        band = int(rng.integers(4, max(5, h // 4)))
        arr[y0 : y0 + band] = rng.integers(40, 200, size=3)
    arr[:2] = arr[-2:] = 30
    arr[:, :2] = arr[:, -2:] = 30
    return Image.fromarray(arr)


@pytest.fixture(scope="session")
def classmap_path(tmp_path_factory):
    root = tmp_path_factory.mktemp("pool")
    rng = np.random.default_rng(20240901)
    lines = []
    for cid, name in enumerate(_CLASS_NAMES):
        class_dir = root / name
        class_dir.mkdir()
        for i, (w, h) in enumerate(_POOL_SIZES):
            _pool_image(rng, w, h).save(class_dir / f"{name}_{i}.png")
        lines.append(f"{cid} {name} {name}")
    path = root / "classes.txt"
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture(scope="session")
def pool(classmap_path) -> ImagePool:
    return ImagePool.from_classmap(classmap_path)


# ---------------------------------------------------------------------------
# Independent oracle: per-cutoff re-matching plus a direct 101-point sum.
# Deliberately avoids the evaluator's incremental TP/FP bookkeeping.
# ---------------------------------------------------------------------------


def _oracle_order_key(d: Detection):
    return (-d.confidence, d.image_id, d.box.x1, d.box.y1, d.box.x2, d.box.y2, d.class_id)


def _oracle_match_count(dets: list[Detection], gts: list[GroundTruth], thr: float) -> int:
    """Matched-gt count when the given detections are processed in order."""
    by_image: dict[str, list[Detection]] = {}
    for d in dets:
        by_image.setdefault(d.image_id, []).append(d)
    matched = 0
    for image_id, image_dets in by_image.items():
        gt_boxes = [g.box for g in gts if g.image_id == image_id]
        taken = [False] * len(gt_boxes)
        for det in image_dets:
            best, best_iou = -1, 0.0
            for j, gt_box in enumerate(gt_boxes):
                if taken[j]:
                    continue
                v = iou(det.box, gt_box)
                if v >= thr and v > best_iou:
                    best, best_iou = j, v
            if best >= 0:
                taken[best] = True
                matched += 1
    return matched


def oracle_class_ap(dets: list[Detection], gts: list[GroundTruth], thr: float) -> float:
    """101-point AP for one class by brute force: every confidence cutoff is
    re-matched from scratch and the interpolation maximum is taken directly."""
    total_gt = len(gts)
    if total_gt == 0:
        return 0.0
    ordered = sorted(dets, key=_oracle_order_key)
    points = []
    for k in range(1, len(ordered) + 1):
        tp = _oracle_match_count(ordered[:k], gts, thr)
        points.append((tp / total_gt, tp / k))
    total = 0.0
    for r in RECALL_LEVELS:
        best = 0.0
        for recall, precision in points:
            if recall >= r and precision > best:
                best = precision
        total += best
    return total / 101.0


def oracle_report(
    dets: list[Detection],
    gts: list[GroundTruth],
    thresholds: tuple[float, ...],
) -> dict:
    """Mean APs computed entirely through the brute-force path."""
    class_ids = sorted({g.class_id for g in gts} | {d.class_id for d in dets})
    per_class: dict[int, float | None] = {}
    per_thr: dict[float, list[float]] = {t: [] for t in thresholds}
    for c in class_ids:
        c_gts = [g for g in gts if g.class_id == c]
        if not c_gts:
            per_class[c] = None
            continue
        c_dets = [d for d in dets if d.class_id == c]
        aps = []
        for t in thresholds:
            ap = oracle_class_ap(c_dets, c_gts, t)
            aps.append(ap)
            per_thr[t].append(ap)
        per_class[c] = sum(aps) / len(aps)
    defined = [v for v in per_class.values() if v is not None]
    mean = (sum(defined) / len(defined)) if defined else None
    out = {"ap": mean, "per_class": per_class}
    for t in thresholds:
        vals = per_thr[t]
        out[t] = (sum(vals) / len(vals)) if vals else None
    return out


def random_micro_instance(rng: np.random.Generator, n_classes: int = 2):
    """A small random detection problem: <= 3 images, <= 5 gts and dets each."""
    dets: list[Detection] = []
    gts: list[GroundTruth] = []
    n_images = int(rng.integers(1, 4))
    for i in range(n_images):
        image_id = f"img{i}"
        for _ in range(int(rng.integers(0, 6))):
            gts.append(GroundTruth(image_id, _random_box(rng), int(rng.integers(n_classes))))
        for _ in range(int(rng.integers(0, 6))):
            dets.append(
                Detection(
                    image_id,
                    _random_box(rng),
                    int(rng.integers(n_classes)),
                    float(rng.integers(0, 101)) / 100.0,  # coarse grid forces ties
                )
            )
    return dets, gts


def _random_box(rng: np.random.Generator):
    from cfskit.geometry import BBox

    x1 = float(rng.uniform(0, 80))
    y1 = float(rng.uniform(0, 80))
    return BBox(x1, y1, x1 + float(rng.uniform(1, 60)), y1 + float(rng.uniform(1, 60)))
