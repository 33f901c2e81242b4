"""COCO-style detection evaluation.

Detections are matched to ground truths greedily in descending confidence,
one-to-one, within the same image and class. Average precision is the area
under the 101-point interpolated precision-recall curve; the headline AP
averages per-class AP over IoU thresholds 0.50:0.05:0.95 and then over
classes (classes without any ground truth are excluded from means, not
counted as zero). Size buckets restrict ground truths by absolute pixel
area; detections matched to an out-of-bucket ground truth are dropped, and
unmatched detections count as false positives only in buckets their own area
qualifies for.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .formats import ParseError, parse_yolo_file, yolo_to_bbox
from .geometry import BBox, iou

IOU_THRESHOLDS: tuple[float, ...] = tuple(round(0.50 + 0.05 * i, 2) for i in range(10))
RECALL_LEVELS: tuple[float, ...] = tuple(i / 100 for i in range(101))

# ground-truth area buckets, absolute pixels of the evaluated image
SMALL_MAX_AREA = 32.0**2
MEDIUM_MAX_AREA = 96.0**2
_BUCKETS: tuple[tuple[str, float, float], ...] = (
    ("small", 0.0, SMALL_MAX_AREA),
    ("medium", SMALL_MAX_AREA, MEDIUM_MAX_AREA),
    ("large", MEDIUM_MAX_AREA, math.inf),
)

_IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


@dataclass(frozen=True)
class Detection:
    """One detector output: class-tagged box with a confidence score."""

    image_id: str
    box: BBox
    class_id: int
    confidence: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")
        if self.class_id < 0:
            raise ValueError(f"negative class id {self.class_id}")


@dataclass(frozen=True)
class GroundTruth:
    """One annotated box."""

    image_id: str
    box: BBox
    class_id: int

    def __post_init__(self) -> None:
        if self.class_id < 0:
            raise ValueError(f"negative class id {self.class_id}")


def _det_order_key(d: Detection):
    # canonical global ordering: confidence desc, then a full-record tiebreak
    # so equal-confidence inputs evaluate identically under any input shuffle
    return (-d.confidence, d.image_id, d.box.x1, d.box.y1, d.box.x2, d.box.y2, d.class_id)


def match_indices(
    detections: "list[Detection]",
    ground_truths: "list[GroundTruth]",
    iou_thr: float,
) -> list[tuple[int, "int | None"]]:
    """Greedy one-to-one matching for one image/class group.

    Returns (detection_index, matched_gt_index_or_None) pairs in canonical
    confidence order. Each detection takes the unmatched ground truth with
    the highest IoU >= iou_thr; IoU ties break toward the lower gt index.
    """
    if not 0.0 < iou_thr <= 1.0:
        raise ValueError(f"iou threshold {iou_thr} outside (0, 1]")
    order = sorted(range(len(detections)), key=lambda i: _det_order_key(detections[i]))
    taken = [False] * len(ground_truths)
    out: list[tuple[int, int | None]] = []
    for i in order:
        det = detections[i]
        best_j = -1
        best_iou = 0.0
        for j, gt in enumerate(ground_truths):
            if taken[j]:
                continue
            v = iou(det.box, gt.box)
            if v >= iou_thr and v > best_iou:
                best_iou = v
                best_j = j
        if best_j >= 0:
            taken[best_j] = True
            out.append((i, best_j))
        else:
            out.append((i, None))
    return out


def match(
    detections: "list[Detection]",
    ground_truths: "list[GroundTruth]",
    iou_thr: float,
) -> tuple[list[tuple[Detection, bool]], int]:
    """Greedy matching returning (detection, is_true_positive) pairs plus the
    number of ground truths left unmatched."""
    pairs = match_indices(detections, ground_truths, iou_thr)
    labeled = [(detections[i], j is not None) for i, j in pairs]
    matched = sum(1 for _, j in pairs if j is not None)
    return labeled, len(ground_truths) - matched


def interpolated_ap(tp_flags, total_gt: int) -> float:
    """Area under the 101-point interpolated precision-recall curve.

    `tp_flags` must be ordered by descending confidence. Returns 0.0 when
    there is no ground truth, whether or not detections exist.
    """
    if total_gt <= 0:
        return 0.0
    flags = np.asarray(list(tp_flags), dtype=bool)
    if flags.size == 0:
        return 0.0
    tp = np.cumsum(flags)
    precision = tp / np.arange(1, flags.size + 1)
    recall = tp / total_gt
    total = 0.0
    for r in RECALL_LEVELS:
        reachable = precision[recall >= r]
        if reachable.size:
            total += float(reachable.max())
    return total / 101.0


@dataclass
class EvalReport:
    """Evaluation summary; None marks values with no ground truth to define them."""

    ap: "float | None"
    ap50: "float | None"
    ap75: "float | None"
    ap_small: "float | None"
    ap_medium: "float | None"
    ap_large: "float | None"
    per_class: dict[int, "float | None"]
    skipped_classes: tuple[int, ...]
    notes: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "ap": self.ap,
            "ap50": self.ap50,
            "ap75": self.ap75,
            "ap_small": self.ap_small,
            "ap_medium": self.ap_medium,
            "ap_large": self.ap_large,
            "per_class": {str(k): v for k, v in sorted(self.per_class.items())},
            "skipped_classes": list(self.skipped_classes),
            "notes": list(self.notes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def table(self, class_names: "dict[int, str] | None" = None) -> str:
        def cell(v):
            return "undefined" if v is None else f"{v:.4f}"

        rows = [
            ("AP @[0.50:0.95]", self.ap),
            ("AP50", self.ap50),
            ("AP75", self.ap75),
            ("AP small", self.ap_small),
            ("AP medium", self.ap_medium),
        ]
        if self.ap_large is not None:
            rows.append(("AP large", self.ap_large))
        lines = ["metric            value", "-----------------------"]
        for name, v in rows:
            lines.append(f"{name:<17} {cell(v)}")
        if self.per_class:
            lines.append("")
            lines.append("per-class AP @[0.50:0.95]")
            for cid in sorted(self.per_class):
                label = class_names.get(cid, str(cid)) if class_names else str(cid)
                lines.append(f"  class {label:<12} {cell(self.per_class[cid])}")
        for note in self.notes:
            lines.append(f"note: {note}")
        return "\n".join(lines) + "\n"


def _mean(values: list[float]) -> "float | None":
    if not values:
        return None
    return float(sum(values) / len(values))


def evaluate(
    detections: "list[Detection]",
    ground_truths: "list[GroundTruth]",
    iou_thresholds: tuple[float, ...] = IOU_THRESHOLDS,
    size_buckets: bool = True,
) -> EvalReport:
    """Full evaluation of detections against ground truths.

    Per class and IoU threshold, detections from all images are pooled into
    one confidence-ordered PR curve. The report's AP fields average over
    thresholds first, then over classes with at least one ground truth.
    """
    notes: list[str] = []
    class_ids = sorted({g.class_id for g in ground_truths} | {d.class_id for d in detections})

    gts_by_class: dict[int, dict[str, list[GroundTruth]]] = {c: {} for c in class_ids}
    dets_by_class: dict[int, dict[str, list[Detection]]] = {c: {} for c in class_ids}
    for g in ground_truths:
        gts_by_class[g.class_id].setdefault(g.image_id, []).append(g)
    for d in detections:
        dets_by_class[d.class_id].setdefault(d.image_id, []).append(d)

    skipped = tuple(c for c in class_ids if not gts_by_class[c])
    if skipped:
        notes.append(
            "classes with no ground truth excluded from means: "
            + ", ".join(str(c) for c in skipped)
        )

    per_class: dict[int, float | None] = {c: None for c in class_ids}
    per_class_at: dict[float, list[float]] = {t: [] for t in iou_thresholds}
    bucket_per_class: dict[str, list[float]] = {name: [] for name, _, _ in _BUCKETS}
    any_large_gt = any(g.box.area >= MEDIUM_MAX_AREA for g in ground_truths)

    for c in class_ids:
        gt_images = gts_by_class[c]
        total_gt = sum(len(v) for v in gt_images.values())
        if total_gt == 0:
            continue
        class_aps: list[float] = []
        bucket_aps: dict[str, list[float]] = {name: [] for name, _, _ in _BUCKETS}
        bucket_gt_counts = {
            name: sum(
                1 for v in gt_images.values() for g in v if lo <= g.box.area < hi
            )
            for name, lo, hi in _BUCKETS
        }
        for thr in iou_thresholds:
            # one match pass over every image; bucket views reuse its results
            entries = []  # (order_key, is_tp, det_area, matched_gt_area_or_None)
            image_ids = set(gt_images) | set(dets_by_class[c])
            for img in image_ids:
                dets = dets_by_class[c].get(img, [])
                gts = gt_images.get(img, [])
                for i, j in match_indices(dets, gts, thr):
                    det = dets[i]
                    gt_area = gts[j].box.area if j is not None else None
                    entries.append((_det_order_key(det), j is not None, det.box.area, gt_area))
            entries.sort(key=lambda e: e[0])
            flags = [e[1] for e in entries]
            class_aps.append(interpolated_ap(flags, total_gt))
            per_class_at[thr].append(class_aps[-1])
            if size_buckets:
                for name, lo, hi in _BUCKETS:
                    if bucket_gt_counts[name] == 0:
                        continue
                    bflags = []
                    for _, is_tp, det_area, gt_area in entries:
                        if is_tp:
                            if lo <= gt_area < hi:
                                bflags.append(True)
                            # matched outside the bucket: restricted away
                        elif lo <= det_area < hi:
                            bflags.append(False)
                    bucket_aps[name].append(
                        interpolated_ap(bflags, bucket_gt_counts[name])
                    )
        per_class[c] = _mean(class_aps)
        if size_buckets:
            for name, _, _ in _BUCKETS:
                v = _mean(bucket_aps[name])
                if v is not None:
                    bucket_per_class[name].append(v)

    defined = [v for v in per_class.values() if v is not None]
    ap = _mean(defined)
    ap50 = _mean(per_class_at.get(0.50, []))
    ap75 = _mean(per_class_at.get(0.75, []))
    if ap is None:
        notes.append("no ground truth anywhere: all metrics undefined")

    ap_small = ap_medium = ap_large = None
    if size_buckets and ap is not None:
        ap_small = _mean(bucket_per_class["small"])
        ap_medium = _mean(bucket_per_class["medium"])
        large = _mean(bucket_per_class["large"])
        if ap_small is None:
            notes.append("no small ground truths: AP small undefined")
        if ap_medium is None:
            notes.append("no medium ground truths: AP medium undefined")
        # AP large is reported only when large ground truths exist
        ap_large = large if any_large_gt else None

    return EvalReport(
        ap=ap,
        ap50=ap50,
        ap75=ap75,
        ap_small=ap_small,
        ap_medium=ap_medium,
        ap_large=ap_large,
        per_class=per_class,
        skipped_classes=skipped,
        notes=tuple(notes),
    )


def save_detections(detections: "list[Detection]", path: "Path | str") -> None:
    """Write detections as a JSON array of absolute-pixel records."""
    records = [
        {
            "image_id": d.image_id,
            "class_id": d.class_id,
            "x1": d.box.x1,
            "y1": d.box.y1,
            "x2": d.box.x2,
            "y2": d.box.y2,
            "confidence": d.confidence,
        }
        for d in detections
    ]
    Path(path).write_text(json.dumps(records, indent=2) + "\n")


def _record_box(rec: dict, path, index: int) -> BBox:
    try:
        return BBox(float(rec["x1"]), float(rec["y1"]), float(rec["x2"]), float(rec["y2"]))
    except (KeyError, TypeError, ValueError) as e:
        raise ParseError(path, index, f"bad box: {e}") from e


def load_detections(path: "Path | str") -> list[Detection]:
    """Read a detection-results JSON file; empty files yield an empty list."""
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ParseError(path, None, f"cannot read detections: {e}") from e
    if not text.strip():
        return []
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(path, e.lineno, f"invalid JSON: {e.msg}") from e
    if not isinstance(data, list):
        raise ParseError(path, None, "expected a JSON array of detection records")
    out = []
    for i, rec in enumerate(data):
        if not isinstance(rec, dict):
            raise ParseError(path, i, "detection record must be an object")
        box = _record_box(rec, path, i)
        try:
            out.append(
                Detection(
                    image_id=str(rec["image_id"]),
                    box=box,
                    class_id=int(rec["class_id"]),
                    confidence=float(rec["confidence"]),
                )
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ParseError(path, i, f"bad detection record: {e}") from e
    return out


def load_groundtruth(source: "Path | str") -> list[GroundTruth]:
    """Read ground truths from a dataset directory (images/ + labels/) or a
    JSON file mirroring the detection schema without confidence."""
    p = Path(source)
    if p.is_dir():
        return _load_groundtruth_dataset(p)
    return _load_groundtruth_json(p)


def _load_groundtruth_json(path: Path) -> list[GroundTruth]:
    try:
        text = path.read_text()
    except OSError as e:
        raise ParseError(path, None, f"cannot read ground truth: {e}") from e
    if not text.strip():
        return []
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(path, e.lineno, f"invalid JSON: {e.msg}") from e
    if not isinstance(data, list):
        raise ParseError(path, None, "expected a JSON array of ground-truth records")
    out = []
    for i, rec in enumerate(data):
        if not isinstance(rec, dict):
            raise ParseError(path, i, "ground-truth record must be an object")
        box = _record_box(rec, path, i)
        try:
            out.append(
                GroundTruth(
                    image_id=str(rec["image_id"]),
                    box=box,
                    class_id=int(rec["class_id"]),
                )
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ParseError(path, i, f"bad ground-truth record: {e}") from e
    return out


def save_groundtruth(ground_truths: "list[GroundTruth]", path: "Path | str") -> None:
    records = [
        {
            "image_id": g.image_id,
            "class_id": g.class_id,
            "x1": g.box.x1,
            "y1": g.box.y1,
            "x2": g.box.x2,
            "y2": g.box.y2,
        }
        for g in ground_truths
    ]
    Path(path).write_text(json.dumps(records, indent=2) + "\n")


def _image_dimensions(images_dir: Path, stem: str) -> tuple[int, int]:
    from PIL import Image

    for suffix in _IMAGE_SUFFIXES:
        candidate = images_dir / (stem + suffix)
        if candidate.exists():
            with Image.open(candidate) as img:
                return img.size
    raise ParseError(images_dir / stem, None, "no image found for label file")


def _load_groundtruth_dataset(root: Path) -> list[GroundTruth]:
    labels_dir = root / "labels"
    images_dir = root / "images"
    if not labels_dir.is_dir():
        raise ParseError(root, None, "dataset directory has no labels/ subdirectory")
    out: list[GroundTruth] = []
    for label_path in sorted(labels_dir.glob("*.txt")):
        stem = label_path.stem
        img_w, img_h = _image_dimensions(images_dir, stem)
        for class_id, cx, cy, w, h in parse_yolo_file(label_path):
            out.append(GroundTruth(stem, yolo_to_bbox(cx, cy, w, h, img_w, img_h), class_id))
    return out
