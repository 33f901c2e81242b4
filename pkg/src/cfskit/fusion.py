"""Weighted boxes fusion for ensembling detections from several models.

Instead of suppressing overlapping boxes, overlapping detections of the same
image and class are merged: coordinates become the confidence-and-model-weight
weighted mean of the cluster, and the fused confidence is the weight-normalized
mean of member confidences, optionally scaled down when fewer models than the
ensemble size contributed to a cluster.
"""

from __future__ import annotations

from dataclasses import dataclass

from .evaluation import Detection
from .geometry import BBox, iou


@dataclass(frozen=True)
class FusionConfig:
    iou_thr: float = 0.55
    skip_box_thr: float = 0.0
    model_weights: "tuple[float, ...] | None" = None  # None: all 1
    conf_scaling: str = "count"  # "count" | "none"

    def __post_init__(self) -> None:
        if not 0.0 < self.iou_thr < 1.0:
            raise ValueError(f"iou_thr must be in (0, 1), got {self.iou_thr}")
        if self.skip_box_thr < 0.0:
            raise ValueError(f"skip_box_thr must be >= 0, got {self.skip_box_thr}")
        if self.model_weights is not None and any(w <= 0 for w in self.model_weights):
            raise ValueError(f"model weights must be positive, got {self.model_weights}")
        if self.conf_scaling not in ("count", "none"):
            raise ValueError(f"conf_scaling must be 'count' or 'none', got {self.conf_scaling!r}")


class _Cluster:
    __slots__ = ("members", "fused_box")

    def __init__(self, det: Detection, model_weight: float):
        self.members: list[tuple[Detection, float]] = [(det, model_weight)]
        self.fused_box = det.box

    def add(self, det: Detection, model_weight: float) -> None:
        self.members.append((det, model_weight))
        self.fused_box = self._weighted_box()

    def _weighted_box(self) -> BBox:
        total = sum(d.confidence * w for d, w in self.members)
        coords = [0.0, 0.0, 0.0, 0.0]
        for d, w in self.members:
            cw = d.confidence * w
            for k, v in enumerate(d.box.as_tuple()):
                coords[k] += cw * v
        return BBox(*(c / total for c in coords))

    def finalize(self, n_models: int, conf_scaling: str) -> Detection:
        det0 = self.members[0][0]
        weight_sum = sum(w for _, w in self.members)
        conf = sum(d.confidence * w for d, w in self.members) / weight_sum
        if conf_scaling == "count":
            conf *= min(len(self.members), n_models) / n_models
        return Detection(det0.image_id, self._weighted_box(), det0.class_id, conf)


def _order_key(d: Detection):
    return (-d.confidence, d.image_id, d.box.x1, d.box.y1, d.box.x2, d.box.y2, d.class_id)


def fuse(
    per_model_detections: "list[list[Detection]]",
    cfg: FusionConfig = FusionConfig(),
) -> list[Detection]:
    """Fuse the detections of several models into one averaged list.

    Detections are processed in descending confidence; each joins the first
    cluster (same image and class) whose running fused box overlaps it with
    IoU >= cfg.iou_thr, otherwise it seeds a new cluster. The output is sorted
    by fused confidence, descending.
    """
    if not per_model_detections:
        raise ValueError("need at least one model detection list")
    n_models = len(per_model_detections)
    weights = cfg.model_weights or tuple(1.0 for _ in range(n_models))
    if len(weights) != n_models:
        raise ValueError(
            f"model_weights has {len(weights)} entries for {n_models} models"
        )

    groups: dict[tuple[str, int], list[tuple[Detection, float]]] = {}
    for dets, w in zip(per_model_detections, weights):
        for d in dets:
            if d.confidence < cfg.skip_box_thr:
                continue
            groups.setdefault((d.image_id, d.class_id), []).append((d, w))

    fused: list[Detection] = []
    for key in sorted(groups):
        members = sorted(groups[key], key=lambda dw: _order_key(dw[0]))
        clusters: list[_Cluster] = []
        for det, w in members:
            for cluster in clusters:
                if iou(cluster.fused_box, det.box) >= cfg.iou_thr:
                    cluster.add(det, w)
                    break
            else:
                clusters.append(_Cluster(det, w))
        fused.extend(c.finalize(n_models, cfg.conf_scaling) for c in clusters)
    fused.sort(key=_order_key)
    return fused
