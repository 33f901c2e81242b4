"""Side loss reference implementation.

The side loss sums, over the four sides of a predicted box, how far that side
overshoots the matching ground-truth side. A prediction contained in its
ground truth scores zero, so the loss penalizes over-detection only — the
opposite preference of IoU-style losses, which favor the larger of two boxes
with equal margins. Values are computed in absolute pixel coordinates of the
input image; normalization is left to the consumer.

Also provides the four-term detector loss weighting derived from the usual
(box, obj, cls) gains, layer count, and image size, with the side-loss weight
pinned to lambda1/30.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .geometry import BBox

Vec4 = tuple[float, float, float, float]


@dataclass(frozen=True)
class SidePenalties:
    """Per-side overshoot of a prediction beyond its ground truth, each >= 0.

    All four components are zero exactly when the predicted box is contained
    in the ground-truth box.
    """

    x1: float
    y1: float
    x2: float
    y2: float

    def as_tuple(self) -> Vec4:
        return (self.x1, self.y1, self.x2, self.y2)

    def total(self) -> float:
        return self.x1 + self.y1 + self.x2 + self.y2


def side_penalties(pred: BBox, gt: BBox) -> SidePenalties:
    """Overshoot of each predicted side past the corresponding ground-truth side."""
    return SidePenalties(
        max(0.0, gt.x1 - pred.x1),
        max(0.0, gt.y1 - pred.y1),
        max(0.0, pred.x2 - gt.x2),
        max(0.0, pred.y2 - gt.y2),
    )


def side_loss(pred: BBox, gt: BBox) -> float:
    """Sum of the four per-side overshoot penalties, in pixels."""
    return side_penalties(pred, gt).total()


def side_loss_subgradient(pred: BBox, gt: BBox) -> Vec4:
    """d(side_loss)/d(pred x1, y1, x2, y2).

    A component is -1 (x1, y1) or +1 (x2, y2) where its hinge is strictly
    active, and 0 elsewhere — including exactly at the kinks, matching the
    usual max(0, .) convention of autodiff frameworks.
    """
    return (
        -1.0 if gt.x1 - pred.x1 > 0.0 else 0.0,
        -1.0 if gt.y1 - pred.y1 > 0.0 else 0.0,
        1.0 if pred.x2 - gt.x2 > 0.0 else 0.0,
        1.0 if pred.y2 - gt.y2 > 0.0 else 0.0,
    )


def finite_difference_subgradient(pred: BBox, gt: BBox, step: float = 1e-3) -> Vec4:
    """Central-difference estimate of the subgradient, for porting checks.

    Only meaningful away from the hinge kinks (every |penalty argument|
    comfortably larger than `step`).
    """
    coords = list(pred.as_tuple())
    out = []
    for i in range(4):
        lo = coords.copy()
        hi = coords.copy()
        lo[i] -= step
        hi[i] += step
        # perturbed corners may transiently violate x1 <= x2; the loss formula
        # itself needs no ordering, so evaluate it on raw coordinates
        out.append((_raw_side_loss(hi, gt) - _raw_side_loss(lo, gt)) / (2.0 * step))
    return tuple(out)  # type: ignore[return-value]


def _raw_side_loss(pred_coords: Sequence[float], gt: BBox) -> float:
    x1, y1, x2, y2 = pred_coords
    return (
        max(0.0, gt.x1 - x1)
        + max(0.0, gt.y1 - y1)
        + max(0.0, x2 - gt.x2)
        + max(0.0, y2 - gt.y2)
    )


def mean_side_loss(pairs: Iterable[tuple[BBox, BBox]]) -> float:
    """Side loss aggregated over matched (pred, gt) pairs: mean, 0.0 if empty."""
    losses = [side_loss(p, g) for p, g in pairs]
    if not losses:
        return 0.0
    return sum(losses) / len(losses)


@dataclass(frozen=True, kw_only=True)
class LossHyperparams:
    """Inputs of the loss weighting: per-term gains, layer count, image size."""

    box: float = 0.5
    obj: float = 1.0
    cls: float = 0.5
    nl: int = 3
    imgsize: float = 640.0
    num_cls: int

    def __post_init__(self) -> None:
        for name in ("box", "obj", "cls", "imgsize", "num_cls"):
            if getattr(self, name) <= 0:
                raise ValueError(f"hyperparameter {name} must be positive")
        if self.nl < 1:
            raise ValueError(f"layer count nl must be >= 1, got {self.nl}")


@dataclass(frozen=True)
class LossWeights:
    """The four balance weights of the total detection loss."""

    lambda1: float
    lambda2: float
    lambda3: float
    lambda4: float

    def __post_init__(self) -> None:
        for name in ("lambda1", "lambda2", "lambda3", "lambda4"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.lambda4 != self.lambda1 / 30.0:
            raise ValueError("lambda4 must equal lambda1/30 exactly")

    def as_tuple(self) -> Vec4:
        return (self.lambda1, self.lambda2, self.lambda3, self.lambda4)


def loss_weights(h: LossHyperparams) -> LossWeights:
    """Derive (lambda1..lambda4) from the hyperparameters.

    lambda1 = box * (3/nl)
    lambda2 = obj * (imgsize/640)^2 * (3/nl)
    lambda3 = cls * (num_cls/80) * (3/nl)
    lambda4 = lambda1 / 30

    The /80 in lambda3 is kept verbatim regardless of num_cls.
    """
    scale = 3.0 / h.nl
    lambda1 = h.box * scale
    lambda2 = h.obj * ((h.imgsize / 640.0) ** 2 * scale)
    lambda3 = (h.cls * h.num_cls / 80.0) * scale
    return LossWeights(lambda1, lambda2, lambda3, lambda1 / 30.0)


def total_loss(
    box_loss: float,
    obj_loss: float,
    cls_loss: float,
    side_loss_val: float,
    w: LossWeights,
) -> float:
    """Weighted sum of the four loss terms; rejects non-finite inputs."""
    parts = (box_loss, obj_loss, cls_loss, side_loss_val)
    if not all(math.isfinite(v) for v in parts):
        raise ValueError(f"loss components must be finite, got {parts}")
    return (
        w.lambda1 * box_loss
        + w.lambda2 * obj_loss
        + w.lambda3 * cls_loss
        + w.lambda4 * side_loss_val
    )


def _fmt(v: float) -> str:
    s = f"{v:.7f}".rstrip("0")
    return s + "0" if s.endswith(".") else s


def _fmt4(values: Iterable[float]) -> str:
    return "(" + ", ".join(_fmt(v) for v in values) + ")"


def reference_report(num_cls: int = 4) -> str:
    """Deterministic text table of reference values for cross-framework ports.

    Covers the worked loss/subgradient examples, the grow/shrink asymmetry
    family, the weight table for a few hyperparameter rows, and a
    finite-difference check of the analytic subgradient.
    """
    from .geometry import expand, shrink

    lines = []
    lines.append("side loss reference values")
    lines.append("==========================")
    lines.append("")
    lines.append("worked examples (pred, gt -> penalties | loss | subgradient):")
    cases = [
        (BBox(10, 10, 50, 50), BBox(20, 20, 40, 40)),
        (BBox(25, 25, 35, 35), BBox(20, 20, 40, 40)),
        (BBox(15, 20, 45, 40), BBox(20, 20, 40, 40)),
        (BBox(20, 20, 40, 40), BBox(20, 20, 40, 40)),
    ]
    for pred, gt in cases:
        pen = side_penalties(pred, gt)
        grad = side_loss_subgradient(pred, gt)
        lines.append(
            f"  pred={_fmt4(pred.as_tuple())} gt={_fmt4(gt.as_tuple())}"
            f" -> penalties={_fmt4(pen.as_tuple())}"
            f" | loss={_fmt(pen.total())}"
            f" | subgrad={_fmt4(grad)}"
        )
    lines.append("")
    lines.append("symmetric-margin family, gt=(20, 20, 40, 40):")
    gt = BBox(20, 20, 40, 40)
    for d in (1.0, 2.0, 5.0):
        lines.append(
            f"  d={_fmt(d)}: loss(expanded)={_fmt(side_loss(expand(gt, d), gt))}"
            f" loss(shrunk)={_fmt(side_loss(shrink(gt, d), gt))}"
        )
    lines.append("")
    lines.append("weight table (box obj cls nl imgsize num_cls -> l1 l2 l3 l4):")
    rows = [
        LossHyperparams(num_cls=num_cls),
        LossHyperparams(nl=6, num_cls=80),
        LossHyperparams(imgsize=1280.0, num_cls=num_cls),
    ]
    for h in rows:
        w = loss_weights(h)
        lines.append(
            f"  {_fmt(h.box)} {_fmt(h.obj)} {_fmt(h.cls)} {h.nl} {_fmt(h.imgsize)} {h.num_cls}"
            f" -> {_fmt(w.lambda1)} {_fmt(w.lambda2)} {_fmt(w.lambda3)} {_fmt(w.lambda4)}"
        )
    lines.append("")
    pairs = [
        (BBox(8.0, 4.0, 52.0, 61.0), BBox(20.0, 20.0, 40.0, 40.0)),
        (BBox(23.0, 26.0, 37.0, 33.0), BBox(20.0, 20.0, 40.0, 40.0)),
        (BBox(11.5, 27.0, 49.25, 35.0), BBox(20.0, 20.0, 40.0, 40.0)),
    ]
    worst = 0.0
    for pred, gt in pairs:
        fd = finite_difference_subgradient(pred, gt)
        an = side_loss_subgradient(pred, gt)
        worst = max(worst, max(abs(a - b) for a, b in zip(fd, an)))
    lines.append(
        f"finite-difference check (step 1e-3, {len(pairs)} off-kink pairs): "
        f"max |analytic - central| = {_fmt(worst)} (tolerance 1e-6)"
    )
    lines.append("")
    return "\n".join(lines)
