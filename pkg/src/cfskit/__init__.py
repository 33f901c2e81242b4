"""cfskit: compound-figure dataset engineering.

Simulate annotated pseudo compound figures from single-image pools, separate
compound figures with a rule-based baseline, evaluate detector output with
COCO-style interpolated mAP, fuse multi-model detections, and check side-loss
reference values — the whole simulate -> separate -> evaluate loop runs
without any neural network.
"""

from .evaluation import (
    Detection,
    EvalReport,
    GroundTruth,
    evaluate,
    interpolated_ap,
    load_detections,
    load_groundtruth,
    match,
    save_detections,
    save_groundtruth,
)
from .fusion import FusionConfig, fuse
from .geometry import BBox, ClassLabel, RngHandle, expand, iou, shrink
from .separator import CutParams, extract_crops, separate
from .side_loss import (
    LossHyperparams,
    LossWeights,
    SidePenalties,
    loss_weights,
    side_loss,
    side_loss_subgradient,
    side_penalties,
    total_loss,
)
from .simulator import (
    ComposedFigure,
    ImagePool,
    LayoutSpec,
    Placement,
    PoolEntry,
    SimConfig,
    compose,
    fill_layout,
    generate_dataset,
    sample_layout,
)

__version__ = "0.1.0"

__all__ = [
    "BBox",
    "ClassLabel",
    "ComposedFigure",
    "CutParams",
    "Detection",
    "EvalReport",
    "FusionConfig",
    "GroundTruth",
    "ImagePool",
    "LayoutSpec",
    "LossHyperparams",
    "LossWeights",
    "Placement",
    "PoolEntry",
    "RngHandle",
    "SidePenalties",
    "SimConfig",
    "compose",
    "evaluate",
    "expand",
    "extract_crops",
    "fill_layout",
    "fuse",
    "generate_dataset",
    "interpolated_ap",
    "iou",
    "load_detections",
    "load_groundtruth",
    "loss_weights",
    "match",
    "sample_layout",
    "save_detections",
    "save_groundtruth",
    "separate",
    "shrink",
    "side_loss",
    "side_loss_subgradient",
    "side_penalties",
    "total_loss",
]
