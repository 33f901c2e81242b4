"""Axis-aligned box primitives, IoU, and the seeded RNG contract shared by all modules."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in absolute pixel corner coordinates, origin top-left.

    Corner ordering (x1 <= x2, y1 <= y2) is enforced at construction.
    Zero-area boxes are valid values; they have IoU 0 against everything.
    """

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self) -> None:
        if not (self.x1 <= self.x2 and self.y1 <= self.y2):
            raise ValueError(
                f"invalid box corners ({self.x1}, {self.y1}, {self.x2}, {self.y2}): "
                "require x1 <= x2 and y1 <= y2"
            )

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return self.width * self.height

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x1, self.y1, self.x2, self.y2)

    def translate(self, dx: float, dy: float) -> "BBox":
        return BBox(self.x1 + dx, self.y1 + dy, self.x2 + dx, self.y2 + dy)

    def scale(self, s: float) -> "BBox":
        if s <= 0:
            raise ValueError(f"scale factor must be positive, got {s}")
        return BBox(self.x1 * s, self.y1 * s, self.x2 * s, self.y2 * s)

    def intersection_area(self, other: "BBox") -> float:
        iw = min(self.x2, other.x2) - max(self.x1, other.x1)
        ih = min(self.y2, other.y2) - max(self.y1, other.y1)
        if iw <= 0.0 or ih <= 0.0:
            return 0.0
        return iw * ih

    def contains(self, other: "BBox") -> bool:
        return (
            self.x1 <= other.x1
            and self.y1 <= other.y1
            and other.x2 <= self.x2
            and other.y2 <= self.y2
        )


@dataclass(frozen=True)
class ClassLabel:
    """Dense non-negative class id plus a human-readable name."""

    id: int
    name: str

    def __post_init__(self) -> None:
        if self.id < 0:
            raise ValueError(f"class id must be non-negative, got {self.id}")
        if not self.name:
            raise ValueError("class name must be non-empty")


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union of two boxes; 0.0 when the union has zero area."""
    inter = a.intersection_area(b)
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def expand(box: BBox, d: float) -> BBox:
    """Move every side of `box` outward by `d` pixels."""
    return BBox(box.x1 - d, box.y1 - d, box.x2 + d, box.y2 + d)


def shrink(box: BBox, d: float) -> BBox:
    """Move every side of `box` inward by `d` pixels; `d` must leave a valid box."""
    if d >= min(box.width, box.height) / 2.0:
        raise ValueError(
            f"shrinking by {d} would collapse a {box.width}x{box.height} box"
        )
    return BBox(box.x1 + d, box.y1 + d, box.x2 - d, box.y2 - d)


@dataclass(frozen=True)
class RngHandle:
    """Deterministic random stream root.

    Equal seeds produce equal draw sequences within one build of the toolkit.
    `substream(i)` derives an independent stream from (seed, i), so per-figure
    work can run in any order (or in parallel) without changing results.
    """

    seed: int
    path: tuple[int, ...] = ()

    def generator(self) -> np.random.Generator:
        """A fresh generator positioned at the start of this handle's stream."""
        return np.random.default_rng(
            np.random.SeedSequence(self.seed, spawn_key=self.path)
        )

    def substream(self, index: int) -> "RngHandle":
        return RngHandle(self.seed, self.path + (int(index),))


def as_generator(rng: "RngHandle | np.random.Generator") -> np.random.Generator:
    """Accept either a handle (fresh stream) or an already-running generator."""
    if isinstance(rng, RngHandle):
        return rng.generator()
    return rng
