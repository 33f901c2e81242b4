"""Rule-based compound-figure separator.

A no-training baseline detector: the background color is estimated as the
mode of the border pixels, content is whatever deviates from it beyond a
tolerance, and regions are split recursively at the widest all-background
band of the row/column projection profiles. Leaves are tightened to their
content bounding box and emitted as fixed-confidence detections of a single
"subfigure" class.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .evaluation import Detection
from .formats import ParseError
from .geometry import BBox

SUBFIGURE_CLASS_ID = 0


@dataclass(frozen=True)
class CutParams:
    background_tolerance: float = 12 / 255  # intensity delta, fraction of full scale
    min_gap: int = 3  # narrowest background band worth cutting at
    min_region: int = 32  # regions smaller than this per side are dropped
    max_depth: int = 6
    confidence: float = 0.9  # fixed score attached to every region

    def __post_init__(self) -> None:
        if not 0.0 < self.background_tolerance < 1.0:
            raise ValueError(
                f"background_tolerance must be in (0, 1), got {self.background_tolerance}"
            )
        for name in ("min_gap", "min_region", "max_depth"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 < self.confidence <= 1.0:
            raise ValueError(f"confidence must be in (0, 1], got {self.confidence}")


def _to_gray(image) -> np.ndarray:
    if isinstance(image, (str, Path)):
        try:
            with Image.open(image) as img:
                return np.asarray(img.convert("L"))
        except (UnidentifiedImageError, OSError) as e:
            raise ParseError(image, None, f"cannot decode image: {e}") from e
    if isinstance(image, Image.Image):
        return np.asarray(image.convert("L"))
    arr = np.asarray(image)
    if arr.ndim == 3:
        return np.asarray(Image.fromarray(arr).convert("L"))
    if arr.ndim != 2:
        raise ValueError(f"expected a 2D or 3D image array, got shape {arr.shape}")
    return arr.astype(np.uint8, copy=False)


def _border_mode(gray: np.ndarray) -> int:
    if gray.shape[0] < 3 or gray.shape[1] < 3:
        border = gray.ravel()
    else:
        border = np.concatenate(
            [gray[0, :], gray[-1, :], gray[1:-1, 0], gray[1:-1, -1]]
        )
    return int(np.bincount(border, minlength=256).argmax())


def _widest_gap(has_content: np.ndarray) -> "tuple[int, int] | None":
    """Widest run of content-free positions strictly between content, as a
    half-open interval; ties prefer the run closest to the span center."""
    idx = np.flatnonzero(has_content)
    if idx.size < 2:
        return None
    widths = np.diff(idx) - 1
    best_w = int(widths.max())
    if best_w <= 0:
        return None
    center = (idx[0] + idx[-1]) / 2.0
    best = None
    for k in np.flatnonzero(widths == best_w):
        start = int(idx[k]) + 1
        end = int(idx[k + 1])
        dist = abs((start + end) / 2.0 - center)
        if best is None or dist < best[0]:
            best = (dist, start, end)
    return best[1], best[2]


def _cut(mask: np.ndarray, x0: int, y0: int, depth: int, params: CutParams, out: list) -> None:
    rows = mask.any(axis=1)
    if not rows.any():
        return
    cols = mask.any(axis=0)
    row_idx = np.flatnonzero(rows)
    col_idx = np.flatnonzero(cols)
    top, bottom = int(row_idx[0]), int(row_idx[-1]) + 1
    left, right = int(col_idx[0]), int(col_idx[-1]) + 1
    view = mask[top:bottom, left:right]

    if depth < params.max_depth:
        h_gap = _widest_gap(rows[top:bottom])  # horizontal background band
        v_gap = _widest_gap(cols[left:right])  # vertical background band
        h_w = (h_gap[1] - h_gap[0]) if h_gap else 0
        v_w = (v_gap[1] - v_gap[0]) if v_gap else 0
        if max(h_w, v_w) >= params.min_gap:
            # the wider band wins; ties cut horizontally first
            if h_w >= v_w:
                s, e = h_gap
                _cut(view[:s, :], x0 + left, y0 + top, depth + 1, params, out)
                _cut(view[e:, :], x0 + left, y0 + top + e, depth + 1, params, out)
            else:
                s, e = v_gap
                _cut(view[:, :s], x0 + left, y0 + top, depth + 1, params, out)
                _cut(view[:, e:], x0 + left + e, y0 + top, depth + 1, params, out)
            return
    out.append((x0 + left, y0 + top, x0 + right, y0 + bottom))


def separate(image, params: CutParams = CutParams(), image_id: str = "image") -> list[Detection]:
    """Detect subfigure regions in one image.

    `image` may be a path, a PIL image, or a numpy array. Detections carry the
    fixed confidence from `params` and the single subfigure class; they are
    pairwise non-overlapping and lie within the image bounds.
    """
    gray = _to_gray(image)
    if gray.size == 0:
        return []
    background = _border_mode(gray)
    tolerance = params.background_tolerance * 255.0
    content = np.abs(gray.astype(np.int16) - background) > tolerance
    regions: list[tuple[int, int, int, int]] = []
    _cut(content, 0, 0, 0, params, regions)
    detections = []
    for x1, y1, x2, y2 in sorted(regions, key=lambda r: (r[1], r[0])):
        if x2 - x1 < params.min_region or y2 - y1 < params.min_region:
            continue
        detections.append(
            Detection(
                image_id,
                BBox(float(x1), float(y1), float(x2), float(y2)),
                SUBFIGURE_CLASS_ID,
                params.confidence,
            )
        )
    return detections


def extract_crops(
    image,
    detections: "list[Detection]",
    confidence_threshold: float,
    out_dir: "Path | str",
) -> list[Path]:
    """Write one crop per detection at or above the confidence threshold.

    Filenames encode image id, detection index, class, and confidence:
    `{image_id}_{index:03d}_c{class}_{confidence:.2f}.png`.
    """
    if isinstance(image, (str, Path)):
        try:
            img = Image.open(image)
            img.load()
        except (UnidentifiedImageError, OSError) as e:
            raise ParseError(image, None, f"cannot decode image: {e}") from e
    elif isinstance(image, Image.Image):
        img = image
    else:
        img = Image.fromarray(np.asarray(image))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for i, det in enumerate(detections):
        if det.confidence < confidence_threshold:
            continue
        b = det.box
        crop = img.crop((round(b.x1), round(b.y1), round(b.x2), round(b.y2)))
        path = out / f"{det.image_id}_{i:03d}_c{det.class_id}_{det.confidence:.2f}.png"
        crop.save(path)
        written.append(path)
    return written
