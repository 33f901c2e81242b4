"""Pseudo compound-figure simulator.

Builds annotated training figures from pools of single images: samples a
row- or column-restricted band layout under an aspect-ratio constraint,
fills each band with pool images rescaled to preserve their native aspect
ratio, renders everything onto a background canvas, and emits YOLO-format
labels plus a manifest. Subfigures never overlap; a configurable gutter of
background pixels separates neighbors (0 reproduces the hard case of
boundaries that are not visible at all).

A slice of each run can be generated in intra-class mode, where every
subfigure of a figure is drawn from a single class, mimicking compound
figures whose panels look alike.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from PIL import Image, ImageColor

from .formats import bbox_to_yolo, format_yolo_line, parse_classmap
from .geometry import BBox, ClassLabel, RngHandle, as_generator

BASE_EXTENT = 640  # fixed canvas extent along the non-stacking axis
ASPECT_MIN = 3.0 / 4.0
ASPECT_MAX = 4.0 / 3.0
_EPS = 1e-9

_POOL_SUFFIXES = (".png", ".jpg", ".jpeg")


class LayoutError(RuntimeError):
    """Layout sampling could not satisfy its constraints."""


class PoolError(RuntimeError):
    """The image pool cannot serve the requested fill."""


@dataclass(frozen=True)
class PoolEntry:
    """One source image: a file path or an in-memory image, plus native size."""

    source: "Path | Image.Image"
    width: int
    height: int
    label: ClassLabel

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"pool entry needs positive dimensions, got {self.width}x{self.height}")

    @property
    def aspect(self) -> float:
        return self.width / self.height


@lru_cache(maxsize=128)
def _load_path(path: str) -> Image.Image:
    with Image.open(path) as img:
        return img.convert("RGB")


def _load_entry(entry: PoolEntry) -> Image.Image:
    if isinstance(entry.source, Image.Image):
        return entry.source
    return _load_path(str(entry.source))


@dataclass(frozen=True)
class ImagePool:
    """A set of candidate source images, optionally restricted to one class."""

    entries: tuple[PoolEntry, ...]
    intra_class: "ClassLabel | None" = None

    def __post_init__(self) -> None:
        if self.intra_class is not None:
            bad = [e for e in self.entries if e.label != self.intra_class]
            if bad:
                raise ValueError(
                    f"intra-class pool for {self.intra_class.name!r} contains "
                    f"{len(bad)} entries of other classes"
                )

    @property
    def mode(self) -> str:
        return "multi" if self.intra_class is None else "intra"

    def classes(self) -> list[ClassLabel]:
        seen: dict[int, ClassLabel] = {}
        for e in self.entries:
            seen.setdefault(e.label.id, e.label)
        return [seen[k] for k in sorted(seen)]

    def restrict(self, label: ClassLabel) -> "ImagePool":
        subset = tuple(e for e in self.entries if e.label == label)
        if not subset:
            raise PoolError(f"pool has no images of class {label.name!r}")
        return ImagePool(subset, intra_class=label)

    @classmethod
    def from_classmap(cls, classmap_path: "Path | str") -> "ImagePool":
        """Build a multi-class pool from a class-map file (`id name dir` lines)."""
        entries: list[PoolEntry] = []
        for label, directory in parse_classmap(classmap_path):
            if not directory.is_dir():
                raise PoolError(f"pool directory {directory} for class {label.name!r} not found")
            files = sorted(
                p for p in directory.iterdir() if p.suffix.lower() in _POOL_SUFFIXES
            )
            for p in files:
                with Image.open(p) as img:
                    w, h = img.size
                entries.append(PoolEntry(p, w, h, label))
        if not entries:
            raise PoolError(f"class map {classmap_path} produced an empty pool")
        return cls(tuple(entries))


@dataclass(frozen=True)
class LayoutSpec:
    """A sampled grid plan: stacked horizontal rows or vertical columns.

    Row-restricted layouts fix the canvas width at 640 and stack `bands` row
    heights; column-restricted layouts transpose that. Band extents are whole
    pixels so the rendered canvas matches the sampled plan exactly.
    """

    orientation: str  # "row" | "column"
    bands: tuple[int, ...]
    canvas_w: int
    canvas_h: int

    def __post_init__(self) -> None:
        if self.orientation not in ("row", "column"):
            raise ValueError(f"orientation must be 'row' or 'column', got {self.orientation!r}")
        if not 2 <= len(self.bands) <= 5:
            raise ValueError(f"band count must be in [2, 5], got {len(self.bands)}")
        if any(b <= 0 for b in self.bands):
            raise ValueError(f"band extents must be positive, got {self.bands}")
        total = sum(self.bands)
        if self.orientation == "row":
            if self.canvas_w != BASE_EXTENT or self.canvas_h != total:
                raise ValueError("row layout requires canvas_w=640 and canvas_h=sum(bands)")
        else:
            if self.canvas_h != BASE_EXTENT or self.canvas_w != total:
                raise ValueError("column layout requires canvas_h=640 and canvas_w=sum(bands)")
        ratio = self.canvas_w / self.canvas_h
        if not (ASPECT_MIN - _EPS <= ratio <= ASPECT_MAX + _EPS):
            raise ValueError(f"canvas aspect ratio {ratio:.4f} outside [3/4, 4/3]")

    @property
    def n(self) -> int:
        return len(self.bands)

    @property
    def aspect_ratio(self) -> float:
        return self.canvas_w / self.canvas_h


@dataclass(frozen=True)
class Placement:
    """One subfigure placed on the canvas, with its rescaled dimensions."""

    entry: PoolEntry
    box: BBox
    resized_w: int
    resized_h: int

    @property
    def class_id(self) -> int:
        return self.entry.label.id


@dataclass(frozen=True)
class ComposedFigure:
    """A rendered pseudo compound figure plus its annotations."""

    canvas: Image.Image
    placements: tuple[Placement, ...]
    layout: LayoutSpec
    seed_info: tuple[int, int]  # (seed, figure index)
    mode: str  # "multi" | "intra"


@dataclass(frozen=True)
class SimConfig:
    """Simulation knobs; the defaults produce the standard 7000/2000 dataset."""

    total_figures: int = 7000
    intra_figures: int = 2000
    n_range: tuple[int, int] = (2, 5)
    band_extent_range: tuple[int, int] = (128, 320)
    gutter: int = 4
    background: str = "white"
    max_layout_retries: int = 100

    def __post_init__(self) -> None:
        if self.total_figures < 0:
            raise ValueError(f"total_figures must be >= 0, got {self.total_figures}")
        if not 0 <= self.intra_figures <= self.total_figures:
            raise ValueError(
                f"intra_figures must lie in [0, total_figures], got "
                f"{self.intra_figures} of {self.total_figures}"
            )
        lo, hi = self.n_range
        if not 2 <= lo <= hi <= 5:
            raise ValueError(f"n_range must be within [2, 5], got {self.n_range}")
        blo, bhi = self.band_extent_range
        if not 0 < blo <= bhi <= BASE_EXTENT:
            raise ValueError(f"band_extent_range must be within (0, 640], got {self.band_extent_range}")
        if self.gutter < 0 or self.gutter >= blo:
            raise ValueError(
                f"gutter must be in [0, smallest band extent), got {self.gutter} with bands >= {blo}"
            )
        if self.max_layout_retries < 1:
            raise ValueError("max_layout_retries must be >= 1")
        try:
            ImageColor.getrgb(self.background)
        except ValueError as e:
            raise ValueError(f"background is not a color: {e}") from e


def sample_layout(
    cfg: SimConfig,
    rng: "RngHandle | np.random.Generator",
    orientation: "str | None" = None,
) -> LayoutSpec:
    """Sample a layout satisfying the aspect-ratio constraint by rejection.

    Orientation (unless forced), band count, and band extents are redrawn as a
    whole until 3/4 <= width/height <= 4/3; more than `max_layout_retries`
    rejections raise LayoutError, signalling an unsatisfiable extent range.
    """
    gen = as_generator(rng)
    lo, hi = cfg.band_extent_range
    n_lo, n_hi = cfg.n_range
    for _ in range(cfg.max_layout_retries):
        orient = orientation
        if orient is None:
            orient = "row" if gen.integers(2) == 0 else "column"
        n = int(gen.integers(n_lo, n_hi + 1))
        bands = tuple(int(v) for v in gen.integers(lo, hi + 1, size=n))
        total = sum(bands)
        ratio = BASE_EXTENT / total if orient == "row" else total / BASE_EXTENT
        if ASPECT_MIN <= ratio <= ASPECT_MAX:
            if orient == "row":
                return LayoutSpec(orient, bands, BASE_EXTENT, total)
            return LayoutSpec(orient, bands, total, BASE_EXTENT)
    raise LayoutError(
        f"no layout satisfied the aspect-ratio constraint in "
        f"{cfg.max_layout_retries} draws; band_extent_range {cfg.band_extent_range} "
        f"is likely incompatible with n_range {cfg.n_range}"
    )


def _resized_dims(entry: PoolEntry, perpendicular: int, orientation: str) -> tuple[int, int]:
    if orientation == "row":
        rh = perpendicular
        rw = max(1, round(entry.aspect * rh))
    else:
        rw = perpendicular
        rh = max(1, round(rw / entry.aspect))
    return rw, rh


def fill_layout(
    layout: LayoutSpec,
    pool: ImagePool,
    gutter: int,
    rng: "RngHandle | np.random.Generator",
) -> list[Placement]:
    """Fill every band with pool images drawn uniformly with replacement.

    Images are scaled (aspect preserved) so they span the band minus the
    gutter, which is split evenly onto both band edges; along the band they
    are appended with `gutter` pixels in between until the next image would
    overflow, leaving the tail as background. Every band receives at least
    one image; if no pool image can fit alone in some band, PoolError is
    raised.
    """
    gen = as_generator(rng)
    if not pool.entries:
        raise PoolError("cannot fill a layout from an empty pool")
    margin = gutter / 2.0
    row = layout.orientation == "row"
    along_extent = layout.canvas_w if row else layout.canvas_h
    limit = along_extent - margin
    placements: list[Placement] = []
    offset = 0.0
    for extent in layout.bands:
        content = extent - gutter
        if content < 1:
            raise LayoutError(f"gutter {gutter} leaves no room in a band of extent {extent}")
        cursor = margin
        placed = 0
        while True:
            entry = pool.entries[int(gen.integers(len(pool.entries)))]
            rw, rh = _resized_dims(entry, content, layout.orientation)
            length = rw if row else rh
            if cursor + length > limit + _EPS:
                if placed:
                    break
                # first slot must hold something: fall back to a uniform draw
                # over the entries that do fit alone
                fitting = [
                    e
                    for e in pool.entries
                    if (_resized_dims(e, content, layout.orientation)[0 if row else 1])
                    <= limit - margin + _EPS
                ]
                if not fitting:
                    raise PoolError(
                        f"no pool image fits alone in a band of extent {extent} "
                        f"(content {content}px, canvas {along_extent}px)"
                    )
                entry = fitting[int(gen.integers(len(fitting)))]
                rw, rh = _resized_dims(entry, content, layout.orientation)
                length = rw if row else rh
            if row:
                box = BBox(cursor, offset + margin, cursor + rw, offset + margin + rh)
            else:
                box = BBox(offset + margin, cursor, offset + margin + rw, cursor + rh)
            placements.append(Placement(entry, box, rw, rh))
            cursor += length + gutter
            placed += 1
        offset += extent
    return placements


def _render(layout: LayoutSpec, placements: list[Placement], background: str) -> Image.Image:
    canvas = Image.new("RGB", (layout.canvas_w, layout.canvas_h), background)
    for p in placements:
        src = _load_entry(p.entry)
        img = src.resize((p.resized_w, p.resized_h), Image.BILINEAR)
        canvas.paste(img, (int(math.floor(p.box.x1 + 0.5)), int(math.floor(p.box.y1 + 0.5))))
    return canvas


def compose(
    cfg: SimConfig,
    pool: ImagePool,
    figure_index: int,
    rng: RngHandle,
) -> ComposedFigure:
    """Compose one pseudo compound figure, deterministic in (seed, index).

    Figure indices below `cfg.intra_figures` use intra-class mode: one class
    is drawn uniformly and the fill is restricted to it. All randomness comes
    from the per-figure substream, so figures can be composed in any order.
    """
    if not pool.entries:
        raise PoolError("cannot compose from an empty pool")
    gen = rng.substream(figure_index).generator()
    intra = figure_index < cfg.intra_figures
    fig_pool = pool
    if intra:
        classes = pool.classes()
        fig_pool = pool.restrict(classes[int(gen.integers(len(classes)))])
    layout = sample_layout(cfg, gen)
    placements = fill_layout(layout, fig_pool, cfg.gutter, gen)
    canvas = _render(layout, placements, cfg.background)
    return ComposedFigure(
        canvas=canvas,
        placements=tuple(placements),
        layout=layout,
        seed_info=(rng.seed, figure_index),
        mode="intra" if intra else "multi",
    )


def placement_lines(figure: ComposedFigure) -> str:
    """YOLO label-file content for one composed figure."""
    w, h = figure.layout.canvas_w, figure.layout.canvas_h
    return "".join(
        format_yolo_line(p.class_id, *bbox_to_yolo(p.box, w, h))
        for p in figure.placements
    )


def worker_count(requested: "int | None" = None) -> int:
    """Resolve a worker count, capped by the CFS_THREADS environment variable."""
    n = requested if requested is not None else min(4, os.cpu_count() or 1)
    cap = os.environ.get("CFS_THREADS")
    if cap:
        try:
            n = min(n, int(cap))
        except ValueError:
            pass
    return max(1, n)


def generate_dataset(
    cfg: SimConfig,
    pool: ImagePool,
    out_dir: "Path | str",
    seed: int,
    workers: "int | None" = None,
) -> dict:
    """Write the full dataset (images/, labels/, manifest.json) and return the
    manifest. Label files and the manifest are byte-identical across runs with
    the same seed and config, regardless of worker count."""
    out = Path(out_dir)
    images_dir = out / "images"
    labels_dir = out / "labels"
    images_dir.mkdir(parents=True, exist_ok=True)
    labels_dir.mkdir(parents=True, exist_ok=True)
    handle = RngHandle(int(seed))

    class_names = {label.id: label.name for label in pool.classes()}

    def build(j: int) -> tuple[str, list[int]]:
        try:
            fig = compose(cfg, pool, j, handle)
        except (LayoutError, PoolError) as e:
            raise type(e)(f"figure {j}: {e}") from e
        fig.canvas.save(images_dir / f"{j:06d}.png", compress_level=1)
        (labels_dir / f"{j:06d}.txt").write_text(placement_lines(fig))
        return fig.mode, [p.class_id for p in fig.placements]

    indices = range(cfg.total_figures)
    n_workers = worker_count(workers)
    if n_workers > 1 and cfg.total_figures > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool_exec:
            results = list(pool_exec.map(build, indices))
    else:
        results = [build(j) for j in indices]

    per_mode = {"intra": 0, "multi": 0}
    per_class = {str(cid): 0 for cid in class_names}
    subfigures = 0
    for mode, class_ids in results:
        per_mode[mode] += 1
        for cid in class_ids:
            per_class[str(cid)] = per_class.get(str(cid), 0) + 1
            subfigures += 1
    manifest = {
        "total_figures": cfg.total_figures,
        "figures_per_mode": per_mode,
        "subfigures": subfigures,
        "subfigures_per_class": per_class,
        "class_names": {str(k): v for k, v in sorted(class_names.items())},
        "seed": int(seed),
        "gutter": cfg.gutter,
        "background": cfg.background,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
