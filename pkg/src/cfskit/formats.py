"""On-disk formats: YOLO label lines, class-map files, and parse errors.

Label files carry one subfigure per line as `class_id cx cy w h`, with center
and size normalized to [0, 1] by the image dimensions and written at fixed
6-decimal precision. Class maps list one class per line as `id name dir`.
"""

from __future__ import annotations

from pathlib import Path

from .geometry import BBox, ClassLabel

YoloRecord = tuple[int, float, float, float, float]


class ParseError(ValueError):
    """Malformed input file; carries the file path and offending line/record."""

    def __init__(self, path: "Path | str", location: "int | None", reason: str):
        self.path = str(path)
        self.location = location
        where = f"{self.path}:{location}" if location is not None else self.path
        super().__init__(f"{where}: {reason}")


def format_yolo_line(class_id: int, cx: float, cy: float, w: float, h: float) -> str:
    return f"{class_id} {cx:.6f} {cy:.6f} {w:.6f} {h:.6f}\n"


def parse_yolo_file(path: "Path | str") -> list[YoloRecord]:
    """Read a YOLO label file into (class_id, cx, cy, w, h) records."""
    records: list[YoloRecord] = []
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ParseError(path, None, f"cannot read label file: {e}") from e
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 5:
            raise ParseError(path, lineno, f"expected 5 fields, got {len(fields)}")
        try:
            class_id = int(fields[0])
            cx, cy, w, h = (float(v) for v in fields[1:])
        except ValueError as e:
            raise ParseError(path, lineno, f"bad numeric field: {e}") from e
        if class_id < 0:
            raise ParseError(path, lineno, f"negative class id {class_id}")
        for name, v in zip(("cx", "cy", "w", "h"), (cx, cy, w, h)):
            if not 0.0 <= v <= 1.0:
                raise ParseError(path, lineno, f"{name}={v} outside [0, 1]")
        records.append((class_id, cx, cy, w, h))
    return records


def yolo_to_bbox(cx: float, cy: float, w: float, h: float, img_w: float, img_h: float) -> BBox:
    """Denormalize a YOLO center/size record to absolute corner coordinates."""
    bw = w * img_w
    bh = h * img_h
    x1 = cx * img_w - bw / 2.0
    y1 = cy * img_h - bh / 2.0
    return BBox(x1, y1, x1 + bw, y1 + bh)


def bbox_to_yolo(box: BBox, img_w: float, img_h: float) -> tuple[float, float, float, float]:
    """Normalize absolute corner coordinates to YOLO center/size in [0, 1]."""
    return (
        (box.x1 + box.x2) / 2.0 / img_w,
        (box.y1 + box.y2) / 2.0 / img_h,
        box.width / img_w,
        box.height / img_h,
    )


def parse_classmap(path: "Path | str") -> list[tuple[ClassLabel, Path]]:
    """Read a class-map file: one `id name dir` line per class.

    Directories are resolved relative to the class-map file's location.
    """
    base = Path(path).parent
    out: list[tuple[ClassLabel, Path]] = []
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ParseError(path, None, f"cannot read class map: {e}") from e
    seen_ids: set[int] = set()
    seen_names: set[str] = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split(maxsplit=2)
        if len(fields) != 3:
            raise ParseError(path, lineno, "expected `id name dir`")
        try:
            class_id = int(fields[0])
        except ValueError as e:
            raise ParseError(path, lineno, f"bad class id: {e}") from e
        name = fields[1]
        if class_id in seen_ids:
            raise ParseError(path, lineno, f"duplicate class id {class_id}")
        if name in seen_names:
            raise ParseError(path, lineno, f"duplicate class name {name!r}")
        seen_ids.add(class_id)
        seen_names.add(name)
        directory = base / fields[2]
        try:
            out.append((ClassLabel(class_id, name), directory))
        except ValueError as e:
            raise ParseError(path, lineno, str(e)) from e
    return out
