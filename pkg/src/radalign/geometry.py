"""Axis-aligned bounding boxes for detector regions, plus the merge algebra.

Coordinates follow image convention: origin top-left, ``(x1, y1)`` is the
upper-left corner, ``(x2, y2)`` the lower-right corner, all in pixels.
"""
from __future__ import annotations

import json
import math
from collections.abc import Collection, Iterable
from dataclasses import dataclass, field


class MalformedBox(ValueError):
    """A box violates its geometric invariants (optionally carries a line number)."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class UnknownClass(ValueError):
    """A detection names a class outside the known detector vocabulary."""

    def __init__(self, cls: str, line: int | None = None):
        message = f"unknown detector class {cls!r}"
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.cls = cls
        self.line = line


@dataclass(frozen=True)
class BBox:
    """Axis-aligned rectangle with x1 < x2, y1 < y2, finite, non-negative."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        coords = (self.x1, self.y1, self.x2, self.y2)
        if not all(math.isfinite(c) for c in coords):
            raise MalformedBox(f"non-finite coordinates {coords}")
        if any(c < 0 for c in coords):
            raise MalformedBox(f"negative coordinates {coords}")
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise MalformedBox(f"degenerate box {coords}: need x1 < x2 and y1 < y2")

    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)

    def contains(self, other: "BBox") -> bool:
        """True if `other` lies fully inside this box (boundaries included)."""
        return (
            self.x1 <= other.x1
            and self.y1 <= other.y1
            and self.x2 >= other.x2
            and self.y2 >= other.y2
        )

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x1, self.y1, self.x2, self.y2)


def merge_boxes(b1: BBox, b2: BBox) -> BBox:
    """Minimal axis-aligned rectangle containing both boxes.

    Commutative, associative, and idempotent; the result contains both inputs.
    """
    return BBox(
        min(b1.x1, b2.x1),
        min(b1.y1, b2.y1),
        max(b1.x2, b2.x2),
        max(b1.y2, b2.y2),
    )


@dataclass(frozen=True)
class AnatomicalBox:
    """One detector output: a box labelled with its anatomical class."""

    bbox: BBox
    cls: str
    score: float | None = None

    def __post_init__(self):
        if self.score is not None and not (0.0 <= self.score <= 1.0):
            raise MalformedBox(f"score {self.score} outside [0, 1] for class {self.cls!r}")


@dataclass(frozen=True)
class ImageDetections:
    """All anatomical boxes detected on one image, at most one per class."""

    image_id: str
    width: float
    height: float
    boxes: tuple[AnatomicalBox, ...] = field(default_factory=tuple)

    def __post_init__(self):
        seen: set[str] = set()
        for box in self.boxes:
            if box.cls in seen:
                raise MalformedBox(
                    f"duplicate class {box.cls!r} on image {self.image_id!r}"
                )
            seen.add(box.cls)
            b = box.bbox
            if b.x2 > self.width or b.y2 > self.height:
                raise MalformedBox(
                    f"box {b.as_tuple()} for class {box.cls!r} exceeds "
                    f"image bounds {self.width}x{self.height}"
                )

    def box_for(self, cls: str) -> AnatomicalBox | None:
        for box in self.boxes:
            if box.cls == cls:
                return box
        return None

    def classes(self) -> set[str]:
        return {box.cls for box in self.boxes}


def _dedup_per_class(boxes: list[AnatomicalBox]) -> list[AnatomicalBox]:
    # Keep the highest-scoring box per class; on ties (or missing scores,
    # ranked below any score) keep the first seen.
    best: dict[str, AnatomicalBox] = {}
    order: list[str] = []
    for box in boxes:
        score = -1.0 if box.score is None else box.score
        if box.cls not in best:
            best[box.cls] = box
            order.append(box.cls)
            continue
        incumbent = best[box.cls]
        incumbent_score = -1.0 if incumbent.score is None else incumbent.score
        if score > incumbent_score:
            best[box.cls] = box
    return [best[cls] for cls in order]


def ingest_detections(
    stream: Iterable[str],
    known_classes: Collection[str] | None = None,
) -> list[ImageDetections]:
    """Parse a JSON-lines detection stream into validated per-image records.

    One image per line: ``{"image_id", "width", "height", "boxes": [...]}``
    where each box is ``{"cls", "x1", "y1", "x2", "y2", "score"?}``.
    Duplicate boxes for the same class are collapsed to the highest score
    (ties keep the first). Violations raise with the offending line number.
    """
    out: list[ImageDetections] = []
    for lineno, line in enumerate(stream, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedBox(f"invalid JSON: {exc}", line=lineno) from exc
        try:
            boxes = []
            for raw in record.get("boxes", []):
                cls = str(raw["cls"])
                if known_classes is not None and cls not in known_classes:
                    raise UnknownClass(cls, line=lineno)
                bbox = BBox(
                    float(raw["x1"]), float(raw["y1"]),
                    float(raw["x2"]), float(raw["y2"]),
                )
                score = raw.get("score")
                boxes.append(AnatomicalBox(bbox, cls, None if score is None else float(score)))
            detections = ImageDetections(
                image_id=str(record["image_id"]),
                width=float(record["width"]),
                height=float(record["height"]),
                boxes=tuple(_dedup_per_class(boxes)),
            )
        except UnknownClass:
            raise
        except MalformedBox as exc:
            if exc.line is None:
                raise MalformedBox(str(exc), line=lineno) from exc
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedBox(f"bad detection record: {exc}", line=lineno) from exc
        out.append(detections)
    return out
