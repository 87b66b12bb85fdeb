"""Dataset loading: images, box/polygon annotations, dedup, frame directories.

On-disk layout of a dataset root:

    root/
      images/    <stem>.png          8-bit RGB
      labels/    <stem>.txt          one "class cx cy w h" line per object
      polygons/  <stem>.json         {"shapes": [{"label": ..., "points": [[x, y], ...]}]}

Frame directories for evaluation are flat folders of PNG files whose
lexicographic filename order is the frame order.
"""
from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import torch
from PIL import Image

from .core import BoundingBox, ClothingPolygon, ImageBuffer
from .errors import DimensionMismatch, EmptyDirectory, ParseError, RangeError

DEFAULT_CLOTHING_LABELS = frozenset({"shirt", "jacket", "coat", "pants", "dress", "skirt"})


@dataclass
class DatasetSample:
    """One annotated training image."""

    image: ImageBuffer
    boxes: list[BoundingBox] = field(default_factory=list)
    polygons: list[ClothingPolygon] = field(default_factory=list)
    source_path: str = ""

    @property
    def pixels(self) -> int:
        return self.image.height * self.image.width


@dataclass
class FrameSequence:
    """Ordered evaluation frames for one condition (shirt, defense, ...)."""

    frames: list[ImageBuffer]
    label: str = ""

    def __post_init__(self):
        if not self.frames:
            raise ValueError("frame sequence must be non-empty")
        h, w = self.frames[0].height, self.frames[0].width
        for i, f in enumerate(self.frames):
            if (f.height, f.width) != (h, w):
                raise DimensionMismatch(f"frame {i} is {f.height}x{f.width}, expected {h}x{w}")

    def __len__(self) -> int:
        return len(self.frames)


# ---------------------------------------------------------------------------
# image file I/O

def read_image(path: str | Path) -> ImageBuffer:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"))
    return ImageBuffer.from_array(arr)


def write_image(image: ImageBuffer, path: str | Path) -> None:
    arr = image.to_uint8()
    if arr.shape[2] == 1:
        arr = arr[:, :, 0]
    Image.fromarray(arr).save(path, format="PNG")


def image_to_png_bytes(image: ImageBuffer) -> bytes:
    arr = image.to_uint8()
    if arr.shape[2] == 1:
        arr = arr[:, :, 0]
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    return buf.getvalue()


def png_bytes_to_image(blob: bytes) -> ImageBuffer:
    with Image.open(io.BytesIO(blob)) as im:
        arr = np.asarray(im.convert("RGB"))
    return ImageBuffer.from_array(arr)


# ---------------------------------------------------------------------------
# annotation parsing

def parse_bbox_file(text: str, image_dims: tuple[int, int]) -> list[BoundingBox]:
    """Parse "class cx cy w h" lines with normalized float coordinates.

    `image_dims` is (height, width); it is carried for interface symmetry and
    future pixel-space validation, the stored coordinates stay normalized.
    """
    del image_dims
    boxes: list[BoundingBox] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 5:
            raise ParseError(f"line {lineno}: expected 5 fields, got {len(parts)}")
        try:
            class_id = int(parts[0])
            cx, cy, w, h = (float(p) for p in parts[1:])
        except ValueError as e:
            raise ParseError(f"line {lineno}: {e}") from e
        for name, v in (("cx", cx), ("cy", cy), ("w", w), ("h", h)):
            if not (0.0 <= v <= 1.0):
                raise RangeError(f"line {lineno}: {name}={v} outside [0, 1]")
        try:
            boxes.append(BoundingBox(cx=cx, cy=cy, w=w, h=h, class_id=class_id))
        except ValueError as e:
            raise RangeError(f"line {lineno}: {e}") from e
    return boxes


def format_bbox_file(boxes: Sequence[BoundingBox]) -> str:
    """Inverse of parse_bbox_file; round-trips valid box lists exactly."""
    lines = [f"{b.class_id} {b.cx!r} {b.cy!r} {b.w!r} {b.h!r}" for b in boxes]
    return "\n".join(lines) + ("\n" if lines else "")


def parse_polygon_file(text: str,
                       clothing_labels: Iterable[str] = DEFAULT_CLOTHING_LABELS,
                       ) -> list[ClothingPolygon]:
    """Parse a LabelMe-style shapes document, keeping only clothing labels."""
    wanted = set(clothing_labels)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON: {e}") from e
    if not isinstance(doc, dict) or "shapes" not in doc:
        raise ParseError("polygon document must be an object with a 'shapes' array")
    shapes = doc["shapes"]
    if not isinstance(shapes, list):
        raise ParseError("'shapes' must be an array")
    polygons = []
    for i, shape in enumerate(shapes):
        try:
            label = shape["label"]
            points = shape["points"]
        except (TypeError, KeyError) as e:
            raise ParseError(f"shape {i}: missing key {e}") from e
        if label not in wanted:
            continue
        try:
            verts = tuple((float(p[0]), float(p[1])) for p in points)
        except (TypeError, ValueError, IndexError) as e:
            raise ParseError(f"shape {i}: malformed points: {e}") from e
        polygons.append(ClothingPolygon(vertices=verts, label=label))
    return polygons


# ---------------------------------------------------------------------------
# perceptual-hash dedup

def average_hash(image: ImageBuffer, hash_bits: int = 64) -> np.ndarray:
    """Average hash: grayscale, shrink to sqrt(bits)^2, threshold at the mean."""
    side = math.isqrt(hash_bits)
    if side * side != hash_bits:
        raise ValueError(f"hash_bits must be a perfect square, got {hash_bits}")
    arr = image.to_uint8()
    if arr.shape[2] == 1:
        arr = np.repeat(arr, 3, axis=2)
    small = Image.fromarray(arr).convert("L").resize((side, side), Image.Resampling.LANCZOS)
    pixels = np.asarray(small, dtype=np.float64)
    return (pixels > pixels.mean()).flatten()


def hamming_distance(a: np.ndarray, b: np.ndarray) -> int:
    return int(np.count_nonzero(a != b))


def deduplicate(samples: Sequence[DatasetSample],
                hash_bits: int = 64,
                max_distance: int = 0) -> list[DatasetSample]:
    """Drop near-duplicate samples, keeping the largest of each group.

    Groups are connected components of the "hash distance <= max_distance"
    relation, so the result is stable under re-application. Largest means
    most pixels; ties go to the lexicographically earliest source path.
    Output order follows the input position of each kept sample.
    """
    if max_distance < 0:
        raise ValueError("max_distance must be >= 0")
    samples = list(samples)
    n = len(samples)
    if n == 0:
        return []
    hashes = [average_hash(s.image, hash_bits) for s in samples]

    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if hamming_distance(hashes[i], hashes[j]) <= max_distance:
                parent[find(i)] = find(j)

    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)

    kept = []
    for members in groups.values():
        best = min(members, key=lambda i: (-samples[i].pixels, samples[i].source_path))
        kept.append(best)
    kept.sort()
    return [samples[i] for i in kept]


# ---------------------------------------------------------------------------
# directory loading

def load_frame_dir(path: str | Path, label: str | None = None) -> FrameSequence:
    """Load a directory of PNG frames, sorted by filename."""
    root = Path(path)
    if not root.is_dir():
        raise FileNotFoundError(f"frame directory not found: {root}")
    files = sorted(p for p in root.iterdir() if p.suffix.lower() == ".png")
    if not files:
        raise EmptyDirectory(f"no PNG frames in {root}")
    frames = []
    dims = None
    for f in files:
        img = read_image(f)
        if dims is None:
            dims = (img.height, img.width)
        elif (img.height, img.width) != dims:
            raise DimensionMismatch(
                f"{f.name} is {img.height}x{img.width}, expected {dims[0]}x{dims[1]}")
        frames.append(img)
    return FrameSequence(frames=frames, label=label if label is not None else root.name)


def load_dataset(root: str | Path,
                 clothing_labels: Iterable[str] = DEFAULT_CLOTHING_LABELS,
                 ) -> list[DatasetSample]:
    """Load every sample under root/{images,labels,polygons} by matching stem.

    Labels and polygons are optional per image; missing annotation files
    yield empty lists rather than errors.
    """
    root = Path(root)
    img_dir = root / "images"
    if not img_dir.is_dir():
        raise EmptyDirectory(f"no images/ directory under {root}")
    image_files = sorted(p for p in img_dir.iterdir() if p.suffix.lower() == ".png")
    if not image_files:
        raise EmptyDirectory(f"no PNG images under {img_dir}")
    samples = []
    for img_path in image_files:
        image = read_image(img_path)
        boxes: list[BoundingBox] = []
        polygons: list[ClothingPolygon] = []
        label_path = root / "labels" / (img_path.stem + ".txt")
        if label_path.is_file():
            try:
                boxes = parse_bbox_file(label_path.read_text(), (image.height, image.width))
            except (ParseError, RangeError) as e:
                raise type(e)(f"{label_path}: {e}") from e
        poly_path = root / "polygons" / (img_path.stem + ".json")
        if poly_path.is_file():
            try:
                polygons = parse_polygon_file(poly_path.read_text(), clothing_labels)
            except ParseError as e:
                raise ParseError(f"{poly_path}: {e}") from e
        samples.append(DatasetSample(image=image, boxes=boxes, polygons=polygons,
                                     source_path=str(img_path)))
    return samples


def write_dataset(samples: Sequence[DatasetSample], root: str | Path) -> None:
    """Write samples back out in the standard dataset layout."""
    root = Path(root)
    for sub in ("images", "labels", "polygons"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    for i, s in enumerate(samples):
        stem = Path(s.source_path).stem if s.source_path else f"{i:04d}"
        write_image(s.image, root / "images" / f"{stem}.png")
        (root / "labels" / f"{stem}.txt").write_text(format_bbox_file(s.boxes))
        shapes = [{"label": p.label, "points": [[x, y] for x, y in p.vertices]}
                  for p in s.polygons]
        (root / "polygons" / f"{stem}.json").write_text(
            json.dumps({"shapes": shapes}, indent=2, sort_keys=True))
