"""Shared domain types and geometry primitives.

Images are float tensors of shape (H, W, C) with intensities in [0, 1],
channel-last. Tensors may carry autograd history; validation only ever
inspects detached copies so wrapping a graph tensor is cheap and safe.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import torch

from .errors import DimensionMismatch, PolygonDegenerate

# Validation slack for intensities: bilinear resampling of in-range data can
# overshoot [0, 1] by a few float ulps.
_RANGE_ATOL = 1e-5


def _check_intensities(data: torch.Tensor, what: str) -> None:
    with torch.no_grad():
        d = data.detach()
        if not torch.isfinite(d).all():
            raise ValueError(f"{what} contains non-finite values")
        lo = float(d.min()) if d.numel() else 0.0
        hi = float(d.max()) if d.numel() else 0.0
    if lo < -_RANGE_ATOL or hi > 1.0 + _RANGE_ATOL:
        raise ValueError(f"{what} intensities outside [0, 1]: min={lo:.4g} max={hi:.4g}")


def _as_float_tensor(data) -> torch.Tensor:
    t = torch.as_tensor(data)
    if not torch.is_floating_point(t):
        raise TypeError("expected floating point intensities in [0, 1]; "
                        "use ImageBuffer.from_array for uint8 input")
    return t


@dataclass(eq=False)
class ImageBuffer:
    """An (H, W, C) float image with intensities in [0, 1], C in {1, 3}."""

    data: torch.Tensor

    def __post_init__(self):
        self.data = _as_float_tensor(self.data)
        if self.data.ndim != 3:
            raise ValueError(f"image must be (H, W, C), got shape {tuple(self.data.shape)}")
        h, w, c = self.data.shape
        if h < 1 or w < 1:
            raise ValueError("image height and width must be >= 1")
        if c not in (1, 3):
            raise ValueError(f"channels must be 1 or 3, got {c}")
        _check_intensities(self.data, "image")

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def channels(self) -> int:
        return int(self.data.shape[2])

    @classmethod
    def from_array(cls, array: np.ndarray) -> "ImageBuffer":
        """Build from a numpy array; uint8 input is rescaled to [0, 1]."""
        arr = np.asarray(array)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.dtype == np.uint8:
            arr = arr.astype(np.float32) / 255.0
        return cls(torch.from_numpy(np.ascontiguousarray(arr, dtype=arr.dtype)))

    def to_array(self) -> np.ndarray:
        return self.data.detach().cpu().numpy()

    def to_uint8(self) -> np.ndarray:
        arr = self.data.detach().clamp(0.0, 1.0).cpu().numpy()
        return np.round(arr * 255.0).astype(np.uint8)


@dataclass(eq=False)
class PatchElement:
    """A square learnable tile; the optimization variable of every attack."""

    data: torch.Tensor

    def __post_init__(self):
        self.data = _as_float_tensor(self.data)
        if self.data.ndim != 3 or self.data.shape[0] != self.data.shape[1]:
            raise ValueError(f"element must be square (side, side, C), got {tuple(self.data.shape)}")
        if self.data.shape[0] < 2:
            raise ValueError("element side must be >= 2")
        if self.data.shape[2] not in (1, 3):
            raise ValueError(f"element channels must be 1 or 3, got {self.data.shape[2]}")
        _check_intensities(self.data, "element")

    @property
    def side(self) -> int:
        return int(self.data.shape[0])

    @property
    def channels(self) -> int:
        return int(self.data.shape[2])


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in normalized center coordinates relative to the image."""

    cx: float
    cy: float
    w: float
    h: float
    class_id: int = 0

    def __post_init__(self):
        if not (0.0 <= self.cx <= 1.0 and 0.0 <= self.cy <= 1.0):
            raise ValueError(f"box center outside [0, 1]: ({self.cx}, {self.cy})")
        if not (0.0 < self.w <= 1.0 and 0.0 < self.h <= 1.0):
            raise ValueError(f"box extent outside (0, 1]: ({self.w}, {self.h})")

    def denormalize(self, height: int, width: int) -> tuple[float, float, float, float]:
        """Pixel-space corners (x0, y0, x1, y1)."""
        bw, bh = self.w * width, self.h * height
        x0 = self.cx * width - bw / 2.0
        y0 = self.cy * height - bh / 2.0
        return x0, y0, x0 + bw, y0 + bh

    def side_px(self, height: int, width: int) -> float:
        """Geometric-mean side length sqrt(w*h) in pixels."""
        x0, y0, x1, y1 = self.denormalize(height, width)
        return float(np.sqrt((x1 - x0) * (y1 - y0)))


def _shoelace_area(vertices: np.ndarray) -> float:
    x, y = vertices[:, 0], vertices[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


@dataclass(frozen=True)
class ClothingPolygon:
    """Closed polygon in pixel coordinates outlining one printable garment."""

    vertices: tuple[tuple[float, float], ...]
    label: str = ""

    def __post_init__(self):
        verts = tuple((float(x), float(y)) for x, y in self.vertices)
        object.__setattr__(self, "vertices", verts)
        if len(verts) < 3:
            raise PolygonDegenerate(f"polygon '{self.label}' has {len(verts)} vertices, need >= 3")
        if _shoelace_area(np.asarray(verts)) <= 0.0:
            raise PolygonDegenerate(f"polygon '{self.label}' has zero area")

    def area(self) -> float:
        return _shoelace_area(np.asarray(self.vertices))


@dataclass(eq=False)
class BooleanMask:
    """Per-pixel boolean mask matching some image's (H, W)."""

    data: torch.Tensor

    def __post_init__(self):
        self.data = torch.as_tensor(self.data)
        if self.data.dtype != torch.bool:
            self.data = self.data.to(torch.bool)
        if self.data.ndim != 2:
            raise ValueError(f"mask must be (H, W), got shape {tuple(self.data.shape)}")

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    def count(self) -> int:
        return int(self.data.sum())


@dataclass(frozen=True)
class Detection:
    """One decoded detection: a box, a class, and a confidence."""

    box: BoundingBox
    class_id: int
    confidence: float

    def __post_init__(self):
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence outside [0, 1]: {self.confidence}")


def rasterize_polygon(poly: ClothingPolygon, height: int, width: int) -> BooleanMask:
    """Scanline-rasterize a polygon with the even-odd fill rule.

    A pixel is set iff its center (x + 0.5, y + 0.5) lies inside the polygon,
    where "inside" means an odd number of edge crossings to the right of the
    center. Orientation of the vertex list does not matter.
    """
    if height < 1 or width < 1:
        raise ValueError("mask dimensions must be >= 1")
    verts = np.asarray(poly.vertices, dtype=np.float64)
    x1, y1 = verts[:, 0], verts[:, 1]
    x2, y2 = np.roll(x1, -1), np.roll(y1, -1)

    bits = np.zeros((height, width), dtype=bool)
    centers_x = np.arange(width, dtype=np.float64) + 0.5
    for row in range(height):
        yc = row + 0.5
        crosses = (y1 > yc) != (y2 > yc)
        if not crosses.any():
            continue
        t = (yc - y1[crosses]) / (y2[crosses] - y1[crosses])
        xi = np.sort(x1[crosses] + t * (x2[crosses] - x1[crosses]))
        # count of crossings strictly right of each pixel center
        n_right = len(xi) - np.searchsorted(xi, centers_x, side="right")
        bits[row] = (n_right % 2) == 1
    return BooleanMask(torch.from_numpy(bits))


def union_masks(masks: Sequence[BooleanMask],
                height: int | None = None,
                width: int | None = None) -> BooleanMask:
    """Per-pixel OR of masks; dims are required only for the empty list."""
    masks = list(masks)
    if not masks:
        if height is None or width is None:
            raise ValueError("union of an empty mask list needs explicit dimensions")
        return BooleanMask(torch.zeros(height, width, dtype=torch.bool))
    h, w = masks[0].height, masks[0].width
    for m in masks[1:]:
        if (m.height, m.width) != (h, w):
            raise DimensionMismatch(
                f"mask dims {m.height}x{m.width} differ from {h}x{w}")
    if height is not None and width is not None and (height, width) != (h, w):
        raise DimensionMismatch(
            f"requested dims {height}x{width} differ from mask dims {h}x{w}")
    out = masks[0].data.clone()
    for m in masks[1:]:
        out |= m.data
    return BooleanMask(out)
