"""Training-time augmentation and evaluation-time defense transforms.

Augmentation draws one parameter set per image from explicit uniform ranges;
the same (seed, draw index) always yields the same parameters and therefore
the same augmented image. Geometry companions (`transform_polygon`,
`transform_box`) map annotations through the same scale/rotation so masks
stay registered with the augmented image.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image

from .core import BoundingBox, ClothingPolygon, ImageBuffer
from .errors import CodecFailure


@dataclass(frozen=True)
class EotConfig:
    """Uniform ranges for the per-image augmentation draw."""

    rotation_range: float = 20.0            # degrees, +/-
    scale_range: tuple[float, float] = (0.8, 1.2)
    noise_std: float = 0.02
    brightness_range: tuple[float, float] = (-0.1, 0.1)
    contrast_range: tuple[float, float] = (0.9, 1.1)
    seed: int = 0

    def __post_init__(self):
        if self.rotation_range < 0:
            raise ValueError("rotation_range must be >= 0")
        if self.scale_range[0] <= 0 or self.scale_range[0] > self.scale_range[1]:
            raise ValueError(f"bad scale_range {self.scale_range}")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        for name, rng in (("brightness_range", self.brightness_range),
                          ("contrast_range", self.contrast_range)):
            if rng[0] > rng[1]:
                raise ValueError(f"{name} must be ordered, got {rng}")

    @classmethod
    def identity(cls, seed: int = 0) -> "EotConfig":
        return cls(rotation_range=0.0, scale_range=(1.0, 1.0), noise_std=0.0,
                   brightness_range=(0.0, 0.0), contrast_range=(1.0, 1.0), seed=seed)


@dataclass(frozen=True)
class TransformParams:
    """One concrete augmentation draw. Noise is regenerated from noise_seed,
    so params alone pin the augmented image down bit-exactly."""

    scale: float = 1.0
    rotation_deg: float = 0.0
    contrast: float = 1.0
    brightness: float = 0.0
    noise_std: float = 0.0
    noise_seed: int = 0


def make_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


def sample_eot(cfg: EotConfig, rng: np.random.Generator) -> TransformParams:
    """Draw one parameter set; consumes a fixed number of draws regardless of
    which ranges are degenerate, so draw indices stay aligned."""
    rotation = float(rng.uniform(-cfg.rotation_range, cfg.rotation_range))
    scale = float(rng.uniform(cfg.scale_range[0], cfg.scale_range[1]))
    contrast = float(rng.uniform(cfg.contrast_range[0], cfg.contrast_range[1]))
    brightness = float(rng.uniform(cfg.brightness_range[0], cfg.brightness_range[1]))
    noise_seed = int(rng.integers(0, 2**31 - 1))
    return TransformParams(scale=scale, rotation_deg=rotation, contrast=contrast,
                           brightness=brightness, noise_std=cfg.noise_std,
                           noise_seed=noise_seed)


def scaled_dims(height: int, width: int, scale: float) -> tuple[int, int]:
    return max(1, int(round(height * scale))), max(1, int(round(width * scale)))


def _rotate_image(data: torch.Tensor, angle_deg: float, mode: str) -> torch.Tensor:
    """Rotate (H, W, C) content counterclockwise (as displayed) about the
    image center, zero-padding uncovered pixels. Works in pixel space so
    non-square images rotate without aspect distortion."""
    h, w = int(data.shape[0]), int(data.shape[1])
    theta = math.radians(angle_deg)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    cy, cx = h / 2.0, w / 2.0

    ys = torch.arange(h, dtype=data.dtype) + 0.5
    xs = torch.arange(w, dtype=data.dtype) + 0.5
    gy, gx = torch.meshgrid(ys, xs, indexing="ij")
    # inverse map: output pixel -> source location (content rotates by +angle)
    rel_x, rel_y = gx - cx, gy - cy
    src_x = cos_t * rel_x - sin_t * rel_y + cx
    src_y = sin_t * rel_x + cos_t * rel_y + cy
    grid = torch.stack([src_x * (2.0 / w) - 1.0, src_y * (2.0 / h) - 1.0], dim=-1)

    nchw = data.permute(2, 0, 1).unsqueeze(0)
    out = F.grid_sample(nchw, grid.unsqueeze(0), mode=mode,
                        padding_mode="zeros", align_corners=False)
    return out.squeeze(0).permute(1, 2, 0)


def rotate_points(points: np.ndarray, angle_deg: float,
                  height: int, width: int) -> np.ndarray:
    """Rotate (N, 2) pixel-space (x, y) points with the same convention as
    `_rotate_image` rotates image content."""
    theta = math.radians(angle_deg)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    cx, cy = width / 2.0, height / 2.0
    rel = points - np.array([cx, cy])
    # forward map of content points is the inverse of the sampling map
    x = cos_t * rel[:, 0] + sin_t * rel[:, 1] + cx
    y = -sin_t * rel[:, 0] + cos_t * rel[:, 1] + cy
    return np.stack([x, y], axis=1)


def apply_eot(image: ImageBuffer, params: TransformParams,
              mode: str = "bilinear") -> ImageBuffer:
    """Apply scale, rotation, contrast, brightness, and noise, then clamp.

    Sub-operations with identity-valued parameters are skipped outright, so
    a fully identity draw returns the input buffer unchanged (bit-exact).
    Contrast pivots at mid-gray: x -> 0.5 + c * (x - 0.5).
    """
    data = image.data
    changed = False
    if params.scale != 1.0:
        h, w = scaled_dims(image.height, image.width, params.scale)
        nchw = data.permute(2, 0, 1).unsqueeze(0)
        data = F.interpolate(nchw, size=(h, w), mode="bilinear",
                             align_corners=False).squeeze(0).permute(1, 2, 0)
        changed = True
    if params.rotation_deg != 0.0:
        data = _rotate_image(data, params.rotation_deg, mode)
        changed = True
    if params.contrast != 1.0:
        data = (data - 0.5) * params.contrast + 0.5
        changed = True
    if params.brightness != 0.0:
        data = data + params.brightness
        changed = True
    if params.noise_std > 0.0:
        gen = torch.Generator().manual_seed(params.noise_seed)
        noise = torch.randn(data.shape, generator=gen, dtype=torch.float32)
        data = data + params.noise_std * noise.to(data.dtype)
        changed = True
    if not changed:
        return image
    return ImageBuffer(data.clamp(0.0, 1.0))


def transform_polygon(poly: ClothingPolygon, params: TransformParams,
                      in_dims: tuple[int, int]) -> ClothingPolygon:
    """Map polygon vertices through the geometric part of an augmentation."""
    h, w = in_dims
    verts = np.asarray(poly.vertices, dtype=np.float64)
    if params.scale != 1.0:
        nh, nw = scaled_dims(h, w, params.scale)
        verts = verts * np.array([nw / w, nh / h])
        h, w = nh, nw
    if params.rotation_deg != 0.0:
        verts = rotate_points(verts, params.rotation_deg, h, w)
    return ClothingPolygon(vertices=tuple(map(tuple, verts)), label=poly.label)


def transform_box(box: BoundingBox, params: TransformParams,
                  in_dims: tuple[int, int]) -> BoundingBox:
    """Map a normalized box through the geometric part of an augmentation.

    Uniform scaling leaves normalized coordinates unchanged; rotation moves
    the center and keeps the (axis-aligned) extents, which is adequate for
    the small angles used in training.
    """
    h, w = in_dims
    if params.scale != 1.0:
        h, w = scaled_dims(h, w, params.scale)
    cx, cy = box.cx, box.cy
    if params.rotation_deg != 0.0:
        pt = np.array([[cx * w, cy * h]])
        rx, ry = rotate_points(pt, params.rotation_deg, h, w)[0]
        cx = float(np.clip(rx / w, 0.0, 1.0))
        cy = float(np.clip(ry / h, 0.0, 1.0))
    return BoundingBox(cx=cx, cy=cy, w=box.w, h=box.h, class_id=box.class_id)


# ---------------------------------------------------------------------------
# defenses

_DEFENSE_KINDS = ("none", "resize", "jpeg")


@dataclass(frozen=True)
class DefenseSpec:
    """An input-preprocessing defense: bilinear downscale or JPEG re-encode."""

    kind: str = "none"
    parameter: float = 0.0

    def __post_init__(self):
        if self.kind not in _DEFENSE_KINDS:
            raise ValueError(f"kind must be one of {_DEFENSE_KINDS}, got {self.kind!r}")
        if self.kind == "resize" and not (0.0 < self.parameter <= 1.0):
            raise ValueError(f"resize factor must be in (0, 1], got {self.parameter}")
        if self.kind == "jpeg" and not (1.0 <= self.parameter <= 100.0):
            raise ValueError(f"jpeg quality must be in [1, 100], got {self.parameter}")

    def label(self) -> str:
        if self.kind == "none":
            return "none"
        if self.kind == "resize":
            return f"resize:{self.parameter:g}"
        return f"jpeg:{self.parameter:g}"


def apply_defense(image: ImageBuffer, spec: DefenseSpec) -> ImageBuffer:
    """Run one defense; `none` and size-preserving resizes return the input."""
    if spec.kind == "none":
        return image
    if spec.kind == "resize":
        h = max(1, int(math.floor(image.height * spec.parameter)))
        w = max(1, int(math.floor(image.width * spec.parameter)))
        if (h, w) == (image.height, image.width):
            return image
        nchw = image.data.permute(2, 0, 1).unsqueeze(0)
        out = F.interpolate(nchw, size=(h, w), mode="bilinear", align_corners=False)
        return ImageBuffer(out.squeeze(0).permute(1, 2, 0))
    # jpeg
    arr = image.to_uint8()
    if arr.shape[2] == 1:
        arr = arr[:, :, 0]
    try:
        buf = io.BytesIO()
        Image.fromarray(arr).save(buf, format="JPEG", quality=int(spec.parameter))
        buf.seek(0)
        with Image.open(buf) as im:
            decoded = np.asarray(im.convert("RGB") if image.channels == 3 else im.convert("L"))
    except Exception as e:  # pillow raises a zoo of types here
        raise CodecFailure(f"jpeg round-trip failed: {e}") from e
    if decoded.ndim == 2:
        decoded = decoded[:, :, None]
    out = torch.from_numpy(decoded.astype(np.float32) / 255.0).to(image.data.dtype)
    return ImageBuffer(out)
