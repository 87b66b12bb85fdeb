"""Geometric application of attacks: single-patch pastes and tiled patterns.

All three operations preserve autograd history flowing from the element or
patch tensor into the returned image, which is what lets one small tile be
optimized through every copy of itself at once.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import torch
import torch.nn.functional as F

from .core import BooleanMask, BoundingBox, ImageBuffer, PatchElement
from .errors import BoxOutsideImage, DegeneratePatchWarning, DimensionMismatch


@dataclass(frozen=True)
class PlacementConfig:
    """How a single patch scales and sits relative to a person box.

    `scale_fraction` is interpreted per `scale_semantics`: "area" makes the
    pasted patch cover that fraction of the box area, "side" scales the
    patch side against the box's geometric-mean side sqrt(w*h).
    `center_offset` is (dx, dy) in units of box width/height.
    """

    scale_fraction: float = 0.30
    center_offset: tuple[float, float] = (0.0, 0.0)
    scale_semantics: str = "area"

    def __post_init__(self):
        if not (0.0 < self.scale_fraction <= 1.0):
            raise ValueError(f"scale_fraction must be in (0, 1], got {self.scale_fraction}")
        if self.scale_semantics not in ("area", "side"):
            raise ValueError(f"scale_semantics must be 'area' or 'side', got {self.scale_semantics!r}")


def resize_bilinear(data: torch.Tensor, height: int, width: int) -> torch.Tensor:
    """Bilinear resize of an (H, W, C) tensor; differentiable, exact no-op
    when the size already matches."""
    if (int(data.shape[0]), int(data.shape[1])) == (height, width):
        return data
    nchw = data.permute(2, 0, 1).unsqueeze(0)
    out = F.interpolate(nchw, size=(height, width), mode="bilinear", align_corners=False)
    return out.squeeze(0).permute(1, 2, 0)


def paste_side(box: BoundingBox, cfg: PlacementConfig, height: int, width: int) -> float:
    """Target paste side in pixels before the 1px degeneracy floor."""
    x0, y0, x1, y1 = box.denormalize(height, width)
    area = (x1 - x0) * (y1 - y0)
    if cfg.scale_semantics == "area":
        return float((cfg.scale_fraction * area) ** 0.5)
    return float(cfg.scale_fraction * (area ** 0.5))


def place_patch(image: ImageBuffer, patch: PatchElement, box: BoundingBox,
                cfg: PlacementConfig) -> ImageBuffer:
    """Paste a bilinearly resized patch centered on the box (plus offset).

    The pasted region is clipped to the image; pixels outside it are copied
    through untouched. A paste that would shrink below one pixel is clamped
    to 1x1 and flagged with DegeneratePatchWarning.
    """
    h, w = image.height, image.width
    x0, y0, x1, y1 = box.denormalize(h, w)
    if x1 <= 0 or y1 <= 0 or x0 >= w or y0 >= h:
        raise BoxOutsideImage(f"box corners ({x0:.1f}, {y0:.1f}, {x1:.1f}, {y1:.1f}) "
                              f"miss the {h}x{w} image")

    side = paste_side(box, cfg, h, w)
    side_px = int(round(side))
    if side_px < 1:
        warnings.warn("patch paste clamped to 1x1 pixel", DegeneratePatchWarning)
        side_px = 1

    dx, dy = cfg.center_offset
    center_x = (x0 + x1) / 2.0 + dx * (x1 - x0)
    center_y = (y0 + y1) / 2.0 + dy * (y1 - y0)
    px0 = int(round(center_x - side_px / 2.0))
    py0 = int(round(center_y - side_px / 2.0))
    px1, py1 = px0 + side_px, py0 + side_px

    # clip to image
    cx0, cy0 = max(px0, 0), max(py0, 0)
    cx1, cy1 = min(px1, w), min(py1, h)
    if cx0 >= cx1 or cy0 >= cy1:
        raise BoxOutsideImage("patch paste region falls entirely outside the image")

    patch_data = patch.data
    if patch_data.shape[2] != image.channels:
        if patch_data.shape[2] == 1:
            patch_data = patch_data.expand(-1, -1, image.channels)
        else:
            raise DimensionMismatch(
                f"patch has {patch_data.shape[2]} channels, image has {image.channels}")
    resized = resize_bilinear(patch_data.to(image.data.dtype), side_px, side_px)

    out = image.data.clone()
    out[cy0:cy1, cx0:cx1, :] = resized[cy0 - py0:cy1 - py0, cx0 - px0:cx1 - px0, :]
    return ImageBuffer(out)


def tile_element(element: PatchElement, height: int, width: int) -> ImageBuffer:
    """Repeat the element across a (height, width) canvas, truncating the
    partial tiles at the right and bottom edges."""
    if height < 1 or width < 1:
        raise ValueError("canvas dimensions must be >= 1")
    side = element.side
    rows = torch.arange(height) % side
    cols = torch.arange(width) % side
    return ImageBuffer(element.data[rows][:, cols])


def apply_masked_pattern(image: ImageBuffer, element: PatchElement,
                         mask: BooleanMask) -> ImageBuffer:
    """Tile the element over the image and keep it only where the mask is true."""
    if (mask.height, mask.width) != (image.height, image.width):
        raise DimensionMismatch(
            f"mask is {mask.height}x{mask.width}, image is {image.height}x{image.width}")
    tiled = tile_element(element, image.height, image.width).data.to(image.data.dtype)
    if tiled.shape[2] != image.channels:
        if tiled.shape[2] == 1:
            tiled = tiled.expand(-1, -1, image.channels)
        else:
            raise DimensionMismatch(
                f"element has {tiled.shape[2]} channels, image has {image.channels}")
    out = torch.where(mask.data.unsqueeze(-1), tiled, image.data)
    return ImageBuffer(out)
