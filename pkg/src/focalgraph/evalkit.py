"""Synthetic ground truth, region MAE, and the timing harness.

The synthetic stacks emulate a focal sweep with a thin-lens proxy: each
slice blurs the scene texture by a Gaussian whose sigma grows with the
per-pixel distance between the slice index and the ground-truth depth.
Spatially varying blur is approximated by blending the two bracketing
levels of a precomputed uniform-blur ladder, which is exact wherever
the ground truth is integer-valued (in-focus pixels reproduce the
texture bytes untouched).
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import pipeline
from .errors import DimensionMismatchError, InvalidDepthCountError
from .raster import DepthMap
from .stack_io import FocalStack, make_stack, read_grayscale, write_pgm

LENS_RANGE_MM = (50.0, 120.0)


@dataclass(frozen=True)
class SyntheticScene:
    name: str
    gt_depth: np.ndarray  # (h, w) float64, index units
    texture: np.ndarray  # (h, w) uint8
    blur_sigma_per_index: float = 1.0


@dataclass(frozen=True)
class RegionMask:
    label: str
    pixels: np.ndarray  # (h, w) bool


def synth_stack(
    scene: SyntheticScene, depth_count: int
) -> tuple[FocalStack, np.ndarray]:
    """Focal stack for the scene plus its ground-truth depth array."""
    if depth_count < 3:
        raise InvalidDepthCountError(f"depth_count must be >= 3, got {depth_count}")
    gt = scene.gt_depth
    if gt.min() < 0 or gt.max() > depth_count - 1:
        raise InvalidDepthCountError(
            f"ground truth range [{gt.min()}, {gt.max()}] exceeds "
            f"[0, {depth_count - 1}]"
        )
    tex = scene.texture.astype(np.float64)
    ladder = [scene.texture.astype(np.float64)]
    for j in range(1, depth_count):
        sigma = scene.blur_sigma_per_index * j
        ladder.append(ndimage.gaussian_filter(tex, sigma, mode="nearest"))
    ladder_arr = np.stack(ladder)

    h, w = gt.shape
    rows = np.arange(h)[:, None]
    cols = np.arange(w)[None, :]
    slices = []
    for z in range(depth_count):
        dist = np.abs(gt - z)
        lo = np.floor(dist).astype(np.int64)
        hi = np.minimum(lo + 1, depth_count - 1)
        frac = dist - lo
        lo_img = ladder_arr[lo, rows, cols]
        hi_img = ladder_arr[hi, rows, cols]
        out = (1.0 - frac) * lo_img + frac * hi_img
        img = np.clip(np.rint(out), 0, 255).astype(np.uint8)
        # exactly in-focus pixels keep their original bytes
        exact = dist == 0
        img[exact] = scene.texture[exact]
        slices.append(img)
    focals = np.linspace(LENS_RANGE_MM[0], LENS_RANGE_MM[1], depth_count)
    return make_stack(slices, focals, name=scene.name), gt.copy()


# ---------------------------------------------------------------------------
# scene builders
# ---------------------------------------------------------------------------

def grid_texture(width, height, spacing=16, line=0, bg=200, thickness=2):
    """Background with a grid of dark lines, like a coated test object."""
    tex = np.full((height, width), bg, dtype=np.uint8)
    for x in range(spacing // 2, width, spacing):
        tex[:, x : x + thickness] = line
    for y in range(spacing // 2, height, spacing):
        tex[y : y + thickness, :] = line
    return tex


def noise_texture(width, height, seed=0, low=0, high=255, cell=4):
    """Blocky random texture; cell size controls the edge density."""
    rng = np.random.default_rng(seed)
    hcells = (height + cell - 1) // cell
    wcells = (width + cell - 1) // cell
    blocks = rng.integers(low, high + 1, (hcells, wcells), dtype=np.int64)
    tex = np.repeat(np.repeat(blocks, cell, axis=0), cell, axis=1)
    return tex[:height, :width].astype(np.uint8)


def flat_scene(width=256, height=256, depth=4.0, seed=0):
    # blocky noise rather than a periodic grid: periodic textures repeat
    # magnitudes exactly, and ties at the adaptive threshold starve the
    # strict cutoff of survivors
    gt = np.full((height, width), float(depth))
    return SyntheticScene(
        name="flat",
        gt_depth=gt,
        texture=noise_texture(width, height, seed=seed, cell=6),
        blur_sigma_per_index=1.0,
    )


def slanted_scene(width=256, height=256, depth_span=(0.0, 8.0), seed=0):
    lo, hi = depth_span
    gt = np.tile(np.linspace(lo, hi, width), (height, 1))
    return SyntheticScene(
        name="slanted",
        gt_depth=gt,
        texture=noise_texture(width, height, seed=seed, cell=6),
        blur_sigma_per_index=1.0,
    )


def half_textured_scene(width=256, height=256, depth=4.0, seed=0):
    """Left half constant gray (no focus evidence), right half textured."""
    tex = np.full((height, width), 128, dtype=np.uint8)
    right = noise_texture(width - width // 2, height, seed=seed, cell=6)
    tex[:, width // 2 :] = right
    gt = np.full((height, width), float(depth))
    return SyntheticScene(
        name="half", gt_depth=gt, texture=tex, blur_sigma_per_index=1.0
    )


def fin_scene(width=256, height=256, plane_depth=2.0, fin_depth=7.0, seed=0):
    """Thin strongly-textured ridges over a weakly-textured low plane.

    The ridge edges dominate every graph neighborhood, so the default
    maximal-only rebuild interpolates the gaps at ridge depth; keeping
    all nodes lets the weak plane evidence pull the gaps back down.
    """
    tex = np.full((height, width), 120, dtype=np.uint8)
    gt = np.full((height, width), float(plane_depth))
    rng = np.random.default_rng(seed)
    # weak dots on the plane
    for y in range(6, height - 6, 12):
        for x in range(6, width - 6, 12):
            if rng.random() < 0.9:
                tex[y : y + 2, x : x + 2] = 150
    # strong ridges
    for x0 in range(12, width - 4, 24):
        tex[:, x0 : x0 + 3] = 255
        tex[:, x0 + 3 : x0 + 4] = 0
        gt[:, x0 : x0 + 4] = fin_depth
    return SyntheticScene(
        name="fin", gt_depth=gt, texture=tex, blur_sigma_per_index=0.8
    )


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def mae(depth_map: DepthMap, gt: np.ndarray, mask: RegionMask) -> float | None:
    """Mean absolute error over masked AND valid pixels; None if empty."""
    if gt.shape != depth_map.depth.shape or mask.pixels.shape != gt.shape:
        raise DimensionMismatchError(
            f"map {depth_map.depth.shape}, gt {gt.shape}, mask {mask.pixels.shape}"
        )
    sel = mask.pixels & depth_map.valid
    if not sel.any():
        return None
    return float(np.abs(depth_map.depth[sel] - gt[sel]).mean())


def full_mask(shape) -> RegionMask:
    return RegionMask(label="all", pixels=np.ones(shape, dtype=bool))


def save_mask(mask: RegionMask, path) -> None:
    write_pgm(path, np.where(mask.pixels, 255, 0).astype(np.uint8))


def load_mask(path, label=None) -> RegionMask:
    img = read_grayscale(path)
    return RegionMask(label=label or Path(path).stem, pixels=img >= 128)


# ---------------------------------------------------------------------------
# benchmark harness
# ---------------------------------------------------------------------------

def bench(
    stack: FocalStack,
    params: pipeline.PipelineParams,
    repetitions: int = 5,
) -> dict:
    """Median per-stage wall times over `repetitions` runs.

    Unrecorded warmup work (kernel compile/load plus one full build at
    the target shape) precedes the timed runs.
    """
    if repetitions < 3:
        raise ValueError(f"repetitions must be >= 3, got {repetitions}")
    pipeline.warmup()
    pipeline.build(stack, params)

    slice_samples = []  # [rep][z]
    preprocess_samples = []
    depth_samples = []
    breakdown_samples: dict[str, list[float]] = {}
    total_samples = []
    for _ in range(repetitions):
        t0 = time.perf_counter()
        volume, per_slice_ms = pipeline.preprocess_stack(stack, params)
        t1 = time.perf_counter()
        _, _, stage_ms, _ = pipeline.depth_stage(volume, params)
        t2 = time.perf_counter()
        slice_samples.append(per_slice_ms)
        preprocess_samples.append((t1 - t0) * 1e3)
        depth_samples.append(sum(stage_ms.values()))
        for k, v in stage_ms.items():
            breakdown_samples.setdefault(k, []).append(v)
        total_samples.append((t2 - t0) * 1e3)

    per_slice = np.array(slice_samples)  # (reps, depth_count)
    per_slice_median = np.median(per_slice, axis=0)
    return {
        "image": {
            "width": stack.width,
            "height": stack.height,
            "depth_count": stack.depth_count,
        },
        "repetitions": repetitions,
        "threads": params.threads,
        "stages": {
            "preprocess": {
                "samples_ms": preprocess_samples,
                "median_ms": float(np.median(preprocess_samples)),
                "per_slice_median_ms": [float(v) for v in per_slice_median],
                "max_slice_median_ms": float(per_slice_median.max()),
            },
            "depth_map": {
                "samples_ms": depth_samples,
                "median_ms": float(np.median(depth_samples)),
                "breakdown_median_ms": {
                    k: float(np.median(v)) for k, v in breakdown_samples.items()
                },
            },
        },
        "end_to_end": {
            "samples_ms": total_samples,
            "median_ms": float(np.median(total_samples)),
        },
    }
