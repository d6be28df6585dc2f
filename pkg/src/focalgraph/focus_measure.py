"""Edge-filtered gradient magnitude as a per-pixel focus measure.

One image in, one sparse slice of focus responses out. The image is
convolved with first-derivative-of-Gaussian kernels, the gradient
magnitude is thinned by direction-quantized non-maximum suppression, and
an adaptive threshold (chosen so that a fixed fraction of all pixels is
below it) drops weak responses. Only pixels that survive both keep their
magnitude; everything else carries no measurement. Blur lowers edge
magnitudes, so across a focal stack the surviving magnitude at a pixel
peaks where that pixel is in focus.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import InvalidSigmaError

DEFAULT_SIGMA = math.sqrt(2.0)
DEFAULT_NON_EDGE_RATIO = 0.95


@dataclass(frozen=True)
class CannyParams:
    """The two knobs of the focus measure.

    sigma: std-dev (pixels) of the Gaussian whose derivative is the filter.
    non_edge_ratio: fraction of pixels assumed to be non-edges; sets the
        adaptive magnitude threshold.
    quantile_nonzero_only: experimental switch; compute the threshold
        quantile over nonzero magnitudes only instead of all pixels.
    """

    sigma: float = DEFAULT_SIGMA
    non_edge_ratio: float = DEFAULT_NON_EDGE_RATIO
    quantile_nonzero_only: bool = False

    def __post_init__(self):
        if not self.sigma > 0:
            raise InvalidSigmaError(f"sigma must be > 0, got {self.sigma}")
        if not 0.0 < self.non_edge_ratio < 1.0:
            raise ValueError(
                f"non_edge_ratio must be in (0, 1), got {self.non_edge_ratio}"
            )


@dataclass(frozen=True)
class FocusSlice:
    """Sparse focus responses of one stack slice.

    Parallel arrays sorted by (y, x); `values` holds the raw (pre-NMS)
    gradient magnitude of each accepted pixel.
    """

    width: int
    height: int
    z: int
    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray

    def __len__(self):
        return len(self.values)

    def as_dict(self) -> dict[tuple[int, int], float]:
        return {
            (int(x), int(y)): float(v)
            for x, y, v in zip(self.xs, self.ys, self.values)
        }


def gaussian_derivative_kernels(sigma: float):
    """2D x- and y-derivative-of-Gaussian kernels, truncated at 3*sigma.

    Both kernels have side 2*ceil(3*sigma)+1 and sample the analytic
    partial derivative of the unit 2D Gaussian at integer offsets. Each
    is the outer product of a 1D Gaussian and a 1D Gaussian derivative,
    which is what the separable fast path in `compute_focus_slice` uses.
    """
    if not sigma > 0:
        raise InvalidSigmaError(f"sigma must be > 0, got {sigma}")
    r = math.ceil(3.0 * sigma)
    t = np.arange(-r, r + 1, dtype=np.float64)
    g = np.exp(-(t * t) / (2.0 * sigma * sigma)) / (math.sqrt(2.0 * math.pi) * sigma)
    dg = -(t / (sigma * sigma)) * g
    kernel_x = np.outer(g, dg)  # rows sample y, columns sample x
    kernel_y = np.outer(dg, g)
    return kernel_x, kernel_y


def _separable_gradients(image_f: np.ndarray, sigma: float):
    """Convolve with the 2D derivative kernels via two 1D passes each."""
    r = math.ceil(3.0 * sigma)
    t = np.arange(-r, r + 1, dtype=np.float64)
    g = np.exp(-(t * t) / (2.0 * sigma * sigma)) / (math.sqrt(2.0 * math.pi) * sigma)
    dg = -(t / (sigma * sigma)) * g
    # convolve1d flips the weights, i.e. performs true convolution
    gx = ndimage.convolve1d(image_f, dg, axis=1, mode="nearest")
    gx = ndimage.convolve1d(gx, g, axis=0, mode="nearest")
    gy = ndimage.convolve1d(image_f, dg, axis=0, mode="nearest")
    gy = ndimage.convolve1d(gy, g, axis=1, mode="nearest")
    return gx, gy


def _shift(a: np.ndarray, dy: int, dx: int) -> np.ndarray:
    """Shift so out[y, x] = a[y+dy, x+dx], zero where the neighbor is off-image."""
    h, w = a.shape
    out = np.zeros_like(a)
    ys = slice(max(dy, 0), h + min(dy, 0))
    xs = slice(max(dx, 0), w + min(dx, 0))
    yd = slice(max(-dy, 0), h + min(-dy, 0))
    xd = slice(max(-dx, 0), w + min(-dx, 0))
    out[yd, xd] = a[ys, xs]
    return out


# quantized gradient directions: sector -> (dy, dx) of the forward neighbor
_SECTOR_STEPS = ((0, 1), (1, 1), (1, 0), (1, -1))


def _nms_mask(magnitude: np.ndarray, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Direction-quantized non-maximum suppression.

    The gradient angle is folded to [0, 180) and quantized to 4 sectors;
    a pixel survives if its magnitude is >= the forward neighbor and
    strictly > the backward neighbor along that direction. The asymmetric
    tie-break keeps exactly one pixel of a two-pixel ridge plateau, so a
    symmetric step edge thins to a 1-px line. Off-image neighbors count
    as magnitude 0.
    """
    ang = np.degrees(np.arctan2(gy, gx))
    ang[ang < 0] += 180.0
    ang[ang >= 180.0] -= 180.0
    sector = np.zeros(ang.shape, dtype=np.uint8)
    sector[(ang >= 22.5) & (ang < 67.5)] = 1
    sector[(ang >= 67.5) & (ang < 112.5)] = 2
    sector[(ang >= 112.5) & (ang < 157.5)] = 3

    keep = np.zeros(magnitude.shape, dtype=bool)
    for s, (dy, dx) in enumerate(_SECTOR_STEPS):
        fwd = _shift(magnitude, dy, dx)
        bwd = _shift(magnitude, -dy, -dx)
        keep |= (sector == s) & (magnitude >= fwd) & (magnitude > bwd)
    return keep


def _threshold(magnitude: np.ndarray, params: CannyParams) -> float:
    vals = magnitude.ravel()
    if params.quantile_nonzero_only:
        vals = vals[vals > 0]
        if vals.size == 0:
            return 0.0
    return float(np.quantile(vals, params.non_edge_ratio, method="lower"))


def magnitude_and_mask(image: np.ndarray, params: CannyParams):
    """Shared core: (magnitude, nms_mask, threshold) for one image."""
    image_f = np.asarray(image, dtype=np.float64)
    gx, gy = _separable_gradients(image_f, params.sigma)
    magnitude = np.hypot(gx, gy)
    keep = _nms_mask(magnitude, gx, gy)
    t = _threshold(magnitude, params)
    return magnitude, keep, t


def compute_focus_slice(
    image: np.ndarray, z: int, params: CannyParams = CannyParams()
) -> FocusSlice:
    """Focus responses of one slice: NMS survivors with magnitude above
    the adaptive threshold, carrying their raw magnitude."""
    magnitude, keep, t = magnitude_and_mask(image, params)
    accepted = keep & (magnitude > t)
    ys, xs = np.nonzero(accepted)
    h, w = magnitude.shape
    return FocusSlice(
        width=w,
        height=h,
        z=z,
        xs=xs.astype(np.int32),
        ys=ys.astype(np.int32),
        values=magnitude[ys, xs],
    )


def debug_images(image: np.ndarray, params: CannyParams = CannyParams()):
    """uint8 renderings of the intermediate stages, for dump tooling.

    Returns dict with 'magnitude' (normalized), 'edges' (binary mask of
    accepted pixels) and 'filtered_magnitude' (normalized, zero where
    rejected).
    """
    magnitude, keep, t = magnitude_and_mask(image, params)
    accepted = keep & (magnitude > t)
    peak = float(magnitude.max())
    scale = 255.0 / peak if peak > 0 else 0.0
    mag8 = np.clip(np.rint(magnitude * scale), 0, 255).astype(np.uint8)
    edges = np.where(accepted, 255, 0).astype(np.uint8)
    filt8 = np.where(accepted, mag8, 0).astype(np.uint8)
    return {"magnitude": mag8, "edges": edges, "filtered_magnitude": filt8}
