"""Stacked focus responses: the sparse volume V and its max/depth maps.

V(x, y, z) is the magnitude stored by the focus measure for slice z at
pixel (x, y), or 0 where nothing was stored. Collapsing V along z gives
the maximum map M (best response per pixel) and the depth-index map D
(the z attaining it). Individual z-profiles stay reachable: the same
physical edge often fires in several slices (edge traces), and those
per-pixel profiles feed the candidate search later.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, OutOfBoundsError
from .focus_measure import FocusSlice


@dataclass
class FocusVolume:
    slices: list[FocusSlice]
    width: int
    height: int
    depth_count: int
    _index: tuple | None = field(default=None, repr=False, compare=False)

    @classmethod
    def from_slices(cls, slices) -> "FocusVolume":
        slices = list(slices)
        if not slices:
            raise DimensionMismatchError("empty slice list")
        w, h = slices[0].width, slices[0].height
        for i, s in enumerate(slices):
            if (s.width, s.height) != (w, h):
                raise DimensionMismatchError(f"slice {i} differs in size")
            if s.z != i:
                raise DimensionMismatchError(
                    f"slice {i} carries z={s.z}; slices must be in z order"
                )
        return cls(slices=slices, width=w, height=h, depth_count=len(slices))

    def pixel_index(self):
        """CSR index over flattened pixel ids, entries ascending z.

        Returns (indptr, zs, mags): for pixel id p = y*width + x the
        stored profile is zs[indptr[p]:indptr[p+1]] with magnitudes
        mags[...]. Built once, cached.
        """
        if self._index is None:
            npix = self.width * self.height
            pids = np.concatenate(
                [
                    s.ys.astype(np.int64) * self.width + s.xs.astype(np.int64)
                    for s in self.slices
                ]
            )
            zs = np.concatenate(
                [np.full(len(s), s.z, dtype=np.int32) for s in self.slices]
            )
            mags = np.concatenate([s.values for s in self.slices])
            # stable sort on pixel id keeps the z-ascending concatenation order
            order = np.argsort(pids, kind="stable")
            pids, zs, mags = pids[order], zs[order], mags[order]
            indptr = np.zeros(npix + 1, dtype=np.int64)
            np.add.at(indptr, pids + 1, 1)
            np.cumsum(indptr, out=indptr)
            self._index = (indptr, zs, mags)
        return self._index


@dataclass(frozen=True)
class MaxMaps:
    """Dense per-pixel best response M and its depth index D.

    M == 0 means no measurement; D is only meaningful where M > 0 (it is
    0 elsewhere). Ties across z go to the smallest z.
    """

    M: np.ndarray
    D: np.ndarray


def build_max_maps(volume: FocusVolume) -> MaxMaps:
    M = np.zeros((volume.height, volume.width), dtype=np.float64)
    D = np.zeros((volume.height, volume.width), dtype=np.int32)
    for s in volume.slices:
        cur = M[s.ys, s.xs]
        better = s.values > cur  # strict: earlier z wins ties
        if np.any(better):
            ys, xs = s.ys[better], s.xs[better]
            M[ys, xs] = s.values[better]
            D[ys, xs] = s.z
    return MaxMaps(M=M, D=D)


def z_profile(volume: FocusVolume, x: int, y: int) -> list[tuple[int, float]]:
    """All stored (z, magnitude) pairs at a pixel, ascending z."""
    if not (0 <= x < volume.width and 0 <= y < volume.height):
        raise OutOfBoundsError(f"({x}, {y}) outside {volume.width}x{volume.height}")
    indptr, zs, mags = volume.pixel_index()
    p = y * volume.width + x
    lo, hi = indptr[p], indptr[p + 1]
    return [(int(z), float(m)) for z, m in zip(zs[lo:hi], mags[lo:hi])]
