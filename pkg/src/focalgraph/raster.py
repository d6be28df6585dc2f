"""Dense depth map from the refined graph by barycentric interpolation.

Each triangle paints the pixels it owns with the linear blend of its
three vertex depths; pixels covered by no triangle stay invalid. A pixel
exactly on a shared edge or vertex is claimed inclusively by several
triangles, so ownership is resolved without reference to iteration
order: strict interior beats boundary, boundary pixels go to the
triangle whose touching edges are its top/left edges, and hull-boundary
pixels that no fill rule claims fall back to the lowest canonical-rank
triangle. The result is a partition, which is what keeps the focal
sweep free of seams along triangle borders.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit
from scipy import ndimage

from .errors import DegenerateTriangleError, FormatError, MissingFileError
from .graph import DepthGraph

DEGENERATE_AREA_EPS = 1e-12
FDM_MAGIC = b"FDM1"
DEFAULT_VIEW_STEP = 10


@dataclass
class DepthMap:
    """Per-pixel real depth index plus explicit validity.

    `depth` is NaN exactly where `valid` is False; finite and inside
    [0, depth_count-1] elsewhere.
    """

    depth: np.ndarray
    valid: np.ndarray
    depth_count: int
    step_for_view: int = DEFAULT_VIEW_STEP

    @property
    def width(self) -> int:
        return self.depth.shape[1]

    @property
    def height(self) -> int:
        return self.depth.shape[0]


def barycentric_coords(p, a, b, c):
    """Barycentric coordinates of p in triangle (a, b, c).

    Signed-area ratios: the weight of each vertex is the area of the
    sub-triangle opposite it over the full area. They sum to 1; all
    three are >= 0 (within rounding) exactly when p is inside or on the
    triangle.
    """
    px, py = p
    ax, ay = a
    bx, by = b
    cx, cy = c
    area = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    if abs(area) <= DEGENERATE_AREA_EPS:
        raise DegenerateTriangleError(f"triangle {a}, {b}, {c} has no area")
    wa = ((bx - px) * (cy - py) - (by - py) * (cx - px)) / area
    wb = ((cx - px) * (ay - py) - (cy - py) * (ax - px)) / area
    wc = ((ax - px) * (by - py) - (ay - py) * (bx - px)) / area
    return wa, wb, wc


@njit(cache=True, inline="always")
def _edge_owned(ex, ey):
    # shared edges appear with opposite directions in their two CCW
    # triangles; exactly one direction satisfies this (the triangle for
    # which the edge is its top or left edge, y growing downward)
    return ey < 0.0 or (ey == 0.0 and ex > 0.0)


@njit(cache=True)
def _fill_triangles(tri, xs, ys, depths, width, height, out_depth, out_key):
    """Paint every triangle's owned pixels; ownership via priority key.

    Key layout: class * 2^40 + canonical rank, where class 0 = strictly
    inside, 1 = on boundary edges the fill rule assigns here, 2 = on
    boundary edges it does not (hull rim). Lower key wins; ranks are
    unique so the winner never depends on triangle iteration order.
    """
    ntri = tri.shape[0]
    for t in range(ntri):
        ia, ib, ic = tri[t, 0], tri[t, 1], tri[t, 2]
        ax, ay = xs[ia], ys[ia]
        bx, by = xs[ib], ys[ib]
        cx, cy = xs[ic], ys[ic]
        area = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
        if area < 0.0:
            ib, ic = ic, ib
            bx, by, cx, cy = cx, cy, bx, by
            area = -area
        if area <= DEGENERATE_AREA_EPS:
            continue
        da, db, dc = depths[ia], depths[ib], depths[ic]
        x0 = max(0, int(np.floor(min(ax, bx, cx))))
        x1 = min(width - 1, int(np.ceil(max(ax, bx, cx))))
        y0 = max(0, int(np.floor(min(ay, by, cy))))
        y1 = min(height - 1, int(np.ceil(max(ay, by, cy))))
        for py in range(y0, y1 + 1):
            for px in range(x0, x1 + 1):
                e_ab = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
                if e_ab < 0.0:
                    continue
                e_bc = (cx - bx) * (py - by) - (cy - by) * (px - bx)
                if e_bc < 0.0:
                    continue
                e_ca = (ax - cx) * (py - cy) - (ay - cy) * (px - cx)
                if e_ca < 0.0:
                    continue
                if e_ab > 0.0 and e_bc > 0.0 and e_ca > 0.0:
                    cls = 0
                else:
                    owned = True
                    if e_ab == 0.0 and not _edge_owned(bx - ax, by - ay):
                        owned = False
                    if e_bc == 0.0 and not _edge_owned(cx - bx, cy - by):
                        owned = False
                    if e_ca == 0.0 and not _edge_owned(ax - cx, ay - cy):
                        owned = False
                    cls = 1 if owned else 2
                key = cls * (1 << 40) + t
                idx = py * width + px
                if key < out_key[idx]:
                    out_key[idx] = key
                    # weight of each vertex = edge function opposite it
                    out_depth[idx] = (e_bc * da + e_ca * db + e_ab * dc) / area


def rasterize(
    graph: DepthGraph, width: int, height: int, depth_count: int | None = None
) -> DepthMap:
    """Depth for every pixel center inside some triangle; NaN elsewhere.

    Inclusive boundary coverage with single ownership: rasterizing the
    triangles in any order gives the identical map because conflicts are
    resolved by a priority key, not by write order. `depth_count` is
    carried into the map's metadata; without one it is inferred from the
    largest node depth.
    """
    depth = np.full(height * width, np.nan, dtype=np.float64)
    key = np.full(height * width, np.int64(3) << 40, dtype=np.int64)
    if len(graph.triangles) > 0:
        xs = np.array([nd.x for nd in graph.nodes], dtype=np.float64)
        ys = np.array([nd.y for nd in graph.nodes], dtype=np.float64)
        depths = np.array([nd.depth for nd in graph.nodes], dtype=np.float64)
        # canonicalize so the rank in the priority key depends on vertex
        # ids only, never on the order the triangles arrived in
        tri = np.sort(graph.triangles.astype(np.int64), axis=1)
        tri = tri[np.lexsort((tri[:, 2], tri[:, 1], tri[:, 0]))]
        _fill_triangles(tri, xs, ys, depths, width, height, depth, key)
    depth = depth.reshape(height, width)
    valid = np.isfinite(depth)
    if depth_count is None:
        depth_count = 1
        if graph.nodes:
            depth_count = int(np.ceil(max(nd.depth for nd in graph.nodes))) + 1
    return DepthMap(depth=depth, valid=valid, depth_count=depth_count)


def fill_nearest(depth_map: DepthMap) -> DepthMap:
    """Optional hole fill: every invalid pixel copies its nearest valid one."""
    if depth_map.valid.all() or not depth_map.valid.any():
        return depth_map
    iy, ix = ndimage.distance_transform_edt(
        ~depth_map.valid, return_distances=False, return_indices=True
    )
    filled = depth_map.depth[iy, ix]
    return DepthMap(
        depth=filled,
        valid=np.ones_like(depth_map.valid),
        depth_count=depth_map.depth_count,
        step_for_view=depth_map.step_for_view,
    )


@dataclass(frozen=True)
class ViewImage:
    gray: np.ndarray  # uint8; invalid pixels are 0
    rgb: np.ndarray  # uint8 (h, w, 3); invalid pixels are red


def normalize_for_view(depth_map: DepthMap, step: int | None = None) -> ViewImage:
    """Visualization scaling: intensity = round(depth*step) + 1 in [1, 255].

    Slice 0 maps to intensity 1, slice 1 to step+1, and so on; 0 is
    reserved for pixels without a depth, which the color rendering marks
    red.
    """
    step = depth_map.step_for_view if step is None else step
    if step < 1:
        raise ValueError(f"view step must be >= 1, got {step}")
    scaled = np.where(depth_map.valid, depth_map.depth * step, 0.0)
    gray = np.clip(np.rint(scaled) + 1, 1, 255).astype(np.uint8)
    gray[~depth_map.valid] = 0
    rgb = np.repeat(gray[:, :, None], 3, axis=2)
    rgb[~depth_map.valid] = (255, 0, 0)
    return ViewImage(gray=gray, rgb=rgb)


# ---------------------------------------------------------------------------
# .fdm: float32 depth raster with a 16-byte header
# ---------------------------------------------------------------------------

def encode_fdm(depth_map: DepthMap) -> bytes:
    header = FDM_MAGIC + np.array(
        [depth_map.width, depth_map.height, depth_map.depth_count],
        dtype="<u4",
    ).tobytes()
    raster = depth_map.depth.astype("<f4")
    # canonical quiet NaN so identical maps serialize bit-identically
    raster[~depth_map.valid] = np.float32(np.nan)
    return header + raster.tobytes()


def save_fdm(depth_map: DepthMap, path) -> None:
    Path(path).write_bytes(encode_fdm(depth_map))


def load_fdm(path) -> DepthMap:
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(str(path))
    data = path.read_bytes()
    if len(data) < 16 or data[:4] != FDM_MAGIC:
        raise FormatError(f"{path}: not a depth raster (bad magic)")
    width, height, depth_count = np.frombuffer(data[4:16], dtype="<u4")
    need = 16 + int(width) * int(height) * 4
    if len(data) < need:
        raise FormatError(f"{path}: raster truncated")
    raster = np.frombuffer(data[16:need], dtype="<f4").reshape(height, width)
    depth = raster.astype(np.float64)
    return DepthMap(
        depth=depth, valid=np.isfinite(depth), depth_count=int(depth_count)
    )
