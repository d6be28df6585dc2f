"""Sub-slice depth refinement and the rebuilt, median-smoothed graph.

The focus response of an edge across the stack is modeled as a Gaussian
in depth, so its logarithm is a parabola; three (depth, log-magnitude)
samples determine the parabola and its vertex is the refined depth. The
vertex is computed in offset form around the anchor sample, which keeps
the symmetric case (equal magnitudes equidistant from the anchor) exact.
Per anchor, the median over all correspondence-pair fits inside a
plausibility window wins; anchors with no usable fit keep their integer
depth. The retained nodes are re-triangulated and smoothed by a single
interdependent median pass in id order, where each update is immediately
visible to the nodes after it (one pass by construction, so there is
nothing to oscillate).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .correspond import CorrespondencePair
from .errors import DuplicateDepthError, NonPositiveMagnitudeError, NoPeakError
from .graph import DepthGraph, Node, build_graph, triangulate_positions

# relative curvature below this counts as a collinear (peak-free) fit
_CURVATURE_RTOL = 1e-12


@dataclass(frozen=True)
class FitSample:
    depth: float
    log_magnitude: float

    @classmethod
    def from_magnitude(cls, depth: float, magnitude: float) -> "FitSample":
        if not magnitude > 0:
            raise NonPositiveMagnitudeError(
                f"magnitude must be > 0 to take its log, got {magnitude}"
            )
        return cls(depth=float(depth), log_magnitude=math.log(magnitude))


# RefinedGraph is structurally a DepthGraph whose nodes carry refined depths.
RefinedGraph = DepthGraph


def gaussian_three_point(a: FitSample, b: FitSample, c: FitSample) -> float:
    """Peak depth of the Gaussian through three (depth, log-magnitude) samples.

    Solves for the vertex of the parabola through the three log points,
    expressed as an offset from sample `a`: with db = D(b)-D(a),
    dc = D(c)-D(a), yb = lnM(a)-lnM(b), yc = lnM(a)-lnM(c),

        vertex = D(a) + (yc*db^2 - yb*dc^2) / (2*(yc*db - yb*dc))

    Exact (up to rounding) for samples of a true Gaussian; returns D(a)
    itself bit-exactly when b and c mirror each other around a. Raises
    NoPeakError when the three log points are collinear (no curvature).
    """
    db = b.depth - a.depth
    dc = c.depth - a.depth
    if db == 0.0 or dc == 0.0 or db == dc:
        raise DuplicateDepthError(
            f"depths must be pairwise distinct: {a.depth}, {b.depth}, {c.depth}"
        )
    yb = a.log_magnitude - b.log_magnitude
    yc = a.log_magnitude - c.log_magnitude
    denom = yc * db - yb * dc
    if abs(denom) <= _CURVATURE_RTOL * (abs(yc * db) + abs(yb * dc)):
        raise NoPeakError("log-magnitudes are collinear in depth")
    return a.depth + (yc * db * db - yb * dc * dc) / (2.0 * denom)


def gaussian_three_point_printed(a: FitSample, b: FitSample, c: FitSample) -> float:
    """Alternative closed form kept for comparison experiments.

    Computes M+(a,b) = lnM(a)-lnM(b), M-(a,b,c) = M+(a,b)+M+(a,c),
    D2-(a,b) = D(a)^2-D(b)^2, dD(a,c) = 2|D(a)-D(c)| and returns
    M+(a,c)*D2-(a,b) / (dD(a,c)*M-(a,b,c)). Known to fail the
    symmetric-peak sanity check; not used by the pipeline.
    """
    if a.depth in (b.depth, c.depth) or b.depth == c.depth:
        raise DuplicateDepthError("depths must be pairwise distinct")
    m_ab = a.log_magnitude - b.log_magnitude
    m_ac = a.log_magnitude - c.log_magnitude
    m_abc = m_ab + m_ac
    d2_ab = a.depth * a.depth - b.depth * b.depth
    dd_ac = 2.0 * abs(a.depth - c.depth)
    if m_abc == 0.0:
        raise NoPeakError("degenerate magnitude configuration")
    return (m_ac * d2_ab) / (dd_ac * m_abc)


def refine_node_depth(
    anchor: Node, pairs: list[CorrespondencePair], depth_count: int
) -> float:
    """Median of the pairwise Gaussian fits, or the anchor's own depth.

    Fits that degenerate or land outside the plausibility window of
    half the stack depth around the anchor are discarded; with nothing
    left, the anchor's integer depth stands.
    """
    window = depth_count / 2.0
    a = FitSample.from_magnitude(anchor.depth, anchor.magnitude)
    estimates = []
    for pair in pairs:
        b = FitSample.from_magnitude(pair.b.depth, pair.b.magnitude)
        c = FitSample.from_magnitude(pair.c.depth, pair.c.magnitude)
        try:
            est = gaussian_three_point(a, b, c)
        except (NoPeakError, DuplicateDepthError):
            continue
        if abs(est - anchor.depth) <= window:
            estimates.append(est)
    if not estimates:
        return float(anchor.depth)
    return float(np.median(estimates))


def clamp_depth(depth: float, depth_count: int) -> float:
    return min(max(depth, 0.0), float(depth_count - 1))


# ---------------------------------------------------------------------------
# batched pipeline path (numba)
# ---------------------------------------------------------------------------

@njit(cache=True)
def _refine_batch(
    anchors,
    node_x,
    node_y,
    node_depth,
    node_mag,
    is_nonmax,
    adj_indptr,
    adj_indices,
    vol_indptr,
    vol_z,
    vol_mag,
    width,
    depth_count,
    cos_threshold,
):
    """Candidate collection + pair filtering + Gaussian fits + median,
    for every anchor at once. Mirrors the per-anchor reference modules;
    equivalence is asserted in the tests."""
    n_anchors = anchors.shape[0]
    refined = np.empty(n_anchors, dtype=np.float64)
    window = depth_count / 2.0

    cap = 64
    cand_depth = np.empty(cap, dtype=np.int64)
    cand_logm = np.empty(cap, dtype=np.float64)
    cand_dx = np.empty(cap, dtype=np.float64)
    cand_dy = np.empty(cap, dtype=np.float64)
    cand_isvol = np.empty(cap, dtype=np.bool_)
    seen = np.empty(cap, dtype=np.int64)
    ests = np.empty(cap * cap, dtype=np.float64)

    for ai in range(n_anchors):
        a = anchors[ai]
        ax, ay = node_x[a], node_y[a]
        da = node_depth[a]
        log_ma = np.log(node_mag[a])

        # --- candidates: adjacent nonmax, their nonmax neighbors, volume
        ncand = 0
        nseen = 0
        for bi in range(adj_indptr[a], adj_indptr[a + 1]):
            b = adj_indices[bi]
            if not is_nonmax[b]:
                continue
            for hop in range(2):
                if hop == 0:
                    targets_lo, targets_hi = bi, bi + 1
                else:
                    targets_lo, targets_hi = adj_indptr[b], adj_indptr[b + 1]
                for ci in range(targets_lo, targets_hi):
                    c = adj_indices[ci]
                    if not is_nonmax[c]:
                        continue
                    if node_depth[c] == da:
                        continue
                    dup = False
                    for si in range(nseen):
                        if seen[si] == c:
                            dup = True
                            break
                    if dup:
                        continue
                    if ncand >= cap:
                        cap2 = cap * 2
                        cand_depth = _grow_i(cand_depth, cap2)
                        cand_logm = _grow_f(cand_logm, cap2)
                        cand_dx = _grow_f(cand_dx, cap2)
                        cand_dy = _grow_f(cand_dy, cap2)
                        cand_isvol = _grow_b(cand_isvol, cap2)
                        seen = _grow_i(seen, cap2)
                        ests = np.empty(cap2 * cap2, dtype=np.float64)
                        cap = cap2
                    seen[nseen] = c
                    nseen += 1
                    cand_depth[ncand] = node_depth[c]
                    cand_logm[ncand] = np.log(node_mag[c])
                    cand_dx[ncand] = node_x[c] - ax
                    cand_dy[ncand] = node_y[c] - ay
                    cand_isvol[ncand] = False
                    ncand += 1
        pix = ay * width + ax
        for vi in range(vol_indptr[pix], vol_indptr[pix + 1]):
            z = vol_z[vi]
            if z == da or not vol_mag[vi] > 0:
                continue
            if ncand >= cap:
                cap2 = cap * 2
                cand_depth = _grow_i(cand_depth, cap2)
                cand_logm = _grow_f(cand_logm, cap2)
                cand_dx = _grow_f(cand_dx, cap2)
                cand_dy = _grow_f(cand_dy, cap2)
                cand_isvol = _grow_b(cand_isvol, cap2)
                seen = _grow_i(seen, cap2)
                ests = np.empty(cap2 * cap2, dtype=np.float64)
                cap = cap2
            cand_depth[ncand] = z
            cand_logm[ncand] = np.log(vol_mag[vi])
            cand_dx[ncand] = 0.0
            cand_dy[ncand] = 0.0
            cand_isvol[ncand] = True
            ncand += 1

        # --- pairs and fits
        nest = 0
        for i in range(ncand):
            for j in range(i + 1, ncand):
                if cand_depth[i] == cand_depth[j]:
                    continue
                if cand_isvol[i] or cand_isvol[j]:
                    if (cand_depth[i] - da) * (cand_depth[j] - da) >= 0:
                        continue
                else:
                    dot = cand_dx[i] * cand_dx[j] + cand_dy[i] * cand_dy[j]
                    norm = np.hypot(cand_dx[i], cand_dy[i]) * np.hypot(
                        cand_dx[j], cand_dy[j]
                    )
                    if dot > cos_threshold * norm:
                        continue
                db = float(cand_depth[i]) - da
                dc = float(cand_depth[j]) - da
                yb = log_ma - cand_logm[i]
                yc = log_ma - cand_logm[j]
                denom = yc * db - yb * dc
                if abs(denom) <= _CURVATURE_RTOL * (abs(yc * db) + abs(yb * dc)):
                    continue
                est = da + (yc * db * db - yb * dc * dc) / (2.0 * denom)
                if abs(est - da) <= window:
                    ests[nest] = est
                    nest += 1
        if nest == 0:
            refined[ai] = da
        else:
            refined[ai] = np.median(ests[:nest])
    return refined


@njit(cache=True, inline="always")
def _grow_f(arr, n):
    out = np.empty(n, dtype=np.float64)
    out[: arr.shape[0]] = arr
    return out


@njit(cache=True, inline="always")
def _grow_i(arr, n):
    out = np.empty(n, dtype=np.int64)
    out[: arr.shape[0]] = arr
    return out


@njit(cache=True, inline="always")
def _grow_b(arr, n):
    out = np.empty(n, dtype=np.bool_)
    out[: arr.shape[0]] = arr
    return out


def refine_anchor_depths(graph, partition_sets, volume, cos_threshold, anchors=None):
    """Refined (unclamped) depth per anchor id via the batched kernel.

    `anchors` defaults to the maximal set; passing all node ids gives
    the keep-everything variant where every node refines through its own
    candidate set.
    """
    max_ids, nonmax_ids = partition_sets
    if anchors is None:
        anchors = sorted(max_ids)
    anchors = np.asarray(sorted(anchors), dtype=np.int64)
    if anchors.size == 0:
        return {}
    n = len(graph.nodes)
    node_x = np.array([nd.x for nd in graph.nodes], dtype=np.int64)
    node_y = np.array([nd.y for nd in graph.nodes], dtype=np.int64)
    node_depth = np.array([int(nd.depth) for nd in graph.nodes], dtype=np.int64)
    node_mag = np.array([nd.magnitude for nd in graph.nodes], dtype=np.float64)
    is_nonmax = np.zeros(n, dtype=np.bool_)
    for i in nonmax_ids:
        is_nonmax[i] = True
    indptr, indices = graph.adjacency_csr()
    vol_indptr, vol_z, vol_mag = volume.pixel_index()
    refined = _refine_batch(
        anchors,
        node_x,
        node_y,
        node_depth,
        node_mag,
        is_nonmax,
        indptr.astype(np.int64),
        indices.astype(np.int64),
        vol_indptr.astype(np.int64),
        vol_z.astype(np.int64),
        vol_mag,
        volume.width,
        volume.depth_count,
        float(cos_threshold),
    )
    return {int(a): float(r) for a, r in zip(anchors, refined)}


# ---------------------------------------------------------------------------
# rebuild + interdependent median
# ---------------------------------------------------------------------------

@njit(cache=True)
def _median_pass(indptr, indices, depths):
    """In-place sequential median over each node's neighborhood + itself;
    earlier updates feed later medians."""
    n = indptr.shape[0] - 1
    for i in range(n):
        lo, hi = indptr[i], indptr[i + 1]
        k = hi - lo + 1
        vals = np.empty(k, dtype=np.float64)
        for j in range(lo, hi):
            vals[j - lo] = depths[indices[j]]
        vals[k - 1] = depths[i]
        vals.sort()
        if k % 2 == 1:
            depths[i] = vals[k // 2]
        else:
            depths[i] = 0.5 * (vals[k // 2 - 1] + vals[k // 2])


def rebuild_and_median(nodes: list[Node]) -> RefinedGraph:
    """Re-triangulate the retained nodes, then smooth depths in one
    sequential in-place median pass over ascending node ids.

    Node ids are reassigned to list positions (order preserved). The
    median at each node spans its current neighborhood depths plus its
    own, so earlier updates in the pass influence later nodes; the pass
    runs exactly once per node.
    """
    nodes = [
        Node(
            id=i,
            x=nd.x,
            y=nd.y,
            magnitude=nd.magnitude,
            depth=nd.depth,
            kind=nd.kind,
        )
        for i, nd in enumerate(nodes)
    ]
    if len(nodes) < 3:
        graph = build_graph(nodes, np.empty((0, 3), dtype=np.int32))
    else:
        xs = np.array([nd.x for nd in nodes], dtype=np.float64)
        ys = np.array([nd.y for nd in nodes], dtype=np.float64)
        graph = build_graph(nodes, triangulate_positions(xs, ys))
    if graph.nodes:
        indptr, indices = graph.adjacency_csr()
        depths = np.array([nd.depth for nd in graph.nodes], dtype=np.float64)
        _median_pass(indptr, indices.astype(np.int64), depths)
        for node, d in zip(graph.nodes, depths):
            node.depth = float(d)
    return graph
