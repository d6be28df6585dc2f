"""Graph representation of the focus maxima.

Local maxima of the maximum map become nodes; a Delaunay triangulation
connects them without intersections; nodes that dominate all their graph
neighbors by magnitude form the maximal set, the rest are edge-trace
responses. The triangulation is an incremental Bowyer-Watson build over
a synthetic enclosing super-triangle, with point location by walking and
an epsilon-guarded incircle determinant (1e-9 on coordinates normalized
by the local point spread; co-circular cases keep whichever diagonal the
insertion order produced).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from numba import njit
from scipy import ndimage

from .volume import MaxMaps

INCIRCLE_EPS = 1e-9
_SUPER_SCALE = 1e8


class NodeKind(Enum):
    MAX = "max"
    NONMAX = "nonmax"
    VOLUME_CANDIDATE = "volume_candidate"


@dataclass
class Node:
    id: int
    x: int
    y: int
    magnitude: float
    depth: float
    kind: NodeKind = NodeKind.NONMAX


class DepthGraph:
    """Nodes plus Delaunay triangles plus the adjacency they induce.

    Triangles index positions in `nodes` (node.id == position). The
    adjacency is symmetric by construction and is normally derived from
    the triangle edges; passing it explicitly overrides that (used by
    tests exercising hand-built topologies). A graph with fewer than
    three non-collinear nodes simply has no triangles.
    """

    def __init__(self, nodes, triangles, adjacency=None):
        self.nodes: list[Node] = nodes
        self.triangles: np.ndarray = triangles
        self._adjacency = adjacency
        self._csr = None
        if adjacency is not None and len(adjacency) != len(nodes):
            raise ValueError("adjacency length must match node count")

    def adjacency_csr(self):
        """(indptr, indices) with each neighbor list ascending."""
        if self._csr is None:
            n = len(self.nodes)
            if self._adjacency is not None:
                counts = np.fromiter(
                    (len(a) for a in self._adjacency), dtype=np.int64, count=n
                )
                indptr = np.zeros(n + 1, dtype=np.int64)
                np.cumsum(counts, out=indptr[1:])
                indices = np.empty(indptr[-1], dtype=np.int32)
                for i, adj in enumerate(self._adjacency):
                    indices[indptr[i] : indptr[i + 1]] = sorted(adj)
            else:
                indptr, indices = _csr_from_triangles(n, self.triangles)
            self._csr = (indptr, indices)
        return self._csr

    @property
    def adjacency(self) -> list[set[int]]:
        if self._adjacency is None:
            indptr, indices = self.adjacency_csr()
            self._adjacency = [
                set(indices[indptr[i] : indptr[i + 1]].tolist())
                for i in range(len(self.nodes))
            ]
        return self._adjacency


def extract_local_maxima(maps: MaxMaps) -> list[Node]:
    """Nodes at 8-connected local maxima of M, one per equal-value plateau.

    A pixel qualifies when M > 0 and no 8-neighbor exceeds it; among
    connected pixels of equal value only the smallest (y, x) survives.
    Node ids follow the row-major scan order of the surviving pixels.
    """
    M, D = maps.M, maps.D
    is_max = M > 0
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy == 0 and dx == 0:
                continue
            shifted = np.full_like(M, -1.0)
            h, w = M.shape
            ys = slice(max(dy, 0), h + min(dy, 0))
            xs = slice(max(dx, 0), w + min(dx, 0))
            yd = slice(max(-dy, 0), h + min(-dy, 0))
            xd = slice(max(-dx, 0), w + min(-dx, 0))
            shifted[yd, xd] = M[ys, xs]
            is_max &= M >= shifted
    # adjacent survivors are necessarily equal-valued, so the connected
    # components of the survivor mask are exactly the plateaus
    labels, nlab = ndimage.label(is_max, structure=np.ones((3, 3), dtype=np.int8))
    if nlab == 0:
        return []
    ys, xs = np.nonzero(is_max)  # row-major, i.e. ascending (y, x)
    _, first = np.unique(labels[ys, xs], return_index=True)
    first.sort()
    ys, xs = ys[first], xs[first]
    return [
        Node(
            id=i,
            x=int(x),
            y=int(y),
            magnitude=float(M[y, x]),
            depth=float(D[y, x]),
        )
        for i, (y, x) in enumerate(zip(ys, xs))
    ]


# ---------------------------------------------------------------------------
# Bowyer-Watson triangulation (numba kernel)
# ---------------------------------------------------------------------------

@njit(cache=True, inline="always")
def _orient(ax, ay, bx, by, cx, cy):
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


@njit(cache=True, inline="always")
def _in_circumcircle(pts, n_real, va, vb, vc, qx, qy):
    """Strictly-inside test for q against the circumcircle of CCW (va,vb,vc).

    Real-point tests use the 1e-9 tolerance on coordinates normalized by
    the largest offset, so near-co-circular pixel quadruples count as
    co-circular. Tests touching the synthetic super vertices use a tight
    floating-point error bound instead; their coordinate magnitudes would
    make the normalized tolerance meaninglessly coarse.
    """
    adx = pts[va, 0] - qx
    ady = pts[va, 1] - qy
    bdx = pts[vb, 0] - qx
    bdy = pts[vb, 1] - qy
    cdx = pts[vc, 0] - qx
    cdy = pts[vc, 1] - qy
    a2 = adx * adx + ady * ady
    b2 = bdx * bdx + bdy * bdy
    c2 = cdx * cdx + cdy * cdy
    m1 = bdx * cdy - cdx * bdy
    m2 = adx * cdy - cdx * ady
    m3 = adx * bdy - bdx * ady
    det = a2 * m1 - b2 * m2 + c2 * m3
    if va >= n_real or vb >= n_real or vc >= n_real:
        bound = 1e-12 * (a2 * (abs(m1)) + b2 * (abs(m2)) + c2 * (abs(m3)))
        return det > bound
    m = max(abs(adx), abs(ady), abs(bdx), abs(bdy), abs(cdx), abs(cdy))
    return det > INCIRCLE_EPS * m * m * m * m


@njit(cache=True)
def _bowyer_watson(px, py):
    """Delaunay triangles of distinct points (px[i], py[i]).

    Returns an (m, 3) int32 array of CCW triangles over the input
    indices. Exact duplicates of already-inserted points are skipped.
    """
    n = px.shape[0]
    out_empty = np.empty((0, 3), dtype=np.int32)
    if n < 3:
        return out_empty

    # enclosing super-triangle, far enough that its circumcircles behave
    # like halfplanes relative to the data
    minx, maxx = px.min(), px.max()
    miny, maxy = py.min(), py.max()
    cx = 0.5 * (minx + maxx)
    cy = 0.5 * (miny + maxy)
    ext = max(maxx - minx, maxy - miny, 1.0)
    r = _SUPER_SCALE * ext
    pts = np.empty((n + 3, 2), dtype=np.float64)
    for i in range(n):
        pts[i, 0] = px[i]
        pts[i, 1] = py[i]
    pts[n, 0], pts[n, 1] = cx - 3.0 * r, cy - r
    pts[n + 1, 0], pts[n + 1, 1] = cx + 3.0 * r, cy - r
    pts[n + 2, 0], pts[n + 2, 1] = cx, cy + 3.0 * r

    cap = 8 * n + 64
    tri_v = np.empty((cap, 3), dtype=np.int32)
    tri_n = np.full((cap, 3), -1, dtype=np.int32)
    alive = np.zeros(cap, dtype=np.bool_)
    bad_stamp = np.full(cap, -1, dtype=np.int64)
    stack = np.empty(cap, dtype=np.int32)
    bound_va = np.empty(3 * cap, dtype=np.int32)
    bound_vb = np.empty(3 * cap, dtype=np.int32)
    bound_out = np.empty(3 * cap, dtype=np.int32)
    bad_list = np.empty(cap, dtype=np.int32)

    # super triangle is CCW: orient((cx-3r,cy-r),(cx+3r,cy-r),(cx,cy+3r)) > 0
    tri_v[0, 0], tri_v[0, 1], tri_v[0, 2] = n, n + 1, n + 2
    alive[0] = True
    ntri = 1
    last = 0

    for p in range(n):
        qx_, qy_ = pts[p, 0], pts[p, 1]

        # --- locate by walking from the last touched triangle
        t = last
        located = -1
        max_steps = 4 * ntri + 32
        for step in range(max_steps):
            crossed = False
            for kk in range(3):
                k = (step + kk) % 3
                a = tri_v[t, k]
                b = tri_v[t, (k + 1) % 3]
                o = _orient(pts[a, 0], pts[a, 1], pts[b, 0], pts[b, 1], qx_, qy_)
                if o < 0.0:
                    nb = tri_n[t, k]
                    if nb >= 0:
                        t = nb
                        crossed = True
                        break
            if not crossed:
                located = t
                break
        if located < 0:
            # degenerate walk; scan every live triangle for containment
            best = -1
            best_o = -1.0e308
            for tt in range(ntri):
                if not alive[tt]:
                    continue
                omin = 1.0e308
                for k in range(3):
                    a = tri_v[tt, k]
                    b = tri_v[tt, (k + 1) % 3]
                    o = _orient(
                        pts[a, 0], pts[a, 1], pts[b, 0], pts[b, 1], qx_, qy_
                    )
                    if o < omin:
                        omin = o
                if omin > best_o:
                    best_o = omin
                    best = tt
            located = best
        t = located

        # exact duplicate of an existing vertex: nothing to insert
        dup = False
        for k in range(3):
            v = tri_v[t, k]
            if pts[v, 0] == qx_ and pts[v, 1] == qy_:
                dup = True
                break
        if dup:
            continue

        # --- cavity: triangles whose circumcircle contains q, grown
        # outward from the containing triangle
        nbad = 0
        nbound = 0
        bad_stamp[t] = p
        stack[0] = t
        nstack = 1
        while nstack > 0:
            nstack -= 1
            bt = stack[nstack]
            bad_list[nbad] = bt
            nbad += 1
            for k in range(3):
                nb = tri_n[bt, k]
                if nb >= 0 and bad_stamp[nb] == p:
                    continue
                flip = False
                if nb >= 0:
                    flip = _in_circumcircle(
                        pts, n, tri_v[nb, 0], tri_v[nb, 1], tri_v[nb, 2], qx_, qy_
                    )
                if flip:
                    bad_stamp[nb] = p
                    stack[nstack] = nb
                    nstack += 1
                else:
                    bound_va[nbound] = tri_v[bt, k]
                    bound_vb[nbound] = tri_v[bt, (k + 1) % 3]
                    bound_out[nbound] = nb
                    nbound += 1

        # --- grow storage if the retriangulation may not fit
        if ntri + nbound > cap:
            newcap = 2 * cap + nbound
            tri_v2 = np.empty((newcap, 3), dtype=np.int32)
            tri_n2 = np.full((newcap, 3), -1, dtype=np.int32)
            alive2 = np.zeros(newcap, dtype=np.bool_)
            stamp2 = np.full(newcap, -1, dtype=np.int64)
            tri_v2[:cap] = tri_v
            tri_n2[:cap] = tri_n
            alive2[:cap] = alive
            stamp2[:cap] = bad_stamp
            tri_v, tri_n, alive, bad_stamp = tri_v2, tri_n2, alive2, stamp2
            stack = np.empty(newcap, dtype=np.int32)
            bad_list2 = np.empty(newcap, dtype=np.int32)
            bad_list2[:nbad] = bad_list[:nbad]
            bad_list = bad_list2
            bound_va2 = np.empty(3 * newcap, dtype=np.int32)
            bound_vb2 = np.empty(3 * newcap, dtype=np.int32)
            bound_out2 = np.empty(3 * newcap, dtype=np.int32)
            bound_va2[:nbound] = bound_va[:nbound]
            bound_vb2[:nbound] = bound_vb[:nbound]
            bound_out2[:nbound] = bound_out[:nbound]
            bound_va, bound_vb, bound_out = bound_va2, bound_vb2, bound_out2
            cap = newcap

        for i in range(nbad):
            alive[bad_list[i]] = False

        # --- fan q to every boundary edge; the edge keeps its direction
        # (cavity interior on the left), so (va, vb, q) stays CCW
        first_new = ntri
        for i in range(nbound):
            ti = ntri
            ntri += 1
            tri_v[ti, 0] = bound_va[i]
            tri_v[ti, 1] = bound_vb[i]
            tri_v[ti, 2] = p
            alive[ti] = True
            outer = bound_out[i]
            tri_n[ti, 0] = outer
            tri_n[ti, 1] = -1
            tri_n[ti, 2] = -1
            if outer >= 0:
                for k in range(3):
                    if (
                        tri_v[outer, k] == bound_vb[i]
                        and tri_v[outer, (k + 1) % 3] == bound_va[i]
                    ):
                        tri_n[outer, k] = ti
                        break
        for i in range(nbound):
            ti = first_new + i
            for j in range(nbound):
                if i == j:
                    continue
                tj = first_new + j
                if tri_v[tj, 0] == tri_v[ti, 1]:  # va_j == vb_i
                    tri_n[ti, 1] = tj
                    tri_n[tj, 2] = ti
        last = first_new

    # --- keep live, real, non-degenerate triangles
    m = 0
    for t in range(ntri):
        if alive[t] and tri_v[t, 0] < n and tri_v[t, 1] < n and tri_v[t, 2] < n:
            o = _orient(
                pts[tri_v[t, 0], 0],
                pts[tri_v[t, 0], 1],
                pts[tri_v[t, 1], 0],
                pts[tri_v[t, 1], 1],
                pts[tri_v[t, 2], 0],
                pts[tri_v[t, 2], 1],
            )
            if o != 0.0:
                m += 1
    out = np.empty((m, 3), dtype=np.int32)
    m = 0
    for t in range(ntri):
        if alive[t] and tri_v[t, 0] < n and tri_v[t, 1] < n and tri_v[t, 2] < n:
            o = _orient(
                pts[tri_v[t, 0], 0],
                pts[tri_v[t, 0], 1],
                pts[tri_v[t, 1], 0],
                pts[tri_v[t, 1], 1],
                pts[tri_v[t, 2], 0],
                pts[tri_v[t, 2], 1],
            )
            if o > 0.0:
                out[m, 0] = tri_v[t, 0]
                out[m, 1] = tri_v[t, 1]
                out[m, 2] = tri_v[t, 2]
                m += 1
            elif o < 0.0:
                out[m, 0] = tri_v[t, 0]
                out[m, 1] = tri_v[t, 2]
                out[m, 2] = tri_v[t, 1]
                m += 1
    return out


def triangulate_positions(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Canonically ordered Delaunay triangles of point positions.

    Each row is sorted ascending and rows are sorted lexicographically,
    so equal triangle sets compare equal regardless of construction
    history. Points are inserted in a fixed shuffled order: scan-order
    insertion degrades the incremental build badly on structured point
    sets, while a (deterministic) random order keeps it near-linear.
    """
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    ys = np.ascontiguousarray(ys, dtype=np.float64)
    n = len(xs)
    perm = np.random.default_rng(0x5EED).permutation(n)
    tri = _bowyer_watson(
        np.ascontiguousarray(xs[perm]), np.ascontiguousarray(ys[perm])
    )
    if len(tri) == 0:
        return tri
    tri = np.sort(perm[tri].astype(np.int32), axis=1)
    order = np.lexsort((tri[:, 2], tri[:, 1], tri[:, 0]))
    return np.ascontiguousarray(tri[order])


def _csr_from_triangles(n: int, triangles: np.ndarray):
    """Symmetric adjacency in CSR form, neighbors ascending per node."""
    if len(triangles) == 0:
        return np.zeros(n + 1, dtype=np.int64), np.empty(0, dtype=np.int32)
    t = triangles.astype(np.int64)
    src = np.concatenate([t[:, 0], t[:, 1], t[:, 2], t[:, 1], t[:, 2], t[:, 0]])
    dst = np.concatenate([t[:, 1], t[:, 2], t[:, 0], t[:, 0], t[:, 1], t[:, 2]])
    keys = np.unique(src * n + dst)
    src = keys // n
    dst = keys % n
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
    return indptr, dst.astype(np.int32)


def build_graph(nodes: list[Node], triangles: np.ndarray) -> DepthGraph:
    return DepthGraph(nodes=nodes, triangles=triangles)


def delaunay(nodes: list[Node]) -> DepthGraph:
    """Delaunay graph over the node positions.

    Fewer than three nodes, or an all-collinear set, yields a graph with
    the nodes but no triangles (and hence no adjacency).
    """
    for i, node in enumerate(nodes):
        if node.id != i:
            raise ValueError("node ids must equal their list positions")
    if len(nodes) < 3:
        return build_graph(nodes, np.empty((0, 3), dtype=np.int32))
    xs = np.array([n.x for n in nodes], dtype=np.float64)
    ys = np.array([n.y for n in nodes], dtype=np.float64)
    return build_graph(nodes, triangulate_positions(xs, ys))


def partition(graph: DepthGraph) -> tuple[set[int], set[int]]:
    """Split node ids into (maximal, non-maximal) response sets.

    A node is maximal when its magnitude is >= that of every adjacent
    node; equal-magnitude neighbors can therefore both be maximal, and
    an isolated node is maximal vacuously.
    """
    n = len(graph.nodes)
    if n == 0:
        return set(), set()
    mags = np.array([nd.magnitude for nd in graph.nodes], dtype=np.float64)
    indptr, indices = graph.adjacency_csr()
    neigh_max = np.full(n, -np.inf)
    nonempty = indptr[:-1] < indptr[1:]
    if indices.size:
        neigh_max[nonempty] = np.maximum.reduceat(
            mags[indices], indptr[:-1][nonempty]
        )
    is_max = mags >= neigh_max
    max_ids = set(np.nonzero(is_max)[0].tolist())
    nonmax_ids = set(np.nonzero(~is_max)[0].tolist())
    return max_ids, nonmax_ids


def apply_partition(graph: DepthGraph, max_ids: set[int]) -> None:
    """Stamp each node's kind from a partition result."""
    for node in graph.nodes:
        node.kind = NodeKind.MAX if node.id in max_ids else NodeKind.NONMAX
