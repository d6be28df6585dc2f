"""Brute-force reference implementations used to verify the fast paths.

Everything here is deliberately written the slow, obvious way (explicit
loops, direct geometric constructions) and stays independent of the
library's internals wherever the contract of an operation allows it.
"""

import numpy as np

INCIRCLE_TOL = 1e-9


def brute_convolve2d(image, kernel):
    """True 2D convolution with replicate padding, explicit loops."""
    h, w = image.shape
    kh, kw = kernel.shape
    ry, rx = kh // 2, kw // 2
    out = np.zeros((h, w), dtype=np.float64)
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for v in range(-ry, ry + 1):
                for u in range(-rx, rx + 1):
                    yy = min(max(y - v, 0), h - 1)
                    xx = min(max(x - u, 0), w - 1)
                    acc += image[yy, xx] * kernel[v + ry, u + rx]
            out[y, x] = acc
    return out


def brute_nms(magnitude, gx, gy):
    """Mirror of the suppression rule: 4 sectors, >= forward, > backward."""
    h, w = magnitude.shape
    steps = ((0, 1), (1, 1), (1, 0), (1, -1))
    keep = np.zeros((h, w), dtype=bool)
    for y in range(h):
        for x in range(w):
            ang = np.degrees(np.arctan2(gy[y, x], gx[y, x]))
            if ang < 0:
                ang += 180.0
            if ang >= 180.0:
                ang -= 180.0
            if ang < 22.5 or ang >= 157.5:
                s = 0
            elif ang < 67.5:
                s = 1
            elif ang < 112.5:
                s = 2
            else:
                s = 3
            dy, dx = steps[s]

            def mag_at(yy, xx):
                if 0 <= yy < h and 0 <= xx < w:
                    return magnitude[yy, xx]
                return 0.0

            fwd = mag_at(y + dy, x + dx)
            bwd = mag_at(y - dy, x - dx)
            keep[y, x] = magnitude[y, x] >= fwd and magnitude[y, x] > bwd
    return keep


def brute_max_maps(slices, width, height):
    """Triple loop over (x, y, z); smallest z wins ties."""
    M = np.zeros((height, width), dtype=np.float64)
    D = np.zeros((height, width), dtype=np.int32)
    dense = np.zeros((height, width, len(slices)), dtype=np.float64)
    for s in slices:
        for x, y, v in zip(s.xs, s.ys, s.values):
            dense[y, x, s.z] = v
    for y in range(height):
        for x in range(width):
            for z in range(len(slices)):
                if dense[y, x, z] > M[y, x]:
                    M[y, x] = dense[y, x, z]
                    D[y, x] = z
    return M, D


def brute_local_maxima(M):
    """8-neighborhood scan plus plateau collapse to the smallest (y, x)."""
    h, w = M.shape
    flat = []
    is_max = np.zeros((h, w), dtype=bool)
    for y in range(h):
        for x in range(w):
            if M[y, x] <= 0:
                continue
            ok = True
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    if dy == 0 and dx == 0:
                        continue
                    yy, xx = y + dy, x + dx
                    if 0 <= yy < h and 0 <= xx < w and M[yy, xx] > M[y, x]:
                        ok = False
            if ok:
                is_max[y, x] = True
    seen = np.zeros((h, w), dtype=bool)
    for y in range(h):
        for x in range(w):
            if not is_max[y, x] or seen[y, x]:
                continue
            # flood the equal-value plateau; (y, x) is its smallest member
            # because the scan is row-major
            stack = [(y, x)]
            seen[y, x] = True
            while stack:
                cy, cx = stack.pop()
                for dy in (-1, 0, 1):
                    for dx in (-1, 0, 1):
                        yy, xx = cy + dy, cx + dx
                        if (
                            0 <= yy < h
                            and 0 <= xx < w
                            and is_max[yy, xx]
                            and not seen[yy, xx]
                            and M[yy, xx] == M[y, x]
                        ):
                            seen[yy, xx] = True
                            stack.append((yy, xx))
            flat.append((y, x))
    return flat


def circumcircle(ax, ay, bx, by, cx, cy):
    """Center and squared radius via the perpendicular-bisector solve."""
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    if d == 0.0:
        return None
    a2, b2, c2 = ax * ax + ay * ay, bx * bx + by * by, cx * cx + cy * cy
    ux = (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d
    uy = (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d
    r2 = (ax - ux) ** 2 + (ay - uy) ** 2
    return ux, uy, r2


def delaunay_violations(xs, ys, triangles, tol=INCIRCLE_TOL):
    """(triangle, node) pairs where the node sits strictly inside the
    circumcircle, beyond the normalized tolerance.

    Built from the explicit circumcenter+radius (not the determinant the
    construction uses); the tolerance is translated onto the determinant
    scale, where det = (r2 - d2) * |2 * area|, normalized by the largest
    coordinate offset to the fourth power.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    bad = []
    idx = np.arange(len(xs))
    for t, (a, b, c) in enumerate(triangles):
        cc = circumcircle(xs[a], ys[a], xs[b], ys[b], xs[c], ys[c])
        if cc is None:
            bad.append((t, -1))
            continue
        ux, uy, r2 = cc
        others = idx[(idx != a) & (idx != b) & (idx != c)]
        d2 = (xs[others] - ux) ** 2 + (ys[others] - uy) ** 2
        m = np.maximum.reduce(
            [
                np.abs(xs[v] - xs[others])
                for v in (a, b, c)
            ]
            + [np.abs(ys[v] - ys[others]) for v in (a, b, c)]
        )
        area2 = abs(
            (xs[b] - xs[a]) * (ys[c] - ys[a])
            - (ys[b] - ys[a]) * (xs[c] - xs[a])
        )
        inside = (r2 - d2) * area2 > tol * m**4
        bad.extend((t, int(i)) for i in others[inside])
    return bad


def brute_partition(nodes, adjacency):
    """Direct per-node evaluation: maximal iff >= every neighbor."""
    max_ids, nonmax_ids = set(), set()
    for node in nodes:
        if all(node.magnitude >= nodes[j].magnitude for j in adjacency[node.id]):
            max_ids.add(node.id)
        else:
            nonmax_ids.add(node.id)
    return max_ids, nonmax_ids


def _edge_owned(ex, ey):
    return ey < 0.0 or (ey == 0.0 and ex > 0.0)


def brute_rasterize(xs, ys, depths, triangles, width, height):
    """Triangle-at-a-time scan over the full pixel grid; same ownership
    rule, but coverage via sign tests over all pixels and depth via the
    plane equation through the three vertices (solved with linalg, not
    edge-function weights)."""
    depth = np.full((height, width), np.nan)
    best = np.full((height, width), np.inf)
    pxg, pyg = np.meshgrid(
        np.arange(width, dtype=np.float64), np.arange(height, dtype=np.float64)
    )
    for t, (a, b, c) in enumerate(triangles):
        A = np.array(
            [
                [xs[a], ys[a], 1.0],
                [xs[b], ys[b], 1.0],
                [xs[c], ys[c], 1.0],
            ]
        )
        try:
            coeff = np.linalg.solve(A, np.array([depths[a], depths[b], depths[c]]))
        except np.linalg.LinAlgError:
            continue
        axy, bxy, cxy = (xs[a], ys[a]), (xs[b], ys[b]), (xs[c], ys[c])
        area = (bxy[0] - axy[0]) * (cxy[1] - axy[1]) - (bxy[1] - axy[1]) * (
            cxy[0] - axy[0]
        )
        if area < 0:
            bxy, cxy = cxy, bxy
            area = -area
        if area <= 1e-12:
            continue
        edges = ((axy, bxy), (bxy, cxy), (cxy, axy))
        e = [
            (x1 - x0) * (pyg - y0) - (y1 - y0) * (pxg - x0)
            for (x0, y0), (x1, y1) in edges
        ]
        covered = (e[0] >= 0) & (e[1] >= 0) & (e[2] >= 0)
        strict = (e[0] > 0) & (e[1] > 0) & (e[2] > 0)
        owned = covered.copy()
        for k, ((x0, y0), (x1, y1)) in enumerate(edges):
            if not _edge_owned(x1 - x0, y1 - y0):
                owned &= e[k] != 0
        cls = np.where(strict, 0, np.where(owned, 1, 2))
        key = np.where(covered, cls * float(1 << 40) + t, np.inf)
        take = key < best
        best[take] = key[take]
        depth[take] = coeff[0] * pxg[take] + coeff[1] * pyg[take] + coeff[2]
    return depth


def brute_mae(depth, valid, gt, mask):
    total, count = 0.0, 0
    h, w = gt.shape
    for y in range(h):
        for x in range(w):
            if mask[y, x] and valid[y, x]:
                total += abs(depth[y, x] - gt[y, x])
                count += 1
    if count == 0:
        return None
    return total / count
