import math

import numpy as np
import pytest

from focalgraph import correspond as cor
from focalgraph import graph as g
from focalgraph import volume as vol

from conftest import slice_from_dict


def empty_volume(w=64, h=64, depth=10):
    return vol.FocusVolume.from_slices(
        [slice_from_dict(w, h, z, {}) for z in range(depth)]
    )


def graph_with_adjacency(specs, adjacency):
    """specs: list of (x, y, magnitude, depth)."""
    nodes = [
        g.Node(id=i, x=x, y=y, magnitude=m, depth=float(d))
        for i, (x, y, m, d) in enumerate(specs)
    ]
    return g.DepthGraph(
        nodes=nodes,
        triangles=np.empty((0, 3), dtype=np.int32),
        adjacency=[set(a) for a in adjacency],
    )


def test_isolated_anchor_empty_set():
    graph = graph_with_adjacency([(10, 10, 9.0, 5)], [set()])
    volume = vol.FocusVolume.from_slices(
        [
            slice_from_dict(64, 64, z, {(10, 10): 4.0} if z == 5 else {})
            for z in range(10)
        ]
    )
    cands = cor.collect_candidates(0, graph, ({0}, set()), volume)
    assert cands.entries == []


def test_one_and_two_hop_collection():
    # anchor 0 (D=5) -- b=1 (NonMax, D=3) -- c=2 (NonMax, D=2)
    graph = graph_with_adjacency(
        [(10, 10, 9.0, 5), (13, 10, 4.0, 3), (16, 10, 3.0, 2)],
        [{1}, {0, 2}, {1}],
    )
    cands = cor.collect_candidates(0, graph, ({0}, {1, 2}), empty_volume())
    assert {(c.node_id, c.depth) for c in cands.entries} == {(1, 3), (2, 2)}


def test_two_hop_runs_even_when_b_shares_anchor_depth():
    # b has the anchor's depth (not a candidate itself) but still leads
    # to its neighbor c
    graph = graph_with_adjacency(
        [(10, 10, 9.0, 5), (13, 10, 4.0, 5), (16, 10, 3.0, 2)],
        [{1}, {0, 2}, {1}],
    )
    cands = cor.collect_candidates(0, graph, ({0}, {1, 2}), empty_volume())
    assert {(c.node_id, c.depth) for c in cands.entries} == {(2, 2)}


def test_maximal_neighbors_excluded():
    graph = graph_with_adjacency(
        [(10, 10, 9.0, 5), (13, 10, 8.0, 3)],
        [{1}, {0}],
    )
    cands = cor.collect_candidates(0, graph, ({0, 1}, set()), empty_volume())
    assert cands.entries == []


def test_volume_entries_collected():
    graph = graph_with_adjacency([(10, 10, 9.0, 5)], [set()])
    volume = vol.FocusVolume.from_slices(
        [
            slice_from_dict(
                64, 64, z, {(10, 10): {4: 2.0, 5: 9.0}.get(z, 0.0)}
                if z in (4, 5)
                else {}
            )
            for z in range(10)
        ]
    )
    cands = cor.collect_candidates(0, graph, ({0}, set()), volume)
    assert len(cands.entries) == 1
    entry = cands.entries[0]
    assert entry.is_volume_entry
    assert entry.depth == 4 and entry.magnitude == 2.0
    assert entry.position == (10, 10)


def test_candidates_deduplicated():
    # node 2 is adjacent to the anchor AND reachable through b=1
    graph = graph_with_adjacency(
        [(10, 10, 9.0, 5), (13, 10, 4.0, 3), (13, 13, 3.0, 2)],
        [{1, 2}, {0, 2}, {0, 1}],
    )
    cands = cor.collect_candidates(0, graph, ({0}, {1, 2}), empty_volume())
    ids = [c.node_id for c in cands.entries]
    assert sorted(ids) == [1, 2]


def test_non_anchor_raises():
    graph = graph_with_adjacency([(10, 10, 9.0, 5)], [set()])
    with pytest.raises(ValueError):
        cor.collect_candidates(0, graph, (set(), {0}), empty_volume())


# --- correspondences --------------------------------------------------------

def cand(x, y, depth, mag=1.0, node_id=0):
    return cor.Candidate(position=(x, y), depth=depth, magnitude=mag, node_id=node_id)


def vol_cand(depth, mag=1.0):
    return cor.Candidate(position=(10, 10), depth=depth, magnitude=mag, node_id=None)


def cset(entries, depth=5):
    return cor.CandidateSet(
        anchor=0, anchor_position=(10, 10), anchor_depth=depth, entries=entries
    )


def test_opposite_pair_valid():
    cands = cset([cand(13, 10, 4, node_id=1), cand(7, 10, 6, node_id=2)])
    pairs = cor.collect_correspondences(cands)
    assert len(pairs) == 1


def test_parallel_pair_rejected():
    b = cand(13, 10, 4, node_id=1)
    c = cand(13, 11, 6, node_id=2)
    # cos of the subtended angle is ~ +0.95, far above -0.95
    assert cor.collect_correspondences(cset([b, c])) == []


def test_equal_depth_pair_rejected():
    cands = cset([cand(13, 10, 4, node_id=1), cand(7, 10, 4, node_id=2)])
    assert cor.collect_correspondences(cands) == []


def test_two_volume_entries_straddle():
    cands = cset([vol_cand(3), vol_cand(8)], depth=5)
    assert len(cor.collect_correspondences(cands)) == 1


def test_two_volume_entries_same_side_rejected():
    cands = cset([vol_cand(6), vol_cand(8)], depth=5)
    assert cor.collect_correspondences(cands) == []


def test_mixed_pair_uses_straddle_rule():
    good = cset([vol_cand(3), cand(13, 10, 7, node_id=1)], depth=5)
    assert len(cor.collect_correspondences(good)) == 1
    bad = cset([vol_cand(3), cand(13, 10, 4, node_id=1)], depth=5)
    assert cor.collect_correspondences(bad) == []


def test_threshold_range_validated():
    cands = cset([])
    with pytest.raises(ValueError):
        cor.collect_correspondences(cands, cos_threshold=0.5)
    with pytest.raises(ValueError):
        cor.collect_correspondences(cands, cos_threshold=-1.5)


def test_cos_threshold_boundary():
    # angle just inside the default acceptance cone
    b = cand(20, 10, 4, node_id=1)
    c_ok = cand(
        10 + int(round(10 * math.cos(math.radians(175)))),
        10 + int(round(10 * math.sin(math.radians(175)))),
        6,
        node_id=2,
    )
    pairs = cor.collect_correspondences(cset([b, c_ok]))
    assert len(pairs) == 1


def test_output_independent_of_entry_order(rng):
    entries = []
    nid = 1
    for _ in range(8):
        if rng.random() < 0.3:
            entries.append(vol_cand(int(rng.integers(0, 10))))
        else:
            entries.append(
                cand(
                    int(rng.integers(0, 30)),
                    int(rng.integers(0, 30)),
                    int(rng.integers(0, 10)),
                    node_id=nid,
                )
            )
            nid += 1
    def key(p):
        return (
            p.b.position, p.b.depth, p.b.node_id,
            p.c.position, p.c.depth, p.c.node_id,
        )
    base = cor.collect_correspondences(cset(entries))
    base_keys = {frozenset([key(p)[:3], key(p)[3:]]) for p in base}
    for _ in range(5):
        perm = list(rng.permutation(len(entries)))
        shuffled = cor.collect_correspondences(
            cset([entries[i] for i in perm])
        )
        got = {frozenset([key(p)[:3], key(p)[3:]]) for p in shuffled}
        assert got == base_keys


def test_pair_count_bound(rng):
    entries = [
        cand(
            int(rng.integers(0, 30)),
            int(rng.integers(0, 30)),
            int(rng.integers(0, 10)),
            node_id=i + 1,
        )
        for i in range(10)
    ]
    pairs = cor.collect_correspondences(cset(entries))
    assert len(pairs) <= len(entries) * (len(entries) - 1) // 2


def test_emitted_pairs_satisfy_all_conditions(rng):
    for _ in range(10):
        entries = []
        nid = 1
        for _ in range(10):
            if rng.random() < 0.4:
                entries.append(vol_cand(int(rng.integers(0, 12)), mag=2.0))
            else:
                x, y = 10, 10
                while (x, y) == (10, 10):  # graph nodes never share the anchor pixel
                    x, y = int(rng.integers(0, 40)), int(rng.integers(0, 40))
                entries.append(
                    cand(x, y, int(rng.integers(0, 12)), node_id=nid)
                )
                nid += 1
        cands = cset(entries, depth=6)
        for p in cor.collect_correspondences(cands):
            assert p.b is not p.c
            assert p.b.depth != p.c.depth
            assert p.b.depth != 6 and p.c.depth != 6
            if p.b.is_volume_entry or p.c.is_volume_entry:
                assert (p.b.depth - 6) * (p.c.depth - 6) < 0
            else:
                ux = p.b.position[0] - 10
                uy = p.b.position[1] - 10
                vx = p.c.position[0] - 10
                vy = p.c.position[1] - 10
                cosv = (ux * vx + uy * vy) / (
                    math.hypot(ux, uy) * math.hypot(vx, vy)
                )
                assert cosv <= -0.95 + 1e-12
