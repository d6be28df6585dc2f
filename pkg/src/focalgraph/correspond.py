"""Candidate collection and correspondence filtering for trace fitting.

Every maximal node gathers possible samples of its own edge trace: the
adjacent non-maximal nodes at a different depth, the non-maximal nodes
one further hop out (the maximum can sit at either end of a trace), and
the response volume's entries at the node's own pixel (edges near the
lens center do not shift between slices, so their trace stacks up at
one location). Candidate pairs then qualify as a correspondence when
the three depths are pairwise distinct and the two candidates lie on
geometrically opposite sides of the anchor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import volume as volume_mod
from .graph import DepthGraph
from .volume import FocusVolume

DEFAULT_COS_THRESHOLD = -0.95


@dataclass(frozen=True)
class Candidate:
    """One potential trace sample for an anchor node.

    `node_id` is the originating graph node, or None for an entry pulled
    from the response volume at the anchor's own pixel.
    """

    position: tuple[int, int]
    depth: int
    magnitude: float
    node_id: int | None = None

    @property
    def is_volume_entry(self) -> bool:
        return self.node_id is None


@dataclass
class CandidateSet:
    anchor: int
    anchor_position: tuple[int, int]
    anchor_depth: int
    entries: list[Candidate]


@dataclass(frozen=True)
class CorrespondencePair:
    anchor: int
    b: Candidate
    c: Candidate


def collect_candidates(
    a: int,
    graph: DepthGraph,
    partition: tuple[set[int], set[int]],
    volume: FocusVolume,
    allow_any_anchor: bool = False,
) -> CandidateSet:
    """All trace-sample candidates for maximal node `a`, deduplicated.

    Graph candidates must be non-maximal and differ from the anchor in
    depth; the two-hop sweep runs from every adjacent non-maximal node
    regardless of that node's own depth. Volume candidates are the other
    responses stored at the anchor's pixel. The keep-all-nodes variant
    refines non-maximal nodes through the same rule; `allow_any_anchor`
    lifts the maximal-anchor precondition for that path.
    """
    max_ids, nonmax_ids = partition
    if a not in max_ids and not allow_any_anchor:
        raise ValueError(f"node {a} is not in the maximal set")
    anchor = graph.nodes[a]
    da = int(anchor.depth)
    entries: list[Candidate] = []
    seen: set[int] = set()

    def add_node(i: int) -> None:
        node = graph.nodes[i]
        di = int(node.depth)
        if di != da and i not in seen:
            seen.add(i)
            entries.append(
                Candidate(
                    position=(node.x, node.y),
                    depth=di,
                    magnitude=node.magnitude,
                    node_id=i,
                )
            )

    for b in sorted(graph.adjacency[a]):
        if b not in nonmax_ids:
            continue
        add_node(b)
        for c in sorted(graph.adjacency[b]):
            if c in nonmax_ids:
                add_node(c)

    for z, mag in volume_mod.z_profile(volume, anchor.x, anchor.y):
        if z != da and mag > 0:
            entries.append(
                Candidate(
                    position=(anchor.x, anchor.y),
                    depth=z,
                    magnitude=mag,
                    node_id=None,
                )
            )

    return CandidateSet(
        anchor=a,
        anchor_position=(anchor.x, anchor.y),
        anchor_depth=da,
        entries=entries,
    )


def _pair_valid(
    cands: CandidateSet, b: Candidate, c: Candidate, cos_threshold: float
) -> bool:
    da = cands.anchor_depth
    if b.depth == c.depth or b.depth == da or c.depth == da:
        return False
    if b.is_volume_entry or c.is_volume_entry:
        # a volume entry sits on the anchor pixel, so its vector has no
        # direction; accept only depths straddling the anchor's depth
        return (b.depth - da) * (c.depth - da) < 0
    ax, ay = cands.anchor_position
    ux, uy = b.position[0] - ax, b.position[1] - ay
    vx, vy = c.position[0] - ax, c.position[1] - ay
    dot = ux * vx + uy * vy
    norm = math.hypot(ux, uy) * math.hypot(vx, vy)
    return dot <= cos_threshold * norm


def collect_correspondences(
    cands: CandidateSet, cos_threshold: float = DEFAULT_COS_THRESHOLD
) -> list[CorrespondencePair]:
    """Unordered candidate pairs that qualify as trace correspondences.

    Positional pairs must subtend an angle at the anchor whose cosine is
    <= cos_threshold (close to opposite); pairs involving volume entries
    use the depth-straddle rule instead, since a zero-length vector has
    no direction.
    """
    if not -1.0 <= cos_threshold < 0.0:
        raise ValueError(f"cos_threshold must be in [-1, 0), got {cos_threshold}")
    pairs = []
    entries = cands.entries
    for i in range(len(entries)):
        for j in range(i + 1, len(entries)):
            if _pair_valid(cands, entries[i], entries[j], cos_threshold):
                pairs.append(
                    CorrespondencePair(anchor=cands.anchor, b=entries[i], c=entries[j])
                )
    return pairs
