"""Tail attachment multisets and input/output role assignments.

A scattering configuration attaches four semi-infinite tails to a graph.
The attachment pattern is a multiset over vertices (counts summing to
four); a role assignment then names the tails (0_in, 1_in, 0_out, 1_out).
Tails sharing a vertex are interchangeable, so assignments are quotiented
by within-vertex slot permutations: slots are implied by role order and
never enumerated separately.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Sequence

N_TAILS = 4

ROLE_NAMES = ("0_in", "1_in", "0_out", "1_out")


@dataclass(frozen=True)
class TailMultiset:
    """Tail counts per vertex; ``counts[v]`` tails attach at vertex v."""

    counts: tuple[int, ...]

    def __post_init__(self) -> None:
        if any(c < 0 for c in self.counts):
            raise ValueError("tail counts must be non-negative")
        if sum(self.counts) != N_TAILS:
            raise ValueError(f"tail counts must sum to {N_TAILS}")

    @property
    def n(self) -> int:
        return len(self.counts)

    def support(self) -> tuple[int, ...]:
        """Vertices carrying at least one tail, ascending."""
        return tuple(v for v, c in enumerate(self.counts) if c)

    def tails(self) -> tuple[tuple[int, int], ...]:
        """All (vertex, slot) pairs, ascending."""
        return tuple(
            (v, s) for v, c in enumerate(self.counts) for s in range(c)
        )

    def permuted(self, perm: Sequence[int]) -> "TailMultiset":
        """Image under a vertex relabelling v -> perm[v]."""
        out = [0] * len(self.counts)
        for v, c in enumerate(self.counts):
            out[perm[v]] = c
        return TailMultiset(tuple(out))


@dataclass(frozen=True)
class PortAssignment:
    """Vertices hosting (0_in, 1_in, 0_out, 1_out), in that order.

    Tails at a shared vertex take slots in role order, so the 4-tuple of
    vertices is a complete, slot-quotiented description.
    """

    vertices: tuple[int, int, int, int]

    def __post_init__(self) -> None:
        if len(self.vertices) != N_TAILS:
            raise ValueError("an assignment names exactly four tails")

    @property
    def in0(self) -> int:
        return self.vertices[0]

    @property
    def in1(self) -> int:
        return self.vertices[1]

    @property
    def out0(self) -> int:
        return self.vertices[2]

    @property
    def out1(self) -> int:
        return self.vertices[3]

    def tails(self) -> tuple[tuple[int, int], ...]:
        """(vertex, slot) per role, slots assigned in role order."""
        used: dict[int, int] = {}
        out = []
        for v in self.vertices:
            s = used.get(v, 0)
            out.append((v, s))
            used[v] = s + 1
        return tuple(out)

    def usage(self) -> dict[int, int]:
        counts: dict[int, int] = {}
        for v in self.vertices:
            counts[v] = counts.get(v, 0) + 1
        return counts

    def fits(self, m: TailMultiset) -> bool:
        return all(
            0 <= v < m.n and c <= m.counts[v] for v, c in self.usage().items()
        )


def enumerate_multisets(n: int) -> Iterator[TailMultiset]:
    """All C(n+3, 4) tail multisets on n vertices, deterministic order."""
    for combo in itertools.combinations_with_replacement(range(n), N_TAILS):
        counts = [0] * n
        for v in combo:
            counts[v] += 1
        yield TailMultiset(tuple(counts))


def multiset_count(n: int) -> int:
    """C(n+3, 4): number of tail multisets on n vertices."""
    return (n + 3) * (n + 2) * (n + 1) * n // 24


def enumerate_role_assignments(m: TailMultiset) -> Iterator[PortAssignment]:
    """All slot-quotiented role assignments compatible with a multiset.

    Ordered 4-tuples of host vertices with per-vertex usage bounded by the
    multiset; lexicographic order on the tuples.
    """
    support = m.support()
    for vs in itertools.product(support, repeat=N_TAILS):
        counts: dict[int, int] = {}
        ok = True
        for v in vs:
            c = counts.get(v, 0) + 1
            if c > m.counts[v]:
                ok = False
                break
            counts[v] = c
        if ok:
            yield PortAssignment(vs)


def swap_io(p: PortAssignment) -> PortAssignment:
    """Exchange the input pair with the output pair."""
    a, b, c, d = p.vertices
    return PortAssignment((c, d, a, b))


def swap_labels(p: PortAssignment) -> PortAssignment:
    """Exchange register labels 0 and 1 on both inputs and outputs."""
    a, b, c, d = p.vertices
    return PortAssignment((b, a, d, c))


def canonical_multiset(m: TailMultiset, autos: Sequence[Sequence[int]]) -> tuple[int, ...]:
    """Smallest counts tuple over a set of graph automorphisms.

    Keys tailed configurations up to isomorphism of the graph-plus-tails;
    ``autos`` must contain the identity for the key to be a true orbit
    representative.
    """
    return min(m.permuted(sigma).counts for sigma in autos) if autos else m.counts
