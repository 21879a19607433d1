"""Simple graphs on up to a dozen vertices: bit-packed adjacency, graph6
codec, canonical labelling, and enumeration of isomorphism classes.

Vertex pairs (i, j) with i < j are indexed column-major (bit j*(j-1)//2 + i),
the same order the graph6 format serialises, so codec and canonical keys
share one bit layout.  Canonical labelling uses iterative partition
refinement with individualization and backtracking; discovered
automorphisms prune equivalent branches, which keeps even the fully
symmetric graphs cheap at this scale.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

MAX_VERTICES = 12

# A canonical key is bytes([n]) followed by the canonically relabelled
# upper-triangle bits packed MSB-first; byte-wise order sorts by
# (vertex count, canonical adjacency string).
CanonicalKey = bytes


class Graph6Error(ValueError):
    """Raised for malformed graph6 text."""


def pair_index(i: int, j: int) -> int:
    """Bit position of the unordered pair (i, j) in column-major order."""
    if i == j:
        raise ValueError("self-loops are not representable")
    if i > j:
        i, j = j, i
    return j * (j - 1) // 2 + i


@dataclass(frozen=True)
class Graph:
    """Immutable simple graph on vertices 0..n-1.

    ``bits`` holds the upper triangle of the adjacency matrix, one bit per
    vertex pair at position :func:`pair_index`.
    """

    n: int
    bits: int = 0

    def __post_init__(self) -> None:
        if not 1 <= self.n <= MAX_VERTICES:
            raise ValueError(f"vertex count {self.n} outside 1..{MAX_VERTICES}")
        nbits = self.n * (self.n - 1) // 2
        if not 0 <= self.bits < (1 << nbits):
            raise ValueError("adjacency bits out of range for vertex count")

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "Graph":
        bits = 0
        for i, j in edges:
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"edge ({i}, {j}) outside vertex range")
            bits |= 1 << pair_index(i, j)
        return cls(n, bits)

    def has_edge(self, i: int, j: int) -> bool:
        return bool(self.bits >> pair_index(i, j) & 1)

    def edges(self) -> list[tuple[int, int]]:
        return [
            (i, j)
            for j in range(1, self.n)
            for i in range(j)
            if self.bits >> pair_index(i, j) & 1
        ]

    @property
    def edge_count(self) -> int:
        return self.bits.bit_count()

    @functools.cached_property
    def neighbor_masks(self) -> tuple[int, ...]:
        """Per-vertex neighbour bitmasks."""
        masks = [0] * self.n
        bits = self.bits
        for j in range(1, self.n):
            for i in range(j):
                if bits >> pair_index(i, j) & 1:
                    masks[i] |= 1 << j
                    masks[j] |= 1 << i
        return tuple(masks)

    def degree(self, v: int) -> int:
        return self.neighbor_masks[v].bit_count()

    def degree_sequence(self) -> tuple[int, ...]:
        return tuple(sorted(m.bit_count() for m in self.neighbor_masks))

    def relabel(self, perm: Sequence[int]) -> "Graph":
        """Image of the graph under vertex map v -> perm[v]."""
        if sorted(perm) != list(range(self.n)):
            raise ValueError("perm is not a permutation of the vertex set")
        bits = 0
        for i, j in self.edges():
            bits |= 1 << pair_index(perm[i], perm[j])
        return Graph(self.n, bits)


# ---------------------------------------------------------------------------
# graph6 codec
# ---------------------------------------------------------------------------


def graph6_encode(g: Graph) -> str:
    """Encode a graph as a graph6 line (without the trailing newline)."""
    out = [chr(63 + g.n)]
    nbits = g.n * (g.n - 1) // 2
    bits = g.bits
    for start in range(0, nbits, 6):
        val = 0
        for t in range(start, start + 6):
            val = (val << 1) | (bits >> t & 1 if t < nbits else 0)
        out.append(chr(63 + val))
    return "".join(out)


def graph6_decode(line: str) -> Graph:
    """Decode one graph6 line; raises :class:`Graph6Error` on bad input."""
    s = line.rstrip("\n")
    if not s:
        raise Graph6Error("empty graph6 line")
    codes = [ord(c) for c in s]
    if any(c < 63 or c > 126 for c in codes):
        raise Graph6Error(f"byte outside graph6 range in {s!r}")
    if codes[0] == 126:
        raise Graph6Error("multi-byte vertex counts (n > 62) are unsupported")
    n = codes[0] - 63
    if n < 1:
        raise Graph6Error("vertex count must be at least 1")
    if n > MAX_VERTICES:
        raise Graph6Error(f"vertex count {n} exceeds supported maximum {MAX_VERTICES}")
    nbits = n * (n - 1) // 2
    ngroups = (nbits + 5) // 6
    if len(codes) - 1 != ngroups:
        raise Graph6Error(
            f"expected {ngroups} payload bytes for n={n}, got {len(codes) - 1}"
        )
    bits = 0
    for gidx, c in enumerate(codes[1:]):
        val = c - 63
        for off in range(6):
            t = 6 * gidx + off
            bit = val >> (5 - off) & 1
            if t < nbits:
                bits |= bit << t
            elif bit:
                raise Graph6Error("nonzero padding bits")
    return Graph(n, bits)


def iter_graph6(lines: Iterable[str]) -> Iterator[Graph]:
    """Decode an iterable of graph6 lines, skipping blanks and the
    optional ``>>graph6<<`` header."""
    for line in lines:
        s = line.strip()
        if s.startswith(">>graph6<<"):
            s = s[len(">>graph6<<"):]
        if s:
            yield graph6_decode(s)


# ---------------------------------------------------------------------------
# Canonical labelling
# ---------------------------------------------------------------------------


def _refine(nbrs: Sequence[int], cells: list[list[int]], queue: list[int], n: int) -> list[list[int]]:
    """Equitable refinement of an ordered partition.

    ``queue`` holds splitter masks still to process; sub-cells created by a
    split are ordered by ascending neighbour count, which keeps the result
    a function of the graph alone.
    """
    qi = 0
    while qi < len(queue) and len(cells) < n:
        smask = queue[qi]
        qi += 1
        i = 0
        while i < len(cells):
            cell = cells[i]
            if len(cell) > 1:
                c0 = (nbrs[cell[0]] & smask).bit_count()
                for v in cell:
                    if (nbrs[v] & smask).bit_count() != c0:
                        break
                else:
                    i += 1
                    continue
                buckets: dict[int, list[int]] = {}
                for v in cell:
                    buckets.setdefault((nbrs[v] & smask).bit_count(), []).append(v)
                subs = [buckets[c] for c in sorted(buckets)]
                cells[i : i + 1] = subs
                for sub in subs:
                    m = 0
                    for v in sub:
                        m |= 1 << v
                    queue.append(m)
                i += len(subs)
            else:
                i += 1
    return cells


def _canonical_search(
    n: int,
    nbrs: Sequence[int],
    orbit_prune: bool = True,
    max_autos: int = 96,
):
    """Minimum adjacency bit-string over admissible vertex orderings.

    Returns ``(string_bits, perm, autos)``: the canonical upper-triangle
    string as an int (first pair in the most significant bit), one ordering
    achieving it (position -> original vertex), and the automorphisms
    discovered en route.  With ``orbit_prune`` off the search visits every
    optimal leaf, so ``autos`` is the full automorphism group.
    """
    nbits = n * (n - 1) // 2
    if n == 1:
        return 0, (0,), []

    best_bits: int | None = None
    best_perm: tuple[int, ...] | None = None
    autos: list[tuple[int, ...]] = []
    auto_seen: set[tuple[int, ...]] = set()

    def record_auto(leaf_perm: Sequence[int]) -> None:
        if max_autos is not None and len(autos) >= max_autos:
            return
        sigma = [0] * n
        inv = [0] * n
        for pos in range(n):
            a, b = leaf_perm[pos], best_perm[pos]
            sigma[a] = b
            inv[b] = a
        for p in (tuple(sigma), tuple(inv)):
            if p not in auto_seen:
                auto_seen.add(p)
                autos.append(p)

    def node(cells: list[list[int]], path: tuple[int, ...]) -> None:
        nonlocal best_bits, best_perm
        placed: list[int] = []
        for cell in cells:
            if len(cell) != 1:
                break
            placed.append(cell[0])
        p = len(placed)
        pref = 0
        for j in range(1, p):
            nb = nbrs[placed[j]]
            for i in range(j):
                pref = pref << 1 | (nb >> placed[i] & 1)
        if best_bits is not None:
            pref_nb = p * (p - 1) // 2
            if pref_nb and pref > best_bits >> (nbits - pref_nb):
                return
        if p == n:
            perm = tuple(placed)
            if best_bits is None or pref < best_bits:
                best_bits, best_perm = pref, perm
            elif pref == best_bits and perm != best_perm:
                record_auto(perm)
            return
        target = cells[p]
        tried: list[int] = []
        for v in target:
            if orbit_prune and tried and autos:
                skip = False
                for sigma in autos:
                    ok = True
                    for u in path:
                        if sigma[u] != u:
                            ok = False
                            break
                    if ok and sigma[v] in tried:
                        skip = True
                        break
                if skip:
                    continue
            rest = [u for u in target if u != v]
            child = cells[:p] + [[v], rest] + cells[p + 1 :]
            if not rest:
                del child[p + 1]
            seeds = [1 << v]
            if rest:
                m = 0
                for u in rest:
                    m |= 1 << u
                seeds.append(m)
            _refine(nbrs, child, seeds, n)
            node(child, path + (v,))
            tried.append(v)

    root = [list(range(n))]
    full = (1 << n) - 1
    _refine(nbrs, root, [full], n)
    node(root, ())
    return best_bits, best_perm, autos


def _string_to_mask(n: int, string_bits: int) -> int:
    """Convert an MSB-first adjacency string to :class:`Graph` bit layout."""
    nbits = n * (n - 1) // 2
    mask = 0
    for t in range(nbits):
        if string_bits >> (nbits - 1 - t) & 1:
            mask |= 1 << t
    return mask


def _mask_to_string(n: int, mask: int) -> int:
    nbits = n * (n - 1) // 2
    s = 0
    for t in range(nbits):
        s = s << 1 | (mask >> t & 1)
    return s


def canonical_key(g: Graph) -> CanonicalKey:
    """Isomorphism-invariant key; equal keys iff graphs are isomorphic."""
    string_bits, _, _ = _canonical_search(g.n, g.neighbor_masks)
    nbytes = (g.n * (g.n - 1) // 2 + 7) // 8
    return bytes([g.n]) + string_bits.to_bytes(nbytes, "big")


def canonical_form(g: Graph) -> tuple[Graph, tuple[int, ...]]:
    """Canonically relabelled copy plus the ordering that produced it.

    The returned permutation maps canonical position -> original vertex.
    """
    string_bits, perm, _ = _canonical_search(g.n, g.neighbor_masks)
    return Graph(g.n, _string_to_mask(g.n, string_bits)), perm


def automorphisms(g: Graph) -> list[tuple[int, ...]]:
    """Full automorphism group as permutation tuples (v -> sigma[v]).

    Exhaustive over optimal leaves of the canonical search; intended for
    small graphs (cost grows with the group order).
    """
    _, _, autos = _canonical_search(
        g.n, g.neighbor_masks, orbit_prune=False, max_autos=None
    )
    ident = tuple(range(g.n))
    group = {ident}
    group.update(autos)
    return sorted(group)


# ---------------------------------------------------------------------------
# Enumeration of isomorphism classes
# ---------------------------------------------------------------------------


def _apply_perm_to_mask(mask: int, perm: Sequence[int]) -> int:
    out = 0
    while mask:
        low = mask & -mask
        out |= 1 << perm[low.bit_length() - 1]
        mask ^= low
    return out


def _subset_reps(m: int, gens: Sequence[Sequence[int]]) -> list[int]:
    """One representative per orbit of vertex subsets under ``gens``."""
    total = 1 << m
    if not gens:
        return list(range(total))
    seen = bytearray(total)
    reps = []
    for s in range(total):
        if seen[s]:
            continue
        reps.append(s)
        seen[s] = 1
        stack = [s]
        while stack:
            cur = stack.pop()
            for g in gens:
                img = _apply_perm_to_mask(cur, g)
                if not seen[img]:
                    seen[img] = 1
                    stack.append(img)
    return reps


@functools.lru_cache(maxsize=None)
def _class_masks(n: int) -> tuple[int, ...]:
    """Adjacency masks of all isomorphism classes on n vertices, sorted by
    canonical string."""
    if n == 1:
        return (0,)
    m = n - 1
    seen: set[int] = set()
    for pmask in _class_masks(m):
        parent = Graph(m, pmask)
        nbrs = parent.neighbor_masks
        _, _, gens = _canonical_search(m, nbrs)
        for smask in _subset_reps(m, gens):
            child_nbrs = [
                nb | (smask >> v & 1) << m for v, nb in enumerate(nbrs)
            ]
            child_nbrs.append(smask)
            string_bits, _, _ = _canonical_search(n, child_nbrs)
            seen.add(string_bits)
    return tuple(_string_to_mask(n, s) for s in sorted(seen))


def enumerate_graphs(n: int) -> Iterator[Graph]:
    """All isomorphism classes of simple graphs on n vertices, canonically
    labelled, in canonical-key order."""
    if not 1 <= n <= MAX_VERTICES:
        raise ValueError(f"vertex count {n} outside 1..{MAX_VERTICES}")
    for mask in _class_masks(n):
        yield Graph(n, mask)


def graph_class_count(n: int) -> int:
    """Number of isomorphism classes on n vertices."""
    return len(_class_masks(n))
