"""Graph storage, canonical labelling, enumeration, and graph6 codec."""

import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from walkgate import graphset as gs

# Isomorphism class counts.  n <= 5 are re-derived in-test by the
# brute-force oracle below; 6..9 were derived once with the same oracle
# (n=6) and cross-checked against published tabulations.
CLASS_COUNTS = {1: 1, 2: 2, 3: 4, 4: 11, 5: 34, 6: 156, 7: 1044, 8: 12346, 9: 274668}


def brute_force_classes(n):
    """Oracle: orbit count of labelled graphs under the symmetric group."""
    nbits = n * (n - 1) // 2
    perms = list(itertools.permutations(range(n)))
    seen = set()
    classes = 0
    for bits in range(1 << nbits):
        if bits in seen:
            continue
        classes += 1
        g = gs.Graph(n, bits)
        for p in perms:
            seen.add(g.relabel(p).bits)
    return classes


def random_graph(rng, n):
    nbits = n * (n - 1) // 2
    return gs.Graph(n, rng.getrandbits(nbits))


class TestGraph:
    def test_from_edges_roundtrip(self):
        edges = [(0, 1), (1, 2), (0, 3)]
        g = gs.Graph.from_edges(4, edges)
        assert g.edges() == sorted(edges, key=lambda e: gs.pair_index(*e))
        assert g.edge_count == 3
        assert g.has_edge(0, 1) and g.has_edge(1, 0)
        assert not g.has_edge(2, 3)

    def test_neighbor_masks_and_degrees(self):
        g = gs.Graph.from_edges(4, [(0, 1), (1, 2), (1, 3)])
        assert g.neighbor_masks == (0b0010, 0b1101, 0b0010, 0b0010)
        assert g.degree_sequence() == (1, 1, 1, 3)

    def test_validation(self):
        with pytest.raises(ValueError):
            gs.Graph(0, 0)
        with pytest.raises(ValueError):
            gs.Graph(gs.MAX_VERTICES + 1, 0)
        with pytest.raises(ValueError):
            gs.Graph(3, 1 << 3)
        with pytest.raises(ValueError):
            gs.Graph.from_edges(3, [(0, 3)])
        with pytest.raises(ValueError):
            gs.pair_index(2, 2)

    def test_relabel_identity_and_involution(self):
        g = gs.Graph.from_edges(5, [(0, 1), (1, 2), (3, 4)])
        assert g.relabel(range(5)) == g
        p = (4, 3, 2, 1, 0)
        assert g.relabel(p).relabel(p) == g


class TestGraph6:
    def test_reference_vectors(self):
        assert gs.graph6_encode(gs.Graph(1, 0)) == "@"
        k4 = gs.Graph.from_edges(4, itertools.combinations(range(4), 2))
        assert gs.graph6_encode(k4) == "C~"
        assert gs.graph6_decode("@") == gs.Graph(1, 0)
        assert gs.graph6_decode("C~") == k4

    def test_roundtrip_all_n5(self):
        for g in gs.enumerate_graphs(5):
            assert gs.graph6_decode(gs.graph6_encode(g)) == g

    def test_roundtrip_random(self):
        rng = random.Random(7)
        for _ in range(300):
            g = random_graph(rng, rng.randint(1, 12))
            assert gs.graph6_decode(gs.graph6_encode(g)) == g

    def test_malformed_inputs(self):
        for bad in ["", " ", "\x1f", "C", "C~~", chr(63 + 70), "~~~"]:
            with pytest.raises(gs.Graph6Error):
                gs.graph6_decode(bad)
        # nonzero padding bits: n=2 has one adjacency bit, five pad bits
        with pytest.raises(gs.Graph6Error):
            gs.graph6_decode("A" + chr(63 + 1))

    def test_iter_graph6_skips_header_and_blanks(self):
        text = [">>graph6<<@\n", "\n", "C~\n"]
        gotten = list(gs.iter_graph6(text))
        assert [g.n for g in gotten] == [1, 4]


class TestCanonical:
    def test_key_equal_iff_isomorphic_n4(self):
        # exhaustive: keys partition all labelled 4-vertex graphs into 11 classes
        keys = {gs.canonical_key(gs.Graph(4, b)) for b in range(1 << 6)}
        assert len(keys) == 11

    def test_key_invariant_under_relabelling_exhaustive(self):
        for n in range(2, 6):
            for g in gs.enumerate_graphs(n):
                key = gs.canonical_key(g)
                for p in itertools.permutations(range(n)):
                    assert gs.canonical_key(g.relabel(p)) == key

    def test_key_invariant_sampled_larger(self):
        rng = random.Random(11)
        for _ in range(60):
            n = rng.randint(6, 9)
            g = random_graph(rng, n)
            key = gs.canonical_key(g)
            for _ in range(6):
                p = list(range(n))
                rng.shuffle(p)
                assert gs.canonical_key(g.relabel(p)) == key

    def test_keys_distinct_across_classes_n5(self):
        keys = [gs.canonical_key(g) for g in gs.enumerate_graphs(5)]
        assert len(set(keys)) == len(keys) == 34

    def test_canonical_form_is_isomorphic_fixed_point(self):
        rng = random.Random(3)
        for _ in range(40):
            g = random_graph(rng, rng.randint(2, 8))
            cg, perm = gs.canonical_form(g)
            # perm maps canonical position -> original vertex
            inv = [0] * g.n
            for pos, v in enumerate(perm):
                inv[v] = pos
            assert g.relabel(inv) == cg
            assert gs.canonical_key(cg) == gs.canonical_key(g)
            cg2, _ = gs.canonical_form(cg)
            assert cg2 == cg

    @given(st.integers(min_value=2, max_value=7), st.randoms(use_true_random=False))
    @settings(max_examples=60, deadline=None)
    def test_key_invariance_property(self, n, rng):
        g = random_graph(rng, n)
        p = list(range(n))
        rng.shuffle(p)
        assert gs.canonical_key(g.relabel(p)) == gs.canonical_key(g)


class TestAutomorphisms:
    def test_known_groups(self):
        k4 = gs.Graph.from_edges(4, itertools.combinations(range(4), 2))
        c5 = gs.Graph.from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)])
        p4 = gs.Graph.from_edges(4, [(0, 1), (1, 2), (2, 3)])
        k33 = gs.Graph.from_edges(6, [(i, j) for i in range(3) for j in range(3, 6)])
        empty5 = gs.Graph(5, 0)
        for g, order in [(k4, 24), (c5, 10), (p4, 2), (k33, 72), (empty5, 120)]:
            autos = gs.automorphisms(g)
            assert len(autos) == order
            for sigma in autos:
                assert g.relabel(sigma) == g

    def test_closure_under_composition(self):
        g = gs.Graph.from_edges(6, [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)])
        autos = set(gs.automorphisms(g))
        assert len(autos) == 72  # two triangles: (3!)^2 * 2
        sample = sorted(autos)[:12]
        for a in sample:
            for b in sample:
                comp = tuple(a[b[v]] for v in range(6))
                assert comp in autos


class TestEnumeration:
    def test_class_counts_small_against_oracle(self):
        for n in range(1, 6):
            assert gs.graph_class_count(n) == brute_force_classes(n)

    def test_class_counts_frozen(self):
        for n in range(1, 8):
            assert gs.graph_class_count(n) == CLASS_COUNTS[n]

    def test_deterministic_order_and_canonical_labels(self):
        first = list(gs.enumerate_graphs(6))
        second = list(gs.enumerate_graphs(6))
        assert first == second
        keys = [gs.canonical_key(g) for g in first]
        assert keys == sorted(keys)
        for g in first[:40]:
            cg, _ = gs.canonical_form(g)
            assert cg == g

    def test_pairwise_nonisomorphic_n6(self):
        keys = {gs.canonical_key(g) for g in gs.enumerate_graphs(6)}
        assert len(keys) == 156

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            list(gs.enumerate_graphs(0))
        with pytest.raises(ValueError):
            list(gs.enumerate_graphs(13))
