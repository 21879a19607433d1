"""Tail multiset and role assignment enumeration."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from walkgate import ports


class TestTailMultiset:
    def test_validation(self):
        with pytest.raises(ValueError):
            ports.TailMultiset((1, 1, 1))
        with pytest.raises(ValueError):
            ports.TailMultiset((5, -1))
        ports.TailMultiset((4,))

    def test_support_and_tails(self):
        m = ports.TailMultiset((2, 0, 1, 1))
        assert m.support() == (0, 2, 3)
        assert m.tails() == ((0, 0), (0, 1), (2, 0), (3, 0))

    def test_permuted(self):
        m = ports.TailMultiset((2, 1, 1))
        assert m.permuted((2, 0, 1)).counts == (1, 1, 2)


class TestEnumerateMultisets:
    def test_counts_match_stars_and_bars(self):
        for n in range(1, 10):
            got = list(ports.enumerate_multisets(n))
            want = math.comb(n + 3, 4)
            assert len(got) == want == ports.multiset_count(n)
            assert len(set(got)) == len(got)

    def test_single_vertex(self):
        assert list(ports.enumerate_multisets(1)) == [ports.TailMultiset((4,))]

    def test_deterministic_order(self):
        assert list(ports.enumerate_multisets(5)) == list(ports.enumerate_multisets(5))


class TestRoleAssignments:
    def count(self, counts):
        return sum(1 for _ in ports.enumerate_role_assignments(ports.TailMultiset(counts)))

    def test_reference_counts(self):
        # all tails distinct: 4! orderings
        assert self.count((1, 1, 1, 1)) == 24
        # all four on one vertex: single quotient class
        assert self.count((4,)) == 1
        # two pairs: 4!/(2!*2!)
        assert self.count((2, 2)) == 6
        assert self.count((2, 1, 1)) == 12
        assert self.count((3, 1)) == 4

    def test_assignments_fit_multiset(self):
        m = ports.TailMultiset((2, 1, 0, 1))
        got = list(ports.enumerate_role_assignments(m))
        assert len(got) == len(set(got))
        for p in got:
            assert p.fits(m)

    def test_slots_in_role_order(self):
        p = ports.PortAssignment((3, 0, 3, 1))
        assert p.tails() == ((3, 0), (0, 0), (3, 1), (1, 0))
        assert (p.in0, p.in1, p.out0, p.out1) == (3, 0, 3, 1)

    @given(st.integers(min_value=1, max_value=6))
    @settings(max_examples=20, deadline=None)
    def test_quotient_count_property(self, n):
        # summing multinomial quotients over all multisets equals n^4
        total = sum(
            sum(1 for _ in ports.enumerate_role_assignments(m))
            for m in ports.enumerate_multisets(n)
        )
        assert total == n**4


class TestSwaps:
    def test_swap_io(self):
        p = ports.PortAssignment((0, 1, 2, 3))
        assert ports.swap_io(p).vertices == (2, 3, 0, 1)
        assert ports.swap_io(ports.swap_io(p)) == p

    def test_swap_labels(self):
        p = ports.PortAssignment((0, 1, 2, 3))
        assert ports.swap_labels(p).vertices == (1, 0, 3, 2)
        assert ports.swap_labels(ports.swap_labels(p)) == p

    def test_swaps_commute(self):
        p = ports.PortAssignment((5, 2, 2, 0))
        assert ports.swap_io(ports.swap_labels(p)) == ports.swap_labels(ports.swap_io(p))


class TestCanonicalMultiset:
    def test_orbit_representative(self):
        m = ports.TailMultiset((0, 4))
        swap = [(1, 0), (0, 1)]
        assert ports.canonical_multiset(m, swap) == (0, 4)
        assert ports.canonical_multiset(ports.TailMultiset((4, 0)), swap) == (0, 4)

    def test_identity_only(self):
        m = ports.TailMultiset((1, 3))
        assert ports.canonical_multiset(m, [(0, 1)]) == (1, 3)
