"""Gate detection and classification.

A four-tail configuration implements a single-qubit gate at momentum k when
both input tails reflect nothing and do not talk to each other; the 2x2
matrix of transmissions from inputs to outputs is then unitary.  Gates are
classified up to global phase as Bloch-sphere rotations (axis in the upper
hemisphere, angle in (-pi, pi]), and numeric angles and lengths are matched
against small rationals and quadratic surds.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Mapping, Sequence

import mpmath
import numpy as np

from .graphset import Graph
from .ports import PortAssignment, TailMultiset
from .scatter import Momentum, ScatteringSolution

DEFAULT_EPS_GATE = 1e-9
DEFAULT_Q_MAX = 64
DEFAULT_EPS_RAT = 1e-8
DEFAULT_COEFF_BOUND = 2000
DEFAULT_EPS_SURD = 1e-6

# magnitude below which a matrix entry counts as structurally zero when
# picking the phase anchor; unitary 2x2 matrices always have an entry >= 1/sqrt(2)
_ANCHOR_TOL = 1e-6
# tie tolerance for hemisphere / equator decisions on the rotation axis
_AXIS_TIE_TOL = 1e-7

IDENTITY2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass(frozen=True, eq=False)
class GateCandidate:
    """A configuration whose transmissions assemble into a unitary."""

    graph: Graph
    multiset: TailMultiset
    assignment: PortAssignment
    momentum: Momentum
    operator: np.ndarray


@dataclass(frozen=True)
class GateClass:
    """Phase-stripped classification of a 2x2 unitary.

    ``matrix`` is the canonical representative: the input scaled so its
    first entry of appreciable magnitude (reading order) is real positive.
    Rotations carry a Bloch axis (theta from +z, azimuth phi) in the upper
    hemisphere and an angle in (-pi, pi]; ``angle_fraction`` is angle/pi
    when that ratio is a small rational, else None (irrational candidate).
    """

    matrix: tuple[complex, complex, complex, complex]
    kind: str  # "identity" | "rotation"
    theta: float
    phi: float
    angle: float
    angle_fraction: Fraction | None

    def rep(self) -> np.ndarray:
        return np.array(self.matrix, dtype=complex).reshape(2, 2)

    @property
    def is_identity(self) -> bool:
        return self.kind == "identity"


def equal_up_to_phase(u: np.ndarray, v: np.ndarray, eps: float = DEFAULT_EPS_GATE) -> bool:
    """Whether two 2x2 unitaries differ only by a global phase."""
    overlap = abs(np.trace(u.conj().T @ v)) / 2.0
    return 1.0 - overlap <= eps


def canonical_phase(o: np.ndarray) -> np.ndarray:
    """Rotate global phase so the first appreciable entry (reading order)
    is real positive."""
    flat = np.asarray(o, dtype=complex).reshape(4)
    for z in flat:
        if abs(z) > _ANCHOR_TOL:
            return np.asarray(o, dtype=complex) * (z.conjugate() / abs(z))
    raise ValueError("matrix has no entry of appreciable magnitude")


def rotation_matrix(axis: Sequence[float], angle: float) -> np.ndarray:
    """SU(2) rotation cos(a/2) I - i sin(a/2) (n . sigma)."""
    nx, ny, nz = axis
    norm = math.sqrt(nx * nx + ny * ny + nz * nz)
    nx, ny, nz = nx / norm, ny / norm, nz / norm
    c, s = math.cos(angle / 2.0), math.sin(angle / 2.0)
    return c * IDENTITY2 - 1j * s * (nx * PAULI_X + ny * PAULI_Y + nz * PAULI_Z)


def rotation_matrix_polar(theta: float, phi: float, angle: float) -> np.ndarray:
    return rotation_matrix(
        (math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta)),
        angle,
    )


def classify(
    o: np.ndarray,
    eps_gate: float = DEFAULT_EPS_GATE,
    q_max: int = DEFAULT_Q_MAX,
    eps_rat: float = DEFAULT_EPS_RAT,
) -> GateClass:
    """Axis-angle classification of a 2x2 unitary, up to global phase."""
    o = np.asarray(o, dtype=complex)
    rep = canonical_phase(o)
    mat = tuple(rep.reshape(4))
    if equal_up_to_phase(o, IDENTITY2, eps_gate):
        return GateClass(mat, "identity", 0.0, 0.0, 0.0, Fraction(0))

    u = o / cmath.sqrt(complex(np.linalg.det(o)))
    c = float(np.trace(u).real) / 2.0
    vx = -(u[0, 1].imag + u[1, 0].imag) / 2.0
    vy = (u[1, 0].real - u[0, 1].real) / 2.0
    vz = (u[1, 1].imag - u[0, 0].imag) / 2.0
    s = math.sqrt(vx * vx + vy * vy + vz * vz)
    angle = 2.0 * math.atan2(s, c)  # in [0, 2pi)
    nx, ny, nz = vx / s, vy / s, vz / s
    if angle > math.pi:
        angle = 2.0 * math.pi - angle
        nx, ny, nz = -nx, -ny, -nz
    # upper-hemisphere canonical axis; the sign of the angle follows the axis
    flip = False
    if nz < -_AXIS_TIE_TOL:
        flip = True
    elif abs(nz) <= _AXIS_TIE_TOL:
        if ny < -_AXIS_TIE_TOL or (abs(ny) <= _AXIS_TIE_TOL and nx < 0.0):
            flip = True
    if flip:
        nx, ny, nz = -nx, -ny, -nz
        if abs(angle - math.pi) > _AXIS_TIE_TOL:
            angle = -angle
    theta = math.acos(max(-1.0, min(1.0, nz)))
    phi = math.atan2(ny, nx) if theta > _AXIS_TIE_TOL else 0.0
    if phi <= -math.pi + 1e-12:  # azimuth lives in (-pi, pi]
        phi = math.pi
    frac = recognize_rational(angle / math.pi, q_max, eps_rat)
    return GateClass(mat, "rotation", theta, phi, angle, frac)


def detect_gate(
    solutions: Mapping[int, ScatteringSolution],
    assignment: PortAssignment,
    eps_gate: float = DEFAULT_EPS_GATE,
) -> GateCandidate | None:
    """Two-pass gate test for one role assignment.

    First pass: the 0_in wave must not reflect and must not leak onto the
    1_in tail.  Second pass: likewise for 1_in toward 0_in.  The surviving
    transmissions onto the output tails must form a unitary.
    """
    a, b = assignment.in0, assignment.in1
    sol_a = solutions[a]
    if abs(sol_a.r) > eps_gate or abs(sol_a.t(b)) > eps_gate:
        # with a == b the leak test reads the on-site amplitude (~1), so a
        # shared input vertex can never pass, as it must not
        return None
    sol_b = solutions[b]
    if abs(sol_b.r) > eps_gate or abs(sol_b.t(a)) > eps_gate:
        return None
    c, d = assignment.out0, assignment.out1
    # columns are indexed by input register: O[i][j] = t(out_i <- in_j)
    op = np.array(
        [[sol_a.t(c), sol_b.t(c)], [sol_a.t(d), sol_b.t(d)]], dtype=complex
    )
    dev = np.abs(op.conj().T @ op - IDENTITY2).max()
    if dev > eps_gate:
        return None
    first = next(iter(solutions.values()))
    return GateCandidate(
        first.graph, first.multiset, assignment, first.momentum, op
    )


def gates_from_transfer(
    t: np.ndarray,
    multiset: TailMultiset,
    eps_gate: float = DEFAULT_EPS_GATE,
) -> Iterator[tuple[PortAssignment, np.ndarray]]:
    """All passing role assignments read off one transfer matrix.

    Equivalent to running :func:`detect_gate` over every role assignment,
    using reciprocity (T is symmetric) to test each unordered input pair
    once.  Both input tails reflect nothing iff T[v, v] == 1, and they are
    mutually dark iff T[a, b] == 0; two inputs sharing a vertex can never
    satisfy both conditions at once, so only distinct-vertex pairs are
    scanned.
    """
    counts = multiset.counts
    support = multiset.support()
    good = [v for v in support if abs(t[v, v] - 1.0) <= eps_gate]
    for ia in range(len(good)):
        a = good[ia]
        for ib in range(ia + 1, len(good)):
            b = good[ib]
            if abs(t[a, b]) > eps_gate:
                continue
            rem: list[int] = []
            for v in support:
                rem.extend([v] * (counts[v] - (v == a) - (v == b)))
            c, d = rem
            if c == d:
                continue
            op = np.array([[t[c, a], t[c, b]], [t[d, a], t[d, b]]], dtype=complex)
            if np.abs(op.conj().T @ op - IDENTITY2).max() > eps_gate:
                continue
            yield PortAssignment((a, b, c, d)), op
            yield PortAssignment((a, b, d, c)), op[::-1].copy()
            yield PortAssignment((b, a, c, d)), op[:, ::-1].copy()
            yield PortAssignment((b, a, d, c)), op[::-1, ::-1].copy()


# ---------------------------------------------------------------------------
# Closed-form recognition
# ---------------------------------------------------------------------------


def recognize_rational(
    x: float,
    q_max: int = DEFAULT_Q_MAX,
    eps: float = DEFAULT_EPS_RAT,
) -> Fraction | None:
    """Smallest-denominator rational p/q, q <= q_max, within eps of x.

    With q_max**2 << 1/(2 eps), at most one such rational exists, so the
    best bounded-denominator approximant suffices.
    """
    frac = Fraction(x).limit_denominator(q_max)
    return frac if abs(x - float(frac)) <= eps else None


@dataclass(frozen=True)
class QuadraticForm:
    """Root of A x^2 + B x + C = 0 presented as a + b sqrt(d).

    Integer coefficients are primitive with a sign convention (A > 0, or
    B > 0 when A == 0); rational values have b == 0 and d == 1.
    """

    coeffs: tuple[int, int, int]
    a: Fraction
    b: Fraction
    d: int

    @property
    def is_rational(self) -> bool:
        return self.b == 0

    def value(self) -> float:
        return float(self.a) + float(self.b) * math.sqrt(self.d)

    def label(self) -> str:
        if self.is_rational:
            return str(self.a)
        b = f"{self.b}" if self.b != 1 else ""
        if self.b == -1:
            b = "-"
        root = f"{b}√{self.d}"
        if self.a == 0:
            return root
        return f"{self.a}+{root}" if self.b > 0 else f"{self.a}{root}"


def _squarefree_split(n: int) -> tuple[int, int]:
    """n = f*f * d with d squarefree; returns (f, d)."""
    f, d, p = 1, 1, 2
    while p * p <= n:
        while n % (p * p) == 0:
            n //= p * p
            f *= p
        if n % p == 0:
            n //= p
            d *= p
        p += 1
    return f, d * n


def recognize_quadratic_surd(
    x: float,
    coeff_bound: int = DEFAULT_COEFF_BOUND,
    eps: float = DEFAULT_EPS_SURD,
) -> QuadraticForm | None:
    """Smallest integer relation A x^2 + B x + C = 0 with |A|,|B|,|C|
    bounded, verified against eps; rationals come back with A = 0."""
    # linear relation first: q x - p == 0
    frac = Fraction(x).limit_denominator(coeff_bound)
    if abs(frac.denominator * x - frac.numerator) <= eps:
        return QuadraticForm(
            (0, frac.denominator, -frac.numerator), frac, Fraction(0), 1
        )
    with mpmath.workdps(30):
        rel = mpmath.pslq(
            [mpmath.mpf(1), mpmath.mpf(x), mpmath.mpf(x) ** 2],
            tol=mpmath.mpf(10) ** -10,
            maxcoeff=coeff_bound,
            maxsteps=2000,
        )
    if rel is None:
        return None
    cc, bb, aa = (int(v) for v in rel)
    if aa == 0:
        return None  # a linear relation good enough would have been caught
    g = math.gcd(math.gcd(abs(aa), abs(bb)), abs(cc))
    aa, bb, cc = aa // g, bb // g, cc // g
    if aa < 0:
        aa, bb, cc = -aa, -bb, -cc
    if max(abs(aa), abs(bb), abs(cc)) > coeff_bound:
        return None
    if abs(aa * x * x + bb * x + cc) > eps:
        return None
    disc = bb * bb - 4 * aa * cc
    if disc < 0:
        return None
    f, d = _squarefree_split(disc)
    a = Fraction(-bb, 2 * aa)
    b = Fraction(f, 2 * aa)
    if d == 1:
        # rational root reached through the quadratic route
        root = a + b if abs(float(a + b) - x) < abs(float(a - b) - x) else a - b
        return QuadraticForm((aa, bb, cc), root, Fraction(0), 1)
    if abs(float(a) + float(b) * math.sqrt(d) - x) > abs(float(a) - float(b) * math.sqrt(d) - x):
        b = -b
    return QuadraticForm((aa, bb, cc), a, b, d)
