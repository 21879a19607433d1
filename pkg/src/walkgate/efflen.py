"""Effective propagation length of a detected gate.

Each transmission path of a gate carries a length: the momentum derivative
of the transmission phase, Im(t'/t).  The derivative is evaluated two ways:
analytically, by differentiating the reduced linear system (authoritative),
and numerically, with a nine-point central stencil on the unwrapped phase
(cross-check).  A gate only receives a length when every defined path and
every valid stencil value agree within a shared tolerance; disagreement
rejects the candidate, which is a normal outcome, not an error.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np

from .gatekit import DEFAULT_EPS_GATE, QuadraticForm, recognize_quadratic_surd
from .graphset import Graph
from .ports import PortAssignment, TailMultiset
from .scatter import (
    Momentum,
    ScatteringSolution,
    ScatteringSystem,
    build_system,
    incoming_rhs,
    system_matrix,
    system_matrix_k_derivative,
)

DEFAULT_H = 1e-2
DEFAULT_EPS_LEN = 1e-6

# the stencil samples the phase at spacing h; once the phase advances more
# than about a radian per step the samples alias and the stencil is outside
# its validity domain, so only the analytic value is used
STENCIL_PHASE_STEP_LIMIT = 1.0

_STENCIL_WEIGHTS = (4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0)
# sixth-order weights on the inner samples, used as an embedded error
# estimate: when the two orders disagree the truncation error is already
# at the tolerance scale and the stencil value cannot be trusted
_STENCIL_WEIGHTS_LOW = (3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0)

PathKey = tuple[int, int]  # (output register, input register)


class PathUndefinedError(ValueError):
    """Raised when a transmission amplitude is too small to carry a phase."""


@dataclass(frozen=True)
class LengthReport:
    """Lengths of one gate's transmission paths and their consensus.

    ``path_lengths`` holds the analytic value for every defined path
    (transmission above the gate tolerance), keyed by (output register,
    input register); ``stencil_lengths`` holds the numeric cross-check for
    the subset of paths where the stencil is valid.  ``length`` is the
    consensus (mean of analytic values) and ``residual`` the largest spread
    among all values that entered the agreement test.
    """

    path_lengths: tuple[tuple[PathKey, float], ...]
    stencil_lengths: tuple[tuple[PathKey, float], ...]
    length: float
    residual: float
    methods: tuple[str, ...]
    form: QuadraticForm | None

    def path_length(self, key: PathKey) -> float:
        return dict(self.path_lengths)[key]


def analytic_length(
    system: ScatteringSystem,
    solution: ScatteringSolution,
    out_vertex: int,
    eps_gate: float = DEFAULT_EPS_GATE,
) -> float:
    """Im(t'/t) through the derivative of the reduced system.

    Differentiating M psi = b at fixed incoming vertex gives
    M psi' = b' - M' psi, reusing the factorization of M.
    """
    t = solution.psi[out_vertex]
    if abs(t) <= eps_gate:
        raise PathUndefinedError(
            f"transmission to vertex {out_vertex} is below the gate tolerance"
        )
    k = solution.momentum.k
    n = solution.graph.n
    mprime = system_matrix_k_derivative(solution.graph, solution.multiset.counts, k)
    bprime = np.zeros(n, dtype=complex)
    bprime[solution.incoming_vertex] = 2j * math.cos(k)
    psi_prime = system.solve(bprime - mprime @ solution.psi)
    return float((psi_prime[out_vertex] / t).imag)


def stencil_length(
    graph: Graph,
    multiset: TailMultiset,
    k: float,
    in_vertex: int,
    out_vertex: int,
    h: float = DEFAULT_H,
    eps_gate: float = DEFAULT_EPS_GATE,
    eps_len: float = DEFAULT_EPS_LEN,
) -> float | None:
    """Nine-point central derivative of the unwrapped transmission phase.

    Returns None when the stencil is invalid: a node falls outside the open
    momentum band (0, pi), the transmission vanishes at any node, or the
    embedded lower-order derivative disagrees beyond eps_len (the phase is
    then too curved for the step size and the value carries truncation
    error at the tolerance scale).
    """
    if not (k - 4.0 * h > 0.0 and k + 4.0 * h < math.pi):
        return None
    counts = multiset.counts
    phases = []
    for j in range(-4, 5):
        kj = k + j * h
        m = system_matrix(graph, counts, kj)
        try:
            psi = np.linalg.solve(m, incoming_rhs(graph.n, in_vertex, kj))
        except np.linalg.LinAlgError:
            return None
        t = complex(psi[out_vertex])
        if abs(t) <= eps_gate:
            return None
        phases.append(cmath.phase(t))
    unwrapped = np.unwrap(phases)
    deriv = 0.0
    for j, w in enumerate(_STENCIL_WEIGHTS, start=1):
        deriv += w * (unwrapped[4 + j] - unwrapped[4 - j])
    deriv /= h
    low = 0.0
    for j, w in enumerate(_STENCIL_WEIGHTS_LOW, start=1):
        low += w * (unwrapped[4 + j] - unwrapped[4 - j])
    low /= h
    if abs(deriv - low) > eps_len:
        return None
    return deriv


def consensus(
    analytic: Mapping[PathKey, float],
    stencil: Mapping[PathKey, float],
    eps_len: float = DEFAULT_EPS_LEN,
) -> tuple[float, float] | None:
    """Consensus length when every value agrees within eps_len, else None.

    All analytic path values and all valid stencil values enter one shared
    agreement test; the consensus itself is the mean of the analytic
    values.
    """
    if not analytic:
        return None
    values = list(analytic.values()) + list(stencil.values())
    residual = max(values) - min(values)
    if residual > eps_len:
        return None
    mean = sum(analytic.values()) / len(analytic)
    return mean, residual


def length_report(
    graph: Graph,
    multiset: TailMultiset,
    assignment: PortAssignment,
    momentum: Momentum,
    *,
    eps_gate: float = DEFAULT_EPS_GATE,
    eps_len: float = DEFAULT_EPS_LEN,
    h: float = DEFAULT_H,
    use_stencil: bool = True,
    recognize: bool = True,
) -> LengthReport | None:
    """Full length pipeline for one detected gate.

    Runs the analytic derivative on every defined path, cross-checks with
    the stencil wherever the stencil is valid and within its aliasing
    limit, and returns the consensus report, or None when the values
    disagree.
    """
    system = build_system(graph, multiset, momentum)
    solutions: dict[int, ScatteringSolution] = {}
    analytic: dict[PathKey, float] = {}
    numeric: dict[PathKey, float] = {}
    tags: dict[PathKey, str] = {}
    for key, in_v, out_v in _paths(assignment):
        if in_v not in solutions:
            psi = system.solve(incoming_rhs(graph.n, in_v, momentum.k))
            solutions[in_v] = ScatteringSolution(graph, multiset, momentum, in_v, psi)
        sol = solutions[in_v]
        if abs(sol.psi[out_v]) <= eps_gate:
            continue
        value = analytic_length(system, sol, out_v, eps_gate)
        analytic[key] = value
        tags[key] = "analytic"
        if use_stencil and abs(value) * h <= STENCIL_PHASE_STEP_LIMIT:
            sten = stencil_length(
                graph, multiset, momentum.k, in_v, out_v, h, eps_gate, eps_len
            )
            if sten is not None:
                numeric[key] = sten
                tags[key] = "analytic+stencil"
    agreed = consensus(analytic, numeric, eps_len)
    if agreed is None:
        return None
    length, residual = agreed
    ordered = tuple(sorted(analytic.items()))
    report = LengthReport(
        path_lengths=ordered,
        stencil_lengths=tuple(sorted(numeric.items())),
        length=length,
        residual=residual,
        methods=tuple(tags[key] for key, _ in ordered),
        form=None,
    )
    if recognize:
        report = replace(report, form=recognize_quadratic_surd(length))
    return report


def _paths(assignment: PortAssignment) -> list[tuple[PathKey, int, int]]:
    out = []
    for i, out_v in enumerate((assignment.out0, assignment.out1)):
        for j, in_v in enumerate((assignment.in0, assignment.in1)):
            out.append(((i, j), in_v, out_v))
    return out
