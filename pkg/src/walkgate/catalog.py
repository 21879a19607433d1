"""Gate catalog: deduplication, multiplicities, pairing, and reports.

Accepted gates stream in as (momentum, class, length) records and collapse
into catalog entries keyed by momentum, gate class up to global phase, and
length class.  Length classes compare by recognized closed form when both
sides have one, else numerically, so tolerance-level drift cannot split one
physical class across shards.

Every entry's numeric payload (matrix, axis, angle, length) is the one
computed from its canonical witness: the realization minimal in
(n, graph6, tail counts, port tuple) order.  That witness is simultaneously
the minimal-n witness (with a deterministic tie-break) and is independent
of how the configuration stream was partitioned, which is what makes shard
merging associative and commutative down to the byte level.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, TextIO

import numpy as np

from .gatekit import GateClass, QuadraticForm, equal_up_to_phase
from .ports import PortAssignment, TailMultiset
from .scatter import Momentum

DEFAULT_EPS_CLASS = 1e-9
DEFAULT_EPS_LEN = 1e-6

_BUCKET = 1e6  # angle quantum for the lookup index; matches are re-verified

ConfigKey = tuple[str, tuple[int, ...]]  # (graph6, tail counts)


@dataclass(frozen=True, order=True)
class Witness:
    """One concrete realization of an entry, ordered canonically."""

    n: int
    graph6: str
    counts: tuple[int, ...]
    vertices: tuple[int, int, int, int]

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "graph6": self.graph6,
            "counts": list(self.counts),
            "vertices": list(self.vertices),
        }

    @classmethod
    def from_json(cls, data: dict) -> "Witness":
        return cls(
            int(data["n"]),
            data["graph6"],
            tuple(data["counts"]),
            tuple(data["vertices"]),
        )

    @property
    def multiset(self) -> TailMultiset:
        return TailMultiset(self.counts)

    @property
    def assignment(self) -> PortAssignment:
        return PortAssignment(self.vertices)


@dataclass
class CatalogEntry:
    """One distinct (momentum, gate class, length class) with bookkeeping.

    ``multiplicity`` counts accepted candidates (individual role
    assignments), while ``config_multiplicity`` counts attachment
    configurations (graph, tails); both counting conventions stay
    available.  ``first_configs`` holds every configuration that realizes
    the entry on its minimal vertex count.
    """

    momentum: Momentum
    gate: GateClass
    length: float
    residual: float
    form: QuadraticForm | None
    witness: Witness
    multiplicity: int = 1
    config_multiplicity: int = 1
    first_configs: frozenset[ConfigKey] = frozenset()
    entry_id: int = -1
    _last_config: tuple | None = field(default=None, repr=False, compare=False)

    @property
    def min_n(self) -> int:
        return self.witness.n

    @property
    def is_identity(self) -> bool:
        return self.gate.is_identity

    def to_json(self) -> dict:
        mat = np.asarray(self.gate.rep()).ravel()
        return {
            "id": self.entry_id,
            "momentum": self.momentum.label(),
            "matrix": [x for z in mat for x in (float(z.real), float(z.imag))],
            "kind": self.gate.kind,
            "theta": self.gate.theta,
            "phi": self.gate.phi,
            "angle": self.gate.angle,
            "angle_form": _fraction_json(self.gate.angle_fraction),
            "length": self.length,
            "length_residual": self.residual,
            "length_form": _form_json(self.form),
            "multiplicity": self.multiplicity,
            "config_multiplicity": self.config_multiplicity,
            "witness": self.witness.to_json(),
            "min_n": self.min_n,
            "first_configs": sorted(
                [g6, list(counts)] for g6, counts in self.first_configs
            ),
        }

    @classmethod
    def from_json(cls, data: dict) -> "CatalogEntry":
        reals = data["matrix"]
        mat = tuple(complex(reals[2 * i], reals[2 * i + 1]) for i in range(4))
        gate = GateClass(
            mat,
            data["kind"],
            float(data["theta"]),
            float(data["phi"]),
            float(data["angle"]),
            _fraction_from_json(data["angle_form"]),
        )
        entry = cls(
            momentum=Momentum.parse(data["momentum"]),
            gate=gate,
            length=float(data["length"]),
            residual=float(data["length_residual"]),
            form=_form_from_json(data["length_form"]),
            witness=Witness.from_json(data["witness"]),
            multiplicity=int(data["multiplicity"]),
            config_multiplicity=int(data["config_multiplicity"]),
            first_configs=frozenset(
                (g6, tuple(counts)) for g6, counts in data["first_configs"]
            ),
            entry_id=int(data.get("id", -1)),
        )
        return entry


def _fraction_json(frac: Fraction | None) -> str | None:
    return None if frac is None else f"{frac.numerator}/{frac.denominator}"


def _fraction_from_json(text: str | None) -> Fraction | None:
    return None if text is None else Fraction(text)


def _form_json(form: QuadraticForm | None) -> dict | None:
    if form is None:
        return None
    return {
        "coeffs": list(form.coeffs),
        "a": _fraction_json(form.a),
        "b": _fraction_json(form.b),
        "d": form.d,
        "label": form.label(),
    }


def _form_from_json(data: dict | None) -> QuadraticForm | None:
    if data is None:
        return None
    return QuadraticForm(
        tuple(data["coeffs"]),
        Fraction(data["a"]),
        Fraction(data["b"]),
        int(data["d"]),
    )


def same_length_class(
    value_a: float,
    form_a: QuadraticForm | None,
    value_b: float,
    form_b: QuadraticForm | None,
    eps_len: float = DEFAULT_EPS_LEN,
) -> bool:
    """Closed forms decide when both sides carry one, else the numbers do."""
    if form_a is not None and form_b is not None:
        if form_a.b == 0 and form_b.b == 0:
            # rational values; the minimal polynomial alone cannot separate
            # the two roots, the recognized value can
            return form_a.a == form_b.a
        return form_a.coeffs == form_b.coeffs and (form_a.b > 0) == (form_b.b > 0)
    return abs(value_a - value_b) <= eps_len


@dataclass(frozen=True)
class SummaryRow:
    """Cumulative per-(n, momentum) statistics, one summary.csv row."""

    n: int
    k_p: int
    k_q: int
    scanned: int
    hits: int
    distinct: int
    non_identity: int
    usable: int
    distinct_ops: int


@dataclass(frozen=True)
class ScanReport:
    rows: tuple[SummaryRow, ...]
    axes: tuple[tuple[int, int, float, float], ...]


class Catalog:
    """Accumulates accepted gates and answers the summary questions."""

    def __init__(
        self,
        momenta: Iterable[Momentum],
        eps_class: float = DEFAULT_EPS_CLASS,
        eps_len: float = DEFAULT_EPS_LEN,
    ) -> None:
        self.momenta = tuple(momenta)
        self.eps_class = eps_class
        self.eps_len = eps_len
        self.entries: list[CatalogEntry] = []
        # (p, q) -> angle bucket -> entry indices, for near-constant lookup
        self._index: dict[tuple[int, int], dict[int, list[int]]] = {}
        # (n, p, q) -> mutable counters
        self.stats: dict[tuple[int, int, int], dict[str, int]] = {}

    # -- building -----------------------------------------------------

    def insert(
        self,
        momentum: Momentum,
        gate: GateClass,
        length: float,
        residual: float,
        form: QuadraticForm | None,
        witness: Witness,
        role_count: int = 1,
    ) -> CatalogEntry:
        idx = self._find(momentum, gate, length, form)
        config = (witness.graph6, witness.counts)
        tag = (config, momentum.p, momentum.q)
        if idx is None:
            entry = CatalogEntry(
                momentum=momentum,
                gate=gate,
                length=length,
                residual=residual,
                form=form,
                witness=witness,
                multiplicity=role_count,
                config_multiplicity=1,
                first_configs=frozenset([config]),
            )
            entry._last_config = tag
            self.entries.append(entry)
            self._index_entry(len(self.entries) - 1)
            return entry
        entry = self.entries[idx]
        entry.multiplicity += role_count
        if entry._last_config != tag:
            entry.config_multiplicity += 1
            entry._last_config = tag
        if witness.n < entry.witness.n:
            merged_configs = frozenset([config])
        elif witness.n == entry.witness.n:
            merged_configs = entry.first_configs | {config}
        else:
            merged_configs = entry.first_configs
        if witness < entry.witness:
            self._adopt(entry, gate, length, residual, form, witness)
        entry.first_configs = merged_configs
        return entry

    def _adopt(self, entry, gate, length, residual, form, witness) -> None:
        old_bucket = _bucket(entry.gate.angle)
        entry.gate = gate
        entry.length = length
        entry.residual = residual
        entry.form = form
        entry.witness = witness
        if _bucket(gate.angle) != old_bucket:
            self._reindex()

    def record_scan(
        self,
        n: int,
        momentum: Momentum,
        scanned: int = 0,
        hits: int = 0,
        roles: int = 0,
        rejected_length: int = 0,
        singular: int = 0,
        flux_failures: int = 0,
    ) -> None:
        key = (n, momentum.p, momentum.q)
        box = self.stats.setdefault(
            key,
            {
                "scanned": 0,
                "hits": 0,
                "roles": 0,
                "rejected_length": 0,
                "singular": 0,
                "flux_failures": 0,
            },
        )
        box["scanned"] += scanned
        box["hits"] += hits
        box["roles"] += roles
        box["rejected_length"] += rejected_length
        box["singular"] += singular
        box["flux_failures"] += flux_failures

    def merge(self, other: "Catalog") -> "Catalog":
        """Fold another shard in; safe in any order over any partition."""
        for entry in other.entries:
            idx = self._find(entry.momentum, entry.gate, entry.length, entry.form)
            if idx is None:
                clone = CatalogEntry(
                    momentum=entry.momentum,
                    gate=entry.gate,
                    length=entry.length,
                    residual=entry.residual,
                    form=entry.form,
                    witness=entry.witness,
                    multiplicity=entry.multiplicity,
                    config_multiplicity=entry.config_multiplicity,
                    first_configs=entry.first_configs,
                )
                self.entries.append(clone)
                self._index_entry(len(self.entries) - 1)
                continue
            mine = self.entries[idx]
            # shards own disjoint graphs, so configuration counts add
            mine.multiplicity += entry.multiplicity
            mine.config_multiplicity += entry.config_multiplicity
            if entry.witness.n < mine.witness.n:
                merged_configs = entry.first_configs
            elif entry.witness.n == mine.witness.n:
                merged_configs = mine.first_configs | entry.first_configs
            else:
                merged_configs = mine.first_configs
            if entry.witness < mine.witness:
                self._adopt(
                    mine, entry.gate, entry.length, entry.residual,
                    entry.form, entry.witness,
                )
            mine.first_configs = merged_configs
        for key, box in other.stats.items():
            mom = Momentum(key[1], key[2])
            self.record_scan(key[0], mom, **box)
        return self

    def finalize(self) -> "Catalog":
        """Sort entries into canonical order and assign sequence ids.

        The witness alone separates physically produced entries (one role
        assignment determines one gate and length); kind, angle and length
        keep the order total on arbitrary inputs.
        """
        self.entries.sort(
            key=lambda e: (
                e.momentum.q, e.momentum.p, e.witness,
                e.gate.kind, e.gate.angle, e.length,
            )
        )
        for i, entry in enumerate(self.entries):
            entry.entry_id = i
        self._reindex()
        return self

    # -- queries --------------------------------------------------------

    def usable_ids(self, n_max: int | None = None) -> set[int]:
        """Entries with an identity at the same momentum and length class.

        Identity entries pair with themselves.  With ``n_max`` the catalog
        is restricted to entries first realized on at most that many
        vertices, including the identities doing the pairing.
        """
        idents: dict[tuple[int, int], list[CatalogEntry]] = {}
        for entry in self._live(n_max):
            if entry.is_identity:
                idents.setdefault((entry.momentum.p, entry.momentum.q), []).append(entry)
        out = set()
        for i, entry in enumerate(self.entries):
            if n_max is not None and entry.min_n > n_max:
                continue
            if entry.is_identity:
                out.add(i)
                continue
            for ident in idents.get((entry.momentum.p, entry.momentum.q), ()):
                if same_length_class(
                    entry.length, entry.form, ident.length, ident.form, self.eps_len
                ):
                    out.add(i)
                    break
        return out

    def operation_groups(
        self, momentum: Momentum, n_max: int | None = None
    ) -> list[list[int]]:
        """Usable entries at one momentum, grouped ignoring length."""
        return self._groups(momentum, self.usable_ids(n_max))

    def _groups(self, momentum: Momentum, usable: set[int]) -> list[list[int]]:
        groups: list[list[int]] = []
        reps: list[tuple[str, np.ndarray]] = []
        for i in sorted(usable):
            entry = self.entries[i]
            if (entry.momentum.p, entry.momentum.q) != (momentum.p, momentum.q):
                continue
            mat = entry.gate.rep()
            for gi, group in enumerate(groups):
                kind, rep = reps[gi]
                if entry.gate.kind == kind and equal_up_to_phase(
                    mat, rep, self.eps_class
                ):
                    group.append(i)
                    break
            else:
                groups.append([i])
                reps.append((entry.gate.kind, mat))
        return groups

    def distinct_operations(
        self, momentum: Momentum, n_max: int | None = None
    ) -> list[GateClass]:
        return [
            self.entries[group[0]].gate
            for group in self.operation_groups(momentum, n_max)
        ]

    def new_entry_groups(
        self, n_max: int | None = None
    ) -> dict[int, list[list[int]]]:
        """Entries debuting alongside their operation, keyed by vertex count.

        All entries at one momentum are grouped ignoring length.  A group's
        first appearance is the smallest ``min_n`` among its members; the
        members realized at exactly that vertex count are the group's new
        entries.  Distinct lengths of the same operation therefore all count
        when the operation itself is new, while later re-realizations (same
        operation, new length or not) never do.
        """
        ids = {e.entry_id for e in self._live(n_max)}
        out: dict[int, list[list[int]]] = {}
        for mom in self.momenta:
            for group in self._groups(mom, ids):
                first_n = min(self.entries[i].min_n for i in group)
                fresh = [i for i in group if self.entries[i].min_n == first_n]
                out.setdefault(first_n, []).append(fresh)
        return out

    def operations_by_first_n(self, n_max: int) -> dict[int, int]:
        """How many catalog entries debut with a new operation at each n."""
        groups = self.new_entry_groups(n_max)
        return {
            n: sum(len(g) for g in groups.get(n, []))
            for n in range(1, n_max + 1)
        }

    def new_operation_producers(
        self, n_values: Iterable[int]
    ) -> tuple[set[str], set[ConfigKey]]:
        """Graphs and configurations behind operations first seen at the
        given vertex counts.

        Each debuting entry is attributed to its canonical witness only, so
        alternative same-size realizations of the same entry do not inflate
        the producer tally.
        """
        wanted = set(n_values)
        graphs: set[str] = set()
        configs: set[ConfigKey] = set()
        for n, groups in self.new_entry_groups(max(wanted)).items():
            if n not in wanted:
                continue
            for group in groups:
                for i in group:
                    wit = self.entries[i].witness
                    configs.add((wit.graph6, wit.counts))
                    graphs.add(wit.graph6)
        return graphs, configs

    def axes(self, momentum: Momentum, n_max: int | None = None) -> list[tuple[float, float]]:
        """Non-parallel rotation axes among the usable operations."""
        out: list[tuple[float, float]] = []
        for group in self.operation_groups(momentum, n_max):
            gate = self.entries[group[0]].gate
            if gate.kind == "identity":
                continue
            axis = (gate.theta, gate.phi)
            if not any(
                abs(axis[0] - t) <= 1e-7 and abs(axis[1] - p) <= 1e-7
                for t, p in out
            ):
                out.append(axis)
        return out

    def report(self, n_max: int | None = None) -> ScanReport:
        ns = sorted({key[0] for key in self.stats} | {e.min_n for e in self.entries})
        if n_max is not None:
            ns = [n for n in ns if n <= n_max]
        usable_by_n = {n: self.usable_ids(n) for n in ns}
        rows = []
        for mom in self.momenta:
            for n in ns:
                scanned = hits = 0
                for m in range(1, n + 1):
                    box = self.stats.get((m, mom.p, mom.q))
                    if box:
                        scanned += box["scanned"]
                        hits += box["hits"]
                live = [
                    e
                    for e in self._live(n)
                    if (e.momentum.p, e.momentum.q) == (mom.p, mom.q)
                ]
                usable = usable_by_n[n]
                usable_here = sum(
                    1
                    for i in usable
                    if (self.entries[i].momentum.p, self.entries[i].momentum.q)
                    == (mom.p, mom.q)
                )
                rows.append(
                    SummaryRow(
                        n=n,
                        k_p=mom.p,
                        k_q=mom.q,
                        scanned=scanned,
                        hits=hits,
                        distinct=len(live),
                        non_identity=sum(1 for e in live if not e.is_identity),
                        usable=usable_here,
                        distinct_ops=len(self._groups(mom, usable)),
                    )
                )
        axes = tuple(
            (mom.p, mom.q, theta, phi)
            for mom in self.momenta
            for theta, phi in self.axes(mom, n_max)
        )
        return ScanReport(rows=tuple(rows), axes=axes)

    # -- serialization ----------------------------------------------------

    def save_jsonl(self, stream: TextIO) -> None:
        for entry in self.entries:
            stream.write(json.dumps(entry.to_json(), separators=(",", ":")))
            stream.write("\n")

    @classmethod
    def load_jsonl(
        cls,
        stream: TextIO,
        momenta: Iterable[Momentum] | None = None,
        eps_class: float = DEFAULT_EPS_CLASS,
        eps_len: float = DEFAULT_EPS_LEN,
    ) -> "Catalog":
        entries = [
            CatalogEntry.from_json(json.loads(line))
            for line in stream
            if line.strip()
        ]
        if momenta is None:
            seen = []
            for entry in entries:
                if entry.momentum not in seen:
                    seen.append(entry.momentum)
            momenta = sorted(seen, key=lambda m: m.k)
        cat = cls(momenta, eps_class, eps_len)
        cat.entries = entries
        cat._reindex()
        return cat

    def write_summary_csv(self, stream: TextIO, n_max: int | None = None) -> None:
        writer = csv.writer(stream)
        writer.writerow(
            [
                "n", "k_p", "k_q", "scanned", "hits",
                "distinct", "non_identity", "usable", "distinct_ops",
            ]
        )
        for row in self.report(n_max).rows:
            writer.writerow(
                [
                    row.n, row.k_p, row.k_q, row.scanned, row.hits,
                    row.distinct, row.non_identity, row.usable, row.distinct_ops,
                ]
            )

    def write_text_report(self, stream: TextIO, n_max: int | None = None) -> None:
        """Narrative summary: per-(n, k) table plus first-appearance counts.

        Hit counts are shown in both conventions: attachment configurations
        (``hits``) and tail role assignments (``roles``).
        """
        header = (
            "n", "k", "scanned", "hits", "roles", "distinct",
            "non_identity", "usable", "distinct_ops",
        )
        stream.write("\t".join(header) + "\n")
        for row in self.report(n_max).rows:
            roles = sum(
                box["roles"]
                for (n, p, q), box in self.stats.items()
                if n <= row.n and (p, q) == (row.k_p, row.k_q)
            )
            cells = (
                row.n, f"{row.k_p}/{row.k_q}", row.scanned, row.hits, roles,
                row.distinct, row.non_identity, row.usable, row.distinct_ops,
            )
            stream.write("\t".join(str(c) for c in cells) + "\n")
        top = n_max or max((e.min_n for e in self.entries), default=0)
        fresh = self.operations_by_first_n(top) if top else {}
        for n in sorted(fresh):
            if fresh[n]:
                stream.write(f"new at n={n} (all k): {fresh[n]}\n")
        interesting = [n for n in sorted(fresh) if fresh[n] and n >= 5]
        if interesting:
            graphs, configs = self.new_operation_producers(interesting)
            total = sum(fresh[n] for n in interesting)
            stream.write(
                f"the {total} entries new on n={interesting[0]}..{interesting[-1]} "
                f"trace back to {len(graphs)} graphs "
                f"({len(configs)} tailed configurations)\n"
            )

    def write_axes_csv(self, stream: TextIO, n_max: int | None = None) -> None:
        writer = csv.writer(stream)
        writer.writerow(["k_p", "k_q", "theta", "phi"])
        for k_p, k_q, theta, phi in self.report(n_max).axes:
            writer.writerow([k_p, k_q, repr(theta), repr(phi)])

    # -- internals ----------------------------------------------------

    def _live(self, n_max: int | None) -> Iterator[CatalogEntry]:
        for entry in self.entries:
            if n_max is None or entry.min_n <= n_max:
                yield entry

    def _find(
        self,
        momentum: Momentum,
        gate: GateClass,
        length: float,
        form: QuadraticForm | None,
    ) -> int | None:
        buckets = self._index.get((momentum.p, momentum.q))
        if not buckets:
            return None
        center = _bucket(gate.angle)
        for b in (center - 1, center, center + 1):
            for idx in buckets.get(b, ()):
                entry = self.entries[idx]
                if entry.gate.kind != gate.kind:
                    continue
                if not same_length_class(
                    length, form, entry.length, entry.form, self.eps_len
                ):
                    continue
                if equal_up_to_phase(gate.rep(), entry.gate.rep(), self.eps_class):
                    return idx
        return None

    def _index_entry(self, idx: int) -> None:
        entry = self.entries[idx]
        key = (entry.momentum.p, entry.momentum.q)
        self._index.setdefault(key, {}).setdefault(
            _bucket(entry.gate.angle), []
        ).append(idx)

    def _reindex(self) -> None:
        self._index = {}
        for i in range(len(self.entries)):
            self._index_entry(i)


def _bucket(angle: float) -> int:
    return int(round(angle * _BUCKET))
