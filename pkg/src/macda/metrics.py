"""Aggregate metrics over harvested counterfactual records."""

from __future__ import annotations

import csv
import io
import json
import math
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

from macda.errors import DataError, IntegrityError
from macda.molgraph import Bond, BondOrder, MolGraph, connected_components
from macda.oracle import AffinityOracle
from macda.protein import ProteinSeq
from macda.reward import joint_deltas
from macda.smiles import parse_smiles

GROUP_PAIR = "pair"
GROUP_GLOBAL = "global"

ATOMIC_MASS = {
    "B": 10.81, "C": 12.011, "N": 14.007, "O": 15.999, "P": 30.974,
    "S": 32.06, "F": 18.998, "Cl": 35.45, "Br": 79.904, "I": 126.904,
}
HYDROGEN_MASS = 1.008


def _ramp(x: float, points: Sequence[tuple[float, float]]) -> float:
    """Piecewise-linear interpolation through ``points``, flat outside them."""
    if x <= points[0][0]:
        return points[0][1]
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        if x <= x1:
            return y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    return points[-1][1]


# desirability breakpoints (descriptor value, desirability)
MW_POINTS = ((50.0, 0.0), (200.0, 1.0), (500.0, 1.0), (700.0, 0.0))
DONOR_POINTS = ((5.0, 1.0), (10.0, 0.0))
ACCEPTOR_POINTS = ((10.0, 1.0), (20.0, 0.0))
ROTATABLE_POINTS = ((10.0, 1.0), (20.0, 0.0))


def aromatic_desirability(rings: int) -> float:
    if rings == 0:
        return 0.5
    if rings <= 3:
        return 1.0
    return max(0.0, 1.0 - 0.25 * (rings - 3))


def molecular_weight(g: MolGraph) -> float:
    return math.fsum(ATOMIC_MASS[a.element] + HYDROGEN_MASS * g.hydrogen_count(i)
                     for i, a in enumerate(g.atoms))


def hbond_donors(g: MolGraph) -> int:
    return sum(1 for i, a in enumerate(g.atoms) if a.element in ("N", "O") and g.hydrogen_count(i) > 0)


def hbond_acceptors(g: MolGraph) -> int:
    return sum(1 for a in g.atoms if a.element in ("N", "O"))


def rotatable_bonds(g: MolGraph) -> int:
    rings = g.ring_bonds()
    return sum(
        1 for b in g.bonds
        if b.order == BondOrder.SINGLE and b.pair not in rings
        and g.degree(b.begin) >= 2 and g.degree(b.end) >= 2
    )


def aromatic_rings(g: MolGraph) -> int:
    """Cyclomatic number of the aromatic-bond subgraph."""
    arom = [b for b in g.bonds if b.order == BondOrder.AROMATIC]
    if not arom:
        return 0
    atoms = sorted({i for b in arom for i in b.pair})
    index = {a: k for k, a in enumerate(atoms)}

    local = [Bond(index[b.begin], index[b.end], b.order) for b in arom]
    return len(local) - len(atoms) + len(connected_components(len(atoms), local))


def druglikeness(g: MolGraph) -> float:
    """Drug-likeness proxy in [0, 1].

    Geometric mean of five desirabilities: molecular weight (0 at 50 rising to
    1 over 200-500 and back to 0 at 700), H-bond donors (1 up to 5, 0 from 10),
    acceptors (1 up to 10, 0 from 20), rotatable bonds (1 up to 10, 0 from 20)
    and aromatic rings (0.5 for none, 1 for 1-3, minus 0.25 per extra ring).
    """
    terms = [
        _ramp(molecular_weight(g), MW_POINTS),
        _ramp(hbond_donors(g), DONOR_POINTS),
        _ramp(hbond_acceptors(g), ACCEPTOR_POINTS),
        _ramp(rotatable_bonds(g), ROTATABLE_POINTS),
        aromatic_desirability(aromatic_rings(g)),
    ]
    if min(terms) <= 0.0:
        return 0.0
    return min(1.0, max(0.0, math.exp(math.fsum(math.log(t) for t in terms) / len(terms))))


@dataclass(frozen=True)
class EvalReport:
    method: str
    avg_delta_joint: float
    avg_drug_sim: float
    avg_protein_sim: float
    avg_druglikeness: float
    n: int
    grouping: str = GROUP_PAIR

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _mean(values: Sequence[float]) -> float:
    return math.fsum(values) / len(values)


def _grouped_mean(rows: Sequence[tuple[int, float]], grouping: str) -> float:
    if grouping == GROUP_GLOBAL:
        return _mean([v for _, v in rows])
    groups: dict[int, list[float]] = defaultdict(list)
    for key, v in rows:
        groups[key].append(v)
    return _mean([_mean(groups[k]) for k in sorted(groups)])


def evaluate(records, oracle: AffinityOracle | None = None, grouping: str = GROUP_PAIR) -> EvalReport:
    """Average metrics over records.

    Every record is audited first. Delta-joint is recomputed from the stored
    oracle outputs; when ``oracle`` is given those outputs are also re-queried
    and must match exactly. ``grouping="pair"`` averages within each reference
    pair before averaging the pairs; ``"global"`` pools all records.
    """
    records = list(records)
    if not records:
        raise DataError("cannot evaluate an empty record list")
    if grouping not in (GROUP_PAIR, GROUP_GLOBAL):
        raise ValueError(f"unknown grouping {grouping!r}")
    joint, sim_d, sim_p, qed = [], [], [], []
    for rec in records:
        rec.audit()
        cf = parse_smiles(rec.cf_drug_smiles)
        if oracle is not None:
            ref = parse_smiles(rec.drug_smiles)
            p, p2 = ProteinSeq(rec.protein), ProteinSeq(rec.cf_protein)
            fresh = (oracle.predict(ref, p), oracle.predict(cf, p), oracle.predict(ref, p2), oracle.predict(cf, p2))
            q = rec.affinities
            if fresh != (q.reference, q.drug_only, q.protein_only, q.joint):
                raise IntegrityError(f"record {rec.cf_drug_smiles} disagrees with the oracle")
        key = rec.pair_index
        joint.append((key, joint_deltas(rec.affinities, rec.sign_scope)[1]))
        sim_d.append((key, rec.breakdown.sim_drug))
        sim_p.append((key, rec.breakdown.sim_protein))
        qed.append((key, druglikeness(cf)))
    methods = sorted({r.method for r in records})
    return EvalReport(
        method="+".join(methods),
        avg_delta_joint=_grouped_mean(joint, grouping),
        avg_drug_sim=_grouped_mean(sim_d, grouping),
        avg_protein_sim=_grouped_mean(sim_p, grouping),
        avg_druglikeness=_grouped_mean(qed, grouping),
        n=len(records),
        grouping=grouping,
    )


@dataclass(frozen=True)
class MutationHistogram:
    counts: dict[int, int] = field(default_factory=dict)
    total: int = 0

    def argmax(self) -> int | None:
        if not self.counts:
            return None
        return min(self.counts, key=lambda pos: (-self.counts[pos], pos))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["position", "count"])
        for pos in sorted(self.counts):
            w.writerow([pos, self.counts[pos]])
        return buf.getvalue()


def mutation_histogram(records: Iterable) -> MutationHistogram:
    counts = Counter(r.mutated_position for r in records if r.mutated_position is not None)
    return MutationHistogram(dict(sorted(counts.items())), sum(counts.values()))


COLUMNS = ("Method", "Avg delta_joint", "Drug sim", "Protein sim", "Drug-likeness", "n")


def format_table(reports: Sequence[EvalReport]) -> str:
    """Aligned plain-text table, one row per report."""
    rows = [COLUMNS] + [
        (r.method, f"{r.avg_delta_joint:.4f}", f"{r.avg_drug_sim:.4f}", f"{r.avg_protein_sim:.4f}",
         f"{r.avg_druglikeness:.4f}", str(r.n))
        for r in reports
    ]
    widths = [max(len(row[c]) for row in rows) for c in range(len(COLUMNS))]
    lines = []
    for k, row in enumerate(rows):
        cells = [row[0].ljust(widths[0])] + [cell.rjust(w) for cell, w in zip(row[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
        if k == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"
