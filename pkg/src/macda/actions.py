"""One-step edit sets for the drug graph and the protein sequence."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from macda.errors import ActionError
from macda.molgraph import (
    Atom,
    Bond,
    BondOrder,
    MolGraph,
    canonical_certificate,
    connected_components,
    induced_subgraph,
)
from macda.protein import ENCODED_LENGTH, ProteinSeq, mutate_to_alanine
from macda.smiles import write_smiles

ADD_ATOM = "add_atom"
ADD_BOND = "add_bond"
REMOVE_BOND = "remove_bond"
DEFAULT_ADMISSIBLE = ("C", "N", "O", "F")


@dataclass(frozen=True)
class DrugAction:
    """A single edit of the source graph.

    ``atoms`` indexes the *source* graph: the attachment site for
    ``add_atom``, the bond's atom pair otherwise.
    """

    kind: str
    atoms: tuple[int, ...]
    result: MolGraph = field(repr=False, compare=False)
    element: str | None = None

    def describe(self) -> str:
        if self.kind == ADD_ATOM:
            return f"add {self.element} at atom {self.atoms[0]}"
        verb = "raise" if self.kind == ADD_BOND else "lower"
        return f"{verb} bond {self.atoms[0]}-{self.atoms[1]}"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "atoms": list(self.atoms),
            "element": self.element,
            "smiles": write_smiles(self.result),
        }


@dataclass(frozen=True)
class ProteinAction:
    position: int
    original: str
    result: ProteinSeq = field(repr=False, compare=False)

    @property
    def beyond_encoder(self) -> bool:
        """True when the site lies past the truncated observation window."""
        return self.position >= ENCODED_LENGTH

    def describe(self) -> str:
        return f"{self.original}{self.position}A"

    def to_dict(self) -> dict:
        return {
            "position": self.position,
            "original": self.original,
            "mutation": self.describe(),
            "beyond_encoder": self.beyond_encoder,
        }


@dataclass(frozen=True)
class JointAction:
    drug: DrugAction | None = None
    protein: ProteinAction | None = None

    def __post_init__(self):
        if self.drug is None and self.protein is None:
            raise ActionError("a joint action needs at least one real action")


def add_atom(g: MolGraph, site: int, element: str) -> MolGraph:
    n = g.num_atoms
    return MolGraph(g.atoms + (Atom(element),), g.bonds + (Bond(site, n, BondOrder.SINGLE),))


def _largest_fragment(g_atoms, bonds: list[Bond]) -> MolGraph:
    comps = connected_components(len(g_atoms), bonds)
    if len(comps) == 1:
        return MolGraph(g_atoms, bonds)
    frags = [induced_subgraph(g_atoms, bonds, comp) for comp in comps]
    # larger fragment wins; ties broken canonically so relabelling cannot matter
    return min(frags, key=lambda f: (-f.num_atoms, canonical_certificate(f)))


def change_bond(g: MolGraph, i: int, j: int, delta: int) -> MolGraph:
    """Raise or lower the order of bond ``i-j`` by ``delta``.

    A bond lowered to order 0 is deleted; if that disconnects the graph only
    the largest fragment is kept.
    """
    bond = g.bond_between(i, j)
    current = 0 if bond is None else int(bond.order)
    if bond is not None and bond.order == BondOrder.AROMATIC:
        raise ActionError("aromatic bonds are not editable")
    new = current + delta
    if not 0 <= new <= 3:
        raise ActionError(f"bond order {new} out of range")
    bonds = [b for b in g.bonds if b.pair != (min(i, j), max(i, j))]
    if new:
        bonds.append(Bond(i, j, BondOrder(new)))
    return _largest_fragment(g.atoms, bonds)


def enumerate_drug_actions(g: MolGraph, admissible: Iterable[str] = DEFAULT_ADMISSIBLE) -> list[DrugAction]:
    """All single edits of ``g``, one per distinct resulting molecule.

    Candidates: attach each admissible element by a single bond to every atom
    with free valence; raise every non-aromatic atom pair (bonded below triple,
    or unbonded) whose ends both have free valence by one order; lower every
    non-aromatic bond by one order. Results are deduplicated and ordered by
    canonical certificate.
    """
    elements = sorted(set(admissible))
    n = g.num_atoms
    free = [g.free_valence(i) for i in range(n)]
    candidates: list[DrugAction] = []
    for i in range(n):
        if free[i] < 1:
            continue
        for el in elements:
            candidates.append(DrugAction(ADD_ATOM, (i,), add_atom(g, i, el), el))
    for i in range(n):
        if free[i] < 1:
            continue
        for j in range(i + 1, n):
            if free[j] < 1:
                continue
            bond = g.bond_between(i, j)
            if bond is not None and (bond.order == BondOrder.AROMATIC or bond.order >= 3):
                continue
            candidates.append(DrugAction(ADD_BOND, (i, j), change_bond(g, i, j, +1)))
    for b in g.bonds:
        if b.order == BondOrder.AROMATIC:
            continue
        candidates.append(DrugAction(REMOVE_BOND, b.pair, change_bond(g, b.begin, b.end, -1)))

    unique: dict[bytes, DrugAction] = {}
    for act in candidates:
        unique.setdefault(canonical_certificate(act.result), act)
    return [unique[c] for c in sorted(unique)]


def enumerate_protein_actions(p: ProteinSeq) -> list[ProteinAction]:
    return [
        ProteinAction(i, r, mutate_to_alanine(p, i))
        for i, r in enumerate(p.residues)
        if r != "A"
    ]
