"""Bundled molecules, a synthetic kinase-like sequence and planted-surrogate builders.

The registry drugs are stand-ins for the ABL1 ligand set; the protein is a
generated sequence, not a real kinase domain.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

from macda.actions import DEFAULT_ADMISSIBLE, enumerate_drug_actions, enumerate_protein_actions
from macda.molgraph import MolGraph, atom_environment_ids, compute_fingerprint
from macda.oracle import FORM_OR, SurrogateOracle, SurrogateSpec, plant_interaction, unique_environment_bits
from macda.protein import ProteinSeq
from macda.smiles import parse_smiles

REGISTRY_DRUGS = {
    "imatinib": "CC1=C(C=C(C=C1)NC(=O)C2=CC=C(C=C2)CN3CCN(CC3)C)NC4=NC=CC(=N4)C5=CN=CC=C5",
    "nilotinib": "CC1=C(C=C(C=C1)C(=O)NC2=CC(=CC(=C2)N3C=C(N=C3)C)C(F)(F)F)NC4=NC=CC(=N4)C5=CN=CC=C5",
    "dasatinib": "CC1=C(C(=CC=C1)Cl)NC(=O)C2=CN=C(S2)NC3=CC(=NC(=N3)C)N4CCN(CC4)CCO",
    "bosutinib": "CN1CCN(CC1)CCCOC2=C(C=C3C(=C2)N=CC(=C3NC4=CC(=C(C=C4Cl)Cl)OC)C#N)OC",
    "ponatinib": "CC1=C(C=C(C=C1)C(=O)NC2=CC(=C(C=C2)CN3CCN(CC3)C)C(F)(F)F)C#CC4=CN=C5N4N=CC=C5",
}

SMALL_DRUG = "CC(=O)Nc1ccccc1"
SMALL_PROTEIN = "MKTWYIGKQRQISFVKSHFSRQLEERLGLI"


def dataset_path() -> str:
    """Path of the bundled tiny dataset CSV."""
    return str(resources.files("macda") / "data" / "tiny.csv")


def _single_sided_scores(oracle, ref: float, base_drug, base_prot, results, is_drug: bool):
    scores = []
    for r in results:
        value = oracle.predict(r, base_prot) if is_drug else oracle.predict(base_drug, r)
        scores.append(abs(value - ref))
    return scores


def _ranks(scores) -> list[int]:
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    ranks = [0] * len(scores)
    for rank, i in enumerate(order):
        ranks[i] = rank
    return ranks


@dataclass(frozen=True)
class PlantedFixture:
    drug: MolGraph
    protein: ProteinSeq
    spec: SurrogateSpec
    atom: int
    start: int
    width: int

    @property
    def oracle(self) -> SurrogateOracle:
        return SurrogateOracle(self.spec)

    @property
    def bit(self) -> int:
        return self.spec.interactions[0].bit

    @property
    def window(self) -> range:
        return self.spec.interactions[0].window

    def removes_bit(self, drug: MolGraph) -> bool:
        return self.bit not in compute_fingerprint(drug, self.spec.radius, self.spec.nbits).on_bits

    def touches_both(self, cf_drug: MolGraph, position: int | None) -> bool:
        return position is not None and position in self.window and self.removes_bit(cf_drug)


def planted_fixture(seed: int = 0, drug: str | MolGraph = SMALL_DRUG,
                    protein: str | ProteinSeq = SMALL_PROTEIN, width: int = 3,
                    strength: float = 2.0, env_radius: int = 1,
                    admissible=DEFAULT_ADMISSIBLE, form: str = FORM_OR) -> PlantedFixture:
    """Surrogate with one drug-bit / residue-window interaction hidden from marginals.

    The window is placed over the residues whose single alanine substitutions
    move the additive surrogate least, and the bit is taken from the atom
    whose bit-removing edits rank lowest by single-sided affinity change, so
    the interaction only shows up when both sides are edited together.
    """
    drug = parse_smiles(drug) if isinstance(drug, str) else drug
    protein = ProteinSeq(protein) if isinstance(protein, str) else protein
    base = SurrogateSpec(seed=seed)
    oracle = SurrogateOracle(base)
    ref = oracle.predict(drug, protein)

    p_actions = enumerate_protein_actions(protein)
    p_rank = dict(zip((a.position for a in p_actions),
                      _ranks(_single_sided_scores(oracle, ref, drug, protein,
                                                  [a.result for a in p_actions], False))))
    best_start, best_key = None, None
    for start in range(len(protein) - width + 1):
        positions = range(start, start + width)
        if any(pos not in p_rank for pos in positions):
            continue
        key = (min(p_rank[pos] for pos in positions), -start)
        if best_key is None or key > best_key:
            best_start, best_key = start, key
    if best_start is None:
        raise ValueError("no alanine-free window of the requested width")

    d_actions = enumerate_drug_actions(drug, admissible)
    d_rank = _ranks(_single_sided_scores(oracle, ref, drug, protein, [a.result for a in d_actions], True))
    owners = unique_environment_bits(drug, base.radius, base.nbits)
    layer = atom_environment_ids(drug, base.radius)[env_radius]
    best_atom, best_key = None, None
    for atom in range(drug.num_atoms):
        bit = layer[atom] % base.nbits
        if owners[bit] != [(env_radius, atom)]:
            continue
        removing = [d_rank[i] for i, a in enumerate(d_actions)
                    if bit not in compute_fingerprint(a.result, base.radius, base.nbits).on_bits]
        if not removing:
            continue
        key = (min(removing), -atom)
        if best_key is None or key > best_key:
            best_atom, best_key = atom, key
    if best_atom is None:
        raise ValueError("no atom carries a uniquely owned, removable fingerprint bit")

    spec = plant_interaction(base, drug, best_atom, protein, best_start, width, strength, env_radius, form)
    return PlantedFixture(drug, protein, spec, best_atom, best_start, width)
