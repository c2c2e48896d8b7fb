import itertools

import numpy as np
import pytest
from hypothesis import given, settings

from conftest import molgraphs, random_molgraph, random_permutation
from reference import certificate_agreement
from macda.errors import DimensionError, ValenceError
from macda.molgraph import (
    Atom,
    Bond,
    BondOrder,
    MolGraph,
    atom_free_valence,
    build_graph,
    canonical_certificate,
    canonical_ranks,
    compute_fingerprint,
    tanimoto,
)
from macda.smiles import parse_smiles


class TestAtoms:
    def test_unknown_element(self):
        with pytest.raises(ValenceError):
            Atom("Xe")

    def test_aromatic_halogen_rejected(self):
        with pytest.raises(ValenceError):
            Atom("F", aromatic=True)

    def test_charge_requires_hydrogens(self):
        with pytest.raises(ValenceError):
            Atom("N", charge=1)

    def test_charged_valence(self):
        assert Atom("N", charge=1, hydrogens=0).max_valence == 4
        assert Atom("O", charge=-1, hydrogens=0).max_valence == 1
        assert Atom("C", charge=-1, hydrogens=0).max_valence == 3
        assert Atom("B", charge=-1, hydrogens=0).max_valence == 4


class TestValence:
    def test_methane_hydrogens(self):
        g = MolGraph([Atom("C")])
        assert atom_free_valence(g, 0) == 4
        assert g.hydrogen_count(0) == 4

    def test_pentavalent_carbon_rejected(self):
        atoms = [Atom("C")] + [Atom("F")] * 5
        with pytest.raises(ValenceError) as err:
            MolGraph(atoms, [Bond(0, k) for k in range(1, 6)])
        assert err.value.atom == 0

    def test_out_of_range_index(self):
        with pytest.raises(IndexError):
            atom_free_valence(MolGraph([Atom("C")]), 3)

    def test_disconnected_rejected(self):
        with pytest.raises(ValenceError):
            MolGraph([Atom("C"), Atom("C")])

    def test_duplicate_bond_rejected(self):
        with pytest.raises(ValenceError):
            MolGraph([Atom("C"), Atom("C")], [Bond(0, 1), Bond(1, 0)])

    def test_aromatic_atom_needs_ring(self):
        with pytest.raises(ValenceError):
            MolGraph([Atom("C", aromatic=True), Atom("C")], [Bond(0, 1)])

    def test_benzene_carbons_keep_one_hydrogen(self):
        g = parse_smiles("c1ccccc1")
        assert [g.hydrogen_count(i) for i in range(6)] == [1] * 6

    def test_pyridine_nitrogen_has_no_hydrogen(self):
        g = parse_smiles("c1ccncc1")
        n = next(i for i, a in enumerate(g.atoms) if a.element == "N")
        assert g.hydrogen_count(n) == 0

    def test_furan_oxygen(self):
        g = parse_smiles("c1ccoc1")
        o = next(i for i, a in enumerate(g.atoms) if a.element == "O")
        assert g.free_valence(o) == 0

    def test_build_graph(self):
        g = build_graph([Atom("C"), Atom("O")], [(0, 1, 2)])
        assert g.bond_between(0, 1).order == BondOrder.DOUBLE
        assert g.free_valence(0) == 2

    def test_ring_bonds(self):
        g = parse_smiles("CC1CCC1")
        assert len(g.ring_bonds()) == 4
        assert g.bond_between(0, 1).pair not in g.ring_bonds()


class TestFingerprint:
    def test_deterministic_bits(self):
        g = parse_smiles("CC(=O)Nc1ccccc1")
        assert compute_fingerprint(g) == compute_fingerprint(parse_smiles("CC(=O)Nc1ccccc1"))
        assert compute_fingerprint(g).to_array().shape == (2048,)

    def test_identical_tanimoto_is_one(self):
        fp = compute_fingerprint(parse_smiles("c1ccccc1O"))
        assert tanimoto(fp, fp) == 1.0

    def test_length_mismatch(self):
        g = parse_smiles("CCO")
        with pytest.raises(DimensionError):
            tanimoto(compute_fingerprint(g, 2, 1024), compute_fingerprint(g, 2, 2048))

    def test_radius_grows_bit_set(self):
        g = parse_smiles("CCCCO")
        assert compute_fingerprint(g, 0).on_bits <= compute_fingerprint(g, 2).on_bits

    @settings(max_examples=150, deadline=None)
    @given(molgraphs())
    def test_permutation_invariance(self, g):
        rng = np.random.default_rng(len(g.bonds))
        h = g.permute(random_permutation(rng, g.num_atoms))
        assert compute_fingerprint(g) == compute_fingerprint(h)

    @settings(max_examples=150, deadline=None)
    @given(molgraphs(), molgraphs())
    def test_tanimoto_bounds_and_symmetry(self, a, b):
        fa, fb = compute_fingerprint(a), compute_fingerprint(b)
        t = tanimoto(fa, fb)
        assert 0.0 <= t <= 1.0
        assert t == tanimoto(fb, fa)


def test_certificate_matches_isomorphism_on_small_graphs():
    """Certificates agree with VF2 isomorphism on decorated atlas graphs (<= 7 atoms)."""
    graphs, checked = certificate_agreement()
    assert graphs > 2000 and checked > 1000


def test_canonical_ranks_map_isomorphic_atoms():
    g = parse_smiles("OCC(N)C")
    rng = np.random.default_rng(3)
    perm = random_permutation(rng, g.num_atoms)
    h = g.permute(perm)
    rg, rh = canonical_ranks(g), canonical_ranks(h)
    assert sorted(rg) == list(range(g.num_atoms))
    # atoms of equal rank correspond under an isomorphism
    h_by_rank = {r: i for i, r in enumerate(rh)}
    mapping = [h_by_rank[rg[i]] for i in range(g.num_atoms)]
    assert g.permute(mapping) == h


def test_highly_symmetric_graph():
    n = 7
    g = MolGraph([Atom("S")] * n, [Bond(i, j) for i, j in itertools.combinations(range(n), 2)])
    assert canonical_certificate(g) == canonical_certificate(g.permute([6, 5, 4, 3, 2, 1, 0]))


@settings(max_examples=200, deadline=None)
@given(molgraphs())
def test_certificate_permutation_invariance(g):
    rng = np.random.default_rng(g.num_atoms * 31 + len(g.bonds))
    assert canonical_certificate(g.permute(random_permutation(rng, g.num_atoms))) == canonical_certificate(g)


def test_random_generator_is_valid(rng):
    for _ in range(50):
        g = random_molgraph(rng)
        assert all(g.free_valence(i) >= 0 for i in range(g.num_atoms))
