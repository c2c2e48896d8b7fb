import numpy as np
import pytest
from hypothesis import strategies as st

from macda.errors import ValenceError
from macda.molgraph import Atom, Bond, BondOrder, MolGraph

ELEMENTS = ["C"] * 6 + ["N", "N", "O", "O", "S", "F", "Cl", "Br", "P", "B", "I"]


def _pick(rng, seq):
    return seq[int(rng.integers(len(seq)))]


def _atom(rng, charged: bool) -> Atom:
    el = _pick(rng, ELEMENTS)
    if charged and el in ("N", "O", "C", "S") and rng.random() < 0.15:
        return Atom(el, charge=int(_pick(rng, [-1, 1])), hydrogens=int(rng.integers(0, 3)))
    if rng.random() < 0.05:
        return Atom(el, hydrogens=int(rng.integers(0, 2)))
    return Atom(el)


def _attempt(rng, max_atoms, aromatic, charged):
    atoms: list[Atom] = []
    bonds: list[Bond] = []
    if aromatic and max_atoms >= 6 and rng.random() < 0.35:
        for _ in range(6):
            atoms.append(Atom(_pick(rng, ["C", "C", "C", "N"]), aromatic=True))
        bonds += [Bond(k, (k + 1) % 6, BondOrder.AROMATIC) for k in range(6)]
    else:
        atoms.append(_atom(rng, charged))
    target = int(rng.integers(len(atoms), max_atoms + 1))
    while len(atoms) < target:
        g = MolGraph(atoms, bonds)
        open_sites = [i for i in range(len(atoms)) if g.free_valence(i) > 0]
        if not open_sites:
            break
        site = _pick(rng, open_sites)
        new = _atom(rng, charged)
        order = int(rng.integers(1, min(3, g.free_valence(site)) + 1))
        atoms.append(new)
        bonds.append(Bond(site, len(atoms) - 1, BondOrder(order)))
    g = MolGraph(atoms, bonds)
    for _ in range(int(rng.integers(0, 3))):
        free = [i for i in range(g.num_atoms) if g.free_valence(i) > 0]
        pairs = [(i, j) for i in free for j in free if i < j and g.bond_between(i, j) is None]
        if not pairs:
            break
        i, j = _pick(rng, pairs)
        order = 2 if rng.random() < 0.2 else 1
        try:
            g = MolGraph(g.atoms, g.bonds + (Bond(i, j, BondOrder(order)),))
        except ValenceError:
            pass
    return g


def random_molgraph(rng: np.random.Generator, max_atoms: int = 8, aromatic: bool = True,
                    charged: bool = True) -> MolGraph:
    """Random valid connected molecule with at most ``max_atoms`` heavy atoms."""
    while True:
        try:
            return _attempt(rng, max_atoms, aromatic, charged)
        except ValenceError:
            continue


def random_permutation(rng, n):
    return [int(x) for x in rng.permutation(n)]


@st.composite
def molgraphs(draw, max_atoms=8, aromatic=True, charged=True):
    seed = draw(st.integers(0, 2**32 - 1))
    return random_molgraph(np.random.default_rng(seed), max_atoms, aromatic, charged)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance criteria report: number -> (title, passed, detail)
ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {number}. {title}: {detail}")
