"""Attributed molecular graphs with implicit hydrogens.

Hydrogens are never stored as atoms: whatever valence an atom has left after
its bonds is filled by implicit hydrogens. Bracket atoms parsed from SMILES may
pin their hydrogen count instead (``Atom.hydrogens``).

Aromatic bonds follow a Kekule-free convention. An atom with ``k`` aromatic
bonds spends ``k + 1`` valence on them (one ring double bond) unless that
would overflow its maximum valence, in which case it spends ``k`` (pyrrole-type
nitrogen, furan oxygen, ring carbon carrying an exocyclic double bond).
Oxygen and sulfur always spend ``k``. For benzene this is the usual
1.5-per-bond count: two ring bonds use three of carbon's four valences.
"""

from __future__ import annotations

import hashlib
from collections import Counter, deque
from dataclasses import dataclass
from enum import IntEnum
from functools import cached_property, lru_cache
from typing import Iterable, Sequence

import numpy as np

from macda.errors import MacdaError, ValenceError

MAX_VALENCE = {
    "B": 3, "C": 4, "N": 3, "O": 2, "P": 5,
    "S": 6, "F": 1, "Cl": 1, "Br": 1, "I": 1,
}
ELEMENTS = tuple(MAX_VALENCE)
AROMATIC_ELEMENTS = frozenset({"B", "C", "N", "O", "P", "S"})
_NO_RING_PI = frozenset({"O", "S"})

DEFAULT_RADIUS = 2
DEFAULT_NBITS = 2048
MAX_CANONICAL_LEAVES = 200_000


class BondOrder(IntEnum):
    SINGLE = 1
    DOUBLE = 2
    TRIPLE = 3
    AROMATIC = 4


@dataclass(frozen=True)
class Atom:
    element: str
    aromatic: bool = False
    charge: int = 0
    hydrogens: int | None = None

    def __post_init__(self):
        if self.element not in MAX_VALENCE:
            raise ValenceError(f"unsupported element {self.element!r}")
        if self.aromatic and self.element not in AROMATIC_ELEMENTS:
            raise ValenceError(f"element {self.element} cannot be aromatic")
        if not -2 <= self.charge <= 2:
            raise ValenceError(f"charge {self.charge} outside [-2, 2]")
        if self.hydrogens is not None and self.hydrogens < 0:
            raise ValenceError("negative hydrogen count")
        if self.charge and self.hydrogens is None:
            raise ValenceError("charged atoms must state their hydrogen count")

    @property
    def max_valence(self) -> int:
        """Valence limit after charge adjustment.

        Group 15/16 cations gain a bond ([NH4+], [O-] keeps one); for the other
        elements any charge removes valence.
        """
        base = MAX_VALENCE[self.element]
        if self.element in ("N", "P", "O", "S"):
            return max(base + self.charge, 0)
        if self.element == "B":
            return max(base - self.charge, 0)
        return max(base - abs(self.charge), 0)


@dataclass(frozen=True, order=True)
class Bond:
    begin: int
    end: int
    order: BondOrder = BondOrder.SINGLE

    def __post_init__(self):
        if self.begin == self.end:
            raise ValenceError(f"self-bond on atom {self.begin}")
        if self.begin > self.end:
            b, e = self.end, self.begin
            object.__setattr__(self, "begin", b)
            object.__setattr__(self, "end", e)
        object.__setattr__(self, "order", BondOrder(self.order))

    @property
    def pair(self) -> tuple[int, int]:
        return (self.begin, self.end)


def _aromatic_spend(atom: Atom, n_aromatic: int, other: int) -> int:
    if n_aromatic == 0:
        return 0
    if atom.element in _NO_RING_PI:
        return n_aromatic
    fixed_h = atom.hydrogens or 0
    if n_aromatic + 1 + other + fixed_h <= atom.max_valence:
        return n_aromatic + 1
    return n_aromatic


def connected_components(n: int, bonds: Iterable[Bond]) -> list[list[int]]:
    adj: list[list[int]] = [[] for _ in range(n)]
    for b in bonds:
        adj[b.begin].append(b.end)
        adj[b.end].append(b.begin)
    seen = [False] * n
    comps = []
    for start in range(n):
        if seen[start]:
            continue
        seen[start] = True
        comp, queue = [], deque([start])
        while queue:
            u = queue.popleft()
            comp.append(u)
            for v in adj[u]:
                if not seen[v]:
                    seen[v] = True
                    queue.append(v)
        comps.append(sorted(comp))
    return comps


class MolGraph:
    """Immutable, validated molecular graph (single connected fragment).

    Equality and hashing are structural on the stored indexing; use
    :func:`canonical_certificate` to compare up to isomorphism.
    """

    def __init__(self, atoms: Sequence[Atom], bonds: Iterable[Bond] = ()):
        self._atoms = tuple(atoms)
        self._bonds = tuple(sorted(bonds))
        self._validate()

    def _validate(self):
        n = len(self._atoms)
        if n == 0:
            raise ValenceError("graph has no atoms")
        pairs = set()
        for b in self._bonds:
            if not (0 <= b.begin < n and 0 <= b.end < n):
                raise ValenceError(f"bond {b.pair} references a missing atom")
            if b.pair in pairs:
                raise ValenceError(f"duplicate bond {b.pair}")
            pairs.add(b.pair)
            if b.order == BondOrder.AROMATIC and not (
                self._atoms[b.begin].aromatic and self._atoms[b.end].aromatic
            ):
                raise ValenceError(f"aromatic bond {b.pair} between non-aromatic atoms")
        for i, atom in enumerate(self._atoms):
            if atom.aromatic and self.n_aromatic_bonds(i) < 2:
                raise ValenceError(f"aromatic atom {i} is not in an aromatic ring", atom=i)
            if self.free_valence(i) < 0:
                raise ValenceError(
                    f"atom {i} ({atom.element}) exceeds valence {atom.max_valence}", atom=i
                )
        if len(connected_components(n, self._bonds)) != 1:
            raise ValenceError("graph is disconnected")

    @property
    def atoms(self) -> tuple[Atom, ...]:
        return self._atoms

    @property
    def bonds(self) -> tuple[Bond, ...]:
        return self._bonds

    @property
    def num_atoms(self) -> int:
        return len(self._atoms)

    def __len__(self):
        return len(self._atoms)

    def __eq__(self, other):
        if not isinstance(other, MolGraph):
            return NotImplemented
        return self._atoms == other._atoms and self._bonds == other._bonds

    def __hash__(self):
        return self._hash

    @cached_property
    def _hash(self):
        return hash((self._atoms, self._bonds))

    def __repr__(self):
        from macda.smiles import write_smiles

        return f"MolGraph({write_smiles(self)!r})"

    @cached_property
    def _adjacency(self) -> tuple[tuple[tuple[int, BondOrder], ...], ...]:
        adj: list[list[tuple[int, BondOrder]]] = [[] for _ in self._atoms]
        for b in self._bonds:
            adj[b.begin].append((b.end, b.order))
            adj[b.end].append((b.begin, b.order))
        return tuple(tuple(sorted(a)) for a in adj)

    @cached_property
    def _bond_index(self) -> dict[tuple[int, int], Bond]:
        return {b.pair: b for b in self._bonds}

    def neighbors(self, i: int) -> tuple[tuple[int, BondOrder], ...]:
        return self._adjacency[i]

    def degree(self, i: int) -> int:
        return len(self._adjacency[i])

    def bond_between(self, i: int, j: int) -> Bond | None:
        return self._bond_index.get((min(i, j), max(i, j)))

    def n_aromatic_bonds(self, i: int) -> int:
        return sum(1 for _, o in self._adjacency[i] if o == BondOrder.AROMATIC)

    def explicit_bond_order_sum(self, i: int) -> int:
        self._check_index(i)
        other = sum(int(o) for _, o in self._adjacency[i] if o != BondOrder.AROMATIC)
        return other + _aromatic_spend(self._atoms[i], self.n_aromatic_bonds(i), other)

    def free_valence(self, i: int) -> int:
        atom = self._atoms[i]
        return atom.max_valence - self.explicit_bond_order_sum(i) - (atom.hydrogens or 0)

    def hydrogen_count(self, i: int) -> int:
        atom = self._atoms[i]
        if atom.hydrogens is not None:
            return atom.hydrogens
        return self.free_valence(i)

    def _check_index(self, i):
        if not (isinstance(i, (int, np.integer)) and 0 <= i < len(self._atoms)):
            raise IndexError(f"atom index {i} out of range for {len(self._atoms)} atoms")

    def permute(self, perm: Sequence[int]) -> MolGraph:
        """Relabel atoms so that old atom ``i`` becomes atom ``perm[i]``."""
        n = len(self._atoms)
        if sorted(perm) != list(range(n)):
            raise ValueError("perm is not a permutation of the atom indices")
        atoms: list[Atom | None] = [None] * n
        for old, new in enumerate(perm):
            atoms[new] = self._atoms[old]
        bonds = [Bond(perm[b.begin], perm[b.end], b.order) for b in self._bonds]
        return MolGraph(atoms, bonds)  # type: ignore[arg-type]

    def ring_bonds(self) -> frozenset[tuple[int, int]]:
        """Atom pairs of the bonds lying on a cycle (every non-bridge bond)."""
        return self._ring_bonds

    @cached_property
    def _ring_bonds(self) -> frozenset[tuple[int, int]]:
        n = len(self._atoms)
        disc = [-1] * n
        low = [0] * n
        bridges = set()
        timer = 0
        # iterative Tarjan bridge finding
        for root in range(n):
            if disc[root] != -1:
                continue
            stack = [(root, -1, iter(self._adjacency[root]))]
            disc[root] = low[root] = timer
            timer += 1
            while stack:
                u, parent, it = stack[-1]
                advanced = False
                for v, _ in it:
                    if v == parent:
                        continue
                    if disc[v] == -1:
                        disc[v] = low[v] = timer
                        timer += 1
                        stack.append((v, u, iter(self._adjacency[v])))
                        advanced = True
                        break
                    low[u] = min(low[u], disc[v])
                if advanced:
                    continue
                stack.pop()
                if parent != -1:
                    low[parent] = min(low[parent], low[u])
                    if low[u] > disc[parent]:
                        bridges.add((min(u, parent), max(u, parent)))
        return frozenset(b.pair for b in self._bonds if b.pair not in bridges)


def atom_free_valence(g: MolGraph, i: int) -> int:
    """Valence still available on atom ``i`` (its implicit hydrogen count)."""
    g._check_index(i)
    return g.free_valence(i)


def build_graph(atoms: Sequence[Atom], bonds: Iterable[tuple[int, int, int]]) -> MolGraph:
    return MolGraph(atoms, [Bond(i, j, BondOrder(o)) for i, j, o in bonds])


def induced_subgraph(atoms: Sequence[Atom], bonds: Iterable[Bond], keep: Sequence[int]) -> MolGraph:
    index = {old: new for new, old in enumerate(keep)}
    sub = [
        Bond(index[b.begin], index[b.end], b.order)
        for b in bonds
        if b.begin in index and b.end in index
    ]
    return MolGraph([atoms[i] for i in keep], sub)


# ---------------------------------------------------------------- fingerprints


@dataclass(frozen=True)
class Fingerprint:
    on_bits: frozenset[int]
    nbits: int = DEFAULT_NBITS
    radius: int = DEFAULT_RADIUS

    def __len__(self):
        return self.nbits

    def to_array(self, dtype=np.float64) -> np.ndarray:
        arr = np.zeros(self.nbits, dtype=dtype)
        if self.on_bits:
            arr[sorted(self.on_bits)] = 1
        return arr

    def __contains__(self, bit):
        return bit in self.on_bits


def _hash64(obj) -> int:
    # blake2b over repr: stable across processes, unlike hash()
    digest = hashlib.blake2b(repr(obj).encode("ascii"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def atom_environment_ids(g: MolGraph, radius: int = DEFAULT_RADIUS) -> list[list[int]]:
    """Per-radius ECFP identifiers: ``ids[r][i]`` for atom ``i`` at radius ``r``."""
    current = [
        _hash64((
            a.element, g.degree(i), g.explicit_bond_order_sum(i),
            g.free_valence(i), a.aromatic, a.charge,
        ))
        for i, a in enumerate(g.atoms)
    ]
    layers = [current]
    for _ in range(radius):
        current = [
            _hash64((current[i], tuple(sorted((int(o), current[j]) for j, o in g.neighbors(i)))))
            for i in range(g.num_atoms)
        ]
        layers.append(current)
    return layers


@lru_cache(maxsize=1 << 16)
def compute_fingerprint(g: MolGraph, radius: int = DEFAULT_RADIUS, nbits: int = DEFAULT_NBITS) -> Fingerprint:
    """ECFP-style circular fingerprint folded to ``nbits`` bits."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if nbits < 1:
        raise ValueError("nbits must be >= 1")
    layers = atom_environment_ids(g, radius)
    bits = frozenset(ident % nbits for layer in layers for ident in layer)
    return Fingerprint(bits, nbits, radius)


def tanimoto(a: Fingerprint, b: Fingerprint) -> float:
    if a.nbits != b.nbits:
        from macda.errors import DimensionError

        raise DimensionError(f"fingerprint lengths differ: {a.nbits} vs {b.nbits}")
    union = len(a.on_bits | b.on_bits)
    if union == 0:
        return 1.0
    return len(a.on_bits & b.on_bits) / union


# ----------------------------------------------------------- canonical labels


class CanonicalizationError(MacdaError):
    pass


def _atom_invariant(g: MolGraph, i: int) -> tuple:
    a = g.atoms[i]
    return (a.element, a.aromatic, a.charge, -1 if a.hydrogens is None else a.hydrogens, g.degree(i))


def _rank(values: Sequence) -> list[int]:
    table = {v: r for r, v in enumerate(sorted(set(values)))}
    return [table[v] for v in values]


def _refine(adj, colors: list[int]) -> list[int]:
    n_colors = len(set(colors))
    while True:
        sigs = [
            (colors[i], tuple(sorted((int(o), colors[j]) for j, o in adj[i])))
            for i in range(len(colors))
        ]
        new = _rank(sigs)
        n_new = len(set(new))
        if n_new == n_colors:
            return new
        colors, n_colors = new, n_new


def _leaf_encoding(g: MolGraph, labels: list[int]) -> tuple:
    order = sorted(range(g.num_atoms), key=labels.__getitem__)
    atoms = tuple(_atom_invariant(g, i)[:4] for i in order)
    bonds = tuple(sorted(
        (min(labels[b.begin], labels[b.end]), max(labels[b.begin], labels[b.end]), int(b.order))
        for b in g.bonds
    ))
    return (atoms, bonds)


def _canonical_labels(g: MolGraph) -> tuple[tuple[int, ...], tuple]:
    """Individualisation-refinement search for the minimum leaf encoding.

    Leaves with equal encodings reveal automorphisms; a child whose vertex is
    in the same orbit as an explored sibling (under automorphisms fixing the
    current path) yields the same leaves and is skipped.
    """
    n = g.num_atoms
    adj = g._adjacency
    best: list = [None, None]
    seen: dict[tuple, tuple[int, ...]] = {}
    autos: list[tuple[int, ...]] = []
    leaves = 0

    def visit(colors, path):
        nonlocal leaves
        colors = _refine(adj, colors)
        counts = Counter(colors)
        if len(counts) == n:
            leaves += 1
            if leaves > MAX_CANONICAL_LEAVES:
                raise CanonicalizationError(f"canonical search exceeded {MAX_CANONICAL_LEAVES} leaves")
            enc = _leaf_encoding(g, colors)
            labels = tuple(colors)
            if enc in seen:
                inverse = {lab: atom for atom, lab in enumerate(seen[enc])}
                autos.append(tuple(inverse[lab] for lab in labels))
            else:
                seen[enc] = labels
            if best[0] is None or enc < best[0]:
                best[0], best[1] = enc, labels
            return
        target = min(c for c, k in counts.items() if k > 1)
        explored: list[int] = []
        for i in range(n):
            if colors[i] != target:
                continue
            fixing = [a for a in autos if all(a[v] == v for v in path)]
            if explored and i in _orbit_of(explored, fixing):
                continue
            explored.append(i)
            split = [2 * c + 1 for c in colors]
            split[i] -= 1
            visit(split, path + (i,))

    visit(_rank([_atom_invariant(g, i) for i in range(n)]), ())
    return best[1], best[0]


def _orbit_of(points: list[int], generators: list[tuple[int, ...]]) -> set[int]:
    orbit = set(points)
    frontier = list(points)
    while frontier:
        v = frontier.pop()
        for gen in generators:
            w = gen[v]
            if w not in orbit:
                orbit.add(w)
                frontier.append(w)
    return orbit


@lru_cache(maxsize=1 << 16)
def _canonical(g: MolGraph):
    return _canonical_labels(g)


def canonical_ranks(g: MolGraph) -> tuple[int, ...]:
    """Canonical atom ranks (0..n-1); isomorphic graphs map atoms consistently."""
    return _canonical(g)[0]


def canonical_certificate(g: MolGraph) -> bytes:
    return repr(_canonical(g)[1]).encode("ascii")
