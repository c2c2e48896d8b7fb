"""Independent reference implementations the library is checked against."""

import itertools
from collections import defaultdict

import networkx as nx
import numpy as np
from networkx.generators.atlas import graph_atlas_g

from conftest import random_permutation
from macda.errors import ValenceError
from macda.molgraph import Atom, Bond, BondOrder, MolGraph, canonical_certificate


def to_nx(g: MolGraph) -> nx.Graph:
    G = nx.Graph()
    for i, a in enumerate(g.atoms):
        G.add_node(i, label=(a.element, a.aromatic, a.charge, a.hydrogens))
    for b in g.bonds:
        G.add_edge(b.begin, b.end, order=int(b.order))
    return G


def isomorphic(a: MolGraph, b: MolGraph) -> bool:
    return nx.is_isomorphic(
        to_nx(a), to_nx(b),
        node_match=lambda x, y: x["label"] == y["label"],
        edge_match=lambda x, y: x["order"] == y["order"],
    )


def naive_edits(g: MolGraph, admissible) -> set[bytes]:
    """Generate-and-validate: try every edit and keep what the constructor accepts."""
    out = set()
    n = g.num_atoms

    def keep(atoms, bonds):
        G = nx.Graph()
        G.add_nodes_from(range(len(atoms)))
        G.add_edges_from(b.pair for b in bonds)
        comps = [sorted(c) for c in nx.connected_components(G)]
        frags = []
        for comp in comps:
            index = {old: k for k, old in enumerate(comp)}
            frags.append(MolGraph([atoms[i] for i in comp],
                                  [Bond(index[b.begin], index[b.end], b.order)
                                   for b in bonds if b.begin in index and b.end in index]))
        best = min(frags, key=lambda f: (-f.num_atoms, canonical_certificate(f)))
        out.add(canonical_certificate(best))

    for i in range(n):
        for el in admissible:
            try:
                keep(g.atoms + (Atom(el),), g.bonds + (Bond(i, n),))
            except ValenceError:
                pass
    for i in range(n):
        for j in range(i + 1, n):
            bond = g.bond_between(i, j)
            if bond is not None and bond.order == BondOrder.AROMATIC:
                continue
            current = 0 if bond is None else int(bond.order)
            others = tuple(b for b in g.bonds if b.pair != (i, j))
            for new in (current - 1, current + 1):
                if not 0 <= new <= 3:
                    continue
                bonds = others + ((Bond(i, j, BondOrder(new)),) if new else ())
                try:
                    keep(g.atoms, bonds)
                except ValenceError:
                    pass
    return out


def atlas_structures():
    return [G for G in graph_atlas_g()[1:] if nx.is_connected(G)]


def decorate(G: nx.Graph, rng) -> MolGraph | None:
    """Random valid element / bond-order labelling of an atlas graph."""
    nodes = sorted(G.nodes)
    atoms = []
    for v in nodes:
        deg = G.degree(v)
        options = [el for el, cap in (("C", 4), ("N", 3), ("O", 2), ("S", 6), ("P", 5)) if cap >= deg]
        atoms.append(Atom(options[int(rng.integers(len(options)))]))
    bonds = [Bond(u, v) for u, v in G.edges]
    try:
        g = MolGraph(atoms, bonds)
    except ValenceError:
        return None
    for k in rng.permutation(len(bonds)):
        b = bonds[k]
        if rng.random() < 0.3 and g.free_valence(b.begin) > 0 and g.free_valence(b.end) > 0:
            bonds[k] = Bond(b.begin, b.end, BondOrder.DOUBLE)
            g = MolGraph(atoms, bonds)
    return g


def certificate_agreement(seed: int = 7) -> tuple[int, int]:
    """Compare certificates with VF2 on every connected graph of at most 7 nodes.

    Each structure is checked bare (all sulfur, single bonds) and with two
    random element / bond-order decorations. Returns (graphs, pairs compared);
    raises AssertionError on the first disagreement.
    """
    rng = np.random.default_rng(seed)
    graphs = []
    for G in atlas_structures():
        graphs.append(MolGraph([Atom("S")] * G.number_of_nodes(), [Bond(u, v) for u, v in G.edges]))
        for _ in range(2):
            g = decorate(G, rng)
            if g is not None:
                graphs.append(g)
    buckets = defaultdict(list)
    for g in graphs:
        cert = canonical_certificate(g)
        h = g.permute(random_permutation(rng, g.num_atoms))
        assert canonical_certificate(h) == cert
        key = (sorted(a.element for a in g.atoms), sorted(int(b.order) for b in g.bonds),
               sorted(g.degree(i) for i in range(g.num_atoms)))
        buckets[repr(key)].append((g, cert))
    checked = 0
    for members in buckets.values():
        for (a, ca), (b, cb) in itertools.combinations(members, 2):
            assert (ca == cb) == isomorphic(a, b)
            checked += 1
    return len(graphs), checked
