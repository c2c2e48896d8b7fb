"""Reader and writer for a subset of SMILES.

Supported: organic-subset atoms (B C N O P S F Cl Br I), aromatic lowercase
atoms (b c n o p s), bonds ``- = # :``, branches, ring closures ``0-9`` and
``%nn``, and bracket atoms carrying an element, an optional hydrogen count
and an optional charge in [-2, 2]. Stereo markers, isotopes, wildcards, atom
classes and multi-fragment input (``.``) are rejected.

Organic-subset atoms are filled with implicit hydrogens up to the element's
maximum valence as defined in :mod:`macda.molgraph`.
"""

from __future__ import annotations

import sys

from macda.errors import SmilesError, ValenceError
from macda.molgraph import Atom, Bond, BondOrder, MolGraph, canonical_ranks

_ORGANIC = {"B", "C", "N", "O", "P", "S", "F", "I"}
_TWO_LETTER = {"Cl", "Br"}
_AROMATIC = {"b", "c", "n", "o", "p", "s"}
_DIGITS = frozenset("0123456789")
_BOND_SYMBOLS = {
    "-": BondOrder.SINGLE,
    "=": BondOrder.DOUBLE,
    "#": BondOrder.TRIPLE,
    ":": BondOrder.AROMATIC,
}
_REJECTED = {
    "/": "directional (stereo) bonds are not supported",
    "\\": "directional (stereo) bonds are not supported",
    "@": "chirality is not supported",
    "*": "wildcard atoms are not supported",
    ".": "multi-fragment SMILES are not supported",
    "$": "quadruple bonds are not supported",
}


def _parse_bracket(s: str, start: int) -> tuple[Atom, int]:
    """Parse ``[...]`` beginning at ``start``; return the atom and next offset."""
    j = start + 1
    if j < len(s) and s[j] in _DIGITS:
        raise SmilesError("isotopes are not supported", j)
    if s[j:j + 2] in _TWO_LETTER:
        element, aromatic, j = s[j:j + 2], False, j + 2
    elif j < len(s) and s[j] in _ORGANIC:
        element, aromatic, j = s[j], False, j + 1
    elif j < len(s) and s[j] in _AROMATIC:
        element, aromatic, j = s[j].upper(), True, j + 1
    else:
        raise SmilesError("unsupported bracket element", j)
    if j < len(s) and s[j].islower() and s[j].isalpha():
        raise SmilesError("unsupported bracket element", start + 1)
    if j < len(s) and s[j] == "@":
        raise SmilesError(_REJECTED["@"], j)
    hydrogens = 0
    if j < len(s) and s[j] == "H":
        j += 1
        k = j
        while k < len(s) and s[k] in _DIGITS:
            k += 1
        hydrogens = int(s[j:k]) if k > j else 1
        j = k
    charge = 0
    if j < len(s) and s[j] in "+-":
        sign = 1 if s[j] == "+" else -1
        sym = s[j]
        k = j + 1
        if k < len(s) and s[k] in _DIGITS:
            magnitude = int(s[k])
            k += 1
        else:
            magnitude = 1
            while k < len(s) and s[k] == sym:
                magnitude += 1
                k += 1
        if magnitude > 2:
            raise SmilesError("charge outside [-2, 2]", j)
        charge = sign * magnitude
        j = k
    if j < len(s) and s[j] == ":":
        raise SmilesError("atom classes are not supported", j)
    if j >= len(s) or s[j] != "]":
        raise SmilesError("unterminated bracket atom", start)
    try:
        atom = Atom(element, aromatic, charge, hydrogens)
    except ValenceError as exc:
        raise SmilesError(str(exc), start) from None
    return atom, j + 1


def parse_smiles(s: str | bytes) -> MolGraph:
    """Parse a SMILES string into a validated :class:`MolGraph`.

    Raises :class:`SmilesError` (with a byte offset) for anything outside the
    supported grammar, including valence violations.
    """
    if isinstance(s, (bytes, bytearray)):
        try:
            s = bytes(s).decode("ascii")
        except UnicodeDecodeError as exc:
            raise SmilesError("non-ASCII input", exc.start) from None
    if not isinstance(s, str):
        raise SmilesError(f"expected text, got {type(s).__name__}", 0)
    if not s:
        raise SmilesError("empty SMILES", 0)

    atoms: list[Atom] = []
    atom_offsets: list[int] = []
    # pair -> (explicit order or None, offset)
    bonds: dict[tuple[int, int], tuple[BondOrder | None, int]] = {}
    branches: list[tuple[int, int]] = []
    rings: dict[int, tuple[int, BondOrder | None, int]] = {}
    prev: int | None = None
    pending: tuple[BondOrder, int] | None = None

    def add_bond(a: int, b: int, order: BondOrder | None, offset: int):
        key = (min(a, b), max(a, b))
        if key in bonds:
            raise SmilesError("duplicate bond between the same atoms", offset)
        bonds[key] = (order, offset)

    i = 0
    n = len(s)
    while i < n:
        ch = s[i]
        if ch in _REJECTED:
            raise SmilesError(_REJECTED[ch], i)
        if ch == "(":
            if prev is None:
                raise SmilesError("branch opened before any atom", i)
            if pending is not None:
                raise SmilesError("bond symbol before '('", pending[1])
            branches.append((prev, i))
            i += 1
        elif ch == ")":
            if not branches:
                raise SmilesError("unmatched ')'", i)
            if pending is not None:
                raise SmilesError("bond symbol before ')'", pending[1])
            if s[i - 1] == "(":
                raise SmilesError("empty branch", i - 1)
            prev = branches.pop()[0]
            i += 1
        elif ch in _BOND_SYMBOLS:
            if prev is None:
                raise SmilesError("bond symbol before any atom", i)
            if pending is not None:
                raise SmilesError("two consecutive bond symbols", i)
            pending = (_BOND_SYMBOLS[ch], i)
            i += 1
        elif ch in _DIGITS or ch == "%":
            start = i
            if ch == "%":
                digits = s[i + 1:i + 3]
                if len(digits) != 2 or not all(c in _DIGITS for c in digits):
                    raise SmilesError("'%' must be followed by two digits", i)
                num = int(digits)
                i += 3
            else:
                num = int(ch)
                i += 1
            if prev is None:
                raise SmilesError("ring closure before any atom", start)
            order = pending[0] if pending else None
            if num in rings:
                other, other_order, _ = rings.pop(num)
                if other == prev:
                    raise SmilesError("ring closure onto the same atom", start)
                if order is not None and other_order is not None and order != other_order:
                    raise SmilesError("ring closure bond orders disagree", start)
                add_bond(other, prev, order if order is not None else other_order, start)
            else:
                rings[num] = (prev, order, start)
            pending = None
        else:
            if ch == "[":
                atom, nxt = _parse_bracket(s, i)
            elif s[i:i + 2] in _TWO_LETTER:
                atom, nxt = Atom(s[i:i + 2]), i + 2
            elif ch in _ORGANIC:
                atom, nxt = Atom(ch), i + 1
            elif ch in _AROMATIC:
                atom, nxt = Atom(ch.upper(), aromatic=True), i + 1
            else:
                raise SmilesError(f"unsupported character {ch!r}", i)
            idx = len(atoms)
            atoms.append(atom)
            atom_offsets.append(i)
            if prev is not None:
                add_bond(prev, idx, pending[0] if pending else None, pending[1] if pending else i)
            pending = None
            prev = idx
            i = nxt

    if pending is not None:
        raise SmilesError("dangling bond symbol", pending[1])
    if branches:
        raise SmilesError("unmatched '('", branches[-1][1])
    if rings:
        raise SmilesError("unclosed ring", min(off for _, _, off in rings.values()))

    bond_list = []
    for (a, b), (order, offset) in bonds.items():
        if order is None:
            order = BondOrder.AROMATIC if atoms[a].aromatic and atoms[b].aromatic else BondOrder.SINGLE
        elif order == BondOrder.AROMATIC and not (atoms[a].aromatic and atoms[b].aromatic):
            raise SmilesError("aromatic bond between non-aromatic atoms", offset)
        bond_list.append(Bond(a, b, order))
    try:
        return MolGraph(atoms, bond_list)
    except ValenceError as exc:
        offset = atom_offsets[exc.atom] if exc.atom is not None else 0
        raise SmilesError(str(exc), offset) from None


def _atom_text(atom: Atom) -> str:
    sym = atom.element.lower() if atom.aromatic else atom.element
    if atom.hydrogens is None and atom.charge == 0:
        return sym
    text = "[" + sym
    if atom.hydrogens:
        text += "H" if atom.hydrogens == 1 else f"H{atom.hydrogens}"
    if atom.charge:
        text += ("+" if atom.charge > 0 else "-") + (str(abs(atom.charge)) if abs(atom.charge) > 1 else "")
    return text + "]"


def _bond_text(g: MolGraph, a: int, b: int, order: BondOrder) -> str:
    if order == BondOrder.AROMATIC:
        return ""
    if order == BondOrder.SINGLE:
        return "-" if g.atoms[a].aromatic and g.atoms[b].aromatic else ""
    return "=" if order == BondOrder.DOUBLE else "#"


def _ring_label(num: int) -> str:
    return str(num) if num < 10 else f"%{num:02d}"


def write_smiles(g: MolGraph) -> str:
    """Serialise ``g``; the output depends only on the graph up to isomorphism.

    Traversal is depth-first from the atom of lowest canonical rank, visiting
    neighbours in rank order, so isomorphic graphs produce identical strings.
    """
    ranks = canonical_ranks(g)
    n = g.num_atoms
    root = min(range(n), key=lambda i: (ranks[i], i))
    nbrs = [sorted(g.neighbors(i), key=lambda e: (ranks[e[0]], e[0])) for i in range(n)]

    visited = [False] * n
    parent = [-1] * n
    children: list[list[int]] = [[] for _ in range(n)]
    opens: list[list[int]] = [[] for _ in range(n)]   # ring bonds opened at atom
    closes: list[list[int]] = [[] for _ in range(n)]  # ring bonds closed at atom
    seen_ring: set[tuple[int, int]] = set()

    visited[root] = True
    stack = [(root, iter(nbrs[root]))]
    while stack:
        u, it = stack[-1]
        for v, _ in it:
            if not visited[v]:
                visited[v] = True
                parent[v] = u
                children[u].append(v)
                stack.append((v, iter(nbrs[v])))
                break
            if v != parent[u] and (min(u, v), max(u, v)) not in seen_ring:
                # u is the descendant: v was entered first
                seen_ring.add((min(u, v), max(u, v)))
                opens[v].append(u)
                closes[u].append(v)
        else:
            stack.pop()

    out: list[str] = []
    digit_of: dict[tuple[int, int], int] = {}
    in_use: set[int] = set()

    def emit(u: int):
        out.append(_atom_text(g.atoms[u]))
        for v in sorted(opens[u], key=lambda x: (ranks[x], x)):
            num = next(d for d in range(1, 100) if d not in in_use)
            in_use.add(num)
            digit_of[(u, v)] = num
            order = g.bond_between(u, v).order
            out.append(_bond_text(g, u, v, order) + _ring_label(num))
        for v in closes[u]:
            num = digit_of.pop((v, u))
            in_use.discard(num)
            out.append(_ring_label(num))
        kids = children[u]
        for k, v in enumerate(kids):
            bond = _bond_text(g, u, v, g.bond_between(u, v).order)
            if k < len(kids) - 1:
                out.append("(" + bond)
                emit(v)
                out.append(")")
            else:
                out.append(bond)
                emit(v)

    limit = sys.getrecursionlimit()
    if n + 100 > limit:
        sys.setrecursionlimit(n + 100)
    emit(root)
    return "".join(out)
