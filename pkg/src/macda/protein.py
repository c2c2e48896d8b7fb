"""Protein sequences, integer encoding and alanine substitution."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from macda.errors import SequenceError

ALPHABET = "ACDEFGHIKLMNPQRSTVWY"
# 0 is reserved for padding
CODES = {aa: i + 1 for i, aa in enumerate(ALPHABET)}
ENCODED_LENGTH = 1000


@dataclass(frozen=True)
class ProteinSeq:
    residues: str

    def __post_init__(self):
        if not isinstance(self.residues, str) or not self.residues:
            raise SequenceError("protein sequence must be a non-empty string")
        bad = sorted({c for c in self.residues if c not in CODES})
        if bad:
            pos = min(self.residues.index(c) for c in bad)
            raise SequenceError(f"invalid residue {self.residues[pos]!r} at position {pos}")

    def __len__(self):
        return len(self.residues)

    def __getitem__(self, i):
        return self.residues[i]

    def __str__(self):
        return self.residues


def as_protein(p: ProteinSeq | str) -> ProteinSeq:
    return p if isinstance(p, ProteinSeq) else ProteinSeq(p.strip())


def encode_protein(p: ProteinSeq, length: int = ENCODED_LENGTH) -> np.ndarray:
    """Integer codes (A=1 ... Y=20), truncated or zero-padded to ``length``."""
    codes = np.zeros(length, dtype=np.int64)
    head = p.residues[:length]
    codes[: len(head)] = [CODES[c] for c in head]
    return codes


def mutate_to_alanine(p: ProteinSeq, i: int) -> ProteinSeq:
    if not 0 <= i < len(p):
        raise SequenceError(f"position {i} out of range for length {len(p)}")
    if p.residues[i] == "A":
        raise SequenceError(f"residue {i} is already alanine")
    return ProteinSeq(p.residues[:i] + "A" + p.residues[i + 1:])


def hamming(a: ProteinSeq, b: ProteinSeq) -> int:
    if len(a) != len(b):
        raise SequenceError("sequences differ in length")
    return sum(x != y for x, y in zip(a.residues, b.residues))


def mutated_positions(reference: ProteinSeq, mutant: ProteinSeq) -> list[int]:
    if len(reference) != len(mutant):
        raise SequenceError("sequences differ in length")
    return [i for i, (x, y) in enumerate(zip(reference.residues, mutant.residues)) if x != y]


def kmer_counts(p: ProteinSeq, k: int = 3) -> np.ndarray:
    """Counts of every overlapping k-mer, indexed in base-20 alphabet order."""
    idx = np.array([CODES[c] - 1 for c in p.residues], dtype=np.int64)
    counts = np.zeros(20 ** k, dtype=np.float64)
    if len(idx) < k:
        return counts
    keys = np.zeros(len(idx) - k + 1, dtype=np.int64)
    for off in range(k):
        keys = keys * 20 + idx[off:len(idx) - k + 1 + off]
    np.add.at(counts, keys, 1.0)
    return counts
