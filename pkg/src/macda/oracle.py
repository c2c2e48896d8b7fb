"""Black-box affinity predictors and the encoders used for similarity.

``SurrogateOracle`` is a deterministic stand-in for a trained DTA network:

    F(d, p) = base + <w_drug, fp(d)> + <w_prot, kmer3(p)>
              + sum_k eta_k * OR(fp(d)[b_k], window_k(p) intact)

clamped to [0, 15]. The drug and protein terms are rounded to a 2**-30 grid so
that every prediction is an exact binary fraction and the model's additivity
survives floating point: differences and sums of predictions are exact.

The OR form makes each planted drug-bit / residue-window pair a true joint
effect: breaking either side alone leaves the term in place, breaking both
drops the affinity by ``eta``. Its mixed second difference is
``-eta * (fp(d')[b] - fp(d)[b]) * (hit(p') - hit(p))``. An interaction can
instead use the product form ``eta * fp(d)[b] * hit(p)`` (``form="and"``),
where breaking either side alone already removes the term.

``SubprocessOracle`` speaks a line protocol (``SMILES<TAB>SEQUENCE`` in, a
decimal real out) so that an external trained model can be plugged in.
"""

from __future__ import annotations

import json
import math
import shlex
import subprocess
from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass, replace
from functools import lru_cache
from pathlib import Path
from typing import IO, Sequence

import numpy as np

from macda.errors import DimensionError, MacdaError
from macda.molgraph import (
    DEFAULT_NBITS,
    DEFAULT_RADIUS,
    MolGraph,
    atom_environment_ids,
    compute_fingerprint,
)
from macda.protein import ProteinSeq, kmer_counts
from macda.smiles import parse_smiles, write_smiles

PKD_RANGE = (0.0, 15.0)


class OracleError(MacdaError):
    pass


def cosine_similarity(x, y) -> float:
    """Cosine of the angle between ``x`` and ``y``.

    Two zero vectors count as identical (1.0); one zero vector gives 0.0.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise DimensionError(f"dimension mismatch: {x.shape[0]} vs {y.shape[0]}")
    nx, ny = np.linalg.norm(x), np.linalg.norm(y)
    if nx == 0 and ny == 0:
        return 1.0
    if nx == 0 or ny == 0:
        return 0.0
    if np.array_equal(x, y):
        return 1.0
    return float(min(1.0, max(-1.0, np.dot(x, y) / (nx * ny))))


class AffinityOracle(ABC):
    """Predictor ``F(drug, protein)`` plus the encoders used for similarity."""

    radius = DEFAULT_RADIUS
    nbits = DEFAULT_NBITS

    @abstractmethod
    def predict(self, drug: MolGraph, protein: ProteinSeq) -> float:
        ...

    def encode_drug(self, drug: MolGraph) -> np.ndarray:
        return compute_fingerprint(drug, self.radius, self.nbits).to_array()

    def encode_protein(self, protein: ProteinSeq) -> np.ndarray:
        return kmer_counts(protein, 3)

    def predict_many(self, pairs: Sequence[tuple[MolGraph, ProteinSeq]]) -> np.ndarray:
        return np.array([self.predict(d, p) for d, p in pairs], dtype=np.float64)

    def drug_similarity(self, a: MolGraph, b: MolGraph) -> float:
        if a == b:
            return 1.0
        return cosine_similarity(self.encode_drug(a), self.encode_drug(b))

    def protein_similarity(self, a: ProteinSeq, b: ProteinSeq) -> float:
        if a == b:
            return 1.0
        return cosine_similarity(self.encode_protein(a), self.encode_protein(b))


FORM_OR = "or"
FORM_AND = "and"


@dataclass(frozen=True)
class PlantedInteraction:
    bit: int
    start: int
    residues: str
    strength: float
    form: str = FORM_OR

    def __post_init__(self):
        if self.form not in (FORM_OR, FORM_AND):
            raise OracleError(f"interaction form must be {FORM_OR!r} or {FORM_AND!r}, got {self.form!r}")

    def active(self, bit_on: bool, hit: bool) -> bool:
        return (bit_on or hit) if self.form == FORM_OR else (bit_on and hit)

    @property
    def window(self) -> range:
        return range(self.start, self.start + len(self.residues))

    def hit(self, protein: ProteinSeq) -> bool:
        return protein.residues[self.start:self.start + len(self.residues)] == self.residues


@dataclass(frozen=True)
class SurrogateSpec:
    seed: int
    interactions: tuple[PlantedInteraction, ...] = ()
    base: float = 7.0
    drug_scale: float = 0.05
    protein_scale: float = 0.05
    radius: int = DEFAULT_RADIUS
    nbits: int = DEFAULT_NBITS
    clamp: bool = True
    grid_bits: int = 30

    def to_json(self) -> str:
        doc = asdict(self)
        doc["interactions"] = [asdict(it) for it in self.interactions]
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> SurrogateSpec:
        doc = json.loads(text)
        doc["interactions"] = tuple(PlantedInteraction(**it) for it in doc.get("interactions", ()))
        return cls(**doc)

    def save(self, path):
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> SurrogateSpec:
        return cls.from_json(Path(path).read_text())

    def with_interaction(self, interaction: PlantedInteraction) -> SurrogateSpec:
        return replace(self, interactions=self.interactions + (interaction,))


class SurrogateOracle(AffinityOracle):
    def __init__(self, spec: SurrogateSpec):
        self.spec = spec
        self.radius = spec.radius
        self.nbits = spec.nbits
        rng = np.random.default_rng(spec.seed)
        self.drug_weights = rng.normal(0.0, spec.drug_scale, spec.nbits)
        self.protein_weights = rng.normal(0.0, spec.protein_scale, 20 ** 3)
        self._protein_term = lru_cache(maxsize=1 << 14)(self._protein_term_uncached)

    def _snap(self, x: float) -> float:
        return math.ldexp(round(math.ldexp(x, self.spec.grid_bits)), -self.spec.grid_bits)

    def _protein_term_uncached(self, protein: ProteinSeq) -> float:
        counts = kmer_counts(protein, 3)
        idx = np.flatnonzero(counts)
        return self._snap(math.fsum(self.protein_weights[idx] * counts[idx]))

    def protein_term(self, protein: ProteinSeq) -> float:
        return self._protein_term(protein)

    def drug_term(self, drug: MolGraph) -> float:
        bits = sorted(compute_fingerprint(drug, self.radius, self.nbits).on_bits)
        return self._snap(math.fsum(self.drug_weights[bits]))

    def interaction_term(self, drug: MolGraph, protein: ProteinSeq) -> float:
        if not self.spec.interactions:
            return 0.0
        fp = compute_fingerprint(drug, self.radius, self.nbits)
        return sum(
            it.strength
            for it in self.spec.interactions
            if it.active(it.bit in fp.on_bits, it.hit(protein))
        )

    def predict(self, drug: MolGraph, protein: ProteinSeq) -> float:
        value = self._snap(self.spec.base) + self.drug_term(drug) + self._protein_term(protein)
        value += self._snap(self.interaction_term(drug, protein))
        if self.spec.clamp:
            value = min(max(value, PKD_RANGE[0]), PKD_RANGE[1])
        return float(value)


def unique_environment_bits(drug: MolGraph, radius: int = DEFAULT_RADIUS,
                            nbits: int = DEFAULT_NBITS) -> dict[int, list[tuple[int, int]]]:
    """Map each set bit to the (radius, atom) environments that set it."""
    owners: dict[int, list[tuple[int, int]]] = {}
    for r, layer in enumerate(atom_environment_ids(drug, radius)):
        for atom, ident in enumerate(layer):
            owners.setdefault(ident % nbits, []).append((r, atom))
    return owners


def plant_interaction(spec: SurrogateSpec, drug: MolGraph, atom: int, protein: ProteinSeq,
                      start: int, width: int = 3, strength: float = 2.0,
                      env_radius: int = 1, form: str = FORM_OR) -> SurrogateSpec:
    """Couple the fingerprint bit of ``atom``'s environment with a residue window.

    The bit must be set by that single environment only, so that editing the
    substructure is what toggles it.
    """
    owners = unique_environment_bits(drug, spec.radius, spec.nbits)
    ident = atom_environment_ids(drug, spec.radius)[env_radius][atom]
    bit = ident % spec.nbits
    if owners[bit] != [(env_radius, atom)]:
        raise OracleError(f"bit {bit} is shared by several environments: {owners[bit]}")
    if start < 0 or start + width > len(protein):
        raise OracleError("window outside the protein")
    window = protein.residues[start:start + width]
    return spec.with_interaction(PlantedInteraction(bit, start, window, float(strength), form))


class SubprocessOracle(AffinityOracle):
    """Adapter for an external predictor speaking the line protocol.

    Each request is ``SMILES<TAB>SEQUENCE\\n``; the child answers with one line
    holding a decimal real.
    """

    def __init__(self, command: str | Sequence[str]):
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        self._proc: subprocess.Popen | None = None
        self._cache: dict[tuple[str, str], float] = {}

    def _ensure(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                text=True, bufsize=1,
            )
        return self._proc

    def predict(self, drug: MolGraph, protein: ProteinSeq) -> float:
        key = (write_smiles(drug), protein.residues)
        if key in self._cache:
            return self._cache[key]
        proc = self._ensure()
        assert proc.stdin is not None and proc.stdout is not None
        proc.stdin.write(f"{key[0]}\t{key[1]}\n")
        proc.stdin.flush()
        line = proc.stdout.readline()
        if not line:
            raise OracleError(f"predictor {self.command[0]!r} closed its output")
        try:
            value = float(line.strip())
        except ValueError:
            raise OracleError(f"predictor answered {line.strip()!r}") from None
        if not math.isfinite(value):
            raise OracleError(f"predictor answered non-finite value {value}")
        self._cache[key] = value
        return value

    def close(self):
        if self._proc is not None:
            if self._proc.stdin:
                self._proc.stdin.close()
            self._proc.wait(timeout=10)
            self._proc = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def serve(oracle: AffinityOracle, instream: IO[str], outstream: IO[str]) -> int:
    """Answer protocol requests from ``instream`` until EOF; return the count."""
    served = 0
    for line in instream:
        line = line.rstrip("\n")
        if not line:
            continue
        smiles, _, sequence = line.partition("\t")
        try:
            value = oracle.predict(parse_smiles(smiles), ProteinSeq(sequence))
            outstream.write(f"{value!r}\n")
        except MacdaError as exc:
            outstream.write(f"error: {exc}\n")
        outstream.flush()
        served += 1
    return served


def load_oracle(ref: str) -> AffinityOracle:
    """Build an oracle from ``surrogate:SEED``, ``subprocess:CMD`` or a spec path."""
    if ref.startswith("surrogate:"):
        return SurrogateOracle(SurrogateSpec(seed=int(ref.split(":", 1)[1])))
    if ref.startswith("subprocess:"):
        return SubprocessOracle(ref.split(":", 1)[1])
    return SurrogateOracle(SurrogateSpec.load(ref))


__all__ = [
    "AffinityOracle",
    "OracleError",
    "PlantedInteraction",
    "SubprocessOracle",
    "SurrogateOracle",
    "SurrogateSpec",
    "cosine_similarity",
    "load_oracle",
    "plant_interaction",
    "serve",
    "unique_environment_bits",
]
