"""Counterfactual reward: affinity change, joint isolation and similarity."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from decimal import Decimal

from macda.molgraph import MolGraph
from macda.oracle import AffinityOracle
from macda.protein import ProteinSeq

SIGN_LEADING = "leading"
SIGN_ALL = "all"


@dataclass(frozen=True)
class RewardWeights:
    alpha_r: float = 1.0
    alpha_d: float = 0.05
    alpha_p: float = 0.01

    def __post_init__(self):
        if min(self.alpha_r, self.alpha_d, self.alpha_p) < 0:
            raise ValueError("reward weights must be non-negative")


@dataclass(frozen=True)
class AffinityQuad:
    """Oracle outputs for the reference, both single-sided edits and the joint edit."""

    reference: float
    drug_only: float
    protein_only: float
    joint: float

    @classmethod
    def query(cls, oracle: AffinityOracle, d, p, d2, p2) -> AffinityQuad:
        return cls(oracle.predict(d, p), oracle.predict(d2, p), oracle.predict(d, p2), oracle.predict(d2, p2))


@dataclass(frozen=True)
class RewardBreakdown:
    delta_total: float
    delta_joint: float
    delta_sjoint: float
    sim_drug: float
    sim_protein: float
    reward: float

    def to_dict(self) -> dict:
        return asdict(self)


def _sign(x: float) -> int:
    return (x > 0) - (x < 0)


def _exact_sum(*terms: tuple[float, float]) -> float:
    # weights are decimal hyper-parameters; recompose in decimal so that e.g.
    # 0.01 + 0.05 comes out as 0.06 rather than 0.060000000000000005
    total = sum((Decimal(repr(float(w))) * Decimal(repr(float(x))) for w, x in terms), Decimal(0))
    return float(total)


def joint_deltas(q: AffinityQuad, sign_scope: str = SIGN_LEADING) -> tuple[float, float, float]:
    """(delta_total, delta_joint, delta_sjoint) from the four oracle outputs."""
    change = q.joint - q.reference
    total = abs(change)
    drug = abs(q.drug_only - q.reference)
    prot = abs(q.protein_only - q.reference)
    joint = total - drug - prot
    s = -_sign(change)
    if sign_scope == SIGN_LEADING:
        sjoint = s * total - drug - prot
    elif sign_scope == SIGN_ALL:
        sjoint = s * (total - drug - prot)
    else:
        raise ValueError(f"unknown sign scope {sign_scope!r}")
    return total, joint, float(sjoint)


def breakdown(q: AffinityQuad, sim_drug: float, sim_protein: float,
              weights: RewardWeights = RewardWeights(),
              sign_scope: str = SIGN_LEADING) -> RewardBreakdown:
    total, joint, sjoint = joint_deltas(q, sign_scope)
    reward = _exact_sum(
        (weights.alpha_r, sjoint),
        (weights.alpha_p, sim_protein),
        (weights.alpha_d, sim_drug),
    )
    return RewardBreakdown(total, joint, sjoint, float(sim_drug), float(sim_protein), reward)


def delta_affinity(oracle: AffinityOracle, d: MolGraph, p: ProteinSeq,
                   d2: MolGraph, p2: ProteinSeq) -> float:
    """Absolute predicted-affinity change from (d, p) to (d2, p2)."""
    return abs(oracle.predict(d2, p2) - oracle.predict(d, p))


def delta_joint(oracle, d, p, d2, p2) -> float:
    return joint_deltas(AffinityQuad.query(oracle, d, p, d2, p2))[1]


def delta_sjoint(oracle, d, p, d2, p2, sign_scope: str = SIGN_LEADING) -> float:
    return joint_deltas(AffinityQuad.query(oracle, d, p, d2, p2), sign_scope)[2]


def total_reward(weights: RewardWeights, oracle: AffinityOracle, d, p, d2, p2,
                 sign_scope: str = SIGN_LEADING) -> RewardBreakdown:
    q = AffinityQuad.query(oracle, d, p, d2, p2)
    return breakdown(q, oracle.drug_similarity(d, d2), oracle.protein_similarity(p, p2), weights, sign_scope)
