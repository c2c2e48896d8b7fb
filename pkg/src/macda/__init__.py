"""Multi-agent counterfactual search over drug-target affinity predictors."""

from macda.actions import DrugAction, JointAction, ProteinAction, enumerate_drug_actions, enumerate_protein_actions
from macda.errors import (
    ActionError,
    ConfigError,
    DataError,
    DimensionError,
    EmptyActionSpaceError,
    IntegrityError,
    MacdaError,
    SequenceError,
    SmilesError,
    ValenceError,
)
from macda.estimator import CounterfactualExplainer
from macda.marl import CounterfactualRecord, TrainConfig, joint_list_baseline, train_macda, train_mameg
from macda.metrics import EvalReport, druglikeness, evaluate, mutation_histogram
from macda.molgraph import Atom, Bond, BondOrder, MolGraph, canonical_certificate, compute_fingerprint, tanimoto
from macda.oracle import AffinityOracle, SubprocessOracle, SurrogateOracle, SurrogateSpec
from macda.protein import ProteinSeq, encode_protein, mutate_to_alanine
from macda.reward import RewardBreakdown, RewardWeights, total_reward
from macda.smiles import parse_smiles, write_smiles

__version__ = "0.1.0"

__all__ = [
    "ActionError",
    "AffinityOracle",
    "Atom",
    "Bond",
    "BondOrder",
    "ConfigError",
    "CounterfactualExplainer",
    "CounterfactualRecord",
    "DataError",
    "DimensionError",
    "DrugAction",
    "EmptyActionSpaceError",
    "EvalReport",
    "IntegrityError",
    "JointAction",
    "MacdaError",
    "MolGraph",
    "ProteinAction",
    "ProteinSeq",
    "RewardBreakdown",
    "RewardWeights",
    "SequenceError",
    "SmilesError",
    "SubprocessOracle",
    "SurrogateOracle",
    "SurrogateSpec",
    "TrainConfig",
    "ValenceError",
    "canonical_certificate",
    "compute_fingerprint",
    "druglikeness",
    "encode_protein",
    "enumerate_drug_actions",
    "enumerate_protein_actions",
    "evaluate",
    "joint_list_baseline",
    "mutate_to_alanine",
    "mutation_histogram",
    "parse_smiles",
    "tanimoto",
    "total_reward",
    "train_macda",
    "train_mameg",
    "write_smiles",
]
