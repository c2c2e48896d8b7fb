"""scikit-learn style wrapper around the counterfactual search."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from macda.errors import DataError, SequenceError, SmilesError
from macda.marl import METHODS, TrainConfig
from macda.metrics import evaluate
from macda.molgraph import MolGraph
from macda.oracle import AffinityOracle, load_oracle
from macda.protein import ProteinSeq
from macda.reward import SIGN_LEADING, RewardWeights
from macda.smiles import parse_smiles, write_smiles


def check_pairs(X) -> list[tuple[MolGraph, ProteinSeq]]:
    """Validate ``X`` as a sequence of (SMILES or MolGraph, sequence) pairs."""
    if isinstance(X, np.ndarray):
        if X.ndim != 2 or X.shape[1] != 2:
            raise DataError(f"expected an (n, 2) array of pairs, got shape {X.shape}")
        X = X.tolist()
    try:
        items = list(X)
    except TypeError:
        raise DataError("pairs must be an iterable of (drug, protein)") from None
    if not items:
        raise DataError("no pairs given")
    out = []
    for k, item in enumerate(items):
        if len(item) != 2:
            raise DataError(f"pair {k} has {len(item)} fields, expected 2")
        d, p = item
        try:
            d = d if isinstance(d, MolGraph) else parse_smiles(d)
            p = p if isinstance(p, ProteinSeq) else ProteinSeq(p)
        except (SmilesError, SequenceError) as exc:
            raise DataError(f"pair {k}: {exc}") from None
        out.append((d, p))
    return out


class CounterfactualExplainer(BaseEstimator, TransformerMixin):
    """Search joint drug/protein counterfactuals for each input pair.

    ``fit`` runs the selected method and keeps the harvested records;
    ``transform`` maps each pair to its best counterfactual (SMILES, sequence);
    ``predict`` returns the oracle's affinity for each pair; ``score`` is the
    average delta-joint of the harvested records.
    """

    def __init__(self, oracle="surrogate:0", method="macda", episodes=10000, seed=0, top_k=10,
                 gamma=0.99, batch_size=1024, policy_lr=0.001, critic_lr=0.001,
                 alpha_r=1.0, alpha_d=0.05, alpha_p=0.01, hidden=(128, 128),
                 optimizer="adam", temperature=1.0, sign_scope=SIGN_LEADING):
        self.oracle = oracle
        self.method = method
        self.episodes = episodes
        self.seed = seed
        self.top_k = top_k
        self.gamma = gamma
        self.batch_size = batch_size
        self.policy_lr = policy_lr
        self.critic_lr = critic_lr
        self.alpha_r = alpha_r
        self.alpha_d = alpha_d
        self.alpha_p = alpha_p
        self.hidden = hidden
        self.optimizer = optimizer
        self.temperature = temperature
        self.sign_scope = sign_scope

    def _oracle(self) -> AffinityOracle:
        return self.oracle if isinstance(self.oracle, AffinityOracle) else load_oracle(self.oracle)

    def _config(self) -> TrainConfig:
        return TrainConfig(
            gamma=self.gamma, batch_size=self.batch_size, policy_lr=self.policy_lr,
            critic_lr=self.critic_lr, episodes=self.episodes, seed=self.seed,
            weights=RewardWeights(self.alpha_r, self.alpha_d, self.alpha_p), top_k=self.top_k,
            hidden=tuple(self.hidden), optimizer=self.optimizer, temperature=self.temperature,
            sign_scope=self.sign_scope,
        )

    def fit(self, X, y=None):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {sorted(METHODS)}")
        pairs = check_pairs(X)
        oracle = self._oracle()
        self.records_ = METHODS[self.method](pairs, oracle, self._config())
        self.n_pairs_ = len(pairs)
        self.best_ = {}
        for rec in self.records_:
            self.best_.setdefault(rec.pair_index, rec)
        return self

    def transform(self, X):
        """Best counterfactual per pair as an ``(n, 2)`` object array.

        Pairs without a harvested record (``episodes=0``) map to themselves.
        """
        check_is_fitted(self, "records_")
        pairs = check_pairs(X)
        if len(pairs) != self.n_pairs_:
            raise DataError(f"fitted on {self.n_pairs_} pairs, got {len(pairs)}")
        out = np.empty((len(pairs), 2), dtype=object)
        for k, (d, p) in enumerate(pairs):
            rec = self.best_.get(k)
            if rec is None:
                out[k] = (write_smiles(d), p.residues)
            else:
                out[k] = (rec.cf_drug_smiles, rec.cf_protein)
        return out

    def predict(self, X) -> np.ndarray:
        return self._oracle().predict_many(check_pairs(X))

    def score(self, X=None, y=None) -> float:
        check_is_fitted(self, "records_")
        if not self.records_:
            raise DataError("no records to score")
        return evaluate(self.records_).avg_delta_joint
