"""Two-agent actor-critic search for joint drug/protein counterfactuals.

One agent edits the drug graph, the other substitutes a residue with alanine.
Episodes last a single joint step from the reference pair, so every visited
pair is one edit away on each side. Critics regress the shared reward; with
attention enabled (MACDA) each critic also sees the other agent's state-action
embedding, without it (MA-MEG) the two critics are independent.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from macda.actions import (
    ADD_ATOM,
    DEFAULT_ADMISSIBLE,
    DrugAction,
    JointAction,
    ProteinAction,
    add_atom,
    change_bond,
    enumerate_drug_actions,
    enumerate_protein_actions,
)
from macda.errors import ActionError, EmptyActionSpaceError, IntegrityError
from macda.molgraph import MolGraph, canonical_certificate, compute_fingerprint
from macda.neural import (
    AttentionHead,
    Mlp,
    attention_mix,
    leaky_relu,
    leaky_relu_grad,
    make_optimizer,
    softmax_policy,
)
from macda.oracle import AffinityOracle
from macda.protein import ProteinSeq, encode_protein
from macda.reward import SIGN_LEADING, AffinityQuad, RewardBreakdown, RewardWeights, breakdown
from macda.smiles import parse_smiles, write_smiles

log = logging.getLogger(__name__)

DRUG, PROTEIN = "drug", "protein"
ROLES = (DRUG, PROTEIN)

# independent random streams so that optional components never shift the others
_STREAMS = {
    "policy_drug": 1, "policy_protein": 2,
    "g_drug": 3, "g_protein": 4,
    "f_drug": 5, "f_protein": 6,
    "f_other_drug": 7, "f_other_protein": 8,
    "attention": 9, "sample": 10, "batch": 11,
}


def _stream(seed: int, pair_index: int, name: str) -> np.random.Generator:
    return np.random.default_rng([seed, pair_index, _STREAMS[name]])


@dataclass(frozen=True)
class TrainConfig:
    gamma: float = 0.99
    batch_size: int = 1024
    policy_lr: float = 0.001
    critic_lr: float = 0.001
    episodes: int = 10000
    seed: int = 0
    weights: RewardWeights = RewardWeights()
    top_k: int = 10
    hidden: tuple[int, ...] = (128, 128)
    key_dim: int = 32
    optimizer: str = "adam"
    temperature: float = 1.0
    sign_scope: str = SIGN_LEADING
    admissible: tuple[str, ...] = DEFAULT_ADMISSIBLE
    joint_list_score: str = "delta"

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")
        for name in ("batch_size", "policy_lr", "critic_lr", "top_k", "temperature", "key_dim"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.episodes < 0:
            raise ValueError("episodes must be non-negative")
        if not self.hidden or min(self.hidden) < 1:
            raise ValueError("hidden sizes must be positive")
        if self.joint_list_score not in ("delta", "sjoint"):
            raise ValueError("joint_list_score must be 'delta' or 'sjoint'")

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["hidden"] = list(self.hidden)
        doc["admissible"] = list(self.admissible)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> TrainConfig:
        doc = dict(doc)
        if "weights" in doc and not isinstance(doc["weights"], RewardWeights):
            doc["weights"] = RewardWeights(**doc["weights"])
        for key in ("hidden", "admissible"):
            if key in doc:
                doc[key] = tuple(doc[key])
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown training options: {sorted(unknown)}")
        return cls(**doc)


# ------------------------------------------------------------------ records


@dataclass(frozen=True)
class CounterfactualRecord:
    method: str
    pair_index: int
    drug_smiles: str
    cf_drug_smiles: str
    protein: str
    cf_protein: str
    drug_action: dict | None
    protein_action: dict | None
    affinities: AffinityQuad
    breakdown: RewardBreakdown
    weights: RewardWeights = RewardWeights()
    sign_scope: str = SIGN_LEADING
    drug_id: str | None = None
    protein_id: str | None = None

    @property
    def mutated_position(self) -> int | None:
        return None if self.protein_action is None else self.protein_action["position"]

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> CounterfactualRecord:
        doc = dict(doc)
        doc["affinities"] = AffinityQuad(**doc["affinities"])
        doc["breakdown"] = RewardBreakdown(**doc["breakdown"])
        doc["weights"] = RewardWeights(**doc["weights"])
        return cls(**doc)

    def recompute(self) -> RewardBreakdown:
        return breakdown(self.affinities, self.breakdown.sim_drug, self.breakdown.sim_protein,
                         self.weights, self.sign_scope)

    def audit(self) -> RewardBreakdown:
        """Recompute the breakdown from the stored oracle outputs; raise on mismatch."""
        fresh = self.recompute()
        if fresh != self.breakdown:
            raise IntegrityError(
                f"record {self.pair_index}/{self.cf_drug_smiles} does not reproduce its reward: "
                f"stored {self.breakdown}, recomputed {fresh}"
            )
        return fresh


def write_records(records: Iterable[CounterfactualRecord], fh):
    for rec in records:
        fh.write(rec.to_json() + "\n")


def read_records(fh) -> list[CounterfactualRecord]:
    return [CounterfactualRecord.from_dict(json.loads(line)) for line in fh if line.strip()]


# -------------------------------------------------------------- environment


def drug_observation(drug: MolGraph, oracle: AffinityOracle | None = None) -> np.ndarray:
    radius = oracle.radius if oracle is not None else 2
    nbits = oracle.nbits if oracle is not None else 2048
    return compute_fingerprint(drug, radius, nbits).to_array()


def protein_observation(protein: ProteinSeq) -> np.ndarray:
    return encode_protein(protein)


@dataclass(frozen=True)
class EnvState:
    reference: tuple[MolGraph, ProteinSeq]
    current: tuple[MolGraph, ProteinSeq]
    drug_obs: np.ndarray = field(repr=False, compare=False)
    protein_obs: np.ndarray = field(repr=False, compare=False)
    terminal: bool = False


def reset(drug: MolGraph, protein: ProteinSeq, oracle: AffinityOracle | None = None) -> EnvState:
    return EnvState((drug, protein), (drug, protein),
                    drug_observation(drug, oracle), protein_observation(protein), False)


def _check_drug_action(current: MolGraph, act: DrugAction):
    try:
        if act.kind == ADD_ATOM:
            redone = add_atom(current, act.atoms[0], act.element)
        else:
            redone = change_bond(current, *act.atoms, +1 if act.kind == "add_bond" else -1)
    except (ActionError, IndexError, ValueError) as exc:
        raise ActionError(f"drug action {act.describe()} is invalid here: {exc}") from None
    if canonical_certificate(redone) != canonical_certificate(act.result):
        raise ActionError(f"drug action {act.describe()} does not apply to the current drug")


def _check_protein_action(current: ProteinSeq, act: ProteinAction):
    if not 0 <= act.position < len(current) or current[act.position] != act.original \
            or act.original == "A" or act.result.residues[act.position] != "A":
        raise ActionError(f"protein action {act.describe()} does not apply to the current protein")


def env_step(state: EnvState, joint: JointAction, oracle: AffinityOracle,
             weights: RewardWeights = RewardWeights(), sign_scope: str = SIGN_LEADING,
             reference_value: float | None = None):
    """Apply a joint action; return the terminal successor state and its reward.

    The oracle is queried for the joint pair and both single-sided pairs; the
    reference prediction can be supplied to skip re-querying it.
    """
    if state.terminal:
        raise ActionError("episode already terminated")
    d, p = state.current
    d2, p2 = d, p
    if joint.drug is not None:
        _check_drug_action(d, joint.drug)
        d2 = joint.drug.result
    if joint.protein is not None:
        _check_protein_action(p, joint.protein)
        p2 = joint.protein.result
    ref = oracle.predict(d, p) if reference_value is None else reference_value
    quad = AffinityQuad(ref, oracle.predict(d2, p), oracle.predict(d, p2), oracle.predict(d2, p2))
    bd = breakdown(quad, oracle.drug_similarity(d, d2), oracle.protein_similarity(p, p2),
                   weights, sign_scope)
    nxt = EnvState(state.reference, (d2, p2), drug_observation(d2, oracle),
                   protein_observation(p2), True)
    return nxt, bd


class CounterfactualEnv:
    """Single reference pair with its enumerated action spaces and cached oracle calls.

    Exposes the index-based interface used by the trainers: ``drug_obs``,
    ``protein_obs`` (post-action observations, one row per action),
    ``context`` (reference observation) and ``reward(i, j)``.
    """

    def __init__(self, drug: MolGraph, protein: ProteinSeq, oracle: AffinityOracle,
                 weights: RewardWeights = RewardWeights(), sign_scope: str = SIGN_LEADING,
                 admissible: Sequence[str] = DEFAULT_ADMISSIBLE, pair_index: int = 0,
                 drug_id: str | None = None, protein_id: str | None = None):
        self.drug, self.protein, self.oracle = drug, protein, oracle
        self.weights, self.sign_scope = weights, sign_scope
        self.pair_index, self.drug_id, self.protein_id = pair_index, drug_id, protein_id
        self.drug_actions = enumerate_drug_actions(drug, admissible)
        self.protein_actions = enumerate_protein_actions(protein)
        if not self.drug_actions:
            raise EmptyActionSpaceError(DRUG)
        if not self.protein_actions:
            raise EmptyActionSpaceError(PROTEIN)
        self.state = reset(drug, protein, oracle)
        self.reference_value = oracle.predict(drug, protein)
        self.drug_obs = np.stack([drug_observation(a.result, oracle) for a in self.drug_actions])
        self.protein_obs = np.stack([protein_observation(a.result) for a in self.protein_actions]) / 20.0
        self.context = np.concatenate([self.state.drug_obs, self.state.protein_obs / 20.0])
        self._drug_only: dict[int, float] = {}
        self._protein_only: dict[int, float] = {}
        self._joint: dict[tuple[int, int], float] = {}
        self._sim_d: dict[int, float] = {}
        self._sim_p: dict[int, float] = {}
        self._cert = [canonical_certificate(a.result) for a in self.drug_actions]
        self.reference_smiles = write_smiles(drug)

    @property
    def n_drug(self) -> int:
        return len(self.drug_actions)

    @property
    def n_protein(self) -> int:
        return len(self.protein_actions)

    def _f_drug(self, i):
        if i is None:
            return self.reference_value
        if i not in self._drug_only:
            self._drug_only[i] = self.oracle.predict(self.drug_actions[i].result, self.protein)
        return self._drug_only[i]

    def _f_protein(self, j):
        if j is None:
            return self.reference_value
        if j not in self._protein_only:
            self._protein_only[j] = self.oracle.predict(self.drug, self.protein_actions[j].result)
        return self._protein_only[j]

    def _f_joint(self, i, j):
        if i is None:
            return self._f_protein(j)
        if j is None:
            return self._f_drug(i)
        if (i, j) not in self._joint:
            self._joint[(i, j)] = self.oracle.predict(self.drug_actions[i].result,
                                                      self.protein_actions[j].result)
        return self._joint[(i, j)]

    def sim_drug(self, i) -> float:
        if i is None:
            return 1.0
        if i not in self._sim_d:
            self._sim_d[i] = self.oracle.drug_similarity(self.drug, self.drug_actions[i].result)
        return self._sim_d[i]

    def sim_protein(self, j) -> float:
        if j is None:
            return 1.0
        if j not in self._sim_p:
            self._sim_p[j] = self.oracle.protein_similarity(self.protein, self.protein_actions[j].result)
        return self._sim_p[j]

    def evaluate(self, i: int | None, j: int | None) -> tuple[AffinityQuad, RewardBreakdown]:
        quad = AffinityQuad(self.reference_value, self._f_drug(i), self._f_protein(j), self._f_joint(i, j))
        return quad, breakdown(quad, self.sim_drug(i), self.sim_protein(j), self.weights, self.sign_scope)

    def reward(self, i: int, j: int) -> float:
        return self.evaluate(i, j)[1].reward

    def step(self, i: int | None, j: int | None) -> tuple[EnvState, RewardBreakdown]:
        joint = JointAction(None if i is None else self.drug_actions[i],
                            None if j is None else self.protein_actions[j])
        return env_step(self.state, joint, self.oracle, self.weights, self.sign_scope,
                        reference_value=self.reference_value)

    def certificate(self, i: int | None) -> bytes:
        return b"" if i is None else self._cert[i]

    def record(self, i: int | None, j: int | None, method: str) -> CounterfactualRecord:
        quad, bd = self.evaluate(i, j)
        d_act = None if i is None else self.drug_actions[i]
        p_act = None if j is None else self.protein_actions[j]
        return CounterfactualRecord(
            method=method,
            pair_index=self.pair_index,
            drug_smiles=self.reference_smiles,
            cf_drug_smiles=self.reference_smiles if d_act is None else write_smiles(d_act.result),
            protein=self.protein.residues,
            cf_protein=self.protein.residues if p_act is None else p_act.result.residues,
            drug_action=None if d_act is None else d_act.to_dict(),
            protein_action=None if p_act is None else p_act.to_dict(),
            affinities=quad,
            breakdown=bd,
            weights=self.weights,
            sign_scope=self.sign_scope,
            drug_id=self.drug_id,
            protein_id=self.protein_id,
        )


# ----------------------------------------------------------------- networks


def q_loss(q_value: float, reward: float, next_q: float | None = None, gamma: float = 0.99) -> float:
    """Temporal-difference residual ``R + gamma * Q(s', a') - Q(s, a)``.

    ``next_q=None`` marks a terminal transition (the successor term drops out).
    """
    target = reward if next_q is None else reward + gamma * next_q
    return target - q_value


class Agent:
    """Policy network scoring every candidate action's post-action observation."""

    def __init__(self, role: str, input_dim: int, hidden: Sequence[int],
                 rng: np.random.Generator, optimizer: str = "adam", lr: float = 1e-3,
                 temperature: float = 1.0):
        self.role = role
        self.temperature = temperature
        self.policy = Mlp([input_dim, *hidden, 1], rng)
        self.optimizer = make_optimizer(optimizer, self.policy.params, lr)

    @staticmethod
    def policy_inputs(context: np.ndarray, obs: np.ndarray) -> np.ndarray:
        return np.hstack([np.broadcast_to(context, (obs.shape[0], context.shape[0])), obs])

    def forward(self, inputs: np.ndarray):
        logits, cache = self.policy.forward(inputs)
        probs = softmax_policy(logits[:, 0], temperature=self.temperature)
        return probs, cache

    def distribution(self, inputs: np.ndarray) -> np.ndarray:
        return self.forward(inputs)[0]


def policy_update(agent: Agent, inputs: np.ndarray, action: int, q_signal: float, forward=None):
    """One step of ``theta <- theta + lr * Q(s, a) * grad log pi(a | s)``.

    ``forward`` may carry a ``(probs, cache)`` pair already computed for
    ``inputs`` with the current parameters.
    """
    probs, cache = forward if forward is not None else agent.forward(inputs)
    if probs[action] <= 0:
        raise ActionError(f"action {action} has zero probability under the {agent.role} policy")
    d_logits = -probs.copy()
    d_logits[action] += 1.0
    # optimisers descend, so hand them the negated ascent direction
    upstream = (-q_signal / agent.temperature) * d_logits[:, None]
    grads, _ = agent.policy.backward(cache, upstream)
    agent.optimizer.step(grads)
    return grads


class Critic:
    """Per-agent Q heads ``Q_i = f_i(g_i(s_i, a_i), x_i)``.

    ``g_i`` embeds the post-action observation. With attention, ``x_i`` mixes
    the other agent's embedding through a shared :class:`AttentionHead`;
    without it the ``x_i`` input is absent and the critics are independent.
    ``f_i``'s first layer keeps separate weights for ``g_i`` and ``x_i``.
    """

    def __init__(self, obs_dims: dict[str, int], hidden: Sequence[int], seed: int,
                 pair_index: int = 0, attention: bool = True, key_dim: int = 32):
        self.attention = attention
        embed = hidden[-1]
        self.g = {r: Mlp([obs_dims[r], *hidden], _stream(seed, pair_index, f"g_{r}")) for r in ROLES}
        self.f_self: dict[str, list[np.ndarray]] = {}
        self.f_other: dict[str, np.ndarray] = {}
        self.f_rest: dict[str, Mlp] = {}
        for r in ROLES:
            rng = _stream(seed, pair_index, f"f_{r}")
            bound = 1.0 / np.sqrt(embed)
            self.f_self[r] = [rng.uniform(-bound, bound, (embed, hidden[0])), np.zeros(hidden[0])]
            self.f_rest[r] = Mlp([hidden[0], 1], rng)
            if attention:
                orng = _stream(seed, pair_index, f"f_other_{r}")
                self.f_other[r] = orng.uniform(-bound, bound, (embed, hidden[0]))
        self.head = AttentionHead(embed, key_dim, embed, _stream(seed, pair_index, "attention")) if attention else None

    def named_params(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for r in ROLES:
            out += [(f"g_{r}.{k}", p) for k, p in enumerate(self.g[r].params)]
            out += [(f"f_{r}.self_W", self.f_self[r][0]), (f"f_{r}.b", self.f_self[r][1])]
            out += [(f"f_{r}.rest.{k}", p) for k, p in enumerate(self.f_rest[r].params)]
            if self.attention:
                out.append((f"f_{r}.other_W", self.f_other[r]))
        if self.head is not None:
            out += [("attention.W_q", self.head.W_q), ("attention.W_k", self.head.W_k),
                    ("attention.V", self.head.V)]
        return out

    @property
    def params(self) -> list[np.ndarray]:
        return [p for _, p in self.named_params()]

    def forward(self, obs: dict[str, np.ndarray], index: dict[str, np.ndarray]):
        """Q values for a batch of joint actions.

        ``obs[r]`` holds one post-action observation per candidate of role
        ``r`` and ``index[r]`` selects a candidate per batch row; each distinct
        candidate is embedded once.
        """
        cache: dict = {"index": {}, "g": {}, "f": {}}
        emb = {}
        for r in ROLES:
            uniq, inv = np.unique(np.asarray(index[r]), return_inverse=True)
            e_u, g_cache = self.g[r].forward(obs[r][uniq])
            emb[r] = e_u[inv]
            cache["index"][r] = (uniq.shape[0], inv)
            cache["g"][r] = g_cache
        mix, att_cache = {}, {}
        if self.head is not None:
            for r, o in ((DRUG, PROTEIN), (PROTEIN, DRUG)):
                x, w, att_cache[r] = self.head.forward(emb[r], emb[o][:, None, :])
                assert np.all(w == 1.0), "two-agent attention weight must be exactly 1"
                mix[r] = x
        q = {}
        for r in ROLES:
            W_s, b = self.f_self[r]
            z = emb[r] @ W_s
            if self.head is not None:
                z = z + mix[r] @ self.f_other[r]
            z = z + b
            h = leaky_relu(z)
            out, rest_cache = self.f_rest[r].forward(h)
            q[r] = out[:, 0]
            cache["f"][r] = (z, rest_cache)
        cache.update(emb=emb, mix=mix, att=att_cache)
        return q, cache

    def backward(self, cache, dq: dict[str, np.ndarray]) -> list[np.ndarray]:
        grads: dict[str, np.ndarray] = {}
        d_emb = {r: np.zeros_like(cache["emb"][r]) for r in ROLES}
        d_mix = {}
        for r in ROLES:
            z, rest_cache = cache["f"][r]
            rest_grads, d_h = self.f_rest[r].backward(rest_cache, dq[r][:, None])
            for k, gk in enumerate(rest_grads):
                grads[f"f_{r}.rest.{k}"] = gk
            d_z = d_h * leaky_relu_grad(z)
            grads[f"f_{r}.self_W"] = cache["emb"][r].T @ d_z
            grads[f"f_{r}.b"] = d_z.sum(axis=0)
            d_emb[r] += d_z @ self.f_self[r][0].T
            if self.head is not None:
                grads[f"f_{r}.other_W"] = cache["mix"][r].T @ d_z
                d_mix[r] = d_z @ self.f_other[r].T
        if self.head is not None:
            acc = [np.zeros_like(p) for p in self.head.params]
            for r, o in ((DRUG, PROTEIN), (PROTEIN, DRUG)):
                p_grads, d_self, d_others = self.head.backward(cache["att"][r], d_mix[r])
                acc = [a + g for a, g in zip(acc, p_grads)]
                d_emb[r] += d_self
                d_emb[o] += d_others[:, 0, :]
            grads["attention.W_q"], grads["attention.W_k"], grads["attention.V"] = acc
        for r in ROLES:
            n_uniq, inv = cache["index"][r]
            d_u = np.zeros((n_uniq, d_emb[r].shape[1]))
            np.add.at(d_u, inv, d_emb[r])
            g_grads, _ = self.g[r].backward(cache["g"][r], d_u)
            for k, gk in enumerate(g_grads):
                grads[f"g_{r}.{k}"] = gk
        return [grads[name] for name, _ in self.named_params()]

    def embed(self, role: str, obs_row: np.ndarray) -> np.ndarray:
        return self.g[role](obs_row)


def maac_q(critic: Critic, role: str, obs_self: np.ndarray, other_embedding: np.ndarray | None) -> float:
    """Q value of one agent's state-action given the other agent's embedding."""
    W_s, b = critic.f_self[role]
    z = critic.embed(role, obs_self) @ W_s
    if critic.head is not None:
        if other_embedding is None:
            raise ValueError("an attention critic needs the other agent's embedding")
        x, w = attention_mix(critic.embed(role, obs_self), other_embedding, critic.head)
        if not (w.shape == (1,) and w[0] == 1.0):
            raise AssertionError("two-agent attention weight must be exactly 1")
        z = z + x @ critic.f_other[role]
    z = z + b
    return float(critic.f_rest[role](leaky_relu(z))[0])


# ------------------------------------------------------------------ trainer


@dataclass
class EpisodeLog:
    episode: int
    drug_action: int
    protein_action: int
    reward: float
    critic_loss: float


def active_columns(matrix: np.ndarray) -> np.ndarray:
    """Indices of columns with at least one non-zero entry (at least one column kept)."""
    cols = np.flatnonzero(np.any(matrix != 0, axis=0))
    return cols if cols.size else np.arange(min(1, matrix.shape[1]))


class ActorCriticTrainer:
    """Runs the two-agent loop on one reference pair.

    ``problem`` needs ``drug_obs``, ``protein_obs``, ``context`` and
    ``reward(i, j)``; :class:`CounterfactualEnv` is the real one.
    """

    def __init__(self, problem, config: TrainConfig, attention: bool = True,
                 freeze_value: bool = False, pair_index: int = 0):
        self.problem = problem
        self.config = config
        self.attention = attention
        seed = config.seed
        # features that are zero for every candidate get exactly zero gradient
        # (and zero Adam moments), so dropping them changes nothing but cost
        obs = {DRUG: np.asarray(problem.drug_obs, float), PROTEIN: np.asarray(problem.protein_obs, float)}
        self.obs = {r: obs[r][:, active_columns(obs[r])] for r in ROLES}
        ctx = np.asarray(problem.context, float)
        self.inputs = {}
        for r in ROLES:
            full = Agent.policy_inputs(ctx, obs[r])
            self.inputs[r] = full[:, active_columns(full)]
        self.agents = {
            r: Agent(r, self.inputs[r].shape[1], config.hidden,
                     _stream(seed, pair_index, f"policy_{r}"), config.optimizer,
                     config.policy_lr, config.temperature)
            for r in ROLES
        }
        self.critic = Critic({r: self.obs[r].shape[1] for r in ROLES}, config.hidden, seed,
                             pair_index, attention, config.key_dim)
        frozen = []
        if freeze_value:
            if not attention:
                raise ValueError("freeze_value only applies to the attention critic")
            self.critic.head.V[...] = 0.0
            names = [n for n, _ in self.critic.named_params()]
            frozen = [names.index("attention.V")]
        self.critic_opt = make_optimizer(config.optimizer, self.critic.params, config.critic_lr, frozen)
        self.sample_rng = _stream(seed, pair_index, "sample")
        self.batch_rng = _stream(seed, pair_index, "batch")
        self.buffer_d: list[int] = []
        self.buffer_p: list[int] = []
        self.buffer_r: list[float] = []
        self.visited: dict[tuple[int, int], int] = {}

    def _critic_step(self) -> float:
        n = len(self.buffer_r)
        if n > self.config.batch_size:
            idx = np.sort(self.batch_rng.choice(n, self.config.batch_size, replace=False))
        else:
            idx = np.arange(n)
        d = np.asarray(self.buffer_d)[idx]
        p = np.asarray(self.buffer_p)[idx]
        r = np.asarray(self.buffer_r)[idx]
        # rewards are a function of the joint action, so repeated pairs in the
        # batch share a residual; evaluate each distinct pair once with its count
        keys = d * len(self.obs[PROTEIN]) + p
        _, first, counts = np.unique(keys, return_index=True, return_counts=True)
        d, p, r = d[first], p[first], r[first]
        weight = counts / len(idx)
        q, cache = self.critic.forward(self.obs, {DRUG: d, PROTEIN: p})
        # episodes are one step long, so every target is terminal
        res = {k: -q_loss(q[k], r) for k in ROLES}
        loss = float(sum(np.dot(weight, res[k] ** 2) for k in ROLES))
        grads = self.critic.backward(cache, {k: 2.0 * weight * res[k] for k in ROLES})
        self.critic_opt.step(grads)
        return loss

    def q_pair(self, i: int, j: int) -> dict[str, float]:
        q, _ = self.critic.forward(self.obs, {DRUG: np.array([i]), PROTEIN: np.array([j])})
        return {r: float(q[r][0]) for r in ROLES}

    def episode(self, t: int) -> EpisodeLog:
        fwd = {r: self.agents[r].forward(self.inputs[r]) for r in ROLES}
        i = int(self.sample_rng.choice(len(fwd[DRUG][0]), p=fwd[DRUG][0]))
        j = int(self.sample_rng.choice(len(fwd[PROTEIN][0]), p=fwd[PROTEIN][0]))
        reward = float(self.problem.reward(i, j))
        self.visited[(i, j)] = self.visited.get((i, j), 0) + 1
        self.buffer_d.append(i)
        self.buffer_p.append(j)
        self.buffer_r.append(reward)
        loss = self._critic_step()
        q = self.q_pair(i, j)
        policy_update(self.agents[DRUG], self.inputs[DRUG], i, q[DRUG], fwd[DRUG])
        policy_update(self.agents[PROTEIN], self.inputs[PROTEIN], j, q[PROTEIN], fwd[PROTEIN])
        return EpisodeLog(t, i, j, reward, loss)

    def run(self, episodes: int | None = None, callback: Callable[[EpisodeLog, ActorCriticTrainer], None] | None = None):
        episodes = self.config.episodes if episodes is None else episodes
        for t in range(episodes):
            entry = self.episode(t)
            if callback is not None:
                callback(entry, self)
            if t and t % 1000 == 0:
                log.info("episode %d: reward %.4f critic loss %.5f", t, entry.reward, entry.critic_loss)
        return self

    def policies(self) -> dict[str, np.ndarray]:
        return {r: self.agents[r].distribution(self.inputs[r]) for r in ROLES}

    def named_parameters(self) -> dict[str, np.ndarray]:
        out = {}
        for r in ROLES:
            for k, p in enumerate(self.agents[r].policy.params):
                out[f"policy_{r}.{k}"] = p
        out.update({f"critic.{n}": p for n, p in self.critic.named_params()})
        return out


# ---------------------------------------------------------------- harvesting


def _as_pairs(pairs) -> list[tuple]:
    if isinstance(pairs, tuple) and len(pairs) == 2 and isinstance(pairs[1], (ProteinSeq, str)):
        pairs = [pairs]
    out = []
    for item in pairs:
        d, p = item[0], item[1]
        d = parse_smiles(d) if isinstance(d, str) else d
        p = ProteinSeq(p) if isinstance(p, str) else p
        ids = tuple(item[2:4]) if len(item) >= 4 else (None, None)
        out.append((d, p, *ids))
    return out


def top_records(env: CounterfactualEnv, pairs: Iterable[tuple[int | None, int | None]],
                method: str, k: int) -> list[CounterfactualRecord]:
    """Best ``k`` distinct counterfactuals by reward (ties broken canonically)."""
    scored = []
    for i, j in set(pairs):
        bd = env.evaluate(i, j)[1]
        pos = -1 if j is None else env.protein_actions[j].position
        key = (-bd.reward, env.certificate(i), pos, -1 if i is None else i)
        scored.append((key, i, j))
    scored.sort(key=lambda s: s[0])
    out, seen = [], set()
    for (_, cert, pos, _), i, j in scored:
        if (cert, pos) in seen:
            continue
        seen.add((cert, pos))
        out.append(env.record(i, j, method))
        if len(out) == k:
            break
    return out


def _train(pairs, oracle, config: TrainConfig, attention: bool, method: str,
           freeze_value: bool = False) -> list[CounterfactualRecord]:
    if config.episodes == 0:
        return []
    records = []
    for index, (d, p, did, pid) in enumerate(_as_pairs(pairs)):
        env = CounterfactualEnv(d, p, oracle, config.weights, config.sign_scope, config.admissible,
                                index, did, pid)
        trainer = ActorCriticTrainer(env, config, attention, freeze_value, index)
        trainer.run()
        records += top_records(env, trainer.visited, method, config.top_k)
    return records


def train_macda(pairs, oracle: AffinityOracle, config: TrainConfig = TrainConfig()) -> list[CounterfactualRecord]:
    """Attention-coupled actor-critic search; top-k records per reference pair."""
    return _train(pairs, oracle, config, attention=True, method="macda")


def train_mameg(pairs, oracle: AffinityOracle, config: TrainConfig = TrainConfig()) -> list[CounterfactualRecord]:
    """Same loop with independent critics (no cross-agent attention)."""
    return _train(pairs, oracle, config, attention=False, method="mameg")


def joint_list_baseline(pairs, oracle: AffinityOracle, config: TrainConfig = TrainConfig(),
                        k: int | None = None) -> list[CounterfactualRecord]:
    """Cross join of the k best single-sided counterfactuals on each side."""
    k = config.top_k if k is None else k
    w = config.weights
    records = []
    for index, (d, p, did, pid) in enumerate(_as_pairs(pairs)):
        env = CounterfactualEnv(d, p, oracle, w, config.sign_scope, config.admissible, index, did, pid)

        def side_score(value: float) -> float:
            change = value - env.reference_value
            if config.joint_list_score == "sjoint":
                return -np.sign(change) * abs(change)
            return abs(change)

        drug_scores = [w.alpha_r * side_score(env._f_drug(i)) + w.alpha_d * env.sim_drug(i)
                       for i in range(env.n_drug)]
        prot_scores = [w.alpha_r * side_score(env._f_protein(j)) + w.alpha_p * env.sim_protein(j)
                       for j in range(env.n_protein)]
        top_d = sorted(range(env.n_drug), key=lambda i: (-drug_scores[i], env.certificate(i)))[:k]
        top_p = sorted(range(env.n_protein), key=lambda j: (-prot_scores[j], j))[:k]
        records += top_records(env, [(i, j) for i in top_d for j in top_p], "jointlist", k)
    return records


METHODS = {"macda": train_macda, "mameg": train_mameg, "jointlist": joint_list_baseline}
