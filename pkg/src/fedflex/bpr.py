"""BPR matrix factorization: pairwise SGD training, scoring, top-K ranking,
and the item-side delta exchanged with the aggregator.

Item parameters live in dense arrays indexed by the ascending item_id order,
which doubles as the canonical flattening order on the wire: for each item,
its ``dim`` factor coordinates followed by its bias.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .catalog import ItemCatalog
from .profiles import UserProfile


class ModelError(ValueError):
    """Raised on unknown ids or shape mismatches."""


@dataclass
class TrainConfig:
    learning_rate: float = 0.05
    reg: float = 0.01
    epochs: int = 20
    negatives_per_positive: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.reg < 0:
            raise ValueError("reg must be non-negative")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.negatives_per_positive < 1:
            raise ValueError("negatives_per_positive must be >= 1")


class ModelParameters:
    """Latent factors and item biases.

    ``item_ids`` is stored sorted ascending; ``item_factors`` is an
    (n_items, dim) array and ``item_bias`` an (n_items,) array in that order.
    User factors are a per-user mapping and never leave the device.
    """

    def __init__(
        self,
        dim: int,
        item_ids: Sequence[str],
        item_factors: np.ndarray,
        item_bias: np.ndarray,
        user_factors: dict[str, np.ndarray],
    ):
        self.dim = dim
        self.item_ids = sorted(item_ids)
        self.item_index = {iid: n for n, iid in enumerate(self.item_ids)}
        self.item_factors = item_factors
        self.item_bias = item_bias
        self.user_factors = user_factors

    def copy(self) -> "ModelParameters":
        return ModelParameters(
            self.dim,
            self.item_ids,
            self.item_factors.copy(),
            self.item_bias.copy(),
            {u: f.copy() for u, f in self.user_factors.items()},
        )

    def item_vector(self) -> np.ndarray:
        """Item parameters flattened in canonical order (factors then bias per
        item, items ascending by id)."""
        return np.concatenate(
            [self.item_factors, self.item_bias[:, None]], axis=1
        ).ravel()

    def set_item_vector(self, vector: np.ndarray) -> None:
        """Replace item parameters from a canonical flat vector."""
        expected = len(self.item_ids) * (self.dim + 1)
        if vector.shape != (expected,):
            raise ModelError(f"expected vector of length {expected}, got {vector.shape}")
        block = vector.reshape(len(self.item_ids), self.dim + 1)
        self.item_factors = block[:, : self.dim].copy()
        self.item_bias = block[:, self.dim].copy()

    def assert_finite(self) -> None:
        if not (
            np.all(np.isfinite(self.item_factors))
            and np.all(np.isfinite(self.item_bias))
            and all(np.all(np.isfinite(f)) for f in self.user_factors.values())
        ):
            raise ModelError("non-finite parameter value")


@dataclass
class ModelUpdate:
    """Item-side parameter delta in canonical flattening order."""

    dim: int
    key_manifest: list[str]  # ascending item_ids defining the coordinate frame
    vector: np.ndarray  # length len(key_manifest) * (dim + 1)

    def __post_init__(self):
        if self.vector.shape != (len(self.key_manifest) * (self.dim + 1),):
            raise ModelError("update vector length does not match manifest")


def init_model(
    user_ids: Iterable[str], item_ids: Iterable[str], dim: int, seed: int
) -> ModelParameters:
    """Factors ~ Normal(0, 0.01^2), biases zero; deterministic for a seed."""
    if dim < 1:
        raise ModelError("dim must be >= 1")
    item_ids = sorted(item_ids)
    if not item_ids:
        raise ModelError("empty item set")
    rng = np.random.default_rng(seed)
    item_factors = rng.normal(0.0, 0.01, size=(len(item_ids), dim))
    user_factors = {u: rng.normal(0.0, 0.01, size=dim) for u in sorted(user_ids)}
    return ModelParameters(dim, item_ids, item_factors, np.zeros(len(item_ids)), user_factors)


def score(model: ModelParameters, user_id: str, item_id: str) -> float:
    if user_id not in model.user_factors:
        raise ModelError(f"unknown user {user_id}")
    if item_id not in model.item_index:
        raise ModelError(f"unknown item {item_id}")
    idx = model.item_index[item_id]
    return float(model.item_bias[idx] + model.user_factors[user_id] @ model.item_factors[idx])


def score_all(model: ModelParameters, user_id: str) -> np.ndarray:
    """Scores for every item in canonical order."""
    if user_id not in model.user_factors:
        raise ModelError(f"unknown user {user_id}")
    return model.item_factors @ model.user_factors[user_id] + model.item_bias


def _sigmoid(x: float) -> float:
    # branch for numerical stability at large |x|
    if x >= 0:
        return 1.0 / (1.0 + np.exp(-x))
    z = np.exp(x)
    return z / (1.0 + z)


def _step_inplace(
    model: ModelParameters, user_id: str, pos: int, neg: int, lr: float, reg: float
) -> None:
    pu = model.user_factors[user_id]
    qi = model.item_factors[pos].copy()
    qj = model.item_factors[neg].copy()
    x_uij = (
        model.item_bias[pos] - model.item_bias[neg] + pu @ (qi - qj)
    )
    s = _sigmoid(-x_uij)
    pu_old = pu.copy()
    pu += lr * (s * (qi - qj) - reg * pu_old)
    model.item_factors[pos] += lr * (s * pu_old - reg * qi)
    model.item_factors[neg] += lr * (-s * pu_old - reg * qj)
    model.item_bias[pos] += lr * (s - reg * model.item_bias[pos])
    model.item_bias[neg] += lr * (-s - reg * model.item_bias[neg])


def bpr_step(
    model: ModelParameters, triple: tuple[str, str, str], config: TrainConfig
) -> ModelParameters:
    """One pairwise SGD step on (user, positive item, negative item).

    All reads use pre-step values; the input model is left untouched.
    """
    user_id, pos_id, neg_id = triple
    if user_id not in model.user_factors:
        raise ModelError(f"unknown user {user_id}")
    for iid in (pos_id, neg_id):
        if iid not in model.item_index:
            raise ModelError(f"unknown item {iid}")
    out = model.copy()
    _step_inplace(
        out,
        user_id,
        out.item_index[pos_id],
        out.item_index[neg_id],
        config.learning_rate,
        config.reg,
    )
    return out


def pairwise_loss(
    model: ModelParameters, triple: tuple[str, str, str], reg: float
) -> float:
    """-ln sigma(x_ui - x_uj) + (reg/2) * ||theta||^2 over the five parameter
    groups the step touches. ``bpr_step`` is exact gradient descent on this."""
    user_id, pos_id, neg_id = triple
    pu = model.user_factors[user_id]
    i, j = model.item_index[pos_id], model.item_index[neg_id]
    qi, qj = model.item_factors[i], model.item_factors[j]
    x_uij = model.item_bias[i] - model.item_bias[j] + pu @ (qi - qj)
    penalty = 0.5 * reg * (
        pu @ pu + qi @ qi + qj @ qj + model.item_bias[i] ** 2 + model.item_bias[j] ** 2
    )
    return float(-np.log(_sigmoid(x_uij)) + penalty)


def _sample_negatives(
    rng: np.random.Generator, n_items: int, pos_mask: np.ndarray, size: int
) -> np.ndarray:
    """Uniform draws over non-positive items, deterministic for the
    generator state: bad draws are redrawn in vectorized waves."""
    draws = rng.integers(n_items, size=size)
    bad = np.flatnonzero(pos_mask[draws])
    while bad.size:
        draws[bad] = rng.integers(n_items, size=bad.size)
        bad = bad[pos_mask[draws[bad]]]
    return draws


def _run_steps(
    pu: np.ndarray,
    item_factors: np.ndarray,
    item_bias: np.ndarray,
    pos_seq: np.ndarray,
    neg_seq: np.ndarray,
    lr: float,
    reg: float,
) -> None:
    for t in range(pos_seq.shape[0]):
        i, j = int(pos_seq[t]), int(neg_seq[t])
        qi = item_factors[i].copy()
        qj = item_factors[j].copy()
        x_uij = item_bias[i] - item_bias[j] + pu @ (qi - qj)
        s = _sigmoid(-x_uij)
        pu_old = pu.copy()
        pu += lr * (s * (qi - qj) - reg * pu_old)
        item_factors[i] += lr * (s * pu_old - reg * qi)
        item_factors[j] += lr * (-s * pu_old - reg * qj)
        item_bias[i] += lr * (s - reg * item_bias[i])
        item_bias[j] += lr * (-s - reg * item_bias[j])


try:  # the jit path makes per-round retraining from the global base cheap
    from numba import njit as _njit

    @_njit(cache=True)
    def _run_steps_jit(pu, item_factors, item_bias, pos_seq, neg_seq, lr, reg):
        dim = pu.shape[0]
        for t in range(pos_seq.shape[0]):
            i, j = pos_seq[t], neg_seq[t]
            x_uij = item_bias[i] - item_bias[j]
            for d in range(dim):
                x_uij += pu[d] * (item_factors[i, d] - item_factors[j, d])
            # s = sigma(-x_uij), branch keeps the exponent non-positive
            if x_uij >= 0:
                z = np.exp(-x_uij)
                s = z / (1.0 + z)
            else:
                s = 1.0 / (1.0 + np.exp(x_uij))
            for d in range(dim):
                pu_old = pu[d]
                qi = item_factors[i, d]
                qj = item_factors[j, d]
                pu[d] += lr * (s * (qi - qj) - reg * pu_old)
                item_factors[i, d] += lr * (s * pu_old - reg * qi)
                item_factors[j, d] += lr * (-s * pu_old - reg * qj)
            item_bias[i] += lr * (s - reg * item_bias[i])
            item_bias[j] += lr * (-s - reg * item_bias[j])

    _STEP_RUNNER = _run_steps_jit
except ImportError:  # pragma: no cover - numba is an optional accelerator
    _STEP_RUNNER = _run_steps


def train_local(
    model: ModelParameters,
    profile: UserProfile,
    catalog: ItemCatalog,
    config: TrainConfig,
) -> tuple[ModelParameters, bool]:
    """Pairwise SGD over the profile's positives with uniform negative
    sampling.

    The (positive, negative) step sequence is drawn up front from one seeded
    generator, so a fixed seed reproduces the run exactly. Returns
    ``(model, trained)``; a profile with no positives is a cold start and the
    model comes back unchanged with ``trained=False``.
    """
    positives = sorted(p for p in profile.positives() if p in model.item_index)
    if not positives:
        return model, False
    out = model.copy()
    if profile.user_id not in out.user_factors:
        rng_init = np.random.default_rng([config.seed, 0xC01D])
        out.user_factors[profile.user_id] = rng_init.normal(0.0, 0.01, size=out.dim)
    pos_idx = np.array([out.item_index[p] for p in positives], dtype=np.int64)
    pos_mask = np.zeros(len(out.item_ids), dtype=bool)
    pos_mask[pos_idx] = True
    rng = np.random.default_rng(config.seed)
    n_neg = config.negatives_per_positive
    pos_chunks, neg_chunks = [], []
    for _ in range(config.epochs):
        order = rng.permutation(len(pos_idx))
        epoch_pos = np.repeat(pos_idx[order], n_neg)
        pos_chunks.append(epoch_pos)
        neg_chunks.append(
            _sample_negatives(rng, len(out.item_ids), pos_mask, epoch_pos.size)
        )
    pos_seq = np.concatenate(pos_chunks)
    neg_seq = np.concatenate(neg_chunks).astype(np.int64)
    _STEP_RUNNER(
        out.user_factors[profile.user_id],
        out.item_factors,
        out.item_bias,
        pos_seq,
        neg_seq,
        config.learning_rate,
        config.reg,
    )
    out.assert_finite()
    return out, True


def auc(
    model: ModelParameters,
    heldout: Sequence[tuple[str, str, Sequence[str]]],
) -> float:
    """Fraction of (positive, negative) comparisons ranked correctly; ties
    count half. ``heldout`` is (user, positive item, negatives)."""
    if not heldout:
        raise ModelError("empty held-out set")
    wins = 0.0
    total = 0
    for user_id, pos_id, neg_ids in heldout:
        pos_score = score(model, user_id, pos_id)
        for neg_id in neg_ids:
            neg_score = score(model, user_id, neg_id)
            if pos_score > neg_score:
                wins += 1.0
            elif pos_score == neg_score:
                wins += 0.5
            total += 1
    if total == 0:
        raise ModelError("empty held-out set")
    return wins / total


def top_k(
    model: ModelParameters,
    user_id: str,
    catalog: ItemCatalog,
    k: int,
    excluded: set[str] | None = None,
) -> list[str]:
    """The k highest-scoring catalog items not excluded, descending by score,
    ties broken by ascending item_id."""
    if k < 1:
        raise ModelError("k must be >= 1")
    excluded = excluded or set()
    scores = score_all(model, user_id)
    eligible = [
        n
        for n, iid in enumerate(model.item_ids)
        if iid in catalog and iid not in excluded
    ]
    if not eligible:
        return []
    eligible = np.array(eligible)
    # stable sort on -score keeps ascending item index (= ascending id) on ties
    order = np.argsort(-scores[eligible], kind="stable")
    return [model.item_ids[n] for n in eligible[order[:k]]]


def diff(old: ModelParameters, new: ModelParameters) -> ModelUpdate:
    """Item-side delta new - old; user factors never enter the update."""
    if old.dim != new.dim or old.item_ids != new.item_ids:
        raise ModelError("models have mismatched shapes")
    return ModelUpdate(
        dim=old.dim,
        key_manifest=list(old.item_ids),
        vector=new.item_vector() - old.item_vector(),
    )


def apply_update(model: ModelParameters, update: ModelUpdate) -> ModelParameters:
    """Add an item-side delta onto the model; user factors untouched."""
    if update.dim != model.dim or update.key_manifest != model.item_ids:
        raise ModelError("update does not match model shape")
    out = model.copy()
    out.set_item_vector(out.item_vector() + update.vector)
    return out
