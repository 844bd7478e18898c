"""Round-based averaging aggregation.

The aggregator keeps a ledger of rounds. Clients in sharing mode submit one
privatized item-parameter delta per round; advancing a round averages the
received deltas per coordinate (union frame, missing coordinates contribute
zero, divisor = number of submitters), applies the mean to the previous
global snapshot, and publishes the result for everyone to fetch.

No message defined here can carry an interaction event, an item click, or a
title string: the wire vocabulary is parameter vectors, manifests, DP
metadata, participation state, and pre-aggregated counters.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field

import numpy as np

from . import bpr, dp
from .bpr import ModelParameters, ModelUpdate, TrainConfig
from .catalog import ItemCatalog
from .dp import DpConfig
from .profiles import UserProfile

CLIENT_VERSION = "fedflex/0.1"


class FederationError(Exception):
    """Protocol violation; ``reason`` is the wire-visible rejection cause."""

    def __init__(self, reason: str, status: int = 400):
        super().__init__(reason)
        self.reason = reason
        self.status = status


@dataclass(frozen=True)
class ModelUpdateMessage:
    """The only payload a client ever uploads.

    ``vector`` is the privatized item-side delta in canonical flattening
    order over ``key_manifest``; ``counters`` carries pre-aggregated
    engagement counts for the dashboard (never raw events).
    """

    __slots__ = (
        "participant_id",
        "round",
        "vector",
        "key_manifest",
        "dp_meta",
        "client_version",
        "counters",
    )

    participant_id: str
    round: int
    vector: tuple[float, ...]
    key_manifest: tuple[str, ...]
    dp_meta: dict
    client_version: str
    counters: dict | None

    def to_json(self) -> dict:
        body = {
            "participant_id": self.participant_id,
            "round": self.round,
            "vector": list(self.vector),
            "key_manifest": list(self.key_manifest),
            "dp_meta": self.dp_meta,
            "client_version": self.client_version,
        }
        if self.counters is not None:
            body["counters"] = self.counters
        return body

    @classmethod
    def from_json(cls, body: dict) -> "ModelUpdateMessage":
        try:
            return cls(
                participant_id=body["participant_id"],
                round=body["round"],
                vector=tuple(float(x) for x in body["vector"]),
                key_manifest=tuple(body["key_manifest"]),
                dp_meta=dict(body["dp_meta"]),
                client_version=body["client_version"],
                counters=body.get("counters"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise FederationError(f"malformed update message: {exc}", 400) from None


@dataclass
class ParticipantStatus:
    participant_id: str
    mode: str = "sharing"  # "sharing" | "local_only"
    opt_out_reason: str | None = None
    since: float = field(default_factory=time.time)


@dataclass
class RoundState:
    round: int
    status: str = "open"  # open | published
    received: dict[str, ModelUpdateMessage] = field(default_factory=dict)
    published_global: np.ndarray | None = None


class Aggregator:
    """Server-side round ledger and averaging logic.

    Thread-safe: submissions and round advancement serialize on one lock;
    published snapshots are immutable and fetched without copy-on-read
    hazards.
    """

    def __init__(self, manifest: list[str], dim: int, initial_global: np.ndarray,
                 dp_config: DpConfig | None = None):
        if sorted(manifest) != list(manifest):
            raise FederationError("manifest must be in ascending item_id order")
        if initial_global.shape != (len(manifest) * (dim + 1),):
            raise FederationError("initial global vector does not match manifest")
        self.manifest = list(manifest)
        self.dim = dim
        self.dp_config = dp_config or DpConfig()
        self._coord_base = {iid: n * (dim + 1) for n, iid in enumerate(manifest)}
        self._initial_global = initial_global.copy()
        self._lock = threading.Lock()
        self.participants: dict[str, ParticipantStatus] = {}
        self.rounds: dict[int, RoundState] = {0: RoundState(0)}
        self.current_round = 0
        self.counters: dict[str, dict] = {}  # latest counter payload per participant

    # -- participants --------------------------------------------------

    def register(self, participant_id: str) -> ParticipantStatus:
        with self._lock:
            status = self.participants.get(participant_id)
            if status is None:
                status = ParticipantStatus(participant_id)
                self.participants[participant_id] = status
            return status

    def set_participation(
        self, participant_id: str, mode: str, reason: str | None = None
    ) -> ParticipantStatus:
        if mode not in ("sharing", "local_only"):
            raise FederationError(f"unknown participation mode {mode!r}", 400)
        if mode == "local_only" and not (reason and reason.strip()):
            raise FederationError("opt-out requires a reason", 400)
        with self._lock:
            if participant_id not in self.participants:
                raise FederationError(f"unknown participant {participant_id}", 404)
            status = ParticipantStatus(
                participant_id,
                mode=mode,
                opt_out_reason=reason if mode == "local_only" else None,
            )
            self.participants[participant_id] = status
            return status

    # -- rounds --------------------------------------------------------

    def submit_update(self, msg: ModelUpdateMessage) -> str:
        """Store one update keyed by (round, participant); resubmission
        replaces idempotently. Returns "accepted" or "replaced"."""
        with self._lock:
            status = self.participants.get(msg.participant_id)
            if status is None:
                raise FederationError("participant not registered", 404)
            if status.mode == "local_only":
                raise FederationError("participant opted out", 403)
            round_state = self.rounds.get(msg.round)
            if round_state is None or round_state.status != "open":
                raise FederationError("round closed", 409)
            self._check_shape(msg)
            replaced = msg.participant_id in round_state.received
            round_state.received[msg.participant_id] = msg
            if msg.counters is not None:
                self.counters[msg.participant_id] = msg.counters
            return "replaced" if replaced else "accepted"

    def _check_shape(self, msg: ModelUpdateMessage) -> None:
        if len(msg.vector) != len(msg.key_manifest) * (self.dim + 1):
            raise FederationError("shape mismatch", 400)
        if list(msg.key_manifest) != sorted(msg.key_manifest):
            raise FederationError("shape mismatch", 400)
        for iid in msg.key_manifest:
            if iid not in self._coord_base:
                raise FederationError("shape mismatch", 400)

    def _previous_global(self, round_no: int) -> np.ndarray:
        for r in range(round_no - 1, -1, -1):
            state = self.rounds.get(r)
            if state is not None and state.published_global is not None:
                return state.published_global
        return self._initial_global

    def aggregate_round(self, round_no: int | None = None) -> np.ndarray:
        """Average received deltas, apply to the previous global snapshot,
        publish, and open the next round.

        Summation iterates participants in sorted id order, so the result is
        bit-identical under any arrival order. A round with zero updates
        republishes the previous global unchanged.
        """
        with self._lock:
            round_no = self.current_round if round_no is None else round_no
            round_state = self.rounds.get(round_no)
            if round_state is None or round_state.status != "open":
                raise FederationError("round closed", 409)
            prev = self._previous_global(round_no)
            received = round_state.received
            if received:
                total = np.zeros_like(prev)
                for pid in sorted(received):
                    msg = received[pid]
                    for n, iid in enumerate(msg.key_manifest):
                        base = self._coord_base[iid]
                        span = self.dim + 1
                        total[base : base + span] += msg.vector[n * span : (n + 1) * span]
                new_global = prev + total / len(received)
            else:
                new_global = prev.copy()
            round_state.published_global = new_global
            round_state.status = "published"
            if round_no == self.current_round:
                self.current_round += 1
                self.rounds[self.current_round] = RoundState(self.current_round)
            return new_global

    def fetch_global(self, round_no: int) -> dict:
        """Published snapshot for a round; raises 425-style error when the
        round is still open."""
        if round_no == -1:
            vector = self._initial_global
        else:
            round_state = self.rounds.get(round_no)
            if round_state is None or round_state.published_global is None:
                raise FederationError("not ready", 425)
            vector = round_state.published_global
        return {
            "round": round_no,
            "status": "published",
            "vector": vector.tolist(),
            "key_manifest": list(self.manifest),
            "dim": self.dim,
        }

    # -- dashboard -----------------------------------------------------

    def dashboard_stats(self) -> dict:
        from .metrics import merge_counters

        with self._lock:
            rounds_published = sum(
                1 for s in self.rounds.values() if s.status == "published"
            )
            participation = {
                r: len(s.received)
                for r, s in sorted(self.rounds.items())
                if s.status == "published"
            }
            opt_outs: dict[str, int] = {}
            for status in self.participants.values():
                if status.mode == "local_only" and status.opt_out_reason:
                    opt_outs[status.opt_out_reason] = (
                        opt_outs.get(status.opt_out_reason, 0) + 1
                    )
            merged = merge_counters(list(self.counters.values()))
        per_mode = merged.pop("per_mode")
        merged.pop("participants_reporting")
        return {
            "participants": len(self.participants),
            "rounds_published": rounds_published,
            "participation_per_round": participation,
            "totals": merged,
            "per_mode": per_mode,
            "epsilon": self.dp_config.epsilon,
            "opt_outs": [
                {"reason": reason, "count": count}
                for reason, count in sorted(opt_outs.items())
            ],
        }


def build_update_message(
    participant_id: str,
    round_no: int,
    update: ModelUpdate,
    dp_config: DpConfig,
    rng: np.random.Generator,
    counters: dict | None = None,
) -> ModelUpdateMessage:
    """Privatize an item-side delta and wrap it for the wire."""
    vector = dp.privatize(update.vector, dp_config, rng)
    return ModelUpdateMessage(
        participant_id=participant_id,
        round=round_no,
        vector=tuple(float(x) for x in vector),
        key_manifest=tuple(update.key_manifest),
        dp_meta=dp_config.to_meta(),
        client_version=CLIENT_VERSION,
        counters=counters,
    )


def client_sync_cycle(
    profile: UserProfile,
    model: ModelParameters,
    global_vector: np.ndarray | None,
    catalog: ItemCatalog,
    train_config: TrainConfig,
    dp_config: DpConfig,
    rng: np.random.Generator,
    round_no: int,
    sharing: bool = True,
    counters: dict | None = None,
) -> tuple[ModelParameters, ModelUpdateMessage | None]:
    """One client round: adopt the latest global item parameters (replace,
    not merge), train locally, and emit a privatized delta when sharing.

    Cold profiles (no positives) produce no update at all; the zero vector
    would only dilute the mean and leak inactivity timing. The trained model
    is kept locally regardless of participation mode.
    """
    if global_vector is not None:
        model = model.copy()
        model.set_item_vector(np.asarray(global_vector, dtype=float))
    baseline = model.copy()
    trained_model, trained = bpr.train_local(model, profile, catalog, train_config)
    if not trained:
        return model, None
    if not sharing:
        return trained_model, None
    update = bpr.diff(baseline, trained_model)
    msg = build_update_message(
        profile.user_id, round_no, update, dp_config, rng, counters=counters
    )
    return trained_model, msg
