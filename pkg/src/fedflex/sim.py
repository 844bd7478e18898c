"""Desk-scale federated deployment simulator.

Runs an aggregator plus n synthetic clients for a number of simulated days
(one federation round per day), exercising the real HTTP protocol on
loopback. Everything is driven by seeded generators derived from the
experiment seed, so a report is a pure function of its config.
"""

from __future__ import annotations

import csv
import json
import math
import socket
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import httpx
import numpy as np
import uvicorn

from . import bpr, metrics
from .bpr import TrainConfig
from .catalog import Item, ItemCatalog, load_catalog, write_catalog
from .client import ClientNode
from .dp import DpConfig
from .federation import Aggregator, FederationError, ModelUpdateMessage
from .http_api import create_aggregator_app
from .metrics import MS_PER_DAY
from .profiles import UserProfile

SIM_EPOCH_MS = 1_700_000_000_000  # fixed origin so timestamps are reproducible

GENRE_POOL = [
    "Action", "Animation", "Comedy", "Crime", "Documentary", "Drama",
    "Family", "Fantasy", "Horror", "Musical", "Mystery", "Romance",
    "Sci-Fi", "Thriller", "War", "Western",
]


class SimClock:
    """Deterministic millisecond clock: one tick per call within a day."""

    def __init__(self):
        self.day = 0
        self._tick = 0

    def set_day(self, day: int) -> None:
        self.day = day
        self._tick = 0

    def __call__(self) -> int:
        self._tick += 1
        return SIM_EPOCH_MS + self.day * MS_PER_DAY + self._tick


@dataclass
class SyntheticUser:
    user_id: str
    genre_affinity: dict[str, float]  # weights sum to 1
    concentration: float
    base_click_rate: float
    mode_policy: str  # "always_personalized" | "always_diversity" | "switching"
    switch_prob: float = 0.1
    start_mode: str = "personalized"  # first-day mode for switching users
    block_rate: float = 0.8  # chance of "don't recommend again" on a skipped item

    def affinity_match(self, genres: frozenset[str]) -> float:
        """Mean affinity over the item's genres, scaled so the user's top
        genre maps to 1."""
        if not genres:
            return 0.0
        top = max(self.genre_affinity.values())
        if top == 0:
            return 0.0
        mean = sum(self.genre_affinity.get(g, 0.0) for g in genres) / len(genres)
        return min(mean / top, 1.0)


@dataclass
class ExperimentConfig:
    n_clients: int = 22
    n_rounds: int = 53
    catalog_path: str | None = None  # None -> synthesized catalog
    catalog_items: int = 600
    catalog_genres: int = 6
    max_genres_per_item: int = 2
    k: int = 10
    first_session_k: int | None = 50  # bigger opening slate to bootstrap training
    dim: int = 16
    learning_rate: float = 0.05
    reg: float = 0.01
    epochs: int = 20
    negatives_per_positive: int = 5
    switch_prob: float = 1.0  # per-day mode-toggle probability for switching users
    dp: DpConfig = field(default_factory=lambda: DpConfig(enabled=False))
    seed: int = 7
    transport: str = "http"  # "http" | "inprocess"

    def __post_init__(self):
        if self.n_clients < 1:
            raise ValueError("n_clients must be >= 1")
        if self.n_rounds < 1:
            raise ValueError("n_rounds must be >= 1")
        if self.transport not in ("http", "inprocess"):
            raise ValueError("transport must be 'http' or 'inprocess'")

    def to_json(self) -> dict:
        return {
            "n_clients": self.n_clients,
            "n_rounds": self.n_rounds,
            "catalog_path": self.catalog_path,
            "catalog_items": self.catalog_items,
            "catalog_genres": self.catalog_genres,
            "max_genres_per_item": self.max_genres_per_item,
            "k": self.k,
            "first_session_k": self.first_session_k,
            "dim": self.dim,
            "learning_rate": self.learning_rate,
            "reg": self.reg,
            "epochs": self.epochs,
            "negatives_per_positive": self.negatives_per_positive,
            "switch_prob": self.switch_prob,
            "dp": self.dp.to_meta(),
            "seed": self.seed,
            "transport": self.transport,
        }

    @classmethod
    def from_json(cls, body: dict) -> "ExperimentConfig":
        body = dict(body)
        body["dp"] = DpConfig(**body["dp"])
        return cls(**body)


# -- synthetic inputs ---------------------------------------------------


def gen_catalog(
    n_items: int, n_genres: int, seed: int, max_genres_per_item: int = 1
) -> list[Item]:
    """Synthetic catalog: each item gets 1..max_genres_per_item genres from a
    fixed pool."""
    if n_genres < 2 or n_genres > len(GENRE_POOL):
        raise ValueError(f"n_genres must be in [2, {len(GENRE_POOL)}]")
    if max_genres_per_item < 1:
        raise ValueError("max_genres_per_item must be >= 1")
    rng = np.random.default_rng([seed, 0xCA7])
    genres = GENRE_POOL[:n_genres]
    width = len(str(n_items))
    items = []
    for n in range(n_items):
        count = int(rng.integers(1, max_genres_per_item + 1))
        picked = rng.choice(len(genres), size=min(count, n_genres), replace=False)
        items.append(
            Item(
                item_id=f"m{n:0{width}d}",
                title=f"Title {n}",
                genres=frozenset(genres[g] for g in picked),
                year=int(1960 + rng.integers(0, 66)),
            )
        )
    return items


# Mode-usage mix: a small always-personalized cohort and a smaller
# always-diversity cohort anchor steady traffic in each mode; everyone else
# is a frequent switcher, so most of the per-mode contrast comes from the
# same users seen in both modes rather than from who happens to be in which
# arm.
ALWAYS_PERSONALIZED_SHARE = 6 / 22
ALWAYS_DIVERSITY_SHARE = 2 / 22

POLICY_CYCLE = (
    "always_personalized",
    "always_diversity",
    "always_personalized",
    "always_diversity",
    "switching",
)


def generate_population(
    n: int,
    catalog: ItemCatalog,
    seed: int,
    *,
    base_click_rate: float = 0.45,
    switch_prob: float = 1.0,
) -> list[SyntheticUser]:
    """Deterministic synthetic population; at least 60% of users have a top
    genre weight >= 0.5 so personalization has signal to find."""
    genres = sorted(catalog.genre_universe)
    if len(genres) < 2:
        raise ValueError("catalog must span at least 2 genres")
    rng = np.random.default_rng([seed, 0x9090])
    users = []
    caps = {
        "always_personalized": round(n * ALWAYS_PERSONALIZED_SHARE),
        "always_diversity": round(n * ALWAYS_DIVERSITY_SHARE),
    }
    taken = {"always_personalized": 0, "always_diversity": 0}
    n_switchers = 0
    # candidate policies rotate separately inside each concentration stratum
    # so neither always-on cohort ends up with a biased share of concentrated
    # users; once a cohort cap is reached the overflow becomes switchers
    stratum_counter = {True: 0, False: 0}
    for idx in range(n):
        concentrated = (idx % 10) < 8  # 80% concentrated by construction
        if concentrated:
            top = genres[int(rng.integers(len(genres)))]
            top_weight = 0.85 + 0.12 * float(rng.random())
            rest = rng.dirichlet(np.full(len(genres) - 1, 0.5)) * (1 - top_weight)
            affinity = {}
            n_rest = 0
            for g in genres:
                if g == top:
                    affinity[g] = top_weight
                else:
                    affinity[g] = float(rest[n_rest])
                    n_rest += 1
        else:
            weights = rng.dirichlet(np.full(len(genres), 1.5))
            affinity = {g: float(w) for g, w in zip(genres, weights)}
        policy = POLICY_CYCLE[stratum_counter[concentrated] % len(POLICY_CYCLE)]
        stratum_counter[concentrated] += 1
        if policy in caps and taken[policy] < caps[policy]:
            taken[policy] += 1
            start_mode = "personalized"
        else:
            policy = "switching"
            # stagger first-day modes so both arms are populated from day 0
            start_mode = "personalized" if n_switchers % 2 == 0 else "diversity"
            n_switchers += 1
        users.append(
            SyntheticUser(
                user_id=f"u{idx:03d}",
                genre_affinity=affinity,
                concentration=max(affinity.values()),
                base_click_rate=base_click_rate,
                mode_policy=policy,
                switch_prob=switch_prob,
                start_mode=start_mode,
            )
        )
    return users


def simulate_session(
    user: SyntheticUser,
    slate,
    catalog: ItemCatalog,
    rng: np.random.Generator,
) -> tuple[list[str], list[str]]:
    """Position-blind behavior model for one served slate.

    Each slot is clicked with probability
    ``base_click_rate * affinity_match(item genres)``. A skipped item gets a
    "don't recommend again" block with probability
    ``block_rate * (1 - match)``, which is what keeps the feed cycling
    through fresh items. Returns (clicked, blocked) item ids.
    """
    clicked, blocked = [], []
    for slot in slate.slots:
        match = user.affinity_match(catalog.genres_of(slot.item_id))
        if rng.random() < user.base_click_rate * match:
            clicked.append(slot.item_id)
        elif rng.random() < user.block_rate * (1.0 - match):
            blocked.append(slot.item_id)
    return clicked, blocked


def eval_pairs(
    user: SyntheticUser, catalog: ItemCatalog, rng: np.random.Generator, n_pairs: int = 20
) -> list[tuple[str, str, list[str]]]:
    """Held-out (positive, negative) probes from the synthetic ground truth:
    positives are high-affinity items, negatives low-affinity."""
    ids = catalog.item_ids
    matches = np.array([user.affinity_match(catalog.genres_of(i)) for i in ids])
    pos_pool = [i for i, m in zip(ids, matches) if m >= 0.6]
    neg_pool = [i for i, m in zip(ids, matches) if m <= 0.3]
    if not pos_pool or not neg_pool:
        return []
    pairs = []
    for _ in range(n_pairs):
        pos = pos_pool[int(rng.integers(len(pos_pool)))]
        neg = neg_pool[int(rng.integers(len(neg_pool)))]
        pairs.append((user.user_id, pos, [neg]))
    return pairs


# -- transports ---------------------------------------------------------


class InProcessTransport:
    """Drives the Aggregator object directly; used by unit tests."""

    def __init__(self, aggregator: Aggregator):
        self.aggregator = aggregator

    def register(self, participant_id: str) -> None:
        self.aggregator.register(participant_id)

    def submit(self, msg: ModelUpdateMessage) -> str:
        return self.aggregator.submit_update(msg)

    def fetch_model(self, round_no: int) -> np.ndarray:
        return np.array(self.aggregator.fetch_global(round_no)["vector"])

    def advance_round(self) -> None:
        self.aggregator.aggregate_round()

    def set_participation(self, participant_id: str, mode: str, reason=None) -> None:
        self.aggregator.set_participation(participant_id, mode, reason)

    def dashboard_stats(self) -> dict:
        return self.aggregator.dashboard_stats()

    def close(self) -> None:
        pass


class HttpTransport:
    """Talks to a loopback aggregator over the real HTTP/JSON protocol.

    ``capture``, when given, receives (method, path, json_body_or_None) for
    every request — the hook used by the wire-audit tests.
    """

    def __init__(self, base_url: str, capture: list | None = None):
        self.capture = capture
        self._http = httpx.Client(base_url=base_url, timeout=30.0)

    def _request(self, method: str, path: str, body: dict | None = None) -> httpx.Response:
        if self.capture is not None:
            self.capture.append((method, path, body))
        resp = self._http.request(method, path, json=body)
        if resp.status_code >= 400:
            detail = resp.json().get("error", resp.text)
            raise FederationError(detail, resp.status_code)
        return resp

    def register(self, participant_id: str) -> None:
        self._request("POST", f"/v1/participants/{participant_id}/register")

    def submit(self, msg: ModelUpdateMessage) -> str:
        resp = self._request("POST", f"/v1/rounds/{msg.round}/updates", msg.to_json())
        return resp.json()["status"]

    def fetch_model(self, round_no: int) -> np.ndarray:
        resp = self._request("GET", f"/v1/rounds/{round_no}/model")
        return np.array(resp.json()["vector"])

    def advance_round(self) -> None:
        self._request("POST", "/v1/admin/advance-round")

    def set_participation(self, participant_id: str, mode: str, reason=None) -> None:
        self._request(
            "PUT",
            f"/v1/participants/{participant_id}/participation",
            {"mode": mode, "reason": reason},
        )

    def dashboard_stats(self) -> dict:
        return self._request("GET", "/v1/dashboard/stats").json()

    def close(self) -> None:
        self._http.close()


class AggregatorServer:
    """Runs the aggregator app on an ephemeral loopback port in a thread."""

    def __init__(self, aggregator: Aggregator):
        app = create_aggregator_app(aggregator)
        sock = socket.socket()
        sock.bind(("127.0.0.1", 0))
        self.port = sock.getsockname()[1]
        self.base_url = f"http://127.0.0.1:{self.port}"
        self._server = uvicorn.Server(uvicorn.Config(app, log_level="critical"))
        self._thread = threading.Thread(
            target=self._server.run, kwargs={"sockets": [sock]}, daemon=True
        )
        self._thread.start()
        deadline = time.time() + 10
        while not self._server.started:
            if time.time() > deadline:
                raise RuntimeError("aggregator server failed to start")
            time.sleep(0.005)

    def stop(self) -> None:
        self._server.should_exit = True
        self._thread.join(timeout=5)


# -- the experiment loop ------------------------------------------------


def _load_or_gen_catalog(config: ExperimentConfig) -> ItemCatalog:
    if config.catalog_path is not None:
        return load_catalog(config.catalog_path)
    return ItemCatalog(
        gen_catalog(
            config.catalog_items,
            config.catalog_genres,
            config.seed,
            max_genres_per_item=config.max_genres_per_item,
        )
    )


def run_experiment(
    config: ExperimentConfig,
    out_dir: str | Path | None = None,
    capture: list | None = None,
) -> dict:
    """Run the full deployment loop and return (and optionally write) the
    report. Byte-identical across runs with the same config."""
    catalog = _load_or_gen_catalog(config)
    users = generate_population(
        config.n_clients, catalog, config.seed, switch_prob=config.switch_prob
    )
    model_seed = [config.seed, 0x30DE1]
    global_model = bpr.init_model([], catalog.item_ids, config.dim, model_seed)

    aggregator = Aggregator(
        catalog.item_ids, config.dim, global_model.item_vector(), config.dp
    )
    server = None
    if config.transport == "http":
        server = AggregatorServer(aggregator)
        transport = HttpTransport(server.base_url, capture=capture)
    else:
        transport = InProcessTransport(aggregator)

    try:
        return _run_rounds(config, catalog, users, transport, model_seed, out_dir)
    finally:
        transport.close()
        if server is not None:
            server.stop()


def _run_rounds(config, catalog, users, transport, model_seed, out_dir) -> dict:
    clients: dict[str, ClientNode] = {}
    clocks: dict[str, SimClock] = {}
    session_rngs: dict[str, np.random.Generator] = {}
    modes: dict[str, str] = {}
    eval_sets: dict[str, list] = {}

    for user in users:
        transport.register(user.user_id)
        clock = SimClock()
        profile = UserProfile(user.user_id, catalog)
        model = bpr.init_model([user.user_id], catalog.item_ids, config.dim, model_seed)
        clients[user.user_id] = ClientNode(
            profile,
            catalog,
            model,
            dp_config=config.dp,
            clock=clock,
        )
        clocks[user.user_id] = clock
        session_rngs[user.user_id] = np.random.default_rng(
            [config.seed, 0x5E55, _uidx(user.user_id)]
        )
        if user.mode_policy == "always_diversity":
            modes[user.user_id] = "diversity"
        elif user.mode_policy == "switching":
            modes[user.user_id] = user.start_mode
        else:
            modes[user.user_id] = "personalized"
        eval_rng = np.random.default_rng([config.seed, 0xE7A1, _uidx(user.user_id)])
        eval_sets[user.user_id] = eval_pairs(user, catalog, eval_rng)

    auc_trajectory: list[float] = []
    for day in range(config.n_rounds):
        for user in users:
            uid = user.user_id
            client = clients[uid]
            clocks[uid].set_day(day)
            rng = session_rngs[uid]

            if day > 0:
                client.model.set_item_vector(transport.fetch_model(day - 1))

            # train on everything clicked so far BEFORE serving today's feed:
            # the slate reflects yesterday's clicks immediately, and the
            # submitted delta is the same either way
            train_cfg = TrainConfig(
                learning_rate=config.learning_rate,
                reg=config.reg,
                epochs=config.epochs,
                negatives_per_positive=config.negatives_per_positive,
                seed=_round_seed(config.seed, _uidx(uid), day),
            )
            dp_rng = np.random.default_rng([config.seed, 0xD9, _uidx(uid), day])
            msg = client.sync_cycle(day, None, dp_rng, train_config=train_cfg)
            if msg is not None:
                transport.submit(msg)

            if user.mode_policy == "switching" and rng.random() < user.switch_prob:
                new_mode = (
                    "diversity" if modes[uid] == "personalized" else "personalized"
                )
                modes[uid] = new_mode
                client.record_mode_switch(new_mode)

            k = config.k
            if day == 0 and config.first_session_k:
                k = config.first_session_k
            slate = client.get_feed(modes[uid], k)
            if slate.slots:
                clicked, blocked = simulate_session(user, slate, catalog, rng)
                for item_id in clicked:
                    client.click(slate.slate_id, item_id)
                for item_id in blocked:
                    client.block(item_id)
        transport.advance_round()

        aucs = []
        for user in users:
            pairs = eval_sets[user.user_id]
            if pairs:
                aucs.append(bpr.auc(clients[user.user_id].model, pairs))
        auc_trajectory.append(float(np.mean(aucs)) if aucs else 0.5)

    return _build_report(
        config, clients, transport, auc_trajectory, out_dir
    )


def _uidx(user_id: str) -> int:
    return int(user_id[1:])


def _round_seed(seed: int, uidx: int, day: int) -> int:
    # stable scalar seed per (experiment, client, round)
    return (seed * 1_000_003 + uidx * 1_009 + day) % (2**31)


def _build_report(config, clients, transport, auc_trajectory, out_dir) -> dict:
    all_events = []
    for client in clients.values():
        all_events.extend(client.profile.events)
    all_events.sort(key=lambda e: (e.ts, e.type, e.item_id or "", e.slate_id or ""))

    per_mode_ctr = {
        mode: metrics.ctr(all_events, mode) for mode in ("personalized", "diversity")
    }
    summary_counters = metrics.counters(all_events)
    series = metrics.ctr_timeseries(all_events)
    dashboard = transport.dashboard_stats()

    report = {
        "config": config.to_json(),
        "per_mode_ctr": per_mode_ctr,
        "ctr_formatted": {
            mode: metrics.format_ctr_percent(v) if v is not None else None
            for mode, v in per_mode_ctr.items()
        },
        "counters": {
            "impressions": summary_counters.impressions,
            "unique_clicked": summary_counters.unique_clicked,
            "settings_changes": summary_counters.settings_changes,
            "feedback_entries": summary_counters.feedback_entries,
            "dont_recommend_actions": summary_counters.dont_recommend_actions,
            "satisfaction_mean": summary_counters.satisfaction_mean,
            "total_click_events": sum(1 for e in all_events if e.type == "click"),
        },
        "auc_trajectory": auc_trajectory,
        "ctr_timeseries": [
            {"day": day, **{m: v for m, v in by_mode.items()}}
            for day, by_mode in series
        ],
        "dashboard": dashboard,
        "seeds": {"experiment": config.seed},
    }

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.json").write_text(
            json.dumps(report, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
        with (out / "ctr_timeseries.csv").open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["day", "mode", "impressions", "clicks", "ctr"])
            for row in _timeseries_rows(all_events):
                writer.writerow(row)
        (out / "seeds.json").write_text(
            json.dumps({"experiment": config.seed, "config": config.to_json()},
                       sort_keys=True, indent=2) + "\n",
            encoding="utf-8",
        )
    return report


def _timeseries_rows(events) -> list[list]:
    if not events:
        return []
    start = min(e.ts for e in events) // MS_PER_DAY
    rows = []
    days = sorted({e.ts // MS_PER_DAY - start for e in events})
    for day in range(max(days) + 1):
        day_events = [e for e in events if e.ts // MS_PER_DAY - start == day]
        for mode in ("personalized", "diversity"):
            mode_events = [e for e in day_events if e.mode == mode]
            impressions = sum(1 for e in mode_events if e.type == "impression")
            clicks = len(
                {(e.slate_id, e.item_id) for e in mode_events if e.type == "click"}
            )
            ctr_value = clicks / impressions if impressions else ""
            rows.append([day, mode, impressions, clicks, ctr_value])
    return rows
