"""HTTP/JSON surfaces: the aggregator API and the participant-local API.

Both are thin adapters; all behavior lives in the Aggregator and ClientNode
objects. Vectors travel as JSON arrays of doubles in canonical manifest
order.
"""

from __future__ import annotations

from dataclasses import asdict

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .client import ClientError, ClientNode
from .federation import Aggregator, FederationError, ModelUpdateMessage
from .profiles import EventError, InteractionEvent


def create_aggregator_app(aggregator: Aggregator) -> FastAPI:
    app = FastAPI(title="fedflex aggregator")
    app.state.aggregator = aggregator

    @app.exception_handler(FederationError)
    async def _federation_error(_req: Request, exc: FederationError):
        return JSONResponse(status_code=exc.status, content={"error": exc.reason})

    @app.post("/v1/rounds/{round_no}/updates")
    async def submit_update(round_no: int, request: Request):
        body = await request.json()
        msg = ModelUpdateMessage.from_json(body)
        if msg.round != round_no:
            raise FederationError("round mismatch between path and body", 400)
        status = aggregator.submit_update(msg)
        return {"status": status}

    @app.get("/v1/rounds/{round_no}/model")
    async def fetch_model(round_no: int):
        return aggregator.fetch_global(round_no)

    @app.put("/v1/participants/{participant_id}/participation")
    async def set_participation(participant_id: str, request: Request):
        body = await request.json()
        status = aggregator.set_participation(
            participant_id, body.get("mode"), body.get("reason")
        )
        return {
            "participant_id": status.participant_id,
            "mode": status.mode,
            "opt_out_reason": status.opt_out_reason,
        }

    @app.post("/v1/participants/{participant_id}/register")
    async def register(participant_id: str):
        status = aggregator.register(participant_id)
        return {"participant_id": status.participant_id, "mode": status.mode}

    @app.get("/v1/dashboard/stats")
    async def dashboard_stats():
        return aggregator.dashboard_stats()

    @app.post("/v1/admin/advance-round")
    async def advance_round():
        closed = aggregator.current_round
        aggregator.aggregate_round()
        return {"published_round": closed, "open_round": aggregator.current_round}

    return app


def create_client_app(node: ClientNode) -> FastAPI:
    """Loopback-only API the participant UI consumes."""
    app = FastAPI(title="fedflex client")
    app.state.node = node

    @app.exception_handler(ClientError)
    async def _client_error(_req: Request, exc: ClientError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.exception_handler(EventError)
    async def _event_error(_req: Request, exc: EventError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.get("/v1/feed")
    async def feed(mode: str = "personalized", k: int = 10):
        slate = node.get_feed(mode, k)
        return {
            "slate_id": slate.slate_id,
            "mode": slate.mode,
            "created_at": slate.created_at,
            "slots": [
                {
                    "position": s.position,
                    "item_id": s.item_id,
                    "provenance": s.provenance,
                    "title": node.catalog.get(s.item_id).title,
                    "genres": sorted(node.catalog.get(s.item_id).genres),
                }
                for s in slate.slots
            ],
        }

    @app.post("/v1/events")
    async def post_event(request: Request):
        body = await request.json()
        kind = body.get("type")
        if kind == "click":
            node.click(body.get("slate_id"), body.get("item_id"))
        elif kind == "block":
            node.block(body.get("item_id"))
        elif kind == "unblock":
            node.unblock(body.get("item_id"))
        elif kind in ("watchlist_add", "watchlist_remove", "watchlist_toggle"):
            node.watchlist_toggle(body.get("item_id"))
        elif kind == "satisfaction_rating":
            node.rate_satisfaction(int(body.get("payload")))
        elif kind == "mode_switch":
            node.record_mode_switch(body.get("mode"))
        else:
            raise ClientError(f"unsupported event type {kind!r}")
        return {"status": "recorded"}

    @app.get("/v1/explain/{item_id}")
    async def explain(item_id: str):
        return asdict(node.explain(item_id))

    @app.get("/v1/settings")
    async def get_settings():
        return node.profile.settings

    @app.put("/v1/settings/{key}")
    async def put_setting(key: str, request: Request):
        body = await request.json()
        node.set_setting(key, str(body.get("value")))
        return {key: str(body.get("value"))}

    @app.put("/v1/participation")
    async def participation(request: Request):
        body = await request.json()
        node.set_participation(body.get("mode"), body.get("reason"))
        return {"mode": node.participation_mode, "reason": node.opt_out_reason}

    @app.get("/v1/stats")
    async def stats():
        summary = node.stats()
        return {
            "impressions": summary.impressions,
            "unique_clicked": summary.unique_clicked,
            "ctr": summary.ctr,
            "per_mode": {
                mode: {"impressions": st.impressions, "clicks": st.clicks, "ctr": st.ctr}
                for mode, st in sorted(summary.per_mode.items())
            },
            "settings_changes": summary.settings_changes,
            "feedback_entries": summary.feedback_entries,
            "dont_recommend_actions": summary.dont_recommend_actions,
            "satisfaction_mean": summary.satisfaction_mean,
            "satisfaction_n": summary.satisfaction_n,
        }

    @app.get("/v1/activity")
    async def activity():
        return node.activity()

    @app.get("/v1/watchlist")
    async def watchlist():
        return sorted(node.profile.watchlist)

    return app
