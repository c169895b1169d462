"""HTTP front ends for the full node and the oracle."""

from __future__ import annotations

import os
from typing import Optional

from fastapi import FastAPI, HTTPException
from fastapi.responses import Response

from ..ledger import Chain
from ..proof_system import BackendParams
from .behavior import NodeBehavior, OracleBehavior
from .fullnode import FullNode, NodeUnavailable
from .models import CountRequest, QueryRequest, RootsRequest
from .oracle import Oracle, QueryRejected
from .transport import encode


def _json(model) -> Response:
    return Response(content=encode(model), media_type="application/json")


def fullnode_app(node: FullNode) -> FastAPI:
    app = FastAPI(title=f"full node {node.name}")

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "blocks": len(node.chain), "behavior": str(node.behavior)}

    @app.post("/count")
    def count(req: CountRequest) -> Response:
        try:
            return _json(node.count(req))
        except NodeUnavailable as exc:
            raise HTTPException(status_code=503, detail=str(exc))

    @app.post("/roots")
    def roots(req: RootsRequest) -> Response:
        try:
            return _json(node.roots(req))
        except NodeUnavailable as exc:
            raise HTTPException(status_code=503, detail=str(exc))

    return app


def oracle_app(oracle: Oracle) -> FastAPI:
    app = FastAPI(title="oracle")

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "blocks": len(oracle.chain), "behavior": str(oracle.behavior)}

    @app.get("/params")
    def params() -> dict:
        return oracle.params.to_json()

    @app.post("/query")
    def query(req: QueryRequest) -> Response:
        try:
            return _json(oracle.handle(req))
        except QueryRejected as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    return app


def fullnode_serve(chain: Chain, behavior: Optional[NodeBehavior] = None, name: str = "node") -> FastAPI:
    return fullnode_app(FullNode(chain, behavior, name))


def oracle_serve(chain: Chain, params: BackendParams, behavior: Optional[OracleBehavior] = None) -> FastAPI:
    return oracle_app(Oracle(chain, params, behavior))


def app_from_env() -> FastAPI:
    """Factory for ``uvicorn --factory``: SSLC_ROLE, SSLC_CHAIN, SSLC_BEHAVIOR, SSLC_BACKEND, SSLC_SHAPE."""
    from ..proof_system import setup

    role = os.environ.get("SSLC_ROLE", "fullnode")
    chain = Chain.read_jsonl(os.environ["SSLC_CHAIN"])
    behavior = os.environ.get("SSLC_BEHAVIOR", "HONEST")
    if role == "fullnode":
        return fullnode_serve(chain, NodeBehavior.parse(behavior))
    cap, depth = (int(x) for x in os.environ.get("SSLC_SHAPE", "100,12").split(","))
    params = setup(cap, depth, os.environ.get("SSLC_BACKEND", "native"))
    return oracle_serve(chain, params, OracleBehavior.parse(behavior))
