"""Client-side transports. The in-process and HTTP variants exchange the same canonical JSON bytes,
so bandwidth measured through either is identical."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Generic, Optional, Protocol, TypeVar, Union

import httpx
from pydantic import BaseModel, ValidationError

from .fullnode import FullNode, NodeUnavailable
from .models import CountRequest, CountResponse, QueryRequest, QueryResponse, RootsRequest, RootsResponse
from .oracle import Oracle, QueryRejected

M = TypeVar("M", bound=BaseModel)


class OracleUnreachable(RuntimeError):
    pass


def encode(model: BaseModel) -> bytes:
    return json.dumps(model.model_dump(mode="json"), separators=(",", ":"), sort_keys=True).encode()


@dataclass(frozen=True)
class Exchange(Generic[M]):
    response: M
    bytes_up: int
    bytes_down: int


class NodeClient(Protocol):
    name: str

    def count(self, req: CountRequest) -> Exchange[CountResponse]: ...

    def roots(self, req: RootsRequest) -> Exchange[RootsResponse]: ...


class OracleClient(Protocol):
    name: str

    def query(self, req: QueryRequest) -> Exchange[QueryResponse]: ...


class InProcessNode:
    def __init__(self, node: FullNode, name: str | None = None) -> None:
        self.node = node
        self.name = name or node.name

    def _call(self, req: BaseModel, handler, resp_type: type[M]) -> Exchange[M]:
        up = encode(req)
        resp = handler(type(req).model_validate_json(up))
        down = encode(resp)
        return Exchange(resp_type.model_validate_json(down), len(up), len(down))

    def count(self, req: CountRequest) -> Exchange[CountResponse]:
        return self._call(req, self.node.count, CountResponse)

    def roots(self, req: RootsRequest) -> Exchange[RootsResponse]:
        return self._call(req, self.node.roots, RootsResponse)


class InProcessOracle:
    def __init__(self, oracle: Oracle, name: str = "oracle") -> None:
        self.oracle = oracle
        self.name = name

    def query(self, req: QueryRequest) -> Exchange[QueryResponse]:
        up = encode(req)
        resp = self.oracle.handle(QueryRequest.model_validate_json(up))
        down = encode(resp)
        return Exchange(QueryResponse.model_validate_json(down), len(up), len(down))


class _Http:
    def __init__(self, url: str, timeout: float, client: Optional[httpx.Client] = None) -> None:
        self.name = url
        self.url = url.rstrip("/")
        self.timeout = timeout
        self.client = client

    def _post(self, path: str, req: BaseModel) -> tuple[httpx.Response, int]:
        up = encode(req)
        post = self.client.post if self.client is not None else httpx.post
        resp = post(self.url + path, content=up, headers={"content-type": "application/json"},
                    timeout=self.timeout)
        return resp, len(up)


class HttpNode(_Http):
    def __init__(self, url: str, timeout: float = 30.0, client: Optional[httpx.Client] = None) -> None:
        super().__init__(url, timeout, client)

    def _exchange(self, path: str, req: BaseModel, resp_type: type[M]) -> Exchange[M]:
        try:
            resp, up = self._post(path, req)
        except httpx.HTTPError as exc:
            raise NodeUnavailable(f"{self.url}: {exc}") from exc
        if resp.status_code != 200:
            raise NodeUnavailable(f"{self.url}{path} returned {resp.status_code}")
        try:
            return Exchange(resp_type.model_validate_json(resp.content), up, len(resp.content))
        except ValidationError as exc:
            raise NodeUnavailable(f"{self.url}{path} sent a malformed answer") from exc

    def count(self, req: CountRequest) -> Exchange[CountResponse]:
        return self._exchange("/count", req, CountResponse)

    def roots(self, req: RootsRequest) -> Exchange[RootsResponse]:
        return self._exchange("/roots", req, RootsResponse)


class HttpOracle(_Http):
    def __init__(self, url: str, timeout: float = 3600.0, client: Optional[httpx.Client] = None) -> None:
        super().__init__(url, timeout, client)

    def query(self, req: QueryRequest) -> Exchange[QueryResponse]:
        try:
            resp, up = self._post("/query", req)
        except httpx.HTTPError as exc:
            raise OracleUnreachable(f"{self.url}: {exc}") from exc
        if resp.status_code == 422:
            raise QueryRejected(resp.text)
        if resp.status_code != 200:
            raise OracleUnreachable(f"{self.url}/query returned {resp.status_code}")
        try:
            return Exchange(QueryResponse.model_validate_json(resp.content), up, len(resp.content))
        except ValidationError as exc:
            raise OracleUnreachable(f"{self.url} sent a malformed answer") from exc


def node_client(target: Union[str, FullNode, NodeClient]) -> NodeClient:
    if isinstance(target, str):
        return HttpNode(target)
    if isinstance(target, FullNode):
        return InProcessNode(target)
    return target


def oracle_client(target: Union[str, Oracle, OracleClient]) -> OracleClient:
    if isinstance(target, str):
        return HttpOracle(target)
    if isinstance(target, Oracle):
        return InProcessOracle(target)
    return target
