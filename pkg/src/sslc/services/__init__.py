"""Full-node and oracle services with a shared handler core and two transports."""

from .app import fullnode_app, fullnode_serve, oracle_app, oracle_serve
from .behavior import NodeBehavior, NodeMode, OracleBehavior, OracleMode
from .fullnode import FullNode, NodeUnavailable
from .models import (
    CountRequest,
    CountResponse,
    QueryRequest,
    QueryResponse,
    RootEntry,
    RootsRequest,
    RootsResponse,
)
from .oracle import Answer, Oracle, QueryRejected
from .transport import (
    Exchange,
    HttpNode,
    HttpOracle,
    InProcessNode,
    InProcessOracle,
    NodeClient,
    OracleClient,
    OracleUnreachable,
    encode,
    node_client,
    oracle_client,
)

__all__ = [
    "Answer",
    "CountRequest",
    "CountResponse",
    "Exchange",
    "FullNode",
    "HttpNode",
    "HttpOracle",
    "InProcessNode",
    "InProcessOracle",
    "NodeBehavior",
    "NodeClient",
    "NodeMode",
    "NodeUnavailable",
    "Oracle",
    "OracleBehavior",
    "OracleClient",
    "OracleMode",
    "OracleUnreachable",
    "QueryRejected",
    "QueryRequest",
    "QueryResponse",
    "RootEntry",
    "RootsRequest",
    "RootsResponse",
    "encode",
    "fullnode_app",
    "fullnode_serve",
    "node_client",
    "oracle_app",
    "oracle_client",
    "oracle_serve",
]
