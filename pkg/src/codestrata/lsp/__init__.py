from .client import LspServerConfig, Session, path_to_uri, start_session, uri_to_path
from .errors import (
    HandshakeTimeout,
    LspError,
    ProtocolError,
    RequestTimeout,
    ServerError,
    SpawnFailure,
)
from .extract import (
    ExtractionFailed,
    ExtractionResult,
    NoFiles,
    SymbolRecord,
    extract_call_edges,
    extract_graph,
    extract_symbols,
    symbol_node_id,
)
from .rpc import RpcConnection, encode_frame, read_frame

__all__ = [
    "ExtractionFailed",
    "ExtractionResult",
    "HandshakeTimeout",
    "LspError",
    "LspServerConfig",
    "NoFiles",
    "ProtocolError",
    "RequestTimeout",
    "RpcConnection",
    "ServerError",
    "Session",
    "SpawnFailure",
    "SymbolRecord",
    "encode_frame",
    "extract_call_edges",
    "extract_graph",
    "extract_symbols",
    "path_to_uri",
    "read_frame",
    "start_session",
    "symbol_node_id",
    "uri_to_path",
]
