"""Session engine: runs one protocol round across N storage servers.

Servers are driven through the wire format in both transports.  With
``in_process`` the frames are handed straight to a server session object;
with ``tcp`` they travel over localhost sockets.  Because both paths see
the same bytes, transcripts come out identical.

Faults are simulated: stragglers never answer, and malicious servers replace
their block with a random (or single-entry corrupted) one.
"""
from __future__ import annotations

import hashlib
import json
import socket
import socketserver
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InsufficientResponses, MalformedFrame, PmmError, TransportError
from .fpmm import baseline_make_queries, baseline_respond, fpmm_make_queries, fpmm_server_respond
from .matrix import mat_mul, matrix_to_bytes, random_matrix, scale, write_matrix
from .psmm import PsmmRequest, decode, decode_with_errors, make_queries, server_encode_and_respond, share_matrix_A
from .strategy import Kind
from .wire import Message, Mode, Tag, recv_frame, send_frame, wire_decode, wire_encode

DEFAULT_TIMEOUT = 30.0


@dataclass
class FaultPlan:
    stragglers: frozenset = frozenset()
    malicious: frozenset = frozenset()
    E: int = 0
    corruption: str = "random"  # or "sparse": perturb a single entry

    def __post_init__(self):
        self.stragglers = frozenset(self.stragglers)
        self.malicious = frozenset(self.malicious)
        if self.stragglers & self.malicious:
            raise ValueError("a server cannot be both straggler and malicious")
        if self.E < 0:
            raise ValueError("E must be >= 0")
        if self.corruption not in ("random", "sparse"):
            raise ValueError(f"unknown corruption {self.corruption!r}")

    def validate(self, N: int, P: int) -> list:
        """Budget problems; an empty list means decoding is guaranteed."""
        problems = []
        if any(not 0 <= s < N for s in self.stragglers | self.malicious):
            problems.append("server id out of range")
        if len(self.stragglers) > N - P - 2 * self.E:
            problems.append(f"{len(self.stragglers)} stragglers exceed N-P-2E={N - P - 2 * self.E}")
        if len(self.malicious) > self.E:
            problems.append(f"{len(self.malicious)} malicious servers exceed E={self.E}")
        return problems

    def to_dict(self) -> dict:
        return {
            "stragglers": sorted(self.stragglers),
            "malicious": sorted(self.malicious),
            "E": self.E,
            "corruption": self.corruption,
        }


# -- server side -------------------------------------------------------------------

class StorageServer:
    """Holds one server's shards; stateless across sessions."""

    def __init__(self, server_id: int, store, malicious: str | None = None):
        self.server_id = server_id
        self.modulus = store.modulus
        self.alpha = store.alpha[server_id]
        self.K = store.K
        self.shard_B = store.shards_B[server_id]
        self.shard_A = store.shards_A[server_id] if store.shards_A is not None else None
        self.R, self.V = store.R, store.V
        self.malicious = malicious
        self._products = None
        self._lock = threading.Lock()

    def products(self) -> dict:
        with self._lock:
            if self._products is None:
                if self.shard_A is None:
                    raise ValueError("no library A stored")
                p = self.modulus
                self._products = {
                    (r, v): mat_mul(self.shard_A[(r, 1)], self.shard_B[(v, 1)], p)
                    for r in range(1, self.R + 1)
                    for v in range(1, self.V + 1)
                }
            return self._products

    def session(self) -> "ServerSession":
        return ServerSession(self)

    def corrupt(self, block: np.ndarray, nonce) -> np.ndarray:
        rng = np.random.default_rng([nonce or 0, self.server_id])
        p = self.modulus
        if self.malicious == "sparse":
            out = block.copy()
            i = int(rng.integers(0, block.shape[0]))
            j = int(rng.integers(0, block.shape[1]))
            out[i, j] = (out[i, j] + 1 + int(rng.integers(0, p - 1))) % p
            return out
        return random_matrix(block.shape[0], block.shape[1], rng, p)


class ServerSession:
    """Per-connection state machine: HELLO, [SHARE], QUERY, COMPUTE -> RESPONSE."""

    def __init__(self, server: StorageServer):
        self.server = server
        self.share = None
        self.query = None
        self.compute_seconds = 0.0

    def _error(self, text: str) -> bytes:
        return wire_encode(Message(Tag.ERROR, text=text))

    def handle(self, frame: bytes) -> bytes | None:
        p = self.server.modulus
        try:
            msg = wire_decode(frame, p)
        except PmmError as exc:
            return self._error(f"{type(exc).__name__}: {exc}")
        if msg.tag is Tag.HELLO:
            return wire_encode(Message(Tag.HELLO, modulus=p))
        if msg.tag is Tag.SHARE:
            self.share = msg.matrices
            return None
        if msg.tag is Tag.QUERY:
            self.query = msg
            return None
        if msg.tag is Tag.COMPUTE:
            start = time.perf_counter()
            try:
                block = self._compute()
            except (PmmError, ValueError, KeyError, IndexError) as exc:
                return self._error(f"{type(exc).__name__}: {exc}")
            if self.server.malicious:
                block = self.server.corrupt(block, msg.nonce)
            self.compute_seconds = time.perf_counter() - start
            return wire_encode(Message(Tag.RESPONSE, matrices=[block]), p)
        return self._error(f"unexpected {msg.tag.name}")

    def _compute(self) -> np.ndarray:
        srv, q, p = self.server, self.query, self.server.modulus
        if q is None:
            raise ValueError("COMPUTE before QUERY")
        if q.mode is Mode.PSMM:
            if not self.share:
                raise ValueError("PSMM COMPUTE without SHARE")
            return server_encode_and_respond(srv.shard_B, self.share[0], q.matrices[0], p)
        if q.mode is Mode.FPMM:
            if srv.shard_A is None:
                raise ValueError("no library A stored")
            return fpmm_server_respond(srv.shard_A, srv.shard_B, q.matrices[0], q.matrices[1], p)
        return baseline_respond(srv.products(), q.matrices[0], p)


# -- TCP ------------------------------------------------------------------------------

class _Handler(socketserver.BaseRequestHandler):
    def handle(self):
        session = self.server.storage.session()
        self.request.settimeout(self.server.timeout_s)
        self.request.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        while True:
            try:
                frame = recv_frame(self.request)
            except (MalformedFrame, OSError):
                return
            reply = session.handle(frame)
            if reply is not None:
                try:
                    send_frame(self.request, reply)
                except TransportError:
                    return


class TcpStorageServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, storage: StorageServer, host="127.0.0.1", port=0, timeout_s=DEFAULT_TIMEOUT):
        self.storage = storage
        self.timeout_s = timeout_s
        super().__init__((host, port), _Handler)


def start_server(storage: StorageServer, host="127.0.0.1", port=0, timeout_s=DEFAULT_TIMEOUT) -> TcpStorageServer:
    srv = TcpStorageServer(storage, host, port, timeout_s)
    threading.Thread(target=srv.serve_forever, kwargs={"poll_interval": 0.05}, daemon=True).start()
    return srv


def stop_servers(servers) -> None:
    threads = [threading.Thread(target=srv.shutdown) for srv in servers]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for srv in servers:
        srv.server_close()


class _LocalChannel:
    def __init__(self, server: StorageServer):
        self.session = server.session()

    def request(self, frame: bytes, expect_reply: bool):
        reply = self.session.handle(frame)
        return reply if expect_reply else None

    def close(self):
        pass


class _TcpChannel:
    def __init__(self, address, timeout_s):
        try:
            self.sock = socket.create_connection(address, timeout=timeout_s)
            self.sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        except OSError as exc:
            raise TransportError(f"cannot connect to {address}: {exc}") from exc

    def request(self, frame: bytes, expect_reply: bool):
        send_frame(self.sock, frame)
        if not expect_reply:
            return None
        try:
            return recv_frame(self.sock)
        except OSError as exc:
            raise TransportError(str(exc)) from exc

    def close(self):
        self.sock.close()


# -- master side ------------------------------------------------------------------

def _digest(block: np.ndarray, p: int) -> str:
    return hashlib.sha256(matrix_to_bytes(block, p)).hexdigest()


@dataclass
class SessionTranscript:
    request: dict
    plan: dict
    faults: dict
    arrival: list = field(default_factory=list)
    consumed: list = field(default_factory=list)
    responses: dict = field(default_factory=dict)
    counters: dict = field(default_factory=dict)
    decoded: np.ndarray | None = None
    modulus: int = 0
    error: str | None = None
    timing: dict = field(default_factory=dict)  # wall-clock, kept out of the canonical form

    @property
    def ok(self) -> bool:
        return self.error is None

    def canonical(self) -> dict:
        out = {
            "request": self.request,
            "plan": self.plan,
            "faults": self.faults,
            "arrival": self.arrival,
            "consumed": self.consumed,
            "responses": {str(k): v for k, v in sorted(self.responses.items())},
            "counters": self.counters,
            "modulus": self.modulus,
            "error": self.error,
            "decoded": None,
        }
        if self.decoded is not None:
            out["decoded"] = {"shape": list(self.decoded.shape), "sha256": _digest(self.decoded, self.modulus)}
        return out

    def to_json(self) -> str:
        return json.dumps(self.canonical(), sort_keys=True, indent=1) + "\n"

    def save(self, directory) -> Path:
        root = Path(directory)
        root.mkdir(parents=True, exist_ok=True)
        (root / "transcript.json").write_text(self.to_json())
        (root / "timing.json").write_text(json.dumps(self.timing, sort_keys=True, indent=1) + "\n")
        if self.decoded is not None:
            write_matrix(root / "decoded.pmm", self.decoded, self.modulus)
        return root


def _request_summary(request) -> dict:
    if isinstance(request, PsmmRequest):
        return {
            "kind": "psmm", "theta": request.theta, "S": request.S, "T": request.T,
            "A_shape": list(request.A.shape), "noise_seed": request.noise_seed, "noiseless": request.noiseless,
        }
    return {
        "kind": request.plan.kind.value, "theta_A": request.theta_A, "theta_B": request.theta_B,
        "T_A": request.T_A, "T_B": request.T_B, "noise_seed": request.noise_seed, "noiseless": request.noiseless,
    }


def _check_store(store, plan):
    if store.N != plan.N or store.K != plan.K:
        raise ValueError(f"store (N={store.N}, K={store.K}) does not match plan (N={plan.N}, K={plan.K})")
    if plan.kind is Kind.BASELINE:
        if store.L != 1 or store.M != 1:
            raise ValueError("baseline needs storage with L = M = 1")
    elif store.M != plan.M or (plan.kind is Kind.FPMM and store.L != plan.L):
        raise ValueError("store striping (L, M) does not match plan")
    if plan.kind is not Kind.PSMM and store.shards_A is None:
        raise ValueError("store holds no library A")


def _outgoing(store, request, p) -> tuple:
    """Per-server (share frame or None, query frame) plus element counts."""
    plan = request.plan
    alpha = store.alpha
    shares = [None] * store.N
    share_elems = 0
    if plan.kind is Kind.PSMM:
        sh = share_matrix_A(request, alpha, p)
        shares = [wire_encode(Message(Tag.SHARE, matrices=[s]), p) for s in sh.values]
        share_elems = sum(s.size for s in sh.values)
        qmats = [[q] for q in make_queries(request, alpha, p).values]
        mode = Mode.PSMM
    elif plan.kind is Kind.FPMM:
        qs = fpmm_make_queries(request, alpha, p)
        qmats = [[a, b] for a, b in zip(qs.values_A, qs.values_B)]
        mode = Mode.FPMM
    else:
        qmats = [[q] for q in baseline_make_queries(request, alpha, p)[0]]
        mode = Mode.BASELINE
    query_elems = sum(m.size for ms in qmats for m in ms)
    queries = [wire_encode(Message(Tag.QUERY, matrices=ms, mode=mode), p) for ms in qmats]
    return shares, queries, share_elems, query_elems


def _server_round(channel, hello, share, query, compute, respond: bool, p):
    """Drive one server; returns (response block or None, bytes sent, bytes received)."""
    sent = received = 0
    try:
        reply = channel.request(hello, True)
        sent += len(hello)
        received += len(reply)
        if wire_decode(reply, p).tag is not Tag.HELLO:
            raise TransportError("handshake rejected")
        for frame in (share, query):
            if frame is not None:
                channel.request(frame, False)
                sent += len(frame)
        if not respond:
            return None, sent, received
        reply = channel.request(compute, True)
        sent += len(compute)
        received += len(reply)
        msg = wire_decode(reply, p)
        if msg.tag is Tag.ERROR:
            raise TransportError(f"server error: {msg.text}")
        if msg.tag is not Tag.RESPONSE or len(msg.matrices) != 1:
            raise TransportError(f"unexpected reply {msg.tag.name}")
        return msg.matrices[0], sent, received
    finally:
        channel.close()


def run_session(
    store,
    request,
    fault_plan: FaultPlan | None = None,
    transport: str = "in_process",
    seed: int = 0,
    endpoints=None,
    timeout_s: float = DEFAULT_TIMEOUT,
    raise_on_error: bool = True,
    workers: int | None = None,
) -> SessionTranscript:
    """Share, query, collect the first P (+2E) responses in a seeded arrival order, decode.

    ``endpoints`` lists ``(host, port)`` of already-running TCP servers; without
    it, local servers are started on ephemeral ports for the session.
    """
    plan = request.plan
    p = store.modulus
    faults = fault_plan or FaultPlan()
    _check_store(store, plan)
    if transport not in ("in_process", "tcp"):
        raise ValueError(f"unknown transport {transport!r}")
    N = store.N
    need = plan.P + 2 * faults.E
    transcript = SessionTranscript(_request_summary(request), plan.to_dict(), faults.to_dict(), modulus=p)

    t0 = time.perf_counter()
    shares, queries, share_elems, query_elems = _outgoing(store, request, p)
    transcript.timing["master_encode_s"] = time.perf_counter() - t0

    hello = wire_encode(Message(Tag.HELLO, modulus=p))
    compute = wire_encode(Message(Tag.COMPUTE, nonce=seed))
    servers = [
        StorageServer(i, store, malicious=faults.corruption if i in faults.malicious else None) for i in range(N)
    ]
    started = []
    if transport == "tcp" and endpoints is None:
        started = [start_server(s, timeout_s=timeout_s) for s in servers]
        endpoints = [srv.server_address for srv in started]

    def run_one(i):
        start = time.perf_counter()
        if transport == "tcp":
            channel = _TcpChannel(tuple(endpoints[i]), timeout_s)
        else:
            channel = _LocalChannel(servers[i])
        out = _server_round(channel, hello, shares[i], queries[i], compute, i not in faults.stragglers, p)
        return out + (time.perf_counter() - start,)

    try:
        t0 = time.perf_counter()
        with ThreadPoolExecutor(max_workers=workers or min(32, N)) as pool:
            results = list(pool.map(run_one, range(N)))
        transcript.timing["servers_s"] = time.perf_counter() - t0
    finally:
        stop_servers(started)
    transcript.timing["per_server_s"] = {i: r[3] for i, r in enumerate(results)}

    responders = [i for i in range(N) if results[i][0] is not None]
    order = np.random.default_rng([seed, 0xA11]).permutation(len(responders))
    transcript.arrival = [responders[j] for j in order]
    transcript.consumed = transcript.arrival[:need]
    transcript.responses = {i: _digest(results[i][0], p) for i in transcript.consumed}
    download_elems = sum(results[i][0].size for i in transcript.consumed)
    transcript.counters = {
        "upload_share_elements": share_elems,
        "upload_share_bytes": 8 * share_elems,
        "query_elements": query_elems,
        "query_bytes": 8 * query_elems,
        "download_elements": download_elems,
        "download_bytes": 8 * download_elems,
        "wire_bytes_sent": sum(r[1] for r in results),
        "wire_bytes_received": sum(r[2] for r in results),
        "responses_consumed": len(transcript.consumed),
    }

    t0 = time.perf_counter()
    try:
        if len(transcript.consumed) < need:
            raise InsufficientResponses(f"only {len(transcript.consumed)} of the {need} needed responses arrived")
        pairs = [(store.alpha[i], results[i][0]) for i in transcript.consumed]
        if plan.kind is Kind.BASELINE:
            pairs = [(a, scale(y, pow(int(a), plan.K, p), p)) for a, y in pairs]
        if faults.E:
            transcript.decoded = decode_with_errors(pairs, plan, faults.E, p, seed=[seed, 0xDEC])
        else:
            transcript.decoded = decode(pairs, plan, p)
    except PmmError as exc:
        transcript.error = f"{type(exc).__name__}: {exc}"
        if raise_on_error:
            raise
    transcript.timing["master_decode_s"] = time.perf_counter() - t0
    return transcript


def serve_forever(storage: StorageServer, host="127.0.0.1", port=0, timeout_s=DEFAULT_TIMEOUT, ready=None):
    """Blocking TCP server for one storage node (used by ``pmmkit serve``)."""
    srv = TcpStorageServer(storage, host, port, timeout_s)
    if ready is not None:
        ready(srv.server_address)
    try:
        srv.serve_forever()
    finally:
        srv.server_close()
