"""Edge/cloud topology simulation: historical edge nodes fit temporal
features from local data and report them to a cloud registry; a cold-starting
target node queries the registry, builds an ensemble from the returned
features, and runs the online fusion loop over its own stream.

Only the three feature parameters (plus a small envelope) ever cross the
wire, so per-node traffic is constant in the local dataset size and raw
observations never leave their node. Messages are line-delimited JSON with
fixed field names; the default channel is in-process, and a loopback-socket
transport speaks the same message contract.
"""

from __future__ import annotations

import json
import socket
import socketserver
import threading
from dataclasses import dataclass, field

import numpy as np

from . import data_io, evaluation, fusion, gp_core
from .errors import ConfigError, DataError, GptdfError
from .gp_core import FitConfig, TemporalFeature

__all__ = [
    "FeatureRecord",
    "FeatureQuery",
    "FeatureResponse",
    "Ack",
    "CloudRegistry",
    "InProcessChannel",
    "SocketChannel",
    "serve_registry",
    "NodeSpec",
    "Scenario",
    "TargetReport",
    "SimulationResult",
    "DEFAULT_PRIOR_FEATURE",
    "run_edge_node",
    "run_simulation",
    "MESSAGE_TYPES",
    "MESSAGE_FIELDS",
]

MESSAGE_TYPES = ("report", "query", "response")
MESSAGE_FIELDS = ("type", "source_id", "sigma_f", "sigma_l", "sigma_n", "n_points", "fitted_at")
# Envelope extras allowed next to the fixed fields
ENVELOPE_FIELDS = ("limit", "status", "reason")

MIN_REPORT_POINTS = gp_core.MIN_FIT_POINTS

# Fallback expert for a target whose query returns nothing (normalized data)
DEFAULT_PRIOR_FEATURE = TemporalFeature(sigma_f=1.0, sigma_l=1.0, sigma_n=0.1)


@dataclass(frozen=True)
class FeatureRecord:
    """One reported feature triple: who fitted it, from how many points, and
    a logical fit timestamp used for recency ordering and idempotence."""

    source_id: str
    feature: TemporalFeature
    n_points: int
    fitted_at: int

    def __post_init__(self):
        if not self.source_id:
            raise ValueError("source_id must be nonempty")
        if int(self.n_points) < MIN_REPORT_POINTS:
            raise ValueError(f"n_points must be >= {MIN_REPORT_POINTS}, got {self.n_points}")
        object.__setattr__(self, "n_points", int(self.n_points))
        object.__setattr__(self, "fitted_at", int(self.fitted_at))

    @property
    def key(self):
        return (self.source_id, self.fitted_at)

    def to_message(self):
        msg = {"type": "report", "source_id": self.source_id}
        msg.update(self.feature.as_dict())
        msg["n_points"] = self.n_points
        msg["fitted_at"] = self.fitted_at
        return msg

    @classmethod
    def from_message(cls, msg):
        return cls(source_id=str(msg["source_id"]),
                   feature=TemporalFeature.from_dict(msg),
                   n_points=int(msg["n_points"]),
                   fitted_at=int(msg["fitted_at"]))


@dataclass(frozen=True)
class FeatureQuery:
    requester_id: str
    limit: int = None

    def to_message(self):
        msg = {"type": "query", "source_id": self.requester_id}
        if self.limit is not None:
            msg["limit"] = int(self.limit)
        return msg


@dataclass(frozen=True)
class FeatureResponse:
    records: tuple

    def __len__(self):
        return len(self.records)


@dataclass(frozen=True)
class Ack:
    accepted: bool
    reason: str = ""


def encode_message(msg):
    return json.dumps(msg, sort_keys=True)


def decode_message(line):
    msg = json.loads(line)
    if msg.get("type") not in MESSAGE_TYPES:
        raise ConfigError(f"unknown message type in {line!r}")
    return msg


class CloudRegistry:
    """Append-only feature store. Reports are idempotent per
    (source_id, fitted_at); queries see a consistent snapshot. Optionally
    persists one JSON record per line so later runs can resume."""

    def __init__(self, path=None):
        self._lock = threading.Lock()
        self._records = []
        self._by_key = {}
        self._path = path
        if path is not None:
            try:
                with open(path, encoding="utf-8") as fh:
                    for line in fh:
                        line = line.strip()
                        if line:
                            self._ingest(FeatureRecord.from_message(json.loads(line)))
            except FileNotFoundError:
                pass

    def _ingest(self, record):
        if record.key in self._by_key:
            return False
        self._by_key[record.key] = record
        self._records.append(record)
        return True

    def report(self, record):
        try:
            if not isinstance(record, FeatureRecord):
                record = FeatureRecord.from_message(record)
        except (KeyError, TypeError, ValueError) as exc:
            return Ack(False, f"invalid feature record: {exc}")
        with self._lock:
            fresh = self._ingest(record)
            if fresh and self._path is not None:
                with open(self._path, "a", encoding="utf-8") as fh:
                    fh.write(encode_message(record.to_message()) + "\n")
        return Ack(True, "" if fresh else "duplicate")

    def query(self, query):
        with self._lock:
            snapshot = list(self._records)
        matches = [r for r in snapshot if r.source_id != query.requester_id]
        matches.sort(key=lambda r: (-r.fitted_at, r.source_id))
        if query.limit is not None:
            matches = matches[: int(query.limit)]
        return FeatureResponse(tuple(matches))

    def snapshot(self):
        with self._lock:
            return tuple(self._records)

    def dump(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for record in self.snapshot():
                fh.write(encode_message(record.to_message()) + "\n")


class InProcessChannel:
    """Default transport: direct registry calls, but every message is still
    serialized to its wire line so traffic can be audited and counted."""

    def __init__(self, registry):
        self.registry = registry
        self.traffic = []  # (direction, node_id, line)

    def _record(self, direction, node_id, msg):
        self.traffic.append((direction, node_id, encode_message(msg)))

    def report(self, record):
        self._record("up", record.source_id, record.to_message())
        ack = self.registry.report(record)
        status = {"type": "response",
                  "status": "ok" if ack.accepted else "rejected"}
        if ack.reason:
            status["reason"] = ack.reason
        self._record("down", record.source_id, status)
        return ack

    def query(self, query):
        self._record("up", query.requester_id, query.to_message())
        response = self.registry.query(query)
        for record in response.records:
            msg = record.to_message()
            msg["type"] = "response"
            self._record("down", query.requester_id, msg)
        return response

    def bytes_by_node(self):
        """Total wire bytes attributed to each node (both directions)."""
        totals = {}
        for _, node_id, line in self.traffic:
            totals[node_id] = totals.get(node_id, 0) + len(line.encode("utf-8"))
        return totals


class _RegistryRequestHandler(socketserver.StreamRequestHandler):
    def handle(self):
        line = self.rfile.readline().decode("utf-8").strip()
        if not line:
            return
        try:
            msg = decode_message(line)
        except (json.JSONDecodeError, ConfigError) as exc:
            self.wfile.write((encode_message(
                {"type": "response", "status": "rejected", "reason": str(exc)}) + "\n").encode())
            return
        registry = self.server.registry
        if msg["type"] == "report":
            ack = registry.report(msg)
            status = {"type": "response", "status": "ok" if ack.accepted else "rejected"}
            if ack.reason:
                status["reason"] = ack.reason
            self.wfile.write((encode_message(status) + "\n").encode())
        elif msg["type"] == "query":
            query = FeatureQuery(str(msg["source_id"]), msg.get("limit"))
            for record in registry.query(query).records:
                out = record.to_message()
                out["type"] = "response"
                self.wfile.write((encode_message(out) + "\n").encode())
        # one request per connection; closing the socket ends the response


def serve_registry(registry, host="127.0.0.1", port=0):
    """Serve a registry over a loopback socket, one request per connection.
    Returns (server, thread, (host, port)); call server.shutdown() when done."""
    server = socketserver.ThreadingTCPServer((host, port), _RegistryRequestHandler)
    server.daemon_threads = True
    server.registry = registry
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server, thread, server.server_address


class SocketChannel:
    """Client side of the socket transport; same interface and traffic
    accounting as the in-process channel."""

    def __init__(self, address):
        self.address = address
        self.traffic = []

    def _exchange(self, node_id, msg):
        line = encode_message(msg)
        self.traffic.append(("up", node_id, line))
        with socket.create_connection(self.address) as sock:
            sock.sendall((line + "\n").encode("utf-8"))
            sock.shutdown(socket.SHUT_WR)
            raw = b""
            while True:
                chunk = sock.recv(65536)
                if not chunk:
                    break
                raw += chunk
        replies = []
        for reply_line in raw.decode("utf-8").splitlines():
            if reply_line.strip():
                self.traffic.append(("down", node_id, reply_line))
                replies.append(decode_message(reply_line))
        return replies

    def report(self, record):
        replies = self._exchange(record.source_id, record.to_message())
        status = replies[0] if replies else {"status": "rejected", "reason": "no reply"}
        return Ack(status.get("status") == "ok", status.get("reason", ""))

    def query(self, query):
        replies = self._exchange(query.requester_id, query.to_message())
        return FeatureResponse(tuple(FeatureRecord.from_message(msg) for msg in replies))

    bytes_by_node = InProcessChannel.bytes_by_node


# ---------------------------------------------------------------------------
# Node drivers and scenario orchestration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NodeSpec:
    node_id: str
    data: dict  # data spec for data_io.resolve_data_spec


@dataclass(frozen=True)
class Scenario:
    """Everything needed to run one topology: historical node datasets, the
    target stream, loop settings, and the model-subset selection."""

    nodes: tuple
    target: dict
    target_id: str = "target"
    tau: int = fusion.DEFAULT_TAU
    alpha: float = fusion.DEFAULT_ALPHA
    limit: int = None
    subset: object = "all"  # "all" or an explicit list of node ids
    normalization: str = "online"
    seed: int = 0
    fit: FitConfig = field(default_factory=FitConfig)

    def __post_init__(self):
        ids = [n.node_id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"duplicate node ids: {ids}")
        if self.target_id in ids:
            raise ConfigError(f"target id {self.target_id!r} collides with a historical node")
        if self.subset != "all" and not isinstance(self.subset, (list, tuple)):
            raise ConfigError("subset must be 'all' or a list of node ids")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if int(self.tau) < 1:
            raise ConfigError(f"tau must be >= 1, got {self.tau}")
        if self.limit is not None and int(self.limit) < 1:
            raise ConfigError(f"limit must be >= 1, got {self.limit}")

    @classmethod
    def from_dict(cls, d):
        if "target" not in d:
            raise ConfigError("scenario needs a 'target' entry")
        raw_nodes = d.get("historical", [])
        nodes = []
        for i, nd in enumerate(raw_nodes):
            if "id" not in nd or "data" not in nd:
                raise ConfigError(f"historical entry {i} needs 'id' and 'data'")
            nodes.append(NodeSpec(str(nd["id"]), nd["data"]))
        try:
            fit = FitConfig.from_dict(d["fit"]) if "fit" in d else FitConfig()
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad fit config: {exc}") from exc
        subset = d.get("subset", "all")
        return cls(nodes=tuple(nodes), target=d["target"],
                   target_id=str(d.get("target_id", "target")),
                   tau=int(d.get("tau", fusion.DEFAULT_TAU)),
                   alpha=float(d.get("alpha", fusion.DEFAULT_ALPHA)),
                   limit=None if d.get("limit") is None else int(d["limit"]),
                   subset=subset,
                   normalization=str(d.get("normalization", "online")),
                   seed=int(d.get("seed", 0)),
                   fit=fit)

    def as_dict(self):
        return {
            "historical": [{"id": n.node_id, "data": n.data} for n in self.nodes],
            "target": self.target,
            "target_id": self.target_id,
            "tau": self.tau,
            "alpha": self.alpha,
            "limit": self.limit,
            "subset": list(self.subset) if self.subset != "all" else "all",
            "normalization": self.normalization,
            "seed": self.seed,
            "fit": self.fit.as_dict(),
        }


@dataclass(frozen=True)
class TargetReport:
    node_id: str
    model_ids: tuple
    records: list  # StepRecord per stream step
    metrics: dict
    final_weights: tuple
    used_fallback: bool


def run_edge_node(local_data, role, channel, node_id, fitted_at=0, fit_config=None,
                  tau=fusion.DEFAULT_TAU, alpha=fusion.DEFAULT_ALPHA, limit=None,
                  subset="all", normalization="online"):
    """Run one node against the cloud channel.

    role="historical": normalize the local archive, fit its feature triple,
    report it, and return the FeatureRecord. role="target": query for
    features first, build the ensemble (falling back to a default prior
    expert when the registry is empty), then run the online loop over the
    local stream and return a TargetReport. Errors carry the node id.
    """
    try:
        if role == "historical":
            normalized, _ = data_io.normalize(local_data)
            feature = gp_core.fit_hyperparameters(normalized, fit_config)
            record = FeatureRecord(source_id=node_id, feature=feature,
                                   n_points=len(local_data), fitted_at=fitted_at)
            ack = channel.report(record)
            if not ack.accepted:
                raise DataError(f"registry rejected report: {ack.reason}")
            return record
        if role != "target":
            raise ConfigError(f"unknown node role {role!r}")

        response = channel.query(FeatureQuery(node_id, limit))
        records = list(response.records)
        if subset != "all":
            wanted = set(subset)
            records = [r for r in records if r.source_id in wanted]
        used_fallback = not records
        if used_fallback:
            features = [DEFAULT_PRIOR_FEATURE]
            model_ids = ("default-prior",)
        else:
            features = [r.feature for r in records]
            model_ids = tuple(r.source_id for r in records)
        state = fusion.ensemble_from_features(features, tau=tau, alpha=alpha)
        prepared = data_io.prepare_stream(local_data, normalization)
        step_records = fusion.run_stream(state, prepared.series)
        metrics = {
            "nll": evaluation.nll([r.prediction for r in step_records],
                                  [r.truth for r in step_records]),
            "mae": evaluation.mae([r.prediction.distribution.mean for r in step_records],
                                  [r.truth for r in step_records]),
            "mse": evaluation.mse([r.prediction.distribution.mean for r in step_records],
                                  [r.truth for r in step_records]),
            "delay": evaluation.delay(step_records, len(prepared.series)),
        }
        return TargetReport(node_id=node_id, model_ids=model_ids, records=step_records,
                            metrics=metrics, final_weights=tuple(state.omega_hat),
                            used_fallback=used_fallback)
    except GptdfError as exc:
        raise type(exc)(f"node {node_id}: {exc}") from exc


@dataclass(frozen=True)
class SimulationResult:
    scenario: Scenario
    feature_records: tuple
    target_report: object  # TargetReport or None when the target failed
    bytes_by_node: dict
    traffic: tuple  # (direction, node_id, line)
    errors: tuple  # (node_id, message)

    @property
    def ok(self):
        return not self.errors and self.target_report is not None


def run_simulation(scenario, registry=None, channel=None):
    """Execute all historical nodes, then the target node.

    Node failures are collected instead of aborting; the result carries
    whatever was produced plus the error list and full wire-traffic
    accounting. Deterministic for a fixed scenario (synthetic node data
    derives per-node seeds from the scenario seed)."""
    registry = registry if registry is not None else CloudRegistry()
    channel = channel if channel is not None else InProcessChannel(registry)
    errors = []
    feature_records = []

    seed_seq = np.random.SeedSequence(scenario.seed)
    node_seeds = [int(s.generate_state(1)[0]) for s in seed_seq.spawn(len(scenario.nodes) + 1)]

    # node failures of any stripe become error entries, not crashes
    recoverable = (GptdfError, ValueError, OSError)

    for idx, node in enumerate(scenario.nodes):
        try:
            local = data_io.resolve_data_spec(node.data, fallback_seed=node_seeds[idx])
            record = run_edge_node(local, "historical", channel, node.node_id,
                                   fitted_at=idx, fit_config=scenario.fit)
            feature_records.append(record)
        except recoverable as exc:
            errors.append((node.node_id, str(exc)))

    target_report = None
    try:
        target_stream = data_io.resolve_data_spec(scenario.target, fallback_seed=node_seeds[-1])
        target_report = run_edge_node(target_stream, "target", channel, scenario.target_id,
                                      tau=scenario.tau, alpha=scenario.alpha,
                                      limit=scenario.limit, subset=scenario.subset,
                                      normalization=scenario.normalization)
    except recoverable as exc:
        errors.append((scenario.target_id, str(exc)))

    return SimulationResult(scenario=scenario,
                            feature_records=tuple(feature_records),
                            target_report=target_report,
                            bytes_by_node=channel.bytes_by_node(),
                            traffic=tuple(channel.traffic),
                            errors=tuple(errors))
