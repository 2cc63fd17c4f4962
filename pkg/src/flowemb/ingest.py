"""Log ingestion: parse flow/event CSVs, aggregate per-user daily feature
windows, and assemble weekday sequences ready for modelling.

A record is attributed to the user it describes (the source of an ``out``
flow, the destination of an ``in`` flow). Records are bucketed into fixed
windows of the day, each bucket is reduced to a numeric feature vector, and
weekday buckets are stitched into per-user weekly sequences. Weekend windows
are ignored; weeks with any weekday window missing are dropped and counted.

Labels ride along for evaluation only: the model-facing accessors
(:func:`sequences`, :func:`windows`) expose bare arrays, so no training code
ever sees a label.
"""
from __future__ import annotations

import csv
import datetime as dt
import io
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

logger = logging.getLogger(__name__)

_EPOCH = dt.date(1970, 1, 1)
_KNOWN_PROTOCOLS = ("tcp", "udp", "icmp")
_WEEKDAYS = 5


class ParseError(ValueError):
    """A malformed row encountered in strict mode, or a broken header."""


# ---------------------------------------------------------------------------
# records and schemas
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FlowRecord:
    """One network flow summarised from the tracked user's perspective."""

    timestamp: float
    src_id: str
    dst_id: str
    direction: str  # "out": user is src; "in": user is dst
    bytes: int
    packets: int
    src_port: int
    dst_port: int
    protocol: str
    tcp_flags: int  # 8-bit mask

    @property
    def user_id(self) -> str:
        return self.src_id if self.direction == "out" else self.dst_id

    @property
    def peer_id(self) -> str:
        return self.dst_id if self.direction == "out" else self.src_id


@dataclass(frozen=True)
class EventRecord:
    """One host/application event attributed to a user."""

    timestamp: float
    user_id: str
    event_type: str


FLOW_ROLES = (
    "timestamp",
    "src_id",
    "dst_id",
    "direction",
    "bytes",
    "packets",
    "src_port",
    "dst_port",
    "protocol",
    "tcp_flags",
)
EVENT_ROLES = ("timestamp", "user_id", "event_type")


@dataclass(frozen=True)
class Schema:
    """Maps record roles to the CSV columns that carry them."""

    name: str
    kind: str  # "flow" | "event"
    columns: Mapping[str, str]  # role -> csv column name

    def __post_init__(self) -> None:
        if self.kind not in ("flow", "event"):
            raise ValueError(f"unknown schema kind {self.kind!r}")
        required = FLOW_ROLES if self.kind == "flow" else EVENT_ROLES
        missing = [r for r in required if r not in self.columns]
        if missing:
            raise ValueError(f"schema {self.name!r} lacks roles: {missing}")


NETFLOW_V1 = Schema("netflow-v1", "flow", {r: r for r in FLOW_ROLES})
CERT_EVENTS_V1 = Schema("cert-events-v1", "event", {r: r for r in EVENT_ROLES})
BUILTIN_SCHEMAS = {s.name: s for s in (NETFLOW_V1, CERT_EVENTS_V1)}


def get_schema(name_or_path: str) -> Schema:
    """Builtin schema by name, or a user-supplied JSON schema file by path."""
    if name_or_path in BUILTIN_SCHEMAS:
        return BUILTIN_SCHEMAS[name_or_path]
    if os.path.exists(name_or_path):
        return load_schema(name_or_path)
    raise ValueError(
        f"unknown schema {name_or_path!r}: not a builtin "
        f"({sorted(BUILTIN_SCHEMAS)}) and not a file"
    )


def load_schema(path: str | Path) -> Schema:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    return Schema(raw["name"], raw["kind"], dict(raw["columns"]))


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

@dataclass
class ParseResult:
    records: list
    skipped: int
    total_lines: int

    def __iter__(self) -> Iterator:
        return iter(self.records)


def _parse_flow_row(row: Mapping[str, str], cols: Mapping[str, str]) -> FlowRecord:
    direction = row[cols["direction"]].strip().lower()
    if direction not in ("in", "out"):
        raise ValueError(f"direction must be in|out, got {direction!r}")
    n_bytes = int(row[cols["bytes"]])
    packets = int(row[cols["packets"]])
    if n_bytes < 0 or packets < 0:
        raise ValueError("bytes and packets must be non-negative")
    src_port = int(row[cols["src_port"]])
    dst_port = int(row[cols["dst_port"]])
    for port in (src_port, dst_port):
        if not 0 <= port <= 65535:
            raise ValueError(f"port {port} outside 0..65535")
    tcp_flags = int(row[cols["tcp_flags"]])
    if not 0 <= tcp_flags <= 255:
        raise ValueError(f"tcp_flags {tcp_flags} outside 0..255")
    protocol = row[cols["protocol"]].strip().lower()
    if protocol not in _KNOWN_PROTOCOLS:
        protocol = "other"
    src_id = row[cols["src_id"]].strip()
    dst_id = row[cols["dst_id"]].strip()
    if not src_id or not dst_id:
        raise ValueError("src_id and dst_id must be non-empty")
    return FlowRecord(
        timestamp=float(row[cols["timestamp"]]),
        src_id=src_id,
        dst_id=dst_id,
        direction=direction,
        bytes=n_bytes,
        packets=packets,
        src_port=src_port,
        dst_port=dst_port,
        protocol=protocol,
        tcp_flags=tcp_flags,
    )


def _parse_event_row(row: Mapping[str, str], cols: Mapping[str, str]) -> EventRecord:
    user_id = row[cols["user_id"]].strip()
    event_type = row[cols["event_type"]].strip().lower()
    if not user_id or not event_type:
        raise ValueError("user_id and event_type must be non-empty")
    return EventRecord(float(row[cols["timestamp"]]), user_id, event_type)


def parse_records(
    source: str | Path | io.TextIOBase | Iterable[str],
    schema: Schema = NETFLOW_V1,
    strict: bool = False,
) -> ParseResult:
    """Parse a CSV log into records.

    A header row is required; missing mapped columns reject the whole input.
    Malformed data rows are skipped (and counted, and logged) by default, or
    raise :class:`ParseError` in strict mode. Every data line ends up either
    parsed or counted as skipped.
    """
    if isinstance(source, (str, Path)):
        with open(source, newline="", encoding="utf-8") as fh:
            return parse_records(fh, schema, strict)

    reader = csv.DictReader(source)
    if reader.fieldnames is None:
        raise ParseError("input has no CSV header row")
    missing = [c for c in schema.columns.values() if c not in reader.fieldnames]
    if missing:
        raise ParseError(
            f"input is missing columns {missing} required by schema {schema.name!r}"
        )

    row_parser = _parse_flow_row if schema.kind == "flow" else _parse_event_row
    records: list = []
    skipped = 0
    total = 0
    for line_no, row in enumerate(reader, start=2):  # header is line 1
        total += 1
        try:
            if None in row.values():
                raise ValueError("row has fewer fields than the header")
            records.append(row_parser(row, schema.columns))
        except (ValueError, KeyError) as exc:
            if strict:
                raise ParseError(f"line {line_no}: {exc}") from exc
            skipped += 1
            logger.warning("skipping malformed line %d: %s", line_no, exc)
    return ParseResult(records, skipped, total)


# ---------------------------------------------------------------------------
# feature extraction
# ---------------------------------------------------------------------------

_FLOW_COUNTS = {
    "flows": lambda rs: float(len(rs)),
    "bytes": lambda rs: float(sum(r.bytes for r in rs)),
    "packets": lambda rs: float(sum(r.packets for r in rs)),
    "distinct_dst_ports": lambda rs: float(len({r.dst_port for r in rs})),
    "distinct_src_ports": lambda rs: float(len({r.src_port for r in rs})),
    "distinct_peers": lambda rs: float(len({r.peer_id for r in rs})),
    "distinct_protocols": lambda rs: float(len({r.protocol for r in rs})),
    "tcp_flows": lambda rs: float(sum(1 for r in rs if r.protocol == "tcp")),
    "udp_flows": lambda rs: float(sum(1 for r in rs if r.protocol == "udp")),
    "icmp_flows": lambda rs: float(sum(1 for r in rs if r.protocol == "icmp")),
}

_TOPK_KEYS = {
    "dst_port": lambda r: r.dst_port,
    "src_port": lambda r: r.src_port,
    "protocol": lambda r: r.protocol,
    "peer": lambda r: r.peer_id,
}

_FLAG_BITS = 8


@dataclass(frozen=True)
class FeatureSpec:
    """Declares how a window of records becomes a numeric vector.

    ``counts`` are named scalar aggregations; ``bitmaps`` expand a flag mask
    into one 0/1 feature per bit (observed-anywhere-in-window semantics);
    ``topk`` features are the K highest frequency counts of a key, rank
    ordered and zero padded. With ``directional`` set, the whole block is
    computed separately for outgoing and incoming records.
    """

    counts: tuple[str, ...]
    bitmaps: tuple[str, ...] = ()
    topk: tuple[tuple[str, int], ...] = ()
    directional: bool = True
    kind: str = "flow"

    def __post_init__(self) -> None:
        if self.kind == "flow":
            bad = [c for c in self.counts if c not in _FLOW_COUNTS]
            if bad:
                raise ValueError(f"unknown flow count features: {bad}")
            bad = [k for k, _ in self.topk if k not in _TOPK_KEYS]
            if bad:
                raise ValueError(f"unknown top-k keys: {bad}")
            bad = [b for b in self.bitmaps if b != "tcp_flags"]
            if bad:
                raise ValueError(f"unknown bitmap features: {bad}")
        elif self.kind == "event":
            if self.bitmaps or self.topk:
                raise ValueError("event features support counts only")
            if self.directional:
                raise ValueError("event records carry no direction")
            bad = [
                c for c in self.counts if c != "events" and not c.startswith("type:")
            ]
            if bad:
                raise ValueError(f"unknown event count features: {bad}")
        else:
            raise ValueError(f"unknown feature kind {self.kind!r}")

    def _block_names(self) -> list[str]:
        names = list(self.counts)
        for b in self.bitmaps:
            names += [f"{b}_bit{i}" for i in range(_FLAG_BITS)]
        for key, k in self.topk:
            names += [f"top{i + 1}_{key}" for i in range(k)]
        return names

    @property
    def feature_names(self) -> tuple[str, ...]:
        block = self._block_names()
        if not self.directional:
            return tuple(block)
        return tuple(f"out:{n}" for n in block) + tuple(f"in:{n}" for n in block)

    @property
    def dimension(self) -> int:
        return len(self.feature_names)

    @property
    def clustering_indices(self) -> tuple[int, ...]:
        """Indices of the count and bitmap features (used to segment users)."""
        block = len(self._block_names())
        prefix = len(self.counts) + _FLAG_BITS * len(self.bitmaps)
        idx = list(range(prefix))
        if self.directional:
            idx += [block + i for i in range(prefix)]
        return tuple(idx)


def default_flow_spec() -> FeatureSpec:
    return FeatureSpec(
        counts=tuple(_FLOW_COUNTS),
        bitmaps=("tcp_flags",),
        topk=(("dst_port", 5), ("src_port", 5)),
        directional=True,
        kind="flow",
    )


def default_event_spec(
    event_types: Sequence[str] = ("logon", "device", "file", "http", "email"),
) -> FeatureSpec:
    return FeatureSpec(
        counts=("events",) + tuple(f"type:{t}" for t in event_types),
        directional=False,
        kind="event",
    )


def _extract_block(records: Sequence, spec: FeatureSpec) -> list[float]:
    out: list[float] = []
    if spec.kind == "flow":
        for name in spec.counts:
            out.append(_FLOW_COUNTS[name](records))
        for _ in spec.bitmaps:
            mask = 0
            for r in records:
                mask |= r.tcp_flags
            out += [float((mask >> i) & 1) for i in range(_FLAG_BITS)]
        for key, k in spec.topk:
            extractor = _TOPK_KEYS[key]
            freq: dict = {}
            for r in records:
                v = extractor(r)
                freq[v] = freq.get(v, 0) + 1
            ranked = sorted(freq.values(), reverse=True)[:k]
            out += [float(c) for c in ranked] + [0.0] * (k - len(ranked))
    else:
        for name in spec.counts:
            if name == "events":
                out.append(float(len(records)))
            else:
                etype = name.split(":", 1)[1]
                out.append(float(sum(1 for r in records if r.event_type == etype)))
    return out


def extract_window(records: Sequence, spec: FeatureSpec) -> np.ndarray:
    """Reduce one window's records to the feature vector ``spec`` declares.

    An empty window yields the zero vector; the dimension never depends on
    the records themselves.
    """
    if not spec.directional:
        vec = np.asarray(_extract_block(list(records), spec))
    else:
        out_block = _extract_block([r for r in records if r.direction == "out"], spec)
        in_block = _extract_block([r for r in records if r.direction == "in"], spec)
        vec = np.asarray(out_block + in_block)
    if vec.shape != (spec.dimension,):
        raise AssertionError("feature vector does not match declared dimension")
    return vec


# ---------------------------------------------------------------------------
# windows and weeks
# ---------------------------------------------------------------------------

def window_key(
    timestamp: float, window_hours: int = 24, utc_offset_hours: float = 0.0
) -> tuple[dt.date, int]:
    """(calendar day, slot within day) for a timestamp, at a fixed UTC offset."""
    if 24 % window_hours:
        raise ValueError("window_hours must divide 24")
    shifted = timestamp + utc_offset_hours * 3600.0
    day = int(shifted // 86400)
    second_of_day = shifted - day * 86400.0
    slot = int(second_of_day // (window_hours * 3600.0))
    return _EPOCH + dt.timedelta(days=day), slot


def window_vectors(
    records: Iterable,
    spec: FeatureSpec,
    window_hours: int = 24,
    utc_offset_hours: float = 0.0,
) -> dict[tuple[str, dt.date, int], np.ndarray]:
    """Group records per (user, day, slot) and extract each group's vector."""
    buckets: dict[tuple[str, dt.date, int], list] = {}
    for r in records:
        day, slot = window_key(r.timestamp, window_hours, utc_offset_hours)
        buckets.setdefault((r.user_id, day, slot), []).append(r)
    return {key: extract_window(rs, spec) for key, rs in buckets.items()}


@dataclass(eq=False)
class UserWeek:
    """One user's weekday window sequence for one ISO week."""

    user_id: str
    week_index: str  # "YYYY-Www"
    x_seq: np.ndarray  # (N, d)
    label: str | None = None  # "normal" | "anomalous"; evaluation only

    def __post_init__(self) -> None:
        self.x_seq = np.asarray(self.x_seq, dtype=np.float64)
        if self.x_seq.ndim != 2:
            raise ValueError("x_seq must be 2-D (windows x features)")


def week_index_of(day: dt.date) -> str:
    iso = day.isocalendar()
    return f"{iso[0]}-W{iso[1]:02d}"


def build_user_weeks(
    vectors: Mapping[tuple[str, dt.date, int], np.ndarray],
    windows_per_day: int = 1,
) -> tuple[list[UserWeek], int]:
    """Assemble per-user weekly sequences from window vectors.

    Weekend windows are discarded. A (user, ISO week) group survives only if
    all ``5 * windows_per_day`` weekday windows are present; incomplete weeks
    are dropped and counted. Output is sorted by (user_id, week_index) and
    each sequence is ordered Monday..Friday, slots ascending.
    """
    grouped: dict[tuple[str, str], dict[tuple[int, int], np.ndarray]] = {}
    for (user, day, slot), vec in vectors.items():
        weekday = day.isoweekday()  # 1=Mon .. 7=Sun
        if weekday > _WEEKDAYS:
            continue
        grouped.setdefault((user, week_index_of(day)), {})[(weekday, slot)] = vec

    expected = [
        (weekday, slot)
        for weekday in range(1, _WEEKDAYS + 1)
        for slot in range(windows_per_day)
    ]
    weeks: list[UserWeek] = []
    dropped = 0
    for (user, week_idx) in sorted(grouped):
        slots = grouped[(user, week_idx)]
        if all(k in slots for k in expected):
            weeks.append(UserWeek(user, week_idx, np.stack([slots[k] for k in expected])))
        else:
            dropped += 1
    if dropped:
        logger.info("dropped %d incomplete user-weeks", dropped)
    return weeks, dropped


def attach_labels(
    weeks: Sequence[UserWeek], labels: Mapping[tuple[str, str], str]
) -> list[UserWeek]:
    """New UserWeek list with labels joined on (user_id, week_index)."""
    return [
        replace_label(w, labels.get((w.user_id, w.week_index))) for w in weeks
    ]


def replace_label(week: UserWeek, label: str | None) -> UserWeek:
    return UserWeek(week.user_id, week.week_index, week.x_seq, label)


# -- model-facing accessors: arrays only, labels stay behind ---------------

def sequences(weeks: Sequence[UserWeek]) -> np.ndarray:
    """(n, N, d) array of the weekly sequences; labels are not exposed."""
    return np.stack([w.x_seq for w in weeks]) if weeks else np.zeros((0, 0, 0))


def windows(weeks: Sequence[UserWeek]) -> np.ndarray:
    """(n*N, d) array of individual windows; labels are not exposed."""
    if not weeks:
        return np.zeros((0, 0))
    return np.concatenate([w.x_seq for w in weeks], axis=0)


def user_profiles(
    weeks: Sequence[UserWeek], indices: Sequence[int] | None = None
) -> tuple[list[str], np.ndarray]:
    """Per-user median window vector (optionally restricted to some features).

    The median keeps a user's profile anchored to their habitual behaviour
    even when some of their windows are wildly off — segmentation should not
    be steered by the very outliers scoring is meant to find. Users are
    returned in sorted order, which is the canonical ordering for everything
    downstream (clustering, splits).
    """
    by_user: dict[str, list[np.ndarray]] = {}
    for w in weeks:
        by_user.setdefault(w.user_id, []).append(w.x_seq)
    users = sorted(by_user)
    if not users:
        return [], np.zeros((0, 0))
    idx = np.asarray(indices, dtype=int) if indices is not None else None
    rows = []
    for u in users:
        profile = np.median(np.concatenate(by_user[u], axis=0), axis=0)
        rows.append(profile if idx is None else profile[idx])
    return users, np.stack(rows)


# ---------------------------------------------------------------------------
# standardization
# ---------------------------------------------------------------------------

class Standardizer:
    """Per-feature z-scoring with constant features passed through.

    Fit on training windows only; features with standard deviation below
    1e-12 get sigma 1 so they standardize to a constant instead of blowing
    up.
    """

    def __init__(self, mean: np.ndarray | None = None, sigma: np.ndarray | None = None):
        self.mean = None if mean is None else np.asarray(mean, dtype=np.float64)
        self.sigma = None if sigma is None else np.asarray(sigma, dtype=np.float64)

    @property
    def fitted(self) -> bool:
        return self.mean is not None

    def fit(self, rows: np.ndarray) -> "Standardizer":
        rows = np.asarray(rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[0] == 0:
            raise ValueError("fit requires a non-empty 2-D array of rows")
        self.mean = rows.mean(axis=0)
        sigma = rows.std(axis=0)
        sigma[sigma < 1e-12] = 1.0
        self.sigma = sigma
        return self

    def transform(self, rows: np.ndarray) -> np.ndarray:
        if not self.fitted:
            raise RuntimeError("Standardizer.transform called before fit")
        return (np.asarray(rows, dtype=np.float64) - self.mean) / self.sigma

    def transform_week(self, week: UserWeek) -> UserWeek:
        return UserWeek(week.user_id, week.week_index, self.transform(week.x_seq), week.label)

    def transform_weeks(self, weeks: Sequence[UserWeek]) -> list[UserWeek]:
        return [self.transform_week(w) for w in weeks]

    def to_dict(self) -> dict:
        if not self.fitted:
            raise RuntimeError("cannot serialize an unfitted Standardizer")
        return {"mean": self.mean.tolist(), "sigma": self.sigma.tolist()}

    @classmethod
    def from_dict(cls, raw: Mapping) -> "Standardizer":
        return cls(np.asarray(raw["mean"]), np.asarray(raw["sigma"]))


# ---------------------------------------------------------------------------
# dataset container and round-trip
# ---------------------------------------------------------------------------

@dataclass
class WeekDataset:
    """Extracted user-weeks plus the metadata needed to reproduce them."""

    weeks: list[UserWeek]
    meta: dict = field(default_factory=dict)

    @property
    def feature_dim(self) -> int:
        return self.weeks[0].x_seq.shape[1] if self.weeks else int(self.meta.get("d", 0))

    @property
    def sequence_length(self) -> int:
        return self.weeks[0].x_seq.shape[0] if self.weeks else int(self.meta.get("n_windows", 0))

    def users(self) -> list[str]:
        return sorted({w.user_id for w in self.weeks})


def save_dataset(path: str | Path, dataset: WeekDataset) -> None:
    doc = {
        "meta": dataset.meta,
        "weeks": [
            {
                "user_id": w.user_id,
                "week_index": w.week_index,
                "x": w.x_seq.tolist(),
                **({"label": w.label} if w.label is not None else {}),
            }
            for w in dataset.weeks
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_dataset(path: str | Path) -> WeekDataset:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    weeks = [
        UserWeek(w["user_id"], w["week_index"], np.asarray(w["x"]), w.get("label"))
        for w in doc["weeks"]
    ]
    return WeekDataset(weeks, doc.get("meta", {}))
