"""Seeded synthetic flow-data generator with planted anomalous user-weeks.

Users are drawn from behaviour archetypes (service ports, volumes, flag
patterns); a configurable fraction of user-weeks is rewritten by an anomaly
transform and labelled. Output is CSV text in the ``netflow-v1`` schema plus
a ground-truth labels CSV, and is byte-identical for a given config.
"""
from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, field

from .ingest import FLOW_ROLES, week_index_of
from .numkernel import Rng

__all__ = [
    "Archetype",
    "SynthConfig",
    "SynthData",
    "default_archetypes",
    "generate",
    "parse_labels",
]

_SECONDS_PER_DAY = 86400
_WEEKDAYS = 5

TRANSFORMS = ("volume_spike", "unusual_ports", "flag_shift", "rhythm_shift")

# The unusual-ports transform sweeps destination ports across this range for
# one day of the week instead of the archetype's few service ports, so
# distinct-port counts and the top-K port histogram both move; the flag
# transform sets URG/RST bits no normal flow carries.
_SCAN_PORT_BASE = 1024
_SCAN_PORT_SPAN = 9216
_ODD_FLAGS = (0b00100101, 0b00100100)  # URG+RST(+FIN)

# Volume-spike shape: one day carries a burst while the rest of the week goes
# quiet, so the weekly *total* stays near normal and the anomaly lives in the
# day-to-day pattern rather than in overall magnitude.
_SPIKE_DAY_MULT = 3.5
_QUIET_DAY_MULT = 0.4


@dataclass(frozen=True)
class Archetype:
    """Port/volume/flag profile one simulated user group follows."""

    name: str
    ports: tuple[int, ...]
    flows_per_day: tuple[int, int]  # inclusive bounds for the weekly base level
    bytes_range: tuple[int, int]
    packets_range: tuple[int, int]
    tcp_flags: tuple[int, ...]
    n_peers: int = 12
    out_fraction: float = 0.7
    # Mon..Fri activity multipliers: every group has a weekly rhythm, and the
    # rhythm (not just the volume) is part of what "normal" means.
    weekday_profile: tuple[float, ...] = (1.0, 1.0, 1.0, 1.0, 1.0)

    def __post_init__(self) -> None:
        if not self.ports:
            raise ValueError(f"archetype {self.name!r}: no ports")
        if self.flows_per_day[0] < 1 or self.flows_per_day[0] > self.flows_per_day[1]:
            raise ValueError(
                f"archetype {self.name!r}: flows_per_day must be 1 <= lo <= hi"
            )
        if not 0.0 <= self.out_fraction <= 1.0:
            raise ValueError(f"archetype {self.name!r}: out_fraction outside [0,1]")
        if len(self.weekday_profile) != _WEEKDAYS or any(
            m <= 0 for m in self.weekday_profile
        ):
            raise ValueError(
                f"archetype {self.name!r}: weekday_profile needs {_WEEKDAYS} "
                "positive multipliers"
            )


def default_archetypes() -> tuple[Archetype, Archetype]:
    """Two groups with disjoint service ports, volumes, and weekly rhythms."""
    web = Archetype(
        name="web",
        ports=(80, 443, 8080, 8443),
        flows_per_day=(20, 40),
        bytes_range=(2_000, 120_000),
        packets_range=(4, 60),
        tcp_flags=(0b00011010, 0b00010010),  # ACK+PSH+SYN / ACK+SYN
        n_peers=20,
        out_fraction=0.8,
        weekday_profile=(1.35, 1.15, 1.0, 0.8, 0.45),  # tapers into Friday
    )
    admin = Archetype(
        name="admin",
        ports=(22, 3389, 5900),
        flows_per_day=(5, 15),
        bytes_range=(200, 4_000),
        packets_range=(2, 12),
        tcp_flags=(0b00010011, 0b00011001),  # ACK+SYN+FIN / ACK+PSH+FIN
        n_peers=5,
        out_fraction=0.5,
        weekday_profile=(0.45, 0.8, 1.0, 1.15, 1.35),  # maintenance ramps up
    )
    return web, admin


@dataclass(frozen=True)
class SynthConfig:
    n_users: int = 200
    n_weeks: int = 8
    archetypes: tuple[Archetype, ...] = field(default_factory=default_archetypes)
    mixture: tuple[float, ...] = (0.65, 0.35)
    anomaly_rate: float = 0.02
    transforms: tuple[str, ...] = TRANSFORMS
    seed: int = 0
    start: dt.date = dt.date(2026, 1, 5)

    def __post_init__(self) -> None:
        if self.n_users < 1:
            raise ValueError("n_users must be >= 1")
        if self.n_weeks < 1:
            raise ValueError("n_weeks must be >= 1")
        if not self.archetypes:
            raise ValueError("at least one archetype is required")
        if len(self.mixture) != len(self.archetypes):
            raise ValueError(
                f"mixture has {len(self.mixture)} weights for "
                f"{len(self.archetypes)} archetypes"
            )
        if any(w < 0 for w in self.mixture) or abs(sum(self.mixture) - 1.0) > 1e-9:
            raise ValueError("mixture weights must be non-negative and sum to 1")
        if not 0.0 <= self.anomaly_rate <= 0.5:
            raise ValueError(f"anomaly_rate must be in [0, 0.5], got {self.anomaly_rate}")
        unknown = [t for t in self.transforms if t not in TRANSFORMS]
        if unknown:
            raise ValueError(f"unknown transforms {unknown}; known: {list(TRANSFORMS)}")
        if self.anomaly_rate > 0 and not self.transforms:
            raise ValueError("anomaly_rate > 0 requires at least one transform")
        if self.start.isoweekday() != 1:
            raise ValueError(f"start must be a Monday, got {self.start}")


@dataclass(frozen=True)
class SynthData:
    flows_csv: str
    labels_csv: str
    n_anomalous: int
    anomalous: frozenset[tuple[str, str]]  # (user_id, week_index)


def _user_id(i: int) -> str:
    return f"user{i:04d}"


def _range_draw(rng: Rng, bounds: tuple[int, int]) -> int:
    lo, hi = bounds
    return lo + rng.randint(hi - lo + 1)


def _week_flows(
    rng: Rng,
    user: str,
    arch: Archetype,
    base_level: float,
    monday: dt.date,
    transform: str | None,
    rows: list[str],
) -> None:
    flags = _ODD_FLAGS if transform == "flag_shift" else arch.tcp_flags
    # A user's habitual volume (base_level) barely moves week to week; days
    # then follow the archetype rhythm with some jitter. Anomalies mostly
    # rearrange the week instead of inflating it: a volume spike crams the
    # week's traffic into one day, a port sweep happens on a single day, and
    # a rhythm shift runs the weekly pattern backwards (each day is
    # individually unremarkable, only the ordering is wrong — so it needs an
    # asymmetric weekday_profile to mean anything).
    base = base_level * (0.92 + 0.16 * rng.random())
    special_day = rng.randint(_WEEKDAYS)  # drawn always, used by some transforms

    for day in range(_WEEKDAYS):
        date = monday + dt.timedelta(days=day)
        day_start = int((date - dt.date(1970, 1, 1)).total_seconds())
        if transform == "rhythm_shift":
            level = arch.weekday_profile[_WEEKDAYS - 1 - day]
        else:
            level = arch.weekday_profile[day]
        if transform == "volume_spike":
            level *= _SPIKE_DAY_MULT if day == special_day else _QUIET_DAY_MULT
        port_sweep = transform == "unusual_ports" and day == special_day
        jitter = 0.9 + 0.2 * rng.random()
        n_flows = max(1, round(base * level * jitter))
        for _ in range(n_flows):
            second = rng.randint(_SECONDS_PER_DAY)
            peer = f"srv-{arch.name}-{rng.randint(arch.n_peers):02d}"
            outbound = rng.random() < arch.out_fraction
            n_bytes = _range_draw(rng, arch.bytes_range)
            n_packets = _range_draw(rng, arch.packets_range)
            src_port = 20000 + rng.randint(40000)
            if port_sweep:
                dst_port = _SCAN_PORT_BASE + rng.randint(_SCAN_PORT_SPAN)
            else:
                dst_port = arch.ports[rng.randint(len(arch.ports))]
            flag = flags[rng.randint(len(flags))]
            if outbound:
                src, dst, direction = user, peer, "out"
            else:
                src, dst, direction = peer, user, "in"
                src_port, dst_port = dst_port, src_port
            rows.append(
                f"{day_start + second},{src},{dst},{direction},{n_bytes},"
                f"{n_packets},{src_port},{dst_port},tcp,{flag}"
            )


def generate(config: SynthConfig) -> SynthData:
    """Deterministic flows + labels for the configured population."""
    root = Rng(config.seed).derive("synth")
    users = [_user_id(i) for i in range(config.n_users)]
    mondays = [config.start + dt.timedelta(weeks=w) for w in range(config.n_weeks)]
    week_names = [week_index_of(m) for m in mondays]

    arch_rng = root.derive("archetype")
    assigned = [
        config.archetypes[arch_rng.weighted_choice(config.mixture)] for _ in users
    ]

    all_pairs = [(i, w) for i in range(config.n_users) for w in range(config.n_weeks)]
    n_anomalous = round(config.anomaly_rate * len(all_pairs))
    chosen = root.derive("anomalies").sample(all_pairs, n_anomalous)
    anomalous_pairs = set(chosen)

    flow_rows: list[str] = []
    label_rows: list[str] = []
    anomalous_weeks: set[tuple[str, str]] = set()
    for i, user in enumerate(users):
        user_rng = root.derive("user", i)
        arch = assigned[i]
        lo, hi = arch.flows_per_day
        base_level = lo + (hi - lo) * user_rng.random()  # habitual volume
        for w, monday in enumerate(mondays):
            transform = None
            if (i, w) in anomalous_pairs:
                transform = root.derive("transform", i, w).choice(config.transforms)
                anomalous_weeks.add((user, week_names[w]))
            _week_flows(user_rng, user, arch, base_level, monday, transform, flow_rows)
            label = "anomalous" if transform else "normal"
            label_rows.append(f"{user},{week_names[w]},{label}")

    flows_csv = ",".join(FLOW_ROLES) + "\n" + "\n".join(flow_rows) + "\n"
    labels_csv = "user_id,week_index,label\n" + "\n".join(label_rows) + "\n"
    return SynthData(
        flows_csv=flows_csv,
        labels_csv=labels_csv,
        n_anomalous=n_anomalous,
        anomalous=frozenset(anomalous_weeks),
    )


def parse_labels(text: str) -> dict[tuple[str, str], str]:
    """Read a labels CSV back into a (user_id, week_index) -> label map."""
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    if not lines or lines[0] != "user_id,week_index,label":
        raise ValueError("labels CSV must start with 'user_id,week_index,label'")
    out: dict[tuple[str, str], str] = {}
    for ln in lines[1:]:
        user, week, label = ln.split(",")
        if label not in ("normal", "anomalous"):
            raise ValueError(f"unexpected label {label!r} for {user}/{week}")
        out[(user, week)] = label
    return out
