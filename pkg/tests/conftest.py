"""
Shared fixtures: a fake run context for driving single nodes, and small
scenarios for end-to-end runs.
"""
from dataclasses import dataclass
from typing import Callable, List, Optional

import pytest

from config import with_overrides
from models.core import BROADCAST, CONTROL_SIZES, Packet, PacketKind, Position, Role
from models.schemas import ScenarioConfig
from services.topology_service import NodeSpec
from services.trace_service import TraceLog


@dataclass(eq=False)
class FakeTimer:
    node: int
    name: str
    at: int
    arg: Optional[int] = None
    cancelled: bool = False


class FakeContext:
    """Stands in for the simulation: records sends and timers, never runs anything."""

    def __init__(self, cfg: ScenarioConfig, in_range: Optional[Callable[[int, int], bool]] = None):
        self.cfg = cfg
        self.now = 0
        self.trace = TraceLog()
        self.sent: List[Packet] = []
        self.timers: List[FakeTimer] = []
        self.cpu_calls = 0
        self._in_range = in_range or (lambda a, b: True)

    def send(self, node_id, packet, ready_at):
        self.sent.append(packet)

    def cpu(self, node_id):
        self.cpu_calls += 1
        return self.now + 1000

    def set_timer(self, node_id, name, at, arg=None):
        timer = FakeTimer(node_id, name, at, arg)
        self.timers.append(timer)
        return timer

    def cancel(self, handle):
        handle.cancelled = True

    def in_range(self, a, b):
        return self._in_range(a, b)

    def live(self, name: str) -> List[FakeTimer]:
        return [t for t in self.timers if t.name == name and not t.cancelled]

    def sent_of(self, kind: PacketKind) -> List[Packet]:
        return [p for p in self.sent if p.kind == kind]


def make_dio(claimed: int, rank: Optional[int], true_source: Optional[int] = None, destination: int = BROADCAST) -> Packet:
    return Packet(
        kind=PacketKind.DIO,
        true_source=claimed if true_source is None else true_source,
        claimed_source=claimed,
        destination=destination,
        size_bytes=CONTROL_SIZES[PacketKind.DIO],
        created_at=0,
        seq=1,
        payload_rank=rank,
    )


def make_packet(kind: PacketKind, source: int, destination: int, **fields) -> Packet:
    size = 30 if kind == PacketKind.DATA else CONTROL_SIZES[kind]
    return Packet(
        kind=kind, true_source=source, claimed_source=source, destination=destination,
        size_bytes=size, created_at=fields.pop("created_at", 0), seq=fields.pop("seq", 1), **fields
    )


def small_config(**overrides) -> ScenarioConfig:
    """Five-node, two-minute scenario"""
    base = ScenarioConfig(
        area_m=60.0,
        n_sensors=4,
        n_attackers=0,
        sim_seconds=120.0,
        data_interval_s=10.0,
        data_start_jitter_s=5.0,
        attacker_activation_s=30.0,
        replications=1,
        seed=7,
    )
    return with_overrides(base, **overrides) if overrides else base


def lossless(cfg: ScenarioConfig) -> ScenarioConfig:
    return with_overrides(cfg, radio={**cfg.radio.model_dump(), "base_loss_prob": 0.0})


def victim_topology() -> List[NodeSpec]:
    """
    Root, one relay 40 m away and a victim 110 m out that no legitimate node
    reaches. The attacker between relay and victim hears only the relay's DIOs.
    """
    return [
        NodeSpec(0, Position(0.0, 0.0), Role.ROOT),
        NodeSpec(1, Position(40.0, 0.0), Role.SENSOR),
        NodeSpec(2, Position(110.0, 0.0), Role.SENSOR),
        NodeSpec(3, Position(75.0, 0.0), Role.ATTACKER),
    ]


@pytest.fixture
def cfg() -> ScenarioConfig:
    return small_config()


@pytest.fixture
def of0_cfg() -> ScenarioConfig:
    return small_config(objective_function="OF0")


@pytest.fixture
def ctx(cfg) -> FakeContext:
    return FakeContext(cfg)
