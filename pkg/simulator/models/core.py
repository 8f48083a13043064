"""
Shared domain values for the copycat simulator.

Time is kept as integer microseconds so the scheduler key never holds a float.
"""
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple


# ── Time quantum ─────────────────────────────────────────────
US_PER_SECOND = 1_000_000

SimTime = int  # microseconds since boot
NodeId = int


def seconds_to_us(seconds: float) -> SimTime:
    """Quantize a duration in seconds to whole microseconds."""
    return int(math.floor(seconds * US_PER_SECOND + 0.5))


def us_to_seconds(t: SimTime) -> float:
    return t / US_PER_SECOND


# ── Identities and ranks ─────────────────────────────────────
ROOT_ID: NodeId = 0
BROADCAST: NodeId = -1

MIN_HOP_RANK_INCREASE = 256
ROOT_RANK = 256
INFINITE_RANK = 0xFFFF


class InvalidRankError(ValueError):
    """Rank below the root rank"""


class Role(str, Enum):
    ROOT = "root"
    SENSOR = "sensor"
    ATTACKER = "attacker"


@dataclass(frozen=True)
class Position:
    """Node placement in meters"""
    x: float
    y: float


def distance(a: Position, b: Position) -> float:
    """Euclidean distance in meters"""
    return math.hypot(a.x - b.x, a.y - b.y)


def dag_rank(rank: int) -> int:
    """Integer rank level used for loop detection."""
    if rank < ROOT_RANK:
        raise InvalidRankError(f"Rank {rank} is below the root rank {ROOT_RANK}")
    return rank // MIN_HOP_RANK_INCREASE


# ── Packets ──────────────────────────────────────────────────
class PacketKind(str, Enum):
    DIO = "DIO"
    DIS = "DIS"
    DAO = "DAO"
    DAO_ACK = "DAO_ACK"
    DATA = "DATA"
    PROBE = "PROBE"
    ACK = "ACK"


# Frame sizes in bytes; DATA size comes from the scenario.
CONTROL_SIZES = {
    PacketKind.DIO: 76,
    PacketKind.DIS: 12,
    PacketKind.DAO: 40,
    PacketKind.DAO_ACK: 20,
    PacketKind.PROBE: 20,
    PacketKind.ACK: 5,
}


@dataclass(slots=True)
class Packet:
    """
    One link-layer frame.

    claimed_source is the source address written in the header; it differs from
    true_source only for spoofed replays. DATA keeps origin/app_seq/created_at
    across hops, DAO and DAO_ACK carry their hop path in route.
    """
    kind: PacketKind
    true_source: NodeId
    claimed_source: NodeId
    destination: NodeId
    size_bytes: int
    created_at: SimTime
    seq: int
    payload_rank: Optional[int] = None
    origin: NodeId = BROADCAST
    app_seq: int = -1
    route: Tuple[NodeId, ...] = ()
    ack_for: int = -1

    @property
    def is_broadcast(self) -> bool:
        return self.destination == BROADCAST
