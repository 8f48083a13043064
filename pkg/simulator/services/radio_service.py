"""
Simplified lossy wireless medium with duty-cycled receivers and a CSMA MAC.

Receivers sleep and sample the channel once per check period, so a sender
repeats its frame back to back (a strobe). A broadcast strobe lasts one full
period plus one copy, which every neighbor's check lands on. A unicast strobe
stops once the addressee has taken a copy and acknowledged it, and otherwise
runs for the same full period. ACKs go out once, unstrobed.

A receiver takes the copy starting at its first check after the strobe begins.
Delivery is unit-disk within comm range; any other frame overlapping that copy
from a sender within interference range of the receiver (or sent by the
receiver itself) destroys the reception. A lone copy still fails with
probability base_loss_prob. There is no capture effect.
"""
import logging
import random
from collections import deque
from dataclasses import dataclass
from typing import Deque, Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple

from models.core import CONTROL_SIZES, NodeId, Packet, PacketKind, SimTime, distance, seconds_to_us
from models.schemas import RadioParams
from services.scheduler import Event, EventKind
from services.topology_service import NodeSpec

logger = logging.getLogger(__name__)

MAX_FRAME_BYTES = 127

Window = Tuple[SimTime, SimTime]


def airtime(size_bytes: int, params: RadioParams) -> float:
    """Seconds on air for a frame of size_bytes."""
    if size_bytes <= 0:
        raise ValueError(f"Frame size must be positive, got {size_bytes}")
    return size_bytes * 8 / params.bitrate_bps


def airtime_us(size_bytes: int, params: RadioParams) -> int:
    return seconds_to_us(airtime(size_bytes, params))


def strobe_us(size_bytes: int, params: RadioParams, period_us: int) -> int:
    """Longest strobe for one frame: a whole check period plus one copy."""
    return period_us + airtime_us(size_bytes, params)


@dataclass(slots=True, eq=False)
class RadioEvent:
    """One strobe (or single frame) occupying the medium over [start, end)"""
    frame_id: int
    sender: NodeId
    packet: Packet
    start: SimTime
    end: SimTime
    copy_us: int = 0
    attempt: int = 1

    def overlaps(self, other: "RadioEvent") -> bool:
        return self.start < other.end and other.start < self.end

    def overlaps_window(self, window: Window) -> bool:
        return self.start < window[1] and window[0] < self.end


class Medium:
    """
    Shared channel of one run.

    Without a check period the receivers are always on and every frame lasts
    exactly its airtime.
    """

    def __init__(
        self,
        nodes: Sequence[NodeSpec],
        params: RadioParams,
        period_us: int = 0,
        check_phases: Optional[Mapping[NodeId, int]] = None
    ):
        self.params = params
        positions = {n.id: n.position for n in nodes}
        ids = sorted(positions)
        self.comm: Dict[NodeId, Tuple[NodeId, ...]] = {}
        self.interferers: Dict[NodeId, FrozenSet[NodeId]] = {}
        for i in ids:
            d = {j: distance(positions[i], positions[j]) for j in ids if j != i}
            self.comm[i] = tuple(j for j in ids if j != i and d[j] <= params.comm_range_m)
            self.interferers[i] = frozenset(j for j in ids if j != i and d[j] <= params.interference_range_m)
        self._comm_sets = {i: frozenset(v) for i, v in self.comm.items()}
        self.period_us = period_us
        self.check_phases = dict(check_phases or {})
        self._on_air: Deque[RadioEvent] = deque()
        self._next_frame = 0
        self._horizon_us = strobe_us(MAX_FRAME_BYTES, params, period_us)
        self.collisions = 0

    @property
    def duty_cycled(self) -> bool:
        return self.period_us > 0

    def in_comm_range(self, a: NodeId, b: NodeId) -> bool:
        return b in self._comm_sets[a]

    def _prune(self, t: SimTime):
        while self._on_air and self._on_air[0].end < t - self._horizon_us:
            self._on_air.popleft()

    def channel_busy(self, node: NodeId, t: SimTime) -> bool:
        """Clear-channel assessment: any frame on air audible at node, including its own."""
        audible = self._comm_sets[node]
        return any(
            f.start <= t < f.end and (f.sender == node or f.sender in audible)
            for f in self._on_air
        )

    def duration_us(self, packet: Packet) -> int:
        """Planned time on air: one copy for ACKs and always-on receivers, else a full strobe."""
        if not self.duty_cycled or packet.kind == PacketKind.ACK:
            return airtime_us(packet.size_bytes, self.params)
        return strobe_us(packet.size_bytes, self.params, self.period_us)

    def transmit(self, sender: NodeId, packet: Packet, t: SimTime, attempt: int = 1) -> RadioEvent:
        """Occupy the medium with a frame (or strobe) starting now."""
        self._prune(t)
        frame = RadioEvent(
            self._next_frame, sender, packet, t, t + self.duration_us(packet),
            copy_us=airtime_us(packet.size_bytes, self.params), attempt=attempt
        )
        self._next_frame += 1
        self._on_air.append(frame)
        return frame

    def truncate(self, frame: RadioEvent, t: SimTime):
        """Stop a strobe early, once its addressee has taken a copy."""
        if frame.start <= t < frame.end:
            frame.end = t

    def next_check(self, node: NodeId, t: SimTime) -> SimTime:
        """Start of node's first channel check at or after t."""
        if not self.duty_cycled:
            return t
        phase = self.check_phases.get(node, 0)
        if t <= phase:
            return phase
        return phase + -(-(t - phase) // self.period_us) * self.period_us

    def reception_window(self, frame: RadioEvent, receiver: NodeId) -> Window:
        """Copy the receiver takes: the one starting at its first check after the strobe began."""
        if frame.packet.kind == PacketKind.ACK:
            return frame.start, frame.start + frame.copy_us
        start = self.next_check(receiver, frame.start)
        return start, start + frame.copy_us

    def receivers(self, frame: RadioEvent) -> Tuple[NodeId, ...]:
        """Nodes whose reception of the frame matters: all neighbors for broadcast, else the addressee."""
        packet = frame.packet
        if packet.is_broadcast:
            return self.comm[frame.sender]
        if self.in_comm_range(frame.sender, packet.destination):
            return (packet.destination,)
        return ()

    def overlapping(self, frame: RadioEvent, receiver: NodeId, window: Optional[Window] = None) -> List[RadioEvent]:
        """Frames (the given one included) that reach receiver during window, by default the whole frame."""
        window = window or (frame.start, frame.end)
        reach = self.interferers[receiver]
        return [
            f for f in self._on_air
            if f.overlaps_window(window) and (f is frame or f.sender == receiver or f.sender in reach)
        ]

    def resolve_collisions(
        self,
        overlapping: List[RadioEvent],
        receiver: NodeId,
        rng: random.Random
    ) -> Optional[bool]:
        """
        Outcome of one reception at receiver.

        None when nothing overlaps, False on collision, otherwise a Bernoulli
        draw against base_loss_prob.
        """
        if not overlapping:
            return None
        if len(overlapping) > 1:
            self.collisions += 1
            return False
        return rng.random() >= self.params.base_loss_prob


# ── MAC ──────────────────────────────────────────────────────
class MacLayer:
    """
    FIFO CSMA sender of one node.

    A packet's first attempt starts after a uniform backoff in
    (0, backoff_window]. A busy channel or a missing ACK means congestion: the
    next try waits one slot plus a uniform share of up to three slots, growing
    with the tries already spent on the packet. A slot is the receivers' check
    period (the backoff window without duty cycling). Busy checks are capped
    at csma_max_backoffs per attempt and unicast frames are retransmitted up to
    mac_max_retries times.
    """

    MAX_BACKOFF_SLOTS = 3

    def __init__(self, node_id: NodeId, host, params: RadioParams, rng: random.Random, slot_us: int = 0):
        self.node_id = node_id
        self.host = host
        self.params = params
        self.rng = rng
        self.queue: Deque[Tuple[Packet, SimTime]] = deque()
        self.current: Optional[Packet] = None
        self.transmissions = 0
        self.backoffs = 0
        self.tries = 0
        self.waiting_ack = False
        self._pending: Optional[Event] = None
        self._window_us = max(1, seconds_to_us(params.backoff_window_s))
        self._slot_us = slot_us or self._window_us
        self._ack_wait_us = airtime_us(CONTROL_SIZES[PacketKind.ACK], params)

    @property
    def idle(self) -> bool:
        return self.current is None and not self.queue

    def enqueue(self, packet: Packet, ready_at: SimTime) -> bool:
        if len(self.queue) >= self.params.queue_limit:
            self.host.trace.count("queue_drops")
            self.host.notify_sent(self.node_id, packet, False, 0, "queue")
            return False
        self.queue.append((packet, ready_at))
        self._service()
        return True

    def _service(self):
        while self.current is None and self.queue:
            packet, ready_at = self.queue.popleft()
            self.current = packet
            self.transmissions = 0
            self.tries = 0
            self._attempt(max(self.host.now, ready_at) + self._backoff_us())

    def _backoff_us(self) -> int:
        return 1 + self.rng.randrange(self._window_us)

    def congestion_backoff_us(self) -> int:
        """Wait before the next try once the packet has met congestion."""
        slots = min(max(self.tries, 1), self.MAX_BACKOFF_SLOTS)
        return self._slot_us + self.rng.randrange(slots * self._slot_us)

    def _attempt(self, at: SimTime):
        self.backoffs = 0
        self.waiting_ack = False
        self._pending = self.host.scheduler.schedule(at, EventKind.TX_START, self.node_id)

    def on_tx_start(self):
        if self.current is None:
            return
        t = self.host.now
        if self.host.medium.channel_busy(self.node_id, t):
            self.backoffs += 1
            self.tries += 1
            if self.backoffs > self.params.csma_max_backoffs:
                self.host.trace.count("channel_drops")
                self._finish(False, "channel")
                return
            self._pending = self.host.scheduler.schedule(
                t + self.congestion_backoff_us(), EventKind.TX_START, self.node_id
            )
            return
        self.transmissions += 1
        self.tries += 1
        self._pending = None
        self.host.start_frame(self.node_id, self.current, self.transmissions)

    def on_tx_end(self, frame: RadioEvent):
        if frame.packet is not self.current:
            return
        if frame.packet.is_broadcast:
            self._finish(True, "sent")
            return
        self.waiting_ack = True
        self._pending = self.host.scheduler.schedule(
            frame.end + self._ack_wait_us, EventKind.TIMER_FIRE, self.node_id,
            tag=("mac", "ack_timeout", frame.packet.seq)
        )

    def on_ack(self, ack: Packet):
        if self.current is None or not self.waiting_ack or ack.ack_for != self.current.seq:
            return
        self.host.scheduler.cancel(self._pending)
        self._finish(True, "acked")

    def on_ack_timeout(self, seq: int):
        if self.current is None or not self.waiting_ack or seq != self.current.seq:
            return
        if self.transmissions <= self.params.mac_max_retries:
            self._attempt(self.host.now + self.congestion_backoff_us())
        else:
            self._finish(False, "no_ack")

    def _finish(self, ok: bool, reason: str):
        packet, transmissions = self.current, self.transmissions
        self.current = None
        self.waiting_ack = False
        self._pending = None
        self.host.notify_sent(self.node_id, packet, ok, transmissions, reason)
        self._service()
