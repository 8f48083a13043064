"""
Copycat attacker: keeps the first DIO it overhears after activation and
replays it on a fixed timer, under its own identity or the original sender's.

The attacker takes no other part in routing. It never selects a parent,
never answers DIS, DAO or PROBE, never forwards DATA and never ACKs.
"""
import logging
from dataclasses import replace
from typing import Optional

from models.core import BROADCAST, INFINITE_RANK, ROOT_RANK, NodeId, Packet, PacketKind, SimTime, seconds_to_us
from models.schemas import AttackVariant, ScenarioConfig

logger = logging.getLogger(__name__)


class CopycatAttacker:
    """Attacker node; stays silent in scenarios without attack"""

    def __init__(self, node_id: NodeId, cfg: ScenarioConfig, ctx):
        self.id = node_id
        self.ctx = ctx
        self.variant = cfg.attack_variant
        self.replay_interval_us = seconds_to_us(cfg.replay_interval_s)
        self.active_since: SimTime = seconds_to_us(cfg.attacker_activation_s)
        self.captured_dio: Optional[Packet] = None
        self.captured_at: Optional[SimTime] = None
        self.replays = 0
        self._seq = 0
        self._timer = None

    @property
    def active(self) -> bool:
        return self.ctx.now >= self.active_since

    def activate(self):
        self.ctx.trace.record("activate", self.ctx.now, self.id)

    def receive(self, packet: Packet):
        if packet.kind == PacketKind.DIO:
            self.on_dio(packet)
        else:
            self.ignore(packet)

    def on_dio(self, dio: Packet):
        """Store the first usable DIO heard after activation and arm the replay timer."""
        now = self.ctx.now
        if self.variant == AttackVariant.NONE or now < self.active_since:
            return
        self.ctx.cpu(self.id)
        if self.captured_dio is not None:
            return
        if dio.payload_rank is None or not ROOT_RANK <= dio.payload_rank < INFINITE_RANK:
            return
        self.captured_dio = replace(dio)
        self.captured_at = now
        self.ctx.trace.record("capture", now, self.id, dio.claimed_source, dio.payload_rank)
        logger.debug(f"Attacker {self.id}: captured DIO of {dio.claimed_source} (rank {dio.payload_rank}) at {now} us")
        self._timer = self.ctx.set_timer(self.id, "replay", now + self.replay_interval_us)

    def replay_packet(self) -> Packet:
        """Copy of the captured DIO as it goes on air."""
        captured = self.captured_dio
        claimed = self.id if self.variant == AttackVariant.NON_SPOOFED else captured.claimed_source
        self._seq += 1
        return Packet(
            kind=PacketKind.DIO,
            true_source=self.id,
            claimed_source=claimed,
            destination=BROADCAST,
            size_bytes=captured.size_bytes,
            created_at=self.ctx.now,
            seq=self._seq,
            payload_rank=captured.payload_rank,
        )

    def replay_fire(self, t: SimTime):
        """Multicast the captured DIO and rearm exactly one interval later."""
        if self.captured_dio is None:
            return
        done = self.ctx.cpu(self.id)
        self.ctx.send(self.id, self.replay_packet(), done)
        self.replays += 1
        self.ctx.trace.record("replay", t, self.id)
        self.ctx.trace.count("replays")
        self._timer = self.ctx.set_timer(self.id, "replay", t + self.replay_interval_us)

    def ignore(self, packet: Packet):
        """Anything but a DIO is dropped; reception energy is already paid."""
        self.ctx.trace.count("attacker_ignored")

    def on_timer(self, name: str, arg=None):
        if name == "replay":
            self.replay_fire(self.ctx.now)

    def on_send_done(self, packet: Packet, ok: bool, transmissions: int, reason: str):
        if not ok:
            self.ctx.trace.count("replay_channel_drops")
