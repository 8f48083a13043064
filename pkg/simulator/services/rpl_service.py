"""
RPL node: DODAG joining, trickle-paced DIOs, parent selection under MRHOF or
OF0, link probing, DAO registration and upward DATA forwarding.

A node talks to the rest of the run through a context object that offers
now, cfg, trace, send(), cpu(), set_timer(), cancel() and in_range().
"""
import logging
import math
import random
from dataclasses import dataclass, replace
from typing import Dict, Optional, Set, Tuple

from models.core import (
    BROADCAST, CONTROL_SIZES, INFINITE_RANK, MIN_HOP_RANK_INCREASE, ROOT_RANK,
    InvalidRankError, NodeId, Packet, PacketKind, Role, SimTime, seconds_to_us
)
from models.schemas import ObjectiveFunction, ScenarioConfig

logger = logging.getLogger(__name__)


def compute_rank(of: ObjectiveFunction, parent_rank: int, etx: float = 1.0) -> int:
    """
    Rank a node would take through a parent advertising parent_rank.

    MRHOF adds round(etx * 256), OF0 adds one hop (256). A result past the
    largest rank is reported as INFINITE_RANK, i.e. unusable.
    """
    if parent_rank < ROOT_RANK:
        raise InvalidRankError(f"Parent rank {parent_rank} is below the root rank")
    if etx < 1:
        raise ValueError(f"ETX must be >= 1, got {etx}")
    if of == ObjectiveFunction.MRHOF:
        step = math.floor(etx * MIN_HOP_RANK_INCREASE + 0.5)
    else:
        step = MIN_HOP_RANK_INCREASE
    rank = parent_rank + step
    return INFINITE_RANK if rank >= INFINITE_RANK else rank


# ── Trickle ──────────────────────────────────────────────────
class TrickleTimer:
    """
    RFC 6206 trickle timer in microseconds.

    Each interval I begins with c = 0 and a transmission point drawn in
    [I/2, I). At that point the node transmits iff c < k; at the end of the
    interval I doubles up to imax.
    """

    def __init__(self, imin_us: int, imax_us: int, k: int, rng: random.Random):
        self.imin = imin_us
        self.imax = imax_us
        self.k = k
        self.rng = rng
        self.interval = imin_us
        self.counter = 0
        self.started_at: SimTime = 0
        self.fire_at: SimTime = 0
        self.end_at: SimTime = 0
        self.running = False

    def _begin(self, now: SimTime):
        self.counter = 0
        half = self.interval // 2
        self.started_at = now
        self.fire_at = now + half + self.rng.randrange(self.interval - half)
        self.end_at = now + self.interval

    def start(self, now: SimTime):
        self.running = True
        self.interval = self.imin
        self._begin(now)

    def stop(self):
        self.running = False

    def hear_consistent(self):
        self.counter += 1

    def reset(self, now: SimTime) -> bool:
        """Inconsistency: back to imin. No-op when already at imin or stopped."""
        if not self.running or self.interval <= self.imin:
            return False
        self.interval = self.imin
        self._begin(now)
        return True

    def should_transmit(self) -> bool:
        return self.counter < self.k

    def expire(self, now: SimTime):
        self.interval = min(2 * self.interval, self.imax)
        self._begin(now)


# ── Neighbor bookkeeping ─────────────────────────────────────
@dataclass
class NeighborEntry:
    """What a node believes about one claimed neighbor identity"""
    neighbor: NodeId
    last_rank: int
    etx: float = 1.0
    probe_verified: bool = False
    dio_count: int = 0
    suspect: bool = False
    heard_at: SimTime = 0


@dataclass
class ProbeRound:
    neighbor: NodeId
    sent: int = 0
    done: int = 0
    acked: int = 0
    transmissions: int = 0


class RplNode:
    """Per-node RPL state and handlers for the root and legitimate sensors"""

    def __init__(self, node_id: NodeId, role: Role, cfg: ScenarioConfig, ctx, trickle_rng: random.Random):
        if role == Role.ATTACKER:
            raise ValueError(f"Node {node_id}: attackers are driven by CopycatAttacker")
        self.id = node_id
        self.role = role
        self.cfg = cfg
        self.ctx = ctx
        self.of = cfg.objective_function
        self.params = cfg.rpl

        self.rank = INFINITE_RANK
        self.parent: Optional[NodeId] = None
        self.neighbors: Dict[NodeId, NeighborEntry] = {}
        self.rejected: Dict[NodeId, int] = {}  # failed probe -> rank it advertised
        self.probes: Dict[NodeId, ProbeRound] = {}
        self.trickle = TrickleTimer(
            seconds_to_us(cfg.dio_imin_s), seconds_to_us(cfg.dio_imax_s),
            self.params.redundancy_k, trickle_rng
        )

        self.ceiling = INFINITE_RANK
        self.prev_ceiling = INFINITE_RANK
        self.detached_at: Optional[SimTime] = None
        self.holddown_until: SimTime = 0

        self.dao_seq = 0
        self.dao_attempts = 0
        self.dao_pending = False
        self.downward_routes: Dict[NodeId, NodeId] = {}

        self.app_seq = 0
        self.seen: Set[Tuple[NodeId, int]] = set()
        self._tx_seq = 0
        self._timers: Dict[Tuple[str, Optional[int]], object] = {}

    @property
    def is_root(self) -> bool:
        return self.role == Role.ROOT

    @property
    def joined(self) -> bool:
        return self.is_root or self.parent is not None

    # ── plumbing ──
    def _packet(self, kind: PacketKind, destination: NodeId, **fields) -> Packet:
        self._tx_seq += 1
        size = self.cfg.data_size_bytes if kind == PacketKind.DATA else CONTROL_SIZES[kind]
        return Packet(
            kind=kind, true_source=self.id, claimed_source=self.id, destination=destination,
            size_bytes=size, created_at=fields.pop("created_at", self.ctx.now), seq=self._tx_seq, **fields
        )

    def _send(self, packet: Packet, extra_delay_us: int = 0):
        done = self.ctx.cpu(self.id)
        self.ctx.send(self.id, packet, done + extra_delay_us)

    def _set_timer(self, name: str, at: SimTime, arg: Optional[int] = None):
        self._cancel_timer(name, arg)
        handle = self.ctx.set_timer(self.id, name, at, arg)
        if handle is not None:
            self._timers[(name, arg)] = handle

    def _cancel_timer(self, name: str, arg: Optional[int] = None):
        handle = self._timers.pop((name, arg), None)
        if handle is not None:
            self.ctx.cancel(handle)

    def on_timer(self, name: str, arg: Optional[int] = None):
        self._timers.pop((name, arg), None)
        if name == "trickle_fire":
            self.trickle_fire(self.ctx.now)
        elif name == "trickle_end":
            self.trickle_expire(self.ctx.now)
        elif name == "dis":
            self._solicit()
        elif name == "dao_timeout":
            self._dao_timeout()
        elif name == "probe":
            self._send_probe(arg)
        else:
            raise ValueError(f"Node {self.id}: unknown timer {name}")

    # ── lifecycle ──
    def boot(self):
        now = self.ctx.now
        if self.is_root:
            self.rank = ROOT_RANK
            self.ceiling = ROOT_RANK
            self.trickle.start(now)
            self._arm_trickle()
        else:
            self._set_timer("dis", now + seconds_to_us(self.params.dis_delay_s))

    def receive(self, packet: Packet):
        handlers = {
            PacketKind.DIO: self.on_dio,
            PacketKind.DIS: self.on_dis,
            PacketKind.DAO: self.on_dao,
            PacketKind.DAO_ACK: self.on_dao_ack,
            PacketKind.DATA: self.forward_data,
            PacketKind.PROBE: self.on_probe,
        }
        handler = handlers.get(packet.kind)
        if handler is not None:
            handler(packet)

    # ── trickle ──
    def _arm_trickle(self):
        now = self.ctx.now
        self.ctx.trace.record("trickle", now, self.id, self.trickle.interval)
        self._set_timer("trickle_fire", self.trickle.fire_at)
        self._set_timer("trickle_end", self.trickle.end_at)

    def _inconsistent(self):
        if self.trickle.reset(self.ctx.now):
            self._arm_trickle()

    def trickle_fire(self, t: SimTime):
        """Transmission point of the current interval."""
        if not self.trickle.running:
            return
        self.ctx.cpu(self.id)
        if self.trickle.should_transmit():
            self.ctx.trace.record("dio", t, self.id, self.trickle.interval)
            self._send(self._packet(PacketKind.DIO, BROADCAST, payload_rank=self.rank))
        else:
            self.ctx.trace.record("suppress", t, self.id, self.trickle.interval)
            self.ctx.trace.count("dio_suppressed")

    def trickle_expire(self, t: SimTime):
        """End of the current interval: double and start the next."""
        if not self.trickle.running:
            return
        self.trickle.expire(t)
        self._arm_trickle()

    # ── DIO / DIS ──
    def on_dio(self, dio: Packet):
        now = self.ctx.now
        self.ctx.cpu(self.id)
        rank = dio.payload_rank
        if rank is None or rank < ROOT_RANK:
            self.ctx.trace.count("invalid_dio")
            self.ctx.trace.record("drop", now, self.id, "invalid_rank", PacketKind.DIO.value)
            return
        sender = dio.claimed_source
        if sender == self.id:
            return
        if self.is_root:
            self.trickle.hear_consistent()
            return
        if rank >= INFINITE_RANK:
            self._withdraw(sender)
            return

        if sender in self.rejected:
            if self.rejected[sender] == rank:
                self.trickle.hear_consistent()
                self._reverify(sender, rank)
                return
            del self.rejected[sender]

        entry = self.neighbors.get(sender)
        if entry is None:
            entry = NeighborEntry(neighbor=sender, last_rank=rank)
            self.neighbors[sender] = entry
            self._inconsistent()
        elif entry.last_rank != rank:
            entry.last_rank = rank
            entry.suspect = False
            self._inconsistent()
        else:
            self.trickle.hear_consistent()
        entry.dio_count += 1
        entry.heard_at = now

        if self.of == ObjectiveFunction.MRHOF and not entry.probe_verified and not entry.suspect:
            self.probe_candidate(sender)
        self.select_preferred_parent()

    def _reverify(self, sender: NodeId, rank: int):
        """
        DIO from an identity whose probes went unanswered. It stays out of the
        candidate set, but each DIO still costs a parent re-evaluation and,
        once the previous round is over, a fresh probe round.
        """
        if sender not in self.neighbors:
            self.neighbors[sender] = NeighborEntry(neighbor=sender, last_rank=rank, heard_at=self.ctx.now)
        self.probe_candidate(sender)
        self.select_preferred_parent()

    def _withdraw(self, sender: NodeId):
        """Neighbor advertised an infinite rank."""
        self.rejected.pop(sender, None)
        entry = self.neighbors.pop(sender, None)
        if entry is not None and sender == self.parent:
            self._inconsistent()
            self.select_preferred_parent()

    def on_dis(self, dis: Packet):
        self.ctx.cpu(self.id)
        if not self.joined:
            return
        if dis.is_broadcast:
            self._inconsistent()
        else:
            self._send(self._packet(PacketKind.DIO, dis.claimed_source, payload_rank=self.rank))

    def _solicit(self):
        if self.joined:
            return
        self._send(self._packet(PacketKind.DIS, BROADCAST))
        self._set_timer("dis", self.ctx.now + seconds_to_us(self.params.dis_delay_s))

    # ── parent selection ──
    def _admissible(self, entry: NeighborEntry, computed: int) -> bool:
        if computed >= INFINITE_RANK:
            return False
        if self.parent is not None:
            return computed <= self.ceiling
        if self.detached_at is not None:
            if entry.heard_at < self.detached_at:
                return False
            if self.ctx.now < self.holddown_until and entry.last_rank >= self.prev_ceiling:
                return False
        return True

    def _eligible(self, entry: NeighborEntry) -> Optional[int]:
        """Computed rank through entry, or None if it cannot be a parent."""
        if entry.suspect or entry.last_rank >= INFINITE_RANK:
            return None
        if self.of == ObjectiveFunction.MRHOF and not entry.probe_verified:
            return None
        computed = compute_rank(self.of, entry.last_rank, entry.etx)
        return computed if self._admissible(entry, computed) else None

    def select_preferred_parent(self):
        """Re-evaluate the objective function over the candidate set."""
        if self.is_root:
            return
        self.ctx.cpu(self.id)
        candidates = []
        for entry in self.neighbors.values():
            computed = self._eligible(entry)
            if computed is not None:
                candidates.append((computed, entry))
        if not candidates:
            if self.parent is not None:
                self._detach()
            return

        if self.of == ObjectiveFunction.MRHOF:
            best = min(candidates, key=lambda c: (c[0], c[1].neighbor))
        else:
            best = min(candidates, key=lambda c: (c[1].last_rank, c[1].neighbor))
        current = next((c for c in candidates if c[1].neighbor == self.parent), None)
        if current is not None and best is not current:
            if self.of == ObjectiveFunction.MRHOF:
                if best[0] + self.params.parent_switch_threshold > current[0]:
                    best = current
            elif best[1].last_rank >= current[1].last_rank:
                best = current
        self._adopt(best[1], best[0])

    def _adopt(self, entry: NeighborEntry, rank: int):
        changed = entry.neighbor != self.parent
        if not changed and rank == self.rank:
            return
        now = self.ctx.now
        was_joined = self.parent is not None
        self.parent = entry.neighbor
        self.rank = rank
        if was_joined:
            self.ceiling = min(self.ceiling, rank)
        else:
            self.ceiling = rank
            self.detached_at = None
            self._cancel_timer("dis")

        out_of_range = not self.ctx.in_range(self.id, entry.neighbor)
        self.ctx.trace.record("parent", now, self.id, entry.neighbor, rank, entry.last_rank, out_of_range)
        if out_of_range:
            self.ctx.trace.count("out_of_range_adoptions")
        if not changed:
            return

        logger.debug(f"Node {self.id}: parent -> {entry.neighbor} (rank {rank}) at {now} us")
        if self.trickle.running:
            self._inconsistent()
        else:
            self.trickle.start(now)
            self._arm_trickle()
        self.send_dao()

    def _detach(self):
        """Lost every eligible parent: poison, solicit, and hold down."""
        now = self.ctx.now
        logger.debug(f"Node {self.id}: detached from {self.parent} at {now} us")
        self.prev_ceiling = self.ceiling
        self.parent = None
        self.rank = INFINITE_RANK
        self.detached_at = now
        self.holddown_until = now + seconds_to_us(self.params.rejoin_holddown_s)
        self.dao_pending = False
        self._cancel_timer("dao_timeout")
        self.ctx.trace.record("parent", now, self.id, -1, INFINITE_RANK, -1, False)
        self.ctx.trace.count("detaches")
        self._send(self._packet(PacketKind.DIO, BROADCAST, payload_rank=INFINITE_RANK))
        self._inconsistent()
        self._set_timer("dis", now + seconds_to_us(self.params.dis_delay_s))

    # ── probing ──
    def probe_candidate(self, candidate: NodeId):
        """Start a probe round toward a claimed neighbor."""
        if candidate in self.probes or candidate not in self.neighbors:
            return
        self.probes[candidate] = ProbeRound(candidate)
        self.ctx.trace.count("probe_rounds")
        self._send_probe(candidate)

    def _send_probe(self, candidate: NodeId):
        round_ = self.probes.get(candidate)
        if round_ is None:
            return
        round_.sent += 1
        self._send(self._packet(PacketKind.PROBE, candidate))
        if round_.sent < self.params.probe_count:
            self._set_timer("probe", self.ctx.now + seconds_to_us(self.params.probe_spacing_s), candidate)

    def on_send_done(self, packet: Packet, ok: bool, transmissions: int, reason: str):
        """MAC outcome of a packet this node queued."""
        if packet.kind == PacketKind.PROBE:
            round_ = self.probes.get(packet.destination)
            if round_ is None:
                return
            round_.done += 1
            round_.transmissions += transmissions
            if ok:
                round_.acked += 1
            if round_.done >= self.params.probe_count:
                self._finish_probe(round_)
        elif not ok:
            if packet.kind == PacketKind.DATA:
                self.ctx.trace.record("drop", self.ctx.now, self.id, reason, packet.kind.value)
            self.ctx.trace.count(f"mac_fail_{packet.kind.value}")

    def _finish_probe(self, round_: ProbeRound):
        now = self.ctx.now
        self.probes.pop(round_.neighbor, None)
        entry = self.neighbors.get(round_.neighbor)
        if entry is None:
            return
        if round_.acked:
            entry.probe_verified = True
            entry.etx = max(1.0, round_.transmissions / round_.acked)
            self.rejected.pop(entry.neighbor, None)
            self.ctx.trace.record("probe", now, self.id, entry.neighbor, True, entry.etx)
        else:
            del self.neighbors[entry.neighbor]
            self.rejected[entry.neighbor] = entry.last_rank
            self.ctx.trace.record("probe", now, self.id, entry.neighbor, False, 0.0)
            logger.debug(f"Node {self.id}: probe of {entry.neighbor} failed, candidate discarded")
        self.select_preferred_parent()

    def on_probe(self, probe: Packet):
        self.ctx.cpu(self.id)

    # ── DAO ──
    def send_dao(self):
        """Register with the root through the current parent."""
        if self.is_root or self.parent is None:
            return
        self.dao_seq += 1
        self.dao_attempts = 0
        self._transmit_dao()

    def _transmit_dao(self):
        now = self.ctx.now
        self.dao_pending = True
        self.ctx.trace.record("dao", now, self.id, "sent", self.parent)
        self._send(self._packet(
            PacketKind.DAO, self.parent, origin=self.id, app_seq=self.dao_seq, route=(self.id,)
        ))
        self._set_timer("dao_timeout", now + seconds_to_us(self.params.dao_timeout_s))

    def _dao_timeout(self):
        if not self.dao_pending or self.parent is None:
            return
        self.dao_attempts += 1
        if self.dao_attempts <= self.params.dao_retries:
            self._transmit_dao()
            return
        self.dao_pending = False
        entry = self.neighbors.get(self.parent)
        self.ctx.trace.record("dao", self.ctx.now, self.id, "suspect", self.parent)
        self.ctx.trace.count("dao_suspects")
        if entry is not None:
            entry.suspect = True
            entry.probe_verified = False
        self.select_preferred_parent()

    def on_dao(self, dao: Packet):
        self.ctx.cpu(self.id)
        if self.is_root:
            last_hop = dao.route[-1]
            self.downward_routes[dao.origin] = last_hop
            back = tuple(reversed(dao.route))
            self._send(self._packet(
                PacketKind.DAO_ACK, back[0], origin=dao.origin, app_seq=dao.app_seq, route=back
            ))
            return
        if self.parent is None or self.id in dao.route:
            self.ctx.trace.record("drop", self.ctx.now, self.id, "no_route", PacketKind.DAO.value)
            return
        self._send(self._packet(
            PacketKind.DAO, self.parent, origin=dao.origin, app_seq=dao.app_seq, route=dao.route + (self.id,)
        ))

    def on_dao_ack(self, ack: Packet):
        self.ctx.cpu(self.id)
        if ack.origin == self.id:
            if self.dao_pending and ack.app_seq == self.dao_seq:
                self.dao_pending = False
                self._cancel_timer("dao_timeout")
                self.ctx.trace.record("dao", self.ctx.now, self.id, "acked", self.parent)
            return
        remaining = ack.route[1:]
        if not remaining:
            return
        self._send(self._packet(
            PacketKind.DAO_ACK, remaining[0], origin=ack.origin, app_seq=ack.app_seq, route=remaining
        ))

    # ── DATA ──
    def generate_data(self):
        """Create one application packet and push it toward the root."""
        now = self.ctx.now
        self.app_seq += 1
        self.ctx.trace.record("gen", now, self.id, self.app_seq)
        self.ctx.trace.count("generated")
        self.seen.add((self.id, self.app_seq))
        if self.parent is None:
            self.ctx.trace.record("drop", now, self.id, "no_route", PacketKind.DATA.value)
            return
        self._send(self._packet(PacketKind.DATA, self.parent, origin=self.id, app_seq=self.app_seq))

    def forward_data(self, packet: Packet):
        """DATA addressed to this node: consume at the root, relay elsewhere."""
        now = self.ctx.now
        self.ctx.cpu(self.id)
        key = (packet.origin, packet.app_seq)
        if key in self.seen:
            self.ctx.trace.record("dup", now, self.id, packet.origin, packet.app_seq)
            return
        self.seen.add(key)
        if self.is_root:
            self.ctx.trace.record("deliver", now, packet.origin, packet.app_seq, packet.created_at)
            self.ctx.trace.count("delivered")
            self.ctx.trace.delay_total_us += now - packet.created_at
            return
        if self.parent is None:
            self.ctx.trace.record("drop", now, self.id, "no_route", PacketKind.DATA.value)
            return
        relay = replace(
            packet, true_source=self.id, claimed_source=self.id, destination=self.parent,
            seq=self._next_relay_seq()
        )
        self._send(relay, seconds_to_us(self.cfg.radio.per_hop_latency_s))

    def _next_relay_seq(self) -> int:
        self._tx_seq += 1
        return self._tx_seq
