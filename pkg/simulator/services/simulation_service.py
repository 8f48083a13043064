"""
One seeded simulation run: wires nodes, medium, MACs and meters to the
scheduler and executes every event up to the end of the scenario.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

from models.core import NodeId, Packet, PacketKind, Role, SimTime, US_PER_SECOND, seconds_to_us
from models.schemas import AttackVariant, ScenarioConfig
from services.attack_service import CopycatAttacker
from services.energy_service import EnergyLedger, RadioMeter
from services.radio_service import MacLayer, Medium, RadioEvent
from services.rpl_service import RplNode
from services.scheduler import Event, EventKind, Scheduler
from services.topology_service import NodeSpec, generate_topology, stream
from services.trace_service import TraceLog

logger = logging.getLogger(__name__)

POWER_BIN_US = 60 * US_PER_SECOND

Snapshot = Tuple[SimTime, Dict[NodeId, Tuple[int, int, int, int]]]


@dataclass
class SimulationResult:
    """Everything a finished run leaves behind"""
    cfg: ScenarioConfig
    nodes: List[NodeSpec]
    trace: TraceLog
    ledgers: Dict[NodeId, EnergyLedger]
    check_phases: Dict[NodeId, int]
    snapshots: List[Snapshot]
    end_us: SimTime
    states: Dict[NodeId, Union[RplNode, CopycatAttacker]] = field(default_factory=dict)
    events_executed: int = 0
    event_log: Optional[list] = None

    @property
    def fingerprint(self) -> str:
        return self.trace.fingerprint()

    def legitimate_sensors(self) -> List[NodeId]:
        return [n.id for n in self.nodes if n.role == Role.SENSOR]


class Simulation:
    """Run context shared by every node of one scenario"""

    def __init__(self, cfg: ScenarioConfig, nodes: Optional[Sequence[NodeSpec]] = None, keep_event_log: bool = False):
        self.cfg = cfg
        self.specs = list(nodes) if nodes is not None else generate_topology(cfg)
        self.end = seconds_to_us(cfg.sim_seconds)
        self.scheduler = Scheduler(self.end, keep_log=keep_event_log)
        self.trace = TraceLog()

        ordered = sorted(self.specs, key=lambda s: s.id)
        self.meters: Dict[NodeId, RadioMeter] = {
            spec.id: RadioMeter(spec.id, cfg.duty, stream(cfg.seed, spec.id, "duty")) for spec in ordered
        }
        period_us = next(iter(self.meters.values())).period_us if self.meters else 0
        self.medium = Medium(self.specs, cfg.radio, period_us, {i: m.phase_us for i, m in self.meters.items()})

        self.macs: Dict[NodeId, MacLayer] = {}
        self.nodes: Dict[NodeId, Union[RplNode, CopycatAttacker]] = {}
        self._loss_rng = {}
        self._strobe_ends: Dict[int, Tuple[RadioEvent, Optional[Event]]] = {}
        for spec in ordered:
            self.macs[spec.id] = MacLayer(spec.id, self, cfg.radio, stream(cfg.seed, spec.id, "mac"), period_us)
            self._loss_rng[spec.id] = stream(cfg.seed, spec.id, "radio")
            if spec.role == Role.ATTACKER:
                self.nodes[spec.id] = CopycatAttacker(spec.id, cfg, self)
            else:
                self.nodes[spec.id] = RplNode(spec.id, spec.role, cfg, self, stream(cfg.seed, spec.id, "trickle"))
        self.roles = {s.id: s.role for s in self.specs}
        self.snapshots: List[Snapshot] = []
        self._app_phase: Dict[NodeId, int] = {}

    # ── context offered to nodes ──
    @property
    def now(self) -> SimTime:
        return self.scheduler.now

    def send(self, node_id: NodeId, packet: Packet, ready_at: SimTime):
        self.macs[node_id].enqueue(packet, max(ready_at, self.now))

    def cpu(self, node_id: NodeId) -> SimTime:
        start, end = self.meters[node_id].cpu_task(self.now)
        if end > start:
            self.trace.record("cpu", start, node_id, end)
        return end

    def set_timer(self, node_id: NodeId, name: str, at: SimTime, arg=None) -> Optional[Event]:
        return self.scheduler.schedule(at, EventKind.TIMER_FIRE, node_id, tag=("node", name, arg))

    def cancel(self, handle: Optional[Event]):
        self.scheduler.cancel(handle)

    def in_range(self, a: NodeId, b: NodeId) -> bool:
        return b in self.meters and self.medium.in_comm_range(a, b)

    # ── MAC host ──
    def start_frame(self, sender: NodeId, packet: Packet, attempt: int) -> RadioEvent:
        """
        Put a frame on air and schedule its end and each receiver's reception.

        Listeners in comm range stay in RX for the whole strobe.
        """
        t = self.now
        frame = self.medium.transmit(sender, packet, t, attempt)
        self.meters[sender].begin_tx(t)
        for neighbor in self.medium.comm[sender]:
            self.meters[neighbor].begin_rx(t)
        kind = packet.kind.value
        self.trace.count(f"tx_{kind}")
        if packet.kind == PacketKind.DATA and attempt > 1:
            self.trace.count("data_retransmissions")
        handle = self.scheduler.schedule(frame.end, EventKind.TX_END, sender, payload=frame)
        self._strobe_ends[frame.frame_id] = (frame, handle)
        for receiver in self.medium.receivers(frame):
            _, copy_end = self.medium.reception_window(frame, receiver)
            self.scheduler.schedule(copy_end, EventKind.RX_DELIVER, receiver, payload=frame)
        return frame

    def notify_sent(self, node_id: NodeId, packet: Packet, ok: bool, transmissions: int, reason: str):
        self.nodes[node_id].on_send_done(packet, ok, transmissions, reason)

    def _trace_tx(self, frame: RadioEvent):
        packet = frame.packet
        self.trace.record(
            "tx", frame.start, frame.sender, frame.end, packet.kind.value,
            packet.claimed_source, packet.destination, frame.attempt
        )

    # ── event handlers ──
    def _end_frame(self, frame: RadioEvent):
        t = self.now
        sender = frame.sender
        self._strobe_ends.pop(frame.frame_id, None)
        self.meters[sender].end_tx(t)
        for neighbor in self.medium.comm[sender]:
            self.meters[neighbor].end_rx(t)
        self._trace_tx(frame)
        if frame.packet.kind != PacketKind.ACK:
            self.macs[sender].on_tx_end(frame)

    def _stop_strobe(self, frame: RadioEvent):
        """The addressee took a copy: the sender stops repeating it now."""
        entry = self._strobe_ends.get(frame.frame_id)
        if entry is None or frame.end <= self.now:
            return
        self.scheduler.cancel(entry[1])
        self.medium.truncate(frame, self.now)
        self._end_frame(frame)

    def _receive(self, receiver: NodeId, frame: RadioEvent):
        """End of the copy receiver listened to: resolve it, then hand it up."""
        window = self.medium.reception_window(frame, receiver)
        outcome = self.medium.resolve_collisions(
            self.medium.overlapping(frame, receiver, window), receiver, self._loss_rng[receiver]
        )
        if outcome is False:
            self.trace.count("rx_failures")
        if outcome:
            self._deliver(receiver, frame)

    def _deliver(self, receiver: NodeId, frame: RadioEvent):
        packet = frame.packet
        if packet.kind == PacketKind.ACK:
            if packet.destination == receiver:
                self.macs[receiver].on_ack(packet)
            return
        node = self.nodes[receiver]
        attacker = self.roles[receiver] == Role.ATTACKER
        if not packet.is_broadcast:
            if packet.destination != receiver:
                return
            if not attacker and not self.meters[receiver].transmitting:
                self._stop_strobe(frame)
                self._send_ack(receiver, packet)
        if packet.kind == PacketKind.DIO and not attacker:
            self.trace.record("dio_rx", self.now, receiver, packet.claimed_source, packet.payload_rank)
        node.receive(packet)

    def _send_ack(self, node_id: NodeId, packet: Packet):
        ack = Packet(
            kind=PacketKind.ACK, true_source=node_id, claimed_source=node_id,
            destination=packet.true_source, size_bytes=5, created_at=self.now, seq=0, ack_for=packet.seq
        )
        self.start_frame(node_id, ack, 1)

    def _schedule_app(self, node_id: NodeId, k: int):
        interval_us = seconds_to_us(self.cfg.data_interval_s)
        self.scheduler.schedule(k * interval_us - self._app_phase[node_id], EventKind.APP_GENERATE, node_id, tag=k)

    def _generate(self, node_id: NodeId, k: int):
        self.nodes[node_id].generate_data()
        interval_us = seconds_to_us(self.cfg.data_interval_s)
        if (k + 1) * interval_us <= self.end:
            self._schedule_app(node_id, k + 1)

    def _sample(self):
        t = self.now
        for meter in self.meters.values():
            meter.accrue(t)
        self.snapshots.append((t, {i: m.ledger.snapshot() for i, m in self.meters.items()}))
        self.scheduler.schedule(t + POWER_BIN_US, EventKind.SAMPLE_ENERGY, -1)

    def _dispatch(self, event: Event):
        kind = event.kind
        if kind == EventKind.TX_START:
            self.macs[event.target].on_tx_start()
        elif kind == EventKind.TX_END:
            self._end_frame(event.payload)
        elif kind == EventKind.RX_DELIVER:
            self._receive(event.target, event.payload)
        elif kind == EventKind.TIMER_FIRE:
            owner, name, arg = event.tag
            if owner == "mac":
                self.macs[event.target].on_ack_timeout(arg)
            else:
                self.nodes[event.target].on_timer(name, arg)
        elif kind == EventKind.APP_GENERATE:
            self._generate(event.target, event.tag)
        elif kind == EventKind.ATTACKER_ACTIVATE:
            self.nodes[event.target].activate()
        elif kind == EventKind.SAMPLE_ENERGY:
            self._sample()

    # ── run ──
    def _boot(self):
        cfg = self.cfg
        jitter_us = seconds_to_us(cfg.data_start_jitter_s)
        for node_id in sorted(self.nodes):
            role = self.roles[node_id]
            if role == Role.ATTACKER:
                if cfg.attack_variant != AttackVariant.NONE:
                    self.scheduler.schedule(
                        seconds_to_us(cfg.attacker_activation_s), EventKind.ATTACKER_ACTIVATE, node_id
                    )
                continue
            self.nodes[node_id].boot()
            if role == Role.SENSOR:
                rng = stream(cfg.seed, node_id, "app")
                self._app_phase[node_id] = rng.randrange(jitter_us) if jitter_us > 0 else 0
                if seconds_to_us(cfg.data_interval_s) <= self.end:
                    self._schedule_app(node_id, 1)
        self.scheduler.schedule(POWER_BIN_US, EventKind.SAMPLE_ENERGY, -1)

    def run(self) -> SimulationResult:
        logger.debug(f"Seed {self.cfg.seed}: {len(self.specs)} nodes, {self.cfg.sim_seconds} s")
        if self.end > 0:
            self._boot()
            self.scheduler.run(self._dispatch)
            # strobes still on air at the end are traced with their planned end
            for frame, _ in sorted(self._strobe_ends.values(), key=lambda e: e[0].frame_id):
                self._trace_tx(frame)
            self._strobe_ends.clear()
            for meter in self.meters.values():
                meter.accrue(self.end)
            if not self.snapshots or self.snapshots[-1][0] < self.end:
                self.snapshots.append((self.end, {i: m.ledger.snapshot() for i, m in self.meters.items()}))

        for node_id, meter in self.meters.items():
            if meter.ledger.total_us != self.end:
                raise RuntimeError(
                    f"Node {node_id}: ledger holds {meter.ledger.total_us} us of {self.end} us"
                )

        return SimulationResult(
            cfg=self.cfg,
            nodes=sorted(self.specs, key=lambda s: s.id),
            trace=self.trace,
            ledgers={i: m.ledger for i, m in self.meters.items()},
            check_phases={i: m.phase_us for i, m in self.meters.items()},
            snapshots=self.snapshots,
            end_us=self.end,
            states=self.nodes,
            events_executed=self.scheduler.executed,
            event_log=self.scheduler.log,
        )


def run(cfg: ScenarioConfig, nodes: Optional[Sequence[NodeSpec]] = None, keep_event_log: bool = False) -> SimulationResult:
    """Execute one scenario to completion."""
    return Simulation(cfg, nodes, keep_event_log).run()
