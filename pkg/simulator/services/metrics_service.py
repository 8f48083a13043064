"""
Impact metrics of a finished run and the trace-scan oracle that re-derives them.

PDR  = DATA consumed at the root / (generated + DATA MAC retransmissions)
AE2ED = mean (arrival at root - creation) over delivered DATA
APC  = mean average power over legitimate sensors
"""
import logging
from collections import defaultdict
from typing import Dict, List, Optional, Tuple

from models.core import NodeId, PacketKind, US_PER_SECOND, distance, seconds_to_us, us_to_seconds
from models.schemas import EnergyState, MetricsReport, PowerBin
from services.energy_service import EnergyLedger, power_mw, state_power_mw
from services.simulation_service import SimulationResult
from services.topology_service import attacker_exposure

logger = logging.getLogger(__name__)

_STATES = (EnergyState.CPU, EnergyState.LPM, EnergyState.TX, EnergyState.RX)


class OracleDivergenceError(AssertionError):
    """Incremental metrics disagree with the trace scan"""


def _ratio(numerator: int, denominator: int) -> Optional[float]:
    return numerator / denominator if denominator else None


def pdr(result: SimulationResult) -> Optional[float]:
    c = result.trace.counters
    return _ratio(c["delivered"], c["generated"] + c["data_retransmissions"])


def app_pdr(result: SimulationResult) -> Optional[float]:
    c = result.trace.counters
    return _ratio(c["delivered"], c["generated"])


def ae2ed(result: SimulationResult) -> Optional[float]:
    delivered = result.trace.counters["delivered"]
    if not delivered:
        return None
    return result.trace.delay_total_us / delivered / US_PER_SECOND


def _apc(result: SimulationResult, ledgers: Dict[NodeId, EnergyLedger]) -> float:
    sensors = result.legitimate_sensors()
    if not sensors or result.end_us == 0:
        return 0.0
    tos = us_to_seconds(result.end_us)
    return sum(power_mw(ledgers[i], result.cfg.energy, tos) for i in sensors) / len(sensors)


def apc(result: SimulationResult) -> float:
    return _apc(result, result.ledgers)


def power_series(result: SimulationResult) -> Dict[NodeId, List[PowerBin]]:
    """Per-node CPU/LPM/TX/RX power in each sampling bin"""
    profile = result.cfg.energy
    watts = [state_power_mw(profile, s) for s in _STATES]
    series: Dict[NodeId, List[PowerBin]] = {n.id: [] for n in result.nodes}
    prev_t = 0
    prev = {n.id: (0, 0, 0, 0) for n in result.nodes}
    for t, totals in result.snapshots:
        length = t - prev_t
        if length <= 0:
            continue
        for node_id, values in totals.items():
            mw = [w * (v - p) / length for w, v, p in zip(watts, values, prev[node_id])]
            series[node_id].append(PowerBin(
                bin_start_s=us_to_seconds(prev_t), cpu_mw=mw[0], lpm_mw=mw[1], tx_mw=mw[2], rx_mw=mw[3]
            ))
        prev_t, prev = t, totals
    return series


def compute_metrics(result: SimulationResult) -> MetricsReport:
    """Scenario-level report from the run's incremental counters and ledgers"""
    c = result.trace.counters
    cfg = result.cfg
    control = {k.value: c[f"tx_{k.value}"] for k in PacketKind if c[f"tx_{k.value}"]}
    return MetricsReport(
        seed=cfg.seed,
        pdr=pdr(result),
        app_pdr=app_pdr(result),
        ae2ed_s=ae2ed(result),
        apc_mw=apc(result),
        generated=c["generated"],
        delivered=c["delivered"],
        data_attempts=c["generated"] + c["data_retransmissions"],
        out_of_range_adoptions=c["out_of_range_adoptions"],
        replays=c["replays"],
        dio_suppressed=c["dio_suppressed"],
        invalid_dio=c["invalid_dio"],
        control_tx=control,
        exposure=attacker_exposure(result.nodes, cfg.radio.comm_range_m) if cfg.attacked else {},
        per_node_series=power_series(result),
        fingerprint=result.fingerprint,
    )


# ── Oracle ───────────────────────────────────────────────────
def _sweep(
    end: int,
    tx: List[Tuple[int, int]],
    rx: List[Tuple[int, int]],
    cpu: List[Tuple[int, int]],
    phase: int,
    period: int,
    check: int
) -> EnergyLedger:
    """Partition [0, end) by walking every interval boundary in order."""
    ledger = EnergyLedger()
    marks = []
    for slot, intervals in enumerate((tx, rx, cpu)):
        for start, stop in intervals:
            start, stop = min(start, end), min(stop, end)
            if stop > start:
                marks.append((start, slot, 1))
                marks.append((stop, slot, -1))
    marks.sort()

    def checking(a: int, b: int) -> int:
        total = 0
        k = max(0, (a - phase) // period)
        while check and phase + k * period < b:
            ws = phase + k * period
            total += max(0, min(b, ws + check) - max(a, ws))
            k += 1
        return total

    def account(a: int, b: int, active: List[int]):
        if b <= a:
            return
        if active[0]:
            ledger.add(EnergyState.TX, b - a)
        elif active[1]:
            ledger.add(EnergyState.RX, b - a)
        else:
            chk = checking(a, b)
            ledger.add(EnergyState.RX, chk)
            ledger.add(EnergyState.CPU if active[2] else EnergyState.LPM, b - a - chk)

    active = [0, 0, 0]
    prev = 0
    for t, slot, delta in marks:
        account(prev, t, active)
        prev = max(prev, t)
        active[slot] += delta
    account(prev, end, active)
    return ledger


def rebuild_ledgers(result: SimulationResult) -> Dict[NodeId, EnergyLedger]:
    """Energy ledgers recomputed from traced TX and CPU intervals and node positions alone"""
    cfg = result.cfg
    ids = [n.id for n in result.nodes]
    pos = {n.id: n.position for n in result.nodes}
    audience = {
        i: [j for j in ids if j != i and distance(pos[i], pos[j]) <= cfg.radio.comm_range_m]
        for i in ids
    }
    tx = defaultdict(list)
    rx = defaultdict(list)
    cpu = defaultdict(list)
    for record in result.trace.records:
        if record[0] == "tx":
            _, start, sender, stop = record[:4]
            tx[sender].append((start, stop))
            for listener in audience[sender]:
                rx[listener].append((start, stop))
        elif record[0] == "cpu":
            _, start, node, stop = record
            cpu[node].append((start, stop))

    period = max(1, round(US_PER_SECOND / cfg.duty.channel_check_hz))
    check = min(seconds_to_us(cfg.duty.channel_check_s), period)
    return {
        i: _sweep(result.end_us, tx[i], rx[i], cpu[i], result.check_phases[i], period, check)
        for i in ids
    }


def oracle_scan(result: SimulationResult) -> Tuple[Optional[float], Optional[float], float]:
    """PDR, AE2ED and APC from a straight pass over the trace records"""
    generated = retransmissions = delivered = delay_us = 0
    for record in result.trace.records:
        kind = record[0]
        if kind == "gen":
            generated += 1
        elif kind == "deliver":
            delivered += 1
            delay_us += record[1] - record[4]
        elif kind == "tx" and record[4] == PacketKind.DATA.value and record[7] > 1:
            retransmissions += 1
    scan_pdr = _ratio(delivered, generated + retransmissions)
    scan_ae2ed = delay_us / delivered / US_PER_SECOND if delivered else None
    return scan_pdr, scan_ae2ed, _apc(result, rebuild_ledgers(result))


def verify(result: SimulationResult, report: Optional[MetricsReport] = None) -> MetricsReport:
    """
    Check the incremental metrics against the oracle.

    Raises:
        OracleDivergenceError: on any difference, including per-node ledgers
    """
    report = report or compute_metrics(result)
    scanned = oracle_scan(result)
    reported = (report.pdr, report.ae2ed_s, report.apc_mw)
    if scanned != reported:
        raise OracleDivergenceError(f"Seed {report.seed}: oracle {scanned} != incremental {reported}")
    rebuilt = rebuild_ledgers(result)
    for node_id, ledger in result.ledgers.items():
        if rebuilt[node_id].buckets != ledger.buckets:
            raise OracleDivergenceError(
                f"Seed {report.seed}: node {node_id} ledger {ledger.buckets} != sweep {rebuilt[node_id].buckets}"
            )
    return report
