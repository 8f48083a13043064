"""
Energy accounting: per-state time ledgers and the duty-cycled radio meter.

Energy(mJ) = 1000 * V * (I_cpu*t_cpu + I_lpm*t_lpm + I_tx*t_tx + I_rx*t_rx)
Power(mW)  = Energy / total operating time
"""
import logging
import random
from dataclasses import dataclass, field
from typing import Dict, Tuple

from models.core import SimTime, US_PER_SECOND, seconds_to_us, us_to_seconds
from models.schemas import DutyCycleParams, ElectricalProfile, EnergyState

logger = logging.getLogger(__name__)


class UndefinedPowerError(ValueError):
    """Power requested over a zero operating time"""


@dataclass
class EnergyLedger:
    """Accumulated time per state, in whole microseconds"""
    buckets: Dict[EnergyState, int] = field(
        default_factory=lambda: {state: 0 for state in EnergyState}
    )

    def add(self, state: EnergyState, duration_us: int):
        if duration_us < 0:
            raise ValueError(f"Negative duration {duration_us} us for {state.value}")
        self.buckets[state] += duration_us

    @property
    def total_us(self) -> int:
        return sum(self.buckets.values())

    def seconds(self, state: EnergyState) -> float:
        return us_to_seconds(self.buckets[state])

    @property
    def t_cpu(self) -> float:
        return self.seconds(EnergyState.CPU)

    @property
    def t_lpm(self) -> float:
        return self.seconds(EnergyState.LPM)

    @property
    def t_tx(self) -> float:
        return self.seconds(EnergyState.TX)

    @property
    def t_rx(self) -> float:
        return self.seconds(EnergyState.RX)

    def snapshot(self) -> Tuple[int, int, int, int]:
        b = self.buckets
        return (b[EnergyState.CPU], b[EnergyState.LPM], b[EnergyState.TX], b[EnergyState.RX])


def record_state(ledger: EnergyLedger, state: EnergyState, duration_s: float) -> EnergyLedger:
    """Add a duration in seconds to one bucket."""
    if duration_s < 0:
        raise ValueError(f"Negative duration {duration_s} s for {state.value}")
    ledger.add(state, seconds_to_us(duration_s))
    return ledger


def state_power_mw(profile: ElectricalProfile, state: EnergyState) -> float:
    """Instantaneous power drawn in one state"""
    current = {
        EnergyState.CPU: profile.i_cpu,
        EnergyState.LPM: profile.i_lpm,
        EnergyState.TX: profile.i_tx,
        EnergyState.RX: profile.i_rx,
    }[state]
    return 1000.0 * profile.v * current


def energy_mj(ledger: EnergyLedger, profile: ElectricalProfile) -> float:
    return 1000.0 * profile.v * (
        profile.i_cpu * ledger.t_cpu
        + profile.i_lpm * ledger.t_lpm
        + profile.i_tx * ledger.t_tx
        + profile.i_rx * ledger.t_rx
    )


def power_mw(ledger: EnergyLedger, profile: ElectricalProfile, tos: float) -> float:
    """
    Average power over the total operating time.

    Args:
        tos: total operating time in seconds

    Raises:
        UndefinedPowerError: if tos is not positive
    """
    if tos <= 0:
        raise UndefinedPowerError(f"Power is undefined over an operating time of {tos} s")
    return energy_mj(ledger, profile) / tos


def channel_check_coverage(y: SimTime, phase_us: int, period_us: int, check_us: int) -> int:
    """Microseconds of channel check in [0, y) for checks starting at phase + k*period."""
    z = y - phase_us
    if z <= 0 or check_us == 0:
        return 0
    return (z // period_us) * check_us + min(z % period_us, check_us)


# ── Radio meter ──────────────────────────────────────────────
class RadioMeter:
    """
    Tracks one node's state over time and partitions it into the ledger.

    Precedence at any instant: TX while the node transmits, RX while an audible
    frame or strobe is on air, otherwise periodic channel checks count as RX and the rest
    is CPU while a task runs and LPM when idle.
    """

    def __init__(self, node_id: int, duty: DutyCycleParams, rng: random.Random):
        self.node_id = node_id
        self.ledger = EnergyLedger()
        self.period_us = max(1, round(US_PER_SECOND / duty.channel_check_hz))
        self.check_us = min(seconds_to_us(duty.channel_check_s), self.period_us)
        self.phase_us = rng.randrange(self.period_us - self.check_us + 1)
        self.cpu_task_us = seconds_to_us(duty.cpu_task_s)
        self.last: SimTime = 0
        self.tx_active = 0
        self.rx_active = 0
        self.cpu_until: SimTime = 0

    @property
    def transmitting(self) -> bool:
        return self.tx_active > 0

    def _coverage(self, y: SimTime) -> int:
        return channel_check_coverage(y, self.phase_us, self.period_us, self.check_us)

    def _idle(self, a: SimTime, b: SimTime, state: EnergyState):
        checking = self._coverage(b) - self._coverage(a)
        self.ledger.add(EnergyState.RX, checking)
        self.ledger.add(state, b - a - checking)

    def accrue(self, t: SimTime):
        """Account every microsecond since the previous call."""
        a = self.last
        if t <= a:
            return
        if self.tx_active:
            self.ledger.add(EnergyState.TX, t - a)
        elif self.rx_active:
            self.ledger.add(EnergyState.RX, t - a)
        else:
            b = min(max(self.cpu_until, a), t)
            if b > a:
                self._idle(a, b, EnergyState.CPU)
            if t > b:
                self._idle(b, t, EnergyState.LPM)
        self.last = t

    def begin_tx(self, t: SimTime):
        self.accrue(t)
        self.tx_active += 1

    def end_tx(self, t: SimTime):
        self.accrue(t)
        self.tx_active -= 1

    def begin_rx(self, t: SimTime):
        self.accrue(t)
        self.rx_active += 1

    def end_rx(self, t: SimTime):
        self.accrue(t)
        self.rx_active -= 1

    def cpu_task(self, t: SimTime) -> Tuple[SimTime, SimTime]:
        """Queue one MCU task; returns its (start, end)."""
        self.accrue(t)
        start = max(self.cpu_until, t)
        self.cpu_until = start + self.cpu_task_us
        return start, self.cpu_until
