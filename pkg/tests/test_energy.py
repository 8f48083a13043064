import random

import pytest
from hypothesis import given, strategies as st

from models.schemas import DutyCycleParams, ElectricalProfile, EnergyState
from services.energy_service import (
    EnergyLedger, RadioMeter, UndefinedPowerError, channel_check_coverage, energy_mj, power_mw, record_state
)

PROFILE = ElectricalProfile()


def _ledger(**seconds):
    ledger = EnergyLedger()
    for name, value in seconds.items():
        record_state(ledger, EnergyState[name.upper()], value)
    return ledger


class TestLedger:
    def test_record_state(self):
        ledger = _ledger(cpu=1.5, rx=0.25)
        assert ledger.t_cpu == 1.5
        assert ledger.t_rx == 0.25
        assert ledger.t_tx == 0.0
        assert ledger.total_us == 1_750_000

    def test_negative_duration_rejected(self):
        with pytest.raises(ValueError):
            record_state(EnergyLedger(), EnergyState.TX, -1.0)

    def test_idle_mote_for_half_an_hour(self):
        ledger = _ledger(lpm=1800)
        assert energy_mj(ledger, PROFILE) == pytest.approx(108.0)
        assert power_mw(ledger, PROFILE, 1800) == pytest.approx(0.06)

    def test_always_transmitting(self):
        ledger = _ledger(tx=1800)
        assert power_mw(ledger, PROFILE, 1800) == pytest.approx(52.2)

    def test_empty_ledger(self):
        assert energy_mj(EnergyLedger(), PROFILE) == 0.0

    def test_zero_operating_time(self):
        with pytest.raises(UndefinedPowerError):
            power_mw(_ledger(lpm=1), PROFILE, 0)

    @given(
        st.lists(st.tuples(st.sampled_from(list(EnergyState)), st.integers(0, 10 ** 9)), max_size=20)
    )
    def test_energy_is_additive(self, entries):
        whole = EnergyLedger()
        parts = 0.0
        for state, us in entries:
            whole.add(state, us)
            single = EnergyLedger()
            single.add(state, us)
            parts += energy_mj(single, PROFILE)
        assert energy_mj(whole, PROFILE) == pytest.approx(parts, rel=1e-9, abs=1e-9)


class TestChannelCheckCoverage:
    def test_examples(self):
        assert channel_check_coverage(0, 10, 100, 5) == 0
        assert channel_check_coverage(12, 10, 100, 5) == 2
        assert channel_check_coverage(115, 10, 100, 5) == 10
        assert channel_check_coverage(500, 10, 100, 0) == 0


class TestRadioMeter:
    def _meter(self, **duty):
        return RadioMeter(1, DutyCycleParams(**duty), random.Random(5))

    def test_idle_second_is_lpm_plus_channel_checks(self):
        meter = self._meter()
        meter.accrue(1_000_000)
        assert meter.ledger.buckets[EnergyState.RX] == 8 * 2000
        assert meter.ledger.buckets[EnergyState.LPM] == 1_000_000 - 16_000

    def test_transmit_takes_precedence(self):
        meter = self._meter(channel_check_s=0.0)
        meter.begin_tx(100)
        meter.begin_rx(200)
        meter.end_rx(300)
        meter.end_tx(500)
        meter.begin_rx(600)
        meter.end_rx(700)
        meter.accrue(1000)
        b = meter.ledger.buckets
        assert b[EnergyState.TX] == 400
        assert b[EnergyState.RX] == 100
        assert b[EnergyState.LPM] == 500

    def test_cpu_tasks_queue_back_to_back(self):
        meter = self._meter(channel_check_s=0.0)
        assert meter.cpu_task(0) == (0, 1000)
        assert meter.cpu_task(0) == (1000, 2000)
        meter.accrue(10_000)
        assert meter.ledger.buckets[EnergyState.CPU] == 2000
        assert meter.ledger.buckets[EnergyState.LPM] == 8000

    @given(st.lists(st.tuples(st.integers(1, 5000), st.sampled_from(["tx", "rx", "cpu"])), max_size=30))
    def test_states_partition_elapsed_time(self, steps):
        meter = self._meter()
        t = 0
        for gap, what in steps:
            t += gap
            if what == "cpu":
                meter.cpu_task(t)
            elif what == "tx":
                meter.begin_tx(t)
                meter.end_tx(t + gap)
            else:
                meter.begin_rx(t)
                meter.end_rx(t + gap)
            t += gap
        meter.accrue(t + 10_000)
        assert meter.ledger.total_us == t + 10_000
