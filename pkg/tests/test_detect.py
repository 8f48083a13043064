from hypothesis import given, strategies as st

from conftest import small_config
from models.core import Position, Role
from models.schemas import DetectorParams
from services.detect_service import (
    iqr_fence, iqr_flags, monitor, neighbor_fences, score, trickle_ceiling, window_counts, windows_observed
)
from services.experiment_service import evaluate
from services.simulation_service import SimulationResult
from services.topology_service import NodeSpec
from services.trace_service import TraceLog

S = 1_000_000


def _result(dio_rx, nodes=(), **overrides):
    trace = TraceLog()
    for t, observer, claimed in dio_rx:
        trace.record("dio_rx", t, observer, claimed, 512)
    return SimulationResult(
        cfg=small_config(**overrides), nodes=list(nodes), trace=trace, ledgers={}, check_phases={},
        snapshots=[], end_us=120 * S
    )


class TestIqr:
    def test_replaying_neighbor_stands_out(self):
        counts = [(1, 5), (2, 5), (3, 6), (4, 7), (9, 100)]
        assert iqr_fence([c for _, c in counts]) == 10.0
        assert iqr_flags(counts) == {9}

    def test_uniform_neighbors(self):
        assert iqr_flags([(i, 6) for i in range(6)]) == set()

    def test_too_few_neighbors(self):
        assert iqr_flags([(1, 1), (2, 1), (3, 500)]) == set()

    @given(
        st.lists(st.integers(0, 1000), min_size=4, max_size=20),
        st.integers(1, 10)
    )
    def test_scale_invariant(self, values, factor):
        counts = list(enumerate(values))
        scaled = [(i, v * factor) for i, v in counts]
        assert iqr_flags(counts) == iqr_flags(scaled)


class TestNeighborFences:
    def test_judged_against_the_others(self):
        fences = neighbor_fences([(1, 10), (2, 20), (3, 30), (4, 40), (9, 200)])
        assert fences[9] == 55.0

    def test_two_replayers_do_not_mask_each_other(self):
        counts = [(2, 1), (3, 1), (4, 1), (5, 1), (8, 60), (9, 60)]
        assert iqr_flags(counts) == set()
        fences = neighbor_fences(counts, floor=15)
        assert {n for n, c in counts if c > fences[n]} == {8, 9}

    def test_floor_holds_quiet_neighborhoods(self):
        fences = neighbor_fences([(1, 0), (2, 0), (3, 0), (4, 3)], floor=15)
        assert fences == {1: 15, 2: 15, 3: 15, 4: 15}

    def test_support_guard(self):
        assert neighbor_fences([(1, 0), (2, 0), (3, 60)]) == {}

    def test_trickle_ceiling(self):
        assert trickle_ceiling(60, 4) == 15
        assert trickle_ceiling(60, 7) == 8


class TestMonitor:
    def test_flags_per_observer_and_window(self):
        records = []
        for neighbor in (2, 3, 4, 5):
            records += [(k * S, 1, neighbor) for k in range(4)]
        records += [(k * S // 2, 1, 9) for k in range(60)]
        records += [(61 * S, 1, n) for n in (2, 3)]
        result = _result(records)

        flags = monitor(result, DetectorParams())
        assert [(f.window_start_s, f.observer_id, f.flagged_id, f.count) for f in flags] == [(0.0, 1, 9, 60)]
        assert flags[0].fence == 15.0

    def test_silent_neighbors_count_as_zero(self):
        # five neighbors introduce themselves, then only node 9 keeps talking
        records = [(k * S, 1, n) for k, n in enumerate((2, 3, 4, 5))]
        records += [(60 * S + k * S // 2, 1, 9) for k in range(40)]
        result = _result(records)

        counts = window_counts(result, 60)
        assert counts[(1, 1)] == {2: 0, 3: 0, 4: 0, 5: 0, 9: 40}
        flags = monitor(result, DetectorParams())
        assert [(f.window_start_s, f.flagged_id) for f in flags] == [(60.0, 9)]

    def test_window_counts(self):
        result = _result([(0, 1, 2), (59 * S, 1, 2), (60 * S, 1, 2), (5 * S, 3, 2)])
        counts = window_counts(result, 60)
        assert counts[(0, 1)][2] == 2
        assert counts[(1, 1)][2] == 1
        assert counts[(0, 3)][2] == 1
        assert counts[(1, 3)] == {2: 0}
        assert windows_observed(result, DetectorParams(min_support=1)) == 4
        assert windows_observed(result, DetectorParams()) == 0

    def test_observe_only(self):
        cfg = small_config(attack_variant="NON_SPOOFED", n_attackers=1)
        with_detector = evaluate(cfg, detector=True)
        without = evaluate(cfg, detector=False)
        assert with_detector.report == without.report
        assert without.flags == []


class TestScore:
    def _attacked(self, replays):
        nodes = [NodeSpec(i, Position(10.0 * i, 0.0), Role.SENSOR) for i in range(1, 6)]
        nodes.append(NodeSpec(9, Position(25.0, 0.0), Role.ATTACKER))
        records = [(k * S, 1, n) for k, n in enumerate((2, 3, 4, 5))]
        records += [(60 * S + k * S, 1, 9) for k in range(replays)]
        result = _result(records, nodes, attack_variant="NON_SPOOFED", n_attackers=1)
        result.trace.record("capture", 59 * S, 9, 3, 512)
        result.trace.record("replay", 60 * S, 9)
        return result

    def test_hit_when_exposed_node_flags_the_replayed_identity(self):
        result = self._attacked(replays=60)
        outcome = score(result, monitor(result, DetectorParams()), DetectorParams())
        assert (outcome.hits, outcome.exposed_windows) == (1, 1)
        assert outcome.hit_rate == 1.0
        assert (outcome.flagged_windows, outcome.judged_windows) == (1, 2)

    def test_miss_when_replays_stay_under_the_ceiling(self):
        result = self._attacked(replays=10)
        outcome = score(result, monitor(result, DetectorParams()), DetectorParams())
        assert (outcome.hits, outcome.exposed_windows) == (0, 1)
        assert outcome.flag_rate == 0.0
