import math

import pytest
from scipy import stats

from conftest import small_config
from models.schemas import AttackVariant, ScenarioConfig
from services.experiment_service import (
    GRID_INTERVALS, cell_name, evaluate, grid_cells, replicate, run_cell, run_matrix, seeds_for, summarize
)


class TestSummarize:
    def test_mean_and_half_width(self):
        s = summarize([1.0, 2.0, 3.0])
        assert s.n == 3
        assert s.mean == pytest.approx(2.0)
        assert s.ci95 == pytest.approx(stats.t.ppf(0.975, 2) * 1.0 / math.sqrt(3))

    def test_single_sample_has_no_interval(self):
        s = summarize([0.5])
        assert (s.mean, s.ci95, s.n) == (0.5, None, 1)

    def test_undefined_values_skipped(self):
        assert summarize([1.0, None, 3.0]).n == 2
        assert summarize([None, None]).mean is None


def test_seeds_are_consecutive():
    assert seeds_for(small_config(seed=5, replications=3)) == [5, 6, 7]
    assert seeds_for(small_config(seed=2 ** 64 - 1, replications=2)) == [2 ** 64 - 1, 0]


class TestGrid:
    def test_full_grid(self):
        cells = grid_cells(ScenarioConfig())
        names = [name for name, _ in cells]
        assert len(cells) == 1 + 2 * len(GRID_INTERVALS)
        assert names[0] == "baseline"
        assert "non_spoofed_1s" in names and "spoofed_4s" in names
        spoofed_3 = dict(cells)["spoofed_3s"]
        assert spoofed_3.attack_variant == AttackVariant.SPOOFED
        assert spoofed_3.replay_interval_s == 3.0

    def test_baseline_only(self):
        cells = grid_cells(ScenarioConfig(attack_variant="SPOOFED"), baseline_only=True)
        assert [(n, c.attack_variant) for n, c in cells] == [("baseline", AttackVariant.NONE)]

    def test_cell_names(self):
        assert cell_name(AttackVariant.NONE, None) == "baseline"
        assert cell_name(AttackVariant.NON_SPOOFED, 2.0) == "non_spoofed_2s"


class TestReplicate:
    def test_same_seed_same_outcome(self):
        cfg = small_config(replications=2)
        first, summary = replicate(cfg)
        second, _ = replicate(cfg)
        assert [o.report.seed for o in first] == [7, 8]
        assert [o.report.fingerprint for o in first] == [o.report.fingerprint for o in second]
        assert first[0].report.fingerprint != first[1].report.fingerprint
        assert summary["app_pdr"].n == 2

    def test_worker_pool_gives_same_results(self):
        cfg = small_config(replications=2)
        serial, _ = replicate(cfg, workers=1)
        pooled, _ = replicate(cfg, workers=2)
        assert [o.report for o in serial] == [o.report for o in pooled]

    def test_oracle_checked_evaluation(self):
        outcome = evaluate(small_config(attack_variant="SPOOFED", n_attackers=2), check_oracle=True)
        assert outcome.report.generated > 0


class TestCells:
    def test_topology_failure_recorded(self):
        cell = run_cell("baseline", small_config(area_m=10_000))
        assert cell.error_kind == "topology"
        assert cell.outcomes == []

    def test_matrix_keeps_going(self):
        cells = run_matrix(small_config(replications=1, sim_seconds=30), detector=False)
        assert len(cells) == 9
        assert all(c.error is None and len(c.outcomes) == 1 for c in cells)
        assert [c.interval_s for c in cells[:2]] == [None, 1.0]
