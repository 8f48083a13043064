"""
Replications and the baseline/variant/interval experiment grid.
"""
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from config import config, with_overrides
from models.schemas import AttackVariant, CellResult, MetricSummary, RunOutcome, ScenarioConfig
from services.detect_service import monitor
from services.metrics_service import compute_metrics, verify
from services.simulation_service import run
from services.topology_service import TopologyError

logger = logging.getLogger(__name__)

GRID_INTERVALS = (1.0, 2.0, 3.0, 4.0)
GRID_VARIANTS = (AttackVariant.NON_SPOOFED, AttackVariant.SPOOFED)
SUMMARY_METRICS = ("pdr", "app_pdr", "ae2ed_s", "apc_mw")


def evaluate(cfg: ScenarioConfig, detector: bool = True, check_oracle: bool = False) -> RunOutcome:
    """Run one seed and reduce it to its report (and detector flags)."""
    result = run(cfg, keep_event_log=config.KEEP_EVENT_LOG)
    logger.debug(f"Seed {cfg.seed}: {result.events_executed} events, {len(result.trace)} trace records")
    report = verify(result) if check_oracle else compute_metrics(result)
    flags = monitor(result, cfg.detector) if detector else []
    logger.info(
        f"Seed {cfg.seed} {cfg.attack_variant.value}: app_pdr={report.app_pdr} "
        f"ae2ed={report.ae2ed_s} apc={report.apc_mw:.4f} mW"
    )
    return RunOutcome(report=report, flags=flags)


def _evaluate_task(task: Tuple[ScenarioConfig, bool]) -> RunOutcome:
    cfg, detector = task
    return evaluate(cfg, detector)


def seeds_for(cfg: ScenarioConfig) -> List[int]:
    return [(cfg.seed + i) % 2 ** 64 for i in range(cfg.replications)]


def summarize(values: Sequence[Optional[float]]) -> MetricSummary:
    """Mean and Student-t 95% half-width over the defined values"""
    sample = np.asarray([v for v in values if v is not None], dtype=float)
    n = len(sample)
    if n == 0:
        return MetricSummary(n=0)
    mean = float(np.mean(sample))
    if n < 2:
        return MetricSummary(mean=mean, n=1)
    half = stats.t.ppf(0.975, n - 1) * float(np.std(sample, ddof=1)) / math.sqrt(n)
    return MetricSummary(mean=mean, ci95=float(half), n=n)


def replicate(cfg: ScenarioConfig, workers: int = 1, detector: bool = True) -> Tuple[List[RunOutcome], Dict[str, MetricSummary]]:
    """
    Run cfg.replications independent seeds (seed, seed+1, ...).

    Workers > 1 fans the seeds out to a process pool; results come back in
    seed order either way.
    """
    tasks = [(with_overrides(cfg, seed=s), detector) for s in seeds_for(cfg)]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_evaluate_task, tasks))
    else:
        outcomes = [_evaluate_task(t) for t in tasks]
    summary = {
        metric: summarize([getattr(o.report, metric) for o in outcomes])
        for metric in SUMMARY_METRICS
    }
    return outcomes, summary


def cell_name(variant: AttackVariant, interval_s: Optional[float]) -> str:
    if variant == AttackVariant.NONE:
        return "baseline"
    return f"{variant.value.lower()}_{interval_s:g}s"


def grid_cells(cfg: ScenarioConfig, baseline_only: bool = False) -> List[Tuple[str, ScenarioConfig]]:
    """Baseline once, then every attacked variant at every replay interval."""
    cells = [(cell_name(AttackVariant.NONE, None), with_overrides(cfg, attack_variant=AttackVariant.NONE))]
    if baseline_only:
        return cells
    for variant in GRID_VARIANTS:
        for interval in GRID_INTERVALS:
            cells.append((
                cell_name(variant, interval),
                with_overrides(cfg, attack_variant=variant, replay_interval_s=interval)
            ))
    return cells


def run_cell(name: str, cfg: ScenarioConfig, workers: int = 1, detector: bool = True) -> CellResult:
    """Replicate one cell; failures are recorded on the cell instead of raised."""
    attacked = cfg.attack_variant != AttackVariant.NONE
    cell = CellResult(
        scenario=name,
        variant=cfg.attack_variant,
        interval_s=cfg.replay_interval_s if attacked else None
    )
    logger.info(f"Cell {name}: {cfg.replications} replications from seed {cfg.seed}")
    try:
        cell.outcomes, cell.summary = replicate(cfg, workers, detector)
    except TopologyError as e:
        logger.warning(f"Cell {name} failed: {e}")
        cell.error, cell.error_kind = str(e), "topology"
    except (ValueError, RuntimeError) as e:
        logger.warning(f"Cell {name} failed: {e}")
        cell.error, cell.error_kind = str(e), "run"
    return cell


def run_matrix(
    cfg: ScenarioConfig,
    baseline_only: bool = False,
    workers: int = 1,
    detector: bool = True
) -> List[CellResult]:
    """Execute the experiment grid; one failing cell does not stop the others."""
    return [run_cell(name, cell_cfg, workers, detector) for name, cell_cfg in grid_cells(cfg, baseline_only)]
