"""
IQR outlier detection over per-neighbor DIO counts.

Each legitimate node counts the DIOs it received per claimed source in
tumbling windows. The distribution of a window covers every identity the node
has heard so far, silent ones at zero, and a source is flagged when its count
lies above Q3 + k * (Q3 - Q1) of the other sources' counts and above what a
trickle sender held at Imin can emit in one window. Runs over a finished
trace, so it cannot influence routing.
"""
import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Dict, List, Sequence, Set, Tuple

import numpy as np

from models.core import NodeId, Role, distance, seconds_to_us, us_to_seconds
from models.schemas import AttackVariant, DetectorParams, FlagRecord
from services.simulation_service import SimulationResult

logger = logging.getLogger(__name__)


def iqr_fence(values: Sequence[int], fence_k: float = 1.5) -> float:
    """Upper fence from linearly interpolated quartiles"""
    q1, q3 = np.percentile(np.asarray(values, dtype=float), [25, 75])
    return float(q3 + fence_k * (q3 - q1))


def iqr_flags(counts: Sequence[Tuple[NodeId, int]], fence_k: float = 1.5, min_support: int = 4) -> Set[NodeId]:
    """Ids whose count exceeds the upper fence; empty below min_support neighbors."""
    if len(counts) < min_support:
        return set()
    fence = iqr_fence([c for _, c in counts], fence_k)
    return {node_id for node_id, c in counts if c > fence}


def neighbor_fences(
    counts: Sequence[Tuple[NodeId, int]],
    fence_k: float = 1.5,
    min_support: int = 4,
    floor: float = 0.0
) -> Dict[NodeId, float]:
    """
    Fence each neighbor is judged against: the IQR fence of the other
    neighbors' counts, never below floor.

    Leaving the judged neighbor out keeps two replaying identities heard by
    the same node from hiding each other in the upper quartile.
    """
    if len(counts) < min_support:
        return {}
    fences = {}
    for i, (node_id, _) in enumerate(counts):
        others = [c for j, (_, c) in enumerate(counts) if j != i]
        fences[node_id] = max(iqr_fence(others, fence_k) if others else 0.0, floor)
    return fences


def trickle_ceiling(window_s: float, imin_s: float) -> int:
    """Most DIOs one neighbor sends in a window while its trickle interval stays at Imin"""
    return math.floor(window_s / imin_s)


def window_counts(result: SimulationResult, window_s: float) -> Dict[Tuple[int, NodeId], Counter]:
    """
    (window index, observer) -> DIO count per known neighbor.

    An observer's neighbors are the claimed ids it has heard up to the end of
    the window; it is reported from its first reception to the end of the run.
    """
    window_us = seconds_to_us(window_s)
    last = max(result.end_us - 1, 0) // window_us
    heard: Dict[NodeId, Dict[int, Counter]] = defaultdict(lambda: defaultdict(Counter))
    for record in result.trace.of_kind("dio_rx"):
        _, t, observer, claimed, _ = record
        heard[observer][t // window_us][claimed] += 1

    counts: Dict[Tuple[int, NodeId], Counter] = {}
    for observer, per_window in heard.items():
        known: Set[NodeId] = set()
        for window in range(min(per_window), max(last, max(per_window)) + 1):
            received = per_window.get(window, Counter())
            known.update(received)
            counter = Counter({n: 0 for n in sorted(known)})
            counter.update(received)
            counts[(window, observer)] = counter
    return counts


def monitor(result: SimulationResult, params: DetectorParams) -> List[FlagRecord]:
    """Judge every known neighbor per observer per tumbling window."""
    window_us = seconds_to_us(params.window_s)
    floor = trickle_ceiling(params.window_s, result.cfg.dio_imin_s)
    flags = []
    for (window, observer), counter in sorted(window_counts(result, params.window_s).items()):
        counts = sorted(counter.items())
        fences = neighbor_fences(counts, params.fence_k, params.min_support, floor)
        for node_id, count in counts:
            if node_id in fences and count > fences[node_id]:
                flags.append(FlagRecord(
                    window_start_s=us_to_seconds(window * window_us),
                    observer_id=observer,
                    flagged_id=node_id,
                    count=count,
                    fence=fences[node_id],
                ))
    if flags:
        logger.debug(f"Seed {result.cfg.seed}: detector raised {len(flags)} flags")
    return flags


def windows_observed(result: SimulationResult, params: DetectorParams) -> int:
    """Number of (window, observer) pairs with enough support to be judged"""
    return sum(
        1 for counter in window_counts(result, params.window_s).values()
        if len(counter) >= params.min_support
    )


# ── Scoring ──────────────────────────────────────────────────
@dataclass
class DetectionScore:
    """
    Hits: judged windows, after an attacker's first replay, in which a node
    within its comm range flags the identity it replays under.
    Flagged: judged windows holding any flag at all.
    """
    hits: int = 0
    exposed_windows: int = 0
    flagged_windows: int = 0
    judged_windows: int = 0

    @property
    def hit_rate(self) -> float:
        return self.hits / self.exposed_windows if self.exposed_windows else 0.0

    @property
    def flag_rate(self) -> float:
        return self.flagged_windows / self.judged_windows if self.judged_windows else 0.0


def replayed_identities(result: SimulationResult) -> Dict[NodeId, Tuple[NodeId, int]]:
    """attacker -> (claimed id of its replays, time of its first replay)"""
    first_replay: Dict[NodeId, int] = {}
    for _, t, attacker in result.trace.of_kind("replay"):
        first_replay.setdefault(attacker, t)
    identities = {}
    for _, _, attacker, captured_from, _ in result.trace.of_kind("capture"):
        if attacker not in first_replay:
            continue
        claimed = attacker if result.cfg.attack_variant == AttackVariant.NON_SPOOFED else captured_from
        identities[attacker] = (claimed, first_replay[attacker])
    return identities


def score(result: SimulationResult, flags: Sequence[FlagRecord], params: DetectorParams) -> DetectionScore:
    """Hit rate against the replaying identities and overall flag rate of one run"""
    window_us = seconds_to_us(params.window_s)
    judged = {
        key for key, counter in window_counts(result, params.window_s).items()
        if len(counter) >= params.min_support
    }
    flagged: Dict[Tuple[int, NodeId], Set[NodeId]] = defaultdict(set)
    for f in flags:
        flagged[(seconds_to_us(f.window_start_s) // window_us, f.observer_id)].add(f.flagged_id)

    outcome = DetectionScore(judged_windows=len(judged), flagged_windows=len(judged & set(flagged)))
    positions = {n.id: n.position for n in result.nodes}
    legitimate = [n.id for n in result.nodes if n.role != Role.ATTACKER]
    comm = result.cfg.radio.comm_range_m
    for attacker, (claimed, since) in sorted(replayed_identities(result).items()):
        first_window = -(-since // window_us)
        for observer in legitimate:
            if distance(positions[observer], positions[attacker]) > comm:
                continue
            for window, judged_observer in judged:
                if judged_observer != observer or window < first_window:
                    continue
                outcome.exposed_windows += 1
                if claimed in flagged.get((window, observer), ()):
                    outcome.hits += 1
    return outcome
