"""
Seeded random streams and node placement.
"""
import logging
import random
from collections import deque
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

from models.core import NodeId, Position, ROOT_ID, Role, distance
from models.schemas import ScenarioConfig

logger = logging.getLogger(__name__)

MAX_PLACEMENT_ATTEMPTS = 100


class TopologyError(RuntimeError):
    """No placement with every legitimate node reachable from the root"""


def stream(seed: int, node: NodeId, purpose: str) -> random.Random:
    """
    Independent RNG for one node and one purpose (mac, radio, trickle, app, duty).

    String seeds are hashed with SHA-512 by random.Random, so the stream does
    not depend on the platform or on how many other nodes exist.
    """
    return random.Random(f"{seed}:{node}:{purpose}")


def topology_stream(seed: int) -> random.Random:
    return random.Random(f"{seed}:topology")


@dataclass(frozen=True)
class NodeSpec:
    id: NodeId
    position: Position
    role: Role

    @property
    def legitimate(self) -> bool:
        return self.role != Role.ATTACKER


def root_reachable(nodes: Sequence[NodeSpec], comm_range_m: float) -> bool:
    """True if every legitimate node has a multi-hop path to the root over legitimate relays."""
    legit = [n for n in nodes if n.legitimate]
    by_id = {n.id: n for n in legit}
    if ROOT_ID not in by_id:
        return False
    seen = {ROOT_ID}
    frontier = deque([ROOT_ID])
    while frontier:
        current = by_id[frontier.popleft()]
        for other in legit:
            if other.id not in seen and distance(current.position, other.position) <= comm_range_m:
                seen.add(other.id)
                frontier.append(other.id)
    return len(seen) == len(legit)


def generate_topology(cfg: ScenarioConfig, rng: Optional[random.Random] = None) -> List[NodeSpec]:
    """
    Place one root and cfg.n_sensors sensors uniformly in the area, then turn
    cfg.n_attackers of the sensors into attackers.

    Placements are redrawn until the reachability check passes.

    Raises:
        TopologyError: after MAX_PLACEMENT_ATTEMPTS failed placements
    """
    rng = rng or topology_stream(cfg.seed)
    total = cfg.n_sensors + 1

    for attempt in range(1, MAX_PLACEMENT_ATTEMPTS + 1):
        positions = [
            Position(rng.uniform(0, cfg.area_m), rng.uniform(0, cfg.area_m))
            for _ in range(total)
        ]
        attackers = set(rng.sample(range(1, total), cfg.n_attackers))
        nodes = [
            NodeSpec(
                id=i,
                position=positions[i],
                role=Role.ROOT if i == ROOT_ID else (Role.ATTACKER if i in attackers else Role.SENSOR)
            )
            for i in range(total)
        ]
        if root_reachable(nodes, cfg.radio.comm_range_m):
            if attempt > 1:
                logger.debug(f"Seed {cfg.seed}: connected placement after {attempt} attempts")
            return nodes

    logger.warning(f"Seed {cfg.seed}: no connected placement in {MAX_PLACEMENT_ATTEMPTS} attempts")
    raise TopologyError(
        f"No placement with all legitimate nodes reachable from the root after "
        f"{MAX_PLACEMENT_ATTEMPTS} attempts (seed {cfg.seed})"
    )


def attacker_exposure(nodes: Sequence[NodeSpec], comm_range_m: float) -> Dict[NodeId, int]:
    """Number of legitimate nodes within comm range of each attacker"""
    exposure = {}
    for attacker in nodes:
        if attacker.role != Role.ATTACKER:
            continue
        exposure[attacker.id] = sum(
            1 for n in nodes
            if n.legitimate and distance(n.position, attacker.position) <= comm_range_m
        )
    return exposure


def line_topology(spacing_m: float, n_sensors: int, attackers: Sequence[Position] = ()) -> List[NodeSpec]:
    """Root at the origin and sensors on the x axis; attackers appended at the given spots."""
    nodes = [NodeSpec(ROOT_ID, Position(0.0, 0.0), Role.ROOT)]
    nodes += [
        NodeSpec(i, Position(i * spacing_m, 0.0), Role.SENSOR)
        for i in range(1, n_sensors + 1)
    ]
    next_id = n_sensors + 1
    for offset, pos in enumerate(attackers):
        nodes.append(NodeSpec(next_id + offset, pos, Role.ATTACKER))
    return nodes
