from .scheduler import Event, EventKind, Scheduler
from .topology_service import NodeSpec, TopologyError, generate_topology, stream
from .energy_service import EnergyLedger, RadioMeter, UndefinedPowerError, energy_mj, power_mw, record_state
from .radio_service import Medium, MacLayer, RadioEvent, airtime
from .trace_service import TraceLog
from .rpl_service import RplNode, TrickleTimer, NeighborEntry, compute_rank
from .attack_service import CopycatAttacker
from .simulation_service import Simulation, SimulationResult, run
from .metrics_service import OracleDivergenceError, compute_metrics, oracle_scan, verify
from .detect_service import iqr_flags, monitor
