from .core import (
    US_PER_SECOND, SimTime, NodeId, seconds_to_us, us_to_seconds,
    ROOT_ID, BROADCAST, MIN_HOP_RANK_INCREASE, ROOT_RANK, INFINITE_RANK,
    InvalidRankError, Role, Position, distance, dag_rank,
    PacketKind, CONTROL_SIZES, Packet
)
from .schemas import (
    ObjectiveFunction, AttackVariant, EnergyState,
    RadioParams, ElectricalProfile, DutyCycleParams, RplParams, DetectorParams,
    ScenarioConfig, PowerBin, MetricsReport, FlagRecord, MetricSummary,
    RunOutcome, CellResult, RunManifest
)
