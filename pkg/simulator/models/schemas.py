"""
Pydantic models for the copycat simulator
"""
from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class ObjectiveFunction(str, Enum):
    MRHOF = "MRHOF"
    OF0 = "OF0"


class AttackVariant(str, Enum):
    NONE = "NONE"
    NON_SPOOFED = "NON_SPOOFED"
    SPOOFED = "SPOOFED"


class EnergyState(str, Enum):
    CPU = "CPU"
    LPM = "LPM"
    TX = "TX"
    RX = "RX"


# ── Scenario configuration ───────────────────────────────────
class RadioParams(BaseModel):
    """Unit-disk medium with disk interference and Bernoulli loss"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    comm_range_m: float = Field(50.0, gt=0)
    interference_range_m: float = Field(100.0, gt=0)
    bitrate_bps: float = Field(250_000.0, gt=0)
    base_loss_prob: float = Field(0.05, ge=0, lt=1)
    per_hop_latency_s: float = Field(0.0, ge=0)  # extra forwarding delay, airtime covers the rest
    csma_max_backoffs: int = Field(3, ge=0)
    backoff_window_s: float = Field(0.005, gt=0)
    mac_max_retries: int = Field(3, ge=0)
    queue_limit: int = Field(16, ge=1)

    @model_validator(mode="after")
    def _interference_covers_comm(self):
        if self.interference_range_m < self.comm_range_m:
            raise ValueError("interference_range_m must be >= comm_range_m")
        return self


class ElectricalProfile(BaseModel):
    """Supply voltage and per-state current draw of the mote"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    v: float = Field(3.0, gt=0)
    i_cpu: float = Field(426e-6, gt=0)
    i_lpm: float = Field(20e-6, gt=0)
    i_tx: float = Field(17.4e-3, gt=0)
    i_rx: float = Field(18.8e-3, gt=0)


class DutyCycleParams(BaseModel):
    """Radio duty cycle and MCU cost per processed packet"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    channel_check_s: float = Field(0.002, ge=0)
    channel_check_hz: float = Field(8.0, gt=0)
    cpu_task_s: float = Field(0.001, ge=0)

    @model_validator(mode="after")
    def _check_fits_period(self):
        if self.channel_check_s * self.channel_check_hz > 1:
            raise ValueError("channel_check_s does not fit in one check period")
        return self


class RplParams(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    redundancy_k: int = Field(10, ge=1)
    parent_switch_threshold: int = Field(128, ge=0)
    probe_count: int = Field(3, ge=1)
    probe_spacing_s: float = Field(1.0, gt=0)
    dao_timeout_s: float = Field(10.0, gt=0)
    dao_retries: int = Field(2, ge=0)
    dis_delay_s: float = Field(5.0, gt=0)
    rejoin_holddown_s: float = Field(15.0, ge=0)


class DetectorParams(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    window_s: float = Field(60.0, gt=0)
    fence_k: float = Field(1.5, ge=0)
    min_support: int = Field(4, ge=1)


class ScenarioConfig(BaseModel):
    """One simulated scenario; defaults reproduce the reference setup"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    area_m: float = Field(200.0, gt=0)
    n_sensors: int = Field(30, ge=1)
    n_attackers: int = Field(5, ge=0)
    sim_seconds: float = Field(1800.0, ge=0)
    objective_function: ObjectiveFunction = ObjectiveFunction.MRHOF
    dio_imin_s: float = Field(4.0, gt=0)
    dio_imax_s: float = Field(1050.0, gt=0)
    replay_interval_s: float = Field(1.0, gt=0)
    data_interval_s: float = Field(60.0, gt=0)
    data_size_bytes: int = Field(30, gt=0, le=127)
    data_start_jitter_s: float = Field(0.0, ge=0)
    tx_power_dbm: float = 0.0  # informational; range is set by radio.comm_range_m
    attacker_activation_s: float = Field(90.0, ge=0)
    attack_variant: AttackVariant = AttackVariant.NONE
    seed: int = Field(1, ge=0, lt=2 ** 64)
    replications: int = Field(10, ge=1)

    radio: RadioParams = RadioParams()
    energy: ElectricalProfile = ElectricalProfile()
    duty: DutyCycleParams = DutyCycleParams()
    rpl: RplParams = RplParams()
    detector: DetectorParams = DetectorParams()

    @model_validator(mode="after")
    def _cross_field_rules(self):
        if self.n_attackers > self.n_sensors:
            raise ValueError("n_attackers cannot exceed n_sensors")
        if self.dio_imax_s < self.dio_imin_s:
            raise ValueError("dio_imax_s must be >= dio_imin_s")
        if self.data_start_jitter_s > self.data_interval_s:
            raise ValueError("data_start_jitter_s cannot exceed data_interval_s")
        return self

    @property
    def attacked(self) -> bool:
        return self.attack_variant != AttackVariant.NONE and self.n_attackers > 0


# ── Results ──────────────────────────────────────────────────
class PowerBin(BaseModel):
    """Average power per state over one sampling bin"""
    bin_start_s: float
    cpu_mw: float
    lpm_mw: float
    tx_mw: float
    rx_mw: float


class MetricsReport(BaseModel):
    """Scenario-level outcome of one seeded run"""
    seed: int
    pdr: Optional[float] = None
    app_pdr: Optional[float] = None
    ae2ed_s: Optional[float] = None
    apc_mw: float = 0.0
    generated: int = 0
    delivered: int = 0
    data_attempts: int = 0
    out_of_range_adoptions: int = 0
    replays: int = 0
    dio_suppressed: int = 0
    invalid_dio: int = 0
    control_tx: Dict[str, int] = Field(default_factory=dict)
    exposure: Dict[int, int] = Field(default_factory=dict)  # attacker id -> legitimate nodes in range
    per_node_series: Dict[int, List[PowerBin]] = Field(default_factory=dict)
    fingerprint: str = ""


class FlagRecord(BaseModel):
    """One neighbor flagged by one observer in one window"""
    window_start_s: float
    observer_id: int
    flagged_id: int
    count: int
    fence: float


class MetricSummary(BaseModel):
    """Mean and 95% Student-t half-width; ci95 is None below two samples"""
    mean: Optional[float] = None
    ci95: Optional[float] = None
    n: int = 0


class RunOutcome(BaseModel):
    report: MetricsReport
    flags: List[FlagRecord] = Field(default_factory=list)


class CellResult(BaseModel):
    """One experiment grid cell with all of its replications"""
    scenario: str
    variant: AttackVariant
    interval_s: Optional[float] = None
    outcomes: List[RunOutcome] = Field(default_factory=list)
    summary: Dict[str, MetricSummary] = Field(default_factory=dict)
    error: Optional[str] = None
    error_kind: Optional[str] = None


class RunManifest(BaseModel):
    """Everything needed to reproduce an output directory"""
    tool_version: str
    config_path: Optional[str] = None
    config: ScenarioConfig
    seeds: List[int]
    output_dir: str
    grid: bool = False
    detector: bool = True
    cells: List[str] = Field(default_factory=list)
    fingerprints: Dict[str, List[str]] = Field(default_factory=dict)
