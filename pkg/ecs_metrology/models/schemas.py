from enum import Enum
from pathlib import Path
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, computed_field, field_validator, model_validator

from ecs_metrology.quantum.fock import DEFAULT_CUTOFF, Cutoff
from ecs_metrology.quantum.states import ProbeKind, ecs_normalizer, scs_normalizer


class ProbeSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: ProbeKind
    N: int = Field(0, ge=0)
    alpha: float = Field(0.0, ge=0.0)
    cutoff: Cutoff = DEFAULT_CUTOFF

    @model_validator(mode="after")
    def validate_kind_parameters(self):
        if self.kind == ProbeKind.BAT and (self.N < 2 or self.N % 2):
            raise ValueError("BAT probes need an even N >= 2")
        if self.kind in (ProbeKind.NOON, ProbeKind.UNCORRELATED) and self.N < 1:
            raise ValueError(f"{self.kind.value} probes need N >= 1")
        if self.kind in (ProbeKind.NOON, ProbeKind.BAT) and self.N > self.cutoff.max_occupation:
            raise ValueError(f"N={self.N} does not fit cutoff {self.cutoff.dim}")
        return self

    @computed_field
    @property
    def ecs_normalizer(self) -> float:
        return float(ecs_normalizer(self.alpha))

    @computed_field
    @property
    def scs_normalizer(self) -> float:
        return float(scs_normalizer(self.alpha))


class PhaseSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    phi: float = 0.0
    k: int = Field(1, ge=1)


class QfiMethod(str, Enum):
    PURE_ANALYTIC = "pure-analytic"
    PURE_NUMERIC = "pure-numeric"
    MIXED_EIG = "mixed-eig"
    CLOSED_FORM = "closed-form"


class QfiResult(BaseModel):
    F: float = Field(ge=0.0)
    delta_phi: float
    mu: int = Field(1, ge=1)
    method: QfiMethod
    spectrum_cut: int = 0


class ParitySample(BaseModel):
    phi: float
    expectation: float = Field(ge=-1.0 - 1e-12, le=1.0 + 1e-12)
    uncertainty: float


class ParityCurve(BaseModel):
    alpha: float
    T: float = 1.0
    samples: List[ParitySample] = []
    phi_star: float
    delta_star: float


class SweepRow(BaseModel):
    state: str
    N: Optional[int] = None
    alpha: Optional[float] = None
    T: float = 1.0
    F: float
    delta_phi: float
    method: str
    spectrum_cut: int = 0
    tail_mass: float = 0.0
    agreement: Optional[float] = None


class ParityRow(BaseModel):
    sample: str
    alpha: float
    T: float = 1.0
    phi: Optional[float] = None
    expectation: Optional[float] = None
    delta_phi: float
    degenerate: bool = False
    agreement: Optional[float] = None


class Command(str, Enum):
    PURE_SWEEP = "pure-sweep"
    LOSS_SWEEP = "loss-sweep"
    PARITY_SWEEP = "parity-sweep"
    STATE_INFO = "state-info"
    RESOURCE_MATCH = "resource-match"


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


class RunConfig(BaseModel):
    command: Command
    cutoff: int = Field(16, ge=2)
    mu: int = Field(1, ge=1)
    n_values: List[int] = [1, 2, 3, 4, 5, 6, 7, 8]
    alphas: List[float] = [2.0]
    matched: bool = True
    t_grid: List[float] = [1.0]
    phi_grid: List[float] = []
    phi: float = 0.3
    transmissivity: float = Field(1.0, ge=0.0, le=1.0)
    include_curve: bool = False
    probe: Optional[ProbeKind] = None
    out: Optional[Path] = None
    format: OutputFormat = OutputFormat.CSV

    @field_validator("n_values", "alphas", "t_grid")
    def validate_nonempty(cls, v):
        if not v:
            raise ValueError("Grid cannot be empty")
        return v

    @field_validator("t_grid")
    def validate_transmissivities(cls, v):
        if any(t < 0.0 or t > 1.0 for t in v):
            raise ValueError("Transmissivities must lie in [0, 1]")
        return v

    @field_validator("n_values")
    def validate_photon_numbers(cls, v):
        if any(n < 1 for n in v):
            raise ValueError("Photon numbers must be >= 1")
        return v

    @field_validator("alphas")
    def validate_amplitudes(cls, v):
        if any(a < 0.0 for a in v):
            raise ValueError("Coherent amplitudes must be >= 0")
        return v

    @model_validator(mode="after")
    def validate_cutoff_fits(self):
        if self.command != Command.PARITY_SWEEP and self.cutoff < max(self.n_values) + 1:
            raise ValueError(f"Cutoff {self.cutoff} must be at least max N + 1 = {max(self.n_values) + 1}")
        return self

    @property
    def fock_cutoff(self) -> Cutoff:
        return Cutoff(dim=self.cutoff)

    def echo(self) -> dict:
        """Config block echoed into JSON outputs."""
        return self.model_dump(mode="json", exclude={"out"})


class StateReport(BaseModel):
    state: ProbeKind
    N: Optional[int] = None
    alpha: Optional[float] = None
    cutoff: int
    mean_n1: float
    normalizer: float
    tail_mass: float
    edge_mass: float
    support_size: int
    norm: float
