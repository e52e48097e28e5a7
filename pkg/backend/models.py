"""Records that cross a process or network boundary.

Field order is the output column order for JSON-lines and CSV.
"""

from __future__ import annotations

from typing import List, Optional

from pydantic import BaseModel, Field, root_validator, validator

import config
from services.channel import ChannelKind
from services.code import COEFF_DOMAINS, DEFAULT_COEFF_DOMAIN


# ----- Codes -----

class BuildRequest(BaseModel):
    m: int = Field(..., ge=1, le=10, description="field extension degree, q = 2^m")
    n: int = Field(..., ge=2, description="mother code length N in symbols")
    dv: int = Field(2, ge=1)
    dc: int = Field(3, ge=2)
    T: int = Field(1, ge=1, description="transmitted copies per mother symbol")
    seed: int = Field(..., ge=0)
    coeff_domain: str = DEFAULT_COEFF_DOMAIN
    puncture_rate: Optional[float] = Field(None, gt=0, lt=1, description="target rate of the punctured mother code")

    @validator("coeff_domain")
    def known_domain(cls, v):
        if v not in COEFF_DOMAINS:
            raise ValueError(f"must be one of {COEFF_DOMAINS}")
        return v


class BuildSummary(BaseModel):
    m: int
    n: int
    n_checks: int
    k: int
    dv: int
    dc: int
    T: int
    punctured: int
    rate: str
    rate_value: float
    info_bits: int
    transmitted_bits: int
    seed: int
    crc32: str
    path: Optional[str] = None


class DecodeReport(BaseModel):
    success: bool
    iterations: int
    syndrome_trace: List[int]
    contradictions: int = 0
    full_graph: bool = False
    symbol_errors: Optional[int] = None
    bit_errors: Optional[int] = None
    estimate: List[str] = Field(default_factory=list, description="mother symbols as hex")


# ----- Monte Carlo -----

class SimConfig(BaseModel):
    channel: ChannelKind
    grid: List[float] = Field(..., description="erasure probabilities (bec) or Eb/N0 in dB (awgn)")
    master_seed: int = Field(..., ge=0)
    code: Optional[BuildRequest] = None
    code_text: Optional[str] = Field(None, description="contents of a code file")
    max_iter: int = Field(config.MAX_ITER, ge=1)
    min_trials: int = Field(config.MIN_TRIALS, ge=1)
    max_frame_errors: int = Field(config.MAX_FRAME_ERRORS, ge=1)
    max_trials: int = Field(config.MAX_TRIALS, ge=1)
    batch_size: int = Field(config.BATCH_SIZE, ge=1)
    workers: int = Field(config.WORKERS, ge=1)
    all_zero: bool = Field(False, description="send the all-zero word (bec only)")
    timing: bool = False

    @validator("grid")
    def grid_points(cls, v, values):
        if not v:
            raise ValueError("grid must not be empty")
        if values.get("channel") == ChannelKind.BEC and any(not 0.0 <= e <= 1.0 for e in v):
            raise ValueError("erasure probabilities must lie in [0, 1]")
        return v

    @root_validator(skip_on_failure=True)
    def one_code_source(cls, values):
        if (values.get("code") is None) == (values.get("code_text") is None):
            raise ValueError("give exactly one of code (build parameters) or code_text")
        if values["max_trials"] < values["min_trials"]:
            raise ValueError("max_trials must be >= min_trials")
        if values["all_zero"] and values["channel"] != ChannelKind.BEC:
            raise ValueError("the all-zero shortcut is only valid on the bec")
        return values


class SimRecord(BaseModel):
    channel: ChannelKind
    point: float
    trials: int
    frame_errors: int
    fer: float
    symbol_errors: int
    bit_errors: int
    mean_iterations: Optional[float]
    master_seed: int
    code_crc: str
    wall_time: Optional[float] = None

    class Config:
        use_enum_values = True

    @root_validator(skip_on_failure=True)
    def fer_matches_counts(cls, values):
        trials, errors = values["trials"], values["frame_errors"]
        if not 0 <= errors <= trials:
            raise ValueError("frame_errors must lie in [0, trials]")
        if trials and abs(values["fer"] - errors / trials) > 1e-12:
            raise ValueError("fer must equal frame_errors / trials")
        return values


# ----- Density evolution -----

class ThresholdReport(BaseModel):
    m: int
    dv: int
    dc: int
    T: int
    puncture: float
    rate: float
    threshold: float
    shannon_limit: float
    normalized_gap: float
    bisect_tol: float


class SweepPoint(ThresholdReport):
    index: int = Field(..., description="position in the (m, T) grid")


SIM_COLUMNS = list(SimRecord.__fields__)
SWEEP_COLUMNS = list(SweepPoint.__fields__)
