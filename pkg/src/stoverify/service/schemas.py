"""Request/response models for the verification service.

The system document itself is passed through as a dict and validated by the
core loader (which owns the detailed schema rules); these models cover the
operation envelopes so that service and in-process CLI use identical shapes.
"""

from __future__ import annotations

from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field


class ChainInfo(BaseModel):
    run: List[str]
    entry: bool
    triples: List[str]


class PropDecompositionInfo(BaseModel):
    immediate_violation: bool
    chains: List[ChainInfo]


class TripleKeyInfo(BaseModel):
    source: List[str]
    target: List[str]


class DecomposeRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    system: dict
    allow_revisits: int = Field(default=0, ge=0, le=3)


class DecomposeResponse(BaseModel):
    dfa: str
    runs: List[str]
    props: Dict[str, PropDecompositionInfo]
    triple_keys: List[TripleKeyInfo]


class PropBounds(BaseModel):
    violation_upper: float
    satisfaction_lower: float
    immediate_violation: bool


class VerifyRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    system: dict
    degree: int = Field(default=2, ge=0, le=8)
    allow_revisits: int = Field(default=0, ge=0, le=3)
    multiple: bool = False
    seed: Optional[int] = None
    threads: Optional[int] = Field(default=None, ge=1, le=64)
    emit_smtlib: bool = False


class VerifyResponse(BaseModel):
    report_json: str
    results: Dict[str, PropBounds]
    artifacts: Dict[str, str]


class EstimateInfo(BaseModel):
    estimate: float
    ci_lo: float
    ci_hi: float
    successes: int
    trials: int
    confidence: float


class SimulateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    system: dict
    trajectories: int = Field(default=10_000, ge=1, le=10_000_000)
    dt: float = Field(default=1e-2, gt=0.0)
    seed: int = 0
    props: Optional[List[str]] = None
    policy: Optional[str] = None
    check_report: Optional[dict] = None


class SimulateResponse(BaseModel):
    estimates: Dict[str, Dict[str, EstimateInfo]]
    violations: List[str]
    checked: bool
