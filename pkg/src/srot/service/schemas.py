"""Request/response models for the HTTP service.

Arrays travel as plain JSON lists; conversion to numpy and all domain
validation happen on the service side so the CLI can stay a thin client.
"""

from __future__ import annotations

from typing import Any

from pydantic import BaseModel, Field


class MeasureModel(BaseModel):
    points: list[list[float]]
    weights: list[float]


class PlanModel(BaseModel):
    rows: list[int]
    cols: list[int]
    weights: list[float]


class DistanceRequest(BaseModel):
    manifold: str = "heisenberg"
    dim: int | None = None
    x: list[float]
    y: list[float]
    shooting: dict[str, Any] | None = None


class DistanceResponse(BaseModel):
    distance: float
    lam0: list[float]
    energy: float
    constant_path: bool


class SolveRequest(BaseModel):
    manifold: str = "heisenberg"
    dim: int | None = None
    mu0: MeasureModel
    mu1: MeasureModel
    method: str = "exact"
    epsilon: float = 1e-3
    shooting: dict[str, Any] | None = None


class SolveResponse(BaseModel):
    plan: PlanModel
    cost: float
    solver: str
    dual_gap: float | None = None
    stage_costs: list[float] | None = None


class BuildRequest(BaseModel):
    manifold: str = "heisenberg"
    dim: int | None = None
    plan: PlanModel
    mu0: MeasureModel
    mu1: MeasureModel
    shooting: dict[str, Any] | None = None


class BuildResponse(BaseModel):
    weights: list[float]
    energies: list[float]
    starts: list[list[float]]
    ends: list[list[float]]
    grid_points: int
    relaxed_cost: float
    pair_cost: float


class VerifyRequest(BaseModel):
    manifold: str = "heisenberg"
    dim: int | None = None
    mu0: MeasureModel
    mu1: MeasureModel
    shooting: dict[str, Any] | None = None
    tolerances: dict[str, float] | None = None
    corrupt_weight: float | None = Field(
        default=None,
        description="debug only: perturb one curve weight before the continuity check",
    )


class VerifyResponse(BaseModel):
    passed: bool
    report: dict[str, Any]


class EmitCurvesRequest(BaseModel):
    manifold: str = "heisenberg"
    dim: int | None = None
    plan: PlanModel
    mu0: MeasureModel
    mu1: MeasureModel
    shooting: dict[str, Any] | None = None


class EmitCurvesResponse(BaseModel):
    columns: list[str]
    rows: list[list[float]]


class SelftestResponse(BaseModel):
    passed: bool
    checks: list[dict[str, Any]]


class HealthResponse(BaseModel):
    status: str
    version: str
