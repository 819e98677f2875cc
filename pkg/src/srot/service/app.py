"""FastAPI application wrapping the transport library.

Error taxonomy: malformed or inconsistent inputs map to HTTP 400 with
kind "input"; solver and integrator breakdowns map to HTTP 500 with kind
"numerical".  The CLI translates these into its exit codes.
"""

from __future__ import annotations

import dataclasses

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

import srot
from srot.config import ConfigError
from srot.dynamical import (
    VerificationError,
    build_from_plan,
    pair_cost,
    relaxed_cost,
    verify_equivalence,
)
from srot.geodesics import (
    ConnectionFailure,
    IntegrationBlowup,
    ShootingConfig,
    connect,
)
from srot.kantorovich import SolverError, cost_matrix, solve_entropic, solve_exact
from srot.manifolds import Point, by_name
from srot.measures import DiscreteMeasure, MeasureValidationError, Plan
from srot.service import schemas

_INPUT_ERRORS = (MeasureValidationError, ConfigError, ValueError)
_NUMERICAL_ERRORS = (ConnectionFailure, IntegrationBlowup, SolverError, VerificationError)

_SHOOTING_FIELDS = {f.name for f in dataclasses.fields(ShootingConfig)}


def _shooting(overrides: dict | None) -> ShootingConfig | None:
    if not overrides:
        return None
    unknown = set(overrides) - _SHOOTING_FIELDS
    if unknown:
        raise ValueError(f"unknown shooting parameter(s): {sorted(unknown)}")
    clean = {
        k: tuple(v) if isinstance(v, list) else v for k, v in overrides.items()
    }
    return ShootingConfig(**clean)


def _measure(model: schemas.MeasureModel) -> DiscreteMeasure:
    return DiscreteMeasure(np.array(model.points, dtype=float), np.array(model.weights))


def _plan(model: schemas.PlanModel) -> Plan:
    return Plan(np.array(model.rows), np.array(model.cols), np.array(model.weights))


def create_app() -> FastAPI:
    app = FastAPI(title="srot", version=srot.__version__)

    async def _domain_errors(request: Request, exc: Exception):
        if isinstance(exc, _NUMERICAL_ERRORS):
            return JSONResponse(
                status_code=500, content={"detail": str(exc), "kind": "numerical"}
            )
        return JSONResponse(
            status_code=400, content={"detail": str(exc), "kind": "input"}
        )

    # registered per class: the catch-all Exception slot would re-raise into
    # the transport instead of answering
    for exc_type in _INPUT_ERRORS + _NUMERICAL_ERRORS:
        app.add_exception_handler(exc_type, _domain_errors)

    @app.get("/health", response_model=schemas.HealthResponse)
    async def health():
        return schemas.HealthResponse(status="ok", version=srot.__version__)

    @app.post("/distance", response_model=schemas.DistanceResponse)
    async def distance(req: schemas.DistanceRequest):
        manifold = by_name(req.manifold, req.dim)
        cfg = _shooting(req.shooting)
        x = Point(np.array(req.x, dtype=float))
        y = Point(np.array(req.y, dtype=float))
        path = connect(manifold, x, y, cfg)
        return schemas.DistanceResponse(
            distance=float(np.sqrt(path.energy)),
            lam0=[float(v) for v in path.lam0.momenta],
            energy=path.energy,
            constant_path=bool(np.array_equal(x.coords, y.coords)),
        )

    @app.post("/solve", response_model=schemas.SolveResponse)
    async def solve(req: schemas.SolveRequest):
        manifold = by_name(req.manifold, req.dim)
        mu0 = _measure(req.mu0)
        mu1 = _measure(req.mu1)
        if mu0.dim != manifold.chart_dim or mu1.dim != manifold.chart_dim:
            raise ValueError(
                f"measure dimension {mu0.dim}/{mu1.dim} does not match "
                f"chart dimension {manifold.chart_dim}"
            )
        C = cost_matrix(manifold, mu0, mu1, _shooting(req.shooting))
        if req.method == "exact":
            sol = solve_exact(C, mu0, mu1)
        elif req.method == "entropic":
            sol = solve_entropic(C, mu0, mu1, req.epsilon)
        else:
            raise ValueError(f"unknown solver method {req.method!r}")
        return schemas.SolveResponse(
            plan=schemas.PlanModel(
                rows=[int(i) for i in sol.plan.rows],
                cols=[int(j) for j in sol.plan.cols],
                weights=[float(w) for w in sol.plan.weights],
            ),
            cost=sol.cost,
            solver=sol.solver,
            dual_gap=None if np.isnan(sol.dual_gap) else sol.dual_gap,
            stage_costs=list(sol.stage_costs) if sol.stage_costs else None,
        )

    @app.post("/build-bb", response_model=schemas.BuildResponse)
    async def build_bb(req: schemas.BuildRequest):
        manifold = by_name(req.manifold, req.dim)
        mu0 = _measure(req.mu0)
        mu1 = _measure(req.mu1)
        eta = build_from_plan(manifold, _plan(req.plan), mu0, mu1, _shooting(req.shooting))
        return schemas.BuildResponse(
            weights=[float(w) for w in eta.weights],
            energies=[c.relaxed_energy() for c in eta.curves],
            starts=[[float(v) for v in c.points[0]] for c in eta.curves],
            ends=[[float(v) for v in c.points[-1]] for c in eta.curves],
            grid_points=int(eta.time_grid.shape[0]),
            relaxed_cost=relaxed_cost(eta),
            pair_cost=pair_cost(eta),
        )

    @app.post("/verify", response_model=schemas.VerifyResponse)
    async def verify(req: schemas.VerifyRequest):
        manifold = by_name(req.manifold, req.dim)
        report = verify_equivalence(
            manifold,
            _measure(req.mu0),
            _measure(req.mu1),
            _shooting(req.shooting),
            tolerances=req.tolerances,
            debug_corrupt_weight=req.corrupt_weight,
        )
        return schemas.VerifyResponse(passed=report.passed, report=report.to_dict())

    @app.post("/emit-curves", response_model=schemas.EmitCurvesResponse)
    async def emit_curves(req: schemas.EmitCurvesRequest):
        manifold = by_name(req.manifold, req.dim)
        mu0 = _measure(req.mu0)
        mu1 = _measure(req.mu1)
        eta = build_from_plan(manifold, _plan(req.plan), mu0, mu1, _shooting(req.shooting))
        n = manifold.chart_dim
        m = manifold.horizontal_rank
        columns = (
            ["curve", "t"]
            + [f"x{i}" for i in range(n)]
            + [f"v{i}" for i in range(m)]
        )
        rows = []
        for k, curve in enumerate(eta.curves):
            for t, p, v in zip(curve.times, curve.points, curve.velocities):
                rows.append([float(k), float(t), *map(float, p), *map(float, v)])
        return schemas.EmitCurvesResponse(columns=columns, rows=rows)

    @app.post("/selftest", response_model=schemas.SelftestResponse)
    async def selftest():
        checks = []
        cfg = ShootingConfig(
            angular_grid=16, radial_scales=(1.0,), vertical_grid=17, max_candidates=6
        )

        d = srot.distance(by_name("euclidean", 2), Point([0.0, 0.0]), Point([3.0, 4.0]), cfg)
        checks.append(
            {"name": "euclidean 3-4-5", "value": d, "ok": abs(d - 5.0) < 1e-9}
        )

        h1 = by_name("heisenberg")
        d = srot.distance(h1, Point([0.0, 0.0, 0.0]), Point([1.0, 0.0, 0.0]), cfg)
        checks.append(
            {"name": "horizontal unit", "value": d, "ok": abs(d - 1.0) < 1e-8}
        )

        d = srot.distance(h1, Point([0.0, 0.0, 0.0]), Point([0.0, 0.0, 1.0]), cfg)
        target = float(np.sqrt(4.0 * np.pi))
        checks.append(
            {"name": "vertical pair", "value": d, "ok": abs(d - target) < 1e-6}
        )

        mu0 = DiscreteMeasure(np.array([[0.0, 0.0, 0.0]]), np.array([1.0]))
        mu1 = DiscreteMeasure(np.array([[0.6, -0.4, 0.2]]), np.array([1.0]))
        report = verify_equivalence(h1, mu0, mu1, cfg)
        checks.append(
            {"name": "dirac equivalence", "value": report.c_kan, "ok": report.passed}
        )

        return schemas.SelftestResponse(
            passed=all(c["ok"] for c in checks), checks=checks
        )

    return app
