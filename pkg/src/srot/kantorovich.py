"""Static transport solvers over the squared sub-Riemannian distance cost.

The exact solver works on the discrete transport polytope via linear
programming (HiGHS through scipy); optimality is certified a posteriori with
the dual variables (feasibility + complementary slackness).  The entropic
alternative is a log-domain Sinkhorn iteration with epsilon annealing and a
final rounding step back onto the polytope.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from srot.geodesics import GeodesicPath, ShootingConfig, connect_batch
from srot.manifolds import Manifold
from srot.measures import DiscreteMeasure, Plan

__all__ = [
    "CostMatrix",
    "KantorovichSolution",
    "SolverError",
    "cost_matrix",
    "solve_exact",
    "solve_entropic",
]

DUAL_CERT_TOL = 1e-9


class SolverError(RuntimeError):
    """A transport solver failed to produce a certified solution."""


@dataclass(frozen=True)
class CostMatrix:
    """Dense cost c(x_i, y_j) = d^2(x_i, y_j), with the connecting geodesics
    kept alongside so downstream consumers reuse the exact same energies."""

    values: np.ndarray                      # (k0, k1)
    paths: tuple[tuple[GeodesicPath, ...], ...] | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def path(self, i: int, j: int) -> GeodesicPath:
        if self.paths is None:
            raise ValueError("cost matrix was built without stored geodesics")
        return self.paths[i][j]


@dataclass(frozen=True)
class KantorovichSolution:
    plan: Plan
    cost: float
    solver: str
    dual_gap: float
    # entropic solver only: rounded cost after each annealing stage
    stage_costs: tuple[float, ...] | None = None

    def recompute_cost(self, C: CostMatrix) -> float:
        return self.plan.cost(C.values)


def cost_matrix(
    manifold: Manifold,
    mu0: DiscreteMeasure,
    mu1: DiscreteMeasure,
    cfg: ShootingConfig | None = None,
) -> CostMatrix:
    """Squared-distance costs between all atom pairs, solved in one batch.

    Entries are the trapezoid energies of the connecting geodesics, so the
    identity J_Kan(gamma) = relaxed cost of the induced dynamic measure holds
    bitwise for measures built from the same table.
    """
    I, J = mu0.size, mu1.size
    pair_x = np.repeat(mu0.points, J, axis=0)
    pair_y = np.tile(mu1.points, (I, 1))
    paths = connect_batch(manifold, pair_x, pair_y, cfg)
    values = np.array([p.energy for p in paths]).reshape(I, J)
    grid = tuple(tuple(paths[i * J + j] for j in range(J)) for i in range(I))
    return CostMatrix(values=values, paths=grid)


def solve_exact(C: CostMatrix, mu0: DiscreteMeasure, mu1: DiscreteMeasure) -> KantorovichSolution:
    """Optimal vertex of the transport polytope, with a dual certificate.

    Ties between optimal vertices are resolved deterministically by the
    solver's fixed pivoting; degenerate weights resolve by index order.
    """
    vals = np.asarray(C.values, dtype=float)
    if not np.all(np.isfinite(vals)):
        raise SolverError("cost matrix contains non-finite entries")
    k0, k1 = vals.shape
    if (k0, k1) != (mu0.size, mu1.size):
        raise SolverError("cost matrix shape does not match the measures")
    if abs(mu0.weights.sum() - mu1.weights.sum()) > 1e-12:
        raise SolverError("unbalanced marginals")

    # variables w_ij flattened row-major; marginal equality constraints
    rows = []
    cols = []
    for i in range(k0):
        rows.append((np.full(k1, i), i * k1 + np.arange(k1)))
    for j in range(k1):
        cols.append((np.full(k0, k0 + j), np.arange(k0) * k1 + j))
    r = np.concatenate([a for a, _ in rows + cols])
    c = np.concatenate([b for _, b in rows + cols])
    A = sp.csr_matrix((np.ones(r.size), (r, c)), shape=(k0 + k1, k0 * k1))
    b = np.concatenate([mu0.weights, mu1.weights])

    res = linprog(vals.ravel(), A_eq=A, b_eq=b, bounds=(0, None), method="highs")
    if not res.success:
        raise SolverError(f"LP solver failed: {res.message}")

    w = res.x.reshape(k0, k1)
    duals = res.eqlin.marginals
    u, v = duals[:k0], duals[k0:]
    reduced = vals - u[:, None] - v[None, :]
    dual_infeas = float(max(0.0, -reduced.min()))
    slackness = float(np.max(np.abs(w * reduced)))
    dual_gap = max(dual_infeas, slackness)
    if dual_gap > DUAL_CERT_TOL:
        raise SolverError(f"optimality certificate violated: residual {dual_gap:.3e}")

    keep = w > 1e-15
    i_idx, j_idx = np.nonzero(keep)
    plan = Plan(i_idx, j_idx, w[keep])
    plan.check_admissible(mu0, mu1)
    cost = plan.cost(vals)
    return KantorovichSolution(plan=plan, cost=cost, solver="exact", dual_gap=dual_gap)


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    amax = np.max(a, axis=axis, keepdims=True)
    out = amax[..., 0] if axis == -1 else np.squeeze(amax, axis=axis)
    return out + np.log(np.sum(np.exp(a - amax), axis=axis))


def _round_to_polytope(P: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Marginal repair: scale rows then columns into the polytope, then fix
    the remaining deficit with a rank-one correction."""
    r = P.sum(axis=1)
    P = P * np.minimum(1.0, a / np.where(r > 0, r, 1.0))[:, None]
    c = P.sum(axis=0)
    P = P * np.minimum(1.0, b / np.where(c > 0, c, 1.0))[None, :]
    da = a - P.sum(axis=1)
    db = b - P.sum(axis=0)
    s = da.sum()
    if s > 0:
        P = P + np.outer(da, db) / s
    return P


def solve_entropic(
    C: CostMatrix,
    mu0: DiscreteMeasure,
    mu1: DiscreteMeasure,
    epsilon: float,
    max_iter: int = 2000,
    anneal_factor: float = 0.5,
    tol: float = 1e-7,
) -> KantorovichSolution:
    """Log-domain Sinkhorn with epsilon annealing, rounded onto the polytope.

    Anneals geometrically from max(C) down to the target epsilon, warm
    starting the dual potentials at each stage.  Each stage runs until the
    raw marginal violation drops below tol or max_iter is spent; the final
    rounding repairs the marginals to float accuracy regardless, so tol
    controls plan quality, not admissibility.  stage_costs in the returned
    solution records the rounded transport cost after every stage.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    vals = np.asarray(C.values, dtype=float)
    a = mu0.weights
    b = mu1.weights
    log_a = np.log(a)
    log_b = np.log(b)

    scale = float(vals.max()) if vals.max() > 0 else 1.0
    stages = [scale]
    while stages[-1] > epsilon:
        stages.append(max(epsilon, stages[-1] * anneal_factor))

    f = np.zeros(a.size)
    g = np.zeros(b.size)
    stage_costs = []
    for eps in stages:
        for _ in range(max_iter):
            f = eps * (log_a - _logsumexp((g[None, :] - vals) / eps, axis=1))
            g = eps * (log_b - _logsumexp((f[:, None] - vals) / eps, axis=0))
            P = np.exp((f[:, None] + g[None, :] - vals) / eps)
            violation = float(
                max(np.abs(P.sum(axis=1) - a).max(), np.abs(P.sum(axis=0) - b).max())
            )
            if violation <= tol:
                break
        stage_costs.append(float(np.sum(_round_to_polytope(P, a, b) * vals)))

    P = _round_to_polytope(P, a, b)
    keep = P > 1e-300
    i_idx, j_idx = np.nonzero(keep)
    plan = Plan(i_idx, j_idx, P[keep])
    plan.check_admissible(mu0, mu1)
    cost = plan.cost(vals)
    return KantorovichSolution(
        plan=plan, cost=cost, solver=f"entropic({epsilon:g})",
        dual_gap=float("nan"), stage_costs=tuple(stage_costs),
    )
