"""Hamiltonian geodesic flow, exponential map, and shooting-based distances.

Normal geodesics are integrated with fixed-step RK4 on Hamilton's equations in
(point, momenta) chart coordinates.  The boundary-value problem (connecting two
points) is solved by multistart shooting: a product grid of initial covectors
(angular directions in the horizontal momenta x a radial scale x a vertical
momentum grid) screened at coarse resolution, then refined by damped
Gauss-Newton / Levenberg-Marquardt on the endpoint residual with
finite-difference Jacobians.

`connect` is the computable stand-in for a measurable geodesic-selection map:
among all converged minimizers whose energies tie within tolerance, the one
with lexicographically smallest initial momenta is returned, making the
selection a genuine deterministic function of its inputs (independent of batch
or schedule order).

All heavy lifting is vectorized over batches of trajectories; the distance
matrix path solves every pair of a product set in a single batched run.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from srot.manifolds import Covector, HorizontalVector, Manifold, Point, hamiltonian

__all__ = [
    "ShootingConfig",
    "GeodesicPath",
    "IntegrationBlowup",
    "ConnectionFailure",
    "exp_map",
    "connect",
    "connect_batch",
    "distance",
    "distance_matrix",
    "geodesic_sup_distance",
    "chow_connectivity_check",
    "ChowReport",
]


class IntegrationBlowup(RuntimeError):
    """A coordinate left the configured chart bound during integration."""

    def __init__(self, escape_time: float, bound: float):
        self.escape_time = escape_time
        self.bound = bound
        super().__init__(
            f"integration left the chart bound {bound:g} at t ~ {escape_time:.6f}"
        )


class ConnectionFailure(RuntimeError):
    """No multistart branch converged to the target endpoint."""

    def __init__(self, best_residual: float, pair_index: int | None = None,
                 context: str | None = None):
        self.best_residual = best_residual
        self.pair_index = pair_index
        self.context = context
        msg = f"shooting failed to reach target (best endpoint residual {best_residual:.3e})"
        if context:
            msg += f" [{context}]"
        super().__init__(msg)


@dataclass(frozen=True)
class ShootingConfig:
    """Knobs for the flow integrator and the multistart BVP solver."""

    steps: int = 256                 # RK4 steps on [0, 1] for returned paths
    screen_steps: int = 32           # cheap resolution for seed screening
    coarse_steps: int = 64           # resolution for the bulk Newton iterations
    angular_grid: int = 32           # directions in the horizontal momenta (rank 2)
    radial_scales: tuple[float, ...] = (0.45, 1.0)  # multipliers on the speed estimate
    vertical_grid: int = 33          # vertical momentum values, spanning +-vertical_span
    vertical_span: float = 4.0 * np.pi
    bvp_tol: float = 1e-8            # endpoint residual, chart units
    energy_tol: float = 1e-7         # relative tie window for minimizer selection
    fd_step: float = 1e-6            # finite-difference step for the Jacobian
    max_newton: int = 30
    max_candidates: int = 10         # refined starts per pair (plus the linear seed)
    polish_tol: float = 1e-12        # endpoint residual for the selected winner
    chart_bound: float = 1e6
    max_batch: int = 150_000         # trajectories integrated at once

    def __post_init__(self):
        if self.steps < 8:
            raise ValueError("steps must be >= 8")
        for name in ("bvp_tol", "energy_tol", "fd_step"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class GeodesicPath:
    """A constant-speed normal geodesic on the unit interval, sampled uniformly.

    points has shape (N+1, n), velocities (N+1, m) in frame coefficients.
    energy is the trapezoid quadrature of the squared speed, which for a
    constant-speed path equals 2 H(lam0) up to integrator noise.
    """

    manifold: Manifold
    start: Point
    lam0: Covector
    times: np.ndarray
    points: np.ndarray
    velocities: np.ndarray
    energy: float

    @property
    def endpoint(self) -> Point:
        return Point(self.points[-1])

    def sample(self, index: int) -> tuple[float, Point, HorizontalVector]:
        pt = Point(self.points[index])
        return float(self.times[index]), pt, HorizontalVector(pt, self.velocities[index])

    @property
    def speed_sq(self) -> np.ndarray:
        return np.einsum("tm,tm->t", self.velocities, self.velocities)

    def constant_speed_residual(self) -> float:
        """Max relative deviation of the squared speed from 2 H(lam0)."""
        h0 = hamiltonian(self.manifold, self.lam0)
        if h0 == 0.0:
            return float(np.max(np.abs(self.speed_sq)))
        return float(np.max(np.abs(self.speed_sq - 2.0 * h0)) / (2.0 * h0))


# ---------------------------------------------------------------------------
# Hamiltonian flow


def _rhs(manifold: Manifold, x: np.ndarray, p: np.ndarray, jac_mat: np.ndarray | None):
    """Hamilton's equations dx = sum_i u_i X_i, dp_b = -sum_i u_i <p, dX_i/dx_b>.

    jac_mat is the (n, m*n) flattening of a constant frame Jacobian (both
    shipped manifolds have one); None falls back to a pointwise Jacobian.
    """
    frame = manifold.frame(x)                       # (..., m, n)
    u = (frame @ p[..., None])[..., 0]              # frame pairings <p, X_i>
    dx = (u[..., None, :] @ frame)[..., 0, :]
    if jac_mat is not None:
        m = manifold.horizontal_rank
        n = manifold.chart_dim
        pj = (p @ jac_mat).reshape(p.shape[:-1] + (m, n))   # <p, dX_i/dx_b>
        dp = -(u[..., None, :] @ pj)[..., 0, :]
    else:
        jac = manifold.frame_jacobian(x)            # (..., m, n, n)
        dp = -np.einsum("...m,...man,...a->...n", u, jac, p)
    return dx, dp


def _constant_jacobian(manifold: Manifold) -> np.ndarray | None:
    """Frame Jacobian when it does not depend on the base point.

    True for both shipped manifolds (Heisenberg: constant, Euclidean: zero);
    probed numerically at two points so new manifolds degrade gracefully.
    """
    a = manifold.frame_jacobian(np.zeros(manifold.chart_dim))
    b = manifold.frame_jacobian(0.731 * np.ones(manifold.chart_dim))
    if np.array_equal(a, b):
        return a
    return None


def integrate_flow(
    manifold: Manifold,
    x0: np.ndarray,
    p0: np.ndarray,
    steps: int,
    keep_trajectory: bool = False,
    chart_bound: float = 1e6,
):
    """RK4 on Hamilton's equations for a batch of covectors.

    x0, p0: (..., n).  Returns (x, p) at t=1, or the full (steps+1, ..., n)
    trajectories when keep_trajectory is set.  Trajectories that leave the
    chart bound are driven to NaN rather than raising; callers that care
    (exp_map) check and raise.
    """
    x = np.array(x0, dtype=float)
    p = np.array(p0, dtype=float)
    h = 1.0 / steps
    jac0 = _constant_jacobian(manifold)
    jac = None
    if jac0 is not None:
        # flatten <p, dX_i/dx_b> into a single (n, m*n) GEMM per evaluation
        jac = jac0.transpose(1, 0, 2).reshape(manifold.chart_dim, -1)

    if keep_trajectory:
        xs = np.empty((steps + 1,) + x.shape)
        ps = np.empty((steps + 1,) + p.shape)
        xs[0], ps[0] = x, p

    check_every = 4
    with np.errstate(invalid="ignore", over="ignore"):
        for k in range(steps):
            k1x, k1p = _rhs(manifold, x, p, jac)
            k2x, k2p = _rhs(manifold, x + 0.5 * h * k1x, p + 0.5 * h * k1p, jac)
            k3x, k3p = _rhs(manifold, x + 0.5 * h * k2x, p + 0.5 * h * k2p, jac)
            k4x, k4p = _rhs(manifold, x + h * k3x, p + h * k3p, jac)
            x = x + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
            p = p + (h / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
            if k % check_every == check_every - 1 or k == steps - 1:
                bad = ~np.isfinite(x).all(axis=-1) | (np.abs(x).max(axis=-1) > chart_bound)
                if np.any(bad):
                    x[bad] = np.nan
                    p[bad] = np.nan
            if keep_trajectory:
                xs[k + 1], ps[k + 1] = x, p

    if keep_trajectory:
        return xs, ps
    return x, p


def _trajectory_velocities(manifold: Manifold, xs: np.ndarray, ps: np.ndarray) -> np.ndarray:
    """Frame coefficients u_i(t) = <p_t, X_i(x_t)> along stored trajectories."""
    frame = manifold.frame(xs)
    return np.einsum("...mn,...n->...m", frame, ps)


def _path_from_trajectory(
    manifold: Manifold, xs: np.ndarray, ps: np.ndarray, steps: int
) -> GeodesicPath:
    times = np.linspace(0.0, 1.0, steps + 1)
    vel = _trajectory_velocities(manifold, xs, ps)
    speed_sq = np.einsum("tm,tm->t", vel, vel)
    energy = float(np.trapezoid(speed_sq, times))
    start = Point(xs[0])
    return GeodesicPath(
        manifold=manifold,
        start=start,
        lam0=Covector(start, ps[0]),
        times=times,
        points=xs,
        velocities=vel,
        energy=energy,
    )


def exp_map(manifold: Manifold, lam0: Covector, steps: int = 256) -> GeodesicPath:
    """Project the Hamiltonian flow of lam0 to the chart over [0, 1]."""
    if steps < 8:
        raise ValueError("steps must be >= 8")
    manifold.check_point(lam0.base)
    xs, ps = integrate_flow(
        manifold, lam0.base.coords, lam0.momenta, steps, keep_trajectory=True
    )
    bad = ~np.isfinite(xs).all(axis=-1)
    if np.any(bad):
        escape = float(np.argmax(bad)) / steps
        raise IntegrationBlowup(escape, 1e6)
    return _path_from_trajectory(manifold, xs, ps, steps)


def constant_path(manifold: Manifold, x: Point, steps: int) -> GeodesicPath:
    times = np.linspace(0.0, 1.0, steps + 1)
    pts = np.tile(x.coords, (steps + 1, 1))
    vel = np.zeros((steps + 1, manifold.horizontal_rank))
    lam0 = Covector(x, np.zeros(manifold.chart_dim))
    return GeodesicPath(manifold, x, lam0, times, pts, vel, 0.0)


# ---------------------------------------------------------------------------
# Multistart shooting


def _seed_directions(manifold: Manifold, cfg: ShootingConfig) -> np.ndarray:
    """Unit directions in the first horizontal_rank momentum coordinates."""
    m = manifold.horizontal_rank
    n = manifold.chart_dim
    if m == 1:
        dirs = np.array([[1.0], [-1.0]])
    elif m == 2:
        theta = np.linspace(0.0, 2.0 * np.pi, cfg.angular_grid, endpoint=False)
        dirs = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    else:
        # +- coordinate axes; the linear seed covers the generic direction
        dirs = np.concatenate([np.eye(m), -np.eye(m)])
    out = np.zeros((dirs.shape[0], n))
    out[:, :m] = dirs
    return out


def _linear_seeds(manifold: Manifold, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Momenta solving the linearized endpoint map: frame(x)^T frame(x) p = y - x."""
    frame = manifold.frame(X)                       # (P, m, n)
    G = np.einsum("pma,pmb->pab", frame, frame)     # (P, n, n), rank m
    delta = Y - X
    return np.einsum("pab,pb->pa", np.linalg.pinv(G), delta)


def _pair_scales(manifold: Manifold, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Radial momentum scale per pair from the chart displacement.

    The horizontal part contributes its chart length; a residual
    (vertical) part of size d costs on the order of sqrt(4 pi d) by the
    ball-box estimate, which is exact for purely vertical Heisenberg pairs.
    """
    frame = manifold.frame(X)
    delta = Y - X
    coeff = np.einsum("pmn,pn->pm", frame, delta)
    horiz = np.einsum("pm,pmn->pn", coeff, frame)
    h_norm = np.linalg.norm(horiz, axis=1)
    v_norm = np.linalg.norm(delta - horiz, axis=1)
    return h_norm + np.sqrt(4.0 * np.pi * v_norm) + 0.1


def _build_seeds(
    manifold: Manifold, X: np.ndarray, Y: np.ndarray, cfg: ShootingConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Seed momenta for every pair.

    Returns (seeds, group) with seeds of shape (P, S, n) and group (S,)
    assigning each seed to a vertical-grid branch (used so screening keeps
    one candidate per winding branch).
    """
    P, n = X.shape
    m = manifold.horizontal_rank
    vd = manifold.vertical_dims
    dirs = _seed_directions(manifold, cfg)[:, :m]   # (D, m) frame directions
    scales = _pair_scales(manifold, X, Y)           # (P,) speed estimate

    if vd == 0:
        vert = np.zeros((1, max(vd, 1)))[:, :vd]
        V = 1
    else:
        # the vertical momentum acts as a rotation rate: minimal geodesics
        # never wind beyond a full turn, so an absolute span covers every
        # branch (gridded along each vertical coordinate; vd is 0 or 1 for
        # the shipped manifolds)
        vals = np.linspace(-cfg.vertical_span, cfg.vertical_span, cfg.vertical_grid)
        vert = vals[:, None] * np.ones((1, vd))
        V = vals.shape[0]
    D = dirs.shape[0]
    R = len(cfg.radial_scales)

    # seeds are prescribed as (initial frame velocity u, vertical momenta w)
    # and mapped to chart momenta by solving [frame(x); E_vert] p = [u; w]
    frame = manifold.frame(X)                       # (P, m, n)
    M = np.zeros((P, n, n))
    M[:, :m, :] = frame
    for k in range(vd):
        M[:, m + k, n - vd + k] = 1.0
    Minv = np.linalg.inv(M)                         # (P, n, n)

    S = D * R * V
    u_all = np.zeros((S, m))
    w_all = np.zeros((S, max(vd, 1)))[:, :vd]
    group = np.zeros(S, dtype=int)
    s = 0
    for d in range(D):
        for r in range(R):
            for v in range(V):
                u_all[s] = cfg.radial_scales[r] * dirs[d]
                if vd:
                    w_all[s] = vert[v]
                group[s] = v
                s += 1
    seeds = np.einsum("pab,sb->psa", Minv[:, :, :m], u_all) * scales[:, None, None]
    if vd:
        seeds += np.einsum("pab,sb->psa", Minv[:, :, m:], w_all)
    return seeds, group


def _screen_seeds(
    manifold: Manifold,
    X: np.ndarray,
    Y: np.ndarray,
    seeds: np.ndarray,
    group: np.ndarray,
    cfg: ShootingConfig,
) -> np.ndarray:
    """Pick refinement candidates per pair: best seed of each vertical branch,
    capped to cfg.max_candidates by endpoint residual, plus the linear seed."""
    P, S, n = seeds.shape
    res = np.empty((P, S))
    flat_x = np.repeat(X, S, axis=0)
    flat_p = seeds.reshape(P * S, n)
    ends = np.empty((P * S, n))
    for lo in range(0, P * S, cfg.max_batch):
        hi = min(lo + cfg.max_batch, P * S)
        e, _ = integrate_flow(
            manifold, flat_x[lo:hi], flat_p[lo:hi], cfg.screen_steps,
            chart_bound=cfg.chart_bound,
        )
        ends[lo:hi] = e
    res = np.linalg.norm(
        np.nan_to_num(ends, nan=np.inf).reshape(P, S, n) - Y[:, None, :], axis=2
    )

    n_groups = group.max() + 1
    cand = []
    for p in range(P):
        best_per_group = {}
        for s in range(S):
            g = group[s]
            if g not in best_per_group or res[p, s] < res[p, best_per_group[g]]:
                best_per_group[g] = s
        chosen = sorted(best_per_group.values(), key=lambda s: res[p, s])
        cand.append([seeds[p, s] for s in chosen[: cfg.max_candidates]])
    linear = _linear_seeds(manifold, X, Y)
    out = np.zeros((P, cfg.max_candidates + 1, n))
    counts = np.zeros(P, dtype=int)
    for p in range(P):
        picks = cand[p] + [linear[p]]
        for i, s in enumerate(picks):
            out[p, i] = s
        counts[p] = len(picks)
    # pad unused slots with the linear seed so the batch stays rectangular
    for p in range(P):
        out[p, counts[p]:] = linear[p]
    return out


def _endpoints(manifold, X, P_momenta, steps, cfg):
    ends = np.empty_like(X)
    B = X.shape[0]
    for lo in range(0, B, cfg.max_batch):
        hi = min(lo + cfg.max_batch, B)
        e, _ = integrate_flow(
            manifold, X[lo:hi], P_momenta[lo:hi], steps, chart_bound=cfg.chart_bound
        )
        ends[lo:hi] = e
    return np.nan_to_num(ends, nan=np.inf)


def _refine(
    manifold: Manifold,
    X: np.ndarray,
    Y: np.ndarray,
    starts: np.ndarray,
    cfg: ShootingConfig,
    tol: float | None = None,
    max_iter: int | None = None,
    steps: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Levenberg-Marquardt on the endpoint residual for a (P, C, n) stack of
    starts.  Returns refined momenta and final residual norms (P, C)."""
    tol = cfg.bvp_tol if tol is None else tol
    max_iter = cfg.max_newton if max_iter is None else max_iter
    steps = cfg.steps if steps is None else steps
    P, C, n = starts.shape
    base_x = np.repeat(X, C, axis=0)                # (P*C, n)
    target = np.repeat(Y, C, axis=0)
    p = starts.reshape(P * C, n).copy()

    ends = _endpoints(manifold, base_x, p, steps, cfg)
    r = ends - target
    rnorm = np.linalg.norm(r, axis=1)
    lam = np.full(P * C, 1e-4)

    for _ in range(max_iter):
        # candidates with runaway damping have stalled in a bad basin
        work = (rnorm > tol) & np.isfinite(rnorm) & (lam < 1e7)
        if not np.any(work):
            break
        idx = np.nonzero(work)[0]
        W = idx.size
        # finite-difference Jacobian, all columns in one batch
        pert = np.repeat(p[idx], n, axis=0)
        pert[np.arange(W * n), np.tile(np.arange(n), W)] += cfg.fd_step
        pe = _endpoints(manifold, np.repeat(base_x[idx], n, axis=0), pert, steps, cfg)
        J = (pe.reshape(W, n, n) - ends[idx][:, None, :]).transpose(0, 2, 1) / cfg.fd_step
        JtJ = np.einsum("wij,wik->wjk", J, J)
        Jtr = np.einsum("wij,wi->wj", J, r[idx])
        A = JtJ + lam[idx][:, None, None] * np.eye(n)[None]
        try:
            delta = -np.linalg.solve(A, Jtr[:, :, None])[:, :, 0]
        except np.linalg.LinAlgError:
            delta = -np.linalg.lstsq(
                A.reshape(-1, n), Jtr.reshape(-1), rcond=None
            )[0].reshape(W, n)
        trial = p[idx] + delta
        te = _endpoints(manifold, base_x[idx], trial, steps, cfg)
        tr = te - target[idx]
        tnorm = np.linalg.norm(tr, axis=1)
        improved = tnorm < rnorm[idx]
        acc = idx[improved]
        p[acc] = trial[improved]
        ends[acc] = te[improved]
        r[acc] = tr[improved]
        rnorm[acc] = tnorm[improved]
        lam[acc] = np.maximum(lam[acc] / 3.0, 1e-12)
        rej = idx[~improved]
        lam[rej] = np.minimum(lam[rej] * 10.0, 1e8)
        # stuck branches with huge damping will not move again; let the loop end

    return p.reshape(P, C, n), rnorm.reshape(P, C)


def _lexicographic_pick(momenta: np.ndarray) -> int:
    """Index of the lexicographically smallest row (value order, not arrival)."""
    order = np.lexsort(momenta.T[::-1])
    return int(order[0])


def _rescue_stalled(
    manifold: Manifold,
    x: np.ndarray,
    y: np.ndarray,
    cands: np.ndarray,
    rnorm: np.ndarray,
    cfg: ShootingConfig,
    keep: int = 4,
) -> np.ndarray:
    """Trust-region fallback for pairs where damped Gauss-Newton stalled.

    Polishes the `keep` best candidates with scipy's Levenberg-Marquardt
    (which handles near-singular Jacobian directions), writing refined
    momenta and residuals back into `cands` / `rnorm` in place.  Returns the
    indices that now meet ``cfg.bvp_tol``.
    """
    from scipy.optimize import least_squares

    x1 = x[None, :]

    def residual(p: np.ndarray) -> np.ndarray:
        r = _endpoints(manifold, x1, p[None, :], cfg.steps, cfg)[0] - y
        # keep the solver alive when a trial momentum escapes the chart
        return np.nan_to_num(r, nan=1e6, posinf=1e6, neginf=-1e6)

    order = np.argsort(rnorm)[:keep]
    for idx in order:
        if not (np.all(np.isfinite(cands[idx])) and np.isfinite(rnorm[idx])):
            continue
        sol = least_squares(
            residual, cands[idx], method="trf", x_scale="jac",
            xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=300,
        )
        res = float(np.linalg.norm(sol.fun))
        if res < rnorm[idx]:
            cands[idx] = sol.x
            rnorm[idx] = res
    return np.nonzero(rnorm <= cfg.bvp_tol)[0]


def connect_batch(
    manifold: Manifold,
    X: np.ndarray,
    Y: np.ndarray,
    cfg: ShootingConfig | None = None,
) -> list[GeodesicPath]:
    """Minimal connecting geodesics for each row pair (X[k], Y[k]).

    Deterministic: the minimizer, and the tie-break among equal-energy
    minimizers, depend only on the pair, never on batch layout.
    Raises ConnectionFailure naming the first failing pair.
    """
    cfg = cfg or ShootingConfig()
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape != Y.shape or X.shape[1] != manifold.chart_dim:
        raise ValueError("endpoint arrays must both be (P, chart_dim)")
    P, n = X.shape
    results: list[GeodesicPath | None] = [None] * P

    same = np.all(X == Y, axis=1)
    for k in np.nonzero(same)[0]:
        results[k] = constant_path(manifold, Point(X[k]), cfg.steps)

    todo = np.nonzero(~same)[0]
    if todo.size:
        Xs, Ys = X[todo], Y[todo]
        seeds, group = _build_seeds(manifold, Xs, Ys, cfg)
        starts = _screen_seeds(manifold, Xs, Ys, seeds, group, cfg)
        # bulk Newton at coarse resolution, then a short full-resolution pass
        momenta, _ = _refine(manifold, Xs, Ys, starts, cfg, steps=cfg.coarse_steps)
        momenta, rnorm = _refine(manifold, Xs, Ys, momenta, cfg, max_iter=8)
        # candidates stalled close to the target are usually crawling along a
        # nearly singular direction (conjugate-point basins); give just those
        # a longer leash so no low-energy basin is lost
        closing = (rnorm > cfg.bvp_tol) & (rnorm < 1e-2)
        if np.any(closing):
            ip, ic = np.nonzero(closing)
            m2, r2 = _refine(
                manifold, Xs[ip], Ys[ip], momenta[ip, ic][:, None, :], cfg,
                max_iter=cfg.max_newton,
            )
            momenta[ip, ic] = m2[:, 0, :]
            rnorm[ip, ic] = r2[:, 0]

        chosen = np.empty((todo.size, n))
        for j in range(todo.size):
            ok = np.nonzero(rnorm[j] <= cfg.bvp_tol)[0]
            if ok.size == 0:
                # the endpoint map can be nearly flat along some momentum
                # direction (e.g. vertical momentum for nearly coincident
                # pairs); fall back to a trust-region solve from the best
                # stalled candidates
                ok = _rescue_stalled(manifold, Xs[j], Ys[j], momenta[j], rnorm[j], cfg)
            if ok.size == 0:
                raise ConnectionFailure(
                    float(np.min(rnorm[j])), pair_index=int(todo[j])
                )
            cands = momenta[j, ok]
            frame = manifold.frame(Xs[j])           # (m, n)
            u = cands @ frame.T
            energies = np.einsum("cm,cm->c", u, u)  # 2 H(lam0)
            best = float(np.min(energies))
            tol = cfg.energy_tol * max(best, 1.0)
            tied = np.nonzero(energies <= best + tol)[0]
            chosen[j] = cands[tied[_lexicographic_pick(cands[tied])]]

        # polish the winners well past bvp_tol so energies carry full accuracy
        chosen, _ = _refine(
            manifold, Xs, Ys, chosen[:, None, :], cfg,
            tol=cfg.polish_tol, max_iter=12,
        )
        chosen = chosen[:, 0, :]

        # one full-resolution trajectory per solved pair
        xs, ps = integrate_flow(
            manifold, Xs, chosen, cfg.steps, keep_trajectory=True,
            chart_bound=cfg.chart_bound,
        )
        # endpoint contract: the returned path ends exactly at the requested
        # target (the integrated point is within polish_tol of it already)
        xs[-1] = Ys
        for j, k in enumerate(todo):
            results[k] = _path_from_trajectory(manifold, xs[:, j], ps[:, j], cfg.steps)

    return results  # type: ignore[return-value]


def connect(manifold: Manifold, x: Point, y: Point, cfg: ShootingConfig | None = None) -> GeodesicPath:
    """The selection map S: the minimal geodesic from x to y (constant path
    when x == y), with deterministic lexicographic tie-breaking."""
    manifold.check_point(x)
    manifold.check_point(y)
    return connect_batch(manifold, x.coords[None, :], y.coords[None, :], cfg)[0]


def distance(manifold: Manifold, x: Point, y: Point, cfg: ShootingConfig | None = None) -> float:
    """Sub-Riemannian distance d(x, y) = sqrt(minimal connecting energy)."""
    if np.array_equal(x.coords, y.coords):
        return 0.0
    return float(np.sqrt(connect(manifold, x, y, cfg).energy))


def distance_matrix(
    manifold: Manifold,
    xs: np.ndarray,
    ys: np.ndarray,
    cfg: ShootingConfig | None = None,
    return_paths: bool = False,
):
    """All-pairs distances between two point clouds, solved in one batch.

    Returns (D, paths) when return_paths is set, where paths[i][j] is the
    connecting geodesic; otherwise just the (len(xs), len(ys)) matrix.
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    I, J = xs.shape[0], ys.shape[0]
    pair_x = np.repeat(xs, J, axis=0)
    pair_y = np.tile(ys, (I, 1))
    try:
        paths = connect_batch(manifold, pair_x, pair_y, cfg)
    except ConnectionFailure as exc:
        if exc.pair_index is not None:
            i, j = divmod(exc.pair_index, J)
            raise ConnectionFailure(
                exc.best_residual, pair_index=exc.pair_index,
                context=f"cost entry ({i}, {j})",
            ) from exc
        raise
    D = np.array([np.sqrt(p.energy) for p in paths]).reshape(I, J)
    if return_paths:
        grid = [[paths[i * J + j] for j in range(J)] for i in range(I)]
        return D, grid
    return D


def geodesic_sup_distance(
    a: GeodesicPath, b: GeodesicPath, cfg: ShootingConfig | None = None
) -> float:
    """sup_t d(a(t), b(t)) over the shared sample grid."""
    if a.times.shape != b.times.shape or not np.array_equal(a.times, b.times):
        raise ValueError("paths must share the same time grid")
    manifold = a.manifold
    diff = np.any(a.points != b.points, axis=1)
    if not np.any(diff):
        return 0.0
    paths = connect_batch(manifold, a.points[diff], b.points[diff], cfg)
    return float(max(np.sqrt(p.energy) for p in paths))


@dataclass(frozen=True)
class ChowReport:
    """Outcome of the finite-distance smoke test on random pairs."""

    total: int
    successes: int
    worst_residual: float
    failures: tuple[int, ...] = ()

    @property
    def success_rate(self) -> float:
        return 1.0 if self.total == 0 else self.successes / self.total


def chow_connectivity_check(
    manifold: Manifold,
    sample_pairs: Sequence[tuple[Point, Point]],
    cfg: ShootingConfig | None = None,
) -> ChowReport:
    """Try to connect every pair; failures become report entries, not errors."""
    cfg = cfg or ShootingConfig()
    if not sample_pairs:
        return ChowReport(total=0, successes=0, worst_residual=0.0)
    successes = 0
    worst = 0.0
    failures = []
    for k, (x, y) in enumerate(sample_pairs):
        try:
            path = connect(manifold, x, y, cfg)
            res = float(np.linalg.norm(path.points[-1] - y.coords))
            worst = max(worst, res)
            successes += 1
        except ConnectionFailure as exc:
            worst = max(worst, exc.best_residual)
            failures.append(k)
    return ChowReport(
        total=len(sample_pairs),
        successes=successes,
        worst_residual=worst,
        failures=tuple(failures),
    )
