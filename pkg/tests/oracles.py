"""Independent oracles used by the test suite.

Everything here deliberately avoids the library's own solvers:

* the static-transport oracle enumerates permutation matrices (optimal for
  equal-weight marginals by Birkhoff's theorem);
* the distance oracle integrates hand-written Hamilton equations for the
  Heisenberg group with its own RK4 and solves the boundary problem by a
  dense momentum grid plus MINPACK (scipy least_squares), no code shared
  with the shooting solver.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import least_squares


def permutation_cost(cost: np.ndarray) -> float:
    """Minimal uniform-marginal transport cost by brute-force enumeration."""
    C = np.asarray(cost, dtype=float)
    k = C.shape[0]
    assert C.shape == (k, k)
    best = np.inf
    for perm in itertools.permutations(range(k)):
        value = sum(C[i, perm[i]] for i in range(k)) / k
        best = min(best, value)
    return best


# -- Heisenberg Hamilton equations, written out by hand ---------------------
#
# H(x, p) = 1/2 [ (p1 - y/2 p3)^2 + (p2 + x/2 p3)^2 ]
# u1 = p1 - y/2 p3, u2 = p2 + x/2 p3
# dx = u1, dy = u2, dz = -y/2 u1 + x/2 u2
# dp1 = -u2 p3 / 2, dp2 = u1 p3 / 2, dp3 = 0


def _h1_rhs(state: np.ndarray) -> np.ndarray:
    x, y, z, p1, p2, p3 = (state[..., i] for i in range(6))
    u1 = p1 - 0.5 * y * p3
    u2 = p2 + 0.5 * x * p3
    out = np.empty_like(state)
    out[..., 0] = u1
    out[..., 1] = u2
    out[..., 2] = -0.5 * y * u1 + 0.5 * x * u2
    out[..., 3] = -0.5 * u2 * p3
    out[..., 4] = 0.5 * u1 * p3
    out[..., 5] = 0.0
    return out


def h1_flow(x0: np.ndarray, p0: np.ndarray, steps: int = 128) -> np.ndarray:
    """Endpoint of the unit-time Hamiltonian flow, batched over momenta."""
    p0 = np.atleast_2d(p0)
    state = np.concatenate([np.broadcast_to(x0, (p0.shape[0], 3)).copy(), p0], axis=1)
    h = 1.0 / steps
    for _ in range(steps):
        k1 = _h1_rhs(state)
        k2 = _h1_rhs(state + 0.5 * h * k1)
        k3 = _h1_rhs(state + 0.5 * h * k2)
        k4 = _h1_rhs(state + h * k3)
        state = state + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return state


def _h1_energy(x0: np.ndarray, p0: np.ndarray) -> float:
    u1 = p0[0] - 0.5 * x0[1] * p0[2]
    u2 = p0[1] + 0.5 * x0[0] * p0[2]
    return float(u1 * u1 + u2 * u2)


def h1_distance_oracle(x0, y0, steps: int = 128) -> float:
    """Dense-grid shooting for d(x0, y0) on the Heisenberg group.

    A product grid of initial momenta (horizontal directions x magnitudes x
    vertical momenta covering one full winding) is screened by endpoint
    mismatch; the best candidates per vertical region are polished with
    MINPACK.  Returns sqrt(2H) of the cheapest converged solution.
    """
    x0 = np.asarray(x0, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    if np.array_equal(x0, y0):
        return 0.0

    dxy = np.linalg.norm(y0[:2] - x0[:2])
    delta = (y0[2] - x0[2]) - 0.5 * (
        x0[0] * (y0[1] - x0[1]) - x0[1] * (y0[0] - x0[0])
    )
    reach = dxy + np.sqrt(4.0 * np.pi * abs(delta)) + 0.2

    theta = np.linspace(0.0, 2 * np.pi, 16, endpoint=False)
    mags = reach * np.array([0.35, 0.7, 1.0, 1.3])
    verts = np.linspace(-4.0 * np.pi, 4.0 * np.pi, 33)

    # convert prescribed (u1, u2, p3) at the start point into chart momenta
    def to_momenta(u1, u2, p3):
        return np.array([u1 + 0.5 * x0[1] * p3, u2 - 0.5 * x0[0] * p3, p3])

    grid = np.array(
        [
            to_momenta(m * np.cos(t), m * np.sin(t), v)
            for t in theta
            for m in mags
            for v in verts
        ]
    )
    ends = h1_flow(x0, grid, steps=64)[:, :3]
    mismatch = np.linalg.norm(ends - y0, axis=1)

    # keep the best candidate in each vertical-momentum region
    order = np.argsort(mismatch)
    picked = []
    for idx in order:
        v = grid[idx, 2]
        if all(abs(v - grid[j, 2]) > 0.5 for j in picked):
            picked.append(idx)
        if len(picked) >= 6:
            break

    def residual(p):
        return h1_flow(x0, p[None, :], steps=steps)[0, :3] - y0

    best = np.inf
    for idx in picked:
        sol = least_squares(residual, grid[idx], method="lm", xtol=1e-12, ftol=1e-12)
        if np.linalg.norm(sol.fun) < 1e-8:
            best = min(best, _h1_energy(x0, sol.x))
    assert np.isfinite(best), "oracle failed to connect the pair"
    return float(np.sqrt(best))
