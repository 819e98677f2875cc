"""Compactly supported space-time test functions with analytic derivatives.

The weak continuity equation quantifies over all smooth compactly supported
functions; at desk scale we ship a fixed finite detector family.  Each
function is a product of a polynomial time profile and a spatial factor, with
time derivative and Euclidean spatial gradient supplied analytically (the
horizontal gradient is obtained downstream by pairing with the frame).

Quadrature behavior is engineered deliberately:

* interior-class profiles vanish to high order at t in {0, 1}, so the
  trapezoid rule integrates d/dt[phi(t, curve(t))] far below the h^2 level
  (all low-order Euler-Maclaurin boundary terms vanish);
* closed-class profiles use a smoothstep whose first two derivatives vanish
  at the endpoints; combined with plateau spatial factors that are constant
  on the working region the residual is dominated by the boundary terms,
  which is what makes them sharp detectors of endpoint/weight mismatches;
* one closed function carries a gentle linear tilt so a genuine O(h^2)
  quadrature error is observable and its decay under grid refinement can be
  asserted.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from srot.manifolds import Manifold
from srot.measures import DiscreteMeasure

__all__ = ["TestFunction", "default_test_basis"]

INTERIOR = "interior"
CLOSED = "closed"


@dataclass(frozen=True)
class TestFunction:
    """phi(t, x) with analytic d/dt and horizontal gradient, batched.

    value/dt/grad/grad_h accept t of shape (T,) and x of shape (T, n); grad
    is the chart gradient (T, n), grad_h the frame coefficients (T, m) with
    the manifold's frame baked in at construction.  klass is "interior"
    (vanishing at t in {0,1}) or "closed" (allowed nonzero there).
    """

    name: str
    klass: str
    value: Callable[[np.ndarray, np.ndarray], np.ndarray]
    dt: Callable[[np.ndarray, np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray, np.ndarray], np.ndarray]
    grad_h: Callable[[np.ndarray, np.ndarray], np.ndarray]
    support_lo: np.ndarray
    support_hi: np.ndarray


# -- time profiles ----------------------------------------------------------


def _interior_profile():
    # 256 t^4 (1-t)^4: value and first three derivatives vanish at both ends,
    # which pushes the trapezoid boundary error below every stated tolerance
    def tau(t):
        return 256.0 * t**4 * (1.0 - t) ** 4

    def dtau(t):
        return 1024.0 * t**3 * (1.0 - t) ** 3 * (1.0 - 2.0 * t)

    return tau, dtau


def _smoothstep_profile():
    # 10 t^3 - 15 t^4 + 6 t^5: rises 0 -> 1 with vanishing first and second
    # derivatives at both endpoints
    def sigma(t):
        return t**3 * (10.0 - 15.0 * t + 6.0 * t * t)

    def dsigma(t):
        return 30.0 * t**2 * (1.0 - t) ** 2

    return sigma, dsigma


# -- spatial factors --------------------------------------------------------


def _quintic_falloff(s: np.ndarray) -> np.ndarray:
    s = np.clip(s, 0.0, 1.0)
    return 1.0 - s**3 * (10.0 - 15.0 * s + 6.0 * s * s)


def _quintic_falloff_deriv(s: np.ndarray) -> np.ndarray:
    inside = (s >= 0.0) & (s <= 1.0)
    s = np.clip(s, 0.0, 1.0)
    return np.where(inside, -30.0 * s**2 * (1.0 - s) ** 2, 0.0)


def _radial_bump(center: np.ndarray, radius: float, amplitude: float):
    """amplitude * q(r / radius) with q the quintic falloff (C^2 everywhere)."""
    c = np.asarray(center, dtype=float)

    def value(x):
        r = np.linalg.norm(x - c, axis=-1)
        return amplitude * _quintic_falloff(r / radius)

    def grad(x):
        d = x - c
        r = np.linalg.norm(d, axis=-1)
        s = r / radius
        # q'(s)/s is smooth through s = 0
        qp_over_s = np.where(
            s > 0, _quintic_falloff_deriv(np.clip(s, 0, 1)) / np.where(s > 0, s, 1.0), 0.0
        )
        return amplitude * (qp_over_s / radius**2)[..., None] * d

    return value, grad


def _plateau_bump(center: np.ndarray, r_flat: float, r_zero: float, amplitude: float):
    """Constant amplitude inside r_flat, quintic falloff to zero at r_zero."""
    c = np.asarray(center, dtype=float)
    width = r_zero - r_flat

    def value(x):
        r = np.linalg.norm(x - c, axis=-1)
        return amplitude * _quintic_falloff((r - r_flat) / width)

    def grad(x):
        d = x - c
        r = np.linalg.norm(d, axis=-1)
        s = (r - r_flat) / width
        active = (s > 0.0) & (s < 1.0) & (r > 0)
        qp = np.where(active, _quintic_falloff_deriv(np.clip(s, 0, 1)), 0.0)
        scale = amplitude * qp / (width * np.where(r > 0, r, 1.0))
        return scale[..., None] * d

    return value, grad


def _tilted_plateau(center: np.ndarray, r_flat: float, r_zero: float,
                    base: float, slope: float, axis: int):
    """(base + slope * (x_axis - c_axis)) * plateau: gentle genuine spatial
    variation on the working region, still compactly supported."""
    c = np.asarray(center, dtype=float)
    pv, pg = _plateau_bump(center, r_flat, r_zero, 1.0)

    def lin(x):
        return base + slope * (x[..., axis] - c[axis])

    def value(x):
        return lin(x) * pv(x)

    def grad(x):
        g = pg(x) * lin(x)[..., None]
        g[..., axis] += slope * pv(x)
        return g

    return value, grad


def _product(manifold, name, klass, tprof, dtprof, sval, sgrad, lo, hi) -> TestFunction:
    def value(t, x):
        return tprof(np.asarray(t, dtype=float)) * sval(np.asarray(x, dtype=float))

    def dt(t, x):
        return dtprof(np.asarray(t, dtype=float)) * sval(np.asarray(x, dtype=float))

    def grad(t, x):
        return tprof(np.asarray(t, dtype=float))[..., None] * sgrad(np.asarray(x, dtype=float))

    def grad_h(t, x):
        g = grad(t, x)
        frame = manifold.frame(np.asarray(x, dtype=float))
        return (frame @ g[..., None])[..., 0]

    return TestFunction(
        name=name, klass=klass, value=value, dt=dt, grad=grad, grad_h=grad_h,
        support_lo=np.asarray(lo, dtype=float), support_hi=np.asarray(hi, dtype=float),
    )


def default_test_basis(
    manifold: Manifold,
    mu0: DiscreteMeasure,
    mu1: DiscreteMeasure,
    spread: float,
) -> list[TestFunction]:
    """Twelve detectors adapted to the supports: six interior radial bumps on
    a support-covering grid, six closed smoothstep functions (plateaus and a
    tilted plateau) wide enough to be flat on the region reachable by curves.

    spread: an upper bound on the distance between the two supports; curves
    of admissible transport measures stay within that reach, so plateaus of
    radius ~ box + spread are constant along every curve.
    """
    lo = np.minimum(mu0.points.min(axis=0), mu1.points.min(axis=0))
    hi = np.maximum(mu0.points.max(axis=0), mu1.points.max(axis=0))
    center = 0.5 * (lo + hi)
    half = 0.5 * float(np.max(hi - lo))
    n = lo.shape[0]

    # every point of every admissible curve lies within this chart radius
    # (chart displacement along a curve of speed d is at most d + quadratic
    # drift in the vertical coordinates; double generously)
    reach = half + 2.0 * (spread + spread * spread) + 1.0

    tau, dtau = _interior_profile()
    sigma, dsigma = _smoothstep_profile()

    basis: list[TestFunction] = []

    # interior class: radial bumps at the box center and offset centers
    radius = max(2.0 * half, 1.0) + spread
    offsets = [np.zeros(n)]
    for k in range(min(n, 3)):
        e = np.zeros(n)
        e[k] = 0.35 * max(half, 0.5)
        offsets.append(e)
        offsets.append(-e)
    for idx, off in enumerate(offsets[:6]):
        sval, sgrad = _radial_bump(center + off, radius + spread, 1.0)
        basis.append(
            _product(
                manifold, f"interior_bump_{idx}", INTERIOR, tau, dtau, sval, sgrad,
                center + off - (radius + spread), center + off + (radius + spread),
            )
        )

    # closed class: flat plateaus (sharp boundary detectors) ...
    pv, pg = _plateau_bump(center, reach, 2.0 * reach, 0.5)
    basis.append(_product(manifold, "closed_plateau_up", CLOSED, sigma, dsigma, pv, pg,
                          center - 2 * reach, center + 2 * reach))
    basis.append(_product(manifold, "closed_plateau_down", CLOSED,
                          lambda t: 1.0 - sigma(t), lambda t: -dsigma(t),
                          pv, pg, center - 2 * reach, center + 2 * reach))
    # ... a medium plateau localized nearer the supports
    pv2, pg2 = _plateau_bump(center, 0.5 * reach, 2.0 * reach, 0.5)
    basis.append(_product(manifold, "closed_plateau_near", CLOSED, sigma, dsigma, pv2, pg2,
                          center - 2 * reach, center + 2 * reach))
    # ... and gently tilted plateaus: genuine O(h^2) quadrature content
    for k in range(min(n, 3)):
        tv, tg = _tilted_plateau(center, reach, 2.0 * reach, 0.4, 0.02, k)
        basis.append(_product(manifold, f"closed_tilt_{k}", CLOSED, sigma, dsigma, tv, tg,
                              center - 2 * reach, center + 2 * reach))

    return basis[:12]
