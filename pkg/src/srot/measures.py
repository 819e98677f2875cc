"""Discrete measures, couplings, and discretized Young transport measures.

The transport-measure data model is decomposition-first: a measure is stored
as a weighted finite set of generalized curves (each a sampled curve with a
per-time velocity law over the horizontal space), and the Young measure on
I x HM is derived.  With this representation the superposition principle is
true by construction and is checked as a cheap consistency property rather
than established by disintegration machinery.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from srot.geodesics import GeodesicPath
from srot.manifolds import HorizontalVector, Manifold, Point

__all__ = [
    "WEIGHT_TOL",
    "MARGINAL_TOL",
    "MERGE_TOL",
    "BARYCENTER_TOL",
    "DiscreteMeasure",
    "Plan",
    "GeneralizedCurve",
    "TransportMeasure",
    "marginal_path",
    "marginal_from_samples",
    "averaged_field",
]

WEIGHT_TOL = 1e-12      # probability normalization
MARGINAL_TOL = 1e-10    # plan admissibility
MERGE_TOL = 1e-12       # chart distance below which atoms coincide
BARYCENTER_TOL = 1e-6   # velocity-law barycenter vs curve velocity


class MeasureValidationError(ValueError):
    """A measure, plan, or transport measure violates an invariant."""


@dataclass(frozen=True)
class DiscreteMeasure:
    """A probability measure given by weighted atoms in chart coordinates."""

    points: np.ndarray   # (k, n)
    weights: np.ndarray  # (k,)

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        w = np.asarray(self.weights, dtype=float).ravel()
        if pts.shape[0] != w.shape[0]:
            raise MeasureValidationError(
                f"{pts.shape[0]} atoms but {w.shape[0]} weights"
            )
        if pts.shape[0] == 0:
            raise MeasureValidationError("a measure needs at least one atom")
        if not np.all(np.isfinite(pts)):
            raise MeasureValidationError("atom coordinates must be finite")
        if np.any(w <= 0):
            raise MeasureValidationError("atom weights must be positive")
        if abs(w.sum() - 1.0) > WEIGHT_TOL * max(1, w.size):
            raise MeasureValidationError(
                f"weights sum to {w.sum():.15f}, not 1"
            )
        pts.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def atoms(self) -> Iterable[tuple[Point, float]]:
        for p, w in zip(self.points, self.weights):
            yield Point(p), float(w)

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        return self.points.min(axis=0), self.points.max(axis=0)

    @staticmethod
    def dirac(point) -> "DiscreteMeasure":
        coords = point.coords if isinstance(point, Point) else np.asarray(point, float)
        return DiscreteMeasure(coords[None, :], np.array([1.0]))


@dataclass(frozen=True)
class Plan:
    """A coupling of two discrete measures as sparse (i, j, weight) entries."""

    rows: np.ndarray      # (E,) indices into mu0 atoms
    cols: np.ndarray      # (E,) indices into mu1 atoms
    weights: np.ndarray   # (E,)

    def __post_init__(self):
        i = np.asarray(self.rows, dtype=int).ravel()
        j = np.asarray(self.cols, dtype=int).ravel()
        w = np.asarray(self.weights, dtype=float).ravel()
        if not (i.shape == j.shape == w.shape):
            raise MeasureValidationError("plan index/weight arrays differ in length")
        if np.any(w < 0):
            raise MeasureValidationError("plan weights must be nonnegative")
        for a in (i, j, w):
            a.flags.writeable = False
        object.__setattr__(self, "rows", i)
        object.__setattr__(self, "cols", j)
        object.__setattr__(self, "weights", w)

    @property
    def size(self) -> int:
        return self.rows.shape[0]

    def entries(self) -> Iterable[tuple[int, int, float]]:
        for i, j, w in zip(self.rows, self.cols, self.weights):
            yield int(i), int(j), float(w)

    def row_marginal(self, k: int) -> np.ndarray:
        return np.bincount(self.rows, weights=self.weights, minlength=k)

    def col_marginal(self, k: int) -> np.ndarray:
        return np.bincount(self.cols, weights=self.weights, minlength=k)

    def check_admissible(self, mu0: DiscreteMeasure, mu1: DiscreteMeasure) -> None:
        if self.size and (self.rows.max() >= mu0.size or self.cols.max() >= mu1.size):
            raise MeasureValidationError("plan indices out of range")
        r = self.row_marginal(mu0.size)
        c = self.col_marginal(mu1.size)
        dr = float(np.max(np.abs(r - mu0.weights)))
        dc = float(np.max(np.abs(c - mu1.weights)))
        if dr > MARGINAL_TOL or dc > MARGINAL_TOL:
            raise MeasureValidationError(
                f"plan marginals violated: row {dr:.3e}, col {dc:.3e}"
            )

    def cost(self, cost_values: np.ndarray) -> float:
        """Transport cost of the plan against a dense (k0, k1) cost array."""
        C = np.asarray(cost_values, dtype=float)
        return float(np.sum(self.weights * C[self.rows, self.cols]))

    def canonical(self) -> "Plan":
        """Entries sorted by (row, col); duplicate cells summed."""
        if self.size == 0:
            return self
        keys = {}
        for i, j, w in self.entries():
            keys[(i, j)] = keys.get((i, j), 0.0) + w
        items = sorted(keys.items())
        i = np.array([k[0] for k, _ in items], dtype=int)
        j = np.array([k[1] for k, _ in items], dtype=int)
        w = np.array([v for _, v in items])
        return Plan(i, j, w)

    @staticmethod
    def identity(mu: DiscreteMeasure) -> "Plan":
        idx = np.arange(mu.size)
        return Plan(idx, idx, mu.weights.copy())


def _merge_groups(points: np.ndarray, tol: float) -> list[list[int]]:
    """Group indices of chart-coincident points (within tol, transitively)."""
    k = points.shape[0]
    groups: list[list[int]] = []
    reps: list[np.ndarray] = []
    for idx in range(k):
        placed = False
        for g, rep in enumerate(reps):
            if np.linalg.norm(points[idx] - rep) <= tol:
                groups[g].append(idx)
                placed = True
                break
        if not placed:
            groups.append([idx])
            reps.append(points[idx])
    return groups


@dataclass(frozen=True)
class GeneralizedCurve:
    """A sampled curve together with a per-time velocity law.

    law_vectors (N+1, K, m) and law_probs (N+1, K) discretize the probability
    over the horizontal space at each sample time; its barycenter must be the
    curve velocity (frame coefficients), which makes the curve "generalized"
    in the Young-measure sense.  Plain geodesic curves carry a dirac law
    (K = 1).
    """

    times: np.ndarray        # (N+1,)
    points: np.ndarray       # (N+1, n)
    velocities: np.ndarray   # (N+1, m) frame coefficients of the curve velocity
    law_vectors: np.ndarray  # (N+1, K, m)
    law_probs: np.ndarray    # (N+1, K)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        pts = np.asarray(self.points, dtype=float)
        vel = np.asarray(self.velocities, dtype=float)
        lv = np.asarray(self.law_vectors, dtype=float)
        lp = np.asarray(self.law_probs, dtype=float)
        N1 = t.shape[0]
        if pts.shape[0] != N1 or vel.shape[0] != N1 or lv.shape[0] != N1 or lp.shape[0] != N1:
            raise MeasureValidationError("curve sample arrays disagree in length")
        if np.any(np.abs(lp.sum(axis=1) - 1.0) > WEIGHT_TOL * max(1, lp.shape[1])):
            raise MeasureValidationError("velocity-law probabilities must sum to 1 at every time")
        bary = np.einsum("tkm,tk->tm", lv, lp)
        if np.max(np.abs(bary - vel)) > BARYCENTER_TOL:
            raise MeasureValidationError(
                "velocity-law barycenter deviates from the curve velocity by "
                f"{np.max(np.abs(bary - vel)):.3e}"
            )
        for a in (t, pts, vel, lv, lp):
            a.flags.writeable = False
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "velocities", vel)
        object.__setattr__(self, "law_vectors", lv)
        object.__setattr__(self, "law_probs", lp)

    @staticmethod
    def from_path(path: GeodesicPath) -> "GeneralizedCurve":
        """Dirac velocity law concentrated on the geodesic's own velocity."""
        return GeneralizedCurve(
            times=path.times,
            points=path.points,
            velocities=path.velocities,
            law_vectors=path.velocities[:, None, :],
            law_probs=np.ones((path.times.shape[0], 1)),
        )

    @property
    def start(self) -> Point:
        return Point(self.points[0])

    @property
    def end(self) -> Point:
        return Point(self.points[-1])

    def relaxed_energy(self) -> float:
        """Trapezoid quadrature of the second moment of the velocity law."""
        second = np.einsum("tkm,tkm,tk->t", self.law_vectors, self.law_vectors, self.law_probs)
        return float(np.trapezoid(second, self.times))

    def kinetic_energy(self) -> float:
        """Trapezoid quadrature of the squared curve speed."""
        sq = np.einsum("tm,tm->t", self.velocities, self.velocities)
        return float(np.trapezoid(sq, self.times))

    def horizontality_residual(self, manifold: Manifold) -> float:
        """Reconstructed chart velocity vs finite differences of the samples.

        The stored velocity lives in frame coefficients, so horizontality is
        structural; this checks the coefficients actually differentiate the
        sampled points.
        """
        frame = manifold.frame(self.points)                    # (N+1, m, n)
        chart_v = (self.velocities[:, None, :] @ frame)[:, 0, :]
        dt = self.times[1] - self.times[0]
        fd = np.gradient(self.points, dt, axis=0, edge_order=2)
        return float(np.max(np.abs(chart_v - fd)))


@dataclass(frozen=True)
class TransportMeasure:
    """A discretized Young transport measure, stored as its decomposition."""

    curves: tuple[GeneralizedCurve, ...]
    weights: np.ndarray
    time_grid: np.ndarray
    validate: bool = True

    def __post_init__(self):
        curves = tuple(self.curves)
        w = np.asarray(self.weights, dtype=float).ravel()
        grid = np.asarray(self.time_grid, dtype=float)
        if len(curves) == 0:
            raise MeasureValidationError("a transport measure needs at least one curve")
        if len(curves) != w.shape[0]:
            raise MeasureValidationError("curve/weight count mismatch")
        if self.validate:
            if np.any(w <= 0):
                raise MeasureValidationError("curve weights must be positive")
            if abs(w.sum() - 1.0) > WEIGHT_TOL * max(1, w.size):
                raise MeasureValidationError(f"curve weights sum to {w.sum():.15f}, not 1")
            for c in curves:
                if c.times.shape != grid.shape or not np.array_equal(c.times, grid):
                    raise MeasureValidationError("curves must share the common time grid")
        w.flags.writeable = False
        grid.flags.writeable = False
        object.__setattr__(self, "curves", curves)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "time_grid", grid)

    @property
    def size(self) -> int:
        return len(self.curves)

    def with_weights(self, weights: np.ndarray, validate: bool = True) -> "TransportMeasure":
        return TransportMeasure(self.curves, weights, self.time_grid, validate=validate)


def marginal_path(eta: TransportMeasure, t_index: int, merge_tol: float = MERGE_TOL) -> DiscreteMeasure:
    """The time-t marginal on the base manifold: push every curve's weight to
    its position at sample t_index, merging chart-coincident atoms."""
    pts = np.stack([c.points[t_index] for c in eta.curves])
    groups = _merge_groups(pts, merge_tol)
    out_p = np.stack([pts[g[0]] for g in groups])
    out_w = np.array([float(eta.weights[g].sum()) for g in [np.array(g) for g in groups]])
    return DiscreteMeasure(out_p, out_w)


def marginal_from_samples(eta: TransportMeasure, t_index: int, merge_tol: float = MERGE_TOL) -> DiscreteMeasure:
    """The same marginal computed from the flattened (t, v) samples of the
    derived Young measure instead of from the decomposition; used to assert
    the superposition identity."""
    pts = []
    ws = []
    for c, w in zip(eta.curves, eta.weights):
        probs = c.law_probs[t_index]
        for k in range(probs.shape[0]):
            pts.append(c.points[t_index])
            ws.append(w * probs[k])
    pts = np.stack(pts)
    ws = np.array(ws)
    groups = _merge_groups(pts, merge_tol)
    out_p = np.stack([pts[g[0]] for g in groups])
    out_w = np.array([float(ws[np.array(g)].sum()) for g in groups])
    return DiscreteMeasure(out_p, out_w)


def averaged_field(
    eta: TransportMeasure, t_index: int, merge_tol: float = MERGE_TOL
) -> list[tuple[Point, HorizontalVector, float]]:
    """The barycentric velocity field at sample time t_index.

    For each distinct point mass, the weight-average over all velocity-law
    samples of all curves sitting there.  This is the pair (mu_t, v_t) the
    relaxed measure induces.
    """
    pts = np.stack([c.points[t_index] for c in eta.curves])
    groups = _merge_groups(pts, merge_tol)
    out = []
    for g in groups:
        total = float(eta.weights[np.array(g)].sum())
        m = eta.curves[g[0]].law_vectors.shape[2]
        vbar = np.zeros(m)
        for idx in g:
            c = eta.curves[idx]
            w = eta.weights[idx]
            vbar += w * np.einsum("km,k->m", c.law_vectors[t_index], c.law_probs[t_index])
        vbar /= total
        pt = Point(pts[g[0]])
        out.append((pt, HorizontalVector(pt, vbar), total))
    return out
