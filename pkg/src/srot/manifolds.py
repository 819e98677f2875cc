"""Sub-Riemannian structures on a single global chart.

A manifold here is a chart R^n together with an orthonormal horizontal frame
X_1..X_m.  The frame being orthonormal pins the metric down completely, so the
geodesic Hamiltonian is H(x, p) = 1/2 sum_i <p, X_i(x)>^2 and no metric-matrix
plumbing is needed.  Shipped instances: the first Heisenberg group H^1 and
Euclidean R^n (the cross-check baseline with closed-form distances).

Frame evaluation is vectorized over batches of points; everything downstream
(the Hamiltonian flow, the shooting solver) relies on that.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "Point",
    "Covector",
    "HorizontalVector",
    "ScalarField",
    "Manifold",
    "heisenberg",
    "euclidean",
    "by_name",
    "hamiltonian",
]


def _as_finite_vector(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a flat vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries: {arr}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Point:
    """A point in chart coordinates."""

    coords: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coords", _as_finite_vector(self.coords, "coords"))

    @property
    def dim(self) -> int:
        return self.coords.shape[0]

    def __iter__(self):
        return iter(self.coords)


@dataclass(frozen=True)
class Covector:
    """A cotangent vector (base point, momenta) in chart coordinates."""

    base: Point
    momenta: np.ndarray

    def __post_init__(self):
        if not isinstance(self.base, Point):
            object.__setattr__(self, "base", Point(np.asarray(self.base, dtype=float)))
        object.__setattr__(self, "momenta", _as_finite_vector(self.momenta, "momenta"))
        if self.momenta.shape[0] != self.base.dim:
            raise ValueError(
                f"momenta length {self.momenta.shape[0]} != chart dimension {self.base.dim}"
            )


@dataclass(frozen=True)
class HorizontalVector:
    """A horizontal tangent vector expressed in frame coefficients.

    The frame is orthonormal, so ||v||^2 is just the sum of squared
    coefficients.
    """

    base: Point
    frame_coeffs: np.ndarray

    def __post_init__(self):
        if not isinstance(self.base, Point):
            object.__setattr__(self, "base", Point(np.asarray(self.base, dtype=float)))
        object.__setattr__(
            self, "frame_coeffs", _as_finite_vector(self.frame_coeffs, "frame_coeffs")
        )

    @property
    def norm_sq(self) -> float:
        return float(np.dot(self.frame_coeffs, self.frame_coeffs))

    @property
    def norm(self) -> float:
        return float(np.sqrt(self.norm_sq))


@dataclass(frozen=True)
class ScalarField:
    """A smooth scalar function on the chart with its analytic gradient.

    Analytic derivatives are supplied alongside the value; no symbolic
    differentiation happens anywhere in the library.
    """

    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Manifold:
    """A sub-Riemannian structure on a global chart.

    frame(points) maps an (..., n) array of chart points to the (..., m, n)
    array of horizontal frame vectors; frame_jacobian gives the partials
    d(X_i)_a / d x_b with shape (..., m, n, n).  Both are pure and safe to
    call from parallel workers.
    """

    name: str
    chart_dim: int
    horizontal_rank: int
    frame: Callable[[np.ndarray], np.ndarray]
    frame_jacobian: Callable[[np.ndarray], np.ndarray]
    # Trailing chart coordinates not spanned by the frame at the origin;
    # used by the shooting solver to build seed grids.
    vertical_dims: int = 0
    # Optional cheap analytic bounds on the sub-Riemannian distance:
    # distance_bounds(X, Y) -> (lower, upper) elementwise over batched point
    # arrays.  Used only for screening; exact distances come from the solver.
    distance_bounds: Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]] | None = None

    def frame_at(self, point: Point) -> np.ndarray:
        """Frame matrix (m, n) at a single point."""
        return self.frame(np.asarray(point.coords, dtype=float))

    def check_point(self, point: Point) -> None:
        if point.dim != self.chart_dim:
            raise ValueError(
                f"point dimension {point.dim} != chart dimension {self.chart_dim} of {self.name}"
            )

    def gradient_h(self, f: ScalarField, point: Point) -> HorizontalVector:
        """Horizontal gradient of f at a point, in frame coefficients.

        The i-th coefficient is X_i f = <grad f, X_i>, using the analytic
        gradient carried by the field.
        """
        self.check_point(point)
        grad = np.asarray(f.gradient(point.coords), dtype=float)
        coeffs = self.frame_at(point) @ grad
        return HorizontalVector(point, coeffs)


def hamiltonian(manifold: Manifold, cov: Covector) -> float:
    """Geodesic Hamiltonian H(x, p) = 1/2 sum_i <p, X_i(x)>^2 (>= 0)."""
    manifold.check_point(cov.base)
    pairings = manifold.frame_at(cov.base) @ cov.momenta
    return 0.5 * float(np.dot(pairings, pairings))


def heisenberg() -> Manifold:
    """The first Heisenberg group H^1 on the chart R^3 = (x, y, z).

    Frame X1 = dx - (y/2) dz, X2 = dy + (x/2) dz, declared orthonormal.
    Bracket-generating, complete, and free of abnormal geodesics.
    """

    def frame(points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        out = np.zeros(pts.shape[:-1] + (2, 3))
        out[..., 0, 0] = 1.0
        out[..., 0, 2] = -0.5 * pts[..., 1]
        out[..., 1, 1] = 1.0
        out[..., 1, 2] = 0.5 * pts[..., 0]
        return out

    def frame_jacobian(points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        out = np.zeros(pts.shape[:-1] + (2, 3, 3))
        out[..., 0, 2, 1] = -0.5  # d(X1)_z / dy
        out[..., 1, 2, 0] = 0.5   # d(X2)_z / dx
        return out

    def distance_bounds(X: np.ndarray, Y: np.ndarray):
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        dxy = Y[..., :2] - X[..., :2]
        horiz = np.linalg.norm(dxy, axis=-1)
        # lower: the (x, y)-projection of a horizontal curve has the same
        # length, so projected Euclidean distance never exceeds d
        lower = horiz
        # upper: straight horizontal segment, then the exact vertical
        # geodesic for the leftover adjusted height delta; the vertical
        # distance from the identity is sqrt(4 pi |delta|)
        delta = (Y[..., 2] - X[..., 2]) - 0.5 * (
            X[..., 0] * dxy[..., 1] - X[..., 1] * dxy[..., 0]
        )
        upper = horiz + np.sqrt(4.0 * np.pi * np.abs(delta))
        return lower, upper

    return Manifold(
        name="heisenberg",
        chart_dim=3,
        horizontal_rank=2,
        frame=frame,
        frame_jacobian=frame_jacobian,
        vertical_dims=1,
        distance_bounds=distance_bounds,
    )


def euclidean(n: int) -> Manifold:
    """Euclidean R^n with the full distribution and the coordinate frame."""
    if n < 1:
        raise ValueError(f"euclidean dimension must be >= 1, got {n}")

    def frame(points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return np.broadcast_to(np.eye(n), pts.shape[:-1] + (n, n)).copy()

    def frame_jacobian(points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return np.zeros(pts.shape[:-1] + (n, n, n))

    def distance_bounds(X: np.ndarray, Y: np.ndarray):
        d = np.linalg.norm(np.asarray(Y, dtype=float) - np.asarray(X, dtype=float), axis=-1)
        return d, d

    return Manifold(
        name=f"euclidean{n}",
        chart_dim=n,
        horizontal_rank=n,
        frame=frame,
        frame_jacobian=frame_jacobian,
        vertical_dims=0,
        distance_bounds=distance_bounds,
    )


_BUILDERS = {"heisenberg": heisenberg}


def by_name(name: str, dim: int | None = None) -> Manifold:
    """Look up a shipped manifold by name ('heisenberg' or 'euclidean')."""
    if name == "heisenberg":
        return heisenberg()
    if name == "euclidean":
        if dim is None:
            raise ValueError("euclidean manifold needs an explicit dimension")
        return euclidean(dim)
    raise ValueError(f"unknown manifold {name!r}")
