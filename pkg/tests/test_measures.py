"""Discrete measures, plans, generalized curves, and superposition checks."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from srot.geodesics import connect
from srot.manifolds import Point
from srot.measures import (
    DiscreteMeasure,
    GeneralizedCurve,
    MeasureValidationError,
    Plan,
    TransportMeasure,
    averaged_field,
    marginal_from_samples,
    marginal_path,
)


def test_measure_validation():
    with pytest.raises(MeasureValidationError):
        DiscreteMeasure(np.zeros((2, 3)), np.array([0.5]))
    with pytest.raises(MeasureValidationError):
        DiscreteMeasure(np.zeros((1, 3)), np.array([-1.0]))
    with pytest.raises(MeasureValidationError):
        DiscreteMeasure(np.zeros((2, 3)), np.array([0.5, 0.4]))
    with pytest.raises(MeasureValidationError):
        DiscreteMeasure(np.array([[np.nan, 0.0]]), np.array([1.0]))


def test_measure_dirac_and_box():
    mu = DiscreteMeasure.dirac(np.array([1.0, 2.0]))
    assert mu.size == 1 and mu.dim == 2
    lo, hi = mu.bounding_box()
    np.testing.assert_array_equal(lo, hi)


@given(
    st.lists(st.floats(-100, 100, allow_nan=False), min_size=2, max_size=6),
)
@settings(max_examples=30, deadline=None)
def test_measure_weights_normalize_property(raw):
    w = np.abs(np.array(raw)) + 0.01
    mu = DiscreteMeasure(np.zeros((w.size, 2)), w / w.sum())
    assert mu.weights.sum() == pytest.approx(1.0, abs=1e-10)


def test_plan_marginals_and_cost():
    plan = Plan(np.array([0, 0, 1]), np.array([0, 1, 1]), np.array([0.25, 0.25, 0.5]))
    np.testing.assert_allclose(plan.row_marginal(2), [0.5, 0.5])
    np.testing.assert_allclose(plan.col_marginal(2), [0.25, 0.75])
    C = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert plan.cost(C) == pytest.approx(0.25 * 1 + 0.25 * 2 + 0.5 * 4)


def test_plan_admissibility():
    mu = DiscreteMeasure(np.zeros((2, 2)), np.array([0.5, 0.5]))
    good = Plan(np.array([0, 1]), np.array([1, 0]), np.array([0.5, 0.5]))
    good.check_admissible(mu, mu)
    bad = Plan(np.array([0, 1]), np.array([1, 0]), np.array([0.6, 0.4]))
    with pytest.raises(MeasureValidationError):
        bad.check_admissible(mu, mu)
    out_of_range = Plan(np.array([2]), np.array([0]), np.array([1.0]))
    with pytest.raises(MeasureValidationError):
        out_of_range.check_admissible(mu, mu)


def test_plan_canonical_merges_duplicates():
    plan = Plan(np.array([1, 0, 1]), np.array([0, 0, 0]), np.array([0.2, 0.5, 0.3]))
    canon = plan.canonical()
    assert canon.size == 2
    np.testing.assert_array_equal(canon.rows, [0, 1])
    np.testing.assert_allclose(canon.weights, [0.5, 0.5])


def test_identity_plan():
    mu = DiscreteMeasure(np.zeros((3, 2)), np.array([0.2, 0.3, 0.5]))
    plan = Plan.identity(mu)
    plan.check_admissible(mu, mu)


def test_curve_from_path_matches_energy(h1, light_cfg):
    path = connect(h1, Point(np.zeros(3)), Point(np.array([0.7, -0.3, 0.2])), light_cfg)
    curve = GeneralizedCurve.from_path(path)
    # dirac law: relaxed and kinetic energies coincide with the path energy
    assert curve.relaxed_energy() == path.energy
    assert curve.kinetic_energy() == path.energy
    assert curve.horizontality_residual(h1) <= 1e-4


def test_curve_rejects_bad_barycenter():
    T = 9
    times = np.linspace(0, 1, T)
    pts = np.zeros((T, 3))
    vel = np.zeros((T, 2))
    law_v = np.ones((T, 1, 2))  # barycenter (1,1) but velocity 0
    law_p = np.ones((T, 1))
    with pytest.raises(MeasureValidationError):
        GeneralizedCurve(times, pts, vel, law_v, law_p)


def test_curve_rejects_bad_probabilities():
    T = 5
    times = np.linspace(0, 1, T)
    with pytest.raises(MeasureValidationError):
        GeneralizedCurve(
            times,
            np.zeros((T, 3)),
            np.zeros((T, 2)),
            np.zeros((T, 2, 2)),
            np.full((T, 2), 0.4),
        )


def _mixture_curve(T=65, speed=1.5):
    """Constant path carrying a +-v velocity law: barycenter 0, second
    moment speed^2."""
    times = np.linspace(0, 1, T)
    pts = np.zeros((T, 3))
    vel = np.zeros((T, 2))
    law_v = np.zeros((T, 2, 2))
    law_v[:, 0, 0] = speed
    law_v[:, 1, 0] = -speed
    law_p = np.full((T, 2), 0.5)
    return GeneralizedCurve(times, pts, vel, law_v, law_p)


def test_mixture_curve_energies():
    speed = 1.5
    curve = _mixture_curve(speed=speed)
    assert curve.relaxed_energy() == pytest.approx(speed**2, abs=1e-12)
    assert curve.kinetic_energy() == 0.0


def test_transport_measure_validation(h1, light_cfg):
    path = connect(h1, Point(np.zeros(3)), Point(np.array([1.0, 0, 0])), light_cfg)
    curve = GeneralizedCurve.from_path(path)
    with pytest.raises(MeasureValidationError):
        TransportMeasure([curve], np.array([0.7]), curve.times)
    with pytest.raises(MeasureValidationError):
        TransportMeasure([curve], np.array([1.0]), np.linspace(0, 1, 5))
    # validate=False admits deliberately broken weights (negative testing)
    bad = TransportMeasure([curve], np.array([0.7]), curve.times, validate=False)
    assert bad.size == 1


def test_marginal_path_merges_coincident_atoms(h1, light_cfg):
    a = Point(np.zeros(3))
    p1 = connect(h1, a, Point(np.array([1.0, 0, 0])), light_cfg)
    p2 = connect(h1, a, Point(np.array([0.0, 1.0, 0])), light_cfg)
    eta = TransportMeasure(
        [GeneralizedCurve.from_path(p1), GeneralizedCurve.from_path(p2)],
        np.array([0.5, 0.5]),
        p1.times,
    )
    m0 = marginal_path(eta, 0)
    assert m0.size == 1 and m0.weights[0] == 1.0
    m1 = marginal_path(eta, -1)
    assert m1.size == 2


def test_superposition_marginals_agree(h1, light_cfg):
    rng = np.random.default_rng(23)
    curves = []
    for _ in range(3):
        path = connect(
            h1, Point(rng.uniform(-1, 1, 3)), Point(rng.uniform(-1, 1, 3)), light_cfg
        )
        curves.append(GeneralizedCurve.from_path(path))
    curves.append(_mixture_curve(T=curves[0].times.shape[0]))
    w = np.array([0.3, 0.3, 0.2, 0.2])
    eta = TransportMeasure(curves, w, curves[0].times)
    for t_idx in (0, 7, len(eta.time_grid) // 2, -1):
        a = marginal_path(eta, t_idx)
        b = marginal_from_samples(eta, t_idx)
        assert a.size == b.size
        np.testing.assert_allclose(a.points, b.points, atol=1e-12)
        np.testing.assert_allclose(a.weights, b.weights, atol=1e-12)


def test_averaged_field_jensen_on_shared_point():
    # two mixture curves at the same location average to zero velocity
    c = _mixture_curve()
    eta = TransportMeasure([c, c], np.array([0.5, 0.5]), c.times)
    field = averaged_field(eta, 0)
    assert len(field) == 1
    _, vbar, w = field[0]
    assert w == 1.0
    assert vbar.norm == pytest.approx(0.0, abs=1e-15)
