"""Flow integration, shooting, selection determinism, and metric sanity."""

import numpy as np
import pytest

import oracles
from srot.geodesics import (
    ChowReport,
    ConnectionFailure,
    IntegrationBlowup,
    ShootingConfig,
    chow_connectivity_check,
    connect,
    connect_batch,
    distance,
    distance_matrix,
    exp_map,
    geodesic_sup_distance,
    integrate_flow,
)
from srot.manifolds import Covector, Point, hamiltonian


def _hamiltonian_along(manifold, xs, ps):
    frame = manifold.frame(xs)
    u = np.einsum("...mn,...n->...m", frame, ps)
    return 0.5 * np.einsum("...m,...m->...", u, u)


def test_shooting_config_validation():
    with pytest.raises(ValueError):
        ShootingConfig(steps=4)
    with pytest.raises(ValueError):
        ShootingConfig(bvp_tol=-1.0)


def test_exp_map_identity_momentum_is_straight(h1):
    lam0 = Covector(Point(np.zeros(3)), np.array([1.0, 0.0, 0.0]))
    path = exp_map(h1, lam0, steps=64)
    np.testing.assert_allclose(path.points[-1], [1.0, 0.0, 0.0], atol=1e-12)
    assert path.energy == pytest.approx(1.0, abs=1e-12)


def test_hamiltonian_conserved_along_flow(h1):
    rng = np.random.default_rng(12)
    x0 = rng.uniform(-1, 1, size=(10, 3))
    p0 = rng.uniform(-4, 4, size=(10, 3))
    xs, ps = integrate_flow(h1, x0, p0, steps=256, keep_trajectory=True)
    H = _hamiltonian_along(h1, xs, ps)
    rel = np.abs(H - H[0]) / np.maximum(H[0], 1e-300)
    assert float(rel.max()) <= 1e-7


def test_exp_map_full_turn_returns_to_axis(h1):
    # momentum (1, 0, 2 pi): one full winding ends back on the z-axis at
    # height 1 / (4 pi)
    lam0 = Covector(Point(np.zeros(3)), np.array([1.0, 0.0, 2 * np.pi]))
    path = exp_map(h1, lam0, steps=512)
    end = path.points[-1]
    assert abs(end[0]) < 1e-6 and abs(end[1]) < 1e-6
    assert end[2] == pytest.approx(1.0 / (4 * np.pi), abs=1e-6)


def test_integration_blowup_raises(e2):
    class Bad:
        pass

    # a quadratic frame makes the flow escape in finite time
    import srot.manifolds as m

    def frame(points):
        pts = np.asarray(points, dtype=float)
        out = np.zeros(pts.shape[:-1] + (1, 1))
        out[..., 0, 0] = 1.0 + pts[..., 0] ** 2
        return out

    def frame_jacobian(points):
        pts = np.asarray(points, dtype=float)
        out = np.zeros(pts.shape[:-1] + (1, 1, 1))
        out[..., 0, 0, 0] = 2.0 * pts[..., 0]
        return out

    quad = m.Manifold("quad", 1, 1, frame, frame_jacobian)
    lam0 = Covector(Point(np.array([1.0])), np.array([50.0]))
    with pytest.raises(IntegrationBlowup):
        exp_map(quad, lam0, steps=256)


def test_distance_euclidean_closed_form(e2, light_cfg):
    rng = np.random.default_rng(13)
    for _ in range(5):
        a, b = rng.normal(size=2), rng.normal(size=2)
        d = distance(e2, Point(a), Point(b), light_cfg)
        assert d == pytest.approx(np.linalg.norm(b - a), abs=1e-10)


def test_distance_vertical_pair(h1, light_cfg):
    d = distance(h1, Point(np.zeros(3)), Point(np.array([0.0, 0.0, 1.0])), light_cfg)
    assert d == pytest.approx(np.sqrt(4 * np.pi), abs=1e-6)


def test_distance_horizontal_pair(h1, light_cfg):
    d = distance(h1, Point(np.zeros(3)), Point(np.array([1.0, 0.0, 0.0])), light_cfg)
    assert d == pytest.approx(1.0, abs=1e-10)


def test_distance_same_point_is_zero(h1, light_cfg):
    p = Point(np.array([0.3, -0.2, 0.1]))
    assert distance(h1, p, p, light_cfg) == 0.0
    path = connect(h1, p, p, light_cfg)
    assert path.energy == 0.0
    assert np.all(path.velocities == 0.0)


def test_connect_matches_oracle(h1, light_cfg):
    rng = np.random.default_rng(14)
    for _ in range(3):
        a, b = rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 3)
        d = distance(h1, Point(a), Point(b), light_cfg)
        assert d == pytest.approx(oracles.h1_distance_oracle(a, b), abs=1e-6)


def test_constant_speed_residual(h1, light_cfg):
    rng = np.random.default_rng(15)
    a, b = rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 3)
    path = connect(h1, Point(a), Point(b), light_cfg)
    assert path.constant_speed_residual() <= 1e-6


def test_endpoint_contract_exact(h1, light_cfg):
    rng = np.random.default_rng(16)
    a, b = rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 3)
    path = connect(h1, Point(a), Point(b), light_cfg)
    assert np.array_equal(path.points[0], a)
    assert np.array_equal(path.points[-1], b)


def test_connect_deterministic_across_batch_layout(h1, light_cfg):
    rng = np.random.default_rng(17)
    X = rng.uniform(-1, 1, size=(4, 3))
    Y = rng.uniform(-1, 1, size=(4, 3))
    single = [connect(h1, Point(x), Point(y), light_cfg) for x, y in zip(X, Y)]
    batched = connect_batch(h1, X, Y, light_cfg)
    shuffled = connect_batch(h1, X[::-1].copy(), Y[::-1].copy(), light_cfg)[::-1]
    for a, b, c in zip(single, batched, shuffled):
        assert a.energy == b.energy == c.energy
        np.testing.assert_array_equal(a.lam0.momenta, b.lam0.momenta)
        np.testing.assert_array_equal(a.lam0.momenta, c.lam0.momenta)


def test_light_config_matches_default(h1, light_cfg):
    # the test-suite shooting grid must select the same geodesics as the
    # production defaults
    rng = np.random.default_rng(18)
    X = rng.uniform(-1, 1, size=(5, 3))
    Y = rng.uniform(-1, 1, size=(5, 3))
    light = connect_batch(h1, X, Y, light_cfg)
    full = connect_batch(h1, X, Y, ShootingConfig())
    for a, b in zip(light, full):
        assert a.energy == pytest.approx(b.energy, abs=1e-10)


def test_symmetry_small(h1, light_cfg):
    rng = np.random.default_rng(19)
    X = rng.uniform(-1, 1, size=(5, 3))
    Y = rng.uniform(-1, 1, size=(5, 3))
    D1 = distance_matrix(h1, X, Y, light_cfg)
    D2 = distance_matrix(h1, Y, X, light_cfg)
    assert float(np.max(np.abs(D1 - D2.T))) <= 1e-6


def test_connection_failure_reports_residual(h1):
    # any spiral reaching height 1 must swing wider than this chart bound,
    # so every shooting attempt blows up and the connection genuinely fails
    boxed = ShootingConfig(chart_bound=0.4)
    with pytest.raises(ConnectionFailure) as err:
        connect(h1, Point(np.zeros(3)), Point(np.array([0.0, 0.0, 1.0])), boxed)
    assert err.value.best_residual > 0.0


def test_geodesic_sup_distance(h1, light_cfg):
    a = connect(h1, Point(np.zeros(3)), Point(np.array([1.0, 0.0, 0.0])), light_cfg)
    b = connect(h1, Point(np.zeros(3)), Point(np.array([0.0, 1.0, 0.0])), light_cfg)
    assert geodesic_sup_distance(a, a, light_cfg) == 0.0
    # intermediate pairs carry a small vertical defect; use the full grid
    s = geodesic_sup_distance(a, b, ShootingConfig())
    # the xy-projection is 1-Lipschitz, so the endpoint chord is >= sqrt(2);
    # the sup is attained at t = 1 where the vertical defect is largest
    d_end = distance(h1, Point(a.points[-1]), Point(b.points[-1]), ShootingConfig())
    assert s == pytest.approx(d_end, abs=1e-9)
    assert s >= np.sqrt(2.0) - 1e-9


def test_chow_connectivity_check(h1, light_cfg):
    rng = np.random.default_rng(20)
    pairs = [
        (Point(rng.uniform(-1, 1, 3)), Point(rng.uniform(-1, 1, 3))) for _ in range(4)
    ]
    report = chow_connectivity_check(h1, pairs, light_cfg)
    assert isinstance(report, ChowReport)
    assert report.success_rate == 1.0
    assert report.worst_residual <= 1e-10
    assert chow_connectivity_check(h1, [], light_cfg).success_rate == 1.0
