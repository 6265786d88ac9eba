import numpy as np
import pytest

from conftest import random_point
from qlif.errors import DegenerateMetric
from qlif.spacetime import ETA, FourVector, Minkowski, metric_eval
from qlif.tetrad import Tetrad, build_tetrad, frame_residual, from_local, tetrad_arrays, to_local


def test_minkowski_tetrad_is_identity(units):
    t = build_tetrad(Minkowski(units), FourVector(0.0, 1.0, 2.0, 3.0))
    assert np.array_equal(t.b, np.eye(4))
    assert np.array_equal(t.f, np.eye(4))


def test_synthetic_diagonal_rescaling():
    b, f = tetrad_arrays(np.diag([-4.0, 1.0, 1.0, 1.0])[None])
    assert np.array_equal(f[0], np.diag([0.5, 1.0, 1.0, 1.0]))
    assert np.array_equal(b[0], np.diag([2.0, 1.0, 1.0, 1.0]))


def test_frame_invariants_random_points(catalog):
    rng = np.random.default_rng(17)
    for field in catalog.values():
        for _ in range(100):
            x = random_point(field, rng)
            t = build_tetrad(field, x)
            g = metric_eval(field, x)
            assert frame_residual(t, g) < 1e-10
            assert np.max(np.abs(t.f @ t.b - np.eye(4))) < 1e-12
            assert np.max(np.abs(t.b @ t.f - np.eye(4))) < 1e-12


def test_to_local_at_anchor_is_zero(catalog):
    rng = np.random.default_rng(2)
    for field in catalog.values():
        x = random_point(field, rng)
        t = build_tetrad(field, x)
        assert np.array_equal(to_local(t, x).array, np.zeros(4))
        assert np.array_equal(from_local(t, FourVector(0, 0, 0, 0)).array, x.array)


def test_minkowski_frame_is_plain_translation(units):
    a = FourVector(0.5, 1.0, -2.0, 0.25)
    t = build_tetrad(Minkowski(units), a)
    xp = FourVector(1.5, 3.0, 0.0, -1.0)
    assert np.array_equal(to_local(t, xp).array, xp.array - a.array)
    xi = FourVector(0.1, 0.2, 0.3, 0.4)
    assert np.array_equal(from_local(t, xi).array, a.array + xi.array)


def test_synthetic_tetrad_action():
    b, f = tetrad_arrays(np.diag([-4.0, 1.0, 1.0, 1.0])[None])
    t = Tetrad(b=b[0], f=f[0], anchor=FourVector(0, 0, 0, 0), metric_id="synthetic")
    out = to_local(t, FourVector(1.0, 0.0, 0.0, 0.0))
    assert np.array_equal(out.array, np.array([2.0, 0.0, 0.0, 0.0]))


def test_round_trip_many_points(catalog):
    rng = np.random.default_rng(23)
    for field in catalog.values():
        x = random_point(field, rng)
        t = build_tetrad(field, x)
        for _ in range(1000):
            xp = FourVector.from_array(x.array + rng.normal(0.0, 0.2, 4))
            back = from_local(t, to_local(t, xp))
            assert np.max(np.abs(back.array - xp.array)) < 1e-12


def test_determinism_bit_identical(catalog):
    rng = np.random.default_rng(31)
    for field in catalog.values():
        x = random_point(field, rng)
        t1 = build_tetrad(field, x)
        t2 = build_tetrad(field, x)
        assert np.array_equal(t1.b, t2.b)
        assert np.array_equal(t1.f, t2.f)


def test_degenerate_metric_rejected():
    with pytest.raises(DegenerateMetric):
        tetrad_arrays(np.diag([1e-13, 1.0, 1.0, 1.0])[None])
    with pytest.raises(DegenerateMetric):  # two timelike directions
        tetrad_arrays(np.diag([-1.0, -1.0, 1.0, 1.0])[None])


def _pullback_deviation(field, t, radius):
    worst = 0.0
    for mu in range(4):
        for sign in (-1.0, 1.0):
            xi = np.zeros(4)
            xi[mu] = sign * radius
            xp = from_local(t, FourVector.from_array(xi))
            g = metric_eval(field, xp)
            worst = max(worst, float(np.max(np.abs(t.f.T @ g @ t.f - ETA))))
    return worst


def test_leading_order_deviation_grows_linearly(catalog):
    # Constant tetrads cannot cancel the connection, so the pulled-back
    # metric deviates from eta linearly in the local distance.
    rng = np.random.default_rng(7)
    for name in ("weak_field", "schwarzschild"):
        field = catalog[name]
        x = random_point(field, rng)
        t = build_tetrad(field, x)
        d1 = _pullback_deviation(field, t, 0.01)
        d2 = _pullback_deviation(field, t, 0.02)
        assert d1 > 0.0
        assert d2 / d1 == pytest.approx(2.0, rel=0.2)
