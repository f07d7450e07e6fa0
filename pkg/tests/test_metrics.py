import itertools

import numpy as np
import pytest

from eotspa.geometry import random_rotation_2d
from eotspa.metrics import (MetricConfig, gaussian_wasserstein, gospa,
                            hungarian, orientation_size_errors, ospa)

CFG = MetricConfig(order=1.0, cutoff=20.0)


def _obj(x, y, ext=None):
    return (np.array([x, y], dtype=float),
            np.eye(2) if ext is None else np.asarray(ext, float))


def test_gw_identity():
    a = _obj(1.0, 2.0, np.diag([3.0, 1.0]))
    assert gaussian_wasserstein(a, a) == 0.0


def test_gw_position_only():
    a = _obj(0.0, 0.0, np.diag([2.0, 1.0]))
    b = _obj(3.0, 0.0, np.diag([2.0, 1.0]))
    assert gaussian_wasserstein(a, b) == pytest.approx(3.0)


def test_gw_commuting_closed_form():
    a = _obj(0.0, 0.0, np.diag([2.0, 1.0]))
    b = _obj(0.0, 0.0, np.diag([1.0, 1.0]))
    # commuting extents: d^2 = sum (lam_a - lam_b)^2
    assert gaussian_wasserstein(a, b) == pytest.approx(1.0)


def test_gw_symmetric_and_triangle():
    rng = np.random.default_rng(0)
    for _ in range(25):
        objs = []
        for _ in range(3):
            mat = rng.normal(size=(2, 2))
            objs.append((rng.normal(size=2), mat @ mat.T))
        a, b, c = objs
        dab = gaussian_wasserstein(a, b)
        dba = gaussian_wasserstein(b, a)
        assert dab == pytest.approx(dba, rel=1e-9)
        dac = gaussian_wasserstein(a, c)
        dcb = gaussian_wasserstein(c, b)
        assert dab <= dac + dcb + 1e-9


def test_ospa_identical_sets():
    objs = [_obj(0, 0), _obj(5, 5)]
    total, state, card = ospa(objs, list(objs), CFG)
    assert (total, state, card) == (0.0, 0.0, 0.0)


def test_ospa_empty_cases():
    assert ospa([], [], CFG) == (0.0, 0.0, 0.0)
    total, state, card = ospa([_obj(0, 0)], [], CFG)
    assert total == pytest.approx(20.0)
    assert card == pytest.approx(20.0)


def test_ospa_hand_assignment():
    truth = [_obj(0, 0), _obj(10, 0)]
    est = [_obj(1, 0), _obj(11, 0)]
    total, state, card = ospa(truth, est, CFG)
    assert total == pytest.approx(1.0)
    assert state == pytest.approx(1.0)
    assert card == 0.0


def test_ospa_bounded_by_cutoff():
    rng = np.random.default_rng(1)
    for _ in range(20):
        truth = [_obj(*rng.uniform(-50, 50, 2)) for _ in range(rng.integers(0, 4))]
        est = [_obj(*rng.uniform(-50, 50, 2)) for _ in range(rng.integers(0, 4))]
        total, _, _ = ospa(truth, est, CFG)
        assert total <= 20.0 + 1e-12


def test_ospa_symmetry():
    rng = np.random.default_rng(2)
    truth = [_obj(*rng.uniform(-10, 10, 2)) for _ in range(3)]
    est = [_obj(*rng.uniform(-10, 10, 2)) for _ in range(2)]
    assert ospa(truth, est, CFG)[0] == pytest.approx(ospa(est, truth, CFG)[0])


def test_gospa_identical_sets():
    objs = [_obj(0, 0), _obj(5, 5)]
    assert gospa(objs, list(objs), CFG) == (0.0, 0.0, 0.0, 0.0)


def test_gospa_one_missed_c5():
    cfg = MetricConfig(order=1.0, cutoff=5.0)
    total, state, missed, false = gospa([_obj(0, 0)], [], cfg)
    assert (total, missed) == (pytest.approx(2.5), pytest.approx(2.5))
    assert state == 0.0 and false == 0.0


def test_gospa_missed_and_false():
    total, state, missed, false = gospa([_obj(0, 0)], [_obj(100, 100)], CFG)
    assert total == pytest.approx(20.0)
    assert missed == pytest.approx(10.0)
    assert false == pytest.approx(10.0)
    assert state == 0.0


def test_gospa_swap_exchanges_missed_false():
    truth = [_obj(0, 0), _obj(50, 50)]
    est = [_obj(0.5, 0)]
    t1 = gospa(truth, est, CFG)
    t2 = gospa(est, truth, CFG)
    assert t1[0] == pytest.approx(t2[0])
    assert t1[2] == pytest.approx(t2[3])
    assert t1[3] == pytest.approx(t2[2])


def test_hungarian_diagonal():
    cost = np.array([[0.1, 5.0], [5.0, 0.2]])
    rows, cols = hungarian(cost)
    assert rows.tolist() == [0, 1]
    assert cols.tolist() == [0, 1]


def test_hungarian_single():
    rows, cols = hungarian(np.array([[3.0]]))
    assert (rows.tolist(), cols.tolist()) == ([0], [0])


def _brute_force_cost(cost):
    n, m = cost.shape
    best = np.inf
    k = min(n, m)
    for rows in itertools.permutations(range(n), k):
        for cols in itertools.permutations(range(m), k):
            best = min(best, sum(cost[r, c] for r, c in zip(rows, cols)))
    return best


def test_hungarian_matches_brute_force_5x5():
    rng = np.random.default_rng(3)
    cost = rng.uniform(0, 10, size=(5, 5))
    rows, cols = hungarian(cost)
    assert cost[rows, cols].sum() == pytest.approx(_brute_force_cost(cost))


def test_hungarian_matches_brute_force_small_rectangular():
    rng = np.random.default_rng(4)
    for _ in range(30):
        n, m = rng.integers(1, 5, size=2)
        cost = rng.uniform(0, 10, size=(n, m))
        rows, cols = hungarian(cost)
        assert cost[rows, cols].sum() == pytest.approx(_brute_force_cost(cost))


def test_orientation_size_identical():
    ext = random_rotation_2d(0.4) @ np.diag([3.0, 1.5]) @ random_rotation_2d(0.4).T
    out = orientation_size_errors([_obj(0, 0, ext)], [_obj(0, 0, ext)], [(0, 0)])
    assert out[0] == (pytest.approx(0.0), pytest.approx(0.0))


def test_orientation_wraps_at_pi():
    e1 = random_rotation_2d(0.1) @ np.diag([3.0, 1.0]) @ random_rotation_2d(0.1).T
    e2 = (random_rotation_2d(np.pi - 0.1) @ np.diag([3.0, 1.0])
          @ random_rotation_2d(np.pi - 0.1).T)
    out = orientation_size_errors([_obj(0, 0, e1)], [_obj(0, 0, e2)], [(0, 0)])
    assert out[0][1] == pytest.approx(0.2, abs=1e-9)


def test_size_rotation_invariance():
    base = np.diag([3.0, 1.5])
    rot = random_rotation_2d(1.2)
    out = orientation_size_errors([_obj(0, 0, base)],
                                  [_obj(0, 0, rot @ base @ rot.T)], [(0, 0)])
    assert out[0][0] == pytest.approx(0.0, abs=1e-9)


def test_euclidean_base_mode():
    cfg = MetricConfig(order=1.0, cutoff=20.0, base="euclidean")
    truth = [_obj(0, 0, np.diag([5.0, 5.0]))]
    est = [_obj(3, 4, np.eye(2))]
    total, state, _ = ospa(truth, est, cfg)
    assert state == pytest.approx(5.0)
