import math

import numpy as np
import pytest

from eotspa.engine import PoBelief
from eotspa.errors import NoExistence
from eotspa.geometry import ShapeKind
from eotspa.particles import (detect, effective_sample_size, estimate, prune,
                              resample)


def _belief(kin, ext, weights, label=(0, 0)):
    return PoBelief(np.asarray(kin, float), np.asarray(ext, float),
                    np.asarray(weights, float), label)


def test_estimate_point_mass():
    kin = np.tile([1.0, 2.0, 0.5, -0.5], (4, 1))
    ext = np.broadcast_to(np.diag([3.0, 1.5]), (4, 2, 2)).copy()
    belief = _belief(kin, ext, np.full(4, 0.25))
    est = estimate(belief)
    assert np.allclose(est.kin, [1.0, 2.0, 0.5, -0.5])
    assert np.allclose(est.ext, np.diag([3.0, 1.5]))
    assert est.size == pytest.approx(np.pi * 4.5)
    assert est.orientation == pytest.approx(0.0)


def test_estimate_midpoint():
    kin = np.array([[0.0, 0, 0, 0], [2.0, 0, 0, 0]])
    ext = np.broadcast_to(np.eye(2), (2, 2, 2)).copy()
    belief = _belief(kin, ext, [0.3, 0.3])
    est = estimate(belief)
    assert est.kin[0] == pytest.approx(1.0)
    assert est.existence == pytest.approx(0.6)


def test_estimate_extent_mean_is_psd():
    rng = np.random.default_rng(0)
    mats = []
    for _ in range(8):
        a = rng.normal(size=(2, 2))
        mats.append(a @ a.T)
    belief = _belief(np.zeros((8, 4)), np.stack(mats), np.full(8, 0.1))
    est = estimate(belief)
    assert np.all(np.linalg.eigvalsh(est.ext) >= 0)


def test_estimate_cube_size():
    ext = np.broadcast_to(np.diag([2.0, 3.0]), (2, 2, 2)).copy()
    belief = _belief(np.zeros((2, 4)), ext, [0.5, 0.5])
    est = estimate(belief, ShapeKind.UNIFORM_CUBE)
    assert est.size == pytest.approx(6.0)


def test_estimate_requires_existence():
    belief = _belief(np.zeros((2, 4)), np.broadcast_to(np.eye(2), (2, 2, 2)),
                     [0.0, 0.0])
    with pytest.raises(NoExistence):
        estimate(belief)


def test_estimate_invariant_under_permutation():
    rng = np.random.default_rng(1)
    kin = rng.normal(size=(16, 4))
    ext = np.broadcast_to(np.eye(2), (16, 2, 2)).copy()
    w = rng.uniform(0, 0.05, 16)
    belief = _belief(kin, ext, w)
    perm = rng.permutation(16)
    belief_p = _belief(kin[perm], ext[perm], w[perm])
    est, est_p = estimate(belief), estimate(belief_p)
    assert np.allclose(est.kin, est_p.kin)
    assert np.allclose(est.ext, est_p.ext)


def _with_existence(p_e, label=(0, 0)):
    return _belief(np.zeros((2, 4)), np.broadcast_to(np.eye(2), (2, 2, 2)),
                   [p_e / 2, p_e / 2], label)


def test_detect_strict_threshold():
    assert len(detect([_with_existence(0.51)], 0.5)) == 1
    assert len(detect([_with_existence(0.5)], 0.5)) == 0
    assert detect([], 0.5) == []


def test_prune_boundary_kept():
    assert len(prune([_with_existence(1e-4)], 1e-3)) == 0
    assert len(prune([_with_existence(1e-3)], 1e-3)) == 1
    kept = prune([_with_existence(0.4), _with_existence(0.6)], 1e-3)
    assert len(kept) == 2


def test_prune_detect_commute():
    beliefs = [_with_existence(p, label=(0, i))
               for i, p in enumerate([1e-4, 0.2, 0.7, 0.51])]
    a = detect(prune(beliefs, 1e-3), 0.5)
    b = prune(detect(beliefs, 0.5), 1e-3)
    assert [x.label for x in a] == [x.label for x in b]


def test_resample_uniform_preserves_multiset():
    rng = np.random.default_rng(2)
    kin = np.arange(8, dtype=float).reshape(4, 2)
    kin = np.hstack([kin, np.zeros((4, 2))])
    ext = np.broadcast_to(np.eye(2), (4, 2, 2)).copy()
    belief = _belief(kin, ext, np.full(4, 0.25))
    out = resample(belief, 4, rng)
    assert sorted(out.kin[:, 0].tolist()) == kin[:, 0].tolist()


def test_resample_degenerate_weight():
    rng = np.random.default_rng(3)
    kin = np.array([[0.0, 0, 0, 0], [5.0, 1, 0, 0], [9.0, 2, 0, 0]])
    ext = np.broadcast_to(np.eye(2), (3, 2, 2)).copy()
    belief = _belief(kin, ext, [0.0, 0.8, 0.0])
    out = resample(belief, 6, rng)
    assert np.all(out.kin[:, 0] == 5.0)


def test_resample_conserves_existence_to_one_ulp():
    rng = np.random.default_rng(4)
    for _ in range(50):
        j = int(rng.integers(2, 3000))
        weights = rng.dirichlet(np.ones(j)) * rng.uniform(0.01, 1.0)
        kin = rng.normal(size=(j, 4))
        ext = np.broadcast_to(np.eye(2), (j, 2, 2)).copy()
        belief = _belief(kin, ext, weights)
        target = int(rng.integers(2, 3000))
        out = resample(belief, target, rng)
        before = math.fsum(weights)
        after = math.fsum(out.weights)
        assert abs(after - before) <= np.spacing(before)
        assert np.all(out.weights == out.weights[0])


def test_resample_effective_sample_size():
    rng = np.random.default_rng(5)
    weights = rng.uniform(0, 1, 100)
    belief = _belief(rng.normal(size=(100, 4)),
                     np.broadcast_to(np.eye(2), (100, 2, 2)).copy(), weights)
    out = resample(belief, 64, rng)
    assert effective_sample_size(out.weights) == pytest.approx(64.0)


def test_resample_requires_existence():
    belief = _belief(np.zeros((2, 4)), np.broadcast_to(np.eye(2), (2, 2, 2)),
                     [0.0, 0.0])
    with pytest.raises(NoExistence):
        resample(belief, 4, np.random.default_rng(6))
