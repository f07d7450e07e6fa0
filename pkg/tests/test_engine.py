import numpy as np
import pytest

from eotspa import engine as eng
from eotspa.engine import (BirthProposal, ModelBundle, PoBelief, SpaConfig,
                           birth_candidates, build_tables, compute_beliefs,
                           compute_xi, evaluate_messages, extrinsic_update,
                           init_new_pos, predict_legacy, spa_step)
from eotspa.errors import InvalidModel
from eotspa.geometry import ShapeKind
from eotspa.models import (BirthModel, MeasurementModel, RateSpec, Roi,
                           paper_model_config)

ROI = Roi(-50, 50, -50, 50)


class IdentityTransition:
    def sample(self, kin, ext, rng):
        return np.array(kin, copy=True), np.array(ext, copy=True)


class StubModel:
    """Measurement model with constant likelihood and rate, for arithmetic tests."""

    def __init__(self, likelihood_value, mu_m, clutter_intensity, dim=2):
        self.likelihood_value = likelihood_value
        self.mu_m = mu_m
        self._clutter = clutter_intensity
        self.dim = dim

    def log_likelihood(self, zs, kin, ext):
        j = np.atleast_2d(kin).shape[0]
        m = np.atleast_2d(zs).shape[0]
        return np.full((j, m), np.log(self.likelihood_value))

    def measurement_rate(self, kin, ext):
        return np.full(np.atleast_2d(kin).shape[0], self.mu_m)

    def clutter_intensity(self):
        return self._clutter


def _belief(rng, num_particles=64, existence=0.7, center=(0.0, 0.0)):
    kin = np.hstack([np.asarray(center) + rng.normal(0, 1, (num_particles, 2)),
                     rng.normal(0, 1, (num_particles, 2))])
    ext = np.broadcast_to(2.0 * np.eye(2), (num_particles, 2, 2)).copy()
    weights = np.full(num_particles, existence / num_particles)
    return PoBelief(kin, ext, weights, label=(0, 0))


def _models(mu_m=8.0):
    cfg = paper_model_config()
    meas = MeasurementModel.isotropic(ShapeKind.GAUSSIAN, 1.0, 10.0, ROI,
                                      RateSpec(kind="fixed", mu_m=mu_m))
    return ModelBundle(transition=cfg.transition_model(), measurement=meas,
                       birth=BirthModel(1e-2, ROI, 100 * np.eye(2),
                                        3 * np.eye(2), 100.0),
                       survival_prob=0.99)


# ---------------------------------------------------------------------------
# prediction


def test_predict_no_deaths_no_thinning():
    rng = np.random.default_rng(0)
    prev = _belief(rng, existence=0.7)
    meas = StubModel(0.01, mu_m=0.0, clutter_intensity=1e-4)
    po = predict_legacy(prev, IdentityTransition(), meas, 1.0, rng)
    assert np.allclose(np.exp(po.log_w1), prev.weights)
    assert po.alpha_n == pytest.approx(0.3)
    assert po.alpha == pytest.approx(1.0)


def test_predict_alpha_n_arithmetic():
    rng = np.random.default_rng(1)
    prev = _belief(rng, existence=1.0)
    meas = StubModel(0.01, mu_m=0.0, clutter_intensity=1e-4)
    po = predict_legacy(prev, IdentityTransition(), meas, 0.99, rng)
    assert po.alpha_n == pytest.approx(0.01)


def test_predict_constant_rate_thinning():
    rng = np.random.default_rng(2)
    prev = _belief(rng, existence=0.5)
    meas = StubModel(0.01, mu_m=8.0, clutter_intensity=1e-4)
    po = predict_legacy(prev, IdentityTransition(), meas, 0.99, rng)
    assert np.exp(po.log_w1).sum() == pytest.approx(0.99 * np.exp(-8.0) * 0.5,
                                                    rel=1e-9)


# ---------------------------------------------------------------------------
# new PO initialization


def test_init_new_pos_no_birth_limit():
    rng = np.random.default_rng(3)
    meas = _models().measurement
    birth = BirthModel(1e-12, ROI, 100 * np.eye(2), 3 * np.eye(2), 100.0)
    proposal = BirthProposal(birth, meas)
    news = init_new_pos(np.array([[1.0, 2.0]]), birth, meas, proposal, rng, 200)
    assert news[0].alpha == pytest.approx(1.0, abs=1e-6)
    assert np.exp(news[0].log_w1).sum() <= 1e-6


def test_init_new_pos_proposal_cancels_prior():
    # proposal equal to the birth position prior and constant rate: weights
    # constant across particles up to the truncated-Poisson factor
    rng = np.random.default_rng(4)
    meas = _models(mu_m=8.0).measurement
    birth = BirthModel(1e-2, ROI, 100 * np.eye(2), 3 * np.eye(2), 100.0)

    class UniformProposal(BirthProposal):
        def sample(self, z, count, rng):
            kin, ext = self.birth.sample(count, rng)
            return kin, ext

        def log_position_density(self, z, kin):
            return np.full(kin.shape[0], -np.log(self.birth.roi.area))

    proposal = UniformProposal(birth, meas)
    news = init_new_pos(np.array([[0.0, 0.0]]), birth, meas, proposal, rng, 500)
    w = np.exp(news[0].log_w1)
    expected = 1e-2 * np.exp(-8.0) / (1 - np.exp(-8.0)) / 500
    assert np.allclose(w, expected, rtol=1e-9)


def test_init_new_pos_empty():
    rng = np.random.default_rng(5)
    models = _models()
    proposal = BirthProposal(models.birth, models.measurement)
    assert init_new_pos(np.zeros((0, 2)), models.birth, models.measurement,
                        proposal, rng, 100) == []


# ---------------------------------------------------------------------------
# message tables


def _predicted(log_w1, alpha_n, kin=None, ext=None, kind="legacy"):
    j = log_w1.shape[0]
    kin = kin if kin is not None else np.zeros((j, 4))
    ext = ext if ext is not None else np.broadcast_to(np.eye(2), (j, 2, 2)).copy()
    alpha = float(np.exp(log_w1).sum() + alpha_n)
    return eng.PredictedPo(kin, ext, log_w1, alpha_n, alpha, (0, 0), kind)


def test_evaluate_messages_single_particle_arithmetic():
    meas = StubModel(0.02, mu_m=8.0, clutter_intensity=10.0 / 9.0e4)
    legacy = [_predicted(np.log(np.array([0.5])), alpha_n=0.5)]
    legacy[0].alpha = 1.0
    new = [_predicted(np.log(np.array([1e-12])), alpha_n=1.0, kind="new")]
    tables = build_tables(legacy, new, np.zeros((1, 2)), meas)
    evaluate_messages(tables)
    expected = 0.5 * 8.0 * 0.02 / (10.0 / 9.0e4)
    assert tables.beta_legacy[0, 0] == pytest.approx(expected, rel=1e-9)


def test_evaluate_messages_zero_likelihood():
    meas = StubModel(1e-320, mu_m=8.0, clutter_intensity=1e-4)
    legacy = [_predicted(np.log(np.full(8, 0.1)), alpha_n=0.2)]
    new = [_predicted(np.log(np.full(8, 1e-9)), alpha_n=1.0, kind="new")]
    tables = build_tables(legacy, new, np.zeros((1, 2)), meas)
    evaluate_messages(tables)
    assert tables.beta_legacy[0, 0] == pytest.approx(0.0, abs=1e-200)


def test_evaluate_messages_quadrature_oracle():
    # particle sum matches a dense quadrature grid over the same state box
    rng = np.random.default_rng(6)
    meas = MeasurementModel.isotropic(ShapeKind.GAUSSIAN, 1.0, 10.0, ROI,
                                      RateSpec(kind="fixed", mu_m=8.0))
    z = np.array([[1.0, 0.6]])
    ext_fixed = np.diag([2.0, 1.0])
    existence = 0.8

    side = 200
    grid = np.linspace(0.0, 2.0, side, endpoint=False) + 1.0 / side
    gx, gy = np.meshgrid(grid, grid)
    kin_grid = np.column_stack([gx.ravel(), gy.ravel(),
                                np.zeros(side**2), np.zeros(side**2)])
    ext_grid = np.broadcast_to(ext_fixed, (side**2, 2, 2)).copy()
    log_w_grid = np.log(np.full(side**2, existence / side**2))
    po_grid = _predicted(log_w_grid, alpha_n=0.2, kin=kin_grid, ext=ext_grid)

    j = 100_000
    kin_mc = np.column_stack([rng.uniform(0, 2, j), rng.uniform(0, 2, j),
                              np.zeros(j), np.zeros(j)])
    ext_mc = np.broadcast_to(ext_fixed, (j, 2, 2)).copy()
    po_mc = _predicted(np.log(np.full(j, existence / j)), alpha_n=0.2,
                       kin=kin_mc, ext=ext_mc)

    new = [_predicted(np.log(np.full(4, 1e-9)), alpha_n=1.0, kind="new")]
    t_grid = build_tables([po_grid], new, z, meas)
    evaluate_messages(t_grid)
    t_mc = build_tables([po_mc], new, z, meas)
    evaluate_messages(t_mc)
    assert t_mc.beta_legacy[0, 0] == pytest.approx(t_grid.beta_legacy[0, 0],
                                                   rel=0.02)


def test_compute_xi_all_zero():
    xi_l, xi_n = compute_xi(np.zeros((2, 3)), np.zeros((3, 3)))
    assert np.all(xi_l == 1.0)
    assert np.all(xi_n == 1.0)


def test_compute_xi_two_term_case():
    beta_l = np.array([[0.7]])
    beta_n = np.array([[0.3]])
    xi_l, xi_n = compute_xi(beta_l, beta_n)
    assert xi_l[0, 0] == pytest.approx(0.3 + 1.0)
    assert xi_n[0, 0] == pytest.approx(0.7 + 1.0)


def test_compute_xi_matches_naive_double_loop():
    rng = np.random.default_rng(7)
    k_n, m_n = 3, 4
    beta_l = rng.uniform(0, 5, size=(k_n, m_n))
    beta_n = np.triu(rng.uniform(0, 5, size=(m_n, m_n)))
    xi_l, xi_n = compute_xi(beta_l, beta_n)
    for k in range(k_n):
        for l in range(m_n):
            naive = (sum(beta_l[k2, l] for k2 in range(k_n) if k2 != k)
                     + sum(beta_n[l2, l] for l2 in range(l + 1)) + 1.0)
            assert xi_l[k, l] == pytest.approx(naive, rel=1e-12)
    for k in range(m_n):
        for l in range(k, m_n):
            naive = (beta_l[:, l].sum()
                     + sum(beta_n[l2, l] for l2 in range(l + 1) if l2 != k)
                     + 1.0)
            assert xi_n[k, l] == pytest.approx(naive, rel=1e-12)


def test_extrinsic_single_measurement_keeps_weights():
    meas = StubModel(0.02, mu_m=2.0, clutter_intensity=1e-4)
    legacy = [_predicted(np.log(np.full(8, 0.1)), alpha_n=0.2)]
    new = [_predicted(np.log(np.full(8, 1e-6)), alpha_n=1.0, kind="new")]
    tables = build_tables(legacy, new, np.zeros((1, 2)), meas)
    evaluate_messages(tables)
    tables.xi_legacy, tables.xi_new = compute_xi(tables.beta_legacy,
                                                 tables.beta_new)
    extrinsic_update(tables)
    assert np.allclose(tables.legacy_log_w[0][:, 0], legacy[0].log_w1)


def test_extrinsic_neutral_factors_keep_weights():
    meas = StubModel(1e-320, mu_m=1.0, clutter_intensity=1.0)
    legacy = [_predicted(np.log(np.full(4, 0.2)), alpha_n=0.2)]
    new = [_predicted(np.log(np.full(4, 1e-300)), alpha_n=1.0, kind="new")
           for _ in range(2)]
    tables = build_tables(legacy, new, np.zeros((2, 2)), meas)
    evaluate_messages(tables)
    tables.xi_legacy, tables.xi_new = compute_xi(tables.beta_legacy,
                                                 tables.beta_new)
    assert np.allclose(tables.xi_legacy, 1.0)
    extrinsic_update(tables)
    assert np.allclose(tables.legacy_log_w[0], legacy[0].log_w1[:, None])


def test_extrinsic_matches_direct_product():
    rng = np.random.default_rng(8)
    meas = MeasurementModel.isotropic(ShapeKind.GAUSSIAN, 1.0, 10.0, ROI,
                                      RateSpec(kind="fixed", mu_m=3.0))
    legacy = [_predicted(np.log(rng.uniform(0.001, 0.01, 16)), alpha_n=0.3,
                         kin=rng.normal(0, 2, (16, 4)))]
    new = [_predicted(np.log(rng.uniform(1e-8, 1e-6, 16)), alpha_n=1.0,
                      kin=rng.normal(0, 2, (16, 4)), kind="new")
           for _ in range(2)]
    zs = rng.normal(0, 2, (2, 2))
    tables = build_tables(legacy, new, zs, meas)
    evaluate_messages(tables)
    tables.xi_legacy, tables.xi_new = compute_xi(tables.beta_legacy,
                                                 tables.beta_new)
    ratios = np.exp(tables.legacy_log_ratio[0])  # (J, 2)
    xi = tables.xi_legacy[0]
    extrinsic_update(tables)
    for l in range(2):
        direct = legacy[0].log_w1 + np.log(ratios[:, 1 - l] + xi[1 - l])
        assert np.allclose(tables.legacy_log_w[0][:, l], direct, rtol=1e-10)


def test_beliefs_no_measurements_keep_existence():
    rng = np.random.default_rng(9)
    prev = _belief(rng, existence=0.6)
    meas = StubModel(0.01, mu_m=0.0, clutter_intensity=1e-4)
    bundle = ModelBundle(IdentityTransition(), meas,
                         BirthModel(1e-2, ROI, 100 * np.eye(2), 3 * np.eye(2),
                                    100.0), 1.0)
    beliefs, diag = spa_step([prev], np.zeros((0, 2)), bundle,
                             SpaConfig(num_particles=prev.num_particles), rng)
    assert beliefs[0].existence == pytest.approx(0.6, rel=1e-9)
    assert diag.message_counts == []


def test_normalize_half():
    po = _predicted(np.log(np.full(4, 0.1)), alpha_n=0.4)
    lam_a = np.log(np.full(4, 0.1))
    log_wb = np.log(0.4)
    belief = eng._normalize(po, lam_a, log_wb)
    assert belief.existence == pytest.approx(0.5, rel=1e-12)


def test_normalize_degenerate_gives_zero_existence():
    po = _predicted(np.full(4, eng.LOG_FLOOR), alpha_n=0.0)
    belief = eng._normalize(po, np.full(4, -np.inf), -np.inf)
    assert belief.existence == 0.0


# ---------------------------------------------------------------------------
# full step


def test_spa_step_empty():
    rng = np.random.default_rng(10)
    beliefs, diag = spa_step([], np.zeros((0, 2)), _models(),
                             SpaConfig(num_particles=100), rng)
    assert beliefs == []
    assert diag.num_measurements == 0


def test_spa_step_one_measurement_produces_one_new_po():
    rng = np.random.default_rng(11)
    beliefs, diag = spa_step([], np.array([[1.0, 1.0]]), _models(),
                             SpaConfig(num_particles=100), rng)
    assert len(beliefs) == 1
    assert beliefs[0].kind == "new"
    assert diag.message_counts == [1, 1, 1]


def test_spa_step_message_count_formula():
    rng = np.random.default_rng(12)
    state = [_belief(rng, num_particles=32, center=(i * 10.0, 0.0))
             for i in range(5)]
    zs = rng.uniform(-20, 20, size=(8, 2))
    beliefs, diag = spa_step(state, zs, _models(),
                             SpaConfig(num_particles=32, num_iterations=3), rng)
    assert diag.message_counts == [5 * 8 + 36] * 3
    assert diag.expected_messages_per_iteration == 76


def test_spa_step_existences_in_unit_interval():
    rng = np.random.default_rng(13)
    state = [_belief(rng, num_particles=64, center=(0.0, 0.0))]
    zs = rng.uniform(-10, 10, size=(12, 2))
    beliefs, _ = spa_step(state, zs, _models(),
                          SpaConfig(num_particles=64), rng)
    for b in beliefs:
        assert 0.0 <= b.existence <= 1.0 + 1e-12
        assert np.all(b.weights >= 0)


def test_joint_scaling_invariance():
    # scaling the likelihood and the clutter density together leaves beta
    # unchanged
    rng = np.random.default_rng(14)

    results = []
    for c in (1.0, 7.5):
        meas = StubModel(0.02 * c, mu_m=8.0, clutter_intensity=1e-4 * c)
        legacy = [_predicted(np.log(np.full(8, 0.05)), alpha_n=0.2)]
        new = [_predicted(np.log(np.full(8, 1e-8)), alpha_n=1.0, kind="new")
               for _ in range(2)]
        tables = build_tables(legacy, new, np.zeros((2, 2)), meas)
        evaluate_messages(tables)
        results.append((tables.beta_legacy.copy(), tables.beta_new.copy()))
    assert np.allclose(results[0][0], results[1][0], rtol=1e-12)
    assert np.allclose(results[0][1], results[1][1], rtol=1e-12)


def test_permutation_equivariance():
    rng = np.random.default_rng(15)
    state = [_belief(np.random.default_rng(100 + i), num_particles=64,
                     center=(i * 15.0 - 15.0, 0.0)) for i in range(3)]
    zs = np.random.default_rng(55).uniform(-25, 25, size=(6, 2))
    cfg = SpaConfig(num_particles=64)
    out1, _ = spa_step(list(state), zs, _models(), cfg,
                       np.random.default_rng(7))
    perm = [2, 0, 1]
    out2, _ = spa_step([state[i] for i in perm], zs, _models(), cfg,
                       np.random.default_rng(7))
    # legacy outputs come first, permuted exactly like the inputs
    for new_pos, old_pos in enumerate(perm):
        # prediction consumes RNG per PO in order, so existences match only
        # when the per-PO transitions are deterministic; compare via labels
        assert out2[new_pos].label == out1[old_pos].label


def test_gate_radius_censors_far_pairs():
    meas = _models().measurement
    legacy = [_predicted(np.log(np.full(8, 0.05)), alpha_n=0.2)]
    zs = np.array([[0.0, 0.0], [40.0, 40.0]])
    new = [_predicted(np.log(np.full(8, 1e-8)), alpha_n=1.0, kind="new")
           for _ in range(2)]
    tables = build_tables(legacy, new, zs, meas, gate_radius=10.0)
    evaluate_messages(tables)
    assert tables.beta_legacy[0, 1] == 0.0
    assert tables.beta_legacy[0, 0] > 0.0


def test_birth_candidates_clustering():
    zs = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, 0.5],
                   [20.0, 20.0], [21.0, 20.0]])
    mask = birth_candidates(zs, radius=3.0)
    assert mask.tolist() == [True, False, False, True, False]
    assert birth_candidates(zs, radius=None).all()


def test_birth_candidates_track_suppression():
    zs = np.array([[0.0, 0.0], [30.0, 0.0]])
    mask = birth_candidates(zs, radius=5.0,
                            track_positions=np.array([[1.0, 0.0]]))
    assert mask.tolist() == [False, True]


def test_spa_config_validation():
    with pytest.raises(InvalidModel):
        SpaConfig(num_iterations=0)
    with pytest.raises(InvalidModel):
        SpaConfig(num_particles=1)
    with pytest.raises(InvalidModel):
        SpaConfig(detection_threshold=1.5)


def test_tree_exactness_quick():
    # single legacy object, single measurement: loopy result equals
    # enumeration on the shared support
    from eotspa.oracle import enumerate_posterior
    from eotspa.validation import instance_from_predicted, run_message_passing

    rng = np.random.default_rng(16)
    meas = _models().measurement
    birth = BirthModel(1e-2, ROI, 100 * np.eye(2), 3 * np.eye(2), 100.0)
    prev = _belief(rng, num_particles=4000, existence=0.7, center=(3.0, -1.0))
    legacy = [predict_legacy(prev, IdentityTransition(), meas, 0.99, rng)]
    z = np.array([[3.5, -0.5]])
    proposal = BirthProposal(birth, meas)
    news = init_new_pos(z, birth, meas, proposal, rng, 4000)
    beliefs = run_message_passing(legacy, news, z, meas, num_iterations=2)
    post = enumerate_posterior(instance_from_predicted(legacy, news, z, meas))
    assert beliefs[0].existence == pytest.approx(post.legacy_existence[0],
                                                 abs=1e-6)
    assert beliefs[1].existence == pytest.approx(post.new_existence[0],
                                                 abs=1e-9)
