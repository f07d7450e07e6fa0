"""One time step of the particle-based sum-product algorithm.

Prediction for legacy potential objects (POs), initialization of one new PO
per measurement, P rounds of measurement evaluation / association /
extrinsic-information updates, and the final belief calculation.  Message
products accumulate in the log domain so that steps with hundreds of
measurements neither overflow nor underflow.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp
from scipy.stats import invwishart

from .errors import InvalidModel, NumericalFailure
from .models import BirthModel, MeasurementModel, TransitionModel

LOG_FLOOR = -745.0  # exp() underflows to 0 just below this


@dataclass
class PoBelief:
    """Particle representation of one potential object.

    The weights do not sum to one: their sum is the existence probability.
    """

    kin: np.ndarray  # (J, dx)
    ext: np.ndarray  # (J, d, d)
    weights: np.ndarray  # (J,), nonnegative
    label: tuple
    kind: str = "legacy"  # "legacy" | "new"

    @property
    def existence(self) -> float:
        return float(np.sum(self.weights))

    @property
    def num_particles(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class SpaConfig:
    """Knobs of the message-passing loop.

    ``birth_cluster_radius`` enables censoring of new-PO messages: within
    each single-linkage cluster of measurements only the lowest-index one
    keeps its new-PO messages, matching the convention that a newly
    detected object is represented by its first measurement.  Duplicate
    confident births for one dense measurement cluster cannot form then.
    """

    num_iterations: int = 3
    num_particles: int = 1000
    detection_threshold: float = 0.5
    pruning_threshold: float = 1e-3
    gate_radius: float | None = None
    birth_cluster_radius: float | None = None
    order_measurements: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.num_iterations < 1:
            raise InvalidModel("need at least one message passing iteration")
        if self.num_particles < 2:
            raise InvalidModel("need at least two particles")
        if not (0.0 < self.detection_threshold < 1.0
                and 0.0 < self.pruning_threshold < 1.0):
            raise InvalidModel("thresholds must lie in (0, 1)")


@dataclass(frozen=True)
class ModelBundle:
    """The models one tracking step needs."""

    transition: TransitionModel
    measurement: MeasurementModel
    birth: BirthModel
    survival_prob: float


@dataclass
class PredictedPo:
    """A PO after prediction / initialization, before message passing."""

    kin: np.ndarray
    ext: np.ndarray
    log_w1: np.ndarray  # (J,)
    alpha_n: float
    alpha: float
    label: tuple
    kind: str


@dataclass
class StepDiagnostics:
    """Per-step bookkeeping used for complexity checks."""

    num_legacy: int
    num_measurements: int
    message_counts: list[int] = field(default_factory=list)
    runtime_ms: float = 0.0

    @property
    def expected_messages_per_iteration(self) -> int:
        m = self.num_measurements
        return self.num_legacy * m + m * (m + 1) // 2


def _safe_log(values: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.maximum(np.log(values), LOG_FLOOR)


# ---------------------------------------------------------------------------
# prediction and initialization


def predict_legacy(prev: PoBelief, transition: TransitionModel,
                   measurement: MeasurementModel, survival_prob: float,
                   rng: np.random.Generator) -> PredictedPo:
    """Propagate one legacy PO and compute its first-iteration weights.

    Each particle is pushed through the transition model; the new weight is
    the old one thinned by survival and by the probability of generating no
    measurement.  The scalar ``alpha_n`` collects the non-existence mass.
    """
    kin, ext = transition.sample(prev.kin, prev.ext, rng)
    mu = measurement.measurement_rate(kin, ext)
    log_w1 = _safe_log(prev.weights) + np.log(survival_prob if survival_prob > 0 else 1e-300) - mu
    if survival_prob == 0.0:
        log_w1 = np.full_like(log_w1, LOG_FLOOR)
    prev_existence = prev.existence
    alpha_n = (1.0 - prev_existence) + (1.0 - survival_prob) * prev_existence
    alpha = float(np.sum(np.exp(log_w1))) + alpha_n
    return PredictedPo(kin, ext, log_w1, alpha_n, alpha, prev.label, "legacy")


class BirthProposal:
    """Default proposal for new-PO particles given a measurement.

    Positions are Gaussian around the measurement with covariance equal to
    the measurement noise plus the mean extent of the birth prior; velocity
    and extent are drawn from the birth prior itself, so their densities
    cancel out of the importance weights.
    """

    def __init__(self, birth: BirthModel, measurement: MeasurementModel):
        self.birth = birth
        self.position_cov = measurement.noise_cov + birth.extent_mean
        self._pos_inv = np.linalg.inv(self.position_cov)
        sign, logdet = np.linalg.slogdet(self.position_cov)
        if sign <= 0:
            raise InvalidModel("proposal position covariance must be PD")
        self._pos_logdet = logdet

    def sample(self, z: np.ndarray, count: int,
               rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        kin, ext = self.birth.sample(count, rng)
        d = self.birth.dim
        kin[:, :d] = rng.multivariate_normal(z[:d], self.position_cov, size=count)
        return kin, ext

    def log_position_density(self, z: np.ndarray, kin: np.ndarray) -> np.ndarray:
        d = self.birth.dim
        diff = kin[:, :d] - z[None, :d]
        quad = np.einsum("nd,de,ne->n", diff, self._pos_inv, diff)
        return -0.5 * (d * np.log(2 * np.pi) + self._pos_logdet + quad)

    def log_density(self, z: np.ndarray, kin: np.ndarray, ext: np.ndarray) -> np.ndarray:
        d = self.birth.dim
        vel = kin[:, d:2 * d]
        cov_inv = np.linalg.inv(self.birth.velocity_cov)
        _, logdet = np.linalg.slogdet(self.birth.velocity_cov)
        quad = np.einsum("nd,de,ne->n", vel, cov_inv, vel)
        vel_part = -0.5 * (d * np.log(2 * np.pi) + logdet + quad)
        ext_part = invwishart.logpdf(np.moveaxis(np.atleast_3d(ext), 0, -1)
                                     if ext.ndim == 3 else ext,
                                     df=self.birth.extent_dof,
                                     scale=self.birth.extent_scale)
        return self.log_position_density(z, kin) + vel_part + np.atleast_1d(ext_part)


def init_new_pos(measurements: np.ndarray, birth: BirthModel,
                 measurement: MeasurementModel, proposal: BirthProposal,
                 rng: np.random.Generator, num_particles: int,
                 labels: list[tuple] | None = None,
                 max_retries: int = 10) -> list[PredictedPo]:
    """Spawn one new PO per measurement with importance-weighted particles.

    Weights evaluate the birth factor with existence set against the
    proposal; the velocity and extent parts of the proposal coincide with
    the birth prior and cancel, leaving the position ratio and the
    zero-truncated Poisson factor.
    """
    measurements = np.atleast_2d(np.asarray(measurements, dtype=float))
    m = measurements.shape[0]
    out = []
    for k in range(m):
        z = measurements[k]
        kin, ext = proposal.sample(z, num_particles, rng)
        log_fp = proposal.log_position_density(z, kin)
        for _ in range(max_retries):
            bad = ~np.isfinite(log_fp)
            if not np.any(bad):
                break
            kin_r, ext_r = proposal.sample(z, int(bad.sum()), rng)
            kin[bad] = kin_r
            ext[bad] = ext_r
            log_fp[bad] = proposal.log_position_density(z, kin_r)
        else:
            raise NumericalFailure("proposal density vanished at drawn samples")
        mu = measurement.measurement_rate(kin, ext)
        mu_safe = np.maximum(mu, 1e-12)
        log_trunc = -mu_safe - np.log(-np.expm1(-mu_safe))
        d = birth.dim
        log_fn_pos = np.where(birth.roi.contains(kin[:, :d]),
                              -np.log(birth.roi.area), -np.inf)
        log_w1 = (np.log(birth.mean_births) + log_fn_pos + log_trunc
                  - log_fp - np.log(num_particles))
        log_w1 = np.maximum(log_w1, LOG_FLOOR)
        alpha = float(np.sum(np.exp(log_w1))) + 1.0
        label = labels[k] if labels is not None else ("new", k)
        out.append(PredictedPo(kin, ext, log_w1, 1.0, alpha, label, "new"))
    return out


# ---------------------------------------------------------------------------
# message tables


@dataclass
class MessageTables:
    """All per-iteration state of the message passing loop.

    Legacy tables are dense (K, J, M); new-PO tables are ragged lists since
    new PO k only interacts with measurements l >= k.  ``beta_new`` and
    ``xi_new`` are stored dense (M, M) with zeros below the diagonal.
    """

    num_legacy: int
    num_measurements: int
    legacy_log_ratio: np.ndarray  # (K, J, M)
    legacy_log_w: np.ndarray  # (K, J, M)
    legacy_log_w1: np.ndarray  # (K, J)
    legacy_log_alpha: np.ndarray  # (K, M)
    legacy_log_alpha_n: np.ndarray  # (K, M)
    legacy_log_alpha_n0: np.ndarray  # (K,)
    new_log_ratio: list[np.ndarray]  # per k: (J, M - k)
    new_log_w: list[np.ndarray]  # per k: (J, M - k)
    new_log_w1: list[np.ndarray]  # per k: (J,)
    new_log_alpha: list[np.ndarray]  # per k: (M - k,)
    new_log_alpha_n: list[np.ndarray]  # per k: (M - k,)
    beta_legacy: np.ndarray  # (K, M)
    beta_new: np.ndarray  # (M, M)
    xi_legacy: np.ndarray  # (K, M)
    xi_new: np.ndarray  # (M, M)

    @property
    def message_count(self) -> int:
        m = self.num_measurements
        return self.num_legacy * m + m * (m + 1) // 2


def birth_candidates(measurements: np.ndarray, radius: float | None,
                     track_positions: np.ndarray | None = None) -> np.ndarray:
    """Boolean mask of measurements whose new PO keeps its messages.

    Two censoring rules share the radius: measurements within the radius of
    an existing track position are not birth candidates, and within each
    single-linkage cluster of the remaining measurements only the lowest
    index keeps its candidacy (a newly detected object is represented by
    its first measurement).  With ``radius=None`` every measurement is a
    candidate.
    """
    measurements = np.atleast_2d(np.asarray(measurements, dtype=float))
    m = measurements.shape[0]
    if radius is None or m == 0:
        return np.ones(m, dtype=bool)
    free = np.ones(m, dtype=bool)
    if track_positions is not None and len(track_positions):
        track_positions = np.atleast_2d(np.asarray(track_positions, dtype=float))
        d2 = np.sum((measurements[:, None, :] - track_positions[None, :, :]) ** 2,
                    axis=2)
        free = np.min(d2, axis=1) > radius * radius
    parent = np.arange(m)

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    idx = np.flatnonzero(free)
    if idx.size > 1:
        dist2 = np.sum((measurements[idx, None, :]
                        - measurements[None, idx, :]) ** 2, axis=2)
        close = dist2 <= radius * radius
        for a in range(idx.size):
            for b in range(a + 1, idx.size):
                if close[a, b]:
                    ra, rb = find(idx[a]), find(idx[b])
                    if ra != rb:
                        parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(i) for i in range(m)])
    return free & (roots == np.arange(m))


def build_tables(legacy: list[PredictedPo], new: list[PredictedPo],
                 measurements: np.ndarray, measurement: MeasurementModel,
                 gate_radius: float | None = None,
                 workers: int = 1,
                 candidates: np.ndarray | None = None) -> MessageTables:
    """Precompute likelihood-ratio tables and first-iteration weights."""
    measurements = np.atleast_2d(np.asarray(measurements, dtype=float))
    k_n = len(legacy)
    m_n = measurements.shape[0]

    def legacy_task(k):
        po = legacy[k]
        j = po.log_w1.shape[0]
        lr = _log_ratio(po, measurements, measurement, gate_radius)
        lw = np.broadcast_to(po.log_w1[:, None], (j, m_n)).copy()
        return lr, lw

    def new_task(k):
        po = new[k]
        zs = measurements[k:]
        lr = _log_ratio(po, zs, measurement, gate_radius)
        if candidates is not None and not candidates[k]:
            # censored new PO: forcing the mandatory own-measurement ratio
            # to zero mutes all of its messages and drives its belief to
            # the prior level
            lr[:, 0] = LOG_FLOOR
        j = po.log_w1.shape[0]
        lw = np.broadcast_to(po.log_w1[:, None], (j, m_n - k)).copy()
        return lr, lw

    legacy_out = _run_tasks(legacy_task, k_n, workers)
    new_out = _run_tasks(new_task, m_n, workers)

    j_l = legacy[0].log_w1.shape[0] if legacy else 0
    legacy_log_ratio = (np.stack([o[0] for o in legacy_out])
                        if legacy else np.zeros((0, j_l, m_n)))
    legacy_log_w = (np.stack([o[1] for o in legacy_out])
                    if legacy else np.zeros((0, j_l, m_n)))
    legacy_log_w1 = (np.stack([po.log_w1 for po in legacy])
                     if legacy else np.zeros((0, j_l)))
    legacy_log_alpha = np.array([[_safe_log1(po.alpha)] * m_n for po in legacy]
                                ).reshape(k_n, m_n)
    legacy_log_alpha_n0 = np.array([_safe_log1(po.alpha_n) for po in legacy])
    legacy_log_alpha_n = np.repeat(legacy_log_alpha_n0[:, None], m_n, axis=1) \
        if k_n else np.zeros((0, m_n))

    return MessageTables(
        num_legacy=k_n,
        num_measurements=m_n,
        legacy_log_ratio=legacy_log_ratio,
        legacy_log_w=legacy_log_w,
        legacy_log_w1=legacy_log_w1,
        legacy_log_alpha=legacy_log_alpha,
        legacy_log_alpha_n=legacy_log_alpha_n,
        legacy_log_alpha_n0=legacy_log_alpha_n0,
        new_log_ratio=[o[0] for o in new_out],
        new_log_w=[o[1] for o in new_out],
        new_log_w1=[po.log_w1 for po in new],
        new_log_alpha=[np.full(m_n - k, _safe_log1(new[k].alpha))
                       for k in range(m_n)],
        new_log_alpha_n=[np.zeros(m_n - k) for k in range(m_n)],
        beta_legacy=np.zeros((k_n, m_n)),
        beta_new=np.zeros((m_n, m_n)),
        xi_legacy=np.ones((k_n, m_n)),
        xi_new=np.ones((m_n, m_n)),
    )


def _safe_log1(value: float) -> float:
    return float(np.log(value)) if value > 0 else LOG_FLOOR


def _log_ratio(po: PredictedPo, zs: np.ndarray, measurement: MeasurementModel,
               gate_radius: float | None) -> np.ndarray:
    loglik = measurement.log_likelihood(zs, po.kin, po.ext)
    mu = measurement.measurement_rate(po.kin, po.ext)
    lr = _safe_log(mu)[:, None] + loglik - np.log(measurement.clutter_intensity())
    lr = np.maximum(lr, LOG_FLOOR)
    if gate_radius is not None:
        d = measurement.dim
        pos = po.kin[:, :d]
        dist2 = np.sum((zs[None, :, :] - pos[:, None, :]) ** 2, axis=2)
        gated = np.min(dist2, axis=0) > gate_radius**2
        lr[:, gated] = LOG_FLOOR
    return lr


def _run_tasks(task, count, workers):
    if workers <= 1 or count <= 1:
        return [task(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(task, range(count)))


# ---------------------------------------------------------------------------
# one message passing iteration


def evaluate_messages(tables: MessageTables, workers: int = 1) -> None:
    """Fill the beta tables from the current per-pair particle weights.

    The own-measurement message of a new PO is normalized by its
    non-existence mass rather than its total mass.
    """
    m_n = tables.num_measurements

    def legacy_task(k):
        lam = tables.legacy_log_w[k] + tables.legacy_log_ratio[k]
        log_num = logsumexp(lam, axis=0)
        tables.beta_legacy[k] = np.exp(log_num - tables.legacy_log_alpha[k])

    def new_task(k):
        lam = tables.new_log_w[k] + tables.new_log_ratio[k]
        log_num = logsumexp(lam, axis=0)
        log_den = tables.new_log_alpha[k].copy()
        log_den[0] = tables.new_log_alpha_n[k][0]
        tables.beta_new[k, k:] = np.exp(log_num - log_den)

    _run_tasks(legacy_task, tables.num_legacy, workers)
    _run_tasks(new_task, m_n, workers)
    np.nan_to_num(tables.beta_legacy, copy=False)
    np.nan_to_num(tables.beta_new, copy=False)


def compute_xi(beta_legacy: np.ndarray, beta_new: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Association sums: each entry aggregates the other POs' beta messages.

    Computed from per-measurement totals so the whole table costs
    O(KM + M^2) instead of O((K + M)^2 M).
    """
    totals = beta_legacy.sum(axis=0) + beta_new.sum(axis=0) + 1.0
    xi_legacy = totals[None, :] - beta_legacy
    xi_new = totals[None, :] - beta_new
    return xi_legacy, xi_new


def extrinsic_update(tables: MessageTables, workers: int = 1) -> None:
    """Per-pair weights for the next iteration via leave-one-out products.

    For each PO the product over all measurements is accumulated once in the
    log domain and each pair then divides out its own factor, which keeps
    the iteration linear in the number of pairs.
    """
    log_xi_legacy = _safe_log(tables.xi_legacy)
    log_xi_new = _safe_log(tables.xi_new)

    def legacy_task(k):
        factors = np.logaddexp(tables.legacy_log_ratio[k], log_xi_legacy[k][None, :])
        total = factors.sum(axis=1)
        log_w = tables.legacy_log_w1[k][:, None] + (total[:, None] - factors)
        tables.legacy_log_w[k] = log_w
        xi_total = log_xi_legacy[k].sum()
        log_alpha_n = tables.legacy_log_alpha_n0[k] + (xi_total - log_xi_legacy[k])
        log_sum_w = logsumexp(log_w, axis=0)
        tables.legacy_log_alpha_n[k] = log_alpha_n
        tables.legacy_log_alpha[k] = np.logaddexp(log_sum_w, log_alpha_n)

    def new_task(k):
        # The own-measurement factor contributes the bare likelihood ratio
        # (a new PO exists only if it generated its own measurement), and it
        # is left out of the message sent back to that measurement (l = k).
        own = tables.new_log_ratio[k][:, 0]
        rest = tables.new_log_ratio[k][:, 1:]
        log_xi_k = log_xi_new[k, k:]
        factors = np.logaddexp(rest, log_xi_k[1:][None, :])
        total = factors.sum(axis=1)
        base = tables.new_log_w1[k] + own + total
        log_w = np.concatenate([(tables.new_log_w1[k] + total)[:, None],
                                base[:, None] - factors], axis=1)
        tables.new_log_w[k] = log_w
        xi_total = log_xi_k.sum()
        log_alpha_n = xi_total - log_xi_k
        log_sum_w = logsumexp(log_w, axis=0)
        tables.new_log_alpha_n[k] = log_alpha_n
        tables.new_log_alpha[k] = np.logaddexp(log_sum_w, log_alpha_n)

    _run_tasks(legacy_task, tables.num_legacy, workers)
    _run_tasks(new_task, tables.num_measurements, workers)


def compute_beliefs(tables: MessageTables, legacy: list[PredictedPo],
                    new: list[PredictedPo], workers: int = 1) -> list[PoBelief]:
    """Final normalized particle weights for every legacy and new PO."""
    log_xi_legacy = _safe_log(tables.xi_legacy)
    log_xi_new = _safe_log(tables.xi_new)
    out: list[PoBelief | None] = [None] * (len(legacy) + len(new))

    def legacy_task(k):
        po = legacy[k]
        factors = np.logaddexp(tables.legacy_log_ratio[k], log_xi_legacy[k][None, :])
        lam_a = tables.legacy_log_w1[k] + factors.sum(axis=1)
        log_wb = tables.legacy_log_alpha_n0[k] + log_xi_legacy[k].sum()
        out[k] = _normalize(po, lam_a, log_wb)

    def new_task(k):
        po = new[k]
        own = tables.new_log_ratio[k][:, 0]
        rest = tables.new_log_ratio[k][:, 1:]
        log_xi_k = log_xi_new[k, k:]
        factors = np.logaddexp(rest, log_xi_k[1:][None, :])
        lam_a = tables.new_log_w1[k] + own + factors.sum(axis=1)
        log_wb = log_xi_k.sum()
        out[len(legacy) + k] = _normalize(po, lam_a, log_wb)

    _run_tasks(legacy_task, len(legacy), workers)
    _run_tasks(new_task, len(new), workers)
    return out  # type: ignore[return-value]


def _normalize(po: PredictedPo, lam_a: np.ndarray, log_wb: float) -> PoBelief:
    log_sum_a = logsumexp(lam_a)
    if not np.isfinite(log_sum_a) and not np.isfinite(log_wb):
        j = lam_a.shape[0]
        return PoBelief(po.kin, po.ext, np.zeros(j), po.label, po.kind)
    norm = np.logaddexp(log_wb, log_sum_a)
    weights = np.exp(lam_a - norm)
    return PoBelief(po.kin, po.ext, weights, po.label, po.kind)


# ---------------------------------------------------------------------------
# full step


def spa_step(state: list[PoBelief], measurements: np.ndarray,
             models: ModelBundle, config: SpaConfig, rng: np.random.Generator,
             step_index: int = 0) -> tuple[list[PoBelief], StepDiagnostics]:
    """Run one complete time step and return updated beliefs plus diagnostics."""
    t0 = time.perf_counter()
    measurements = (np.asarray(measurements, dtype=float).reshape(-1, models.measurement.dim)
                    if np.size(measurements) else np.zeros((0, models.measurement.dim)))
    if config.order_measurements and measurements.shape[0] > 1:
        order = np.lexsort(measurements.T[::-1])
        measurements = measurements[order]

    legacy = [predict_legacy(b, models.transition, models.measurement,
                             models.survival_prob, rng) for b in state]
    diag = StepDiagnostics(num_legacy=len(legacy),
                           num_measurements=measurements.shape[0])
    if measurements.shape[0] == 0:
        beliefs = [_no_measurement_belief(po) for po in legacy]
        diag.runtime_ms = (time.perf_counter() - t0) * 1e3
        return beliefs, diag
    proposal = BirthProposal(models.birth, models.measurement)
    labels = [(step_index, k) for k in range(measurements.shape[0])]
    new = init_new_pos(measurements, models.birth, models.measurement,
                       proposal, rng, config.num_particles, labels=labels)

    track_anchors = _confident_positions(state, legacy, models.measurement.dim)
    tables = build_tables(legacy, new, measurements, models.measurement,
                          config.gate_radius, config.workers,
                          candidates=birth_candidates(measurements,
                                                      config.birth_cluster_radius,
                                                      track_anchors))
    for p in range(config.num_iterations):
        evaluate_messages(tables, config.workers)
        diag.message_counts.append(tables.message_count)
        tables.xi_legacy, tables.xi_new = compute_xi(tables.beta_legacy,
                                                     tables.beta_new)
        if p + 1 < config.num_iterations:
            extrinsic_update(tables, config.workers)
    beliefs = compute_beliefs(tables, legacy, new, config.workers)
    diag.runtime_ms = (time.perf_counter() - t0) * 1e3
    return beliefs, diag


def _no_measurement_belief(po: PredictedPo) -> PoBelief:
    """Belief update when no measurement arrived: only thinning applies."""
    lam_a = po.log_w1
    log_wb = _safe_log1(po.alpha_n)
    return _normalize(po, lam_a, log_wb)


def _confident_positions(state: list[PoBelief], predicted: list[PredictedPo],
                         dim: int, min_existence: float = 0.1) -> np.ndarray:
    """Mean predicted positions of legacy POs that plausibly exist."""
    anchors = []
    for prev, po in zip(state, predicted):
        if prev.existence <= min_existence:
            continue
        w = np.exp(po.log_w1 - po.log_w1.max())
        total = w.sum()
        if total <= 0:
            continue
        anchors.append((w @ po.kin[:, :dim]) / total)
    return np.asarray(anchors) if anchors else np.zeros((0, dim))
