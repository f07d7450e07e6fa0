"""Independent brute-force references.

Exhaustive enumeration of the single-step posterior over association vectors
and existence variables on tiny instances with finite state supports, and
unbiased Monte Carlo evaluation of the measurement likelihood integral.
Shipped with the library so results can be reproduced outside the test suite.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import TooLarge
from .geometry import ShapeKind, eigen_decompose
from .models import MeasurementModel

MAX_LEGACY = 3
MAX_MEASUREMENTS = 4


@dataclass
class LegacySupport:
    """Finite weighted support of one legacy object, treated as exact.

    ``masses`` are the r=1 point masses after prediction (survival and
    zero-detection thinning already applied); ``alpha_n`` is the scalar
    r=0 mass.
    """

    kin: np.ndarray  # (N, dx)
    ext: np.ndarray  # (N, d, d)
    masses: np.ndarray  # (N,)
    alpha_n: float


@dataclass
class NewSupport:
    """Finite weighted support of one new potential object.

    ``masses`` approximate the birth factor with existence set, i.e. the
    importance weights mu_n f_n e^(-mu_m) / ((1 - e^(-mu_m)) J f_p); the
    non-existence mass is 1 by convention.
    """

    kin: np.ndarray
    ext: np.ndarray
    masses: np.ndarray


@dataclass
class DiscretizedInstance:
    """A single-step association problem small enough to enumerate."""

    legacy: list[LegacySupport]
    new: list[NewSupport]
    measurements: np.ndarray  # (M, dz)
    model: MeasurementModel

    def __post_init__(self):
        self.measurements = np.atleast_2d(np.asarray(self.measurements, dtype=float))
        if len(self.legacy) > MAX_LEGACY or len(self.measurements) > MAX_MEASUREMENTS:
            raise TooLarge(
                f"enumeration supports at most {MAX_LEGACY} legacy objects "
                f"and {MAX_MEASUREMENTS} measurements")
        if len(self.new) != len(self.measurements):
            raise TooLarge("need one new-object support per measurement")


@dataclass
class PosteriorEnumeration:
    """Exact marginals of the tiny instance."""

    association_marginals: list[np.ndarray]  # per l: p(b_l = v), v in 0..K+l
    legacy_existence: np.ndarray  # (K,)
    new_existence: np.ndarray  # (M,)
    log_partition: float = field(default=0.0)


def _ratio_table(model: MeasurementModel, kin, ext, measurements) -> np.ndarray:
    """mu_m * f(z_l | x, e) / (mu_fa * f_fa) per support point and measurement."""
    loglik = model.log_likelihood(measurements, kin, ext)
    mu = model.measurement_rate(kin, ext)
    return mu[:, None] * np.exp(loglik) / model.clutter_intensity()


def enumerate_posterior(inst: DiscretizedInstance) -> PosteriorEnumeration:
    """Exhaustive summation over all association configurations.

    Association variable b_l ranges over {0, ..., K + l} (1-based l): clutter,
    one of the K legacy objects, or one of the new objects with index <= l.
    """
    k_legacy = len(inst.legacy)
    m = len(inst.measurements)
    legacy_ratio = [_ratio_table(inst.model, s.kin, s.ext, inst.measurements)
                    for s in inst.legacy]
    new_ratio = [_ratio_table(inst.model, s.kin, s.ext, inst.measurements)
                 for s in inst.new]

    supports = [range(k_legacy + l + 2) for l in range(m)]  # b_l in 0..K+l+1-1
    # value coding: 0 clutter; 1..K legacy; K+1..K+l+1 new objects 1..l+1
    weights = {}
    for config in itertools.product(*supports):
        w = 1.0
        legacy_alive = np.zeros(k_legacy)
        new_alive = np.zeros(m)
        for k, sup in enumerate(inst.legacy):
            assigned = [l for l, b in enumerate(config) if b == k + 1]
            if assigned:
                term1 = float(np.sum(sup.masses
                                     * np.prod([legacy_ratio[k][:, l] for l in assigned], axis=0)))
                total = term1
            else:
                term1 = float(np.sum(sup.masses))
                total = term1 + sup.alpha_n
            w *= total
            legacy_alive[k] = term1 / total if total > 0 else 0.0
        for k, sup in enumerate(inst.new):
            own = config[k] == k_legacy + k + 1
            later = [l for l in range(k + 1, m) if config[l] == k_legacy + k + 1]
            if own:
                cols = [new_ratio[k][:, k]] + [new_ratio[k][:, l] for l in later]
                total = float(np.sum(sup.masses * np.prod(cols, axis=0)))
                new_alive[k] = 1.0
            elif later:
                total = 0.0
            else:
                total = 1.0
            w *= total
        weights[config] = (w, legacy_alive, new_alive.copy())

    z = sum(w for w, _, _ in weights.values())
    if z <= 0:
        raise ZeroDivisionError("posterior has zero total mass")

    marginals = []
    for l in range(m):
        probs = np.zeros(k_legacy + l + 2)
        for config, (w, _, _) in weights.items():
            probs[config[l]] += w
        marginals.append(probs / z)

    legacy_exist = np.zeros(k_legacy)
    new_exist = np.zeros(m)
    for config, (w, legacy_alive, new_alive) in weights.items():
        legacy_exist += w * legacy_alive
        new_exist += w * new_alive
    return PosteriorEnumeration(
        association_marginals=marginals,
        legacy_existence=legacy_exist / z,
        new_existence=new_exist / z,
        log_partition=float(np.log(z)),
    )


# ---------------------------------------------------------------------------
# Monte Carlo likelihood oracle


def mc_likelihood(z: np.ndarray, kin: np.ndarray, ext: np.ndarray,
                  shape: ShapeKind, noise_cov: np.ndarray, n_samples: int,
                  rng: np.random.Generator) -> tuple[float, float]:
    """Unbiased Monte Carlo estimate of the convolution likelihood integral.

    For the Gaussian extent model, reflections v ~ N(0, E^2) are sampled and
    the noise density is averaged.  For the uniform shapes the integral is
    rewritten as (1/|S|) P(z - p - u in S) with u drawn from the noise
    distribution, which turns each sample into a Bernoulli trial and gives a
    far tighter estimate near and inside the support.

    Returns:
        (estimate, standard_error)
    """
    if n_samples < 10_000:
        raise ValueError("use at least 1e4 samples")
    z = np.asarray(z, dtype=float)
    kin = np.asarray(kin, dtype=float)
    ext = np.asarray(ext, dtype=float)
    noise_cov = np.atleast_2d(np.asarray(noise_cov, dtype=float))
    d = noise_cov.shape[0]
    pos = kin[:d]

    if shape == ShapeKind.GAUSSIAN:
        refl = rng.multivariate_normal(np.zeros(d), ext @ ext, size=n_samples)
        diff = (z - pos)[None, :] - refl
        inv = np.linalg.inv(noise_cov)
        _, logdet = np.linalg.slogdet(noise_cov)
        quad = np.einsum("nd,de,ne->n", diff, inv, diff)
        vals = np.exp(-0.5 * (d * np.log(2 * np.pi) + logdet + quad))
        return float(np.mean(vals)), float(np.std(vals, ddof=1) / np.sqrt(n_samples))

    eig = eigen_decompose(ext)
    lams = eig.eigenvalues
    noise = rng.multivariate_normal(np.zeros(d), noise_cov, size=n_samples)
    local = (z - pos)[None, :] - noise
    local = local @ eig.eigenvectors  # rotate into the shape frame
    if shape == ShapeKind.UNIFORM_ELLIPSE:
        inside = np.sum((local / lams) ** 2, axis=1) <= 1.0
        vol = (np.pi if d == 2 else 4.0 / 3.0 * np.pi) * np.prod(lams)
    else:
        inside = np.all(np.abs(local) <= lams / 2.0, axis=1)
        vol = float(np.prod(lams))
    q = float(np.mean(inside))
    stderr = np.sqrt(max(q * (1.0 - q), 0.0) / n_samples) / vol
    return q / vol, float(stderr)
