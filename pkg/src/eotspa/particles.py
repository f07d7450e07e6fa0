"""Detection, MMSE extraction, pruning, and resampling on PO beliefs."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .engine import PoBelief
from .errors import NoExistence
from .geometry import ShapeKind, orientation_angle

EIGENVALUE_FLOOR = 0.0


@dataclass
class TrackEstimate:
    """MMSE point estimate of one detected object."""

    label: tuple
    existence: float
    kin: np.ndarray
    ext: np.ndarray
    size: float
    orientation: float


def estimate(belief: PoBelief, shape: ShapeKind = ShapeKind.UNIFORM_ELLIPSE) -> TrackEstimate:
    """Weighted particle means of the kinematic and extent states.

    The extent mean is projected back onto the PSD cone by clamping
    eigenvalues at zero (the mean of PSD matrices is PSD, so this only
    guards floating-point noise).  Size follows the ellipse-area convention
    unless the shape is a cube, and orientation is the leading eigenvector
    angle restricted to [0, pi).
    """
    p_e = belief.existence
    if p_e <= 0:
        raise NoExistence("cannot estimate a belief with zero existence")
    w = belief.weights / p_e
    kin_hat = w @ belief.kin
    ext_hat = np.einsum("j,jab->ab", w, belief.ext)
    ext_hat = 0.5 * (ext_hat + ext_hat.T)
    vals, vecs = np.linalg.eigh(ext_hat)
    if np.any(vals < EIGENVALUE_FLOOR):
        vals = np.maximum(vals, EIGENVALUE_FLOOR)
        ext_hat = (vecs * vals) @ vecs.T
    lams = np.sort(vals)[::-1]
    if shape == ShapeKind.UNIFORM_CUBE:
        size = float(np.prod(lams))
    else:
        d = lams.size
        unit = np.pi if d == 2 else 4.0 / 3.0 * np.pi
        size = float(unit * np.prod(lams))
    return TrackEstimate(
        label=belief.label,
        existence=p_e,
        kin=kin_hat,
        ext=ext_hat,
        size=size,
        orientation=orientation_angle(ext_hat),
    )


def detect(beliefs: list[PoBelief], threshold: float) -> list[PoBelief]:
    """Beliefs whose existence probability strictly exceeds the threshold."""
    return [b for b in beliefs if b.existence > threshold]


def prune(beliefs: list[PoBelief], threshold: float) -> list[PoBelief]:
    """Drop beliefs whose existence probability falls below the threshold."""
    return [b for b in beliefs if b.existence >= threshold]


def systematic_indices(weights: np.ndarray, count: int,
                       rng: np.random.Generator) -> np.ndarray:
    """Systematic resampling: one uniform offset, evenly spaced points."""
    cumsum = np.cumsum(weights)
    cumsum /= cumsum[-1]
    points = (rng.uniform() + np.arange(count)) / count
    idx = np.searchsorted(cumsum, points)
    return np.minimum(idx, weights.size - 1)


def resample(belief: PoBelief, count: int, rng: np.random.Generator,
             jitter_std: float = 0.0) -> PoBelief:
    """Resample to ``count`` equal-weight particles, conserving existence.

    The weight sum is conserved to one ulp under exactly-rounded summation,
    which is why the existence probability is taken via ``math.fsum`` here.
    Optional Gaussian jitter on the positions counters sample
    impoverishment; it is off by default.
    """
    p_e = math.fsum(belief.weights)
    if p_e <= 0:
        raise NoExistence("cannot resample a belief with zero existence")
    idx = systematic_indices(belief.weights, count, rng)
    kin = belief.kin[idx].copy()
    ext = belief.ext[idx].copy()
    if jitter_std > 0:
        d = ext.shape[1]
        kin[:, :d] += rng.normal(scale=jitter_std, size=(count, d))
    weights = np.full(count, p_e / count)
    return PoBelief(kin, ext, weights, belief.label, belief.kind)


def effective_sample_size(weights: np.ndarray) -> float:
    total = np.sum(weights)
    if total <= 0:
        return 0.0
    w = weights / total
    return float(1.0 / np.sum(w * w))
