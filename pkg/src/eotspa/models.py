"""Probabilistic model ingredients.

State transition (nearly-constant-velocity kinematics with a Wishart extent
evolution), the three measurement likelihood forms (Gaussian extent, uniform
ellipse, uniform cube), Poisson measurement/clutter/birth processes, and the
JSON-serializable model configuration.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc
from scipy.stats import invwishart

from .errors import DegenerateSupport, InvalidModel
from .geometry import ShapeKind, eigen_decompose, ellipse_closest_point

EIGENVALUE_FLOOR = 1e-12


def qfunc(x):
    """Gaussian tail probability Q(x) = P(N(0,1) > x)."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / np.sqrt(2.0))


# ---------------------------------------------------------------------------
# region of interest / clutter


@dataclass(frozen=True)
class Roi:
    """Axis-aligned rectangular region of interest, in meters."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if self.x_max <= self.x_min or self.y_max <= self.y_min:
            raise InvalidModel("ROI must have positive area")

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    @property
    def bounds(self) -> np.ndarray:
        return np.array([[self.x_min, self.x_max], [self.y_min, self.y_max]])

    def contains(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return ((pts[:, 0] >= self.x_min) & (pts[:, 0] <= self.x_max)
                & (pts[:, 1] >= self.y_min) & (pts[:, 1] <= self.y_max))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        lo = np.array([self.x_min, self.y_min])
        hi = np.array([self.x_max, self.y_max])
        return rng.uniform(lo, hi, size=(n, 2))


# ---------------------------------------------------------------------------
# measurement rate


@dataclass(frozen=True)
class RateSpec:
    """How the Poisson mean of object-originated measurements is computed.

    kind is one of:
      * "fixed": constant ``mu_m``;
      * "density": spatial density ``rho`` times the shape support volume;
      * "state": read from a kinematic state component at ``index``.
    """

    kind: str = "fixed"
    mu_m: float = 8.0
    rho: float = 1.0
    index: int = 0

    def __post_init__(self):
        if self.kind not in ("fixed", "density", "state"):
            raise InvalidModel(f"unknown rate spec kind {self.kind!r}")
        if self.kind == "fixed" and self.mu_m < 0:
            raise InvalidModel("mu_m must be >= 0")
        if self.kind == "density" and self.rho < 0:
            raise InvalidModel("rho must be >= 0")


# ---------------------------------------------------------------------------
# kinematic + extent transition


def ncv_matrices(period: float, dim: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Nearly-constant-velocity transition and noise-input matrices.

    State layout is [position, velocity]; the driving noise is a white
    acceleration of dimension ``dim``.
    """
    a = np.eye(2 * dim)
    a[:dim, dim:] = period * np.eye(dim)
    w = np.vstack([0.5 * period**2 * np.eye(dim), period * np.eye(dim)])
    return a, w


@dataclass(frozen=True)
class TransitionModel:
    """Kinematic NCV transition plus Wishart extent evolution.

    The extent propagates as E' ~ Wishart(q, V E V^T / q); larger degrees of
    freedom q mean less extent diffusion.  ``rotation`` selects V: "identity"
    or "heading" (rotate by the velocity heading, 2-D only).
    """

    transition_matrix: np.ndarray
    noise_input: np.ndarray
    sigma_c: float
    q_wishart: float
    rotation: str = "identity"

    def __post_init__(self):
        dim = self.noise_input.shape[1]
        if self.q_wishart <= dim - 1:
            raise InvalidModel(f"Wishart dof {self.q_wishart} must exceed d_p - 1 = {dim - 1}")
        if self.sigma_c <= 0:
            raise InvalidModel("sigma_c must be > 0")
        if self.rotation not in ("identity", "heading"):
            raise InvalidModel(f"unknown rotation policy {self.rotation!r}")

    @property
    def dim(self) -> int:
        return self.noise_input.shape[1]

    @classmethod
    def ncv(cls, period: float, sigma_c: float, q_wishart: float,
            dim: int = 2, rotation: str = "identity") -> "TransitionModel":
        a, w = ncv_matrices(period, dim)
        return cls(a, w, sigma_c, q_wishart, rotation)

    def rotation_for(self, kin: np.ndarray) -> np.ndarray:
        """Rotation matrices V(m), one per particle row."""
        kin = np.atleast_2d(kin)
        n = kin.shape[0]
        d = self.dim
        if self.rotation == "identity":
            return np.broadcast_to(np.eye(d), (n, d, d))
        if d != 2:
            raise InvalidModel("heading rotation is only defined for 2-D states")
        vel = kin[:, d:2 * d]
        theta = np.arctan2(vel[:, 1], vel[:, 0])
        c, s = np.cos(theta), np.sin(theta)
        rot = np.empty((n, 2, 2))
        rot[:, 0, 0] = c
        rot[:, 0, 1] = -s
        rot[:, 1, 0] = s
        rot[:, 1, 1] = c
        return rot

    def sample(self, kin: np.ndarray, ext: np.ndarray,
               rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Propagate particle rows (kin: (J, dx), ext: (J, d, d)) one step."""
        kin = np.atleast_2d(np.asarray(kin, dtype=float))
        ext = np.asarray(ext, dtype=float)
        single = ext.ndim == 2
        if single:
            ext = ext[None]
        n = kin.shape[0]
        d = self.dim
        noise = rng.normal(scale=self.sigma_c, size=(n, d))
        kin_new = kin @ self.transition_matrix.T + noise @ self.noise_input.T
        rot = self.rotation_for(kin)
        scale = np.einsum("nij,njk,nlk->nil", rot, ext, rot) / self.q_wishart
        ext_new = sample_wishart(self.q_wishart, scale, rng)
        if single:
            return kin_new[0], ext_new[0]
        return kin_new, ext_new


def sample_wishart(dof: float, scale: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draw Wishart matrices via the Bartlett decomposition, one per scale row.

    Scales are symmetrized and eigenvalue-floored before the Cholesky factor
    is taken, so nearly-singular extents remain usable.
    """
    scale = np.asarray(scale, dtype=float)
    single = scale.ndim == 2
    if single:
        scale = scale[None]
    n, d, _ = scale.shape
    if dof <= d - 1:
        raise InvalidModel(f"Wishart dof {dof} must exceed {d - 1}")
    scale = 0.5 * (scale + np.swapaxes(scale, 1, 2))
    try:
        chol = np.linalg.cholesky(scale)
    except np.linalg.LinAlgError:
        chol = np.linalg.cholesky(_clamp_psd(scale) + EIGENVALUE_FLOOR * np.eye(d))
    bart = np.zeros((n, d, d))
    for i in range(d):
        bart[:, i, i] = np.sqrt(rng.chisquare(dof - i, size=n))
        for j in range(i):
            bart[:, i, j] = rng.normal(size=n)
    factor = chol @ bart
    out = factor @ np.swapaxes(factor, 1, 2)
    out = 0.5 * (out + np.swapaxes(out, 1, 2))
    if single:
        return out[0]
    return out


def _clamp_psd(mats: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(mats)
    vals = np.maximum(vals, EIGENVALUE_FLOOR)
    return np.einsum("...ij,...j,...kj->...ik", vecs, vals, vecs)


def survival_transition_density(survived: bool, existed: bool, p_s: float) -> float:
    """Discrete part of the augmented transition (the dummy pdf is marginalized).

    Returns the factor multiplying the kinematic/extent transition density:
    the density itself must be applied by the caller when both flags are set.
    """
    if not existed:
        return 0.0 if survived else 1.0
    return p_s if survived else 1.0 - p_s


# ---------------------------------------------------------------------------
# measurement model


@dataclass(frozen=True)
class MeasurementModel:
    """Additive measurement model z = p + v + u with three reflection models.

    ``v`` follows the shape model (Gaussian with covariance E^2, or uniform
    on the elliptical/cubical support of E); ``u`` is Gaussian noise with
    covariance ``noise_cov``.  Clutter is Poisson with mean ``clutter_mean``;
    its density is treated as the constant 1/area(ROI) so that likelihood
    ratios stay finite for measurements that leave the ROI by noise.
    """

    shape: ShapeKind
    noise_cov: np.ndarray
    clutter_mean: float
    roi: Roi
    rate: RateSpec = field(default_factory=RateSpec)

    def __post_init__(self):
        cov = np.atleast_2d(np.asarray(self.noise_cov, dtype=float))
        object.__setattr__(self, "noise_cov", cov)
        if self.clutter_mean < 0:
            raise InvalidModel("clutter mean must be >= 0")
        vals = np.linalg.eigvalsh(cov)
        if np.any(vals < -1e-12):
            raise InvalidModel("noise covariance must be PSD")

    @classmethod
    def isotropic(cls, shape: ShapeKind, sigma_u: float, clutter_mean: float,
                  roi: Roi, rate: RateSpec | None = None, dim: int = 2) -> "MeasurementModel":
        return cls(shape, sigma_u**2 * np.eye(dim), clutter_mean, roi,
                   rate or RateSpec())

    @property
    def dim(self) -> int:
        return self.noise_cov.shape[0]

    @property
    def noise_is_isotropic(self) -> bool:
        cov = self.noise_cov
        off = cov - np.diag(np.diag(cov))
        diag = np.diag(cov)
        return (np.abs(off).max() <= 1e-12 * max(diag.max(), 1e-300)
                and np.ptp(diag) <= 1e-12 * diag.max())

    def clutter_density(self, z=None) -> float:
        return 1.0 / self.roi.area

    def clutter_intensity(self) -> float:
        """mu_fa * f_fa, the denominator of every likelihood ratio."""
        value = self.clutter_mean * self.clutter_density()
        if value <= 0:
            raise InvalidModel("clutter intensity must be strictly positive")
        return value

    # -- measurement rate ---------------------------------------------------

    def measurement_rate(self, kin: np.ndarray, ext: np.ndarray) -> np.ndarray:
        """Poisson mean of object measurements for each particle row."""
        kin = np.atleast_2d(np.asarray(kin, dtype=float))
        n = kin.shape[0]
        if self.rate.kind == "fixed":
            return np.full(n, float(self.rate.mu_m))
        if self.rate.kind == "state":
            return np.maximum(kin[:, self.rate.index], 0.0)
        ext = np.asarray(ext, dtype=float)
        if ext.ndim == 2:
            ext = np.broadcast_to(ext, (n,) + ext.shape)
        lams = np.linalg.eigvalsh(ext)
        lams = np.maximum(lams, 0.0)
        if self.shape == ShapeKind.UNIFORM_CUBE:
            vol = np.prod(lams, axis=1)
        else:
            d = lams.shape[1]
            unit = np.pi if d == 2 else 4.0 / 3.0 * np.pi
            vol = unit * np.prod(lams, axis=1)
        return self.rate.rho * vol

    # -- likelihood ---------------------------------------------------------

    def log_likelihood(self, zs: np.ndarray, kin: np.ndarray,
                       ext: np.ndarray) -> np.ndarray:
        """log f(z_l | x, e) for every particle row and measurement.

        Args:
            zs: (M, dz) measurements.
            kin: (J, dx) kinematic particles (position first).
            ext: (J, d, d) extent particles.

        Returns:
            (J, M) array of log densities.
        """
        zs = np.atleast_2d(np.asarray(zs, dtype=float))
        kin = np.atleast_2d(np.asarray(kin, dtype=float))
        ext = np.asarray(ext, dtype=float)
        if ext.ndim == 2:
            ext = ext[None]
        d = self.dim
        pos = kin[:, :d]
        diff = zs[None, :, :] - pos[:, None, :]  # (J, M, d)
        if self.shape == ShapeKind.GAUSSIAN:
            return self._log_gaussian(diff, ext)
        if self.shape == ShapeKind.UNIFORM_CUBE and self.noise_is_isotropic:
            return self._log_cube_exact(diff, ext)
        return self._log_uniform_qapprox(diff, ext)

    def likelihood(self, z: np.ndarray, kin: np.ndarray, ext: np.ndarray) -> float:
        """Scalar f(z | x, e) for a single particle."""
        out = self.log_likelihood(np.asarray(z, float)[None, :],
                                  np.asarray(kin, float)[None, :],
                                  np.asarray(ext, float)[None])
        return float(np.exp(out[0, 0]))

    def _log_gaussian(self, diff: np.ndarray, ext: np.ndarray) -> np.ndarray:
        cov = np.einsum("jab,jbc->jac", ext, ext) + self.noise_cov[None]
        d = diff.shape[2]
        if d == 2:
            c00 = cov[:, 0, 0][:, None]
            c01 = cov[:, 0, 1][:, None]
            c11 = cov[:, 1, 1][:, None]
            det = c00 * c11 - c01 * c01
            dx = diff[:, :, 0]
            dy = diff[:, :, 1]
            quad = (c11 * dx * dx - 2.0 * c01 * dx * dy + c00 * dy * dy) / det
            return -np.log(2.0 * np.pi) - 0.5 * np.log(det) - 0.5 * quad
        chol = np.linalg.cholesky(cov)
        sol = np.linalg.solve(chol[:, None, :, :],
                              diff[:, :, :, None])[..., 0]
        quad = np.sum(sol * sol, axis=2)
        logdet = 2.0 * np.sum(np.log(np.diagonal(chol, axis1=1, axis2=2)), axis=1)
        return -0.5 * (d * np.log(2.0 * np.pi) + logdet[:, None] + quad)

    def _log_cube_exact(self, diff: np.ndarray, ext: np.ndarray) -> np.ndarray:
        """Exact cube likelihood for iid noise: per-axis product of Q differences."""
        sigma = float(np.sqrt(self.noise_cov[0, 0]))
        lams, vecs = np.linalg.eigh(ext)
        lams = lams[:, ::-1]
        vecs = vecs[:, :, ::-1]
        if np.any(lams <= 0):
            raise DegenerateSupport("cube support has a non-positive side")
        coords = np.einsum("jda,jmd->jma", vecs, diff)  # (J, M, d)
        half = lams[:, None, :] / 2.0
        log_f = np.log(np.maximum(qfunc((coords - half) / sigma)
                                  - qfunc((coords + half) / sigma), 1e-300))
        vol = np.prod(lams, axis=1)
        return np.sum(log_f, axis=2) - np.log(vol)[:, None]

    def _log_uniform_qapprox(self, diff: np.ndarray, ext: np.ndarray) -> np.ndarray:
        """Q-function approximation for uniform supports with any noise covariance.

        Uses the signed distance to the closest boundary point and the noise
        standard deviation projected on the boundary-to-measurement direction.
        """
        j_n, m_n, d = diff.shape
        lams, vecs = np.linalg.eigh(ext)
        lams = lams[:, ::-1]
        vecs = vecs[:, :, ::-1]
        if np.any(lams <= 0):
            raise DegenerateSupport("uniform support has a non-positive dimension")
        coords = np.einsum("jda,jmd->jma", vecs, diff)
        out = np.empty((j_n, m_n))
        for j in range(j_n):
            dist, inside, normal_local = _signed_boundary(
                lams[j], coords[j], self.shape)
            normal_world = normal_local @ vecs[j].T
            sig2 = np.einsum("md,de,me->m", normal_world, self.noise_cov,
                             normal_world)
            sig = np.sqrt(np.maximum(sig2, 1e-300))
            arg = np.where(inside, -dist / sig, dist / sig)
            if self.shape == ShapeKind.UNIFORM_CUBE:
                vol = np.prod(lams[j])
            else:
                unit = np.pi if d == 2 else 4.0 / 3.0 * np.pi
                vol = unit * np.prod(lams[j])
            out[j] = np.log(np.maximum(qfunc(arg), 1e-300)) - np.log(vol)
        return out


def _signed_boundary(lams: np.ndarray, coords: np.ndarray,
                     shape: ShapeKind) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Distance to boundary, inside flag, and local normal for many points."""
    if shape == ShapeKind.UNIFORM_ELLIPSE:
        inside = np.sum((coords / lams) ** 2, axis=1) <= 1.0
        closest = ellipse_closest_point(lams, coords)
        diffs = coords - closest
        dist = np.linalg.norm(diffs, axis=1)
        grad = closest / lams**2
        grad /= np.linalg.norm(grad, axis=1, keepdims=True)
        use_diff = (dist > 1e-12) & ~inside
        normal = np.where(use_diff[:, None], diffs / np.maximum(dist, 1e-300)[:, None], grad)
        return dist, inside, normal
    half = lams / 2.0
    inside = np.all(np.abs(coords) <= half, axis=1)
    closest = np.clip(coords, -half, half)
    diffs = coords - closest
    dist = np.linalg.norm(diffs, axis=1)
    gaps = half - np.abs(coords)
    axis = np.argmin(gaps, axis=1)
    face_normal = np.zeros_like(coords)
    rows = np.arange(coords.shape[0])
    face_normal[rows, axis] = np.where(coords[rows, axis] >= 0, 1.0, -1.0)
    inside_dist = gaps[rows, axis]
    dist = np.where(inside, inside_dist, dist)
    normal = np.where(inside[:, None] | (dist <= 1e-12)[:, None],
                      face_normal, diffs / np.maximum(dist, 1e-300)[:, None])
    return dist, inside, normal


def sample_reflections(kin: np.ndarray, ext: np.ndarray, count: int,
                       model: MeasurementModel, rng: np.random.Generator) -> np.ndarray:
    """Draw object-originated measurements for one object state."""
    d = model.dim
    pos = np.asarray(kin, dtype=float)[:d]
    ext = np.asarray(ext, dtype=float)
    if count == 0:
        return np.empty((0, d))
    if model.shape == ShapeKind.GAUSSIAN:
        refl = rng.multivariate_normal(np.zeros(d), ext @ ext, size=count)
    else:
        eig = eigen_decompose(ext)
        if model.shape == ShapeKind.UNIFORM_ELLIPSE:
            raw = rng.normal(size=(count, d))
            raw /= np.linalg.norm(raw, axis=1, keepdims=True)
            radius = rng.uniform(size=(count, 1)) ** (1.0 / d)
            refl = (raw * radius * eig.eigenvalues) @ eig.eigenvectors.T
        else:
            local = rng.uniform(-0.5, 0.5, size=(count, d)) * eig.eigenvalues
            refl = local @ eig.eigenvectors.T
    noise = rng.multivariate_normal(np.zeros(d), model.noise_cov, size=count)
    return pos[None, :] + refl + noise


# ---------------------------------------------------------------------------
# birth model


@dataclass(frozen=True)
class BirthModel:
    """Poisson birth process for newly detected objects.

    Positions are uniform on the ROI, velocities zero-mean Gaussian, extents
    inverse-Wishart with the given mean matrix and degrees of freedom.
    """

    mean_births: float
    roi: Roi
    velocity_cov: np.ndarray
    extent_mean: np.ndarray
    extent_dof: float

    def __post_init__(self):
        object.__setattr__(self, "velocity_cov",
                           np.atleast_2d(np.asarray(self.velocity_cov, dtype=float)))
        object.__setattr__(self, "extent_mean",
                           np.atleast_2d(np.asarray(self.extent_mean, dtype=float)))
        if self.mean_births <= 0:
            raise InvalidModel("mean_births must be > 0")
        d = self.extent_mean.shape[0]
        if self.extent_dof <= d + 1:
            raise InvalidModel(f"extent prior dof must exceed d_p + 1 = {d + 1}")

    @property
    def dim(self) -> int:
        return self.extent_mean.shape[0]

    @property
    def extent_scale(self) -> np.ndarray:
        """Inverse-Wishart scale matrix matching the configured mean."""
        d = self.dim
        return self.extent_mean * (self.extent_dof - d - 1)

    def sample(self, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Draw n (kinematic, extent) pairs from the birth prior."""
        pos = self.roi.sample(n, rng)
        vel = rng.multivariate_normal(np.zeros(self.dim), self.velocity_cov, size=n)
        kin = np.hstack([pos, vel])
        ext = invwishart.rvs(df=self.extent_dof, scale=self.extent_scale,
                             size=n, random_state=rng)
        ext = np.asarray(ext, dtype=float).reshape(n, self.dim, self.dim)
        return kin, ext

    def log_density(self, kin: np.ndarray, ext: np.ndarray) -> np.ndarray:
        """log f_n(x, e) for particle rows."""
        kin = np.atleast_2d(np.asarray(kin, dtype=float))
        ext = np.asarray(ext, dtype=float)
        if ext.ndim == 2:
            ext = ext[None]
        d = self.dim
        pos = kin[:, :d]
        vel = kin[:, d:2 * d]
        out = np.where(self.roi.contains(pos), -np.log(self.roi.area), -np.inf)
        cov_inv = np.linalg.inv(self.velocity_cov)
        _, logdet = np.linalg.slogdet(self.velocity_cov)
        quad = np.einsum("nd,de,ne->n", vel, cov_inv, vel)
        out = out - 0.5 * (d * np.log(2.0 * np.pi) + logdet + quad)
        ext_logpdf = invwishart.logpdf(
            np.moveaxis(ext, 0, -1), df=self.extent_dof, scale=self.extent_scale)
        return out + np.atleast_1d(ext_logpdf)


# ---------------------------------------------------------------------------
# full model configuration


@dataclass(frozen=True)
class ModelConfig:
    """All scalar model parameters plus the component models they define."""

    p_s: float
    mu_fa: float
    mu_n: float
    sigma_u: float
    sigma_c: float
    q_wishart: float
    shape: ShapeKind
    rate: RateSpec
    roi: Roi
    birth_velocity_std: float
    birth_extent_mean: np.ndarray
    birth_extent_dof: float
    period: float = 0.2
    rotation: str = "identity"

    def __post_init__(self):
        if not 0.0 <= self.p_s <= 1.0:
            raise InvalidModel("p_s must be in [0, 1]")
        if self.mu_fa < 0 or self.mu_n <= 0:
            raise InvalidModel("mu_fa must be >= 0 and mu_n > 0")
        object.__setattr__(self, "birth_extent_mean",
                           np.atleast_2d(np.asarray(self.birth_extent_mean, dtype=float)))

    @property
    def dim(self) -> int:
        return self.birth_extent_mean.shape[0]

    def transition_model(self) -> TransitionModel:
        return TransitionModel.ncv(self.period, self.sigma_c, self.q_wishart,
                                   self.dim, self.rotation)

    def measurement_model(self) -> MeasurementModel:
        return MeasurementModel.isotropic(self.shape, self.sigma_u, self.mu_fa,
                                          self.roi, self.rate, self.dim)

    def birth_model(self) -> BirthModel:
        return BirthModel(self.mu_n, self.roi,
                          self.birth_velocity_std**2 * np.eye(self.dim),
                          self.birth_extent_mean, self.birth_extent_dof)

    def to_dict(self) -> dict:
        rate: dict = {"kind": self.rate.kind}
        if self.rate.kind == "fixed":
            rate["mu_m"] = self.rate.mu_m
        elif self.rate.kind == "density":
            rate["rho"] = self.rate.rho
        else:
            rate["index"] = self.rate.index
        return {
            "p_s": self.p_s,
            "mu_fa": self.mu_fa,
            "mu_n": self.mu_n,
            "sigma_u": self.sigma_u,
            "sigma_c": self.sigma_c,
            "q_wishart": self.q_wishart,
            "shape": self.shape.value,
            "rate_spec": rate,
            "roi": [self.roi.x_min, self.roi.x_max, self.roi.y_min, self.roi.y_max],
            "period": self.period,
            "rotation": self.rotation,
            "birth": {
                "velocity_std": self.birth_velocity_std,
                "extent_mean": self.birth_extent_mean.tolist(),
                "extent_dof": self.birth_extent_dof,
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        known = {"p_s", "mu_fa", "mu_n", "sigma_u", "sigma_c", "q_wishart",
                 "shape", "rate_spec", "roi", "birth", "period", "rotation"}
        unknown = set(data) - known
        if unknown:
            raise InvalidModel(f"unknown model config keys: {sorted(unknown)}")
        missing = {"p_s", "mu_fa", "mu_n", "sigma_u", "sigma_c", "q_wishart",
                   "shape", "rate_spec", "roi", "birth"} - set(data)
        if missing:
            raise InvalidModel(f"missing model config keys: {sorted(missing)}")
        rate_data = dict(data["rate_spec"])
        kind = rate_data.pop("kind")
        rate = RateSpec(kind=kind, **rate_data)
        roi = Roi(*data["roi"])
        birth = dict(data["birth"])
        unknown_birth = set(birth) - {"velocity_std", "extent_mean", "extent_dof"}
        if unknown_birth:
            raise InvalidModel(f"unknown birth config keys: {sorted(unknown_birth)}")
        return cls(
            p_s=float(data["p_s"]),
            mu_fa=float(data["mu_fa"]),
            mu_n=float(data["mu_n"]),
            sigma_u=float(data["sigma_u"]),
            sigma_c=float(data["sigma_c"]),
            q_wishart=float(data["q_wishart"]),
            shape=ShapeKind(data["shape"]),
            rate=rate,
            roi=roi,
            birth_velocity_std=float(birth["velocity_std"]),
            birth_extent_mean=np.asarray(birth["extent_mean"], dtype=float),
            birth_extent_dof=float(birth["extent_dof"]),
            period=float(data.get("period", 0.2)),
            rotation=data.get("rotation", "identity"),
        )


def default_birth_cluster_radius(cfg: "ModelConfig") -> float:
    """Censoring radius that groups the measurements of one typical object.

    Twice the per-axis spread implied by the mean prior extent plus the
    measurement noise.
    """
    spread = (cfg.birth_extent_mean @ cfg.birth_extent_mean
              + cfg.sigma_u**2 * np.eye(cfg.dim))
    return float(2.0 * np.sqrt(np.max(np.linalg.eigvalsh(spread))))


def paper_model_config(shape: ShapeKind = ShapeKind.GAUSSIAN) -> ModelConfig:
    """Reference configuration of the crossing-objects benchmark scenario."""
    return ModelConfig(
        p_s=0.99,
        mu_fa=10.0,
        mu_n=1e-2,
        sigma_u=1.0,
        sigma_c=1.0,
        q_wishart=20000.0,
        shape=shape,
        rate=RateSpec(kind="fixed", mu_m=8.0),
        roi=Roi(-150.0, 150.0, -150.0, 150.0),
        birth_velocity_std=10.0,
        birth_extent_mean=3.0 * np.eye(2),
        birth_extent_dof=100.0,
    )
