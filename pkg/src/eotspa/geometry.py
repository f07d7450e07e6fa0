"""Extent matrices and the geometry of the shapes they represent.

An extent matrix is a symmetric positive-semidefinite d x d matrix (d in
{2, 3}).  Its eigenvalues give the object dimensions (semi-axes of an
ellipse/ellipsoid, or full side lengths of a rectangle/cube) and its
eigenvectors give the object orientation.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSupport, InvalidExtent

SYMMETRY_RTOL = 1e-12


class ShapeKind(enum.Enum):
    """Spatial model attached to an extent matrix."""

    GAUSSIAN = "gaussian"
    UNIFORM_ELLIPSE = "ellipse"
    UNIFORM_CUBE = "cube"


@dataclass(frozen=True)
class EigenStructure:
    """Sorted, sign-canonicalized eigendecomposition of an extent matrix.

    eigenvalues are descending; each eigenvector's first component of
    non-negligible magnitude is positive, which makes orientation
    estimates and tests deterministic.
    """

    eigenvalues: np.ndarray  # (d,), descending
    eigenvectors: np.ndarray  # (d, d), columns


def extent_to_vector(ext: np.ndarray) -> np.ndarray:
    """Concatenate the lower triangle of an extent matrix column by column."""
    ext = np.asarray(ext, dtype=float)
    d = ext.shape[0]
    idx = np.tril_indices(d)
    # column-major order of the lower triangle: (1,1),(2,1),...,(d,1),(2,2),...
    order = np.lexsort((idx[0], idx[1]))
    return ext[idx[0][order], idx[1][order]].copy()


def extent_from_vector(vec: np.ndarray, dim: int) -> np.ndarray:
    """Inverse of :func:`extent_to_vector`; round-trips exactly."""
    vec = np.asarray(vec, dtype=float)
    expected = dim * (dim + 1) // 2
    if vec.size != expected:
        raise InvalidExtent(f"expected {expected} unique elements, got {vec.size}")
    out = np.zeros((dim, dim))
    pos = 0
    for j in range(dim):
        n = dim - j
        out[j:, j] = vec[pos:pos + n]
        out[j, j:] = vec[pos:pos + n]
        pos += n
    return out


def check_extent(ext: np.ndarray) -> np.ndarray:
    """Validate symmetry of an extent matrix, returning it as float array."""
    ext = np.asarray(ext, dtype=float)
    if ext.ndim != 2 or ext.shape[0] != ext.shape[1]:
        raise InvalidExtent(f"extent must be square, got shape {ext.shape}")
    scale = max(np.abs(ext).max(), 1.0)
    if np.abs(ext - ext.T).max() > SYMMETRY_RTOL * scale:
        raise InvalidExtent("extent matrix is not symmetric")
    return ext


def eigen_decompose(ext: np.ndarray) -> EigenStructure:
    """Eigendecomposition with descending eigenvalues and canonical signs."""
    ext = check_extent(ext)
    vals, vecs = np.linalg.eigh(ext)
    order = np.argsort(-vals, kind="stable")
    vals = vals[order]
    vecs = vecs[:, order]
    vecs = _canonicalize_signs(vecs)
    return EigenStructure(eigenvalues=vals, eigenvectors=vecs)


def _canonicalize_signs(vecs: np.ndarray) -> np.ndarray:
    vecs = vecs.copy()
    for j in range(vecs.shape[1]):
        col = vecs[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-12 * np.linalg.norm(col))
        pivot = nz[0] if nz.size else 0
        if col[pivot] < 0:
            vecs[:, j] = -col
    return vecs


def reconstruct(eig: EigenStructure) -> np.ndarray:
    """Rebuild the extent matrix from its eigenstructure."""
    return (eig.eigenvectors * eig.eigenvalues) @ eig.eigenvectors.T


def support_volume(ext: np.ndarray, shape: ShapeKind) -> float:
    """Area (2-D) or volume (3-D) of the shape support.

    Ellipse semi-axes and cube side lengths are both given directly by the
    eigenvalues, so a 2-D ellipse has area pi*l1*l2 and a rectangle l1*l2.
    """
    eig = eigen_decompose(ext)
    return _volume_from_eigenvalues(eig.eigenvalues, shape)


def _volume_from_eigenvalues(lams: np.ndarray, shape: ShapeKind) -> float:
    if np.any(lams <= 0):
        raise DegenerateSupport(f"non-positive eigenvalue in {lams}")
    d = lams.size
    prod = float(np.prod(lams))
    if shape == ShapeKind.UNIFORM_ELLIPSE:
        if d == 2:
            return np.pi * prod
        if d == 3:
            return 4.0 / 3.0 * np.pi * prod
        raise DegenerateSupport(f"unsupported dimension {d}")
    if shape == ShapeKind.UNIFORM_CUBE:
        return prod
    raise DegenerateSupport(f"no support volume for shape {shape}")


def ellipse_closest_point(semi_axes: np.ndarray, pts: np.ndarray,
                          max_iter: int = 50, tol: float = 1e-10) -> np.ndarray:
    """Closest boundary points of an axis-aligned ellipse/ellipsoid.

    Solves the Lagrange condition x_i = a_i^2 p_i / (t + a_i^2) for the
    unique root t > -min(a)^2 with a safeguarded (bracketed, damped)
    Newton iteration, vectorized over the rows of ``pts``.  Points sitting
    on a symmetry axis inside the evolute are handled separately since the
    Lagrange parametrization degenerates there.

    Args:
        semi_axes: (d,) positive semi-axis lengths.
        pts: (n, d) query points in the ellipse frame.

    Returns:
        (n, d) closest points on the boundary.
    """
    a = np.asarray(semi_axes, dtype=float)
    if np.any(a <= 0):
        raise DegenerateSupport(f"non-positive semi-axis in {a}")
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    signs = np.where(pts < 0, -1.0, 1.0)
    q = np.abs(pts)  # work in the positive orthant
    n, d = q.shape
    a2 = a * a

    # Newton in t on F(t) = sum (a_i q_i / (t + a_i^2))^2 - 1, decreasing on
    # the bracket (-min(a)^2, inf).
    tmin = -np.min(a2)
    lo = np.full(n, tmin)
    hi = np.maximum(np.linalg.norm(a * q, axis=1) - np.min(a2), 1.0) * 2.0
    t = 0.5 * (lo + hi)

    aq = a * q  # (n, d)

    def f_and_df(tv):
        denom = tv[:, None] + a2[None, :]
        frac = aq / denom
        f = np.sum(frac * frac, axis=1) - 1.0
        df = -2.0 * np.sum(frac * frac / denom, axis=1)
        return f, df

    # grow hi until F(hi) < 0
    for _ in range(60):
        fhi, _ = f_and_df(hi)
        grow = fhi > 0
        if not np.any(grow):
            break
        lo = np.where(grow, hi, lo)
        hi = np.where(grow, hi * 2.0 + 1.0, hi)

    for _ in range(max_iter):
        f, df = f_and_df(t)
        lo = np.where(f > 0, t, lo)
        hi = np.where(f <= 0, t, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = f / df
            t_new = t - step
        bad = ~np.isfinite(t_new) | (t_new <= lo) | (t_new >= hi)
        t_new = np.where(bad, 0.5 * (lo + hi), t_new)
        done = np.abs(t_new - t) < tol * np.maximum(1.0, np.abs(t))
        t = t_new
        if np.all(done):
            break

    denom = t[:, None] + a2[None, :]
    closest = a2[None, :] * q / denom

    # Degenerate rows: q_i == 0 for the axes of smallest semi-axis makes the
    # bracket collapse; fix axis-interior cases explicitly.
    for i in range(n):
        zero = q[i] <= 1e-300
        if not np.any(zero):
            continue
        closest[i] = _axis_case_closest(a, q[i], zero)

    closest = signs * closest
    return closest


def _axis_case_closest(a: np.ndarray, q: np.ndarray, zero: np.ndarray) -> np.ndarray:
    """Closest point for queries with zero components (on symmetry axes)."""
    d = a.size
    j_min = int(np.argmin(np.where(zero, a, np.inf)))
    nonzero = ~zero
    if not np.any(nonzero):
        # at the center: nearest boundary point lies along the smallest axis
        out = np.zeros(d)
        out[int(np.argmin(a))] = a[int(np.argmin(a))]
        return out
    # Try the Lagrange solution restricted to nonzero coordinates; valid
    # while the implied t stays above -a_jmin^2 (outside the evolute the
    # closest point keeps zero components).
    sub_a = a[nonzero]
    sub_q = q[nonzero]
    sub = ellipse_closest_point(sub_a, sub_q[None, :])[0]
    # t implied by the subproblem solution
    with np.errstate(divide="ignore"):
        t_sub = sub_a[0] ** 2 * sub_q[0] / sub[0] - sub_a[0] ** 2 if sub[0] > 0 else -np.inf
    if t_sub > -a[j_min] ** 2:
        out = np.zeros(d)
        out[nonzero] = sub
        return out
    # inside the evolute: the closest point picks up a component on axis j_min
    t = -a[j_min] ** 2
    out = np.zeros(d)
    out[nonzero] = sub_a**2 * sub_q / (t + sub_a**2)
    s = 1.0 - np.sum((out[nonzero] / sub_a) ** 2)
    out[j_min] = a[j_min] * np.sqrt(max(s, 0.0))
    return out


def boundary_distance(ext: np.ndarray, center: np.ndarray, z: np.ndarray,
                      shape: ShapeKind) -> tuple[float, bool, np.ndarray]:
    """Distance from a point to the shape boundary.

    Returns ``(distance, inside, normal)`` where ``normal`` points from the
    closest boundary point toward ``z`` for exterior points and outward for
    interior points (the direction used to project measurement noise).
    """
    eig = eigen_decompose(ext)
    lams = eig.eigenvalues
    if np.any(lams <= 0):
        raise DegenerateSupport(f"non-positive eigenvalue in {lams}")
    vecs = eig.eigenvectors
    z = np.asarray(z, dtype=float)
    center = np.asarray(center, dtype=float)
    local = vecs.T @ (z - center)

    if shape == ShapeKind.UNIFORM_ELLIPSE:
        inside = bool(np.sum((local / lams) ** 2) <= 1.0)
        closest = ellipse_closest_point(lams, local[None, :])[0]
        diff = local - closest
        dist = float(np.linalg.norm(diff))
        if dist > 1e-12 and not inside:
            normal_local = diff / dist
        else:
            grad = closest / lams**2
            normal_local = grad / np.linalg.norm(grad)
    elif shape == ShapeKind.UNIFORM_CUBE:
        half = lams / 2.0
        inside = bool(np.all(np.abs(local) <= half))
        if inside:
            gaps = half - np.abs(local)
            axis = int(np.argmin(gaps))
            dist = float(gaps[axis])
            normal_local = np.zeros_like(local)
            normal_local[axis] = 1.0 if local[axis] >= 0 else -1.0
        else:
            closest = np.clip(local, -half, half)
            diff = local - closest
            dist = float(np.linalg.norm(diff))
            normal_local = diff / dist if dist > 1e-12 else np.eye(len(local))[0]
    else:
        raise DegenerateSupport(f"no boundary for shape {shape}")

    return dist, inside, vecs @ normal_local


def cube_edge_distances(ext: np.ndarray, center: np.ndarray, z: np.ndarray,
                        axis: int) -> tuple[float, float]:
    """Perpendicular distances from z to the two cube faces normal to one axis.

    The first distance refers to the face in the direction of the
    (sign-canonical) eigenvector, the second to the opposite face.
    """
    eig = eigen_decompose(ext)
    lam = eig.eigenvalues[axis]
    if lam <= 0:
        raise DegenerateSupport(f"non-positive eigenvalue {lam}")
    t = float(eig.eigenvectors[:, axis] @ (np.asarray(z, float) - np.asarray(center, float)))
    half = lam / 2.0
    return abs(t - half), abs(t + half)


def orientation_angle(ext: np.ndarray) -> float:
    """Angle in [0, pi) of the leading eigenvector, restricted to the upper half-plane."""
    eig = eigen_decompose(ext)
    v = eig.eigenvectors[:, 0]
    if v[1] < 0 or (v[1] == 0 and v[0] < 0):
        v = -v
    ang = float(np.arctan2(v[1], v[0]))
    if ang < 0:
        ang += np.pi
    return ang % np.pi


def random_rotation_2d(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])
