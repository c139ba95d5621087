"""Minimum-volume enclosing ellipsoid by Khachiyan's first-order iteration.

Solves max log det over the dual weights u (barycentric coordinate ascent /
Frank-Wolfe), augmented with Wolfe-Atwood away steps, which keep the
iteration count low on large candidate sets.  The returned ellipsoid carries
a certificate: every input point p satisfies (p-c)' A (p-c) <= 1 + tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .errors import ConvergenceError, DegenerateGeometryError

#: Hull preprocessing kicks in above this many candidate points.
_HULL_THRESHOLD = 64

_RANK_RTOL = 1e-9


@dataclass
class Ellipsoid:
    """Ellipsoid {p : (p - center)' A (p - center) <= 1} in mm coordinates."""

    center: np.ndarray
    shape_matrix: np.ndarray

    @property
    def volume(self) -> float:
        d = len(self.center)
        det = float(np.linalg.det(self.shape_matrix))
        if det <= 0:
            raise DegenerateGeometryError("shape matrix is not positive definite")
        unit = {1: 2.0, 2: np.pi, 3: 4.0 / 3.0 * np.pi}[d]
        return unit / float(np.sqrt(det))

    @property
    def semi_axes(self) -> np.ndarray:
        """Semi-axis lengths, ascending."""
        return 1.0 / np.sqrt(np.linalg.eigvalsh(self.shape_matrix))[::-1]

    def squared_form(self, points: np.ndarray) -> np.ndarray:
        """(p - c)' A (p - c) for each point row."""
        diff = np.asarray(points, dtype=np.float64) - self.center
        return np.einsum("ij,jk,ik->i", diff, self.shape_matrix, diff)

    def contains(self, points: np.ndarray, tol: float = 1e-6) -> bool:
        return bool(self.squared_form(points).max() <= 1.0 + tol)


def _check_rank(points: np.ndarray) -> None:
    centered = points - points.mean(axis=0)
    svals = np.linalg.svd(centered, compute_uv=False)
    if svals[0] == 0.0 or svals[-1] <= _RANK_RTOL * svals[0]:
        raise DegenerateGeometryError(
            "point set is rank deficient (collinear/coplanar); no full-dimensional "
            "enclosing ellipsoid exists"
        )


def _hull_vertices(points: np.ndarray) -> np.ndarray:
    try:
        hull = ConvexHull(points)
    except QhullError as exc:
        raise DegenerateGeometryError(f"degenerate geometry: {exc}") from exc
    return points[hull.vertices]


def min_bounding_ellipsoid(points, tolerance: float = 1e-6,
                           max_iter: int = 100_000) -> Ellipsoid:
    """Minimum-volume enclosing ellipsoid of a 3D point set.

    Parameters
    ----------
    points : array-like, shape (n, 3)
        Points in millimeter coordinates; at least 4, affinely independent.
    tolerance : float
        Certificate slack: all points end up with squared form <= 1 + tolerance
        and the volume is within a (1 + tolerance) factor of optimal.
    max_iter : int
        Iteration cap; exceeding it raises ConvergenceError.

    Notes
    -----
    Restricting the candidate set to its convex hull is an optimization with
    no semantic effect: the optimum and the certificate cover all inputs.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise DegenerateGeometryError(f"points must be (n, 3), got {pts.shape}")
    if len(pts) < 4:
        raise DegenerateGeometryError("need at least 4 points for a 3D ellipsoid")
    _check_rank(pts)
    work = _hull_vertices(pts) if len(pts) > _HULL_THRESHOLD else pts

    d = 3
    n = len(work)
    q = np.hstack([work, np.ones((n, 1))])
    u = np.full(n, 1.0 / n)
    # stop once max_j q_j' X^-1 q_j <= (d+1)(1 + eps); then every point's
    # squared form is at most 1 + eps (d+1)/d, so aim slightly below tolerance
    eps = 0.5 * tolerance * d / (d + 1)
    kappa_stop = (d + 1) * (1.0 + eps)

    converged = False
    for _ in range(max_iter):
        x = q.T @ (q * u[:, None])
        try:
            x_inv = np.linalg.inv(x)
        except np.linalg.LinAlgError as exc:
            raise DegenerateGeometryError("singular moment matrix during iteration") from exc
        m = np.einsum("ij,jk,ik->i", q, x_inv, q)
        j = int(np.argmax(m))
        kappa = m[j]
        if kappa <= kappa_stop:
            converged = True
            break
        support = u > 0
        i = int(np.argmin(np.where(support, m, np.inf)))
        m_min = m[i]
        if (kappa - d - 1.0) >= (d + 1.0 - m_min):
            step = (kappa - d - 1.0) / ((d + 1.0) * (kappa - 1.0))
            u *= 1.0 - step
            u[j] += step
        else:
            # away step: push weight off the worst interior support point,
            # capped so u[i] cannot go negative (a "drop" step)
            drop = u[i] / (1.0 - u[i]) if u[i] < 1.0 else 0.0
            step = min((d + 1.0 - m_min) / ((d + 1.0) * (m_min - 1.0)), drop) \
                if m_min > 1.0 else drop
            u *= 1.0 + step
            u[i] = max(u[i] - step, 0.0)
            u /= u.sum()
    if not converged:
        raise ConvergenceError(
            f"MVEE did not reach its certificate within {max_iter} iterations"
        )

    center = work.T @ u
    sigma = work.T @ (work * u[:, None]) - np.outer(center, center)
    try:
        a = np.linalg.inv(sigma) / d
    except np.linalg.LinAlgError as exc:
        raise DegenerateGeometryError("degenerate second-moment matrix") from exc
    a = 0.5 * (a + a.T)
    ell = Ellipsoid(center=center, shape_matrix=a)
    if not ell.contains(pts, tolerance):
        raise ConvergenceError("MVEE certificate failed on the input points")
    return ell
