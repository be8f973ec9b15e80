"""Gaussian and spherical mean widths of finite sets and of operators.

The width of a finite set ``K`` is ``E_g sup_{x in K-K} <g, x>``. Because
the width of a set equals that of its convex hull, the supremum may be
taken over ``hull(K) - hull(K)``, a linear program whose optimum sits at a
vertex, giving the closed form ``max_i <g, k_i> - min_i <g, k_i>``. The LP
itself is kept in :func:`hull_diff_lp` as an independent cross-check.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .csvio import write_csv
from .simplex import simplex_solve
from .tensor_core import as_matrix, as_rng, sample_sphere, svd


def c_const(n):
    """``sqrt(2) Gamma((n+1)/2) / Gamma(n/2)``, the mean of a chi(n) variable."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return math.exp(math.lgamma((n + 1) / 2) - math.lgamma(n / 2) + 0.5 * math.log(2.0))


@dataclass
class WidthEstimate:
    value: float
    num_samples: int
    per_sample_values: np.ndarray
    seed: int
    metadata: dict = field(default_factory=dict)

    @property
    def stderr(self):
        if self.num_samples < 2:
            return 0.0
        return float(np.std(self.per_sample_values, ddof=1) / math.sqrt(self.num_samples))

    def to_csv(self, path):
        rows = [(i, float(v)) for i, v in enumerate(self.per_sample_values)]
        rows.append(("mean", self.value))
        rows.append(("stderr", self.stderr))
        rows.append(("n", self.num_samples))
        rows.append(("seed", self.seed))
        write_csv(path, ["sample_index", "value"], rows)


def _estimate(values, rng, **metadata):
    values = np.asarray(values, dtype=np.float64)
    return WidthEstimate(
        value=float(np.sum(values) / values.size),
        num_samples=int(values.size),
        per_sample_values=values,
        seed=rng.seed,
        metadata=metadata,
    )


def _point_matrix(k):
    pts = as_matrix(np.atleast_2d(k), "point set")
    if pts.shape[0] < 1:
        raise ValueError("point set must be non-empty")
    return pts


def sup_linear_over_hull_diff(k, g):
    """``sup_{x in hull(K) - hull(K)} <g, x>`` = max minus min of ``K g``."""
    pts = _point_matrix(k)
    proj = pts @ np.asarray(g, dtype=np.float64)
    return float(proj.max() - proj.min())


def _sup_many(pts, directions):
    proj = pts @ directions.T
    return proj.max(axis=0) - proj.min(axis=0)


def hull_diff_lp(k, g):
    """Same quantity as :func:`sup_linear_over_hull_diff`, solved as an LP.

    Variables are convex weights ``alpha, beta`` over the rows of ``K``;
    the objective ``<(-K g : K g), (alpha : beta)>`` is minimised subject to
    both weight vectors summing to one, and the negated optimum returned.
    """
    pts = _point_matrix(k)
    size = pts.shape[0]
    kg = pts @ np.asarray(g, dtype=np.float64)
    cost = np.concatenate([-kg, kg])
    a_eq = np.zeros((2, 2 * size))
    a_eq[0, :size] = 1.0
    a_eq[1, size:] = 1.0
    optimum, _ = simplex_solve(cost, a_eq, [1.0, 1.0])
    return -optimum


def gmw_set(k, num_g=100, rng=None):
    """Gaussian mean width of a finite set, averaged over ``num_g`` draws."""
    rng = as_rng(rng)
    pts = _point_matrix(k)
    g = rng.normal((num_g, pts.shape[1]))
    return _estimate(_sup_many(pts, g), rng, kind="gaussian", set_size=pts.shape[0])


def smw_set(k, num_u=100, rng=None):
    """Spherical mean width of a finite set (directions uniform on the sphere)."""
    rng = as_rng(rng)
    pts = _point_matrix(k)
    u = sample_sphere(rng, num_u, pts.shape[1])
    return _estimate(_sup_many(pts, u), rng, kind="spherical", set_size=pts.shape[0])


def gmw_operator_linear(a, num_u=100, rng=None, via="transpose"):
    """Gaussian mean width of a linear map: ``2 c_m E_u |A^T u|``.

    ``via="singular_values"`` evaluates ``|Sigma^T u|`` instead, which has
    the same expectation by rotation invariance of ``u``.
    """
    rng = as_rng(rng)
    a = as_matrix(a)
    m = a.shape[0]
    u = sample_sphere(rng, num_u, m)
    if via == "transpose":
        norms = np.linalg.norm(u @ a, axis=1)
    elif via == "singular_values":
        sigma = svd(a).sigma
        norms = np.linalg.norm(u[:, : sigma.size] * sigma, axis=1)
    else:
        raise ValueError(f"unknown formula {via!r}")
    return _estimate(2.0 * c_const(m) * norms, rng, kind="operator_linear", via=via)


def gmw_operator_general(layer_fn, domain_sample, num_u=100, rng=None):
    """Gaussian mean width of a nonnegatively homogeneous map over a ball sample.

    Each direction ``u`` contributes ``c_m (max_x <u, f(x)> - min_x <u, f(x)>)``,
    the support of ``f(X) - f(X)``; its mean equals ``2 c_m E_u max_x <u, f(x)>``
    by the symmetry of ``u``. The finite sample ``X`` stands in for the unit
    ball, so the estimate is biased low and converges with sampling density.
    """
    rng = as_rng(rng)
    pts = _point_matrix(domain_sample)
    if np.max(np.linalg.norm(pts, axis=1)) > 1.0 + 1e-12:
        raise ValueError("domain sample must lie inside the unit ball")
    images = np.atleast_2d(np.asarray(layer_fn(pts), dtype=np.float64))
    m = images.shape[1]
    # f(0) = 0 for any nonnegatively homogeneous map and 0 lies in the ball
    images = np.vstack([images, np.zeros((1, m))])
    u = sample_sphere(rng, num_u, m)
    values = c_const(m) * _sup_many(images, u)
    return _estimate(values, rng, kind="operator_general", domain_size=pts.shape[0])
