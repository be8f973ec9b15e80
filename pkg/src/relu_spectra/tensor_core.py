"""Dense linear algebra and seeded sampling primitives.

Matrices are plain 2-D ``float64`` numpy arrays. The SVD is a one-sided
(Hestenes) Jacobi iteration with a round-robin pair ordering, so every
rotation step acts on ``n // 2`` disjoint column pairs at once.

Random numbers come from :class:`Rng`, a thin wrapper around the
Philox4x64-10 counter-based generator keyed by a 64-bit seed. Uniforms are
built from the raw 64-bit words as ``((word >> 11) + 1) * 2**-53`` which
lies in ``(0, 1]``, and normals use the Box-Muller transform on
consecutive pairs of uniforms. The algorithm is fully specified, so a
stream can be regenerated by any implementation of Philox.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError

MASK64 = (1 << 64) - 1
_TWO_POW_M53 = 2.0**-53
SVD_TOL = 1e-12


def as_matrix(a, name="matrix"):
    """Validate and convert ``a`` to a finite 2-D float64 array."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return arr


class Rng:
    """Seeded Philox4x64-10 stream with Box-Muller normals.

    ``Rng(seed).spawn(i)`` derives an independent sub-stream keyed by
    ``seed ^ i``; sub-streams do not depend on how much of the parent
    stream has been consumed.
    """

    def __init__(self, seed=0):
        self.seed = int(seed) & MASK64
        self._bits = np.random.Philox(key=self.seed)

    def __repr__(self):
        return f"Rng(seed={self.seed})"

    def spawn(self, index):
        return Rng(self.seed ^ (int(index) & MASK64))

    def raw(self, count):
        return self._bits.random_raw(int(count))

    def uniform(self, size):
        """Uniform samples in ``(0, 1]`` with the requested shape."""
        count = int(np.prod(size, dtype=np.int64))
        words = self.raw(count)
        out = ((words >> np.uint64(11)).astype(np.float64) + 1.0) * _TWO_POW_M53
        return out.reshape(size)

    def normal(self, size, scale=1.0):
        """Standard normal samples (times ``scale``) via Box-Muller."""
        count = int(np.prod(size, dtype=np.int64))
        pairs = (count + 1) // 2
        u = self.uniform(2 * pairs)
        radius = np.sqrt(-2.0 * np.log(u[0::2]))
        angle = 2.0 * np.pi * u[1::2]
        z = np.empty(2 * pairs)
        z[0::2] = radius * np.cos(angle)
        z[1::2] = radius * np.sin(angle)
        return (scale * z[:count]).reshape(size)

    def permutation(self, n):
        return np.argsort(self.raw(n), kind="stable")

    def choice(self, n, k):
        """``k`` distinct indices drawn uniformly from ``range(n)``."""
        if k > n:
            raise ValueError(f"cannot choose {k} of {n} items")
        return self.permutation(n)[:k]


def as_rng(rng):
    if isinstance(rng, Rng):
        return rng
    return Rng(0 if rng is None else rng)


def sample_gaussian_vector(rng, n):
    if n < 1:
        raise ValueError("n must be >= 1")
    return rng.normal(n)


def sample_sphere(rng, count, n):
    """``count`` points drawn uniformly from the unit sphere in R^n (rows)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    g = rng.normal((count, n))
    norms = np.linalg.norm(g, axis=1)
    # zero-norm draws are resampled in place
    while np.any(norms == 0.0):
        bad = np.flatnonzero(norms == 0.0)
        g[bad] = rng.normal((bad.size, n))
        norms[bad] = np.linalg.norm(g[bad], axis=1)
    return g / norms[:, None]


def sample_sphere_vector(rng, n):
    return sample_sphere(rng, 1, n)[0]


@dataclass(frozen=True)
class SvdResult:
    """Thin SVD ``a = u @ diag(sigma) @ v.T`` with ``r = min(m, n)``."""

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray

    def reconstruct(self):
        return (self.u * self.sigma) @ self.v.T

    def truncated(self, k):
        """Best rank-``k`` approximation (Eckart-Young)."""
        return (self.u[:, :k] * self.sigma[:k]) @ self.v[:, :k].T


def _round_robin(n):
    """Pair schedule covering every pair of ``range(n)`` once per sweep."""
    players = list(range(n)) + ([-1] if n % 2 else [])
    size = len(players)
    rounds = []
    for _ in range(size - 1):
        ps, qs = [], []
        for i in range(size // 2):
            p, q = players[i], players[size - 1 - i]
            if p >= 0 and q >= 0:
                ps.append(min(p, q))
                qs.append(max(p, q))
        rounds.append((np.array(ps, dtype=np.intp), np.array(qs, dtype=np.intp)))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def _complete_orthonormal(u, good):
    """Replace columns of ``u`` not flagged ``good`` by an orthonormal completion.

    Each new column is the standard basis vector with the largest residual
    after projecting out the columns kept so far.
    """
    m, r = u.shape
    basis = u[:, good]
    for j in np.flatnonzero(~good):
        resid = np.eye(m)
        for _ in range(2):
            resid -= basis @ (basis.T @ resid)
        norms = np.linalg.norm(resid, axis=0)
        pick = int(np.argmax(norms))
        u[:, j] = resid[:, pick] / norms[pick]
        basis = np.column_stack([basis, u[:, j]])
    return u


def svd(a, tol=SVD_TOL, max_sweeps=None):
    """Singular value decomposition by one-sided Jacobi rotations.

    Converges when every column pair satisfies
    ``|a_p . a_q| <= tol * |a_p| |a_q|``. Raises :class:`ConvergenceError`
    after ``max_sweeps`` sweeps (default ``100 * min(m, n)``).
    """
    a = as_matrix(a)
    m, n = a.shape
    if m < n:
        res = svd(a.T, tol=tol, max_sweeps=max_sweeps)
        return SvdResult(u=res.v, sigma=res.sigma, v=res.u)

    work = a.copy()
    v = np.eye(n)
    cap = max_sweeps if max_sweeps is not None else 100 * max(n, 1)
    scale = np.linalg.norm(work)
    # columns below this squared norm are round-off and treated as zero
    tiny = (np.finfo(float).eps * scale) ** 2 if scale > 0 else 0.0
    schedule = _round_robin(n)

    converged = n < 2 or scale == 0.0
    sweeps = 0
    while not converged and sweeps < cap:
        sweeps += 1
        rotated = False
        for p, q in schedule:
            if p.size == 0:
                continue
            ap, aq = work[:, p], work[:, q]
            alpha = np.einsum("ij,ij->j", ap, ap)
            beta = np.einsum("ij,ij->j", aq, aq)
            gamma = np.einsum("ij,ij->j", ap, aq)
            active = (np.abs(gamma) > tol * np.sqrt(alpha * beta)) & (
                np.minimum(alpha, beta) > tiny
            )
            if not active.any():
                continue
            rotated = True
            p, q = p[active], q[active]
            alpha, beta, gamma = alpha[active], beta[active], gamma[active]
            zeta = (beta - alpha) / (2.0 * gamma)
            t = np.where(zeta >= 0, 1.0, -1.0) / (np.abs(zeta) + np.sqrt(1.0 + zeta * zeta))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = c * t
            for mat in (work, v):
                xp, xq = mat[:, p].copy(), mat[:, q]
                mat[:, p] = c * xp - s * xq
                mat[:, q] = s * xp + c * xq
        converged = not rotated
    if not converged:
        raise ConvergenceError(m, n, sweeps)

    sigma = np.linalg.norm(work, axis=0)
    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    work = work[:, order]
    v = v[:, order]
    cutoff = max(m, n) * np.finfo(float).eps * (sigma[0] if sigma.size else 0.0)
    good = sigma > cutoff
    u = np.zeros((m, n))
    u[:, good] = work[:, good] / sigma[good]
    if not good.all():
        u = _complete_orthonormal(u, good)
    return SvdResult(u=u, sigma=sigma, v=v)


def singular_value_curve(a):
    """Singular values of ``a`` in non-increasing order."""
    return svd(a).sigma
