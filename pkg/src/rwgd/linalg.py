"""Dense small-matrix kernels: SVD, pseudo-inverse, min-norm least squares,
spectral quantities, kernel projectors, and the weighted problem.

Everything here is a pure function of its inputs; returned arrays are owned
by the caller. Matrices are plain float64 ndarrays, vectors 1-d ndarrays.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SvdConvergenceError

Array = np.ndarray


def _as_matrix(a, name="matrix") -> Array:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.size == 0:
        raise ValueError(f"{name} must be a non-empty 2-d array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return a


def _as_vector(v, name="vector") -> Array:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-d array, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return v


def default_rank_tol(n: int, d: int) -> float:
    """Relative rank cutoff: singular values <= tol*max(sigma_max, 1) count as zero."""
    return 1e-12 * max(n, d)


@dataclass(frozen=True)
class SpectralDecomposition:
    """Full SVD A = U diag(s) V^t with an explicit numerical-rank cutoff."""

    u: Array                  # (n, n) orthogonal
    singular_values: Array    # non-increasing, length min(n, d)
    v: Array                  # (d, d) orthogonal
    rank: int
    tol: float                # relative cutoff used to decide the rank

    @property
    def cutoff(self) -> float:
        smax = self.singular_values[0] if self.singular_values.size else 0.0
        return self.tol * max(smax, 1.0)


def svd(a, tol: float | None = None) -> SpectralDecomposition:
    """Full singular value decomposition with rank determined by the cutoff rule."""
    a = _as_matrix(a)
    n, d = a.shape
    if tol is None:
        tol = default_rank_tol(n, d)
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=True)
    except np.linalg.LinAlgError as exc:
        raise SvdConvergenceError(f"SVD did not converge for {n}x{d} matrix") from exc
    cutoff = tol * max(s[0] if s.size else 0.0, 1.0)
    rank = int(np.sum(s > cutoff))
    return SpectralDecomposition(u=u, singular_values=s, v=vt.T, rank=rank, tol=tol)


def spectral_norm(a) -> float:
    """Largest singular value (returned by the SVD, never power iteration)."""
    return float(svd(a).singular_values[0])


def pseudo_inverse(a, tol: float | None = None) -> Array:
    """Moore-Penrose pseudo-inverse V Sigma^+ U^t, zeroing singular values below the cutoff."""
    dec = svd(a, tol=tol)
    s = dec.singular_values
    s_inv = np.zeros_like(s)
    r = dec.rank
    s_inv[:r] = 1.0 / s[:r]
    return (dec.v[:, : s.size] * s_inv) @ dec.u[:, : s.size].T


def min_norm_least_squares(x, y) -> Array:
    """Minimum-norm minimizer of ||X v - Y||_2, i.e. X^+ Y."""
    x = _as_matrix(x, "X")
    y = _as_vector(y, "Y")
    if x.shape[0] != y.shape[0]:
        raise ValueError(f"X has {x.shape[0]} rows but Y has length {y.shape[0]}")
    return pseudo_inverse(x) @ y


def sigma_min_plus(a, tol: float | None = None) -> float:
    """Smallest non-zero singular value (above the rank cutoff)."""
    dec = svd(a, tol=tol)
    if dec.rank == 0:
        raise ValueError("no nonzero singular value: matrix is numerically zero")
    return float(dec.singular_values[dec.rank - 1])


def kernel_projector(x) -> Array:
    """Orthogonal projection I - X^+ X onto ker(X)."""
    x = _as_matrix(x, "X")
    d = x.shape[1]
    p = np.eye(d) - pseudo_inverse(x) @ x
    return 0.5 * (p + p.T)


@dataclass(frozen=True)
class Dataset:
    """Design matrix X (n x d), labels Y (n), optional ground truth and noise covariance."""

    x: Array
    y: Array
    w_star: Array | None = None
    sigma_eps: Array | None = None

    def __post_init__(self):
        object.__setattr__(self, "x", _as_matrix(self.x, "X"))
        object.__setattr__(self, "y", _as_vector(self.y, "Y"))
        if self.x.shape[0] != self.y.shape[0]:
            raise ValueError("X and Y row counts differ")
        if self.w_star is not None:
            w = _as_vector(self.w_star, "w_star")
            if w.shape[0] != self.x.shape[1]:
                raise ValueError("w_star length must equal the column count of X")
            object.__setattr__(self, "w_star", w)
        if self.sigma_eps is not None:
            s = _as_matrix(self.sigma_eps, "sigma_eps")
            if s.shape != (self.x.shape[0],) * 2:
                raise ValueError("sigma_eps must be n x n")
            object.__setattr__(self, "sigma_eps", s)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class WeightedProblem:
    """A dataset together with M2 = E[D^2] and every derived quantity the
    recursions and bounds need: X_hat = M2^{1/2} X, the weighted Gram matrix
    X^t M2 X, the weighted min-norm estimator, its residual, and cached
    spectral data."""

    dataset: Dataset
    m2_diag: Array
    x_hat: Array = field(repr=False)
    y_hat: Array = field(repr=False)
    xx_hat: Array = field(repr=False)
    w_hat: Array
    residual: Array
    sigma_min_plus_xx_hat: float
    norm_xx_hat: float
    norm_xx: float
    norm_x: float

    @property
    def x(self) -> Array:
        return self.dataset.x

    @property
    def y(self) -> Array:
        return self.dataset.y

    @property
    def n(self) -> int:
        return self.dataset.n

    @property
    def d(self) -> int:
        return self.dataset.d

    def kernel_projector(self) -> Array:
        return kernel_projector(self.dataset.x)


def build_weighted_problem(dataset: Dataset, m2_diag) -> WeightedProblem:
    """Assemble the weighted least squares problem for a diagonal M2.

    m2_diag must be strictly positive: a zero entry means the data point is
    never active and should be removed from the dataset instead.
    """
    m2 = _as_vector(m2_diag, "m2_diag")
    if m2.shape[0] != dataset.n:
        raise ValueError(f"m2_diag has length {m2.shape[0]}, expected n = {dataset.n}")
    if np.any(m2 <= 0):
        bad = int(np.argmin(m2))
        raise ValueError(
            f"m2_diag[{bad}] = {m2[bad]} is not strictly positive; data point {bad} "
            "is never active and must be removed from the dataset"
        )
    x, y = dataset.x, dataset.y
    root = np.sqrt(m2)
    x_hat = root[:, None] * x
    y_hat = root * y
    xx_hat = x.T @ (m2[:, None] * x)
    xx_hat = 0.5 * (xx_hat + xx_hat.T)
    w_hat = pseudo_inverse(x_hat) @ y_hat
    residual = y - x @ w_hat
    dec_x = svd(x)
    return WeightedProblem(
        dataset=dataset,
        m2_diag=m2,
        x_hat=x_hat,
        y_hat=y_hat,
        xx_hat=xx_hat,
        w_hat=w_hat,
        residual=residual,
        sigma_min_plus_xx_hat=sigma_min_plus(xx_hat),
        norm_xx_hat=spectral_norm(xx_hat),
        norm_xx=float(dec_x.singular_values[0] ** 2),
        norm_x=float(dec_x.singular_values[0]),
    )
