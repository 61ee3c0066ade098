"""
Summation curve S(x) = sum_k |g_0(x - q_k)|^2 on uniform position grids.

Grids are aligned with the eigenvectors of Im C and rotated about q0. Two
index sets are supported: a finite M^d grid covering the box of half-length
L_q, and the integer lattice (truncated once terms become negligible).
"""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import erf

from .core.errors import IndexOutOfRangeError, InvalidGeometryError, InvalidParameterError
from .core.gaussian import ArrayLike, WidthMatrix, as_points, readonly

logger = logging.getLogger(__name__)

FINITE = "finite"
INTEGER_LATTICE = "integer-lattice"

# samples per chunk when summing over many grid points
CHUNK = 256
DEFAULT_LATTICE_RTOL = 1e-18


def eigh_aligned(im_width: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
    """
    Eigen-decomposition of a real symmetric matrix with a reproducible basis.

    Eigenvalues come in ascending order; every eigenvector is signed so that its
    first nonzero component is positive.

    Returns:
        (lambdas, U) with U orthogonal and U diag(lambdas) U^T == im_width
    """
    lambdas, vectors = np.linalg.eigh(np.atleast_2d(np.asarray(im_width, dtype=float)))
    for n in range(vectors.shape[1]):
        column = vectors[:, n]
        pivot = np.flatnonzero(np.abs(column) > 1e-14)
        if pivot.size and column[pivot[0]] < 0:
            vectors[:, n] = -column
    return lambdas, vectors


@dataclass(frozen=True, eq=False)
class PositionGrid:
    """Uniform position grid q_k = q0 + U o_k, aligned with the eigenvectors of Im C."""

    q0: np.ndarray
    dq: float
    U: np.ndarray
    lambdas: np.ndarray
    mode: str = FINITE
    L_q: Optional[float] = None
    M: Optional[int] = None
    lattice_rtol: float = DEFAULT_LATTICE_RTOL

    @property
    def dim(self) -> int:
        return self.q0.shape[0]

    @property
    def is_finite(self) -> bool:
        return self.mode == FINITE

    def offsets_1d(self) -> np.ndarray:
        """Per-dimension offsets -L_q + (2k - 1)/2 dq, k = 1..M (finite grids only)."""
        if not self.is_finite:
            raise InvalidGeometryError("integer lattice has no finite offset list")
        k = np.arange(1, self.M + 1)
        return -self.L_q + (2 * k - 1) / 2 * self.dq

    def indices(self) -> Iterator[Tuple[int, ...]]:
        """Multi-indices k in row-major order (finite grids only)."""
        return itertools.product(range(1, self.M + 1), repeat=self.dim)

    def points(self) -> np.ndarray:
        """All grid points, shape (M^d, d), row-major over (k_1, ..., k_d)."""
        offsets = self.offsets_1d()
        mesh = np.stack(np.meshgrid(*([offsets] * self.dim), indexing="ij"), axis=-1)
        return self.q0 + mesh.reshape(-1, self.dim) @ self.U.T

    def point(self, k: Sequence[int]) -> np.ndarray:
        k = tuple(int(v) for v in np.atleast_1d(k))
        if len(k) != self.dim:
            raise IndexOutOfRangeError(f"index {k} has wrong length for d={self.dim}")
        if self.is_finite:
            if not all(1 <= v <= self.M for v in k):
                raise IndexOutOfRangeError(f"index {k} outside 1..{self.M}")
            offset = -self.L_q + (2 * np.asarray(k) - 1) / 2 * self.dq
        else:
            offset = np.asarray(k, dtype=float) * self.dq
        return self.q0 + self.U @ offset

    def __len__(self) -> int:
        if not self.is_finite:
            raise TypeError("integer lattice is infinite")
        return self.M**self.dim


def finite_grid(width: WidthMatrix, q0: ArrayLike, L_q: float, M: int) -> PositionGrid:
    """M points per dimension on [q0 - L_q, q0 + L_q], spacing 2 L_q / M."""
    if L_q <= 0 or M < 1:
        raise InvalidParameterError(f"need L_q > 0 and M >= 1, got L_q={L_q}, M={M}")
    lambdas, U = eigh_aligned(width.imag)
    q0 = np.broadcast_to(np.asarray(q0, dtype=float), (width.dim,))
    return PositionGrid(
        q0=readonly(q0),
        dq=2 * L_q / M,
        U=readonly(U),
        lambdas=readonly(lambdas),
        mode=FINITE,
        L_q=float(L_q),
        M=int(M),
    )


def lattice_grid(
    width: WidthMatrix, q0: ArrayLike, dq: float, rtol: float = DEFAULT_LATTICE_RTOL
) -> PositionGrid:
    """Integer lattice q0 + U (k dq), k in Z^d."""
    if dq <= 0:
        raise InvalidParameterError(f"dq must be positive, got {dq}")
    lambdas, U = eigh_aligned(width.imag)
    q0 = np.broadcast_to(np.asarray(q0, dtype=float), (width.dim,))
    return PositionGrid(
        q0=readonly(q0),
        dq=float(dq),
        U=readonly(U),
        lambdas=readonly(lambdas),
        mode=INTEGER_LATTICE,
        lattice_rtol=rtol,
    )


@dataclass(frozen=True, eq=False)
class SummationCurve:
    grid: PositionGrid
    width: WidthMatrix
    eps: float

    @property
    def dim(self) -> int:
        return self.grid.dim

    def peak_squared(self) -> float:
        """|g_0(0)|^2 = (pi eps)^(-d/2) det(Im C)^(1/2)"""
        return self.width.norm_factor(self.eps) ** 2

    def _lattice_window(self, y: np.ndarray) -> np.ndarray:
        """Lattice indices near rotated points ``y``, shape (n, m, d)."""
        grid = self.grid
        # terms below rtol times the largest one (>= exp(-lambda dq^2 / 4 eps)) are dropped
        radius = np.sqrt(
            grid.dq**2 / 4 + self.eps * math.log(1 / grid.lattice_rtol) / grid.lambdas
        )
        half = np.ceil(radius / grid.dq).astype(int) + 1
        ranges = [np.arange(-h, h + 1) for h in half]
        window = np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1).reshape(-1, self.dim)
        return np.rint(y / grid.dq)[:, None, :] + window[None, :, :]

    def squared_terms(self, x: np.ndarray) -> Iterator[Tuple[slice, np.ndarray]]:
        """Yield (row slice, |g_0(x - q_k)|^2 for every grid point) in chunks of samples.

        Finite grids give arrays of shape (chunk, M^d) in row-major index order.
        The lattice gives a local window per sample.
        """
        points = as_points(x, self.dim)
        im = self.width.imag
        peak = self.peak_squared()
        if self.grid.is_finite:
            nodes = self.grid.points()
            for start in range(0, len(points), CHUNK):
                rows = slice(start, start + CHUNK)
                diff = points[rows, None, :] - nodes[None, :, :]
                quad = np.einsum("nki,ij,nkj->nk", diff, im, diff)
                yield rows, peak * np.exp(-quad / self.eps)
        else:
            for start in range(0, len(points), CHUNK):
                rows = slice(start, start + CHUNK)
                y = (points[rows] - self.grid.q0) @ self.grid.U
                nodes = self.grid.q0 + (self._lattice_window(y) * self.grid.dq) @ self.grid.U.T
                diff = points[rows, None, :] - nodes
                quad = np.einsum("nki,ij,nkj->nk", diff, im, diff)
                yield rows, peak * np.exp(-quad / self.eps)

    def __call__(self, x: ArrayLike) -> np.ndarray:
        points = as_points(x, self.dim)
        values = np.empty(len(points))
        for rows, terms in self.squared_terms(points):
            values[rows] = terms.sum(axis=1)
        return values


def _single_point(x: ArrayLike, dim: int) -> bool:
    return np.ndim(x) == 0 or (dim > 1 and np.ndim(x) == 1)


def _scalar_or_array(values: np.ndarray, x: ArrayLike, dim: int) -> Union[float, np.ndarray]:
    return float(values[0]) if _single_point(x, dim) else values


def summation_direct(curve: SummationCurve, x: ArrayLike) -> Union[float, np.ndarray]:
    """S(x) by direct summation; a float for one point, an array for a batch of rows."""
    return _scalar_or_array(curve(x), x, curve.dim)


def summation_expansion(
    dq: float, gamma_i: float, eps: float, x: ArrayLike, n_terms: int
) -> Union[float, np.ndarray]:
    """
    Partial cosine series of the one-dimensional lattice summation curve:

        1/dq + 2/dq sum_{n=1}^{n_terms} cos(2 pi n x / dq) exp(-pi^2 n^2 eps / (gamma_i dq^2))
    """
    if n_terms < 0:
        raise InvalidParameterError(f"n_terms must be >= 0, got {n_terms}")
    x_arr = np.asarray(x, dtype=float)
    n = np.arange(1, n_terms + 1)
    damping = np.exp(-(np.pi**2) * n**2 * eps / (gamma_i * dq**2))
    series = np.cos(2 * np.pi * np.multiply.outer(x_arr, n) / dq) @ damping
    values = 1 / dq + 2 / dq * series
    return float(values) if x_arr.ndim == 0 else values


def spectral_bound(s: int, dq: float, gamma_i: float, eps: float) -> float:
    """c_s dq^(2s-1) with c_s = 2 s! gamma_i^s / (pi^(2s) eps^s); bounds |S - 1/dq| on the lattice."""
    if s < 1:
        raise InvalidParameterError(f"s must be >= 1, got {s}")
    c_s = 2 * math.factorial(s) * gamma_i**s / (np.pi ** (2 * s) * eps**s)
    return float(c_s * dq ** (2 * s - 1))


def partition_weight(curve: SummationCurve, k: Sequence[int], x: ArrayLike) -> Union[float, np.ndarray]:
    """chi_k(x) = |g_0(x - q_k)|^2 / S(x)."""
    q_k = curve.grid.point(k)
    points = as_points(x, curve.dim)
    diff = points - q_k
    quad = np.einsum("ni,ij,nj->n", diff, curve.width.imag, diff)
    values = curve.peak_squared() * np.exp(-quad / curve.eps) / curve(points)
    return _scalar_or_array(values, x, curve.dim)


def partition_weights(curve: SummationCurve, x: ArrayLike) -> np.ndarray:
    """All chi_k(x) of a finite grid, shape (n_samples, M^d) in row-major index order."""
    if not curve.grid.is_finite:
        raise InvalidGeometryError("partition weights are enumerated for finite grids only")
    points = as_points(x, curve.dim)
    weights = np.empty((len(points), len(curve.grid)))
    for rows, terms in curve.squared_terms(points):
        weights[rows] = terms / terms.sum(axis=1, keepdims=True)
    return weights


def _summation_1d(offsets_dist: np.ndarray, lam: float, eps: float) -> np.ndarray:
    peak = (np.pi * eps) ** (-0.5) * math.sqrt(lam)
    return peak * np.exp(-lam * offsets_dist**2 / eps).sum(axis=-1)


def summation_product(curve: SummationCurve, x: ArrayLike) -> Union[float, np.ndarray]:
    """
    S(x) as the product of one-dimensional curves S_n(x^T u_n).

    Each factor uses the Gaussian (pi eps)^(-1/4) lambda_n^(1/4) exp(-lambda_n y^2 / 2eps)
    summed over the one-dimensional grid along u_n.
    """
    grid = curve.grid
    points = as_points(x, curve.dim)
    y = (points - grid.q0) @ grid.U
    values = np.ones(len(points))
    for n, lam in enumerate(grid.lambdas):
        if grid.is_finite:
            dist = y[:, n : n + 1] - grid.offsets_1d()[None, :]
        else:
            radius = math.sqrt(grid.dq**2 / 4 + curve.eps * math.log(1 / grid.lattice_rtol) / lam)
            half = int(math.ceil(radius / grid.dq)) + 1
            k = np.rint(y[:, n] / grid.dq)[:, None] + np.arange(-half, half + 1)[None, :]
            dist = y[:, n : n + 1] - k * grid.dq
        values *= _summation_1d(dist, lam, curve.eps)
    return _scalar_or_array(values, x, curve.dim)


def bound_upper(dq: float, eps: float, gamma_i: float) -> float:
    """Upper bound for sum_k |g_0(x - q_k)| on the one-dimensional lattice."""
    if min(dq, eps, gamma_i) <= 0:
        raise InvalidParameterError("dq, eps and gamma_i must be positive")
    return float(
        math.sqrt(2)
        * (np.pi * eps) ** 0.25
        * gamma_i**-0.25
        / dq
        * (1 + dq * math.sqrt(gamma_i / (2 * np.pi * eps)))
    )


def bound_lower(dq: float, eps: float, gamma_i: float, L_q: float) -> float:
    """Lower bound for S(x) on [q0 - L_q, q0 + L_q] for the finite one-dimensional grid."""
    if min(dq, eps, gamma_i, L_q) <= 0:
        raise InvalidParameterError("dq, eps, gamma_i and L_q must be positive")
    if dq >= 2 * L_q:
        raise InvalidGeometryError(f"dq={dq} must be smaller than 2 L_q={2 * L_q}")
    root = math.sqrt(gamma_i / eps)
    return float((erf(2 * L_q * root) - erf(dq * root)) / (2 * dq))


def gamma_q_constant(eps: float, sigma: float, L_q: float, dq: Optional[float] = None) -> float:
    """
    Prefactor C with sup_x (1/S(x)) sum_k |g_0(x - q_k)| < C^d.

    Without ``dq`` the limiting value 2 sqrt(2) (pi eps)^(1/4) sigma^(-1/4) / erf(2 L_q sqrt(sigma/eps))
    is returned. With ``dq`` the per-grid ratio bound_upper / bound_lower is used when larger,
    which keeps the constant valid for coarse grids.
    """
    limit = (
        2
        * math.sqrt(2)
        * (np.pi * eps) ** 0.25
        * sigma**-0.25
        / erf(2 * L_q * math.sqrt(sigma / eps))
    )
    if dq is None:
        return float(limit)
    ratio = bound_upper(dq, eps, sigma) / bound_lower(dq, eps, sigma, L_q)
    return float(max(limit, ratio))


def summation_riemann_weight(grid: PositionGrid) -> float:
    """dq^d, the constant standing in for 1/S(x) in the direct phase-space discretization."""
    return float(grid.dq**grid.dim)
