"""
Gaussian wave packets: validation, pointwise values and analytic inner products.

A packet with center z = (q, p), width C (complex symmetric, Im C > 0) and
semiclassical parameter eps is

    g_z(x) = (pi eps)^(-d/4) det(Im C)^(1/4)
             exp(i/eps (1/2 (x-q)^T C (x-q) + p^T (x-q)))

Inner products are antilinear in the first argument. All arrays handed out by
the types below are read-only.
"""

import logging
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy.integrate import trapezoid

from .errors import (
    DimensionMismatchError,
    DimensionTooLargeError,
    EpsMismatchError,
    ImaginaryPartNotPositiveDefiniteError,
    InvalidParameterError,
    NotSymmetricError,
    SingularDifferenceError,
    TooFewPointsError,
)

logger = logging.getLogger(__name__)

ArrayLike = Union[float, complex, Sequence, np.ndarray]

SYMMETRY_RTOL = 1e-12
MAX_ORACLE_DIM = 3
MIN_ORACLE_POINTS = 16


def readonly(array: np.ndarray) -> np.ndarray:
    array = np.array(array)
    array.setflags(write=False)
    return array


def as_points(x: ArrayLike, dim: int) -> np.ndarray:
    """Coerce ``x`` to an ``(n, dim)`` float array of sample points.

    Scalars and flat arrays are accepted for ``dim == 1``; a single
    ``dim``-vector becomes one row.
    """
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1) if dim == 1 else arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise DimensionMismatchError(f"expected points of dimension {dim}, got shape {np.shape(x)}")
    return arr


def sqrt_det(mat: np.ndarray) -> complex:
    """Square root of det(mat) as the product of principal roots of its eigenvalues.

    For matrices whose eigenvalues have positive real part (the only case used
    here) this is the branch continuous in the entries, and it agrees with the
    principal root of det(mat) for real positive definite input.
    """
    eigenvalues = np.linalg.eigvals(np.asarray(mat, dtype=complex))
    return complex(np.prod(np.sqrt(eigenvalues)))


def _invert(mat: np.ndarray, what: str) -> np.ndarray:
    if np.linalg.cond(mat) * np.finfo(float).eps > 1.0:
        raise SingularDifferenceError(f"{what} is numerically singular")
    try:
        return np.linalg.solve(mat, np.eye(mat.shape[0], dtype=complex))
    except np.linalg.LinAlgError as exc:
        raise SingularDifferenceError(f"{what} is singular: {exc}") from exc


@dataclass(frozen=True, eq=False)
class WidthMatrix:
    """Complex symmetric width with positive definite imaginary part."""

    entries: np.ndarray

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def imag(self) -> np.ndarray:
        return self.entries.imag

    def norm_factor(self, eps: float) -> float:
        """(pi eps)^(-d/4) det(Im C)^(1/4)"""
        return float((np.pi * eps) ** (-self.dim / 4) * np.linalg.det(self.imag) ** 0.25)


def validate_width(raw: ArrayLike) -> WidthMatrix:
    """
    Validate a raw complex matrix as a packet width.

    The matrix must be symmetric up to a relative tolerance of 1e-12 and its
    imaginary part positive definite. The stored entries are symmetrized.

    Args:
        raw: complex d x d matrix (a scalar is read as a 1 x 1 matrix)

    Returns:
        WidthMatrix
    """
    arr = np.atleast_2d(np.asarray(raw, dtype=complex))
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionMismatchError(f"width must be a square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidParameterError("width matrix has non-finite entries")

    deviation = float(np.max(np.abs(arr - arr.T)))
    scale = float(np.max(np.abs(arr)))
    if deviation > SYMMETRY_RTOL * scale:
        raise NotSymmetricError(deviation)
    entries = 0.5 * (arr + arr.T)

    smallest = float(np.linalg.eigvalsh(entries.imag)[0])
    if smallest <= 0.0:
        raise ImaginaryPartNotPositiveDefiniteError(smallest)
    return WidthMatrix(readonly(entries))


def imaginary_width(im_part: ArrayLike, dim: int = 1) -> WidthMatrix:
    """Width i*Im C from a scalar (times identity) or a real symmetric matrix."""
    im = np.asarray(im_part, dtype=float)
    if im.ndim == 0:
        im = float(im) * np.eye(dim)
    return validate_width(1j * im)


@dataclass(frozen=True, eq=False)
class PhaseSpacePoint:
    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        q = np.atleast_1d(np.asarray(self.q, dtype=float))
        p = np.atleast_1d(np.asarray(self.p, dtype=float))
        if q.ndim != 1 or q.shape != p.shape:
            raise DimensionMismatchError(f"q and p must be vectors of equal length, got {q.shape}, {p.shape}")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
            raise InvalidParameterError("phase-space point has non-finite coordinates")
        object.__setattr__(self, "q", readonly(q))
        object.__setattr__(self, "p", readonly(p))

    @property
    def dim(self) -> int:
        return self.q.shape[0]


@dataclass(frozen=True, eq=False)
class WavePacket:
    """Normalized Gaussian wave packet g_z^{C,eps}."""

    center: PhaseSpacePoint
    width: WidthMatrix
    eps: float

    def __post_init__(self):
        if not (np.isfinite(self.eps) and self.eps > 0):
            raise InvalidParameterError(f"eps must be positive, got {self.eps}")
        if self.center.dim != self.width.dim:
            raise DimensionMismatchError(
                f"center has dimension {self.center.dim}, width has {self.width.dim}"
            )

    @classmethod
    def create(
        cls, q: ArrayLike, p: ArrayLike, width: Union[WidthMatrix, ArrayLike], eps: float
    ) -> "WavePacket":
        """Build a packet from raw coordinates; ``width`` is validated if not already."""
        if not isinstance(width, WidthMatrix):
            width = validate_width(width)
        return cls(PhaseSpacePoint(q, p), width, float(eps))

    @property
    def q(self) -> np.ndarray:
        return self.center.q

    @property
    def p(self) -> np.ndarray:
        return self.center.p

    @property
    def dim(self) -> int:
        return self.width.dim

    def peak(self) -> float:
        """max_x |g(x)|"""
        return self.width.norm_factor(self.eps)

    def __call__(self, x: ArrayLike) -> np.ndarray:
        return evaluate_many(self.width, self.eps, self.q, self.p, x)


def _packet_values(
    width: np.ndarray, eps: float, q: np.ndarray, p: np.ndarray, norm: float, x: np.ndarray
) -> np.ndarray:
    dx = x - q
    quad = np.einsum("ni,ij,nj->n", dx, width, dx)
    return norm * np.exp(1j / eps * (0.5 * quad + dx @ p))


def evaluate_many(
    width: WidthMatrix, eps: float, q: ArrayLike, p: ArrayLike, x: ArrayLike
) -> np.ndarray:
    """Values of the packet with center (q, p) at every row of ``x``."""
    d = width.dim
    q = np.broadcast_to(np.asarray(q, dtype=float), (d,))
    p = np.broadcast_to(np.asarray(p, dtype=float), (d,))
    points = as_points(x, d)
    return _packet_values(width.entries, eps, q, p, width.norm_factor(eps), points)


def evaluate(packet: WavePacket, x: ArrayLike) -> complex:
    """Value g_z(x) at a single point."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (packet.dim,):
        raise DimensionMismatchError(f"x has shape {x.shape}, packet dimension is {packet.dim}")
    return complex(evaluate_many(packet.width, packet.eps, packet.q, packet.p, x[None, :])[0])


def _check_pair(bra_width: WidthMatrix, bra_eps: float, ket: WavePacket) -> None:
    if bra_width.dim != ket.dim:
        raise DimensionMismatchError(f"bra dimension {bra_width.dim} != ket dimension {ket.dim}")
    if not np.isclose(bra_eps, ket.eps, rtol=1e-14, atol=0.0):
        raise EpsMismatchError(f"bra eps {bra_eps} != ket eps {ket.eps}")


def overlap_many(
    basis_width: WidthMatrix, eps: float, q: ArrayLike, p: ArrayLike, ket: WavePacket
) -> np.ndarray:
    """
    Analytic inner products <g_(q_i, p_i) | ket> for many bra centers.

    All bras share ``basis_width``. With K = C0 - conj(C) and
    v = conj(C) q - C0 q0 - p + p0 the Gaussian integral evaluates to

        N_C N_C0 (2 pi)^(d/2) det(-i K / eps)^(-1/2)
        exp(i/eps (const - 1/2 v^T K^-1 v))

    Args:
        basis_width: width C of the bras
        eps: semiclassical parameter of the bras
        q: bra positions, shape (n, d)
        p: bra momenta, shape (n, d)
        ket: target packet psi_0 = g_{z0}^{C0}

    Returns:
        complex array of shape (n,)
    """
    _check_pair(basis_width, eps, ket)
    d = ket.dim
    q = as_points(q, d)
    p = as_points(p, d)
    if q.shape != p.shape:
        raise DimensionMismatchError(f"q has shape {q.shape}, p has {p.shape}")

    c_bar = np.conj(basis_width.entries)
    c0 = ket.width.entries
    q0, p0 = ket.q, ket.p
    k_inv = _invert(c0 - c_bar, "C0 - conj(C)")

    prefactor = (
        basis_width.norm_factor(eps)
        * ket.width.norm_factor(eps)
        * (2 * np.pi) ** (d / 2)
        / sqrt_det(-1j * (c0 - c_bar) / eps)
    )
    v = q @ c_bar.T - (c0 @ q0) - p + p0
    const = (
        -0.5 * np.einsum("ni,ij,nj->n", q, c_bar, q)
        + 0.5 * q0 @ c0 @ q0
        + np.einsum("ni,ni->n", p, q)
        - p0 @ q0
    )
    phase = const - 0.5 * np.einsum("ni,ij,nj->n", v, k_inv, v)
    return prefactor * np.exp(1j / eps * phase)


def overlap(bra: WavePacket, ket: WavePacket) -> complex:
    """Analytic <bra|ket>, antilinear in ``bra``."""
    if bra.dim != ket.dim:
        raise DimensionMismatchError(f"bra dimension {bra.dim} != ket dimension {ket.dim}")
    return complex(overlap_many(bra.width, bra.eps, bra.q[None, :], bra.p[None, :], ket)[0])


def overlap_oracle(
    bra: WavePacket, ket: WavePacket, box_halfwidth: float, points_per_dim: int
) -> complex:
    """
    Brute-force <bra|ket> by the tensorized trapezoid rule.

    The box has half-width ``box_halfwidth`` in every direction and is
    centered between the two packet positions. Accuracy is O(h^2) in general
    and much better for integrands that have decayed at the box edges.
    """
    _check_pair(bra.width, bra.eps, ket)
    d = bra.dim
    if d > MAX_ORACLE_DIM:
        raise DimensionTooLargeError(f"oracle supports d <= {MAX_ORACLE_DIM}, got d={d}")
    if points_per_dim < MIN_ORACLE_POINTS:
        raise TooFewPointsError(f"oracle needs >= {MIN_ORACLE_POINTS} points per dimension")

    center = 0.5 * (bra.q + ket.q)
    axes = [np.linspace(c - box_halfwidth, c + box_halfwidth, points_per_dim) for c in center]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    values = np.conj(bra(mesh)) * ket(mesh)
    values = values.reshape((points_per_dim,) * d)
    for axis in reversed(range(d)):
        values = trapezoid(values, axes[axis], axis=axis)
    logger.debug(f"overlap oracle: d={d}, {points_per_dim} points/dim, box {box_halfwidth}")
    return complex(values)


@dataclass(frozen=True, eq=False)
class OverlapParams:
    """
    Parameters of the phase-space factorization for one position-grid point q_k.

    For every momentum p,

        (2 pi eps)^-d <g_(q_k,p)|psi_0> g_(q_k,p)(x)
            = g_0(x - q_k) c(x) exp(-u^T A u / 2eps + i/eps b(x)^T u),   u = p - p0

    with A = i (C0 - conj(C))^-1.
    """

    basis_width: WidthMatrix
    psi0: WavePacket
    q_k: np.ndarray
    A: np.ndarray
    M: np.ndarray
    k_inv: np.ndarray
    a_inv: np.ndarray
    shift: np.ndarray
    c_scale: complex
    beta_scale: complex

    @property
    def eps(self) -> float:
        return self.psi0.eps

    @property
    def dim(self) -> int:
        return self.psi0.dim

    def b(self, x: ArrayLike) -> np.ndarray:
        """b_k(x) = x - q_k - i A C0 (q_k - q0), rows per sample."""
        return as_points(x, self.dim) + self.shift

    def c(self, x: ArrayLike) -> np.ndarray:
        points = as_points(x, self.dim)
        return self.c_scale * np.exp(1j / self.eps * ((points - self.psi0.q) @ self.psi0.p))

    def g0(self, x: ArrayLike) -> np.ndarray:
        """Basis packet with zero momentum centered at q_k."""
        return evaluate_many(self.basis_width, self.eps, self.q_k, np.zeros(self.dim), x)

    def beta(self, p: ArrayLike) -> np.ndarray:
        """Momentum-dependent prefactor of the inner product."""
        p = as_points(p, self.dim)
        p0 = self.psi0.p
        dq = self.q_k - self.psi0.q
        c_sum = self.psi0.width.entries + np.conj(self.basis_width.entries)
        return self.beta_scale * np.exp(
            1j / (2 * self.eps) * ((p + p0) @ dq)
            + 1 / (2 * self.eps) * ((p - p0) @ (self.A @ c_sum @ dq))
        )

    def inner_product(self, p: ArrayLike) -> np.ndarray:
        """<g_(q_k, p)|psi_0> = beta(z) exp(i/2eps (z - z0)^T M (z - z0))."""
        p = as_points(p, self.dim)
        dz = np.concatenate(
            [np.broadcast_to(self.q_k - self.psi0.q, p.shape), p - self.psi0.p], axis=1
        )
        return self.beta(p) * np.exp(1j / (2 * self.eps) * np.einsum("ni,ij,nj->n", dz, self.M, dz))

    def integrand(self, u: ArrayLike, x: ArrayLike) -> np.ndarray:
        """f_{k,x}(u) for momentum offsets ``u`` (rows) and points ``x`` (rows).

        Returns an array of shape (n_x, n_u).
        """
        u = as_points(u, self.dim)
        b = self.b(x)
        quad = np.einsum("mi,ij,mj->m", u, self.A, u)
        return np.exp(-quad[None, :] / (2 * self.eps) + 1j / self.eps * (b @ u.T))

    def momentum_integral(self, x: ArrayLike) -> np.ndarray:
        """I_{q_k}(x) in closed form: the Gaussian p-integral of the factorization."""
        d, eps = self.dim, self.eps
        b = self.b(x)
        a_inv = self.a_inv
        gauss = (2 * np.pi * eps) ** (d / 2) * sqrt_det(a_inv)
        return self.g0(x) * self.c(x) * gauss * np.exp(-np.einsum("ni,ij,nj->n", b, a_inv, b) / (2 * eps))


def overlap_params(basis_width: WidthMatrix, psi0: WavePacket, q_k: ArrayLike) -> OverlapParams:
    """
    Assemble A, b_k, c_k, M and beta for the grid point ``q_k``.

    Raises:
        SingularDifferenceError: if C0 - conj(C) cannot be inverted
    """
    d = psi0.dim
    if basis_width.dim != d:
        raise DimensionMismatchError(f"basis dimension {basis_width.dim} != psi0 dimension {d}")
    q_k = np.broadcast_to(np.asarray(q_k, dtype=float), (d,)).copy()
    eps = psi0.eps
    c_bar = np.conj(basis_width.entries)
    c0 = psi0.width.entries
    q0 = psi0.q

    k_inv = _invert(c0 - c_bar, "C0 - conj(C)")
    A = 1j * k_inv
    a_inv = -1j * (c0 - c_bar)

    # x-independent part of b_k(x) - x
    w = c_bar @ q_k - c0 @ q0
    shift = k_inv @ w

    upper = _invert(_invert(c0, "C0") - _invert(c_bar, "conj(C)"), "C0^-1 - conj(C)^-1")
    M = np.zeros((2 * d, 2 * d), dtype=complex)
    M[:d, :d] = upper
    M[d:, d:] = -k_inv

    norms = basis_width.norm_factor(eps) * psi0.width.norm_factor(eps)
    c_scale = (
        norms
        * (2 * np.pi) ** (d / 2)
        * eps ** (d / 2)
        / sqrt_det(a_inv)
        / (2 * np.pi * eps) ** d
        * np.exp(1j / eps * (-0.5 * q_k @ c_bar @ q_k + 0.5 * q0 @ c0 @ q0 - 0.5 * w @ k_inv @ w))
    )
    beta_scale = (
        2 ** (d / 2)
        * np.linalg.det(basis_width.imag @ psi0.width.imag) ** 0.25
        / sqrt_det(a_inv)
    )
    logger.debug(f"overlap params at q_k={q_k}: A={A.tolist()}")
    return OverlapParams(
        basis_width=basis_width,
        psi0=psi0,
        q_k=readonly(q_k),
        A=readonly(A),
        M=readonly(M),
        k_inv=readonly(k_inv),
        a_inv=readonly(a_inv),
        shift=readonly(shift),
        c_scale=complex(c_scale),
        beta_scale=complex(beta_scale),
    )


def sampling_density(dq: float, dp: float, eps: float) -> float:
    """Phase-space sampling density 2 pi eps / (dq dp) per dimension; > 1 means overcomplete."""
    if dq <= 0 or dp <= 0 or eps <= 0:
        raise InvalidParameterError("dq, dp and eps must be positive")
    return 2 * np.pi * eps / (dq * dp)
