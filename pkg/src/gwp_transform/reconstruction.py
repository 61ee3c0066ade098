"""
Reconstruction of psi_0 from coefficient tables, sup-norm errors and error-bound constants.

    psi_rec(x) = (1/S(x)) sum_k sum_j r_{j,k} g_{j,k}(x)

The semi-discrete variant replaces the momentum quadrature by its closed form,
which reproduces psi_0 exactly for Gaussian targets.
"""

import logging
import math
import time
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import erfc

from .core.errors import (
    DimensionMismatchError,
    EpsMismatchError,
    InvalidParameterError,
    NumericalFailureError,
    TooFewPointsError,
)
from .core.gaussian import ArrayLike, WavePacket, WidthMatrix, as_points, overlap_params
from .quadrature import (
    DEFAULT_TAIL_TOL,
    GH,
    RS,
    TCM,
    CoefficientTable,
    MomentumGrid,
    coefficients,
    momentum_grid,
    position_points,
)
from .summation import PositionGrid, SummationCurve, finite_grid, gamma_q_constant

logger = logging.getLogger(__name__)

CHUNK = 1024
MIN_SUP_SAMPLES = 64
PLATEAU_VARIATION = 0.1
# sup errors at or below this level are rounding noise
ROUNDING_FLOOR = 1e3 * float(np.finfo(float).eps)


@dataclass(frozen=True, eq=False)
class Reconstruction:
    table: CoefficientTable
    curve: SummationCurve

    def __post_init__(self):
        if self.table.position.dim != self.curve.dim:
            raise DimensionMismatchError("coefficient table and summation curve differ in dimension")
        if not np.isclose(self.table.eps, self.curve.eps, rtol=1e-14, atol=0.0):
            raise EpsMismatchError(f"table eps {self.table.eps} != curve eps {self.curve.eps}")

    @property
    def eps(self) -> float:
        return self.curve.eps

    @property
    def dim(self) -> int:
        return self.curve.dim


def _double_sum(table: CoefficientTable, x: ArrayLike) -> np.ndarray:
    """sum_k sum_j r_{j,k} g_{j,k}(x) without the 1/S(x) factor."""
    eps = table.eps
    width = table.basis_width
    points = as_points(x, width.dim)
    q_points = table.q_points
    nodes = table.momentum.nodes
    norm = width.norm_factor(eps)

    # r_{j,k} exp(-i p_j.q_k / eps); the x-dependent phase is applied per chunk
    shifted = table.values * np.exp(-1j / eps * (q_points @ nodes.T))

    out = np.empty(len(points), dtype=complex)
    for start in range(0, len(points), CHUNK):
        chunk = points[start : start + CHUNK]
        phases = np.exp(1j / eps * (chunk @ nodes.T))
        inner = phases @ shifted.T
        diff = chunk[:, None, :] - q_points[None, :, :]
        g0 = norm * np.exp(1j / (2 * eps) * np.einsum("nki,ij,nkj->nk", diff, width.entries, diff))
        out[start : start + CHUNK] = np.sum(g0 * inner, axis=1)
    return out


def _single_point(x: ArrayLike, dim: int) -> bool:
    return np.ndim(x) == 0 or (dim > 1 and np.ndim(x) == 1)


def _complex_or_array(values: np.ndarray, x: ArrayLike, dim: int) -> Union[complex, np.ndarray]:
    return complex(values[0]) if _single_point(x, dim) else values


def reconstruct(rec: Reconstruction, x: ArrayLike) -> Union[complex, np.ndarray]:
    """psi_rec at ``x``; a complex number for one point, an array for a batch of rows."""
    points = as_points(x, rec.dim)
    return _complex_or_array(_double_sum(rec.table, points) / rec.curve(points), x, rec.dim)


def reconstruct_direct(table: CoefficientTable, x: ArrayLike) -> np.ndarray:
    """Phase-space Riemann sum dq^d sum_k sum_j r_{j,k} g_{j,k}(x), without summation curve."""
    return table.position.dq**table.position.dim * _double_sum(table, x)


def semi_discrete_I(
    q_k: ArrayLike, psi0: WavePacket, basisC: WidthMatrix, x: ArrayLike
) -> Union[complex, np.ndarray]:
    """I_{q_k}(x) = (2 pi eps)^-d int <g_(q_k,p)|psi_0> g_(q_k,p)(x) dp in closed form."""
    points = as_points(x, psi0.dim)
    values = np.asarray(overlap_params(basisC, psi0, q_k).momentum_integral(points))
    return _complex_or_array(values.reshape(-1), x, psi0.dim)


def quadrature_I(
    q_k: ArrayLike, psi0: WavePacket, basisC: WidthMatrix, grid: MomentumGrid, x: ArrayLike
) -> np.ndarray:
    """I_{q_k}(x) with the momentum integral replaced by the quadrature rule of ``grid``."""
    params = overlap_params(basisC, psi0, q_k)
    integral = grid.integrate(params.integrand(grid.offsets, x))
    return params.g0(x) * params.c(x) * integral


def _sum_over_grid(
    pos_grid: PositionGrid, term: Callable[[np.ndarray], np.ndarray], window: Optional[int]
) -> np.ndarray:
    q_points, _ = position_points(pos_grid, window)
    total = None
    for q_k in q_points:
        value = term(q_k)
        total = value if total is None else total + value
    return total


def semi_discrete_reconstruction(
    curve: SummationCurve,
    psi0: WavePacket,
    x: ArrayLike,
    window: Optional[int] = None,
) -> np.ndarray:
    """(1/S(x)) sum_k I_{q_k}(x); equals psi_0 for a grid covering its support."""
    points = as_points(x, curve.dim)
    total = _sum_over_grid(
        curve.grid, lambda q_k: semi_discrete_I(q_k, psi0, curve.width, points), window
    )
    return total / curve(points)


def semi_discrete_riemann(
    pos_grid: PositionGrid,
    psi0: WavePacket,
    basisC: WidthMatrix,
    x: ArrayLike,
    window: Optional[int] = None,
) -> np.ndarray:
    """dq^d sum_k I_{q_k}(x), the position Riemann sum of the continuous transform."""
    points = as_points(x, pos_grid.dim)
    total = _sum_over_grid(pos_grid, lambda q_k: semi_discrete_I(q_k, psi0, basisC, points), window)
    return pos_grid.dq**pos_grid.dim * total


def sample_box(center: ArrayLike, L_q: float, samples_per_dim: int) -> np.ndarray:
    """Uniform samples (endpoints included) of the box center + [-L_q, L_q]^d."""
    center = np.atleast_1d(np.asarray(center, dtype=float))
    axes = [np.linspace(c - L_q, c + L_q, samples_per_dim) for c in center]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, center.size)


def sup_error_of(
    approximation: Callable[[np.ndarray], np.ndarray],
    psi0: WavePacket,
    center: ArrayLike,
    L_q: float,
    samples_per_dim: int,
) -> float:
    """max |psi_0 - approximation| over the sampled box."""
    if samples_per_dim < MIN_SUP_SAMPLES:
        raise TooFewPointsError(f"need >= {MIN_SUP_SAMPLES} samples per dimension")
    points = sample_box(center, L_q, samples_per_dim)
    error = np.abs(psi0(points) - approximation(points))
    if not np.all(np.isfinite(error)):
        raise NumericalFailureError("non-finite value in reconstruction")
    return float(np.max(error))


def sup_error(rec: Reconstruction, psi0: WavePacket, L_q: float, samples_per_dim: int) -> float:
    """Surrogate sup norm of psi_0 - psi_rec on the box of half-length L_q around the grid center."""
    return sup_error_of(
        lambda points: reconstruct(rec, points), psi0, rec.curve.grid.q0, L_q, samples_per_dim
    )


# Error-bound constituents


def truncation_bound(d: int, eps: float, L_p: float) -> float:
    """c_T = (2 pi eps)^(d/2) exp(-d L_p^2 / 2eps)"""
    return float((2 * math.pi * eps) ** (d / 2) * math.exp(-d * L_p**2 / (2 * eps)))


def truncation_error_1d(eps: float, L_p: float) -> float:
    """Exact tail integral of exp(-p^2 / 2eps) outside [-L_p, L_p]."""
    return float(math.sqrt(2 * math.pi * eps) * erfc(L_p / math.sqrt(2 * eps)))


def second_derivative_bound(d: int, eps: float, L_p: float, L_q: float) -> float:
    """Bound on |d^2 f / dp_n^2| over the phase-space box."""
    return 4 * d * (L_p + L_q) ** 2 / eps**2 + 1 / eps


def midpoint_error_1d(L_p: float, N: int, sup_f2: float) -> float:
    """Compound midpoint error on [-L_p, L_p] with N cells."""
    return L_p**3 / (3 * N**2) * sup_f2


def tensor_error_bound(errors: Sequence[float]) -> float:
    """Error of a Cartesian product rule from per-dimension errors."""
    return float(np.sum(errors))


def gaussian_derivative(alpha: complex, beta: complex, xi: ArrayLike, s: int) -> np.ndarray:
    """s-th derivative of exp(alpha xi^2 + beta xi) via the Kampe de Feriet polynomial."""
    xi = np.asarray(xi, dtype=float)
    base = np.exp(alpha * xi**2 + beta * xi)
    total = np.zeros(np.shape(xi), dtype=complex)
    for m in range(s // 2 + 1):
        total = total + alpha**m * (2 * alpha * xi + beta) ** (s - 2 * m) / (
            math.factorial(m) * math.factorial(s - 2 * m)
        )
    return base * math.factorial(s) * total


def normal_abs_moment(r: int) -> float:
    """M_r = int |t|^r exp(-t^2/2) dt."""
    if r < 0:
        raise InvalidParameterError(f"r must be >= 0, got {r}")
    k, odd = divmod(r, 2)
    if odd:
        return float(2 ** (k + 1) * math.factorial(k))
    double_factorial = math.prod(range(r - 1, 0, -2)) if r > 1 else 1
    return float(math.sqrt(2 * math.pi) * double_factorial)


def derivative_l1_bound(s: int, eps: float, L_q: float, d: int) -> float:
    """c_s bounding the L1 norm of d^s f / dp_n^s."""
    if s < 1:
        raise InvalidParameterError(f"s must be >= 1, got {s}")
    total = 0.0
    for m in range(s // 2 + 1):
        total += (
            eps ** (m + 0.5)
            / (2 ** (m - 1) * math.factorial(m))
            * (math.sqrt(eps) + 2 * L_q * math.sqrt(d)) ** (s - 2 * m)
        )
    return math.factorial(s) / eps**s * total


@dataclass(frozen=True)
class PredictedConstants:
    """Quadrature constants (lower case) and assembled reconstruction constants (upper case).

    The Gauss-Hermite constants carry an unknown absolute factor set to 1 and
    only describe the scaling in eps, L_q and N.
    """

    C_gamma_q: float
    c_cM: Optional[float]
    c_T: Optional[float]
    c_RS: float
    c_GH: float
    C_T: Optional[float]
    C_cM: Optional[float]
    C_RS: float
    C_GH: float
    s: int
    gh_absolute: bool = False

    def tcm_bound(self, N: int) -> float:
        if self.C_T is None or self.C_cM is None:
            raise InvalidParameterError("TcM constants need L_p")
        return self.C_T + self.C_cM / N**2

    def rs_bound(self, dp: float) -> float:
        return self.C_RS * dp ** (2 * self.s + 1)

    def gh_shape(self, N: int) -> float:
        return self.C_GH * N ** (-self.s / 2)


def predicted_constants(
    d: int,
    eps: float,
    L_q: float,
    sigma: float,
    L_p: Optional[float] = None,
    s: int = 1,
    dq: Optional[float] = None,
) -> PredictedConstants:
    """
    Error-bound constants of the three rules.

    Args:
        d: dimension
        eps: semiclassical parameter
        L_q: half-length of the position box
        sigma: smallest eigenvalue of Im C of the basis
        L_p: momentum box half-length (TcM only)
        s: smoothness order for RS and GH
        dq: position spacing; when given, C_gamma_q is valid for that grid
    """
    if min(eps, L_q, sigma) <= 0:
        raise InvalidParameterError("eps, L_q and sigma must be positive")
    C_gq = gamma_q_constant(eps, sigma, L_q, dq)
    assemble = C_gq**d / (2 * math.pi * eps) ** d

    c_T = c_cM = C_T = C_cM = None
    if L_p is not None:
        c_T = truncation_bound(d, eps, L_p)
        c_cM = d * midpoint_error_1d(L_p, 1, second_derivative_bound(d, eps, L_p, L_q))
        C_T = assemble * c_T
        C_cM = assemble * c_cM

    c_RS = d * derivative_l1_bound(2 * s + 1, eps, L_q, d) / (2 * math.pi) ** (2 * s + 1)
    c_GH = (
        math.sqrt(math.pi)
        * 2 ** ((3 * s + d) / 2)
        * d ** (s / 2 + 1)
        * eps ** ((d - s) / 2)
        * L_q**s
    )
    return PredictedConstants(
        C_gamma_q=C_gq,
        c_cM=c_cM,
        c_T=c_T,
        c_RS=c_RS,
        c_GH=c_GH,
        C_T=C_T,
        C_cM=C_cM,
        C_RS=assemble * c_RS,
        C_GH=assemble * c_GH,
        s=s,
    )


def predict_bound(
    rule: str,
    d: int,
    eps: float,
    L_q: float,
    sigma: float,
    N: int,
    L_p: Optional[float] = None,
    dp: Optional[float] = None,
    dq: Optional[float] = None,
) -> Optional[float]:
    """Absolute error bound for one sweep point; None for GH (no absolute constant)."""
    if rule == TCM:
        return predicted_constants(d, eps, L_q, sigma, L_p=L_p, dq=dq).tcm_bound(N)
    if rule == RS:
        return predicted_constants(d, eps, L_q, sigma, s=1, dq=dq).rs_bound(dp)
    if rule == GH:
        return None
    raise InvalidParameterError(f"unknown rule {rule!r}")


@dataclass
class ErrorSweepRecord:
    rule: str
    N: int
    M: int
    gamma: float
    eps: float
    L_p: Optional[float]
    sup_error: float
    predicted_bound: Optional[float] = None
    wall_time_s: Optional[float] = None

    def __post_init__(self):
        if not np.isfinite(self.sup_error):
            raise NumericalFailureError(
                "non-finite sup error", {"rule": self.rule, "N": self.N, "M": self.M}
            )
        if self.sup_error < 0:
            raise InvalidParameterError(f"sup_error must be >= 0, got {self.sup_error}")


@dataclass(frozen=True)
class RateFit:
    algebraic_slope: float
    plateau: Optional[float]
    exp_rate: Optional[float]
    pre_plateau: int


def _linear_fit(x: np.ndarray, y: np.ndarray) -> Tuple[float, float]:
    coeffs = np.polyfit(x, y, 1)
    residual = float(np.sum((np.polyval(coeffs, x) - y) ** 2))
    return float(coeffs[0]), residual


def fit_rate(records: Sequence[ErrorSweepRecord], floor: float = ROUNDING_FLOOR) -> RateFit:
    """
    Empirical convergence diagnostics of one sweep series.

    A plateau is detected when the last three errors vary by less than 10% or
    all lie at or below ``floor``. It extends backwards over errors within 10% of
    the trailing mean or at or below ``floor``, so rounding noise, which varies
    by far more than 10%, still forms a plateau. The remaining pre-plateau
    segment is fitted both in log E vs log N (algebraic slope) and log E vs N;
    the exponential rate is reported only when it fits better.
    """
    if len(records) < 4:
        raise TooFewPointsError(f"need at least 4 records, got {len(records)}")
    N = np.array([r.N for r in records], dtype=float)
    if np.any(np.diff(N) <= 0):
        raise InvalidParameterError("records must have strictly increasing N")
    E = np.maximum(np.array([r.sup_error for r in records], dtype=float), np.finfo(float).tiny)

    plateau = None
    start = len(E)
    tail = E[-3:]
    level = tail.mean()
    flat = (tail.max() - tail.min()) / level < PLATEAU_VARIATION
    if flat or np.all(tail <= floor):

        def on_plateau(value: float) -> bool:
            return value <= floor or abs(value - level) / level < PLATEAU_VARIATION

        start = len(E) - 3
        while start > 0 and on_plateau(E[start - 1]):
            start -= 1
        plateau = float(E[start:].mean())

    # at least two points for the fits; the first plateau point marks the transition
    stop = max(min(start + 1, len(E)), 2)
    log_E = np.log(E[:stop])
    slope, residual_loglog = _linear_fit(np.log(N[:stop]), log_E)
    rate, residual_loglin = _linear_fit(N[:stop], log_E)
    exp_rate = rate if residual_loglin < residual_loglog else None
    logger.debug(
        f"fit_rate: pre-plateau {stop} points, slope={slope:.3f}, exp_rate={exp_rate}, plateau={plateau}"
    )
    return RateFit(algebraic_slope=slope, plateau=plateau, exp_rate=exp_rate, pre_plateau=stop)


def run_sweep_point(
    psi0: WavePacket,
    basis_width: WidthMatrix,
    rule: str,
    M: int,
    L_q: float,
    samples_per_dim: int,
    N: Optional[int] = None,
    L_p: Optional[float] = None,
    dp: Optional[float] = None,
    tail_tol: float = DEFAULT_TAIL_TOL,
    timings: bool = False,
) -> ErrorSweepRecord:
    """
    Build grids and coefficients for one (rule, N) configuration and measure its sup error.

    GH and RS grids are adapted to the envelope Re(A) of the momentum integrand.
    RS records report N = 2J + 1 nodes per dimension and L_p = N dp / 2.
    """
    started = time.perf_counter()
    d, eps = psi0.dim, psi0.eps
    sigma = float(np.linalg.eigvalsh(basis_width.imag)[0])
    context = {"rule": rule, "N": N, "M": M, "eps": eps, "gamma": sigma}

    pos_grid = finite_grid(basis_width, psi0.q, L_q, M)
    curve = SummationCurve(pos_grid, basis_width, eps)
    envelope = overlap_params(basis_width, psi0, psi0.q).A.real
    grid = momentum_grid(
        rule, eps, psi0.p, d, N=N, L_p=L_p, dp=dp, tail_tol=tail_tol, envelope=envelope
    )
    if rule == RS:
        N = grid.meta["N"]
        L_p = N * grid.meta["dp"] / 2
        context["N"] = N

    table = coefficients(grid, pos_grid, basis_width, psi0)
    try:
        error = sup_error(Reconstruction(table, curve), psi0, L_q, samples_per_dim)
    except NumericalFailureError as exc:
        raise NumericalFailureError(str(exc), context) from exc

    dq = pos_grid.dq if M > 1 else None
    bound = predict_bound(rule, d, eps, L_q, sigma, N, L_p=L_p, dp=grid.meta.get("dp"), dq=dq)
    elapsed = time.perf_counter() - started
    logger.debug(f"sweep point {context}: sup error {error:.3e}, {elapsed:.2f}s")
    return ErrorSweepRecord(
        rule=rule,
        N=int(N),
        M=M,
        gamma=sigma,
        eps=eps,
        L_p=L_p if rule != GH else None,
        sup_error=error,
        predicted_bound=bound,
        wall_time_s=elapsed if timings else None,
    )
