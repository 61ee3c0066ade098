"""
Momentum-space quadrature grids and analytic representation coefficients.

Three discretizations of the momentum integral are provided:

- TcM: truncation to the box p0 + [-L_p, L_p]^d and the compound midpoint rule
- RS:  infinite Riemann sum on p0 + dp Z^d, cut off once the Gaussian envelope is negligible
- GH:  tensorized Gauss-Hermite rule with transformed nodes and weights

Multi-indices are enumerated row-major over (j_1, ..., j_d).
"""

import itertools
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Iterator, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from numpy.polynomial import hermite as herm
from scipy.linalg import eigh_tridiagonal

from .core.errors import (
    DimensionMismatchError,
    EpsMismatchError,
    IndexOutOfRangeError,
    InvalidParameterError,
    NTooLargeError,
)
from .core.gaussian import ArrayLike, WavePacket, WidthMatrix, overlap_many, readonly
from .summation import PositionGrid

logger = logging.getLogger(__name__)

TCM = "TcM"
RS = "RS"
GH = "GH"
RULES = (TCM, RS, GH)

MAX_HERMITE_N = 512
MAX_EXPLICIT_N = 15
DEFAULT_TAIL_TOL = 1e-16
NEWTON_STEPS = 2


def hermite_functions(N: int, x: ArrayLike) -> np.ndarray:
    """
    Normalized Hermite functions psi_0..psi_N at ``x`` by the three-term recurrence.

        psi_0 = pi^(-1/4) exp(-x^2/2)
        psi_{k+1} = sqrt(2/(k+1)) x psi_k - sqrt(k/(k+1)) psi_{k-1}

    Returns:
        array of shape (N + 1, *x.shape)
    """
    x = np.asarray(x, dtype=float)
    values = np.empty((N + 1,) + x.shape)
    values[0] = np.pi**-0.25 * np.exp(-(x**2) / 2)
    if N >= 1:
        values[1] = math.sqrt(2.0) * x * values[0]
    for k in range(1, N):
        values[k + 1] = math.sqrt(2 / (k + 1)) * x * values[k] - math.sqrt(k / (k + 1)) * values[k - 1]
    return values


def _hermite_nodes_scaled(N: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes s_j and scaled weights e^(s_j^2) w_j of the N-point rule."""
    if N < 1:
        raise InvalidParameterError(f"N must be >= 1, got {N}")
    if N > MAX_HERMITE_N:
        raise NTooLargeError(f"N={N} exceeds {MAX_HERMITE_N}")
    if N == 1:
        return np.zeros(1), np.array([math.sqrt(math.pi)])

    # Golub-Welsch: eigenvalues of the Jacobi matrix
    off_diagonal = np.sqrt(np.arange(1, N) / 2)
    nodes = eigh_tridiagonal(np.zeros(N), off_diagonal, eigvals_only=True)

    # polish with Newton on psi_N; psi_N' = sqrt(2N) psi_{N-1} - x psi_N
    for _ in range(NEWTON_STEPS):
        psi = hermite_functions(N, nodes)
        nodes = nodes - psi[N] / (math.sqrt(2 * N) * psi[N - 1] - nodes * psi[N])
    nodes = 0.5 * (nodes - nodes[::-1])

    psi = hermite_functions(N - 1, nodes)
    scaled = 1.0 / (N * psi[N - 1] ** 2)
    scaled = 0.5 * (scaled + scaled[::-1])
    return nodes, scaled


def hermite_rule(N: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    N-point Gauss-Hermite rule for the weight e^(-p^2).

    Nodes are Golub-Welsch eigenvalues refined by Newton steps. Weights come from
    w_j = e^(-s_j^2) / (N psi_{N-1}(s_j)^2) rather than from eigenvector components,
    which lose relative accuracy on the outer nodes.

    Returns:
        (nodes, weights), nodes strictly increasing and symmetric about 0

    Raises:
        NTooLargeError: if the outermost weights underflow double precision
            (N of roughly 370 and above); ``gh_grid`` stores the scaled weights
            e^(s_j^2) w_j, which stay representable up to N = 512
    """
    nodes, scaled = _hermite_nodes_scaled(N)
    weights = np.exp(np.log(scaled) - nodes**2)
    if not np.all(weights > 0):
        raise NTooLargeError(
            f"N={N}: weights of the outer nodes underflow; use the scaled weights of gh_grid"
        )
    return nodes, weights


def hermite_rule_explicit(N: int) -> Tuple[np.ndarray, np.ndarray]:
    """Cross-check rule: roots of H_N and w_j = 2^(N+1) N! sqrt(pi) / H_{N+1}(s_j)^2 (N <= 15)."""
    if not 1 <= N <= MAX_EXPLICIT_N:
        raise NTooLargeError(f"explicit weights are limited to 1 <= N <= {MAX_EXPLICIT_N}")
    nodes = np.sort(herm.hermroots([0] * N + [1]).real)
    h_next = herm.hermval(nodes, [0] * (N + 1) + [1])
    weights = 2 ** (N + 1) * math.factorial(N) * math.sqrt(math.pi) / h_next**2
    return nodes, weights


def tensorize(
    rules_1d: Sequence[Tuple[np.ndarray, np.ndarray]],
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Cartesian product of one-dimensional rules.

    Args:
        rules_1d: one (nodes, weights) pair per dimension

    Returns:
        (nodes of shape (n, d), weights of shape (n,)) in row-major order
    """
    node_axes = [np.asarray(nodes, dtype=float) for nodes, _ in rules_1d]
    weight_axes = [np.asarray(weights, dtype=float) for _, weights in rules_1d]
    d = len(node_axes)
    nodes = np.stack(np.meshgrid(*node_axes, indexing="ij"), axis=-1).reshape(-1, d)
    weights = np.ones(1)
    for axis in weight_axes:
        weights = np.multiply.outer(weights, axis).reshape(-1)
    return nodes, weights


def _index_grid(ranges: Sequence[Sequence[int]]) -> np.ndarray:
    return np.array(list(itertools.product(*ranges)), dtype=int).reshape(-1, len(ranges))


@dataclass(frozen=True, eq=False)
class MomentumGrid:
    """Tensorized momentum nodes p_j with quadrature weights and their multi-indices."""

    rule: str
    p0: np.ndarray
    indices: np.ndarray
    nodes: np.ndarray
    weights: np.ndarray
    eps: float
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.p0.shape[0]

    @property
    def offsets(self) -> np.ndarray:
        """p_j - p0"""
        return self.nodes - self.p0

    def __len__(self) -> int:
        return len(self.weights)

    def integrate(self, values: ArrayLike) -> np.ndarray:
        """sum_j weight_j f(p_j - p0) for f sampled on the nodes (last axis)."""
        return np.asarray(values) @ self.weights


def _vector(p0: ArrayLike, d: int) -> np.ndarray:
    p0 = np.atleast_1d(np.asarray(p0, dtype=float))
    if p0.size == 1 and d > 1:
        p0 = np.full(d, float(p0[0]))
    if p0.shape != (d,):
        raise DimensionMismatchError(f"p0 has shape {p0.shape}, expected ({d},)")
    return p0


def _envelope_factor(envelope: Optional[ArrayLike], d: int) -> Optional[np.ndarray]:
    if envelope is None:
        return None
    E = np.atleast_2d(np.asarray(envelope, dtype=float))
    if E.shape != (d, d):
        raise DimensionMismatchError(f"envelope has shape {E.shape}, expected ({d}, {d})")
    try:
        return np.linalg.cholesky(0.5 * (E + E.T))
    except np.linalg.LinAlgError as exc:
        raise InvalidParameterError(f"envelope is not positive definite: {exc}") from exc


def gh_grid(
    N: int, eps: float, p0: ArrayLike, envelope: Optional[ArrayLike] = None
) -> MomentumGrid:
    """
    Tensorized Gauss-Hermite grid p_j = p0 + s_j sqrt(2 eps), omega_j = e^(s_j^2) w_j sqrt(2 eps).

    With ``envelope`` E = L L^T (real SPD) the rule is adapted to the Gaussian
    exp(-u^T E u / 2eps): nodes p0 + sqrt(2 eps) L^-T s_j, weights det(L)^-1 prod omega.
    The identity envelope gives the plain rule.
    """
    p0 = np.atleast_1d(np.asarray(p0, dtype=float))
    d = p0.shape[0]
    nodes_1d, scaled = _hermite_nodes_scaled(N)
    omega = scaled * math.sqrt(2 * eps)
    offsets, weights = tensorize([(math.sqrt(2 * eps) * nodes_1d, omega)] * d)

    factor = _envelope_factor(envelope, d)
    if factor is not None:
        offsets = np.linalg.solve(factor.T, offsets.T).T
        weights = weights / float(np.prod(np.diag(factor)))

    logger.debug(f"GH grid: N={N}, d={d}, {len(weights)} nodes")
    return MomentumGrid(
        rule=GH,
        p0=readonly(p0),
        indices=readonly(_index_grid([range(1, N + 1)] * d)),
        nodes=readonly(p0 + offsets),
        weights=readonly(weights),
        eps=float(eps),
        meta={"N": N, "adapted": factor is not None},
    )


def tcm_grid(N: int, L_p: float, p0: ArrayLike, eps: float, d: int) -> MomentumGrid:
    """Compound midpoint grid on p0 + [-L_p, L_p]^d with N points per dimension."""
    if N < 1 or L_p <= 0:
        raise InvalidParameterError(f"need N >= 1 and L_p > 0, got N={N}, L_p={L_p}")
    p0 = _vector(p0, d)
    dp = 2 * L_p / N
    j = np.arange(1, N + 1)
    axis = -L_p + (2 * j - 1) / 2 * dp
    offsets, weights = tensorize([(axis, np.full(N, dp))] * d)
    logger.debug(f"TcM grid: N={N}, L_p={L_p}, dp={dp}, d={d}")
    return MomentumGrid(
        rule=TCM,
        p0=readonly(p0),
        indices=readonly(_index_grid([range(1, N + 1)] * d)),
        nodes=readonly(p0 + offsets),
        weights=readonly(weights),
        eps=float(eps),
        meta={"N": N, "L_p": float(L_p), "dp": dp},
    )


def rs_cutoff(dp: float, eps: float, tail_tol: float, envelope_min: float = 1.0) -> int:
    """Smallest J >= 1 with exp(-(J dp)^2 lambda / 2eps) < tail_tol."""
    radius = math.sqrt(2 * eps * math.log(1 / tail_tol) / envelope_min)
    return int(math.floor(radius / dp)) + 1


def rs_grid(
    dp: float,
    p0: ArrayLike,
    eps: float,
    d: int,
    tail_tol: float = DEFAULT_TAIL_TOL,
    envelope: Optional[ArrayLike] = None,
) -> MomentumGrid:
    """
    Riemann-sum lattice p0 + j dp, |j_n| <= J, with uniform weight dp^d.

    J is chosen from the coefficient envelope exp(-lambda |p_j - p0|^2 / 2eps),
    lambda being the smallest eigenvalue of ``envelope`` (1 by default).
    """
    if dp <= 0:
        raise InvalidParameterError(f"dp must be positive, got {dp}")
    if not 0 < tail_tol <= 1e-6:
        raise InvalidParameterError(f"tail_tol must lie in (0, 1e-6], got {tail_tol}")
    p0 = _vector(p0, d)
    envelope_min = 1.0
    if envelope is not None:
        _envelope_factor(envelope, d)
        envelope_min = float(np.linalg.eigvalsh(np.atleast_2d(envelope))[0])
    J = rs_cutoff(dp, eps, tail_tol, envelope_min)
    j = np.arange(-J, J + 1)
    offsets, weights = tensorize([(j * dp, np.full(j.size, dp))] * d)
    logger.debug(f"RS grid: dp={dp}, J={J}, d={d}")
    return MomentumGrid(
        rule=RS,
        p0=readonly(p0),
        indices=readonly(_index_grid([range(-J, J + 1)] * d)),
        nodes=readonly(p0 + offsets),
        weights=readonly(weights),
        eps=float(eps),
        meta={"dp": float(dp), "J": J, "N": 2 * J + 1, "tail_tol": tail_tol},
    )


@dataclass(frozen=True, eq=False)
class CoefficientTable:
    """
    Coefficients r_{j,k} of psi_0 in the discrete Gaussian family g_{j,k}.

    ``values[k, j]`` holds r for position row k and momentum row j, both in
    row-major multi-index order.
    """

    rule: str
    values: np.ndarray
    momentum: MomentumGrid
    position: PositionGrid
    q_points: np.ndarray
    q_indices: np.ndarray
    basis_width: WidthMatrix
    psi0: WavePacket

    @property
    def eps(self) -> float:
        return self.psi0.eps

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape

    def __getitem__(self, key: Tuple[Sequence[int], Sequence[int]]) -> complex:
        j, k = key
        j_row = _find_row(self.momentum.indices, j)
        k_row = _find_row(self.q_indices, k)
        return complex(self.values[k_row, j_row])

    def items(self) -> Iterator[Tuple[Tuple[int, ...], Tuple[int, ...], complex]]:
        for k_row, k in enumerate(self.q_indices):
            for j_row, j in enumerate(self.momentum.indices):
                yield tuple(int(v) for v in j), tuple(int(v) for v in k), complex(self.values[k_row, j_row])

    def with_values(self, values: ArrayLike) -> "CoefficientTable":
        values = np.broadcast_to(np.asarray(values, dtype=complex), self.values.shape)
        return replace(self, values=readonly(values))

    def to_frame(self) -> pd.DataFrame:
        """Rows rule, j, k, re, im with semicolon-joined multi-indices."""
        n_q, n_p = self.values.shape
        j_labels = [";".join(str(v) for v in j) for j in self.momentum.indices]
        k_labels = [";".join(str(v) for v in k) for k in self.q_indices]
        return pd.DataFrame(
            {
                "rule": self.rule,
                "j": np.tile(j_labels, n_q),
                "k": np.repeat(k_labels, n_p),
                "re": self.values.real.reshape(-1),
                "im": self.values.imag.reshape(-1),
            }
        )

    def to_csv(self, path: Union[str, Path]) -> None:
        self.to_frame().to_csv(path, index=False, lineterminator="\n")


def _find_row(indices: np.ndarray, key: Sequence[int]) -> int:
    key = np.atleast_1d(np.asarray(key, dtype=int))
    rows = np.flatnonzero(np.all(indices == key, axis=1))
    if rows.size == 0:
        raise IndexOutOfRangeError(f"multi-index {tuple(key)} not in table")
    return int(rows[0])


def position_points(pos_grid: PositionGrid, window: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Points and multi-indices of a position grid.

    Finite grids use all M^d points. The integer lattice needs a ``window``:
    indices with |k_n| <= window.
    """
    if pos_grid.is_finite:
        return pos_grid.points(), _index_grid([range(1, pos_grid.M + 1)] * pos_grid.dim)
    if window is None:
        raise InvalidParameterError("an index window is required for the integer lattice")
    indices = _index_grid([range(-window, window + 1)] * pos_grid.dim)
    points = pos_grid.q0 + (indices * pos_grid.dq) @ pos_grid.U.T
    return points, indices


def coefficients(
    rule_grid: MomentumGrid,
    pos_grid: PositionGrid,
    basisC: WidthMatrix,
    psi0: WavePacket,
    window: Optional[int] = None,
) -> CoefficientTable:
    """
    r_{j,k} = weight_j (2 pi eps)^-d <g_{j,k}|psi_0>, with g_{j,k} centered at (q_k, p_j).

    GH tables use the transformed weights omega.
    """
    d = psi0.dim
    if rule_grid.dim != d or pos_grid.dim != d or basisC.dim != d:
        raise DimensionMismatchError("momentum grid, position grid, basis and psi0 must share d")
    eps = psi0.eps
    if not np.isclose(rule_grid.eps, eps, rtol=1e-14, atol=0.0):
        raise EpsMismatchError(f"grid eps {rule_grid.eps} != psi0 eps {eps}")

    q_points, q_indices = position_points(pos_grid, window)
    scale = rule_grid.weights / (2 * np.pi * eps) ** d
    values = np.empty((len(q_points), len(rule_grid)), dtype=complex)
    for row, q_k in enumerate(q_points):
        q_rep = np.broadcast_to(q_k, rule_grid.nodes.shape)
        values[row] = scale * overlap_many(basisC, eps, q_rep, rule_grid.nodes, psi0)
    logger.debug(f"{rule_grid.rule} coefficients: {values.shape[0]} x {values.shape[1]}")
    return CoefficientTable(
        rule=rule_grid.rule,
        values=readonly(values),
        momentum=rule_grid,
        position=pos_grid,
        q_points=readonly(q_points),
        q_indices=readonly(q_indices),
        basis_width=basisC,
        psi0=psi0,
    )


def momentum_grid(
    rule: str,
    eps: float,
    p0: ArrayLike,
    d: int,
    N: Optional[int] = None,
    L_p: Optional[float] = None,
    dp: Optional[float] = None,
    tail_tol: float = DEFAULT_TAIL_TOL,
    envelope: Optional[ArrayLike] = None,
) -> MomentumGrid:
    """Build the grid of ``rule`` from the parameters it needs; TcM ignores ``envelope``."""
    if rule == TCM:
        if N is None or L_p is None:
            raise InvalidParameterError("TcM needs N and L_p")
        return tcm_grid(N, L_p, p0, eps, d)
    if rule == GH:
        if N is None:
            raise InvalidParameterError("GH needs N")
        return gh_grid(N, eps, _vector(p0, d), envelope=envelope)
    if rule == RS:
        if dp is None:
            raise InvalidParameterError("RS needs dp")
        return rs_grid(dp, p0, eps, d, tail_tol=tail_tol, envelope=envelope)
    raise InvalidParameterError(f"unknown rule {rule!r}, expected one of {RULES}")
