"""
Experiment drivers behind the CLI commands.

Each driver returns a pandas DataFrame whose row order follows the
configuration order, independent of how many worker processes were used.
"""
import logging
import math
from dataclasses import dataclass
from multiprocessing import Pool
from typing import Iterator, List, Optional, Tuple

import numpy as np
import pandas as pd

from ..core.config import GWPTSettings
from ..core.errors import ConfigError
from ..core.gaussian import (
    WavePacket,
    WidthMatrix,
    imaginary_width,
    overlap,
    overlap_oracle,
    validate_width,
)
from ..quadrature import GH, RS, TCM
from ..reconstruction import (
    ErrorSweepRecord,
    RateFit,
    fit_rate,
    run_sweep_point,
    semi_discrete_reconstruction,
    sup_error_of,
)
from ..summation import (
    SummationCurve,
    finite_grid,
    spectral_bound,
    summation_direct,
    summation_expansion,
)
from .config import ExperimentConfig
from .io import records_frame

logger = logging.getLogger(__name__)

SUMMATION_COLUMNS = [
    "eps",
    "gamma",
    "M",
    "x",
    "S_direct",
    "S_expansion",
    "inv_dq",
    "spectral_bound_s1",
    "spectral_bound_s2",
    "spectral_bound_s3",
]
OVERLAP_COLUMNS = ["trial", "d", "re_analytic", "im_analytic", "re_oracle", "im_oracle", "rel_error"]
SEMI_DISCRETE_COLUMNS = ["eps", "gamma", "M", "sup_error"]
FIT_COLUMNS = ["rule", "M", "gamma", "eps", "L_p", "points", "algebraic_slope", "plateau", "exp_rate"]

# overlaps below this magnitude are not compared relatively
OVERLAP_FLOOR = 1e-8
EXPANSION_TOL = 1e-17


def samples_for(config: ExperimentConfig, settings: GWPTSettings) -> int:
    if config.box.samples_per_dim is not None:
        return config.box.samples_per_dim
    return settings.samples_per_dim if config.dim == 1 else settings.samples_per_dim_2d


def _bases(config: ExperimentConfig) -> Iterator[Tuple[float, WavePacket, float, WidthMatrix, int]]:
    """(eps, psi0, gamma, basis width, M) in configuration order."""
    for eps in config.psi0.eps:
        psi0 = config.psi0.packet(eps)
        for gamma, width in config.basis.widths(config.dim):
            for M in config.box.M:
                yield eps, psi0, gamma, width, M


# Summation curve


def run_summation(config: ExperimentConfig, settings: GWPTSettings) -> pd.DataFrame:
    """S(x) by direct summation and by its cosine expansion, with the spectral bounds."""
    if config.dim != 1:
        raise ConfigError("the summation command supports d = 1 only", "psi0.q0")
    samples = samples_for(config, settings)
    L_q = config.box.L_q
    q0 = config.psi0.q0[0]
    x = np.linspace(q0 - L_q, q0 + L_q, samples)

    frames = []
    for eps, _, gamma, width, M in _bases(config):
        grid = finite_grid(width, [q0], L_q, M)
        curve = SummationCurve(grid, width, eps)
        dq = grid.dq
        n_terms = int(math.ceil(dq * math.sqrt(gamma * math.log(1 / EXPANSION_TOL) / eps) / math.pi)) + 1
        # the cosine series is periodic about the grid points
        first_node = float(grid.points()[0, 0])
        frame = pd.DataFrame(
            {
                "eps": eps,
                "gamma": gamma,
                "M": M,
                "x": x,
                "S_direct": summation_direct(curve, x),
                "S_expansion": summation_expansion(dq, gamma, eps, x - first_node, n_terms),
                "inv_dq": 1 / dq,
                "spectral_bound_s1": spectral_bound(1, dq, gamma, eps),
                "spectral_bound_s2": spectral_bound(2, dq, gamma, eps),
                "spectral_bound_s3": spectral_bound(3, dq, gamma, eps),
            },
            columns=SUMMATION_COLUMNS,
        )
        logger.info(f"summation curve: eps={eps}, gamma={gamma}, M={M}, dq={dq}")
        frames.append(frame)
    return pd.concat(frames, ignore_index=True)


# Error sweeps


@dataclass(frozen=True)
class SweepTask:
    """Picklable description of one sweep point."""

    q0: Tuple[float, ...]
    p0: Tuple[float, ...]
    gamma0_imag: float
    eps: float
    basis_imag: Tuple[Tuple[float, ...], ...]
    rule: str
    M: int
    L_q: float
    samples_per_dim: int
    N: Optional[int] = None
    L_p: Optional[float] = None
    dp: Optional[float] = None
    tail_tol: float = 1e-16
    timings: bool = False

    def run(self) -> ErrorSweepRecord:
        d = len(self.q0)
        psi0 = WavePacket.create(self.q0, self.p0, imaginary_width(self.gamma0_imag, d), self.eps)
        basis = validate_width(1j * np.asarray(self.basis_imag, dtype=float))
        record = run_sweep_point(
            psi0,
            basis,
            self.rule,
            self.M,
            self.L_q,
            self.samples_per_dim,
            N=self.N,
            L_p=self.L_p,
            dp=self.dp,
            tail_tol=self.tail_tol,
            timings=self.timings,
        )
        logger.info(
            f"{record.rule} N={record.N} M={record.M} gamma={record.gamma} eps={record.eps}: "
            f"sup error {record.sup_error:.3e}"
        )
        return record


def _run_task(task: SweepTask) -> ErrorSweepRecord:
    return task.run()


def sweep_tasks(config: ExperimentConfig, settings: GWPTSettings) -> List[SweepTask]:
    """One task per (eps, basis, M, rule, L_p or dp, N), in configuration order."""
    if not config.rules:
        raise ConfigError("at least one rule is required for a sweep", "rules")
    samples = samples_for(config, settings)
    tasks = []
    for eps, _, _, width, M in _bases(config):
        common = dict(
            q0=tuple(config.psi0.q0),
            p0=tuple(config.psi0.p0),
            gamma0_imag=config.psi0.gamma0_imag,
            eps=eps,
            basis_imag=tuple(tuple(float(v) for v in row) for row in width.imag),
            M=M,
            L_q=config.box.L_q,
            samples_per_dim=samples,
            timings=settings.timings,
        )
        for entry in config.rules:
            tail_tol = entry.tail_tol if entry.tail_tol is not None else settings.rs_tail_tol
            if entry.rule == TCM:
                for L_p in entry.L_p:
                    tasks.extend(SweepTask(rule=TCM, N=N, L_p=L_p, **common) for N in entry.N)
            elif entry.rule == GH:
                tasks.extend(SweepTask(rule=GH, N=N, **common) for N in entry.N)
            elif entry.rule == RS:
                tasks.extend(
                    SweepTask(rule=RS, dp=dp, tail_tol=tail_tol, **common) for dp in entry.dp
                )
    return tasks


def run_sweep(config: ExperimentConfig, settings: GWPTSettings) -> pd.DataFrame:
    """Sup errors of every sweep point; up to ``settings.jobs`` worker processes."""
    tasks = sweep_tasks(config, settings)
    logger.info(f"Running {len(tasks)} sweep points with {settings.jobs} job(s)")
    if settings.jobs > 1 and len(tasks) > 1:
        with Pool(processes=min(settings.jobs, len(tasks))) as pool:
            records = pool.map(_run_task, tasks)
    else:
        records = [task.run() for task in tasks]
    return records_frame(records)


# Convergence fits


def _series_key(record: ErrorSweepRecord) -> Tuple:
    # RS records derive L_p from N, so it does not identify a series
    L_p = record.L_p if record.rule == TCM else None
    return (record.rule, record.M, record.gamma, record.eps, L_p)


def run_fits(records: List[ErrorSweepRecord]) -> pd.DataFrame:
    """fit_rate for every series of records sharing rule, M, gamma, eps (and L_p for TcM)."""
    series = {}
    for record in records:
        series.setdefault(_series_key(record), []).append(record)

    rows = []
    for key, members in series.items():
        members = sorted(members, key=lambda r: r.N)
        if len(members) < 4:
            logger.warning(f"Skipping series {key}: only {len(members)} points")
            continue
        fit: RateFit = fit_rate(members)
        rule, M, gamma, eps, L_p = key
        rows.append(
            {
                "rule": rule,
                "M": M,
                "gamma": gamma,
                "eps": eps,
                "L_p": L_p,
                "points": fit.pre_plateau,
                "algebraic_slope": fit.algebraic_slope,
                "plateau": fit.plateau,
                "exp_rate": fit.exp_rate,
            }
        )
    return pd.DataFrame(rows, columns=FIT_COLUMNS)


# Consistency checks


def _random_width(rng: np.random.Generator, d: int) -> WidthMatrix:
    eigenvalues = rng.uniform(0.5, 2.0, size=d)
    if d == 1:
        return imaginary_width(eigenvalues[0])
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    return imaginary_width(Q @ np.diag(eigenvalues) @ Q.T)


def _random_packet(rng: np.random.Generator, d: int, eps: float) -> WavePacket:
    return WavePacket.create(
        rng.uniform(-1.0, 1.0, size=d), rng.uniform(-1.0, 1.0, size=d), _random_width(rng, d), eps
    )


def run_overlap_check(
    trials_1d: int = 200,
    trials_2d: int = 50,
    seed: int = 0,
    points_1d: int = 1601,
    points_2d: int = 401,
) -> pd.DataFrame:
    """Analytic overlaps of random imaginary-width pairs against the trapezoid oracle."""
    rng = np.random.default_rng(seed)
    rows = []
    for trial in range(trials_1d + trials_2d):
        d = 1 if trial < trials_1d else 2
        eps = float(rng.uniform(0.5, 1.5))
        bra = _random_packet(rng, d, eps)
        ket = _random_packet(rng, d, eps)
        widest = min(np.linalg.eigvalsh(bra.width.imag)[0], np.linalg.eigvalsh(ket.width.imag)[0])
        halfwidth = float(np.max(np.abs(bra.q - ket.q))) / 2 + 12 * math.sqrt(eps / widest)
        analytic = overlap(bra, ket)
        oracle = overlap_oracle(bra, ket, halfwidth, points_1d if d == 1 else points_2d)
        rel_error = abs(analytic - oracle) / abs(analytic) if abs(analytic) > OVERLAP_FLOOR else None
        rows.append(
            {
                "trial": trial,
                "d": d,
                "re_analytic": analytic.real,
                "im_analytic": analytic.imag,
                "re_oracle": oracle.real,
                "im_oracle": oracle.imag,
                "rel_error": rel_error,
            }
        )
    logger.info(f"Compared {len(rows)} overlaps against the trapezoid oracle")
    return pd.DataFrame(rows, columns=OVERLAP_COLUMNS)


def run_semi_discrete_check(config: ExperimentConfig, settings: GWPTSettings) -> pd.DataFrame:
    """Sup error of (1/S) sum_k I_{q_k} against psi_0 for every (eps, basis, M)."""
    samples = samples_for(config, settings)
    L_q = config.box.L_q
    rows = []
    for eps, psi0, gamma, width, M in _bases(config):
        curve = SummationCurve(finite_grid(width, psi0.q, L_q, M), width, eps)
        error = sup_error_of(
            lambda points: semi_discrete_reconstruction(curve, psi0, points),
            psi0,
            psi0.q,
            L_q,
            samples,
        )
        logger.info(f"semi-discrete identity: eps={eps}, gamma={gamma}, M={M}: {error:.3e}")
        rows.append({"eps": eps, "gamma": gamma, "M": M, "sup_error": error})
    return pd.DataFrame(rows, columns=SEMI_DISCRETE_COLUMNS)
