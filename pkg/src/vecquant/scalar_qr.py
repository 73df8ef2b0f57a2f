"""Classical scalar quantile regression through its rank-score dual.

For each probability index ``t`` the program

    max  sum_i nu_i a_i y_i   s.t.  sum_i nu_i a_i x_i = (1 - t) xbar,  0 <= a_i <= 1

is solved in equality form (slacks ``s_i = 1 - a_i``). Its multipliers on the
``p`` moment rows are the regression coefficients ``beta(t)``, and ``a`` is the
rank-score vector. Integrating ``a_t`` over ``t`` gives the rank variable
``U~`` of each observation.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import lp
from .core import Dataset, RankGrid
from .errors import SolverError, ValidationError
from .vqr import FitOptions, VqrFit, fit as vqr_fit


class QrFitAtT(NamedTuple):
    t: float
    beta_t: np.ndarray
    a_t: np.ndarray
    residuals: lp.Residuals


def check_loss(data: Dataset, beta, t: float) -> float:
    """Weighted check loss ``sum_i nu_i rho_t(y_i - x_i' beta)``, ``rho_t(z) = t z_+ + (1 - t) z_-``.

    This orientation makes ``beta(t)`` the t-th conditional quantile, matching
    the rank-score constraint ``E(A_t X) = (1 - t) E X``.
    """
    z = data.Y[:, 0] - data.X @ np.asarray(beta, dtype=float)
    return float(data.nu @ np.where(z >= 0, t * z, (t - 1) * z))


def _require_scalar(data: Dataset) -> None:
    if data.d != 1:
        raise ValidationError(f"scalar quantile regression needs d = 1, got d = {data.d}")


def _require_full_rank(data: Dataset) -> None:
    W = np.sqrt(data.nu)[:, None] * data.X
    if np.linalg.matrix_rank(W) < data.p:
        raise ValidationError("design matrix is rank deficient")


def rank_score_problem(data: Dataset, t: float) -> lp.LpProblem:
    n, p = data.n, data.p
    X = data.X
    xbar = data.nu @ X
    # moment rows: coefficient nu_i x_il on a_i
    ri, ci = np.nonzero((data.nu[:, None] * X).T)
    vals = (data.nu[:, None] * X).T[ri, ci]
    rows = [ri, p + np.arange(n), p + np.arange(n)]
    cols = [ci, np.arange(n), n + np.arange(n)]
    v = [vals, np.ones(n), np.ones(n)]
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    vv = np.concatenate(v)
    order = np.lexsort((c, r))
    A = lp.SparseMatrix(p + n, 2 * n, r[order], c[order], vv[order])
    obj = np.concatenate([data.nu * data.Y[:, 0], np.zeros(n)])
    rhs = np.concatenate([(1 - t) * xbar, np.ones(n)])
    return lp.LpProblem(c=obj, A=A, rhs=rhs)


def kb_fit(data: Dataset, t: float, tol: float = 1e-9, method: str = "simplex") -> QrFitAtT:
    """Quantile regression coefficients and rank scores at probability index ``t``."""
    _require_scalar(data)
    if not 0.0 < t < 1.0:
        raise ValidationError(f"t must lie in (0, 1), got {t!r}")
    _require_full_rank(data)
    problem = rank_score_problem(data, t)
    sol = lp.solve(problem, tol=tol, method=method)
    if sol.status != lp.OPTIMAL:
        raise SolverError(f"rank-score program at t={t} not solved: {sol.status}", report=sol.residuals)
    n, p = data.n, data.p
    a = np.clip(sol.x[:n], 0.0, 1.0)
    return QrFitAtT(float(t), sol.y[:p].copy(), a, sol.residuals)


def default_t_grid(size: int = 99) -> np.ndarray:
    """``size`` equally spaced indices k / (size + 1)."""
    if size < 1:
        raise ValidationError("t grid needs at least one point")
    return np.arange(1, size + 1) / (size + 1)


def integration_weights(t_grid: np.ndarray) -> np.ndarray:
    """Cell widths of the midpoint rule on (0, 1): cells split halfway between indices."""
    t = np.asarray(t_grid, dtype=float)
    edges = np.concatenate([[0.0], 0.5 * (t[1:] + t[:-1]), [1.0]])
    return np.diff(edges)


class CrossingReport(NamedTuple):
    crossings: int  # (t_k, t_k+1, x) triples with a decrease
    worst_drop: float
    fraction_x: float  # share of evaluation points with at least one crossing
    first: tuple | None  # (t_k, t_k+1, index of x) of the largest drop


@dataclass(frozen=True, eq=False)
class QrProcess:
    t_grid: np.ndarray
    fits: tuple[QrFitAtT, ...]
    u_tilde: np.ndarray
    crossing: CrossingReport

    @property
    def betas(self) -> np.ndarray:
        return np.array([f.beta_t for f in self.fits])

    @property
    def scores(self) -> np.ndarray:
        return np.array([f.a_t for f in self.fits])


def crossing_report(betas: np.ndarray, t_grid: np.ndarray, x_eval: np.ndarray, tol: float = 1e-9) -> CrossingReport:
    F = np.atleast_2d(x_eval) @ betas.T  # (points, t)
    drops = F[:, :-1] - F[:, 1:]
    scale = max(1.0, float(np.abs(F).max()))
    bad = drops > tol * scale
    if not bad.any():
        return CrossingReport(0, 0.0, 0.0, None)
    i, k = np.unravel_index(np.argmax(np.where(bad, drops, -np.inf)), drops.shape)
    return CrossingReport(
        int(bad.sum()),
        float(drops[i, k]),
        float(bad.any(axis=1).mean()),
        (float(t_grid[k]), float(t_grid[k + 1]), int(i)),
    )


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("VQR_THREADS", "1")))
    except ValueError:
        return 1


def qr_process(
    data: Dataset,
    t_grid: Sequence[float] | None = None,
    x_eval: np.ndarray | None = None,
    tol: float = 1e-9,
    threads: int | None = None,
) -> QrProcess:
    """Fit every ``t`` in ``t_grid`` and integrate the rank scores into ``U~``.

    Crossing is checked on ``x_eval`` (default: the observed regressors) and
    reported, never repaired.
    """
    _require_scalar(data)
    t = default_t_grid() if t_grid is None else np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0 or np.any(t <= 0) or np.any(t >= 1) or np.any(np.diff(t) <= 0):
        raise ValidationError("t grid must be increasing and inside (0, 1)")
    _require_full_rank(data)
    threads = _threads() if threads is None else threads
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            fits = tuple(ex.map(lambda tt: kb_fit(data, float(tt), tol), t))
    else:
        fits = tuple(kb_fit(data, float(tt), tol) for tt in t)
    w = integration_weights(t)
    scores = np.array([f.a_t for f in fits])
    u_tilde = np.clip(w @ scores, 0.0, 1.0)
    x_eval = data.X if x_eval is None else np.atleast_2d(x_eval)
    report = crossing_report(np.array([f.beta_t for f in fits]), t, x_eval)
    return QrProcess(t, fits, u_tilde, report)


# -- comparison with the vector fit ----------------------------------------------------


def quantile_x_points(data: Dataset, probs=(0.0, 0.25, 0.5, 0.75, 1.0)) -> np.ndarray:
    """Regressor vectors at the given quantiles of each non-intercept column."""
    pts = np.ones((len(probs), data.p))
    if data.p > 1:
        pts[:, 1:] = np.quantile(data.X[:, 1:], probs, axis=0)
    return pts


class ComparisonRow(NamedTuple):
    t: float
    u: float
    coef: int
    beta_qr: float
    beta_vqr: float
    abs_gap: float
    rel_gap: float


class FittedGapRow(NamedTuple):
    t: float
    u: float
    x_index: int
    q_qr: float
    q_vqr: float
    abs_gap: float
    rel_gap: float


@dataclass(frozen=True)
class Comparison:
    coefficients: tuple[ComparisonRow, ...]
    fitted: tuple[FittedGapRow, ...]
    x_points: np.ndarray

    @property
    def max_fitted_gap(self) -> float:
        return max((r.abs_gap for r in self.fitted), default=0.0)

    @property
    def median_relative_fitted_gap(self) -> float:
        return float(np.median([r.rel_gap for r in self.fitted])) if self.fitted else 0.0

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "coefficient", "beta_qr", "beta_vqr", "abs_gap", "rel_gap"])
            for r in self.coefficients:
                w.writerow([repr(r.t), r.coef, repr(r.beta_qr), repr(r.beta_vqr), repr(r.abs_gap), repr(r.rel_gap)])

    def write_fitted_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            names = [f"x{i + 1}" for i in range(self.x_points.shape[1])]
            w.writerow(["t", "u", *names, "q_qr", "q_vqr", "abs_gap", "rel_gap"])
            for r in self.fitted:
                w.writerow(
                    [repr(r.t), repr(r.u)]
                    + [repr(float(v)) for v in self.x_points[r.x_index]]
                    + [repr(r.q_qr), repr(r.q_vqr), repr(r.abs_gap), repr(r.rel_gap)]
                )


def nearest_grid_index(grid: RankGrid, t: float) -> int:
    return int(np.argmin(np.abs(grid.U[:, 0] - t)))


def compare_fits(vfit: VqrFit, process: QrProcess, x_points: np.ndarray) -> Comparison:
    """Tabulate coefficient and fitted-value gaps between a 1-D vector fit and the QR process."""
    if vfit.d != 1:
        raise ValidationError("comparison with scalar quantile regression needs d = 1")
    beta = vfit.require_beta()[:, :, 0]  # (m, p)
    if beta.shape[1] != process.fits[0].beta_t.size:
        raise ValidationError("vector and scalar fits use different regressors")
    x_points = np.atleast_2d(np.asarray(x_points, dtype=float))
    coef_rows = []
    fit_rows = []
    tiny = float(np.finfo(float).tiny)
    for f in process.fits:
        k = nearest_grid_index(vfit.grid, f.t)
        u = float(vfit.grid.U[k, 0])
        for l, (bq, bv) in enumerate(zip(f.beta_t, beta[k])):
            gap = float(abs(bq - bv))
            coef_rows.append(ComparisonRow(f.t, u, l, float(bq), float(bv), gap, gap / max(abs(float(bq)), tiny)))
        for i, x in enumerate(x_points):
            qq = float(x @ f.beta_t)
            qv = float(x @ beta[k])
            gap = abs(qq - qv)
            fit_rows.append(FittedGapRow(f.t, u, i, qq, qv, gap, gap / max(abs(qq), tiny)))
    return Comparison(tuple(coef_rows), tuple(fit_rows), x_points)


def compare_vqr_qr(
    data: Dataset,
    grid: RankGrid,
    t_grid: Sequence[float] | None = None,
    opts: FitOptions | None = None,
) -> Comparison:
    """Fit both models and compare them at the quartiles of the regressor distribution."""
    _require_scalar(data)
    vfit = vqr_fit(data, grid, opts)
    process = qr_process(data, t_grid)
    return compare_fits(vfit, process, quantile_x_points(data))
