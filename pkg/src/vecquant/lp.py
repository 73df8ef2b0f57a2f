"""Assembly and solution of the discretized transport linear program.

The program is held in equality form ``max c'x  s.t.  A x = rhs, x >= 0`` with
``x = vec(pi)`` for the m x n transport plan ``pi`` (column-major, so entry
``(k, j)`` sits at ``k + m*j``). The first n rows fix the observation marginal,
the next m*p rows impose ``pi X = mu nu' X`` in vec order ``k + m*l``.

Solving is delegated to HiGHS through :func:`scipy.optimize.linprog`; this
module owns the certificates (residuals, duality gap) that decide whether a
returned point is accepted as optimal.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .core import Dataset, RankGrid
from .errors import ResourceError, StateError, ValidationError

DEFAULT_MAX_NONZEROS = 50_000_000

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
NUMERICAL_FAILURE = "numerical_failure"


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """Coordinate-format matrix with unique, in-range, finite non-zero triplets."""

    rows: int
    cols: int
    row_idx: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.row_idx, dtype=np.int64)
        c = np.asarray(self.col_idx, dtype=np.int64)
        v = np.asarray(self.values, dtype=float)
        if not (r.shape == c.shape == v.shape and r.ndim == 1):
            raise ValidationError("triplet arrays must be equal-length vectors")
        if r.size:
            if r.min() < 0 or r.max() >= self.rows or c.min() < 0 or c.max() >= self.cols:
                raise ValidationError("triplet index out of range")
            if not np.all(np.isfinite(v)) or np.any(v == 0):
                raise ValidationError("triplet values must be finite and non-zero")
        for name, a in (("row_idx", r), ("col_idx", c), ("values", v)):
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    @property
    def triplets(self):
        return zip(self.row_idx.tolist(), self.col_idx.tolist(), self.values.tolist())

    def has_duplicates(self) -> bool:
        key = self.row_idx * self.cols + self.col_idx
        return np.unique(key).size != key.size

    def tocsc(self) -> sp.csc_matrix:
        return sp.csc_matrix((self.values, (self.row_idx, self.col_idx)), shape=(self.rows, self.cols))

    def tocsr(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.values, (self.row_idx, self.col_idx)), shape=(self.rows, self.cols))


class BlockMeta(NamedTuple):
    n: int
    m: int
    p: int


@dataclass(frozen=True, eq=False)
class LpProblem:
    """``max c'x  s.t.  A x = rhs, x >= 0``."""

    c: np.ndarray
    A: SparseMatrix
    rhs: np.ndarray
    meta: BlockMeta | None = None

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        rhs = np.asarray(self.rhs, dtype=float)
        if c.shape != (self.A.cols,) or rhs.shape != (self.A.rows,):
            raise ValidationError("objective/rhs sizes do not match the constraint matrix")
        c.setflags(write=False)
        rhs.setflags(write=False)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "rhs", rhs)

    @property
    def num_vars(self) -> int:
        return self.A.cols

    @property
    def num_rows(self) -> int:
        return self.A.rows

    @property
    def var_lower(self) -> np.ndarray:
        return np.zeros(self.num_vars)


class Residuals(NamedTuple):
    primal_inf: float
    dual_inf: float
    gap: float

    def as_dict(self) -> dict:
        return {"primal_inf": self.primal_inf, "dual_inf": self.dual_inf, "gap": self.gap}


@dataclass(frozen=True, eq=False)
class LpSolution:
    """Primal point ``x``, equality multipliers ``y`` and their certificates.

    Multipliers follow the Lagrangian ``c'x - y'(Ax - rhs)``, so at optimality
    ``A'y >= c`` and ``rhs'y`` equals the primal objective.
    """

    x: np.ndarray
    y: np.ndarray
    objective: float
    dual_objective: float
    status: str
    residuals: Residuals
    iterations: int = 0
    message: str = ""


def _vec_plan_triplets(m: int, n: int):
    # column index of entry (k, j) of pi in vec(pi)
    k = np.tile(np.arange(m, dtype=np.int64), n)
    j = np.repeat(np.arange(n, dtype=np.int64), m)
    return k, j, k + m * j


def assemble_primal(
    data: Dataset, grid: RankGrid, max_nonzeros: int = DEFAULT_MAX_NONZEROS
) -> LpProblem:
    """Build the vectorized VQR program for ``data`` on ``grid``.

    The Kronecker blocks ``I_n (x) 1_m'`` and ``X' (x) I_m`` are written as
    triplets directly; neither is ever formed densely.
    """
    if data.d != grid.d:
        raise ValidationError(f"outcome dimension {data.d} does not match grid dimension {grid.d}")
    n, p, m = data.n, data.p, grid.m
    N = m * n
    nnz_bound = N * (1 + p)
    if nnz_bound > max_nonzeros:
        raise ResourceError(
            f"program would have up to {nnz_bound} non-zeros (cap {max_nonzeros}); "
            "use a coarser grid or fewer observations"
        )

    c = (grid.U @ data.Y.T).ravel(order="F")

    k, j, col = _vec_plan_triplets(m, n)
    rows = [j]
    cols = [col]
    vals = [np.ones(N)]
    for l in range(p):
        v = data.X[j, l]
        keep = v != 0
        rows.append(n + k[keep] + m * l)
        cols.append(col[keep])
        vals.append(v[keep])
    r = np.concatenate(rows)
    cc = np.concatenate(cols)
    v = np.concatenate(vals)
    order = np.lexsort((cc, r))
    A = SparseMatrix(n + m * p, N, r[order], cc[order], v[order])

    xbar = data.nu @ data.X
    rhs = np.concatenate([data.nu, np.outer(grid.mu, xbar).ravel(order="F")])
    return LpProblem(c=c, A=A, rhs=rhs, meta=BlockMeta(n, m, p))


def residuals(problem: LpProblem, x: np.ndarray, y: np.ndarray) -> Residuals:
    A = problem.A.tocsr()
    primal_inf = float(np.max(np.abs(A @ x - problem.rhs), initial=0.0))
    reduced = A.T @ y - problem.c
    dual_inf = float(np.max(-reduced, initial=0.0))
    gap = abs(float(problem.c @ x) - float(problem.rhs @ y))
    return Residuals(primal_inf + 0.0, max(dual_inf, 0.0) + 0.0, gap)


def is_certified(problem: LpProblem, x: np.ndarray, res: Residuals, tol: float = 1e-9) -> bool:
    """Acceptance test for an optimal point.

    The default ``tol`` reproduces the contract thresholds (1e-8 feasibility,
    1e-7 relative gap); tighter ``tol`` scales them down proportionally.
    """
    scale = max(tol / 1e-9, 1e-3)
    obj = abs(float(problem.c @ x))
    return (
        bool(np.all(x >= -1e-10))
        and res.primal_inf <= 1e-8 * scale * (1 + np.max(np.abs(problem.rhs), initial=0.0))
        and res.dual_inf <= 1e-8 * scale * (1 + np.max(np.abs(problem.c), initial=0.0))
        and res.gap <= 1e-7 * scale * (1 + obj)
    )


_METHODS = {"ipm": "highs-ipm", "simplex": "highs-ds", "auto": "highs"}


def solve(
    problem: LpProblem,
    tol: float = 1e-9,
    max_iter: int | None = None,
    method: str = "ipm",
) -> LpSolution:
    """Solve to a certified vertex.

    Interior point runs with crossover so the returned point is basic. If the
    certificate fails, the dual simplex is tried before giving up with status
    ``numerical_failure``.
    """
    if method not in _METHODS:
        raise ValidationError(f"unknown solver method {method!r}")
    methods = [method] + (["simplex"] if method != "simplex" else [])
    A = problem.A.tocsc()
    best = None
    for meth in methods:
        opts = {
            "primal_feasibility_tolerance": min(tol, 1e-7),
            "dual_feasibility_tolerance": min(tol, 1e-7),
        }
        if meth == "ipm":
            opts["ipm_optimality_tolerance"] = min(tol, 1e-8)
        if max_iter is not None:
            opts["maxiter"] = int(max_iter)
        res = linprog(
            -problem.c, A_eq=A, b_eq=problem.rhs, bounds=(0, None), method=_METHODS[meth], options=opts
        )
        if res.status == 2:
            x = np.zeros(problem.num_vars)
            y = np.zeros(problem.num_rows)
            r = residuals(problem, x, y)
            return LpSolution(x, y, float("nan"), float("nan"), INFEASIBLE, r, int(res.nit or 0), res.message)
        if res.x is None:
            continue
        x = np.asarray(res.x, dtype=float)
        marg = getattr(getattr(res, "eqlin", None), "marginals", None)
        y = -np.asarray(marg, dtype=float) if marg is not None else np.zeros(problem.num_rows)
        r = residuals(problem, x, y)
        status = OPTIMAL if res.status == 0 and is_certified(problem, x, r, tol) else NUMERICAL_FAILURE
        sol = LpSolution(
            x=x,
            y=y,
            objective=float(problem.c @ x),
            dual_objective=float(problem.rhs @ y),
            status=status,
            residuals=r,
            iterations=int(res.nit or 0),
            message=str(res.message),
        )
        if status == OPTIMAL:
            return sol
        if best is None or r.primal_inf + r.dual_inf + r.gap < sum(best.residuals):
            best = sol
    if best is None:
        x = np.zeros(problem.num_vars)
        y = np.zeros(problem.num_rows)
        return LpSolution(x, y, float("nan"), float("nan"), NUMERICAL_FAILURE, residuals(problem, x, y))
    return best


def duality_gap_report(sol: LpSolution) -> Residuals:
    if sol.status != OPTIMAL:
        raise StateError(f"no certificate for a solution with status {sol.status!r}")
    return sol.residuals


def dump_lp(problem: LpProblem, path) -> None:
    """Write the program in CPLEX LP text format for third-party cross-checks."""
    A = problem.A.tocsr()

    def term(coef: float, idx: int, first: bool) -> str:
        coef = float(coef)
        sign = "-" if coef < 0 else ("" if first else "+")
        return f"{sign} {abs(coef)!r} x{idx + 1}".strip()

    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\\ vector quantile regression transport program\nMaximize\n obj:")
        first = True
        for i, ci in enumerate(problem.c.tolist()):
            if ci != 0:
                fh.write(" " + term(ci, i, first))
                first = False
        if first:
            fh.write(" 0 x1")
        fh.write("\nSubject To\n")
        for r in range(problem.num_rows):
            lo, hi = A.indptr[r], A.indptr[r + 1]
            parts = [term(v, int(ci), t == 0) for t, (ci, v) in enumerate(zip(A.indices[lo:hi], A.data[lo:hi]))]
            fh.write(f" c{r + 1}: {' '.join(parts) if parts else '0 x1'} = {float(problem.rhs[r])!r}\n")
        fh.write("Bounds\n")
        for i in range(problem.num_vars):
            fh.write(f" x{i + 1} >= 0\n")
        fh.write("End\n")
