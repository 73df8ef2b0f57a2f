"""Vector quantile regression fits: transport plan, dual potentials and the coefficient map.

A fit solves the transport program of :mod:`vecquant.lp` on standardized data,
reads the potentials ``psi`` (one per observation) and ``b`` (one p-vector per
grid point) off the equality multipliers, and differentiates ``b`` along the
tensor grid to obtain ``beta(u)``, so that ``Q(u | x) = beta(u)' x``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from . import lp
from .core import Dataset, RankGrid
from .errors import CapabilityError, SolverError, ValidationError

PLAN_MASS_THRESHOLD = 1e-12


@dataclass(frozen=True)
class FitOptions:
    """Solver and post-processing options for :func:`fit`.

    ``beta_scheme`` selects how coefficients are read off the potentials:
    ``"bracket"`` pins the two extreme optimal duals and averages the smallest
    admissible forward slope with the largest admissible backward slope;
    ``"central"`` differences the dual returned by the solver directly.
    """

    tol: float = 1e-9
    max_iter: int | None = None
    method: str = "ipm"
    beta: bool | None = None
    beta_scheme: str = "bracket"
    standardize: bool = True
    max_nonzeros: int = lp.DEFAULT_MAX_NONZEROS


@dataclass(frozen=True, eq=False)
class TransportPlan:
    pi: sp.csc_matrix

    @property
    def shape(self):
        return self.pi.shape

    def dense(self) -> np.ndarray:
        return self.pi.toarray()

    def triplets(self, threshold: float = PLAN_MASS_THRESHOLD) -> list[list]:
        coo = self.pi.tocoo()
        keep = coo.data > threshold
        order = np.lexsort((coo.col[keep], coo.row[keep]))
        return [
            [int(k), int(j), float(v)]
            for k, j, v in zip(coo.row[keep][order], coo.col[keep][order], coo.data[keep][order])
        ]

    @classmethod
    def from_triplets(cls, triplets, m: int, n: int) -> "TransportPlan":
        if len(triplets) == 0:
            return cls(sp.csc_matrix((m, n)))
        t = np.asarray(triplets, dtype=float)
        return cls(sp.csc_matrix((t[:, 2], (t[:, 0].astype(int), t[:, 1].astype(int))), shape=(m, n)))


@dataclass(frozen=True, eq=False)
class DualPotentials:
    """``psi`` (n,) and ``b`` (m, p), normalized so that ``b[0] == 0``.

    ``b_lower`` / ``b_upper`` are the extreme optimal potentials used by the
    bracket scheme; they are None when the scheme was not run or the optimal
    dual face is unbounded.
    """

    psi: np.ndarray
    b: np.ndarray
    b_lower: np.ndarray | None = None
    b_upper: np.ndarray | None = None

    @property
    def has_bracket(self) -> bool:
        return self.b_lower is not None and self.b_upper is not None


class Normalization(NamedTuple):
    y_center: np.ndarray
    y_scale: float
    x_center: np.ndarray
    x_scale: np.ndarray

    def as_dict(self) -> dict:
        return {
            "y_center": self.y_center.tolist(),
            "y_scale": float(self.y_scale),
            "x_center": self.x_center.tolist(),
            "x_scale": self.x_scale.tolist(),
        }

    @classmethod
    def identity(cls, d: int, p: int) -> "Normalization":
        return cls(np.zeros(d), 1.0, np.zeros(p - 1), np.ones(p - 1))

    def x_map(self) -> np.ndarray:
        """Matrix ``A`` with ``x_std = A @ x``."""
        p = self.x_center.size + 1
        A = np.eye(p)
        A[1:, 0] = -self.x_center / self.x_scale
        A[1:, 1:] = np.diag(1.0 / self.x_scale)
        return A


@dataclass(frozen=True, eq=False)
class VqrFit:
    grid: RankGrid
    duals: DualPotentials
    beta: np.ndarray | None
    plan: TransportPlan | None
    solve_report: lp.Residuals
    objective: float
    normalization: Normalization
    nu: np.ndarray | None = None
    y_names: tuple[str, ...] = ()
    x_names: tuple[str, ...] = ()
    extra: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return self.grid.m

    @property
    def p(self) -> int:
        return self.duals.b.shape[1]

    @property
    def d(self) -> int:
        return self.grid.d

    def require_beta(self) -> np.ndarray:
        if self.beta is None:
            raise CapabilityError("coefficients are only available for fits on tensor grids")
        return self.beta

    def quantiles(self, x) -> np.ndarray:
        """``Q(u_k | x)`` for every grid point, shape (m, d)."""
        x = _check_x(x, self.p)
        return np.einsum("kpd,p->kd", self.require_beta(), x)


def _check_x(x, p: int) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if x.size != p:
        raise ValidationError(f"regressor vector has length {x.size}, expected {p}")
    if x[0] != 1.0:
        raise ValidationError("first regressor must be the intercept 1")
    return x


# -- standardization ---------------------------------------------------------------


def _weighted_std(a: np.ndarray, w: np.ndarray, center: np.ndarray) -> np.ndarray:
    return np.sqrt(w @ (a - center) ** 2)


def standardization(data: Dataset) -> Normalization:
    """Column centres and scales used to condition the program.

    A single scale is shared by all outcome columns: only a scalar rescaling of
    Y maps optimal plans to optimal plans when d > 1.
    """
    w = data.nu
    yc = w @ data.Y
    ysd = _weighted_std(data.Y, w, yc)
    ys = float(ysd.max()) if ysd.size and ysd.max() > 0 else 1.0
    Z = data.X[:, 1:]
    xc = w @ Z if Z.shape[1] else np.zeros(0)
    xs = _weighted_std(Z, w, xc) if Z.shape[1] else np.zeros(0)
    xs = np.where(xs > 0, xs, 1.0)
    return Normalization(yc, ys, xc, xs)


def _apply(data: Dataset, norm: Normalization) -> Dataset:
    Y = (data.Y - norm.y_center) / norm.y_scale
    X = data.X @ norm.x_map().T
    X[:, 0] = 1.0
    return Dataset(Y=Y, X=X, nu=data.nu)


def _normalize_duals(psi: np.ndarray, b: np.ndarray, X: np.ndarray):
    # (psi + X a, b - a) is optimal whenever (psi, b) is; pin b[0] = 0
    shift = b[0].copy()
    return psi + X @ shift, b - shift


def _unstandardize_b(b_std: np.ndarray, grid: RankGrid, norm: Normalization) -> np.ndarray:
    b = norm.y_scale * (b_std @ norm.x_map())
    b[:, 0] += grid.U @ norm.y_center
    return b


# -- extreme optimal duals -----------------------------------------------------------


def _slacks(psi, b, X, UY):
    return psi[None, :] + b @ X.T - UY


def _dual_face_extreme(data: Dataset, grid: RankGrid, plan: np.ndarray, psi0, b0, anchor: int, tol: float):
    """Optimal dual minimizing ``sum_k mu_k b_k' xbar`` subject to ``b[anchor] = 0``.

    The optimal dual face is described by the dual constraints, tight on the
    support of ``plan``; inequality constraints are generated lazily. Returns
    ``(psi, b)`` or None when the extreme is unbounded.
    """
    n, p, m = data.n, data.p, grid.m
    X, U, Y = data.X, grid.U, data.Y
    UY = U @ Y.T
    xbar = data.nu @ X
    nvar = n + m * p
    cost = np.concatenate([np.zeros(n), np.outer(grid.mu, xbar).ravel()])
    box = 1e4 * (1.0 + np.abs(UY).max())
    lo = np.full(nvar, -box)
    hi = np.full(nvar, box)
    lo[n + anchor * p : n + (anchor + 1) * p] = 0.0
    hi[n + anchor * p : n + (anchor + 1) * p] = 0.0

    support = plan > PLAN_MASS_THRESHOLD
    S0 = _slacks(psi0, b0, X, UY)
    active = support | (S0 <= 1e-7)
    for axis in (0, 1):
        kth = min(2, S0.shape[axis] - 1)
        part = np.argpartition(S0, kth, axis=axis)
        sel = np.take(part, np.arange(kth + 1), axis=axis)
        mask = np.zeros_like(active)
        np.put_along_axis(mask, sel, True, axis=axis)
        active |= mask

    def rows(pairs_k, pairs_j):
        cnt = pairs_k.size
        r = np.repeat(np.arange(cnt), 1 + p)
        c = np.empty((cnt, 1 + p), dtype=np.int64)
        v = np.empty((cnt, 1 + p))
        c[:, 0] = pairs_j
        v[:, 0] = -1.0
        c[:, 1:] = n + pairs_k[:, None] * p + np.arange(p)[None, :]
        v[:, 1:] = -X[pairs_j]
        keep = v.ravel() != 0
        M = sp.csr_matrix((v.ravel()[keep], (r[keep], c.ravel()[keep])), shape=(cnt, nvar))
        return M, -UY[pairs_k, pairs_j]

    ek, ej = np.nonzero(support)
    A_eq, b_eq = rows(ek, ej)
    for _ in range(100):
        ik, ij = np.nonzero(active & ~support)
        A_ub, b_ub = rows(ik, ij) if ik.size else (None, None)
        res = linprog(
            cost,
            A_ub=A_ub,
            b_ub=b_ub,
            A_eq=A_eq,
            b_eq=b_eq,
            bounds=np.column_stack([lo, hi]),
            method="highs-ds",
            options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
        )
        if res.status != 0 or res.x is None:
            return None
        z = res.x
        psi, b = z[:n], z[n:].reshape(m, p)
        S = _slacks(psi, b, X, UY)
        viol = S < -tol
        if not viol.any():
            if np.max(np.abs(z)) > 0.5 * box:
                return None
            return psi, b
        new = viol & ~active
        if not new.any():
            return None
        active |= new
    return None


# -- fitting -------------------------------------------------------------------------


def _diff_forward(f: np.ndarray, a: np.ndarray, axis: int) -> np.ndarray:
    df = np.diff(f, axis=axis)
    shape = [1] * f.ndim
    shape[axis] = a.size - 1
    return df / np.diff(a).reshape(shape)


def recover_beta(duals: DualPotentials, grid: RankGrid, scheme: str | None = None) -> np.ndarray:
    """Finite-difference gradient of the potential ``b`` along the tensor grid.

    Returns an (m, p, d) array. With ``scheme="central"`` interior points use
    central differences and boundary points one-sided ones (``np.gradient``
    with the grid's axis coordinates). With ``"bracket"`` (the default when the
    duals carry extremes) each point averages the forward difference of
    ``b_lower`` with the backward difference of ``b_upper``; boundary points
    take whichever exists.
    """
    if not grid.is_tensor:
        raise CapabilityError("coefficient recovery needs a tensor grid")
    if any(s < 2 for s in grid.shape):
        raise CapabilityError(f"every grid dimension needs at least 2 points, got shape {grid.shape}")
    if scheme is None:
        scheme = "bracket" if duals.has_bracket else "central"
    if scheme == "bracket" and not duals.has_bracket:
        raise CapabilityError("bracket scheme requested but the duals carry no extremes")
    if scheme not in ("bracket", "central"):
        raise ValidationError(f"unknown scheme {scheme!r}")

    d = grid.d
    p = duals.b.shape[1]
    beta = np.empty((grid.m, p, d))
    for j in range(d):
        axis = d - 1 - j
        a = grid.axes[j]
        if scheme == "central":
            g = np.gradient(grid.to_cube(duals.b), a, axis=axis, edge_order=1)
        else:
            fwd = _diff_forward(grid.to_cube(duals.b_lower), a, axis)
            bwd = _diff_forward(grid.to_cube(duals.b_upper), a, axis)
            g = np.empty(grid.to_cube(duals.b).shape)
            first = [slice(None)] * g.ndim
            last = [slice(None)] * g.ndim
            inner = [slice(None)] * g.ndim
            first[axis] = slice(0, 1)
            last[axis] = slice(-1, None)
            inner[axis] = slice(1, -1)
            lo_f = [slice(None)] * g.ndim
            lo_f[axis] = slice(1, None)
            hi_b = [slice(None)] * g.ndim
            hi_b[axis] = slice(0, -1)
            g[tuple(first)] = np.take(fwd, [0], axis=axis)
            g[tuple(last)] = np.take(bwd, [-1], axis=axis)
            g[tuple(inner)] = 0.5 * (fwd[tuple(lo_f)] + bwd[tuple(hi_b)])
        beta[:, :, j] = grid.from_cube(g)
    return beta


def fit(data: Dataset, grid: RankGrid, opts: FitOptions | None = None) -> VqrFit:
    """Fit the discretized program and recover potentials, coefficients and plan."""
    opts = opts or FitOptions()
    if data.d != grid.d:
        raise ValidationError(f"outcome dimension {data.d} does not match grid dimension {grid.d}")
    want_beta = grid.is_tensor if opts.beta is None else opts.beta
    if want_beta and not grid.is_tensor:
        raise CapabilityError("coefficients requested on a sampled grid; use a tensor grid or beta=False")
    if want_beta and any(s < 2 for s in grid.shape):
        raise CapabilityError(f"every grid dimension needs at least 2 points, got shape {grid.shape}")
    if opts.beta_scheme not in ("bracket", "central"):
        raise ValidationError(f"unknown beta scheme {opts.beta_scheme!r}")

    norm = standardization(data) if opts.standardize else Normalization.identity(data.d, data.p)
    sdata = _apply(data, norm)
    problem = lp.assemble_primal(sdata, grid, max_nonzeros=opts.max_nonzeros)
    sol = lp.solve(problem, tol=opts.tol, max_iter=opts.max_iter, method=opts.method)
    if sol.status != lp.OPTIMAL:
        raise SolverError(f"transport program not solved: {sol.status} ({sol.message})", report=sol.residuals)

    n, m, p = data.n, grid.m, data.p
    x = np.where(sol.x > 0, sol.x, 0.0)
    plan = x.reshape((m, n), order="F")
    psi_s, b_s = _normalize_duals(sol.y[:n], sol.y[n:].reshape((m, p), order="F"), sdata.X)

    b_lo_s = b_hi_s = None
    if want_beta and opts.beta_scheme == "bracket":
        lo_ext = _dual_face_extreme(sdata, grid, plan, psi_s, b_s, anchor=0, tol=1e-9)
        hi_ext = _dual_face_extreme(sdata, grid, plan, psi_s, b_s, anchor=m - 1, tol=1e-9)
        if lo_ext is not None and hi_ext is not None:
            psi_lo, b_lo_s = _normalize_duals(*lo_ext, sdata.X)
            psi_hi, b_hi_s = _normalize_duals(*hi_ext, sdata.X)
            psi_s = 0.5 * (psi_lo + psi_hi)
            b_s = 0.5 * (b_lo_s + b_hi_s)

    psi = norm.y_scale * psi_s
    b = _unstandardize_b(b_s, grid, norm)
    psi, b = _normalize_duals(psi, b, data.X)
    extremes = [None, None]
    if b_lo_s is not None:
        extremes = [
            _normalize_duals(np.zeros(n), _unstandardize_b(bb, grid, norm), data.X)[1]
            for bb in (b_lo_s, b_hi_s)
        ]
    duals = DualPotentials(psi=psi, b=b, b_lower=extremes[0], b_upper=extremes[1])
    beta = recover_beta(duals, grid) if want_beta else None
    objective = float(np.sum(plan * (grid.U @ data.Y.T)))
    return VqrFit(
        grid=grid,
        duals=duals,
        beta=beta,
        plan=TransportPlan(sp.csc_matrix(plan)),
        solve_report=sol.residuals,
        objective=objective,
        normalization=norm,
        nu=np.array(data.nu),
        y_names=data.y_names,
        x_names=data.x_names,
        extra={"lp_objective_standardized": sol.objective, "iterations": sol.iterations},
    )


# -- evaluation ------------------------------------------------------------------------


def evaluate_quantile(fit: VqrFit, u_index: int, x) -> np.ndarray:
    """``beta(u_k)' x`` for a single grid point."""
    if not 0 <= int(u_index) < fit.m:
        raise ValidationError(f"grid index {u_index} out of range [0, {fit.m})")
    x = _check_x(x, fit.p)
    return x @ fit.require_beta()[int(u_index)]


def quantile_treatment_effect(fit: VqrFit, x1, x0) -> np.ndarray:
    """Rank-wise contrast ``Q(u_k | x1) - Q(u_k | x0)``, shape (m, d)."""
    return fit.quantiles(x1) - fit.quantiles(x0)


def barycentric_ranks(fit: VqrFit) -> np.ndarray:
    """Mass-weighted average of the grid points coupled to each observation, shape (n, d)."""
    if fit.plan is None:
        raise CapabilityError("fit carries no transport plan")
    pi = fit.plan.pi
    nu = fit.nu if fit.nu is not None else np.asarray(pi.sum(axis=0)).ravel()
    if np.any(nu <= 0):
        raise ValidationError("barycentric ranks need strictly positive observation weights")
    return np.asarray(pi.T @ fit.grid.U) / nu[:, None]


class MonotonicityReport(NamedTuple):
    violation_pairs: int
    worst: float
    fraction: float
    pairs: int


def monotonicity_report(fit: VqrFit, x, tol: float = 1e-8) -> MonotonicityReport:
    """Count grid pairs where ``(Q(u) - Q(u'))'(u - u') < -tol * scale``."""
    Q = fit.quantiles(x)
    U = fit.grid.U
    m = fit.m
    scale = max(float(np.ptp(Q, axis=0).max()) * float(np.ptp(U, axis=0).max()), 1.0)
    thresh = -tol * scale
    count = 0
    worst = 0.0
    step = max(1, 2_000_000 // max(m, 1))
    for start in range(0, m, step):
        stop = min(m, start + step)
        s = np.einsum("ikd,ikd->ik", Q[start:stop, None, :] - Q[None, :, :], U[start:stop, None, :] - U[None, :, :])
        # upper triangle only: pairs k < k'
        idx = np.arange(start, stop)[:, None] < np.arange(m)[None, :]
        vals = s[idx]
        count += int(np.count_nonzero(vals < thresh))
        if vals.size:
            worst = min(worst, float(vals.min()))
    pairs = m * (m - 1) // 2
    return MonotonicityReport(count, worst, count / pairs if pairs else 0.0, pairs)


class CrossPartial(NamedTuple):
    values: np.ndarray  # (m_1, m_2), NaN on the boundary
    sign: np.ndarray  # -1, 0, +1 on interior points, 0 on the boundary
    negative_fraction: float


def cross_partial(fit: VqrFit, x, zero_tol: float = 0.0) -> CrossPartial:
    """Mixed central differences of ``u -> b(u)' x`` on interior points of a 2-D grid."""
    grid = fit.grid
    if grid.d != 2 or not grid.is_tensor:
        raise CapabilityError("cross partials need a 2-D tensor grid")
    m1, m2 = grid.shape
    if m1 < 2 or m2 < 2:
        raise CapabilityError("cross partials need at least 2 points per dimension")
    x = _check_x(x, fit.p)
    phi = grid.to_cube(fit.duals.b @ x).T  # (m1, m2)
    return mixed_difference(phi, grid.axes[0], grid.axes[1], zero_tol)


def mixed_difference(phi: np.ndarray, a1: np.ndarray, a2: np.ndarray, zero_tol: float = 0.0) -> CrossPartial:
    m1, m2 = phi.shape
    out = np.full((m1, m2), np.nan)
    if m1 >= 3 and m2 >= 3:
        num = phi[2:, 2:] - phi[2:, :-2] - phi[:-2, 2:] + phi[:-2, :-2]
        den = np.outer(a1[2:] - a1[:-2], a2[2:] - a2[:-2])
        out[1:-1, 1:-1] = num / den
    interior = ~np.isnan(out)
    sign = np.zeros((m1, m2), dtype=int)
    sign[interior] = np.where(out[interior] > zero_tol, 1, np.where(out[interior] < -zero_tol, -1, 0))
    neg = float(np.mean(sign[interior] < 0)) if interior.any() else 0.0
    return CrossPartial(out, sign, neg)


class CopulaEstimate(NamedTuple):
    a: np.ndarray
    b: np.ndarray
    C: np.ndarray  # C[i, j] = P(R1 <= a_i, R2 <= b_j)
    marginal_discrepancy: float


def empirical_copula(ranks1, ranks2, a=None, b=None, weights=None) -> CopulaEstimate:
    """Empirical joint CDF of two rank vectors on an evaluation lattice.

    The marginal discrepancy is the largest deviation of either margin from the
    uniform CDF over the lattice.
    """
    r1 = np.asarray(ranks1, dtype=float).ravel()
    r2 = np.asarray(ranks2, dtype=float).ravel()
    if r1.size != r2.size:
        raise ValidationError("rank vectors differ in length")
    if r1.size == 0:
        raise ValidationError("empty rank vectors")
    w = np.full(r1.size, 1.0 / r1.size) if weights is None else np.asarray(weights, float) / np.sum(weights)
    lattice = np.linspace(0.05, 1.0, 20)
    a = lattice if a is None else np.asarray(a, dtype=float)
    b = lattice if b is None else np.asarray(b, dtype=float)
    I1 = (r1[None, :] <= a[:, None]).astype(float)
    I2 = (r2[None, :] <= b[:, None]).astype(float)
    C = (I1 * w) @ I2.T
    m1 = I1 @ w
    m2 = I2 @ w
    disc = float(max(np.max(np.abs(m1 - a)), np.max(np.abs(m2 - b))))
    return CopulaEstimate(a, b, C, disc)


def kolmogorov_uniform(values, weights=None) -> float:
    """Kolmogorov distance between the (weighted) empirical law of ``values`` and U(0,1)."""
    v = np.asarray(values, dtype=float).ravel()
    w = np.full(v.size, 1.0 / v.size) if weights is None else np.asarray(weights, float) / np.sum(weights)
    order = np.argsort(v, kind="stable")
    v, w = v[order], w[order]
    # collapse ties so the CDF jumps once per distinct value
    uniq, start = np.unique(v, return_index=True)
    cum = np.cumsum(w)
    end = np.append(start[1:], v.size) - 1
    F_after = cum[end]
    F_before = np.concatenate([[0.0], F_after[:-1]])
    t = np.clip(uniq, 0.0, 1.0)
    return float(max(np.max(np.abs(F_after - t)), np.max(np.abs(F_before - t))))


# -- artifacts -----------------------------------------------------------------------


def fit_to_dict(fit: VqrFit, include_plan: bool = True) -> dict:
    obj = {
        "grid": fit.grid.to_dict(),
        "psi": fit.duals.psi.tolist(),
        "b": fit.duals.b.tolist(),
        "beta": None if fit.beta is None else fit.beta.tolist(),
        "objective": fit.objective,
        "residuals": fit.solve_report.as_dict(),
        "normalization": fit.normalization.as_dict(),
        "y_names": list(fit.y_names),
        "x_names": list(fit.x_names),
    }
    if fit.duals.has_bracket:
        obj["b_lower"] = fit.duals.b_lower.tolist()
        obj["b_upper"] = fit.duals.b_upper.tolist()
    if include_plan and fit.plan is not None:
        obj["pi"] = fit.plan.triplets()
        if fit.nu is not None:
            obj["nu"] = fit.nu.tolist()
    return obj


def fit_from_dict(obj: dict) -> VqrFit:
    grid = RankGrid.from_dict(obj["grid"])
    b = np.array(obj["b"], dtype=float)
    if b.ndim == 1:
        b = b.reshape(grid.m, -1)
    duals = DualPotentials(
        psi=np.array(obj["psi"], dtype=float),
        b=b,
        b_lower=np.array(obj["b_lower"], dtype=float) if "b_lower" in obj else None,
        b_upper=np.array(obj["b_upper"], dtype=float) if "b_upper" in obj else None,
    )
    n = duals.psi.size
    plan = TransportPlan.from_triplets(obj["pi"], grid.m, n) if "pi" in obj else None
    nrm = obj["normalization"]
    return VqrFit(
        grid=grid,
        duals=duals,
        beta=None if obj.get("beta") is None else np.array(obj["beta"], dtype=float).reshape(grid.m, b.shape[1], grid.d),
        plan=plan,
        solve_report=lp.Residuals(**obj["residuals"]),
        objective=float(obj["objective"]),
        normalization=Normalization(
            np.array(nrm["y_center"], dtype=float),
            float(nrm["y_scale"]),
            np.array(nrm["x_center"], dtype=float),
            np.array(nrm["x_scale"], dtype=float),
        ),
        nu=np.array(obj["nu"], dtype=float) if "nu" in obj else None,
        y_names=tuple(obj.get("y_names", ())),
        x_names=tuple(obj.get("x_names", ())),
    )


def save_fit(fit: VqrFit, path, include_plan: bool = True) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(fit_to_dict(fit, include_plan), fh, indent=1)
        fh.write("\n")


def load_fit(path) -> VqrFit:
    with open(path, encoding="utf-8") as fh:
        return fit_from_dict(json.load(fh))


def write_surface(fit: VqrFit, x, path) -> np.ndarray:
    """CSV with columns u1..ud, q1..qd of ``Q(u | x)`` over the grid."""
    Q = fit.quantiles(x)
    d = fit.d
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"u{i + 1}" for i in range(d)] + [f"q{i + 1}" for i in range(d)])
        for u, q in zip(fit.grid.U.tolist(), Q.tolist()):
            w.writerow([repr(v) for v in u] + [repr(v) for v in q])
    return Q
