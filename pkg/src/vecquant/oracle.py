"""Ground truth for tests: the conditional normal model and brute-force solvers.

Nothing here calls into :mod:`vecquant.lp` or scipy's statistics; the scalar
normal quantile is computed from ``math.erfc`` and the tiny-LP solver is a
self-contained dense tableau simplex.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Sequence

import numpy as np

from .core import Dataset, RankGrid
from .errors import CapabilityError, ValidationError

# -- scalar standard normal --------------------------------------------------------

# Acklam's rational approximation; refined below by Newton steps on erfc
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def norm_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def norm_ppf(p: float) -> float:
    """Standard normal quantile, accurate to about 1e-12 on (1e-300, 1 - 1e-16)."""
    if not 0.0 < p < 1.0:
        raise ValidationError(f"normal quantile needs 0 < p < 1, got {p!r}")
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        x = (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
            (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    elif p <= 1.0 - _P_LOW:
        q = p - 0.5
        r = q * q
        x = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / (
            ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)
    else:
        q = math.sqrt(-2.0 * math.log1p(-p))
        x = -(((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
            (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    # Halley refinement; work with the smaller tail probability for accuracy
    for _ in range(2):
        if x <= 0:
            e = 0.5 * math.erfc(-x / math.sqrt(2.0)) - p
        else:
            # Phi(x) - p = (1 - p) - Q(x)
            e = (1.0 - p) - 0.5 * math.erfc(x / math.sqrt(2.0))
        pdf = norm_pdf(x)
        if pdf == 0.0:
            break
        u = e / pdf
        x = x - u / (1.0 + 0.5 * x * u)
    return x


def _vec(f, a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return np.vectorize(f, otypes=[float])(a) if a.ndim else np.float64(f(float(a)))


# -- conditional normal model ------------------------------------------------------


def _sqrtm_psd(S: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(S)
    return (V * np.sqrt(np.clip(w, 0, None))) @ V.T


@dataclass(frozen=True, eq=False)
class NormalSpec:
    """``Y | Z=z ~ N(mu(z), Omega(z))`` over a finite set of covariate levels."""

    levels: tuple[float, ...]
    probs: tuple[float, ...]
    mu: tuple[np.ndarray, ...]
    omega: tuple[np.ndarray, ...]

    def __post_init__(self):
        L = len(self.levels)
        if L == 0 or not (len(self.probs) == len(self.mu) == len(self.omega) == L):
            raise ValidationError("levels, probs, mu and omega must have equal, non-zero length")
        if len(set(self.levels)) != L:
            raise ValidationError("duplicate levels")
        probs = np.asarray(self.probs, dtype=float)
        if np.any(probs < 0) or abs(probs.sum() - 1) > 1e-12:
            raise ValidationError("level probabilities must be non-negative and sum to 1")
        mus = tuple(np.atleast_1d(np.asarray(m, dtype=float)) for m in self.mu)
        d = mus[0].size
        omegas = []
        roots = []
        for S in self.omega:
            S = np.atleast_2d(np.asarray(S, dtype=float))
            if S.shape != (d, d):
                raise ValidationError(f"Omega must be {d}x{d}")
            if not np.allclose(S, S.T, rtol=0, atol=1e-12):
                raise ValidationError("Omega must be symmetric")
            if np.linalg.eigvalsh(S).min() <= 0:
                raise ValidationError("Omega must be positive definite")
            omegas.append(S)
            roots.append(_sqrtm_psd(S))
        if any(m.size != d for m in mus):
            raise ValidationError("all means must have the same dimension")
        object.__setattr__(self, "levels", tuple(float(z) for z in self.levels))
        object.__setattr__(self, "probs", tuple(float(p) for p in probs))
        object.__setattr__(self, "mu", mus)
        object.__setattr__(self, "omega", tuple(omegas))
        object.__setattr__(self, "_roots", tuple(roots))

    @property
    def d(self) -> int:
        return self.mu[0].size

    def index(self, z) -> int:
        try:
            return self.levels.index(float(z))
        except ValueError:
            raise ValidationError(f"unknown level {z!r}") from None

    def omega_sqrt(self, z) -> np.ndarray:
        return self._roots[self.index(z)]

    def mean(self, z) -> np.ndarray:
        return self.mu[self.index(z)]

    def cov(self, z) -> np.ndarray:
        return self.omega[self.index(z)]

    def to_json(self) -> str:
        return json.dumps(
            {
                "levels": [
                    {"z": z, "prob": p, "mu": m.tolist(), "omega": S.tolist()}
                    for z, p, m, S in zip(self.levels, self.probs, self.mu, self.omega)
                ]
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "NormalSpec":
        obj = json.loads(text)
        try:
            lv = obj["levels"]
            return cls(
                levels=tuple(e["z"] for e in lv),
                probs=tuple(e["prob"] for e in lv),
                mu=tuple(np.asarray(e["mu"], dtype=float) for e in lv),
                omega=tuple(np.asarray(e["omega"], dtype=float) for e in lv),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed normal spec: {exc}") from None


def simulate_normal(spec: NormalSpec, n: int, seed: int) -> Dataset:
    """Draw ``z`` from the levels and ``Y = mu(z) + Omega(z)^{1/2} U`` with ``U ~ N(0, I)``.

    ``X`` is the saturated design: intercept plus indicators of every level but
    the first.
    """
    if int(n) != n or n < 1:
        raise ValidationError("n must be a positive integer")
    n = int(n)
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(spec.levels), size=n, p=np.asarray(spec.probs))
    G = rng.standard_normal((n, spec.d))
    Y = np.empty((n, spec.d))
    for i, z in enumerate(spec.levels):
        rows = idx == i
        Y[rows] = spec.mu[i] + G[rows] @ spec._roots[i].T
    z = np.asarray(spec.levels)[idx]
    X = np.column_stack([np.ones(n)] + [(idx == i).astype(float) for i in range(1, len(spec.levels))])
    return Dataset(
        Y=Y,
        X=X,
        nu=np.full(n, 1.0 / n),
        raw_Z=z[:, None],
        y_names=tuple(f"y{i + 1}" for i in range(spec.d)),
        x_names=("(intercept)",) + tuple(f"z=={v:g}" for v in spec.levels[1:]),
    )


def _check_interior(u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0) or np.any(u >= 1):
        raise ValidationError("ranks must lie strictly inside (0, 1)^d")
    return u


def normal_quantile(spec: NormalSpec, u, z) -> np.ndarray:
    """``mu(z) + Omega(z)^{1/2} N^{-1}(u)`` with the normal quantile applied per coordinate.

    Accepts a single rank vector or a stack of them (rows).
    """
    u = _check_interior(u)
    g = _vec(norm_ppf, u)
    return spec.mean(z) + g @ spec.omega_sqrt(z).T


def gaussian_quantile(spec: NormalSpec, g, z) -> np.ndarray:
    """Quantile map in the native N(0, I) reference: ``mu(z) + Omega(z)^{1/2} g``."""
    g = np.asarray(g, dtype=float)
    return spec.mean(z) + g @ spec.omega_sqrt(z).T


def normal_rank(spec: NormalSpec, y, z) -> np.ndarray:
    """Inverse of :func:`normal_quantile`: ``N(Omega^{-1/2}(y - mu))`` per coordinate."""
    y = np.asarray(y, dtype=float)
    g = np.linalg.solve(spec.omega_sqrt(z), (y - spec.mean(z)).T).T
    return _vec(norm_cdf, g)


def monge_ampere_check(spec: NormalSpec, z, sample_u) -> float:
    """Largest ``|f_U(u) - f_Y(Q(u)) det D_u Q(u)|`` over the sample of cube ranks.

    ``f_U = 1`` on the unit cube; the conditional density and the Jacobian
    ``Omega^{1/2} diag(1 / phi(N^{-1}(u_i)))`` are evaluated in closed form.
    """
    S = spec.cov(z)
    root = spec.omega_sqrt(z)
    mu = spec.mean(z)
    d = spec.d
    Sinv = np.linalg.inv(S)
    _, logdet_S = np.linalg.slogdet(S)
    _, logdet_root = np.linalg.slogdet(root)
    worst = 0.0
    for u in np.atleast_2d(_check_interior(sample_u)):
        g = np.array([norm_ppf(v) for v in u])
        y = mu + root @ g
        r = y - mu
        log_fy = -0.5 * d * math.log(2 * math.pi) - 0.5 * logdet_S - 0.5 * float(r @ Sinv @ r)
        log_jac = logdet_root - sum(math.log(norm_pdf(v)) for v in g)
        worst = max(worst, abs(1.0 - math.exp(log_fy + log_jac)))
    return worst


# -- brute force transport -----------------------------------------------------------

MAX_PERMUTATION_SIZE = 6


class PermutationOptimum(NamedTuple):
    objective: float
    sigma: tuple[int, ...]  # observation j is coupled to grid point sigma[j]
    ties: tuple[tuple[int, ...], ...]

    def plan(self) -> np.ndarray:
        n = len(self.sigma)
        pi = np.zeros((n, n))
        for j, k in enumerate(self.sigma):
            pi[k, j] = 1.0 / n
        return pi


def brute_force_transport(Y, U, tie_tol: float = 1e-12) -> PermutationOptimum:
    """Best permutation coupling of n outcomes with n rank points under uniform weights.

    Every optimal permutation (within ``tie_tol``) is listed in lexicographic order.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    U = np.atleast_2d(np.asarray(U, dtype=float))
    if Y.shape[0] == 1 and Y.shape[1] > 1 and U.shape[1] == 1:
        Y = Y.T
    if U.shape[0] == 1 and U.shape[1] > 1 and Y.shape[1] == 1:
        U = U.T
    n = Y.shape[0]
    if U.shape[0] != n or U.shape[1] != Y.shape[1]:
        raise ValidationError("Y and U must have the same number of rows and columns")
    if n > MAX_PERMUTATION_SIZE:
        raise CapabilityError(f"enumeration capped at n = {MAX_PERMUTATION_SIZE}")
    S = Y @ U.T  # S[j, k] = y_j . u_k
    scores = []
    for sigma in itertools.permutations(range(n)):
        scores.append((sum(S[j, sigma[j]] for j in range(n)) / n, sigma))
    best = max(s for s, _ in scores)
    ties = tuple(sig for s, sig in scores if s >= best - tie_tol)
    return PermutationOptimum(best, ties[0], ties)


# -- dense tableau simplex -------------------------------------------------------------

MAX_BRUTE_FORCE_SIZE = 64


class DenseLpResult(NamedTuple):
    status: str
    objective: float
    x: np.ndarray


def dense_simplex(c, A, b, exact: bool = False, tol: float = 1e-11) -> DenseLpResult:
    """``max c'x  s.t.  A x = b, x >= 0`` by the two-phase tableau method with Bland's rule.

    With ``exact=True`` all arithmetic runs on :class:`fractions.Fraction`.
    """
    M, N = np.shape(A)
    if exact:
        conv = np.vectorize(Fraction, otypes=[object])
        A, b, c = (conv(np.asarray(a, dtype=object)) for a in (A, b, c))
        eps = 0
    else:
        A, b, c = (np.asarray(a, dtype=float) for a in (A, b, c))
        eps = tol
    neg = b < 0
    A = A.copy()
    b = b.copy()
    A[neg] = -A[neg]
    b[neg] = -b[neg]

    dtype = object if exact else float
    T = np.zeros((M + 1, N + M + 1), dtype=dtype)
    if exact:
        T[:] = Fraction(0)
    T[:M, :N] = A
    for i in range(M):
        T[i, N + i] = 1
    T[:M, -1] = b
    basis = list(range(N, N + M))
    # phase 1 objective row: minimize sum of artificials => reduced costs -sum(rows)
    T[M, :N] = -A.sum(axis=0)
    T[M, -1] = -b.sum()

    def pivot(r, col):
        T[r] = T[r] / T[r, col]
        for i in range(M + 1):
            if i != r and T[i, col] != 0:
                T[i] = T[i] - T[i, col] * T[r]
        basis[r] = col

    def run(allowed):
        while True:
            entering = next((j for j in range(allowed) if T[M, j] < -eps), None)
            if entering is None:
                return "optimal"
            best_r = None
            for i in range(M):
                if T[i, entering] > eps:
                    ratio = T[i, -1] / T[i, entering]
                    if (
                        best_r is None
                        or ratio < best_ratio - eps
                        or (abs(ratio - best_ratio) <= eps and basis[i] < basis[best_r])
                    ):
                        best_r, best_ratio = i, ratio
            if best_r is None:
                return "unbounded"
            pivot(best_r, entering)

    run(N)
    if T[M, -1] < -max(eps, 0) * 1e3 * (1 + float(abs(b).sum())):
        return DenseLpResult("infeasible", float("nan"), np.zeros(N))
    # drive zero-level artificials out of the basis, dropping redundant rows
    for r in range(M):
        if basis[r] >= N:
            col = next((j for j in range(N) if abs(T[r, j]) > eps), None)
            if col is not None:
                pivot(r, col)
    keep = [r for r in range(M) if basis[r] < N]
    T = np.vstack([T[keep], T[M:M + 1]])
    basis = [basis[r] for r in keep]
    M = len(keep)
    T[M, :] = 0
    # phase 2: minimize -c'x
    T[M, :N] = -c
    for i in range(M):
        if T[M, basis[i]] != 0:
            T[M] = T[M] - T[M, basis[i]] * T[i]
    status = run(N)
    x = np.zeros(N)
    for i in range(M):
        x[basis[i]] = float(T[i, -1])
    if status != "optimal":
        return DenseLpResult(status, float("nan"), x)
    return DenseLpResult("optimal", float(T[M, -1]), x)


def brute_force_vqr(data: Dataset, grid: RankGrid, exact: bool = False) -> float:
    """Optimal value of the discretized program by an independent dense simplex.

    The constraint matrix is rebuilt densely from its definition (marginal
    rows, then mean-independence rows) without the sparse assembly used by the
    main solver.
    """
    n, m, p = data.n, grid.m, data.p
    if m * n > MAX_BRUTE_FORCE_SIZE:
        raise CapabilityError(f"brute force capped at m*n <= {MAX_BRUTE_FORCE_SIZE}")
    if data.d != grid.d:
        raise ValidationError("dimension mismatch")
    # variable index v = (k, j) in column-major order
    pairs = [(k, j) for j in range(n) for k in range(m)]
    num = Fraction if exact else float
    X = [[num(v) for v in row] for row in data.X.tolist()]
    nu = [num(v) for v in data.nu.tolist()]
    mu = [num(v) for v in grid.mu.tolist()]
    c = [sum(num(a) * num(bb) for a, bb in zip(grid.U[k], data.Y[j])) for k, j in pairs]
    xbar = [sum(nu[j] * X[j][l] for j in range(n)) for l in range(p)]
    A = np.zeros((n + m * p, m * n), dtype=object if exact else float)
    A[:] = num(0)
    b = [num(0)] * (n + m * p)
    for v, (k, j) in enumerate(pairs):
        A[j, v] = num(1)
        for l in range(p):
            A[n + l * m + k, v] = X[j][l]
    b[:n] = nu
    for l in range(p):
        for k in range(m):
            b[n + l * m + k] = mu[k] * xbar[l]
    b = np.array(b, dtype=object if exact else float)
    c = np.array(c, dtype=object if exact else float)
    res = dense_simplex(c, A, b, exact=exact)
    if res.status != "optimal":
        raise ValidationError(f"brute-force program reported {res.status}")
    return res.objective


def per_group_transport_value(Y: np.ndarray, groups: Sequence[int], U: np.ndarray) -> float:
    """Sum over groups of the best coupling value, each weighted by its group share.

    For a saturated design with uniform weights the full program decouples into
    one uniform-to-uniform transport per group. Unequal sizes are reduced to a
    permutation problem by replicating points up to the least common multiple.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    U = np.atleast_2d(np.asarray(U, dtype=float))
    groups = np.asarray(groups)
    n = len(groups)
    m = U.shape[0]
    total = 0.0
    for g in np.unique(groups):
        Yg = Y[groups == g]
        ng = Yg.shape[0]
        L = math.lcm(m, ng)
        best = brute_force_transport(np.repeat(Yg, L // ng, axis=0), np.repeat(U, L // m, axis=0))
        total += ng / n * best.objective
    return total
