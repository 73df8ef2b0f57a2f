"""Data model shared by the fitting modules: datasets, feature maps and rank grids."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.special import ndtri

from .errors import ParseError, SchemaError, ValidationError

WEIGHT_TOL = 1e-12


def _frozen(a, dtype=float) -> np.ndarray:
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Outcomes ``Y`` (n x d), regressors ``X`` (n x p) and observation weights ``nu``.

    The first column of ``X`` is the intercept. ``raw_Z`` keeps the untransformed
    covariates when the dataset was built through a :class:`FeatureMap`.
    """

    Y: np.ndarray
    X: np.ndarray
    nu: np.ndarray
    raw_Z: np.ndarray | None = None
    y_names: tuple[str, ...] = ()
    x_names: tuple[str, ...] = ()

    def __post_init__(self):
        Y = np.asarray(self.Y, dtype=float)
        X = np.asarray(self.X, dtype=float)
        nu = np.asarray(self.nu, dtype=float)
        if Y.ndim == 1:
            Y = Y[:, None]
        if X.ndim == 1:
            X = X[:, None]
        if Y.ndim != 2 or X.ndim != 2 or nu.ndim != 1:
            raise ValidationError("Y and X must be matrices and nu a vector")
        n = Y.shape[0]
        if n < 1 or Y.shape[1] < 1 or X.shape[1] < 1:
            raise ValidationError("need n >= 1, d >= 1, p >= 1")
        if X.shape[0] != n or nu.shape[0] != n:
            raise ValidationError(
                f"row counts disagree: Y has {n}, X has {X.shape[0]}, nu has {nu.shape[0]}"
            )
        for name, a in (("Y", Y), ("X", X), ("nu", nu)):
            if not np.all(np.isfinite(a)):
                raise ValidationError(f"{name} has non-finite entries")
        if np.any(X[:, 0] != 1.0):
            raise ValidationError("first column of X must be identically 1")
        if np.any(nu < 0):
            raise ValidationError("observation weights must be non-negative")
        if abs(nu.sum() - 1.0) > WEIGHT_TOL:
            raise ValidationError(f"observation weights sum to {nu.sum()!r}, not 1")
        object.__setattr__(self, "Y", _frozen(Y))
        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "nu", _frozen(nu))
        if self.raw_Z is not None:
            object.__setattr__(self, "raw_Z", _frozen(self.raw_Z))
        object.__setattr__(self, "y_names", tuple(self.y_names))
        object.__setattr__(self, "x_names", tuple(self.x_names))

    @property
    def n(self) -> int:
        return self.Y.shape[0]

    @property
    def d(self) -> int:
        return self.Y.shape[1]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @classmethod
    def from_arrays(cls, Y, Z=None, nu=None, **kwargs) -> "Dataset":
        """Build a dataset from outcomes and raw covariates, prepending the intercept."""
        Y = np.asarray(Y, dtype=float)
        if Y.ndim == 1:
            Y = Y[:, None]
        n = Y.shape[0]
        if Z is None:
            X = np.ones((n, 1))
        else:
            Z = np.asarray(Z, dtype=float)
            if Z.ndim == 1:
                Z = Z[:, None]
            X = np.column_stack([np.ones(n), Z])
        if nu is None:
            nu = np.full(n, 1.0 / n)
        else:
            nu = normalize_weights(nu)
        kwargs.setdefault("y_names", tuple(f"y{i + 1}" for i in range(Y.shape[1])))
        kwargs.setdefault("x_names", ("(intercept)",) + tuple(f"x{i}" for i in range(1, X.shape[1])))
        if Z is not None:
            kwargs.setdefault("raw_Z", Z)
        return cls(Y=Y, X=X, nu=nu, **kwargs)

    def to_json(self) -> str:
        return json.dumps(
            {
                "n": self.n,
                "d": self.d,
                "p": self.p,
                "Y": self.Y.tolist(),
                "X": self.X.tolist(),
                "nu": self.nu.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "Dataset":
        obj = json.loads(text)
        try:
            Y = np.array(obj["Y"], dtype=float).reshape(obj["n"], obj["d"])
            X = np.array(obj["X"], dtype=float).reshape(obj["n"], obj["p"])
            nu = np.array(obj["nu"], dtype=float)
        except KeyError as exc:
            raise SchemaError(f"dataset JSON is missing key {exc}") from None
        return cls(Y=Y, X=X, nu=nu)

    def to_csv(self, path) -> None:
        """Write ``Y`` columns and non-intercept ``X`` columns as a header CSV."""
        y_names = self.y_names or tuple(f"y{i + 1}" for i in range(self.d))
        x_names = self.x_names[1:] if self.x_names else tuple(
            f"x{i + 1}" for i in range(1, self.p)
        )
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([*y_names, *x_names, "weight"])
            for i in range(self.n):
                w.writerow(
                    [repr(float(v)) for v in self.Y[i]]
                    + [repr(float(v)) for v in self.X[i, 1:]]
                    + [repr(float(self.nu[i]))]
                )


def normalize_weights(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValidationError("weights must be a non-empty vector")
    if not np.all(np.isfinite(w)):
        raise ValidationError("weights must be finite")
    if np.any(w < 0):
        raise ValidationError("negative weight")
    total = w.sum()
    if total <= 0:
        raise ValidationError("weights sum to zero")
    return w / total


# -- feature maps -------------------------------------------------------------

_KINDS = ("identity", "poly", "interact", "indicator")


@dataclass(frozen=True)
class Transform:
    kind: str
    columns: tuple[str, ...]
    degree: int = 1
    value: float | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValidationError(f"unknown transform {self.kind!r}")
        expected = 2 if self.kind == "interact" else 1
        if len(self.columns) != expected:
            raise ValidationError(f"{self.kind} takes {expected} column(s)")
        if self.kind == "poly" and self.degree < 1:
            raise ValidationError("polynomial degree must be >= 1")
        if self.kind == "indicator" and self.value is None:
            raise ValidationError("indicator needs a level value")

    def names(self) -> list[str]:
        c = self.columns
        if self.kind == "identity":
            return [c[0]]
        if self.kind == "poly":
            return [c[0] if k == 1 else f"{c[0]}^{k}" for k in range(1, self.degree + 1)]
        if self.kind == "interact":
            return [f"{c[0]}*{c[1]}"]
        return [f"{c[0]}=={self.value:g}"]

    def apply(self, table: Mapping[str, np.ndarray]) -> list[np.ndarray]:
        cols = [table[c] for c in self.columns]
        if self.kind == "identity":
            return [cols[0]]
        if self.kind == "poly":
            return [cols[0] ** k for k in range(1, self.degree + 1)]
        if self.kind == "interact":
            return [cols[0] * cols[1]]
        return [(cols[0] == self.value).astype(float)]


@dataclass(frozen=True)
class FeatureMap:
    """Ordered list of column transforms producing ``X = f(Z)``; the intercept is always prepended."""

    spec: tuple[Transform, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "spec", tuple(self.spec))

    @classmethod
    def identity(cls, *columns: str) -> "FeatureMap":
        return cls(tuple(Transform("identity", (c,)) for c in columns))

    @classmethod
    def saturated(cls, column: str, levels: Sequence[float]) -> "FeatureMap":
        """Indicators of every level but the first (the intercept covers the baseline)."""
        levels = list(levels)
        if len(set(levels)) != len(levels):
            raise ValidationError("duplicate levels")
        return cls(tuple(Transform("indicator", (column,), value=float(v)) for v in levels[1:]))

    def __add__(self, other: "FeatureMap") -> "FeatureMap":
        return FeatureMap(self.spec + other.spec)

    @property
    def input_columns(self) -> list[str]:
        out: list[str] = []
        for t in self.spec:
            for c in t.columns:
                if c not in out:
                    out.append(c)
        return out

    @property
    def names(self) -> list[str]:
        return ["(intercept)"] + [n for t in self.spec for n in t.names()]

    def apply(self, table: Mapping[str, np.ndarray]) -> np.ndarray:
        missing = [c for c in self.input_columns if c not in table]
        if missing:
            raise SchemaError(f"missing column(s): {', '.join(missing)}")
        n = len(next(iter(table.values()))) if table else 0
        cols = [np.ones(n)]
        for t in self.spec:
            cols.extend(np.asarray(c, dtype=float) for c in t.apply(table))
        return np.column_stack(cols)


def read_csv_columns(path, columns: Sequence[str]) -> dict[str, np.ndarray]:
    """Read the named numeric columns of a header CSV.

    Only the requested columns are parsed, so other columns may hold text.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(f"{path} is empty") from None
        missing = [c for c in columns if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing column(s): {', '.join(missing)}")
        idx = {c: header.index(c) for c in columns}
        data: dict[str, list[float]] = {c: [] for c in columns}
        for row_no, row in enumerate(reader, start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            for c, i in idx.items():
                cell = row[i].strip() if i < len(row) else ""
                try:
                    v = float(cell)
                except ValueError:
                    raise ParseError(f"column {c!r}: non-numeric value {cell!r}", row=row_no) from None
                if not np.isfinite(v):
                    raise ParseError(f"column {c!r}: non-finite value {cell!r}", row=row_no)
                data[c].append(v)
    out = {c: np.array(v, dtype=float) for c, v in data.items()}
    if not out or len(next(iter(out.values()))) == 0:
        raise ValidationError(f"{path}: no data rows")
    return out


def load_dataset(
    path,
    y_columns: Sequence[str],
    feature_map: FeatureMap,
    weight_mode: str = "uniform",
) -> Dataset:
    """Load a CSV into a :class:`Dataset`.

    ``weight_mode`` is ``"uniform"`` (nu_i = 1/n) or the name of a weight column,
    normalized to sum to one.
    """
    y_columns = list(y_columns)
    if not y_columns:
        raise ValidationError("at least one outcome column is required")
    wanted = list(dict.fromkeys(y_columns + feature_map.input_columns))
    if weight_mode != "uniform":
        wanted.append(weight_mode)
    table = read_csv_columns(path, wanted)
    Y = np.column_stack([table[c] for c in y_columns])
    n = Y.shape[0]
    if weight_mode == "uniform":
        nu = np.full(n, 1.0 / n)
    else:
        w = table[weight_mode]
        bad = np.flatnonzero(w < 0)
        if bad.size:
            raise ValidationError(f"negative weight at row {bad[0] + 1}")
        nu = normalize_weights(w)
    X = feature_map.apply(table)
    Z_cols = feature_map.input_columns
    raw_Z = np.column_stack([table[c] for c in Z_cols]) if Z_cols else None
    return Dataset(
        Y=Y, X=X, nu=nu, raw_Z=raw_Z, y_names=tuple(y_columns), x_names=tuple(feature_map.names)
    )


# -- rank grids -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RankGrid:
    """Rank points ``U`` (m x d) with weights ``mu``.

    Tensor grids also carry ``shape`` (points per dimension, first dimension
    varying fastest in row order), ``spacing`` (cell width 1/m_j on the unit
    cube) and ``axes`` (the coordinates along each dimension, which differ from
    the cell centres when the grid was pushed through a reference quantile map).
    Sampled grids leave all three empty.
    """

    U: np.ndarray
    mu: np.ndarray
    shape: tuple[int, ...] = ()
    spacing: tuple[float, ...] = ()
    axes: tuple[np.ndarray, ...] = field(default=())
    reference: str = "uniform"

    def __post_init__(self):
        U = np.asarray(self.U, dtype=float)
        if U.ndim == 1:
            U = U[:, None]
        mu = np.asarray(self.mu, dtype=float)
        if U.ndim != 2 or mu.ndim != 1 or U.shape[0] != mu.shape[0] or U.shape[0] < 1:
            raise ValidationError("U must be m x d and mu a length-m vector, m >= 1")
        if np.any(mu < 0) or abs(mu.sum() - 1.0) > WEIGHT_TOL:
            raise ValidationError("grid weights must be non-negative and sum to 1")
        if not np.all(np.isfinite(U)):
            raise ValidationError("grid points must be finite")
        shape = tuple(int(s) for s in self.shape)
        if shape:
            if len(shape) != U.shape[1] or int(np.prod(shape)) != U.shape[0]:
                raise ValidationError("grid shape does not match U")
            if len(self.axes) != len(shape):
                raise ValidationError("tensor grid needs one axis per dimension")
        object.__setattr__(self, "U", _frozen(U))
        object.__setattr__(self, "mu", _frozen(mu))
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "spacing", tuple(float(h) for h in self.spacing))
        object.__setattr__(self, "axes", tuple(_frozen(a) for a in self.axes))

    @property
    def m(self) -> int:
        return self.U.shape[0]

    @property
    def d(self) -> int:
        return self.U.shape[1]

    @property
    def is_tensor(self) -> bool:
        return bool(self.shape)

    def multi_index(self, k: int) -> tuple[int, ...]:
        """Multi-index of row ``k`` (first dimension fastest)."""
        out = []
        for s in self.shape:
            out.append(k % s)
            k //= s
        return tuple(out)

    def to_cube(self, values: np.ndarray) -> np.ndarray:
        """Reshape an (m, ...) array to (m_d, ..., m_1, ...) so that axis ``d-1-j`` runs over dimension j."""
        values = np.asarray(values)
        return values.reshape(self.shape[::-1] + values.shape[1:])

    def from_cube(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values)
        nd = len(self.shape)
        return values.reshape((self.m,) + values.shape[nd:])

    def to_dict(self) -> dict:
        return {
            "shape": list(self.shape),
            "spacing": list(self.spacing),
            "axes": [a.tolist() for a in self.axes],
            "reference": self.reference,
            "U": self.U.tolist(),
            "mu": self.mu.tolist(),
        }

    @classmethod
    def from_dict(cls, obj: Mapping) -> "RankGrid":
        return cls(
            U=np.array(obj["U"], dtype=float),
            mu=np.array(obj["mu"], dtype=float),
            shape=tuple(obj.get("shape", ())),
            spacing=tuple(obj.get("spacing", ())),
            axes=tuple(np.array(a, dtype=float) for a in obj.get("axes", ())),
            reference=obj.get("reference", "uniform"),
        )


def _check_shape(shape) -> tuple[int, ...]:
    if isinstance(shape, (int, np.integer)):
        shape = (shape,)
    shape = tuple(shape)
    if not shape:
        raise ValidationError("grid shape must have at least one dimension")
    for s in shape:
        if int(s) != s or s < 1:
            raise ValidationError(f"grid counts must be positive integers, got {shape}")
    return tuple(int(s) for s in shape)


def _tensor(axes: Sequence[np.ndarray]) -> np.ndarray:
    # first dimension varies fastest
    mesh = np.meshgrid(*axes[::-1], indexing="ij")
    return np.column_stack([g.ravel() for g in mesh[::-1]])


def tensor_grid(shape) -> RankGrid:
    """Cell-centred tensor grid on (0,1)^d with uniform weights.

    >>> tensor_grid((2,)).U.ravel().tolist()
    [0.25, 0.75]
    """
    shape = _check_shape(shape)
    axes = [(np.arange(s) + 0.5) / s for s in shape]
    U = _tensor(axes)
    m = U.shape[0]
    return RankGrid(
        U=U,
        mu=np.full(m, 1.0 / m),
        shape=shape,
        spacing=tuple(1.0 / s for s in shape),
        axes=tuple(axes),
    )


def gaussian_grid(shape) -> RankGrid:
    """Cell-centred tensor grid mapped coordinatewise through the standard normal quantile.

    Approximates a N(0, I) reference with equal weights; finite differences use
    the mapped axis coordinates.
    """
    base = tensor_grid(shape)
    axes = [ndtri(a) for a in base.axes]
    return RankGrid(
        U=_tensor(axes),
        mu=base.mu,
        shape=base.shape,
        spacing=base.spacing,
        axes=tuple(axes),
        reference="gaussian",
    )


def sampled_grid(m: int, d: int, seed: int) -> RankGrid:
    """``m`` seeded pseudo-random points in (0,1)^d with weights 1/m.

    No tensor topology, so coefficient recovery by differencing is unavailable.
    """
    if int(m) != m or m < 1 or int(d) != d or d < 1:
        raise ValidationError("need m >= 1 and d >= 1")
    rng = np.random.default_rng(seed)
    U = rng.random((int(m), int(d)))
    # random() is on [0, 1); keep points strictly interior
    U = np.where(U == 0.0, np.nextafter(0.0, 1.0), U)
    return RankGrid(U=U, mu=np.full(int(m), 1.0 / m))


def parse_shape(text: str) -> tuple[int, ...]:
    """Parse a grid string such as ``"20x20"``."""
    try:
        return _check_shape(tuple(int(t) for t in text.lower().split("x")))
    except ValueError:
        raise ValidationError(f"bad grid specification {text!r}") from None
