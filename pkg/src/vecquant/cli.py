"""Command-line interface: batch runs that write JSON/CSV artifacts plus a manifest.

Exit codes: 0 success, 2 validation, 3 solver failure, 4 I/O.
"""

from __future__ import annotations

import csv
import functools
import hashlib
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__, lp
from .core import FeatureMap, Transform, gaussian_grid, load_dataset, parse_shape, read_csv_columns, tensor_grid
from .errors import ValidationError, VqrError
from .oracle import NormalSpec, simulate_normal
from .scalar_qr import compare_fits, default_t_grid, qr_process, quantile_x_points
from .vqr import (
    FitOptions,
    barycentric_ranks,
    cross_partial,
    empirical_copula,
    fit as vqr_fit,
    fit_to_dict,
    load_fit,
    monotonicity_report,
    write_surface,
)

EXIT_IO = 4


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(path: Path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _write_manifest(out: Path, command: str, params: dict, inputs: dict, outputs: list[Path]) -> None:
    _write_json(
        out / f"manifest_{command}.json",
        {
            "command": command,
            "version": __version__,
            "parameters": params,
            "inputs": {role: _sha256(p) for role, p in sorted(inputs.items())},
            "outputs": {p.name: _sha256(p) for p in outputs},
        },
    )


def _guard(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except VqrError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(exc.exit_code)
        except OSError as exc:
            click.echo(f"I/O error: {exc}", err=True)
            sys.exit(EXIT_IO)

    return wrapper


def _split(text: str | None) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()] if text else []


def _feature_map(x: str | None, poly: tuple[str, ...], interact: tuple[str, ...], indicator: tuple[str, ...]) -> FeatureMap:
    spec = [Transform("identity", (c,)) for c in _split(x)]
    for item in poly:
        col, _, deg = item.partition(":")
        try:
            spec.append(Transform("poly", (col,), degree=int(deg)))
        except ValueError:
            raise ValidationError(f"bad --poly {item!r}; expected column:degree") from None
    for item in interact:
        a, _, b = item.partition("*")
        if not b:
            raise ValidationError(f"bad --interact {item!r}; expected a*b")
        spec.append(Transform("interact", (a, b)))
    for item in indicator:
        col, _, val = item.partition("=")
        try:
            spec.append(Transform("indicator", (col,), value=float(val)))
        except ValueError:
            raise ValidationError(f"bad --indicator {item!r}; expected column=value") from None
    return FeatureMap(tuple(spec))


def _parse_vector(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in _split(text)])
    except ValueError:
        raise ValidationError(f"bad numeric vector {text!r}") from None


def _x_points(fit, x_values: tuple[str, ...], x_quantiles: tuple[float, ...], data: str | None):
    """Resolve regressor vectors given by value (without intercept) or by quantile of data columns."""
    points = []
    for text in x_values:
        v = _parse_vector(text)
        if v.size == fit.p - 1:
            v = np.concatenate([[1.0], v])
        points.append((f"x={text}", v))
    if x_quantiles:
        if data is None:
            raise ValidationError("--x-quantile needs --data to compute regressor quantiles")
        names = list(fit.x_names[1:])
        if len(names) != fit.p - 1 or any(not n or "=" in n or "*" in n or "^" in n for n in names):
            raise ValidationError("--x-quantile needs a fit whose regressors are plain data columns")
        table = read_csv_columns(data, names)
        for q in x_quantiles:
            if not 0 <= q <= 1:
                raise ValidationError("quantile levels must lie in [0, 1]")
            v = np.concatenate([[1.0], [float(np.quantile(table[c], q)) for c in names]])
            points.append((f"q{q:g}", v))
    if not points:
        if fit.p == 1:
            points.append(("x=1", np.ones(1)))
        else:
            raise ValidationError("supply --x or --x-quantile")
    return points


@click.group()
@click.version_option(__version__)
def main():
    """Vector quantile regression by optimal transport."""


@main.command("fit")
@click.option("--data", required=True, type=click.Path(dir_okay=False))
@click.option("--y", "y_cols", required=True, help="Comma-separated outcome columns.")
@click.option("--x", "x_cols", default=None, help="Comma-separated regressor columns (intercept is added).")
@click.option("--poly", multiple=True, help="column:degree polynomial terms.")
@click.option("--interact", multiple=True, help="a*b interaction terms.")
@click.option("--indicator", multiple=True, help="column=value indicator terms.")
@click.option("--weights", default="uniform", show_default=True, help="Weight column or 'uniform'.")
@click.option("--grid", "grid_spec", required=True, help="Grid shape, e.g. 20x20.")
@click.option("--reference", type=click.Choice(["uniform", "gaussian"]), default="uniform", show_default=True)
@click.option("--beta-scheme", type=click.Choice(["bracket", "central"]), default="bracket", show_default=True)
@click.option("--tol", default=1e-9, show_default=True, type=float)
@click.option("--seed", default=0, show_default=True, type=int, help="Recorded in the manifest; the fit is deterministic.")
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--dump-lp", is_flag=True, help="Also write the program in LP text format.")
@click.option("--no-plan", is_flag=True, help="Do not store the transport plan.")
@_guard
def cmd_fit(data, y_cols, x_cols, poly, interact, indicator, weights, grid_spec, reference, beta_scheme, tol, seed, out, dump_lp, no_plan):
    """Fit a VQR model and write fit.json, residuals.json and a manifest."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    fmap = _feature_map(x_cols, poly, interact, indicator)
    ds = load_dataset(data, _split(y_cols), fmap, weights)
    shape = parse_shape(grid_spec)
    grid = gaussian_grid(shape) if reference == "gaussian" else tensor_grid(shape)
    if len(shape) != ds.d:
        raise ValidationError(f"grid has {len(shape)} dimension(s) but there are {ds.d} outcome(s)")
    beta = all(s >= 2 for s in shape)
    result = vqr_fit(ds, grid, FitOptions(tol=tol, beta=beta, beta_scheme=beta_scheme))
    outputs = [out / "fit.json", out / "residuals.json"]
    _write_json(outputs[0], fit_to_dict(result, include_plan=not no_plan))
    _write_json(
        outputs[1],
        {
            **result.solve_report.as_dict(),
            "objective": result.objective,
            "n": ds.n,
            "m": grid.m,
            "p": ds.p,
            "d": ds.d,
            "bracket": result.duals.has_bracket,
        },
    )
    if dump_lp:
        # raw data, so an external solve reproduces the objective in fit.json
        lp.dump_lp(lp.assemble_primal(ds, grid), out / "problem.lp")
        outputs.append(out / "problem.lp")
    params = {
        "y": y_cols, "x": x_cols, "poly": list(poly), "interact": list(interact), "indicator": list(indicator),
        "weights": weights, "grid": grid_spec, "reference": reference, "beta_scheme": beta_scheme,
        "tol": tol, "seed": seed, "store_plan": not no_plan,
    }
    _write_manifest(out, "fit", params, {"data": data}, outputs)
    click.echo(
        f"fit: n={ds.n} m={grid.m} p={ds.p} d={ds.d} objective={result.objective:.10g} "
        f"gap={result.solve_report.gap:.2e}"
    )


@main.command("surface")
@click.option("--fit", "fit_path", required=True, type=click.Path(dir_okay=False))
@click.option("--x", "x_values", multiple=True, help="Regressor values, comma-separated, without the intercept.")
@click.option("--x-quantile", "x_quantiles", multiple=True, type=float, help="Quantile level of the regressor columns.")
@click.option("--data", default=None, type=click.Path(dir_okay=False), help="Data file for --x-quantile.")
@click.option("--out", required=True, type=click.Path(file_okay=False))
@_guard
def cmd_surface(fit_path, x_values, x_quantiles, data, out):
    """Write Q(u | x) over the grid as CSV, one file per requested x."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    f = load_fit(fit_path)
    f.require_beta()
    outputs = []
    index = []
    for i, (label, x) in enumerate(_x_points(f, x_values, x_quantiles, data)):
        path = out / f"surface_{i}.csv"
        write_surface(f, x, path)
        outputs.append(path)
        index.append({"file": path.name, "label": label, "x": x.tolist()})
    _write_json(out / "surfaces.json", index)
    outputs.append(out / "surfaces.json")
    inputs = {"fit": fit_path, **({"data": data} if data else {})}
    _write_manifest(out, "surface", {"x": list(x_values), "x_quantile": list(x_quantiles)}, inputs, outputs)
    click.echo(f"surface: wrote {len(index)} surface(s)")


@main.command("ranks")
@click.option("--fit", "fit_path", required=True, type=click.Path(dir_okay=False))
@click.option("--out", required=True, type=click.Path(file_okay=False))
@_guard
def cmd_ranks(fit_path, out):
    """Barycentric vector ranks of the fitted observations."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    f = load_fit(fit_path)
    R = barycentric_ranks(f)
    path = out / "ranks.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["obs"] + [f"r{i + 1}" for i in range(R.shape[1])])
        for j, row in enumerate(R.tolist()):
            w.writerow([j] + [repr(v) for v in row])
    _write_manifest(out, "ranks", {}, {"fit": fit_path}, [path])
    click.echo(f"ranks: {R.shape[0]} observations")


@main.command("diagnose")
@click.option("--fit", "fit_path", required=True, type=click.Path(dir_okay=False))
@click.option("--x", "x_values", multiple=True)
@click.option("--x-quantile", "x_quantiles", multiple=True, type=float)
@click.option("--data", default=None, type=click.Path(dir_okay=False))
@click.option("--out", required=True, type=click.Path(file_okay=False))
@_guard
def cmd_diagnose(fit_path, x_values, x_quantiles, data, out):
    """Monotonicity and cross-partial reports, plus the rank copula for 2-D fits."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    f = load_fit(fit_path)
    report = {"points": []}
    outputs = []
    for i, (label, x) in enumerate(_x_points(f, x_values, x_quantiles, data)):
        mono = monotonicity_report(f, x)
        entry = {"label": label, "x": x.tolist(), "monotonicity": mono._asdict()}
        if f.d == 2 and f.grid.is_tensor:
            cp = cross_partial(f, x)
            path = out / f"cross_partial_{i}.csv"
            m1, m2 = f.grid.shape
            with open(path, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["u1", "u2", "cross_partial", "sign"])
                for i1 in range(1, m1 - 1):
                    for i2 in range(1, m2 - 1):
                        w.writerow([repr(float(f.grid.axes[0][i1])), repr(float(f.grid.axes[1][i2])),
                                    repr(float(cp.values[i1, i2])), int(cp.sign[i1, i2])])
            outputs.append(path)
            entry["cross_partial"] = {"file": path.name, "negative_fraction": cp.negative_fraction}
        report["points"].append(entry)
    if f.d == 2 and f.plan is not None:
        R = barycentric_ranks(f)
        cop = empirical_copula(R[:, 0], R[:, 1], weights=f.nu)
        path = out / "copula.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["a", "b", "C"])
            for i, a in enumerate(cop.a.tolist()):
                for j, b in enumerate(cop.b.tolist()):
                    w.writerow([repr(a), repr(b), repr(float(cop.C[i, j]))])
        outputs.append(path)
        report["copula"] = {"file": path.name, "marginal_discrepancy": cop.marginal_discrepancy}
    _write_json(out / "diagnostics.json", report)
    outputs.append(out / "diagnostics.json")
    inputs = {"fit": fit_path, **({"data": data} if data else {})}
    _write_manifest(out, "diagnose", {"x": list(x_values), "x_quantile": list(x_quantiles)}, inputs, outputs)
    for e in report["points"]:
        line = f"diagnose {e['label']}: monotonicity violations={e['monotonicity']['violation_pairs']}"
        if "cross_partial" in e:
            line += f" cross-partial negative fraction={e['cross_partial']['negative_fraction']:.3f}"
        click.echo(line)


@main.command("qr")
@click.option("--data", required=True, type=click.Path(dir_okay=False))
@click.option("--y", "y_col", default=None, help="Outcome column; defaults to the --compare fit's outcome.")
@click.option("--x", "x_cols", default=None, help="Regressor columns; defaults to the --compare fit's regressors.")
@click.option("--weights", default="uniform", show_default=True)
@click.option("--t-grid", "t_size", default=99, show_default=True, type=int)
@click.option("--tol", default=1e-9, show_default=True, type=float)
@click.option("--compare", "compare_path", default=None, type=click.Path(dir_okay=False), help="1-D fit.json to compare against.")
@click.option("--out", required=True, type=click.Path(file_okay=False))
@_guard
def cmd_qr(data, y_col, x_cols, weights, t_size, tol, compare_path, out):
    """Scalar quantile regression process, rank variable and optional comparison with a VQR fit."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    vf = load_fit(compare_path) if compare_path else None
    if y_col is None:
        if vf is None:
            raise ValidationError("--y is required without --compare")
        y_col = ",".join(vf.y_names)
        if x_cols is None:
            x_cols = ",".join(vf.x_names[1:]) or None
    ds = load_dataset(data, _split(y_col), FeatureMap.identity(*_split(x_cols)), weights)
    proc = qr_process(ds, default_t_grid(t_size), tol=tol)
    outputs = [out / "qr_process.csv", out / "u_tilde.csv", out / "crossing.json"]
    with open(outputs[0], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"beta{l}" for l in range(ds.p)])
        for f in proc.fits:
            w.writerow([repr(f.t)] + [repr(float(v)) for v in f.beta_t])
    with open(outputs[1], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["obs", "u_tilde"])
        for j, v in enumerate(proc.u_tilde.tolist()):
            w.writerow([j, repr(v)])
    _write_json(outputs[2], proc.crossing._asdict())
    inputs = {"data": data}
    if vf is not None:
        cmp = compare_fits(vf, proc, quantile_x_points(ds))
        cmp.write_csv(out / "comparison.csv")
        cmp.write_fitted_csv(out / "comparison_fitted.csv")
        _write_json(
            out / "comparison_summary.json",
            {"max_fitted_gap": cmp.max_fitted_gap, "median_relative_fitted_gap": cmp.median_relative_fitted_gap},
        )
        outputs += [out / "comparison.csv", out / "comparison_fitted.csv", out / "comparison_summary.json"]
        inputs["compare"] = compare_path
        click.echo(f"qr: median relative fitted-value gap {cmp.median_relative_fitted_gap:.4g}")
    params = {"y": y_col, "x": x_cols, "weights": weights, "t_grid": t_size, "tol": tol}
    _write_manifest(out, "qr", params, inputs, outputs)
    click.echo(f"qr: {len(proc.fits)} fits, crossings={proc.crossing.crossings}")


@main.group("simulate")
def cmd_simulate():
    """Simulate datasets from reference models."""


@cmd_simulate.command("normal")
@click.option("--spec", "spec_path", required=True, type=click.Path(dir_okay=False))
@click.option("--n", required=True, type=int)
@click.option("--seed", required=True, type=int)
@click.option("--out", required=True, type=click.Path(file_okay=False))
@_guard
def cmd_simulate_normal(spec_path, n, seed, out):
    """Conditional normal model: writes data.csv with y columns and the covariate z."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    spec = NormalSpec.from_json(Path(spec_path).read_text(encoding="utf-8"))
    ds = simulate_normal(spec, n, seed)
    path = out / "data.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"y{i + 1}" for i in range(ds.d)] + ["z"])
        for y, z in zip(ds.Y.tolist(), ds.raw_Z[:, 0].tolist()):
            w.writerow([repr(v) for v in y] + [repr(z)])
    _write_manifest(out, "simulate", {"model": "normal", "n": n, "seed": seed}, {"spec": spec_path}, [path])
    click.echo(f"simulate: wrote {n} rows")


if __name__ == "__main__":
    main()
