"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line.

The lines are collected in ``conftest.ACCEPTANCE`` and printed in the pytest
terminal summary. Thresholds marked as calibrated were produced by the scripts
in ``scripts/`` and are frozen here.
"""

import json
import time

import numpy as np
import pytest
from click.testing import CliRunner

from vecquant import lp
from vecquant.cli import main
from vecquant.core import Dataset, FeatureMap, load_dataset, tensor_grid
from vecquant.oracle import NormalSpec, brute_force_vqr, monge_ampere_check
from vecquant.scalar_qr import compare_fits, default_t_grid, kb_fit, qr_process, quantile_x_points
from vecquant.vqr import FitOptions, barycentric_ranks, fit, kolmogorov_uniform

from conftest import ACCEPTANCE, ENGEL, simulate_linear

# 90th percentile of the normal-model recovery error over seeds 0-9 at n=4000
# (scripts/calibrate_normal.py)
TAU = 0.187605
# 90th percentile of the sup decile / quartile-x QR error over seeds 0-9 at n=2000
# (scripts/calibrate_qr.py)
QR_SAMPLING = 0.372620

FRESH_SEEDS = (100, 101, 102)


def report(number, ok, detail):
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE.append(line)
    print(line)
    assert ok, line


def random_tiny_instance(rng):
    d = int(rng.integers(1, 3))
    p = int(rng.integers(1, 3))
    shape = (int(rng.integers(2, 7)),) if d == 1 else tuple(int(v) for v in rng.integers(1, 4, size=2))
    m = int(np.prod(shape))
    n = int(rng.integers(1, 64 // m + 1))
    n = min(n, 8)
    Z = rng.standard_normal((n, p - 1)) if p > 1 else None
    nu = rng.random(n) + 0.2 if rng.random() < 0.5 else None
    return Dataset.from_arrays(rng.standard_normal((n, d)), Z, nu), tensor_grid(shape)


def test_c01_brute_force_equivalence():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        data, grid = random_tiny_instance(rng)
        assert grid.m * data.n <= 64
        sol = lp.solve(lp.assemble_primal(data, grid))
        assert sol.status == lp.OPTIMAL
        worst = max(worst, abs(sol.objective - brute_force_vqr(data, grid)))
    elapsed = time.perf_counter() - t0
    report(1, worst <= 1e-9 and elapsed < 10, f"max |lp - brute force| = {worst:.2e} over 50 instances, {elapsed:.2f}s")


def test_c02_sorting_exactness():
    rng = np.random.default_rng(7)
    y = rng.standard_normal(50) * 4 + 1
    assert np.unique(y).size == 50
    t0 = time.perf_counter()
    f = fit(Dataset.from_arrays(y), tensor_grid((50,)))
    elapsed = time.perf_counter() - t0
    err = float(np.max(np.abs(f.beta[:, 0, 0] - np.sort(y))))
    report(2, err <= 1e-8 and elapsed < 5, f"max |beta(u_k) - y_(k)| = {err:.2e}, {elapsed:.2f}s")


def test_c03_certificates():
    rng = np.random.default_rng(3)
    n = 500
    z = rng.standard_normal(n)
    Y = np.column_stack([1 + z + rng.standard_normal(n), -z + 0.5 * rng.standard_normal(n) * (1 + z**2)])
    data = Dataset.from_arrays(Y, z)
    grid = tensor_grid((20, 20))
    t0 = time.perf_counter()
    f = fit(data, grid)
    elapsed = time.perf_counter() - t0
    r = f.solve_report
    pi = f.plan.dense()
    mi = float(np.abs(pi @ data.X - np.outer(grid.mu, data.nu @ data.X)).max())
    primal = float(np.sum(pi * (grid.U @ data.Y.T)))
    dual = float(f.duals.psi @ data.nu + (data.nu @ data.X) @ (f.duals.b.T @ grid.mu))
    rel_gap = abs(primal - dual) / (1 + abs(primal))
    ok = rel_gap <= 1e-7 and r.primal_inf <= 1e-8 and r.dual_inf <= 1e-8 and mi <= 1e-8 and elapsed < 300
    report(
        3,
        ok,
        f"relative gap {rel_gap:.2e}, solver residuals {r.primal_inf:.1e}/{r.dual_inf:.1e}, "
        f"mean independence {mi:.1e}, {elapsed:.1f}s",
    )


@pytest.mark.slow
def test_c04_normal_recovery():
    from normal_case import recovery_error

    small = [recovery_error(4000, s) for s in FRESH_SEEDS]
    large = [recovery_error(8000, s) for s in FRESH_SEEDS]
    fresh = small[0]
    shrinks = np.median(large) < np.median(small)
    report(
        4,
        fresh <= TAU and shrinks,
        f"fresh seed error {fresh:.4f} <= tau {TAU:.4f}; median error n=4000 {np.median(small):.4f} "
        f"-> n=8000 {np.median(large):.4f}",
    )


def test_c05_saturated_factorization():
    rng = np.random.default_rng(5)
    worst = 0.0
    for trial in range(5):
        n0, n1 = rng.integers(5, 31, size=2)
        z = np.concatenate([np.zeros(n0), np.ones(n1)])
        d = 1 + trial % 2
        Y = rng.standard_normal((n0 + n1, d)) + z[:, None] * rng.standard_normal(d)
        grid = tensor_grid((4,) * d)
        opts = FitOptions(beta=False)
        full = fit(Dataset.from_arrays(Y, z), grid, opts).objective
        parts = [fit(Dataset.from_arrays(Y[z == g]), grid, opts).objective for g in (0, 1)]
        worst = max(worst, abs(full - (n0 * parts[0] + n1 * parts[1]) / (n0 + n1)))
    report(5, worst <= 1e-8, f"max |saturated - weighted per-group| = {worst:.2e} on 5 instances (n <= 60)")


def test_c06_scalar_qr_agreement(tmp_path):
    from linear_case import agreement, grid_resolution_term

    gap, data, *_ = agreement(FRESH_SEEDS[0])
    grid_term = grid_resolution_term(data)
    threshold = 3 * (grid_term + QR_SAMPLING)
    engel = load_dataset(ENGEL, ["food"], FeatureMap.identity("income"))
    cmp = compare_fits(fit(engel, tensor_grid((99,))), qr_process(engel, default_t_grid(99)), quantile_x_points(engel))
    cmp.write_csv(tmp_path / "engel_comparison.csv")
    cmp.write_fitted_csv(tmp_path / "engel_fitted.csv")
    produced = (tmp_path / "engel_comparison.csv").stat().st_size > 0
    report(
        6,
        gap <= threshold and produced,
        f"max decile/quartile-x gap {gap:.4f} <= 3*({grid_term:.4f} + {QR_SAMPLING:.4f}) = {threshold:.4f}; "
        f"Engel median relative fitted gap {cmp.median_relative_fitted_gap:.4g}",
    )


def test_c07_rank_score_constraint():
    data, _ = simulate_linear(2000, FRESH_SEEDS[0])
    engel = load_dataset(ENGEL, ["food"], FeatureMap.identity("income"))
    worst = 0.0
    for ds in (data, engel):
        xbar = ds.nu @ ds.X
        for t in np.arange(1, 10) / 10:
            f = kb_fit(ds, float(t))
            worst = max(worst, float(np.abs((ds.nu * f.a_t) @ ds.X - (1 - t) * xbar).max()))
    report(7, worst <= 1e-8, f"max |E(A_t X) - (1-t) xbar| = {worst:.2e} (simulated and Engel, t = 0.1..0.9)")


def test_c08_rank_uniformity():
    from linear_case import M, N

    data, _ = simulate_linear(N, FRESH_SEEDS[1])
    proc = qr_process(data, default_t_grid(99))
    ks_qr = kolmogorov_uniform(proc.u_tilde, data.nu)
    bound_qr = 2 / 99 + 2 / np.sqrt(N)
    vfit = fit(data, tensor_grid((M,)))
    ks_vqr = kolmogorov_uniform(barycentric_ranks(vfit)[:, 0], data.nu)
    bound_vqr = 1 / M + 2 / np.sqrt(N)
    report(
        8,
        ks_qr <= bound_qr and ks_vqr <= bound_vqr,
        f"U-tilde KS {ks_qr:.4f} <= {bound_qr:.4f}; barycentric KS {ks_vqr:.4f} <= {bound_vqr:.4f}",
    )


def test_c09_monge_ampere():
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(5):
        d = int(rng.integers(1, 4))
        spec = NormalSpec((0.0,), (1.0,), (rng.standard_normal(d),), (np.diag(rng.uniform(0.2, 5.0, d)),))
        u = rng.uniform(0.01, 0.99, (100, d))
        worst = max(worst, monge_ampere_check(spec, 0.0, u))
    report(9, worst <= 1e-8, f"max Monge-Ampere residual {worst:.2e} over 5 specs x 100 points")


def test_c10_engel_scale_run(tmp_path):
    runner = CliRunner()
    t0 = time.perf_counter()
    r1 = runner.invoke(
        main,
        ["fit", "--data", str(ENGEL), "--y", "food,housing", "--x", "income", "--grid", "20x20", "--out", str(tmp_path)],
    )
    r2 = runner.invoke(main, ["surface", "--fit", str(tmp_path / "fit.json"), "--x", "883.99", "--out", str(tmp_path)])
    r3 = runner.invoke(
        main,
        ["diagnose", "--fit", str(tmp_path / "fit.json"), "--x", "883.99", "--data", str(ENGEL), "--out", str(tmp_path)],
    )
    elapsed = time.perf_counter() - t0
    ok = all(r.exit_code == 0 for r in (r1, r2, r3))
    neg = None
    if ok:
        surface = np.loadtxt(tmp_path / "surface_0.csv", delimiter=",", skiprows=1)
        diag = json.loads((tmp_path / "diagnostics.json").read_text())
        neg = diag["points"][0]["cross_partial"]["negative_fraction"]
        ok = surface.shape == (400, 4) and (tmp_path / "cross_partial_0.csv").exists()
    report(
        10,
        ok,
        f"20x20 fit, surface and cross-partial map at income 883.99 emitted in {elapsed:.1f}s; "
        f"negative fraction {neg} (housing column is synthetic)",
    )


def _tree(path):
    return {p.relative_to(path).as_posix(): p.read_bytes() for p in sorted(path.rglob("*")) if p.is_file()}


def test_c11_determinism(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(
        json.dumps({"levels": [{"z": 0, "prob": 0.4, "mu": [0, 1], "omega": [[1, 0], [0, 2]]},
                               {"z": 1, "prob": 0.6, "mu": [1, 0], "omega": [[1, 0.3], [0.3, 1]]}]})
    )
    runner = CliRunner()
    trees = []
    for rep in ("a", "b"):
        out = tmp_path / rep
        fit2 = out / "fit2"
        fit1 = out / "fit1"
        commands = [
            ["fit", "--data", ENGEL, "--y", "food,housing", "--x", "income", "--grid", "8x8", "--seed", 1, "--out", fit2, "--dump-lp"],
            ["surface", "--fit", fit2 / "fit.json", "--x-quantile", 0.5, "--data", ENGEL, "--out", out / "surface"],
            ["ranks", "--fit", fit2 / "fit.json", "--out", out / "ranks"],
            ["diagnose", "--fit", fit2 / "fit.json", "--x-quantile", 0.5, "--data", ENGEL, "--out", out / "diagnose"],
            ["fit", "--data", ENGEL, "--y", "food", "--x", "income", "--grid", "20", "--seed", 1, "--out", fit1],
            ["qr", "--data", ENGEL, "--t-grid", 19, "--compare", fit1 / "fit.json", "--out", out / "qr"],
            ["simulate", "normal", "--spec", spec, "--n", 200, "--seed", 1, "--out", out / "sim"],
        ]
        for cmd in commands:
            r = runner.invoke(main, [str(c) for c in cmd])
            assert r.exit_code == 0, (cmd, r.output)
        trees.append(_tree(out))
    a, b = trees
    differing = sorted(k for k in set(a) | set(b) if a.get(k) != b.get(k))
    report(11, not differing and len(a) > 0, f"{len(a)} artifacts from 7 commands byte-identical across runs; differing: {differing}")
