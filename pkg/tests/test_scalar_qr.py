import itertools

import numpy as np
import pytest

from vecquant.core import Dataset, FeatureMap, load_dataset, tensor_grid
from vecquant.errors import ValidationError
from vecquant.scalar_qr import (
    check_loss,
    compare_fits,
    compare_vqr_qr,
    crossing_report,
    default_t_grid,
    integration_weights,
    kb_fit,
    qr_process,
    quantile_x_points,
)
from vecquant.vqr import fit as vqr_fit, kolmogorov_uniform

from conftest import ENGEL, simulate_linear


@pytest.fixture(scope="module")
def engel():
    return load_dataset(ENGEL, ["food"], FeatureMap.identity("income"))


def elemental_qr(data, t):
    """Check-loss minimizer over all exact-fit pairs of observations (p = 2)."""
    X, y = data.X, data.Y[:, 0]
    best = (np.inf, None)
    for i, j in itertools.combinations(range(data.n), 2):
        A = X[[i, j]]
        if abs(np.linalg.det(A)) < 1e-12:
            continue
        beta = np.linalg.solve(A, y[[i, j]])
        loss = check_loss(data, beta, t)
        if loss < best[0] - 1e-12:
            best = (loss, beta)
    return best


def test_sample_median_of_three():
    data = Dataset.from_arrays([1.0, 2.0, 4.0])
    f = kb_fit(data, 0.5)
    assert f.beta_t[0] == pytest.approx(2.0, abs=1e-10)
    np.testing.assert_allclose(f.a_t, [0, 0.5, 1], atol=1e-10)


def test_symmetric_design_recovers_beta():
    # residuals +-1 at every design point: the median line is exact
    z = np.repeat(np.arange(5.0), 2)
    y = 1.0 + 2.0 * z + np.tile([-1.0, 1.0], 5)
    data = Dataset.from_arrays(y, z)
    f = kb_fit(data, 0.5)
    assert check_loss(data, f.beta_t, 0.5) == pytest.approx(check_loss(data, [1.0, 2.0], 0.5), abs=1e-12)


@pytest.mark.parametrize("t", [0.1, 0.5, 0.9])
def test_engel_matches_elemental_oracle(engel, t):
    f = kb_fit(engel, t)
    loss, beta = elemental_qr(engel, t)
    assert check_loss(engel, f.beta_t, t) == pytest.approx(loss, abs=1e-9)
    np.testing.assert_allclose(f.beta_t, beta, rtol=1e-6, atol=1e-6)


@pytest.mark.filterwarnings("ignore::UserWarning")
@pytest.mark.parametrize("t", [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])
def test_engel_matches_statsmodels(engel, t):
    sm = pytest.importorskip("statsmodels.api")
    ref = sm.QuantReg(engel.Y[:, 0], engel.X).fit(q=t, max_iter=5000, p_tol=1e-12)
    ours = kb_fit(engel, t)
    # statsmodels uses IRLS, so compare losses tightly and coefficients loosely
    assert check_loss(engel, ours.beta_t, t) <= check_loss(engel, ref.params, t) + 1e-9
    np.testing.assert_allclose(ours.beta_t, ref.params, rtol=1e-3)


@pytest.mark.parametrize("t", [0.1, 0.3, 0.5, 0.7, 0.9])
def test_rank_score_constraint(engel, t):
    f = kb_fit(engel, t)
    xbar = engel.nu @ engel.X
    assert np.abs(engel.nu * f.a_t @ engel.X - (1 - t) * xbar).max() <= 1e-8 * (1 + np.abs(xbar).max())
    assert f.a_t.min() >= 0 and f.a_t.max() <= 1


def test_rank_scores_follow_the_sign_of_residuals(engel):
    f = kb_fit(engel, 0.3)
    r = engel.Y[:, 0] - engel.X @ f.beta_t
    assert np.all(f.a_t[r > 1e-7] == pytest.approx(1.0))
    assert np.all(f.a_t[r < -1e-7] == pytest.approx(0.0))


@pytest.mark.parametrize("t", [0.25, 0.6])
def test_primal_dual_consistency(engel, t):
    f = kb_fit(engel, t)
    dual = float(engel.nu * f.a_t @ engel.Y[:, 0])
    ey = float(engel.nu @ engel.Y[:, 0])
    assert check_loss(engel, f.beta_t, t) == pytest.approx(dual - (1 - t) * ey, abs=1e-7)


def test_kb_fit_validation():
    data = Dataset.from_arrays([1.0, 2.0, 3.0], [[1.0, 2.0]] * 3)
    with pytest.raises(ValidationError):
        kb_fit(data, 0.5)
    with pytest.raises(ValidationError):
        kb_fit(Dataset.from_arrays([1.0, 2.0]), 1.0)
    with pytest.raises(ValidationError):
        kb_fit(Dataset.from_arrays(np.zeros((3, 2))), 0.5)


def test_grid_helpers():
    t = default_t_grid(99)
    assert t[0] == pytest.approx(0.01) and t[-1] == pytest.approx(0.99) and t.size == 99
    w = integration_weights(t)
    assert w.sum() == pytest.approx(1.0)
    assert w[0] == pytest.approx(0.015) and w[50] == pytest.approx(0.01)
    with pytest.raises(ValidationError):
        default_t_grid(0)


def test_single_observation_rank_is_one_half():
    proc = qr_process(Dataset.from_arrays([3.0]), default_t_grid(99))
    assert proc.u_tilde[0] == pytest.approx(0.5, abs=0.02)


def test_location_model_ranks_track_residual_ranks():
    rng = np.random.default_rng(2)
    n = 400
    z = rng.random(n) * 4
    eps = rng.standard_normal(n)
    data = Dataset.from_arrays(1 + 2 * z + eps, z)
    proc = qr_process(data, default_t_grid(99))
    emp = (np.argsort(np.argsort(eps)) + 0.5) / n
    assert np.abs(proc.u_tilde - emp).max() < 0.1
    assert kolmogorov_uniform(proc.u_tilde) <= 2 / 99 + 2 / np.sqrt(n)
    # adjacent fine-grid fits may cross at extreme x in finite samples; the deciles do not,
    # and without crossing the scores decrease in t
    deciles = qr_process(data, default_t_grid(9))
    assert deciles.crossing.crossings == 0
    assert np.all(np.diff(deciles.scores, axis=0) <= 1e-9)


def test_crossing_is_detected():
    # the slope at low t is steep, at high t flat: lines cross beyond z = 1
    rng = np.random.default_rng(0)
    n = 300
    z = rng.random(n)
    u = rng.random(n)
    y = (4 - 4 * u) * z + 3 * u
    data = Dataset.from_arrays(y, z)
    x_star = np.array([[1.0, 3.0]])
    proc = qr_process(data, [0.2, 0.8], x_eval=x_star)
    assert proc.crossing.crossings == 1
    assert proc.crossing.first == (0.2, 0.8, 0)
    assert proc.crossing.worst_drop > 0
    assert qr_process(data, [0.2, 0.8], x_eval=np.array([[1.0, 0.5]])).crossing.crossings == 0


def test_crossing_report_direct():
    betas = np.array([[0.0, 1.0], [1.0, -1.0]])
    rep = crossing_report(betas, np.array([0.3, 0.6]), np.array([[1.0, 0.0], [1.0, 2.0]]))
    assert rep.crossings == 1 and rep.fraction_x == 0.5 and rep.worst_drop == pytest.approx(3.0)


def test_bad_t_grids():
    data = Dataset.from_arrays([1.0, 2.0, 3.0])
    for bad in ([0.5, 0.4], [0.0, 0.5], [0.5, 1.0], []):
        with pytest.raises(ValidationError):
            qr_process(data, bad)


def test_threads_give_identical_results(engel):
    t = [0.2, 0.4, 0.6]
    a = qr_process(engel, t, threads=1)
    b = qr_process(engel, t, threads=3)
    assert np.array_equal(a.betas, b.betas) and np.array_equal(a.u_tilde, b.u_tilde)


def test_intercept_only_comparison_within_grid_resolution():
    y = np.random.default_rng(4).standard_normal(200)
    data = Dataset.from_arrays(y)
    cmp = compare_vqr_qr(data, tensor_grid((99,)), default_t_grid(99))
    # both are empirical quantiles; the QR one may differ by one order statistic
    spacing = np.diff(np.sort(y)).max()
    assert cmp.max_fitted_gap <= spacing + 1e-9


def test_comparison_table(tmp_path):
    data, _ = simulate_linear(300, seed=1)
    vf = vqr_fit(data, tensor_grid((20,)))
    proc = qr_process(data, default_t_grid(9))
    cmp = compare_fits(vf, proc, quantile_x_points(data))
    assert len(cmp.coefficients) == 9 * 2 and len(cmp.fitted) == 9 * 5
    assert abs(cmp.coefficients[0].u - 0.1) <= 0.025 + 1e-12
    cmp.write_csv(tmp_path / "c.csv")
    header = (tmp_path / "c.csv").read_text().splitlines()[0]
    assert header == "t,coefficient,beta_qr,beta_vqr,abs_gap,rel_gap"
    cmp.write_fitted_csv(tmp_path / "f.csv")
    assert len((tmp_path / "f.csv").read_text().splitlines()) == 46
    assert "np.float64" not in (tmp_path / "c.csv").read_text()


def test_quantile_x_points(engel):
    pts = quantile_x_points(engel)
    assert pts.shape == (5, 2)
    assert pts[2, 1] == pytest.approx(883.99, abs=0.01)
    assert pts[0, 1] == engel.X[:, 1].min() and pts[4, 1] == engel.X[:, 1].max()


def test_comparison_needs_scalar_fit():
    data = Dataset.from_arrays(np.random.default_rng(0).standard_normal((10, 2)))
    vf = vqr_fit(data, tensor_grid((2, 2)))
    proc = qr_process(Dataset.from_arrays(np.arange(10.0)), [0.5])
    with pytest.raises(ValidationError):
        compare_fits(vf, proc, np.ones((1, 1)))
