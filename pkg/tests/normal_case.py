"""Conditional normal recovery case shared by the acceptance suite and its calibration script."""

import numpy as np

from vecquant.core import gaussian_grid
from vecquant.oracle import NormalSpec, gaussian_quantile, simulate_normal
from vecquant.vqr import fit

SPEC = NormalSpec(
    levels=(0.0, 1.0),
    probs=(0.5, 0.5),
    mu=(np.zeros(2), np.array([1.0, -1.0])),
    omega=(np.diag([1.0, 2.0]), np.diag([2.0, 0.5])),
)
SHAPE = (15, 15)


def recovery_error(n: int, seed: int) -> float:
    """Sup over interior grid points and both levels of |Q_hat(u, z) - Q(u, z)|_inf."""
    grid = gaussian_grid(SHAPE)
    f = fit(simulate_normal(SPEC, n, seed), grid)
    inner = [k for k in range(grid.m) if all(0 < i < s - 1 for i, s in zip(grid.multi_index(k), SHAPE))]
    err = 0.0
    for z, x in ((0.0, [1.0, 0.0]), (1.0, [1.0, 1.0])):
        truth = gaussian_quantile(SPEC, grid.U[inner], z)
        err = max(err, float(np.abs(f.quantiles(x)[inner] - truth).max()))
    return err
