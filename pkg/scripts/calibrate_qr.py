"""Calibrate the QR sampling-error term of the VQR/QR agreement threshold.

Runs 10 replications (seeds 0-9) of the linear model at n=2000 and reports the
90th percentile of the sup decile / quartile-x error of classical QR against
the true quantile function. The value is frozen as QR_SAMPLING in
tests/test_acceptance.py. With --gaps the VQR/QR gap of each replication is
printed as well, for reference.
"""

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
from linear_case import agreement, qr_sampling_error  # noqa: E402

errs = []
for seed in range(10):
    errs.append(qr_sampling_error(seed))
    line = f"seed={seed} qr_err={errs[-1]:.6f}"
    if "--gaps" in sys.argv:
        line += f" vqr_qr_gap={agreement(seed)[0]:.6f}"
    print(line, flush=True)
print(f"median={np.median(errs):.6f} p90={np.percentile(errs, 90):.6f}")
