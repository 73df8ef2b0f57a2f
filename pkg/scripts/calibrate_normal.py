"""Calibrate the normal-model recovery threshold: 90th percentile error over seeds 0-9.

Usage: python3 scripts/calibrate_normal.py [n ...]   (default: 4000 8000)
Prints one line per replication and a summary per n; the n=4000 percentile is
frozen as TAU in tests/test_acceptance.py.
"""

import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
from normal_case import recovery_error  # noqa: E402

sizes = [int(a) for a in sys.argv[1:]] or [4000, 8000]
for n in sizes:
    errs = []
    for seed in range(10):
        t0 = time.time()
        errs.append(recovery_error(n, seed))
        print(f"n={n} seed={seed} err={errs[-1]:.6f} ({time.time() - t0:.0f}s)", flush=True)
    print(f"n={n} median={np.median(errs):.6f} p90={np.percentile(errs, 90):.6f} max={max(errs):.6f}", flush=True)
