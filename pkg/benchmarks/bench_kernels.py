"""Compare the compiled kernels with the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeat N] [--end-to-end]

Per-kernel timings use MNIST-sized operands (784 x 1500 for elementwise
work, an 80 x 1500 layer for the nonlinearity kernels). ``--end-to-end``
also times a short pretrain + joint training run under each backend in a
subprocess, since the backend is chosen once at import.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from hmnmf import _fallback

try:
    from hmnmf import _kernels
except ImportError:
    _kernels = None

POWER, LOG1P = _fallback.POWER, _fallback.LOG1P

E2E = """
import time, numpy as np
from hmnmf import kernels
from hmnmf.hierarchy import LayerSpec, JointConfig, pretrain, joint_train
from hmnmf.nsnmf import UnitConfig
x = np.random.default_rng(0).random((784, 1500))
t = time.perf_counter()
model = pretrain(x, [LayerSpec(80, 0.5), LayerSpec(10, 0.5)], UnitConfig(k=10, max_iters=50))
joint_train(model, x, JointConfig(max_iters=20))
print(kernels.BACKEND, time.perf_counter() - t)
"""


def cases(rng):
    p, num, den = (rng.random((784, 1500)) for _ in range(3))
    h = rng.random((80, 1500))
    mean = _fallback.row_mean_broadcast(h)
    wtx, hh = rng.random((10, 1500)), rng.random((10, 1500))
    wtw, hht = rng.random((10, 10)), rng.random((10, 10))
    return {
        "mu_update": lambda m: m.mu_update(p, num, den, 1e-12),
        "safe_divide": lambda m: m.safe_divide(num, den, 1e-12),
        "hadamard": lambda m: m.hadamard(p, num),
        "row_mean_broadcast": lambda m: m.row_mean_broadcast(h),
        "normalized_forward(power)": lambda m: m.normalized_forward(POWER, 0.5, h, mean),
        "apply_inverse(power)": lambda m: m.apply_inverse(POWER, 0.5, h),
        "apply_inverse_deriv(log1p)": lambda m: m.apply_inverse_deriv(LOG1P, 0.0, h, 1e12),
        "half_sq_residual": lambda m: m.half_sq_residual(p, num),
        "gram_cost": lambda m: m.gram_cost(1.0, wtx, hh, wtw, hht),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=20)
    parser.add_argument("--end-to-end", action="store_true")
    args = parser.parse_args(argv)
    if _kernels is None:
        print("compiled extension not built; nothing to compare")
        return 1
    print(f"{'kernel':28s} {'numpy ms':>10s} {'cython ms':>10s} {'speedup':>8s}")
    for name, fn in cases(np.random.default_rng(0)).items():
        t_py = min(timeit.repeat(lambda: fn(_fallback), number=1, repeat=args.repeat)) * 1e3
        t_cy = min(timeit.repeat(lambda: fn(_kernels), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:28s} {t_py:10.3f} {t_cy:10.3f} {t_py / t_cy:8.2f}")
    if args.end_to_end:
        for pure in ("1", "0"):
            env = dict(os.environ, HMNMF_PURE_PYTHON=pure)
            out = subprocess.run([sys.executable, "-c", E2E], env=env, capture_output=True, text=True, check=True)
            backend, seconds = out.stdout.split()
            print(f"end-to-end ({backend}): {float(seconds):.2f} s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
