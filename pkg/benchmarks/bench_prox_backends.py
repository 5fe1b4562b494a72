"""Compare the compiled and numpy partition-shrinkage kernels.

The group shrinkage applied to every partition group is the single hot
operation inside the splitting solver (it runs once per iteration, so a
benchmark run calls it hundreds of thousands of times).  This script times
``partition_nested_prox`` under both backends on a workload shaped like a
benchmark-scale lattice: a few hundred contiguous column groups plus a large
tail of singletons.

Each backend runs in its own subprocess so the selection happens the same
way it does for users (the ``DDSPARSE_FORCE_BACKEND`` environment variable,
read once at import).  The parent verifies the two backends produce
bit-identical outputs before reporting the speedup.

Usage::

    python benchmarks/bench_prox_backends.py [--n 60000] [--repeats 50]
"""

import argparse
import json
import os
import subprocess
import sys
import tempfile
import time
from pathlib import Path

import numpy as np


def build_workload(n: int, seed: int = 0):
    """A partition mixing long groups with singletons, plus input values.

    Roughly half the elements sit in groups of 257 (one dense-region delay
    column of a 2K+1 = 257 lattice), the rest are singletons, mirroring how
    the estimator partitions a delay-Doppler lattice.
    """
    rng = np.random.default_rng(seed)
    group_len = 257
    n_long = (n // 2) // group_len
    sizes = [group_len] * n_long
    sizes += [1] * (n - n_long * group_len)
    perm = rng.permutation(n).astype(np.int64)
    starts = np.zeros(len(sizes) + 1, dtype=np.int64)
    starts[1:] = np.cumsum(sizes)
    values = rng.normal(size=n) + 1j * rng.normal(size=n)
    return values, perm, starts


def worker(n: int, repeats: int, out_path: str) -> None:
    from ddsparse.proxops import (
        BACKEND,
        GroupProxParams,
        Regularizer,
        partition_nested_prox,
    )

    values, perm, starts = build_workload(n)
    params = GroupProxParams(lam_group=0.8, lam_elem=0.2, rho=5.0)
    f_e = Regularizer.soft()
    f_g = Regularizer.scad(3.7)

    out = partition_nested_prox(values, perm, starts, params, f_e, f_g)  # warm-up
    t0 = time.perf_counter()
    for _ in range(repeats):
        out = partition_nested_prox(values, perm, starts, params, f_e, f_g)
    per_call = (time.perf_counter() - t0) / repeats

    np.save(out_path, out)
    print(json.dumps({"backend": BACKEND, "per_call_ms": per_call * 1e3}))


def run_backend(name: str, n: int, repeats: int, out_path: Path) -> dict:
    env = dict(os.environ, DDSPARSE_FORCE_BACKEND=name)
    proc = subprocess.run(
        [sys.executable, __file__, "--worker", str(out_path),
         "--n", str(n), "--repeats", str(repeats)],
        env=env, capture_output=True, text=True, check=True,
    )
    report = json.loads(proc.stdout.strip().splitlines()[-1])
    if report["backend"] != name:
        raise RuntimeError(f"asked for {name!r}, got {report['backend']!r}")
    return report


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=60_000, help="number of elements")
    ap.add_argument("--repeats", type=int, default=50, help="timed calls per backend")
    ap.add_argument("--worker", default=None, help=argparse.SUPPRESS)
    args = ap.parse_args(argv)

    if args.worker is not None:
        worker(args.n, args.repeats, args.worker)
        return 0

    import ddsparse.proxops as proxops

    if proxops._compiled is None:
        print("compiled extension not available; nothing to compare")
        return 1

    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        reports = {
            name: run_backend(name, args.n, args.repeats, tmp / f"{name}.npy")
            for name in ("numpy", "compiled")
        }
        a = np.load(tmp / "numpy.npy")
        b = np.load(tmp / "compiled.npy")
        identical = a.shape == b.shape and bool(np.array_equal(a, b))

    t_np = reports["numpy"]["per_call_ms"]
    t_c = reports["compiled"]["per_call_ms"]
    print(f"workload: n={args.n}, repeats={args.repeats}")
    print(f"numpy    backend: {t_np:8.3f} ms/call")
    print(f"compiled backend: {t_c:8.3f} ms/call")
    print(f"speedup: {t_np / t_c:.2f}x")
    print(f"outputs bit-identical: {identical}")
    return 0 if identical else 1


if __name__ == "__main__":
    sys.exit(main())
