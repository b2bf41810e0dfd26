"""Benchmark the compiled kernels against the NumPy fallback.

Times the two hot loops (per-component log-densities and the fused mixture
log-density) and one end-to-end EM fit per backend. Run from the repo
root:

    python benchmarks/bench_kernels.py
"""

import os
import subprocess
import sys
import time

import numpy as np


def _time(fn, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernels():
    from hybridclust import _kernels_py

    try:
        from hybridclust import _kernels
    except ImportError:
        print("compiled extension not built; only the NumPy backend is available")
        return

    rng = np.random.default_rng(0)
    n, K, d = 200_000, 8, 2
    points = rng.standard_normal((n, d))
    means = rng.standard_normal((K, d)) * 5
    inv_chols = np.tile(np.eye(d), (K, 1, 1))
    log_norms = np.full(K, -0.5 * d * np.log(2 * np.pi))
    log_coefs = np.log(np.full(K, 1.0 / K))

    rows = []
    for name, args in [
        ("component_logpdfs", (points, means, inv_chols, log_norms)),
        ("mixture_logpdf", (points, means, inv_chols, log_norms, log_coefs)),
    ]:
        t_py = _time(lambda: getattr(_kernels_py, name)(*args))
        t_c = _time(lambda: getattr(_kernels, name)(*args))
        ref = getattr(_kernels_py, name)(*args)
        got = getattr(_kernels, name)(*args)
        assert np.allclose(ref, got, rtol=1e-12), name
        rows.append((f"{name} (n={n}, K={K}, d={d})", t_py, t_c))

    print(f"{'kernel':44s} {'numpy':>10s} {'compiled':>10s} {'speedup':>8s}")
    for label, t_py, t_c in rows:
        print(f"{label:44s} {t_py*1e3:9.2f}ms {t_c*1e3:9.2f}ms {t_py/t_c:7.1f}x")


def bench_em():
    """Full em_fit under each backend, in subprocesses so the import-time
    backend choice is honoured."""
    code = (
        "import numpy as np, time;"
        "from hybridclust.mixture import em_fit;"
        "import hybridclust;"
        "rng = np.random.default_rng(0);"
        "X = np.concatenate([rng.standard_normal((250, 2)) + mu for mu in ([0,0],[8,0],[4,7])]);"
        "t0 = time.perf_counter();"
        "m = em_fit(X, 8, 0);"
        "print(hybridclust.kernel_backend, time.perf_counter() - t0, m.log_likelihood)"
    )
    results = {}
    for env_val in ("", "1"):
        env = dict(os.environ)
        if env_val:
            env["HYBRIDCLUST_PURE"] = env_val
        else:
            env.pop("HYBRIDCLUST_PURE", None)
        out = subprocess.run(
            [sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True
        ).stdout.split()
        results[out[0]] = (float(out[1]), float(out[2]))
    print(f"\n{'em_fit (n=750, K=8, d=2, 10 restarts)':44s} {'numpy':>10s} {'compiled':>10s} {'speedup':>8s}")
    if "compiled" in results and "python" in results:
        t_py, ll_py = results["python"]
        t_c, ll_c = results["compiled"]
        assert abs(ll_py - ll_c) < 1e-6 * abs(ll_py), "backends disagree on the fit"
        print(f"{'':44s} {t_py:9.2f}s  {t_c:9.2f}s  {t_py/t_c:7.1f}x")
    else:
        for name, (t, _) in results.items():
            print(f"  {name}: {t:.2f}s")


if __name__ == "__main__":
    bench_kernels()
    bench_em()
