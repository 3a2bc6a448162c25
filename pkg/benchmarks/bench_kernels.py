"""Benchmark the compiled stepping kernel against its pure-Python mirror.

Runs the scalar relaxation loop (the hot path of material-point evolutions)
through both backends with identical inputs and reports per-step timings.
The two implementations execute the same operation order, so the final
states must agree bit-for-bit; the benchmark asserts that before timing.

Usage:
    python benchmarks/bench_kernels.py [--steps 3000] [--repeats 5]
"""

import argparse
import time

import numpy as np

from visco_pt import Loading, MaterialModel, State, _kernels_py, kernels
from visco_pt.domain import incremental_hessian_diag


def run_relaxation(impl, model, f_vi0, tau, n_steps):
    """March the zero-load relaxation with one backend; returns (F, Fv, iters)."""
    loading = Loading()
    F = Fv = f_vi0
    total_iters = 0
    for i in range(n_steps):
        old = State.material_point(F, Fv)
        diag = incremental_hessian_diag(model, old, old, loading, 0.0, tau)
        F, Fv, _, _, iters, status = impl.mp_minimize(
            model.c_e, model.a4, model.c_v, model.d_v, model.p_psi,
            model.k_radius, 0.0, F, Fv, Fv, tau,
            1.0 / diag[0], 1.0 / diag[1],
            1e-10, 10000, 1e-4, 0.5,
        )
        if status not in (0, 1):
            raise RuntimeError(f"backend {impl.BACKEND} failed at step {i}: {status}")
        total_iters += iters
    return F, Fv, total_iters


def time_backend(impl, model, args):
    best = float("inf")
    for _ in range(args.repeats):
        start = time.perf_counter()
        F, Fv, iters = run_relaxation(impl, model, args.f_vi0, args.tau, args.steps)
        best = min(best, time.perf_counter() - start)
    return best, F, Fv, iters


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--steps", type=int, default=3000)
    parser.add_argument("--tau", type=float, default=1e-3)
    parser.add_argument("--f-vi0", type=float, default=1.5)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    model = MaterialModel()
    impls = [("python", _kernels_py)]
    if kernels.BACKEND == "compiled":
        impls.insert(0, ("compiled", kernels))
    else:
        print("compiled kernel not available; timing the python backend only")

    results = {}
    for name, impl in impls:
        seconds, F, Fv, iters = time_backend(impl, model, args)
        results[name] = (seconds, F, Fv, iters)
        per_step = 1e6 * seconds / args.steps
        print(
            f"{name:>9}: {seconds:8.4f} s  ({per_step:8.2f} us/step, "
            f"{iters} solver iterations, F_vi({args.steps * args.tau:g}) = {Fv:.12f})"
        )

    if len(results) == 2:
        (sc, fc, fvc, ic), (sp, fp, fvp, ip) = results["compiled"], results["python"]
        if not (fc == fp and fvc == fvp and ic == ip):
            raise SystemExit("backends disagree - investigate before trusting timings")
        print(f"  parity: exact ({ic} iterations each)")
        print(f" speedup: {sp / sc:.1f}x")


if __name__ == "__main__":
    main()
