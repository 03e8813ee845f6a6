"""Compare the numba and pure-numpy kernels on the same problems.

Usage::

    python3 benchmarks/bench_kernels.py [--d 100] [--n 50] [--repeat 3]

Each backend is warmed up once, then timed as the best of ``--repeat``
runs. Results agree to round-off; the table reports seconds and speedup.
"""
import argparse
import time

import numpy as np

from jamgraph import BasisSpec, expand, fit, lambda_max, standardize
from jamgraph.dag import dag_lambda_max, fit_dag
from jamgraph.kernels import block_top_singular, joint_objective, joint_sweep
from jamgraph.simulate import simulate
from jamgraph.solver import SolverOptions, SolverState, lex_pairs


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(design, X):
    lam = 0.3 * lambda_max(design, X)
    pairs = lex_pairs(design.d)
    flat = design.psi.transpose(1, 0, 2).reshape(design.n, -1)
    gram = flat.T @ flat / design.n

    def sweep(backend):
        state = SolverState.start(design, X, lam, backend=backend)
        return lambda: joint_sweep(state.psit, state.beta.copy(), state.resid.copy(), lam, pairs, backend)

    def objective(backend):
        state = SolverState.start(design, X, lam, backend=backend)
        return lambda: joint_objective(state.resid, state.beta, lam, backend)

    def full_fit(backend):
        return lambda: fit(design, X, lam, SolverOptions(backend=backend))

    def dag(backend):
        dl = 0.3 * dag_lambda_max(design, X)
        return lambda: fit_dag(design, X, None, dl, SolverOptions(backend=backend))

    def association(backend):
        return lambda: block_top_singular(gram, design.d, design.r, backend)

    return {"one sweep": sweep, "objective": objective, "fit at 0.3 lmax": full_fit,
            "directed fit": dag, "association": association}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--d", type=int, default=100)
    ap.add_argument("--n", type=int, default=50)
    ap.add_argument("--edges", type=int, default=80)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    _, X = simulate(args.d, args.edges, args.n, "cubic", args.seed)
    X = standardize(X)
    design = expand(X, BasisSpec((1, 2, 3)))
    print(f"d={args.d} n={args.n} r=3, best of {args.repeat}")
    print(f"{'kernel':<18}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}")
    for name, make in cases(design, X).items():
        t_nb = best_of(make("numba"), args.repeat)
        t_np = best_of(make("numpy"), args.repeat)
        print(f"{name:<18}{t_nb:>12.4f}{t_np:>12.4f}{t_np / t_nb:>10.1f}")
    a = fit(design, X, 0.3 * lambda_max(design, X), SolverOptions(backend="numba"))
    b = fit(design, X, 0.3 * lambda_max(design, X), SolverOptions(backend="numpy"))
    print(f"max coefficient difference between backends: {np.abs(a.coefficients - b.coefficients).max():.1e}")


if __name__ == "__main__":
    main()
