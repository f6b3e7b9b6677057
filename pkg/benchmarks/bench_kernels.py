"""Compare the numba and numpy kernel backends.

Times each hot kernel on a 3D grid-sized batch, checks that the two
backends agree, and prints a table. Usage:

    python3 benchmarks/bench_kernels.py [--points N] [--n 3] [--repeat 5]
"""
import argparse
import time

import numpy as np

from khessian._kernels import get_backend


def make_inputs(points, n, seed=0):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(points, n, n))
    h = 0.5 * (A + A.transpose(0, 2, 1))
    B = rng.normal(size=(points, n, n)) * 0.2
    g = np.eye(n) + np.einsum("aij,akj->aik", B, B)
    lam = rng.uniform(-1.0, 3.0, size=(points, n))
    return h, g, lam


def pipeline(be, h, g, k):
    """One operator evaluation: eigenpairs, sigma_k and the derivative tensor."""
    lam, W = be.pencil_eig(h, g)
    be.elem_sym(lam, k)
    return be.spectral_grad(W, be.elem_sym_deleted(lam, k - 1))


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--points", type=int, default=33**3)
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)

    h, g, lam = make_inputs(args.points, args.n)
    nb, npy = get_backend("numba"), get_backend("numpy")
    ev, W = npy.pencil_eig(h, g)
    d = np.abs(lam)

    cases = {
        "elem_sym": lambda be: be.elem_sym(lam, args.k),
        "elem_sym_deleted": lambda be: be.elem_sym_deleted(lam, args.k - 1),
        "pencil_eig": lambda be: be.pencil_eig(h, g)[0],
        "spectral_grad": lambda be: be.spectral_grad(W, d),
        "pipeline": lambda be: pipeline(be, h, g, args.k),
    }
    print(f"points={args.points} n={args.n} k={args.k} repeat={args.repeat}")
    print(f"{'kernel':<18}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}{'max diff':>12}")
    for name, fn in cases.items():
        ref = fn(npy)
        out = fn(nb)  # first call compiles or loads the cache
        diff = float(np.max(np.abs(out - ref)))
        t_np = best_of(lambda: fn(npy), args.repeat)
        t_nb = best_of(lambda: fn(nb), args.repeat)
        print(f"{name:<18}{1e3 * t_np:>12.2f}{1e3 * t_nb:>12.2f}{t_np / t_nb:>10.1f}{diff:>12.2e}")


if __name__ == "__main__":
    main()
