"""Compare the compiled kernels with the pure-Python fallback.

Run with ``python3 benchmarks/bench_kernels.py``. Prints the median wall time
of each kernel on both backends and checks that their outputs agree.
"""
import argparse
import timeit

import numpy as np

from spectral_flow_lab.kernels import _fallback

try:
    from spectral_flow_lab.kernels import _ckernels
except ImportError:
    _ckernels = None


def random_unitaries(n, dim, rng):
    m = rng.normal(size=(n, dim, dim)) + 1j * rng.normal(size=(n, dim, dim))
    q, _ = np.linalg.qr(m)
    return np.ascontiguousarray(q)


def phase_walk(n, rng):
    steps = rng.normal(scale=0.05, size=(n, 2))
    theta = np.cumsum(steps, axis=0) + np.array([0.0, 2.0])
    return np.exp(1j * theta)


def bench(fn, args, repeat):
    times = timeit.repeat(lambda: fn(*args), number=1, repeat=repeat)
    return float(np.median(times))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--steps", type=int, default=10_000)
    parser.add_argument("--dim", type=int, default=2)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    rng = np.random.default_rng(0)
    factors = random_unitaries(args.steps, args.dim, rng)
    ev = phase_walk(args.steps, rng)
    cases = [
        ("ordered_product", (factors,)),
        ("track_phases", (ev,)),
    ]
    backends = [("fallback", _fallback)]
    if _ckernels is not None:
        backends.append(("cython", _ckernels))
    else:
        print("compiled kernels not built; timing the fallback only")
    print(f"{'kernel':<18}{'backend':<10}{'median [s]':>12}{'speedup':>10}")
    for name, inputs in cases:
        base = None
        outputs = []
        for label, mod in backends:
            fn = getattr(mod, name)
            t = bench(fn, inputs, args.repeat)
            base = t if base is None else base
            outputs.append(fn(*inputs))
            print(f"{name:<18}{label:<10}{t:>12.4e}{base / t:>10.1f}")
        if len(outputs) == 2:
            a, b = outputs
            a = a[0] if isinstance(a, tuple) else a
            b = b[0] if isinstance(b, tuple) else b
            print(f"{'':<18}max |cython - fallback| = {np.max(np.abs(a - b)):.2e}")


if __name__ == "__main__":
    main()
