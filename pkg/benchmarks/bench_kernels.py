"""Time the compiled kernels against the NumPy fallback.

Usage::

    python benchmarks/bench_kernels.py [--sizes 32x32x4,256x256x8] [--repeat 200]

Prints one line per (kernel, size, backend) with the median call time and
the speedup of the compiled backend. The last block times a full
``step_adaprelora_sgd`` through each backend.
"""
import argparse
import statistics
import time

import numpy as np

from adaprelora import _backend
from adaprelora.optimizers import OptimizerConfig, step_adaprelora_sgd
from adaprelora.generator import FactorPair


def _parse_sizes(text):
    out = []
    for item in text.split(","):
        m, n, r = (int(x) for x in item.lower().split("x"))
        out.append((m, n, r))
    return out


def _median_ns(fn, repeat):
    fn()  # warm-up
    samples = []
    for _ in range(repeat):
        t0 = time.perf_counter_ns()
        fn()
        samples.append(time.perf_counter_ns() - t0)
    return statistics.median(samples)


def _cases(k, m, n, r, rng):
    G = rng.standard_normal((m, n))
    B = rng.standard_normal((m, r))
    A = rng.standard_normal((r, n))
    lh = rng.uniform(0.5, 2.0, m)
    rh = rng.uniform(0.5, 2.0, n)
    l, rr = np.abs(rng.standard_normal(m)), np.abs(rng.standard_normal(n))
    GB, GA = G @ A.T, B.T @ G
    return {
        "accumulate_stats": lambda: k.accumulate_stats(G, l, rr, 0.98, 0.98),
        "scale_outer": lambda: k.scale_outer(G, lh, rh),
        "weighted_inner": lambda: k.weighted_inner(G, G, lh, rh),
        "factor_grads": lambda: k.factor_grads(G, B, A),
        "closed_form": lambda: k.closed_form(B, A, GB, GA, lh, rh, 1e-6),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="16x16x2,64x64x4,256x256x8")
    parser.add_argument("--repeat", type=int, default=200)
    args = parser.parse_args(argv)

    backends = _backend.available_backends()
    print(f"backends available: {', '.join(backends)}")
    if "cython" not in backends:
        print("compiled extension not built; run `pip install -e . --no-build-isolation` first")
    modules = {name: _backend._load(name) for name in backends}
    sizes = _parse_sizes(args.sizes)

    print(f"{'kernel':<18}{'size':<14}" + "".join(f"{b + ' (us)':>16}" for b in backends) + f"{'speedup':>10}")
    for m, n, r in sizes:
        rng = np.random.default_rng(0)
        timings = {b: {k: _median_ns(fn, args.repeat) for k, fn in _cases(modules[b], m, n, r, rng).items()}
                   for b in backends}
        for kernel in timings[backends[0]]:
            row = [timings[b][kernel] for b in backends]
            speed = f"{row[-1] / row[0]:.2f}x" if len(row) == 2 else ""
            print(f"{kernel:<18}{f'{m}x{n}x{r}':<14}" + "".join(f"{t / 1e3:>16.2f}" for t in row) + f"{speed:>10}")

    print()
    print("full step_adaprelora_sgd")
    cfg = OptimizerConfig(learning_rate=0.01)
    for m, n, r in sizes:
        rng = np.random.default_rng(1)
        fp = FactorPair(rng.standard_normal((m, r)), rng.standard_normal((r, n)))
        G = rng.standard_normal((m, n))
        state = cfg.new_adafactor_state(m, n)
        row = []
        for b in backends:
            prev = _backend.set_backend(b)
            try:
                row.append(_median_ns(lambda: step_adaprelora_sgd(fp, state, G, cfg), args.repeat))
            finally:
                _backend.set_backend(prev)
        speed = f"{row[-1] / row[0]:.2f}x" if len(row) == 2 else ""
        print(f"{'step':<18}{f'{m}x{n}x{r}':<14}" + "".join(f"{t / 1e3:>16.2f}" for t in row) + f"{speed:>10}")


if __name__ == "__main__":
    main()
