"""Compare the numba and numpy kernels on large memories.

    python3 benchmarks/bench_kernels.py [--cells 1000000] [--width 32] [--repeat 20]

Both backends run the same inputs and their results are checked for
agreement before timing.
"""

import argparse
import timeit

import numpy as np

from capp_emu import kernels


def make_inputs(rng, cells, width):
    nbytes = width // 8
    return (
        rng.integers(0, 256, (cells, nbytes), dtype=np.uint8),
        rng.random(cells) < 0.5,
        rng.integers(0, 256, nbytes, dtype=np.uint8),
        rng.integers(0, 256, nbytes, dtype=np.uint8),
    )


def workloads(impl, cells, tags, comparand, mask):
    out = np.zeros(cells.shape[1], dtype=np.uint8)
    return {
        "search_pulse": lambda: impl.search_pulse(cells, tags.copy(), comparand, mask),
        "write_parallel": lambda: impl.write_parallel(cells.copy(), tags, comparand, mask),
        "read_or": lambda: impl.read_or(cells, tags, out),
        "select_first": lambda: impl.select_first(tags.copy()),
    }


def check_agreement(inputs):
    cells, tags, comparand, mask = inputs
    results = []
    for impl in (kernels.numpy_impl, kernels.numba_impl):
        c, t, out = cells.copy(), tags.copy(), np.zeros(cells.shape[1], np.uint8)
        impl.search_pulse(c, t, comparand, mask)
        impl.read_or(c, t, out)
        impl.write_parallel(c, t, comparand, mask)
        first = impl.select_first(t)
        results.append((c.tobytes(), t.tobytes(), out.tobytes(), first))
    if results[0] != results[1]:
        raise SystemExit("backends disagree")


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--cells", type=int, default=1_000_000)
    parser.add_argument("--width", type=int, default=32)
    parser.add_argument("--repeat", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    inputs = make_inputs(np.random.default_rng(args.seed), args.cells, args.width)
    check_agreement(inputs)  # also triggers JIT compilation
    backends = {"numpy": kernels.numpy_impl, "numba": kernels.numba_impl}
    print(f"{args.width}-bit words, {args.cells} cells, best of {args.repeat} runs (ms)")
    print(f"{'kernel':<16}{'numpy':>10}{'numba':>10}{'speedup':>10}")
    for name in workloads(kernels.numpy_impl, *inputs):
        best = {}
        for label, impl in backends.items():
            fn = workloads(impl, *inputs)[name]
            best[label] = min(timeit.repeat(fn, number=1, repeat=args.repeat)) * 1e3
        ratio = best["numpy"] / best["numba"]
        print(f"{name:<16}{best['numpy']:>10.3f}{best['numba']:>10.3f}{ratio:>9.1f}x")


if __name__ == "__main__":
    main()
