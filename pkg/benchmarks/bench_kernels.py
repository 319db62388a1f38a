"""Time the compiled quilting kernels against the pure-Python fallback.

Both backends expose the same two functions (overlap_ssd, seam_path) and are
bitwise interchangeable on the quantized inputs quilt() feeds them, so the
only question is speed. Run with the package installed:

    python3 benchmarks/bench_kernels.py --pool 2000 --repeats 7
"""

import argparse
import time

import numpy as np

from texhop import _quilt_kernels_py as py_kernels

try:
    from texhop import _quilt_kernels as ext_kernels
except ImportError:
    ext_kernels = None


def best_of(fn, repeats):
    """Minimum wall time over several calls, in seconds."""
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def make_inputs(args):
    rng = np.random.default_rng(args.seed)
    p, ov = args.patch, args.overlap
    pool = np.rint(rng.uniform(0, 255, size=(args.pool, p, p, 3)))
    left = np.ascontiguousarray(np.rint(rng.uniform(0, 255, size=(p, ov, 3))))
    top = np.ascontiguousarray(np.rint(rng.uniform(0, 255, size=(ov, p, 3))))
    surface = np.ascontiguousarray(rng.uniform(0, 1000, size=(args.rows, ov)))
    return np.ascontiguousarray(pool), left, top, surface


def run(args):
    pool, left, top, surface = make_inputs(args)
    cases = {
        "overlap_ssd": lambda k: k.overlap_ssd(pool, left, top, True, True, args.overlap),
        "seam_path": lambda k: k.seam_path(surface),
    }

    backends = [("python", py_kernels)]
    if ext_kernels is not None:
        backends.append(("compiled", ext_kernels))
    else:
        print("note: compiled extension not importable; timing the fallback only")

    print(
        f"pool={args.pool} patch={args.patch} overlap={args.overlap} "
        f"surface={args.rows}x{args.overlap} repeats={args.repeats}"
    )
    header = f"{'kernel':<14}" + "".join(f"{name:>14}" for name, _ in backends)
    if ext_kernels is not None:
        header += f"{'speedup':>10}"
    print(header)
    for case, call in cases.items():
        times = [best_of(lambda k=k: call(k), args.repeats) for _, k in backends]
        row = f"{case:<14}" + "".join(f"{t * 1e3:>11.3f} ms" for t in times)
        if len(times) == 2:
            row += f"{times[0] / times[1]:>9.1f}x"
        print(row)

    if ext_kernels is not None:
        got = ext_kernels.overlap_ssd(pool, left, top, True, True, args.overlap)
        want = py_kernels.overlap_ssd(pool, left, top, True, True, args.overlap)
        assert np.array_equal(got, want), "backends disagree on integer-valued input"
        assert np.array_equal(ext_kernels.seam_path(surface), py_kernels.seam_path(surface))
        print("agreement check: identical outputs from both backends")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--pool", type=int, default=2000, help="candidate patches per placement")
    parser.add_argument("--patch", type=int, default=32)
    parser.add_argument("--overlap", type=int, default=5)
    parser.add_argument("--rows", type=int, default=256, help="seam surface height")
    parser.add_argument("--repeats", type=int, default=7)
    parser.add_argument("--seed", type=int, default=0)
    run(parser.parse_args())


if __name__ == "__main__":
    main()
