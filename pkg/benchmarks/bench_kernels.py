"""Time the compiled kernels against the NumPy fallback on identical inputs.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from tdmr import _pykernels, grains
from tdmr.codec import OUTER_CODE
from tdmr.detector import DetectorTables, _y_indices, bit_probabilities

try:
    from tdmr import _ckernels
except ImportError:
    _ckernels = None


def forward_backward_args(cols=512, p2=0.25, seed=0):
    rng = np.random.default_rng(seed)
    dist = grains.solve_grain_distribution(p2)
    tables = DetectorTables.build(dist)
    image = grains.generate_grain_image(dist, 2, cols, seed)
    y = grains.write_bits(image, rng.choice([-1, 1], size=2 * cols)).values
    q0, q1 = bit_probabilities(np.zeros((2, cols)))
    pa = np.stack([q0[0] * q0[1], q0[0] * q1[1], q1[0] * q0[1], q1[0] * q1[1]], axis=1)
    emit = np.einsum("nu,nus->ns", pa, tables.outputs[_y_indices(y)])
    fb_b = np.full(cols, 0.1)
    fb_f = np.full(cols, 0.1)
    fb_n = 1.0 - fb_b - fb_f
    c = tables.coef
    alpha0 = c[0, tables.start] * fb_n[0] + c[1, tables.start] * fb_b[0] + c[2, tables.start] * fb_f[0] \
        + c[3, tables.start]
    return alpha0, emit, fb_n, fb_b, fb_f, c, tables.exit


def conv_bcjr_args(stages=65542, seed=0):
    rng = np.random.default_rng(seed)
    nxt, out = OUTER_CODE._tables
    return nxt, out, rng.normal(0, 2, size=(stages, 2)), np.zeros(stages), True, 100.0


def greedy_tile_args(rows=256, cols=512, p2=0.25, seed=0):
    rng = np.random.default_rng(seed)
    n2, n3, n4 = grains.grain_quota(grains.solve_grain_distribution(p2), rows * cols, rng)
    squares = rng.permutation((rows - 1) * (cols - 1))
    dimers = rng.permutation((rows - 1) * cols + rows * (cols - 1))
    return rows, cols, squares, dimers, n2, n3, n4


def sequential_tile_args(side=16, p2=0.25, seed=0):
    rng = np.random.default_rng(seed)
    n2, n3, n4 = grains.grain_quota(grains.solve_grain_distribution(p2), side * side, rng)
    return side, side, n2, n3, n4, rng.random(grains.DECISION_BUDGET * side * side)


CASES = {
    "forward_backward (2x512 pass)": ("forward_backward", forward_backward_args),
    "conv_bcjr (65542 stages)": ("conv_bcjr", conv_bcjr_args),
    "greedy_tile (256x512)": ("greedy_tile", greedy_tile_args),
    "sequential_tile (16x16)": ("sequential_tile", sequential_tile_args),
}


def best_time(fn, args, repeat):
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)
    backends = [("python", _pykernels)] + ([("cython", _ckernels)] if _ckernels else [])
    header = f"{'kernel':32s}" + "".join(f"{name:>12s}" for name, _ in backends)
    print(header + ("     speedup" if len(backends) == 2 else ""))
    for label, (attr, make) in CASES.items():
        kernel_args = make()
        times = [best_time(getattr(mod, attr), kernel_args, args.repeat) for _, mod in backends]
        line = f"{label:32s}" + "".join(f"{t * 1e3:10.2f}ms" for t in times)
        if len(times) == 2:
            line += f"{times[0] / times[1]:11.1f}x"
        print(line)
    if _ckernels is None:
        print("compiled extension not built; only the fallback was timed")


if __name__ == "__main__":
    main()
