"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N]

Both backends are checked for identical output before timing.
"""

import argparse
import timeit

import numpy as np

from nemakit.engine import kernels

# (label, input shape, kernel, stride, padding) at the sizes a 64 px run sees
CONV_CASES = [
    ("stem 7x7/2", (8, 3, 64, 64), 7, 2, 3),
    ("dense 3x3", (8, 32, 16, 16), 3, 1, 1),
    ("inception 1x7", (8, 24, 8, 8), (1, 7), 1, (0, 3)),
]
POOL_CASES = [
    ("stem max 3/2", (8, 16, 32, 32), 3, 2, 1),
    ("branch max 3/1", (8, 32, 8, 8), 3, 1, 1),
]


def _pair(v):
    return v if isinstance(v, tuple) else (v, v)


def bench(repeat: int) -> list[tuple[str, str, float, float]]:
    backends = {name: kernels.load_backend(name) for name in kernels.available_backends()}
    if "cython" not in backends:
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation`")
    py, cy = backends["python"], backends["cython"]
    rng = np.random.default_rng(0)
    rows = []

    for label, shape, k, stride, pad in CONV_CASES:
        (kh, kw), (ph, pw) = _pair(k), _pair(pad)
        x = rng.standard_normal(shape).astype(np.float32)
        cols = py.im2col(x, kh, kw, stride, ph, pw)
        np.testing.assert_array_equal(cols, cy.im2col(x, kh, kw, stride, ph, pw))
        np.testing.assert_allclose(py.col2im(cols, shape, kh, kw, stride, ph, pw),
                                   cy.col2im(cols, shape, kh, kw, stride, ph, pw), rtol=1e-5, atol=1e-5)
        for op, fn in (("im2col", lambda m: m.im2col(x, kh, kw, stride, ph, pw)),
                       ("col2im", lambda m: m.col2im(cols, shape, kh, kw, stride, ph, pw))):
            t_py = min(timeit.repeat(lambda: fn(py), number=1, repeat=repeat))
            t_cy = min(timeit.repeat(lambda: fn(cy), number=1, repeat=repeat))
            rows.append((f"{op} {label}", str(shape), t_py, t_cy))

    for label, shape, k, stride, pad in POOL_CASES:
        x = rng.standard_normal(shape).astype(np.float32)
        out_py, idx_py = py.maxpool_forward(x, k, stride, pad)
        out_cy, idx_cy = cy.maxpool_forward(x, k, stride, pad)
        np.testing.assert_array_equal(out_py, out_cy)
        np.testing.assert_array_equal(idx_py, idx_cy)
        g = rng.standard_normal(out_py.shape).astype(np.float32)
        for op, fn in (("maxpool fwd", lambda m: m.maxpool_forward(x, k, stride, pad)),
                       ("maxpool bwd", lambda m: m.maxpool_backward(g, idx_py, shape))):
            t_py = min(timeit.repeat(lambda: fn(py), number=1, repeat=repeat))
            t_cy = min(timeit.repeat(lambda: fn(cy), number=1, repeat=repeat))
            rows.append((f"{op} {label}", str(shape), t_py, t_cy))
    return rows


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args()
    rows = bench(args.repeat)
    print(f"{'kernel':<30} {'input':<20} {'numpy ms':>10} {'cython ms':>10} {'speedup':>8}")
    for name, shape, t_py, t_cy in rows:
        print(f"{name:<30} {shape:<20} {1e3 * t_py:>10.3f} {1e3 * t_cy:>10.3f} {t_py / t_cy:>7.2f}x")


if __name__ == "__main__":
    main()
