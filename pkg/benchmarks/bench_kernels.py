"""Compare the compiled rate kernels against the pure-numpy fallback.

The two functions benchmarked here sit in the innermost loops of the phase
line search, the WMMSE sweeps and the master-problem enumeration; the
compiled backend mainly removes per-call dispatch overhead on the small
matrices involved.

Usage: python benchmarks/bench_kernels.py [--repeats N]
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from uavris import _kernels_py

try:
    from uavris import _kernels_cy
except ImportError:
    _kernels_cy = None

# (users, antennas, cluster cells): desk scale, mid scale, paper scale
SIZES = [(2, 2, 8), (2, 4, 32), (2, 4, 128), (4, 8, 128)]


def _instance(k, n, cells, rng):
    z = lambda *s: rng.standard_normal(s) + 1j * rng.standard_normal(s)
    return {
        "h_direct": z(k, n),
        "h_ris": z(k, cells),
        "phi": z(cells, cells),
        "h_uav": z(cells, n),
        "heff": z(k, n),
        "t": z(n, k + 1),
    }


def _time(fn, repeats) -> float:
    # best-of-5 timing, microseconds per call
    loops = max(1, int(200_000 / repeats))
    return min(timeit.repeat(fn, number=loops, repeat=5)) / loops * 1e6


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=200, help="timing granularity")
    args = parser.parse_args()

    if _kernels_cy is None:
        print("compiled backend not built; run pip install -e . --no-build-isolation")
    rng = np.random.default_rng(0)
    header = f"{'kernel':<20} {'K':>2} {'N':>2} {'n':>4} {'python us':>10} {'cython us':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for k, n, cells in SIZES:
        inst = _instance(k, n, cells, rng)
        for name, call in (
            ("effective_channels", lambda m: m.effective_channels(inst["h_direct"], inst["h_ris"], inst["phi"], inst["h_uav"])),
            ("stream_rates", lambda m: m.stream_rates(inst["heff"], inst["t"], 1e-3)),
        ):
            t_py = _time(lambda: call(_kernels_py), args.repeats)
            if _kernels_cy is not None:
                ref = call(_kernels_py)
                got = call(_kernels_cy)
                for a, b in zip(np.atleast_1d(ref), np.atleast_1d(got)):
                    np.testing.assert_allclose(a, b, rtol=1e-12)
                t_cy = _time(lambda: call(_kernels_cy), args.repeats)
                print(f"{name:<20} {k:>2} {n:>2} {cells:>4} {t_py:>10.2f} {t_cy:>10.2f} {t_py / t_cy:>7.1f}x")
            else:
                print(f"{name:<20} {k:>2} {n:>2} {cells:>4} {t_py:>10.2f} {'-':>10} {'-':>8}")


if __name__ == "__main__":
    main()
