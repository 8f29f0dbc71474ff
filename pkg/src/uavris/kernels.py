"""Backend selection for the rate-evaluation kernels.

``stream_rates`` dominates the solver's inner loops (phase line search,
WMMSE sweeps, master enumeration) and is served by the compiled Cython
backend when built, falling back to pure numpy otherwise.  The effective
channel composition is two small GEMMs and stays on numpy/BLAS in both
cases: hand-written loops only break even below ~8 cells (see
``benchmarks/bench_kernels.py``).
"""


def effective_channels(h_direct, h_ris, phi, h_uav):
    """h_direct + h_ris @ phi @ h_uav, shapes (K,N) + (K,n)(n,n)(n,N)."""
    return h_direct + h_ris @ phi @ h_uav


try:
    from ._kernels_cy import stream_rates

    BACKEND = "cython"
except ImportError:  # pragma: no cover - depends on build environment
    from ._kernels_py import stream_rates

    BACKEND = "python"
