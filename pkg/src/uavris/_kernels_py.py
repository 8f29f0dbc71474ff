"""Pure-numpy backend for the hot rate kernel.

Same contract as the compiled backend in ``_kernels_cy``; see ``kernels``.
"""

import numpy as np


def stream_rates(heff, precoders, noise_w):
    """Per-user SINRs and spectral efficiencies for one group.

    heff      : (K, N) effective channel rows.
    precoders : (N, K+1); column 0 is the common stream, column 1+k the
                private stream of user k.
    noise_w   : noise power (positive).

    Returns (gamma_c, gamma_p, rate_c, rate_p), each shape (K,).  The common
    stream is decoded first treating all private streams as noise; private
    streams see only the other users' private streams.
    """
    a = heff @ precoders
    p = a.real**2 + a.imag**2
    p_common = p[:, 0]
    p_priv = p[:, 1:]
    total_priv = p_priv.sum(axis=1)
    own = np.diagonal(p_priv).copy()
    interference = np.maximum(total_priv - own, 0.0)  # guard cancellation
    gamma_c = p_common / (total_priv + noise_w)
    gamma_p = own / (interference + noise_w)
    return gamma_c, gamma_p, np.log2(1.0 + gamma_c), np.log2(1.0 + gamma_p)
