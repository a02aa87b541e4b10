"""Noise-regularized orthonormalization with a coherence target.

Plain QR of a spiky block can concentrate basis mass on a few rows.  This
routine retries QR on the block plus Gaussian noise, doubling the noise
scale from zeta * ||S|| / n until either the basis meets the coherence
target or the scale passes ||S||, so it always terminates in about
log2(n / zeta) rounds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import as_block, coherence, qr_orthonormalize
from .spectral import tall_block_spectral_norm

_NORM_ITERS = 50


@dataclass(frozen=True)
class SmoothResult:
    """Outcome of smooth_qr.

    final_sigma is the noise scale used in the last retry (0.0 when the
    initial QR already met the target); iterations counts the initial QR
    plus every noise retry.
    """

    basis: np.ndarray
    final_sigma: float
    met_target: bool
    iterations: int


def smooth_qr(
    s,
    zeta: float,
    mu: float,
    rng: np.random.Generator,
    zero_noise: bool = False,
) -> SmoothResult:
    """Orthonormalize s, adding escalating Gaussian noise until coherence <= mu.

    The noise matrix has independent N(0, sigma^2 / n) entries, redrawn
    fresh at every retry, with sigma starting at zeta * ||s|| / n and
    doubling while coherence stays above mu and sigma <= ||s|| (spectral
    norm, estimated by 50 power-iteration steps).  The last basis is
    returned either way; met_target records whether the target was reached.

    zero_noise is a test hook that forces every noise draw to zero, making
    the output equal plain QR while exercising the looping mechanics.
    """
    s = as_block(s, "smooth_qr input")
    if zeta <= 0.0:
        raise ValueError("zeta must be positive")
    if mu < 1.0:
        raise ValueError("coherence target must be >= 1")
    if not np.any(s):
        raise ValueError("smooth_qr input is identically zero")
    n = s.shape[0]
    norm_est = tall_block_spectral_norm(s, _NORM_ITERS, rng)

    basis = qr_orthonormalize(s, rng).q
    iterations = 1
    sigma = zeta * norm_est / n
    final_sigma = 0.0
    while coherence(basis) > mu and sigma <= norm_est:
        noise = 0.0 if zero_noise else rng.standard_normal(s.shape) * (sigma / np.sqrt(n))
        basis = qr_orthonormalize(s + noise, rng).q
        final_sigma = sigma
        sigma *= 2.0
        iterations += 1
    return SmoothResult(basis, final_sigma, coherence(basis) <= mu, iterations)
