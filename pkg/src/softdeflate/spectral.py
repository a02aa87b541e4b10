"""Subspace iteration and power-method norm estimation on implicit operators.

Operators can be dense symmetric ndarrays, ImplicitOperator instances, or
any object exposing .apply(block) and .n.  The iteration orthonormalizes
after every multiply and reads the singular-value estimates off the final
orthonormal columns, so the estimates are Rayleigh-style and can never
exceed the true operator norm.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .linalg import as_block, qr_orthonormalize


class SpectralEstimate(NamedTuple):
    """Orthonormal basis for an estimated dominant subspace plus its sigmas."""

    basis: np.ndarray
    sigmas: np.ndarray


class _DenseOp:
    __slots__ = ("mat", "n")

    def __init__(self, mat: np.ndarray):
        mat = np.asarray(mat, dtype=np.float64)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"dense operator must be square, got {mat.shape}")
        self.mat = mat
        self.n = mat.shape[0]

    def apply(self, v):
        return self.mat @ v


def as_operator(op):
    """Wrap dense arrays; pass through anything with .apply and .n."""
    if hasattr(op, "apply") and hasattr(op, "n"):
        return op
    return _DenseOp(op)


def subspace_iteration(op, k: int, iters: int, rng: np.random.Generator) -> SpectralEstimate:
    """Estimate the top-k spectrum of a symmetric-intent operator.

    Starts from a random orthonormal n x k block; repeats R <- op @ S,
    S <- QR(R) for `iters` rounds; then estimates sigma_i = ||op @ s_i||_2
    on the final orthonormalized columns and returns them sorted descending
    (columns reordered to match).
    """
    op = as_operator(op)
    n = op.n
    if k < 1:
        raise ValueError("target rank must be >= 1")
    if k > n:
        raise ValueError(f"target rank {k} exceeds dimension {n}")
    if iters < 1:
        raise ValueError("iteration count must be >= 1")
    s = qr_orthonormalize(rng.standard_normal((n, k)), rng).q
    for _ in range(iters):
        r = op.apply(s)
        s = qr_orthonormalize(r, rng).q
    prods = op.apply(s)
    sigmas = np.linalg.norm(prods, axis=0)
    order = np.argsort(-sigmas, kind="stable")
    return SpectralEstimate(s[:, order], sigmas[order])


def spectral_norm(op, iters: int, rng: np.random.Generator) -> float:
    """Power-iteration estimate of ||op||_2 from a single random start.

    Runs `iters` normalized iterations and returns ||op @ v||_2 at the
    final iterate; underestimates the true norm by at most the usual
    (1 - gap)^iters factor on gapped operators.
    """
    op = as_operator(op)
    if iters < 1:
        raise ValueError("iteration count must be >= 1")
    v = rng.standard_normal(op.n)
    nrm = np.linalg.norm(v)
    if nrm == 0.0:
        return 0.0
    v /= nrm
    for _ in range(iters):
        w = np.asarray(op.apply(v)).reshape(-1)
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0
        v = w / nrm
    return float(np.linalg.norm(np.asarray(op.apply(v)).reshape(-1)))


def tall_block_spectral_norm(s, iters: int = 50, rng=None) -> float:
    """Spectral norm of an (n, r) block via power iteration on its r x r Gram.

    The Gram matrix is formed once (O(n r^2)); the returned value is
    sqrt of the Gram's dominant eigenvalue estimate.
    """
    s = as_block(s, "block")
    gram = s.T @ s
    if rng is None:
        rng = np.random.default_rng(0)
    return float(np.sqrt(max(0.0, spectral_norm(gram, iters, rng))))
