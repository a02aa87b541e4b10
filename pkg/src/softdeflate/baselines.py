"""Comparison algorithms: Frank-Wolfe completion and naive subsampled SVD.

Frank-Wolfe maintains its iterate as a convex combination of rank-one
terms over the trace-bounded PSD ball, caching the iterate's values on the
observed indices only, so nothing n x n is ever formed.  The naive SVD
baseline is one subspace-iteration pass on the normalized subsample
followed by a single exact multiply.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .linalg import Factors, qr_orthonormalize, sym_eig_small
from .observations import ObservationSet, make_residual_operator
from .spectral import subspace_iteration

DEFAULT_POWER_ITERS = 50
DEFAULT_SVD_ITERS = 100


@dataclass
class RankOneSum:
    """Z = sum_i weights[i] * v_i v_i^T with unit vectors as matrix columns."""

    weights: np.ndarray
    vectors: np.ndarray  # (n, len(weights))

    @property
    def rank(self) -> int:
        return len(self.weights)

    @property
    def weight_sum(self) -> float:
        return float(np.sum(self.weights))

    def values_at(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        left = self.vectors[rows] * self.weights
        return np.einsum("ij,ij->i", left, self.vectors[cols])

    def dense(self) -> np.ndarray:
        """Materialize Z; small-n tests only."""
        return (self.vectors * self.weights) @ self.vectors.T

    def top_basis(self, k: int) -> np.ndarray:
        """Orthonormal basis for the top-k eigendirections of Z."""
        if not 1 <= k <= self.rank:
            raise ValueError(f"need 1 <= k <= {self.rank}")
        q = qr_orthonormalize(self.vectors).q
        core = ((q.T @ self.vectors) * self.weights) @ (self.vectors.T @ q)
        evals, evecs = sym_eig_small(0.5 * (core + core.T))
        return q @ evecs[:, :k]


def _power_candidate(matvec, shift: float, v0: np.ndarray, iters: int) -> np.ndarray:
    v = v0
    for _ in range(iters):
        w = matvec(v) + shift * v
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return v
        v = w / nrm
    return v


def _largest_eigvec(matvec, n: int, iters: int, rng: np.random.Generator) -> np.ndarray:
    """Eigenvector of the algebraically largest eigenvalue of a symmetric map.

    Plain power iteration converges to the dominant-magnitude eigenvalue,
    which may be the most negative one; a second run shifted by the first
    run's magnitude estimate makes every eigenvalue nonnegative so the
    algebraic top wins.  The candidate with the larger Rayleigh quotient is
    returned.
    """
    v0 = rng.standard_normal(n)
    v0 /= np.linalg.norm(v0)
    v1 = _power_candidate(matvec, 0.0, v0, iters)
    rho1 = float(v1 @ matvec(v1))
    v2 = _power_candidate(matvec, abs(rho1), v0, iters)
    rho2 = float(v2 @ matvec(v2))
    return v1 if rho1 >= rho2 else v2


def frank_wolfe(
    obs: ObservationSet,
    eps: float,
    trace_bound: float,
    power_iters: int = DEFAULT_POWER_ITERS,
    rng: np.random.Generator = None,
) -> tuple[RankOneSum, list[float]]:
    """Conditional-gradient completion over the trace-bounded PSD ball.

    Runs ceil(1/eps) iterations.  Each iteration takes w as the top
    eigenvector of the sparse residual on the observed entries (one random
    start vector per iteration, power_iters steps, with a shifted second
    pass to pick the algebraically largest eigenvalue), steps with
    alpha = 1/iteration to Z <- alpha * trace_bound * w w^T + (1-alpha) Z,
    and records the observed-entry objective 0.5 * ||A - Z||^2 afterwards.

    The iterate starts empty: the first step has alpha = 1 and therefore
    fully determines Z from the observations alone.
    """
    if obs.size == 0:
        raise ValueError("frank_wolfe needs at least one observation")
    if not 0.0 < eps <= 1.0:
        raise ValueError("eps must lie in (0, 1]")
    if trace_bound <= 0.0:
        raise ValueError("trace_bound must be positive")
    if rng is None:
        rng = np.random.default_rng(0)
    n = obs.n
    iters = math.ceil(1.0 / eps)
    # CSR skeleton over the observed pattern; entries are stored row-major
    # sorted so the data vector aligns with the canonical entry order.
    indptr, _ = obs.row_groups()
    sparse = sp.csr_matrix(
        (np.zeros(obs.size), obs.cols.copy(), indptr.copy()), shape=(n, n)
    )

    def matvec(v):
        return sparse @ v

    z_vals = np.zeros(obs.size)
    weights: list[float] = []
    columns: list[np.ndarray] = []
    objective: list[float] = []
    for ell in range(1, iters + 1):
        sparse.data[:] = obs.vals - z_vals
        w = _largest_eigvec(matvec, n, power_iters, rng)
        alpha = 1.0 / ell
        weights = [wt * (1.0 - alpha) for wt in weights]
        weights.append(alpha * trace_bound)
        columns.append(w)
        z_vals = (1.0 - alpha) * z_vals + (alpha * trace_bound) * (w[obs.rows] * w[obs.cols])
        objective.append(0.5 * float(np.sum((obs.vals - z_vals) ** 2)))
    return RankOneSum(np.asarray(weights), np.column_stack(columns)), objective


def naive_svd_complete(
    obs: ObservationSet, k: int, iters: int = DEFAULT_SVD_ITERS, rng: np.random.Generator = None
) -> Factors:
    """Rank-k completion by subspace iteration on the normalized subsample.

    X is the returned basis, Y = P_observed(A) @ X, so the model X @ Y.T is
    the subsample projected onto the estimated dominant subspace.  Exact
    when every entry is observed.
    """
    if k < 1:
        raise ValueError("target rank must be >= 1")
    if k > obs.n:
        raise ValueError(f"target rank {k} exceeds dimension {obs.n}")
    if rng is None:
        rng = np.random.default_rng(0)
    op = make_residual_operator(obs)
    estimate = subspace_iteration(op, k, iters, rng)
    return Factors(estimate.basis, op.apply(estimate.basis))
