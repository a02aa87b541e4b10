"""Smoothed-median alternating least squares over observed entries.

Each iteration draws an independent slice of the observations, solves the
per-column normal equations against the current orthonormal basis on
s_max independent sub-slices, takes the entrywise median of the solutions,
and re-orthonormalizes through the noise-regularized QR.  The output pair
(X, Y) approximates the target as X @ Y.T, where X is the basis the final
least-squares solve was run against.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .linalg import check_basis, coherence, entrywise_median, principal_angle_sin, qr_orthonormalize
from .observations import ObservationSet, split_observations
from .smoothqr import smooth_qr

_COND_LIMIT = 1e12
_EIG_CUTOFF = 1e-10


@dataclass(frozen=True)
class AltLsStep:
    """Diagnostics for one iteration: basis coherence, smoothing outcome,
    normalized training residual, and (when truth is supplied) the angle
    to the planted subspace."""

    iteration: int
    coherence: float
    met_target: bool
    residual_fro: float
    sin_theta: Optional[float] = None


@dataclass
class AltLsReport:
    steps: list[AltLsStep] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.steps)


def ls_solve_block(obs: ObservationSet, basis: np.ndarray) -> np.ndarray:
    """Per-column least squares of the observed entries against a basis.

    Returns the (n, r) block S minimizing
    sum_{(i,j) observed} (A_ij - (R S^T)_ij)^2: row j of S solves the
    r x r system B_j x = sum_i A_ij R_i with B_j = sum_i R_i^T R_i over the
    rows i observed in column j.  The uniform 1/p weight cancels in the
    argmin, so raw values are used.  Columns with fewer observations than
    r, or whose B_j condition estimate exceeds 1e12, fall back to the
    minimum-norm solution through an eigendecomposition with relative
    eigenvalue cutoff 1e-10; unobserved columns come back zero.
    """
    r_mat = check_basis(basis, "basis")
    n, r = r_mat.shape
    if obs.n != n:
        raise ValueError("observation dimension does not match the basis")
    out = np.zeros((n, r))
    if obs.size == 0:
        return out

    indptr, order = obs.col_groups()
    rows_sorted = obs.rows[order]
    vals_sorted = obs.vals[order]
    counts = np.diff(indptr)
    occupied = np.nonzero(counts)[0]
    if occupied.size == 0:
        return out
    starts = indptr[occupied]

    g = r_mat[rows_sorted]
    grams = np.add.reduceat(g[:, :, None] * g[:, None, :], starts, axis=0)
    rhs = np.add.reduceat(g * vals_sorted[:, None], starts, axis=0)

    w, v = np.linalg.eigh(grams)
    wmax = w[:, -1]
    ill = (counts[occupied] < r) | (w[:, 0] <= 0.0) | (w[:, 0] * _COND_LIMIT < wmax)
    cutoff = np.where(ill, _EIG_CUTOFF * np.maximum(wmax, 0.0), -np.inf)
    inv = np.where(w > cutoff[:, None], 1.0 / np.where(w != 0.0, w, 1.0), 0.0)
    coef = np.einsum("cij,ci->cj", v, rhs)
    out[occupied] = np.einsum("cij,cj->ci", v, inv * coef)
    return out


def _residual_fro(obs: ObservationSet, basis: np.ndarray, sol: np.ndarray) -> float:
    resid = obs.vals - np.einsum("ij,ij->i", basis[obs.rows], sol[obs.cols])
    return float(np.linalg.norm(resid) / obs.p)


def smaltls(
    obs: ObservationSet,
    r0: np.ndarray,
    iters: int,
    s_max: int,
    k: int,
    zeta: float,
    mu: float,
    rng: np.random.Generator,
    smoothing: bool = True,
    resample: bool = True,
    truth_basis: Optional[np.ndarray] = None,
    subsplit_hook: Optional[Callable] = None,
) -> tuple[np.ndarray, np.ndarray, AltLsReport]:
    """Run `iters` rounds of median-of-solves alternating least squares.

    The observation set is split into `iters` independent equal-rate sets,
    one per iteration, and each of those into s_max equal-rate sub-sets.
    Per iteration: solve ls_solve_block on every sub-set, take the
    entrywise median, then re-orthonormalize with smooth_qr(zeta, mu)
    (plain QR when smoothing is False).  Returns (X, Y, report) where X is
    the basis entering the final solve and Y the final median solution, so
    X @ Y.T is the model.

    resample=False drops the per-iteration sample split: the set is split
    into s_max subsets once and every iteration reuses them.  Splitting
    fresh per iteration keeps iterations independent (what the convergence
    analysis needs) but divides the per-iteration sampling rate by the
    iteration count; reuse is the practical mode for tight sample budgets.

    subsplit_hook(iteration, subsets) -> subsets is a test hook letting a
    test tamper with the per-iteration sub-splits (e.g. empty one out).
    """
    r_cur = check_basis(r0, "initial basis")
    if r_cur.shape[1] != k:
        raise ValueError(f"initial basis has {r_cur.shape[1]} columns, expected k={k}")
    if r_cur.shape[0] != obs.n:
        raise ValueError("initial basis dimension does not match the observations")
    if iters < 1 or s_max < 1:
        raise ValueError("iteration and trial counts must be >= 1")

    if resample:
        iter_sets = split_observations(obs, [obs.p / iters] * iters, rng)
    else:
        shared_subs = split_observations(obs, [obs.p / s_max] * s_max, rng)
        iter_sets = [None] * iters
    report = AltLsReport()
    x_out = r_cur
    y_out = np.zeros_like(r_cur)
    for ell, omega in enumerate(iter_sets, start=1):
        if omega is None:
            subs = shared_subs
        else:
            subs = split_observations(omega, [omega.p / s_max] * s_max, rng)
        if subsplit_hook is not None:
            subs = subsplit_hook(ell, subs)
        sols = [ls_solve_block(sub, r_cur) for sub in subs]
        s_ell = entrywise_median(sols)
        x_out, y_out = r_cur, s_ell

        if smoothing:
            sm = smooth_qr(s_ell, zeta, mu, rng) if np.any(s_ell) else None
            if sm is None:
                r_new = qr_orthonormalize(s_ell, rng).q
                met = False
            else:
                r_new, met = sm.basis, sm.met_target
        else:
            r_new = qr_orthonormalize(s_ell, rng).q
            met = coherence(r_new) <= mu
        report.steps.append(
            AltLsStep(
                iteration=ell,
                coherence=coherence(r_new),
                met_target=met,
                residual_fro=_residual_fro(obs, x_out, y_out),
                sin_theta=(
                    principal_angle_sin(truth_basis, r_new)
                    if truth_basis is not None and truth_basis.shape == r_new.shape
                    else None
                ),
            )
        )
        r_cur = r_new
    return x_out, y_out, report
