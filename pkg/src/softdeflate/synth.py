"""Planted low-rank instances, their entry oracles, and evaluation metrics.

A planted instance is A = U diag(sigmas) U^T + N with a random incoherent
basis U and optional symmetric noise N generated orthogonal to U on both
sides, so the low-rank part stays the exact best rank-k approximation.
Noise is kept in factored eigenform (Z, d) so entry reads cost O(k + q)
and nothing n x n is ever materialized outside of small-n test helpers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .linalg import Factors, check_basis, coherence, principal_angle_sin, qr_orthonormalize

_GAMMA_FLOOR_FACTOR = 4  # gap qualification threshold is 1 / (4 k)


def spectrum_gaps(sigmas: Sequence[float]) -> tuple[list[float], float, float]:
    """Ratio gaps of a descending positive spectrum.

    Returns (gap_list, gamma, gamma_star): gap_list[r] = 1 - s_{r+2}/s_{r+1}
    for consecutive pairs inside the given spectrum; gamma is the smallest
    listed gap that is at least 1/(4k), falling back to 1/(4k) when no gap
    qualifies; gamma_star = min(gamma, gamma_k) with the trailing gap
    gamma_k computed against sigma_{k+1} = 0 (so 1 for an exact-rank
    spectrum).
    """
    s = np.asarray(sigmas, dtype=np.float64)
    if s.ndim != 1 or s.size == 0:
        raise ValueError("spectrum must be a nonempty 1-d sequence")
    if np.any(s <= 0.0):
        raise ValueError("spectrum entries must be positive")
    if np.any(np.diff(s) > 0.0):
        raise ValueError("spectrum must be nonincreasing")
    k = s.size
    gap_list = [float(1.0 - s[r + 1] / s[r]) for r in range(k - 1)]
    floor = 1.0 / (_GAMMA_FLOOR_FACTOR * k)
    qualifying = [g for g in gap_list if g >= floor]
    gamma = min(qualifying) if qualifying else floor
    gamma_k = 1.0
    return gap_list, float(gamma), float(min(gamma, gamma_k))


@dataclass(frozen=True)
class SpectrumSpec:
    """Ordered singular values with their derived ratio-gap quantities."""

    sigmas: tuple[float, ...]

    def __post_init__(self):
        gaps, gamma, gamma_star = spectrum_gaps(self.sigmas)
        object.__setattr__(self, "sigmas", tuple(float(s) for s in self.sigmas))
        object.__setattr__(self, "_gaps", gaps)
        object.__setattr__(self, "_gamma", gamma)
        object.__setattr__(self, "_gamma_star", gamma_star)

    @property
    def k(self) -> int:
        return len(self.sigmas)

    @property
    def gap_list(self) -> list[float]:
        return list(self._gaps)

    @property
    def gamma(self) -> float:
        return self._gamma

    @property
    def gamma_star(self) -> float:
        return self._gamma_star


def _as_spectrum(spectrum) -> SpectrumSpec:
    if isinstance(spectrum, SpectrumSpec):
        return spectrum
    return SpectrumSpec(tuple(float(s) for s in spectrum))


@dataclass
class PlantedInstance:
    """Symmetric planted matrix with known factors and implicit noise.

    noise_basis/noise_evals hold the eigenform of N (empty when noise-free);
    N is orthogonal to the column space of U on both sides by construction.
    """

    n: int
    u: np.ndarray
    spectrum: SpectrumSpec
    noise_basis: np.ndarray
    noise_evals: np.ndarray
    _row_scratch: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def k(self) -> int:
        return self.spectrum.k

    @property
    def sigmas(self) -> np.ndarray:
        return np.asarray(self.spectrum.sigmas)

    @property
    def sigma1(self) -> float:
        return self.spectrum.sigmas[0]

    @property
    def noise_fro(self) -> float:
        return float(np.linalg.norm(self.noise_evals))

    @property
    def noise_spectral(self) -> float:
        return float(np.max(np.abs(self.noise_evals), initial=0.0))

    @property
    def fro_norm(self) -> float:
        # M and N live on orthogonal column spaces, so norms add in squares.
        return float(np.sqrt(np.sum(self.sigmas**2) + np.sum(self.noise_evals**2)))

    @property
    def nuclear_norm(self) -> float:
        return float(np.sum(self.sigmas) + np.sum(np.abs(self.noise_evals)))

    def entry_oracle(self, i, j):
        """A_ij for scalar or array index arguments, O(k + noise rank) each."""
        i = np.asarray(i, dtype=np.int64)
        j = np.asarray(j, dtype=np.int64)
        scalar = i.ndim == 0 and j.ndim == 0
        ui = self.u[i] * self.sigmas
        out = np.einsum("...k,...k->...", ui, self.u[j])
        if self.noise_evals.size:
            zi = self.noise_basis[i] * self.noise_evals
            out = out + np.einsum("...k,...k->...", zi, self.noise_basis[j])
        return float(out) if scalar else out

    def apply(self, v: np.ndarray) -> np.ndarray:
        """A @ v through the factored form."""
        v = np.asarray(v, dtype=np.float64)
        block = v[:, None] if v.ndim == 1 else v
        out = self.u @ (self.sigmas[:, None] * (self.u.T @ block))
        if self.noise_evals.size:
            out = out + self.noise_basis @ (
                self.noise_evals[:, None] * (self.noise_basis.T @ block)
            )
        return out[:, 0] if v.ndim == 1 else out

    def dense(self) -> np.ndarray:
        """Materialize A; intended for small-n tests only."""
        a = (self.u * self.sigmas) @ self.u.T
        if self.noise_evals.size:
            a = a + (self.noise_basis * self.noise_evals) @ self.noise_basis.T
        return a

    @cached_property
    def mu_u(self) -> float:
        return coherence(self.u)

    @cached_property
    def mu_n(self) -> float:
        """Noise incoherence: the smallest mu making both row-norm and
        entrywise bounds on N hold (0 for noise-free instances)."""
        if not self.noise_evals.size:
            return 0.0
        # With orthonormal Z and N = Z diag(d) Z^T: ||e_i^T N||^2 = ||d * Z_i||^2.
        scaled = self.noise_basis * self.noise_evals
        row_norms_sq = np.einsum("ij,ij->i", scaled, scaled)
        fro_sq = float(np.sum(self.noise_evals**2))
        sigma_k = self.spectrum.sigmas[-1]
        denom = min(fro_sq, sigma_k**2)
        mu_rows = self.n * float(np.max(row_norms_sq)) / denom
        max_abs = 0.0
        chunk = 512
        for start in range(0, self.n, chunk):
            block = scaled[start : start + chunk] @ self.noise_basis.T
            max_abs = max(max_abs, float(np.max(np.abs(block))))
        mu_entry = self.n * max_abs / np.sqrt(fro_sq)
        return float(max(mu_rows, mu_entry))


def gen_planted(
    n: int,
    spectrum,
    noise_frobenius: float,
    rng: np.random.Generator,
    noise_rank: Optional[int] = None,
    dense_noise: bool = False,
) -> PlantedInstance:
    """Generate A = U diag(sigmas) U^T + N with U a random n x k basis.

    Noise, when requested, is a symmetric Gaussian matrix projected onto
    the complement of span(U) on both sides and rescaled to the target
    Frobenius norm.  By default it is built from 2 * noise_rank Gaussian
    directions (noise_rank defaults to 2k) so the entry oracle stays cheap;
    dense_noise=True instead projects a full symmetric Gaussian matrix and
    is meant for small-n tests.
    """
    spectrum = _as_spectrum(spectrum)
    k = spectrum.k
    if k > n:
        raise ValueError(f"rank {k} exceeds dimension {n}")
    if noise_frobenius < 0.0:
        raise ValueError("noise_frobenius must be nonnegative")
    u = qr_orthonormalize(rng.standard_normal((n, k)), rng).q

    if noise_frobenius == 0.0:
        return PlantedInstance(n, u, spectrum, np.empty((n, 0)), np.empty(0))

    if dense_noise:
        g = rng.standard_normal((n, n))
        sym = 0.5 * (g + g.T)
        sym -= u @ (u.T @ sym)
        sym -= (sym @ u) @ u.T
        evals, evecs = np.linalg.eigh(0.5 * (sym + sym.T))
        z, d = evecs, evals
    else:
        q = noise_rank if noise_rank is not None else 2 * k
        if q < 1:
            raise ValueError("noise_rank must be >= 1")
        f1 = rng.standard_normal((n, q))
        f2 = rng.standard_normal((n, q))
        f1 -= u @ (u.T @ f1)
        f2 -= u @ (u.T @ f2)
        w = qr_orthonormalize(np.hstack([f1, f2]), rng).q
        a = w.T @ f1
        b = w.T @ f2
        small = 0.5 * (a @ b.T + b @ a.T)
        evals, evecs = np.linalg.eigh(small)
        z, d = w @ evecs, evals

    scale = np.linalg.norm(d)
    if scale == 0.0:
        raise ValueError("degenerate noise draw; try another seed")
    d = d * (noise_frobenius / scale)
    return PlantedInstance(n, u, spectrum, z, d)


def fro_error_factored(instance: PlantedInstance, factors: Factors) -> float:
    """||A - X Y^T||_F through small Gram matrices, never forming n x n.

    Splits X and Y against the orthonormal eigenbasis W of A (signal plus
    noise directions): with X = W Cx + Ex, Y = W Cy + Ey and W^T E = 0, the
    difference decomposes into four mutually orthogonal pieces whose squared
    norms add, so no catastrophic cancellation occurs even at exact factors
    (the naive three-term expansion loses half the significand there).
    Cost is O(n (k + q) r + n r^2).
    """
    x, y = factors.x, factors.y
    if x.shape[0] != instance.n or y.shape[0] != instance.n:
        raise ValueError("factor dimensions do not match the instance")
    if x.shape[1] != y.shape[1]:
        raise ValueError("factor ranks differ")
    if x.shape[1] == 0:
        return instance.fro_norm
    w = (
        np.hstack([instance.u, instance.noise_basis])
        if instance.noise_evals.size
        else instance.u
    )
    evals = np.concatenate([instance.sigmas, instance.noise_evals])
    cx = w.T @ x
    cy = w.T @ y
    ex = x - w @ cx
    ey = y - w @ cy
    core = np.diag(evals) - cx @ cy.T
    gx = ex.T @ ex
    gy = ey.T @ ey
    total = (
        float(np.sum(core**2))
        + float(np.sum((cx.T @ cx) * gy))
        + float(np.sum(gx * (cy.T @ cy)))
        + float(np.sum(gx * gy))
    )
    return float(np.sqrt(max(0.0, total)))


def subspace_errors(
    instance: PlantedInstance, x: np.ndarray, block_boundaries: Sequence[int]
) -> list[float]:
    """sin of the principal angle between leading blocks of U and of X.

    For each boundary b, compares the first b columns of the planted basis
    with the first b columns of x.
    """
    x = check_basis(x, "x")
    bounds = list(block_boundaries)
    if any(b1 >= b2 for b1, b2 in zip(bounds, bounds[1:])):
        raise ValueError("block boundaries must be strictly increasing")
    out = []
    for b in bounds:
        if b < 1 or b > instance.k or b > x.shape[1]:
            raise ValueError(f"boundary {b} exceeds available columns")
        out.append(principal_angle_sin(instance.u[:, :b], x[:, :b]))
    return out
