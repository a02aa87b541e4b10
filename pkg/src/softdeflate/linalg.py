"""Dense tall-skinny and small-square linear algebra primitives.

Everything in here operates on plain float64 ndarrays.  A "block" is an
(n, r) array with r <= n; a "basis" is a block whose columns are
orthonormal to within ORTHO_TOL.  All functions are pure: randomness only
enters through an explicitly passed numpy Generator.
"""

from __future__ import annotations

from typing import NamedTuple, Optional, Sequence

import numpy as np

# Orthonormality tolerance for bases: max |Q^T Q - I| entry.
ORTHO_TOL = 1e-10
# Symmetry tolerance for small square matrices.
SYM_TOL = 1e-12
# A column whose residual after projection falls below this fraction of
# ||S||_F is treated as linearly dependent and replaced.
RANK_DEFICIENCY_TOL = 1e-12

_COMPLETION_SEED = 0x5EED


class Factors(NamedTuple):
    """Rank-r approximation X @ Y.T held as its two (n, r) factors."""

    x: np.ndarray
    y: np.ndarray

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def rank(self) -> int:
        return self.x.shape[1]


class QrResult(NamedTuple):
    """Output of qr_orthonormalize.

    completed is True when one or more input columns were numerically
    dependent and got replaced by fresh random orthogonal directions
    (their diagonal entry in r is set to 0).
    """

    q: np.ndarray
    r: np.ndarray
    completed: bool


def as_block(a, name: str = "block") -> np.ndarray:
    """Coerce to a float64 (n, r) array and check 1 <= r <= n and finiteness."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    n, r = arr.shape
    if not 1 <= r <= n:
        raise ValueError(f"{name} must satisfy 1 <= cols <= rows, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def check_basis(q, name: str = "basis") -> np.ndarray:
    """Validate orthonormal columns within ORTHO_TOL; returns the array."""
    arr = as_block(q, name)
    gram = arr.T @ arr
    err = np.max(np.abs(gram - np.eye(arr.shape[1])))
    if err > ORTHO_TOL:
        raise ValueError(f"{name} columns are not orthonormal (defect {err:.3e})")
    return arr


def check_small_sym(m, name: str = "matrix") -> np.ndarray:
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be square, got shape {arr.shape}")
    if np.max(np.abs(arr - arr.T), initial=0.0) > SYM_TOL * max(1.0, np.max(np.abs(arr))):
        raise ValueError(f"{name} is not symmetric")
    return arr


def _completion_rng(rng: Optional[np.random.Generator]) -> np.random.Generator:
    # Deterministic fallback so qr_orthonormalize stays a pure function even
    # when the caller does not care about the rank-deficient path.
    return rng if rng is not None else np.random.default_rng(_COMPLETION_SEED)


def _orthogonalize_column(v: np.ndarray, q: np.ndarray, j: int) -> tuple[np.ndarray, np.ndarray]:
    """Project v against the first j columns of q, with one reorthogonalization pass."""
    coef = np.zeros(j)
    for _ in range(2):
        c = q[:, :j].T @ v
        v = v - q[:, :j] @ c
        coef += c
    return v, coef


def _gram_schmidt_completed(s: np.ndarray, rng: Optional[np.random.Generator]) -> QrResult:
    """Column-by-column orthonormalization that survives rank deficiency.

    Dependent columns are replaced by random unit vectors orthogonal to the
    columns already produced; the corresponding diagonal of R is set to 0 so
    Q @ R still reconstructs S up to the deficiency tolerance.
    """
    n, r = s.shape
    scale = np.linalg.norm(s)
    q = np.zeros((n, r))
    rmat = np.zeros((r, r))
    gen = _completion_rng(rng)
    completed = False
    for j in range(r):
        v, coef = _orthogonalize_column(s[:, j].copy(), q, j)
        rmat[:j, j] = coef
        nrm = np.linalg.norm(v)
        if nrm <= RANK_DEFICIENCY_TOL * scale:
            completed = True
            while True:
                v, _ = _orthogonalize_column(gen.standard_normal(n), q, j)
                nrm = np.linalg.norm(v)
                if nrm > 1e-6 * np.sqrt(n):
                    break
            q[:, j] = v / nrm
            rmat[j, j] = 0.0
        else:
            q[:, j] = v / nrm
            rmat[j, j] = nrm
    return QrResult(q, rmat, completed)


def qr_orthonormalize(s, rng: Optional[np.random.Generator] = None) -> QrResult:
    """Thin QR with nonnegative diagonal and rank-deficiency completion.

    Returns (Q, R, completed) with Q @ R = S (within 1e-10 relative
    Frobenius error on full-rank input), Q orthonormal and R upper
    triangular with nonnegative diagonal.  Columns that are numerically
    dependent are replaced by random directions orthogonal to the earlier
    columns and flagged via completed=True.
    """
    s = as_block(s, "qr input")
    scale = np.linalg.norm(s)
    if scale == 0.0:
        return _gram_schmidt_completed(s, rng)
    q, rmat = np.linalg.qr(s, mode="reduced")
    diag = np.diagonal(rmat).copy()
    if np.min(np.abs(diag)) <= RANK_DEFICIENCY_TOL * scale:
        return _gram_schmidt_completed(s, rng)
    flip = np.where(diag < 0.0, -1.0, 1.0)
    return QrResult(q * flip, flip[:, None] * rmat, False)


def extend_orthonormal(
    prefix: np.ndarray, tail: np.ndarray, rng: Optional[np.random.Generator] = None
) -> QrResult:
    """QR of [prefix | tail] that keeps the orthonormal prefix columns exactly.

    prefix must already have orthonormal columns (it is copied verbatim into
    the output); only the tail columns are orthogonalized, with the same
    rank-deficiency completion as qr_orthonormalize.  R is returned for the
    tail block only, since the prefix part is the identity by construction.
    """
    tail = as_block(tail, "tail")
    if prefix.size == 0:
        return qr_orthonormalize(tail, rng)
    prefix = check_basis(prefix, "prefix")
    if prefix.shape[0] != tail.shape[0]:
        raise ValueError("prefix and tail row counts differ")
    n = prefix.shape[0]
    r0, r1 = prefix.shape[1], tail.shape[1]
    if r0 + r1 > n:
        raise ValueError("combined column count exceeds dimension")
    q = np.empty((n, r0 + r1))
    q[:, :r0] = prefix
    scale = max(np.linalg.norm(tail), np.linalg.norm(prefix))
    rmat = np.zeros((r1, r1))
    gen = _completion_rng(rng)
    completed = False
    for j in range(r1):
        v, coef = _orthogonalize_column(tail[:, j].copy(), q, r0 + j)
        rmat[:j, j] = coef[r0:]
        nrm = np.linalg.norm(v)
        if nrm <= RANK_DEFICIENCY_TOL * scale:
            completed = True
            while True:
                v, _ = _orthogonalize_column(gen.standard_normal(n), q, r0 + j)
                nrm = np.linalg.norm(v)
                if nrm > 1e-6 * np.sqrt(n):
                    break
            rmat[j, j] = 0.0
        else:
            rmat[j, j] = nrm
        q[:, r0 + j] = v / nrm
    return QrResult(q, rmat, completed)


def sym_eig_small(m) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a small symmetric matrix, eigenvalues descending.

    Returns (w, v) with m = v @ diag(w) @ v.T and w sorted in descending
    order; columns of v are the matching orthonormal eigenvectors.
    """
    m = check_small_sym(m, "sym_eig_small input")
    w, v = np.linalg.eigh(m)
    return w[::-1].copy(), v[:, ::-1].copy()


def principal_angle_sin(a, b) -> float:
    """sin of the largest principal angle between two equal-rank subspaces.

    Computed as sqrt(max(0, 1 - sigma_min(A^T B)^2)), which only touches
    r x r matrices and never forms the n x (n - r) complement.
    """
    a = check_basis(a, "a")
    b = check_basis(b, "b")
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    smin = np.linalg.svd(a.T @ b, compute_uv=False)[-1]
    return float(np.sqrt(max(0.0, 1.0 - min(smin, 1.0) ** 2)))


def coherence(q) -> float:
    """Row-concentration measure (n / r) * max_i ||e_i^T Q||^2 of a basis.

    Always lies in [1, n / r] for orthonormal Q: 1 for perfectly flat
    bases, n / r when some row carries a full unit of mass.
    """
    q = check_basis(q, "coherence input")
    n, r = q.shape
    return float(n / r * np.max(np.einsum("ij,ij->i", q, q)))


def entrywise_median(blocks: Sequence[np.ndarray]) -> np.ndarray:
    """Entrywise median across same-shape blocks (even counts average the middle two)."""
    if len(blocks) == 0:
        raise ValueError("entrywise_median needs at least one block")
    arrs = [np.asarray(b, dtype=np.float64) for b in blocks]
    shape = arrs[0].shape
    for a in arrs[1:]:
        if a.shape != shape:
            raise ValueError(f"shape mismatch: {a.shape} vs {shape}")
    if len(arrs) == 1:
        return arrs[0].copy()
    return np.median(np.stack(arrs, axis=0), axis=0)


def random_orthonormal(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed dim x dim orthonormal matrix.

    QR of a standard Gaussian matrix with the R diagonal sign fixed to be
    nonnegative, which makes the distribution exactly rotation invariant.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    g = rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(g)
    return q * np.where(np.diagonal(r) < 0.0, -1.0, 1.0)
