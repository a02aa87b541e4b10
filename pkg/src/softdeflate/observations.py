"""Observed-entry sets, their sampling model, and implicit residual operators.

An ObservationSet holds the sampled index/value triples of a symmetric
n x n matrix together with the Bernoulli rate p they were drawn at.  Raw
matrix values are stored; the 1/p normalization that makes the subsample an
unbiased estimate of the full matrix is applied lazily by the operators,
never baked into storage (this also makes entrywise truncation commute
with sampling for free).

The splitting routine reproduces the product-Bernoulli law exactly: a set
drawn at rate p is thinned and then each surviving element samples its
membership vector from the conditional distribution given at least one
inclusion, so the resulting subsets are mutually independent Bernoulli
samples at the requested rates.
"""

from __future__ import annotations

import warnings
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .linalg import Factors, as_block

_RATE_SLACK = 1e-9
# Row block size for Bernoulli mask generation; fixed so sampling is
# deterministic for a given seed regardless of available memory.
_SAMPLE_CHUNK = 256


class ObservationSet:
    """Immutable set of observed (i, j, value) triples with its sampling rate.

    Entries are kept sorted by (i, j); duplicate indices in the input are
    resolved last-write-wins and counted in duplicate_count.  Row-grouped
    and column-grouped index structures are built once so per-row and
    per-column iteration is O(1) per entry.
    """

    __slots__ = (
        "n",
        "p",
        "rows",
        "cols",
        "vals",
        "duplicate_count",
        "_col_order",
        "_col_indptr",
        "_row_indptr",
    )

    def __init__(self, n: int, p: float, rows, cols, vals):
        if not 0.0 < p <= 1.0:
            raise ValueError(f"sampling rate p must be in (0, 1], got {p}")
        if n < 1:
            raise ValueError("dimension must be positive")
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        if not (rows.shape == cols.shape == vals.shape) or rows.ndim != 1:
            raise ValueError("rows, cols, vals must be 1-d arrays of equal length")
        if rows.size and (rows.min() < 0 or rows.max() >= n or cols.min() < 0 or cols.max() >= n):
            raise ValueError("indices out of range [0, n)")
        if not np.all(np.isfinite(vals)):
            raise ValueError("observed values must be finite")

        # Last write wins on duplicate (i, j): stable-sort by flat index and
        # keep the final occurrence of each group.
        flat = rows * n + cols
        order = np.argsort(flat, kind="stable")
        flat_sorted = flat[order]
        keep = np.ones(flat.size, dtype=bool)
        if flat.size:
            keep[:-1] = flat_sorted[1:] != flat_sorted[:-1]
        dup = int(flat.size - keep.sum())
        sel = order[keep]

        self.n = int(n)
        self.p = float(p)
        self.rows = rows[sel]
        self.cols = cols[sel]
        self.vals = vals[sel]
        self.duplicate_count = dup
        for a in (self.rows, self.cols, self.vals):
            a.setflags(write=False)

        self._col_order = None
        self._col_indptr = None
        self._row_indptr = None

    @property
    def size(self) -> int:
        return self.rows.size

    def __len__(self) -> int:
        return self.size

    def row_groups(self) -> tuple[np.ndarray, np.ndarray]:
        """(indptr, entry order) grouping entries by row index.

        Entries are already row-major sorted, so the order is the identity;
        indptr[i]:indptr[i+1] slices row i's entries.
        """
        if self._row_indptr is None:
            self._row_indptr = np.concatenate(
                ([0], np.cumsum(np.bincount(self.rows, minlength=self.n)))
            )
        return self._row_indptr, np.arange(self.size)

    def col_groups(self) -> tuple[np.ndarray, np.ndarray]:
        """(indptr, entry order) grouping entries by column index."""
        if self._col_order is None:
            self._col_order = np.argsort(self.cols, kind="stable")
            self._col_indptr = np.concatenate(
                ([0], np.cumsum(np.bincount(self.cols, minlength=self.n)))
            )
        return self._col_indptr, self._col_order

    def with_values(self, vals: np.ndarray, p: Optional[float] = None) -> "ObservationSet":
        """Copy of this set with replaced values (indices unchanged)."""
        return ObservationSet(self.n, self.p if p is None else p, self.rows, self.cols, vals)

    def subset(self, mask_or_idx, p: float) -> "ObservationSet":
        return ObservationSet(
            self.n, p, self.rows[mask_or_idx], self.cols[mask_or_idx], self.vals[mask_or_idx]
        )

    def raw_coo(self) -> sp.coo_matrix:
        """Sparse matrix of the raw (unnormalized) observed values."""
        return sp.coo_matrix((self.vals, (self.rows, self.cols)), shape=(self.n, self.n))


def sample_observations(
    entry_oracle: Callable, n: int, p: float, rng: np.random.Generator
) -> ObservationSet:
    """Draw each (i, j) in [n]^2 independently with probability p.

    entry_oracle(i, j) supplies values; it may be vectorized over numpy
    index arrays (preferred) or scalar-only.  Each selected entry is read
    from the oracle exactly once.
    """
    if not 0.0 < p <= 1.0:
        raise ValueError(f"sampling rate p must be in (0, 1], got {p}")
    rows_parts = []
    cols_parts = []
    for start in range(0, n, _SAMPLE_CHUNK):
        stop = min(start + _SAMPLE_CHUNK, n)
        mask = rng.random((stop - start, n)) < p
        r, c = np.nonzero(mask)
        rows_parts.append(r + start)
        cols_parts.append(c)
    rows = np.concatenate(rows_parts) if rows_parts else np.empty(0, dtype=np.int64)
    cols = np.concatenate(cols_parts) if cols_parts else np.empty(0, dtype=np.int64)
    vals = _read_oracle(entry_oracle, rows, cols)
    return ObservationSet(n, p, rows, cols, vals)


def _read_oracle(entry_oracle: Callable, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    if rows.size == 0:
        return np.empty(0, dtype=np.float64)
    try:
        vals = np.asarray(entry_oracle(rows, cols), dtype=np.float64)
        if vals.shape == rows.shape:
            return vals
    except (TypeError, ValueError):
        pass
    return np.array([entry_oracle(int(i), int(j)) for i, j in zip(rows, cols)], dtype=np.float64)


def split_observations(
    obs: ObservationSet, rates: Sequence[float], rng: np.random.Generator
) -> list[ObservationSet]:
    """Split a rate-p set into independent Bernoulli sets at the given rates.

    First thins the input to rate p' = 1 - prod(1 - p_l) by keeping each
    element with probability p'/p, then samples each survivor's membership
    vector exactly from the product-Bernoulli law conditioned on at least
    one inclusion: the smallest included index l* is drawn with probability
    prod_{l < l*}(1 - p_l) * p_{l*} / p', and every index above l* is
    included independently at its own rate.  The returned sets are mutually
    independent and each is a Bernoulli(p_l) sample of the full index grid.
    """
    rates = np.asarray(rates, dtype=np.float64)
    if rates.ndim != 1 or rates.size == 0:
        raise ValueError("rates must be a nonempty 1-d sequence")
    if np.any(rates <= 0.0):
        raise ValueError("all split rates must be positive")
    total = float(rates.sum())
    if total > obs.p * (1.0 + _RATE_SLACK):
        raise ValueError(f"sum of split rates {total} exceeds the set's rate {obs.p}")

    nL = rates.size
    p_thin = 1.0 - float(np.prod(1.0 - rates))
    keep = rng.random(obs.size) < p_thin / obs.p
    idx = np.nonzero(keep)[0]
    m = idx.size

    # Probability that l is the smallest included index, conditioned on >= 1.
    prefix_miss = np.concatenate(([1.0], np.cumprod(1.0 - rates)[:-1]))
    first_probs = prefix_miss * rates / p_thin
    cum = np.cumsum(first_probs)
    cum[-1] = 1.0
    lstar = np.searchsorted(cum, rng.random(m), side="right")
    extra = rng.random((m, nL)) < rates[None, :]

    out = []
    for l in range(nL):
        member = (lstar == l) | ((lstar < l) & extra[:, l])
        out.append(obs.subset(idx[member], float(rates[l])))
    return out


def conditional_count_probabilities(rates: Sequence[float]) -> np.ndarray:
    """P(exactly r of the L coins land heads | at least one does), r = 1..L.

    Dynamic program over the per-index inclusion rates; provided as a test
    oracle for the splitting distribution, not used by the splitter itself.
    """
    rates = np.asarray(rates, dtype=np.float64)
    pmf = np.zeros(rates.size + 1)
    pmf[0] = 1.0
    for p_l in rates:
        upd = np.zeros_like(pmf)
        upd[1:] = pmf[:-1] * p_l
        pmf = pmf * (1.0 - p_l) + upd
    p_any = 1.0 - pmf[0]
    return pmf[1:] / p_any


def truncate_observations(obs: ObservationSet, c: float) -> ObservationSet:
    """Clamp each normalized entry (value / p) to [-c, c]; indices unchanged.

    Equivalent to projecting the normalized observed matrix onto the
    entrywise l-infinity ball of radius c in Frobenius distance.
    """
    if c < 0.0:
        raise ValueError("truncation level must be nonnegative")
    if not np.isfinite(c):
        return obs.with_values(obs.vals)
    bound = c * obs.p
    return obs.with_values(np.clip(obs.vals, -bound, bound))


class ImplicitOperator:
    """Lazy linear map for the clamped, normalized residual on observed entries.

    Represents T with T_ij = clamp((A_ij - (X Y^T)_ij) / p, +-c) on observed
    (i, j) and 0 elsewhere.  apply and apply_transpose cost
    O(|observations| * r) after a one-time materialization of the residual
    values (O(|observations| * rank(factors))).
    """

    def __init__(
        self,
        obs: ObservationSet,
        factors: Optional[Factors] = None,
        clamp: Optional[float] = None,
    ):
        if factors is not None and factors.x.size:
            if factors.x.shape[0] != obs.n or factors.y.shape[0] != obs.n:
                raise ValueError("factor dimensions do not match the observation set")
            if factors.x.shape[1] != factors.y.shape[1]:
                raise ValueError("factor ranks differ")
        if clamp is not None and clamp < 0.0:
            raise ValueError("clamp level must be nonnegative")
        self.obs = obs
        self.factors = factors
        self.clamp = clamp
        self._matrix: Optional[sp.csr_matrix] = None

    @property
    def n(self) -> int:
        return self.obs.n

    def _materialize(self) -> sp.csr_matrix:
        if self._matrix is None:
            obs = self.obs
            t = obs.vals.copy()
            if self.factors is not None and self.factors.x.size:
                x, y = self.factors
                t -= np.einsum("ij,ij->i", x[obs.rows], y[obs.cols])
            t /= obs.p
            if self.clamp is not None and np.isfinite(self.clamp):
                np.clip(t, -self.clamp, self.clamp, out=t)
            self._matrix = sp.csr_matrix(
                (t, (obs.rows, obs.cols)), shape=(obs.n, obs.n)
            )
        return self._matrix

    def apply(self, v: np.ndarray) -> np.ndarray:
        """T @ v for an (n,) vector or (n, r) block."""
        squeeze = np.ndim(v) == 1
        block = as_block(v, "operand") if not squeeze else np.asarray(v, dtype=np.float64)
        out = self._materialize() @ block
        return out

    def apply_transpose(self, v: np.ndarray) -> np.ndarray:
        squeeze = np.ndim(v) == 1
        block = as_block(v, "operand") if not squeeze else np.asarray(v, dtype=np.float64)
        return self._materialize().T @ block


def make_residual_operator(
    obs: ObservationSet,
    factors: Optional[Factors] = None,
    clamp: Optional[float] = None,
) -> ImplicitOperator:
    """Operator for the normalized observed residual P_observed(A - X Y^T).

    With no factors and no clamp this is the unbiased subsample operator
    itself; with factors it is the deflation residual used to initialize
    each epoch of the completion driver.
    """
    return ImplicitOperator(obs, factors, clamp)


def write_observations(path, obs: ObservationSet) -> None:
    """Write the text format: header `n <n> p <p>`, then sorted `i j value` rows."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"n {obs.n} p {float(obs.p)!r}\n")
        for i, j, v in zip(obs.rows, obs.cols, obs.vals):
            fh.write(f"{i} {j} {float(v)!r}\n")


def read_observations(path) -> ObservationSet:
    """Read the text format written by write_observations.

    Duplicate (i, j) lines resolve last-write-wins; a warning is emitted
    with the duplicate count.
    """
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 4 or header[0] != "n" or header[2] != "p":
            raise ValueError(f"malformed header in {path}")
        n = int(header[1])
        p = float(header[3])
        rows, cols, vals = [], [], []
        for lineno, line in enumerate(fh, start=2):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 3:
                raise ValueError(f"malformed triple at {path}:{lineno}")
            rows.append(int(parts[0]))
            cols.append(int(parts[1]))
            vals.append(float(parts[2]))
    out = ObservationSet(n, p, rows, cols, vals)
    if out.duplicate_count:
        warnings.warn(
            f"{path}: {out.duplicate_count} duplicate indices (last write wins)",
            stacklevel=2,
        )
    return out
