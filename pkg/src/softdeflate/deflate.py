"""Gap-aware low-rank completion driver.

The driver grows the maintained factor block in epochs.  Each epoch
truncates and spectrally probes the residual of the current model against
a fresh slice of the observations, cuts the estimated spectrum at the next
ratio gap, flattens the new directions with a random rotation plus
entrywise clamp, appends them to the basis, and refits the enlarged block
with median alternating least squares, always against samples of the
original matrix rather than an accumulated residual.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .altls import smaltls
from .linalg import Factors, extend_orthonormal, principal_angle_sin, random_orthonormal
from .observations import ObservationSet, make_residual_operator, split_observations
from .spectral import spectral_norm, subspace_iteration

_EARLY_RETURN_FACTOR = 10.0
_TRUNCATE_FACTOR = 8.0
_INNER_ITER_CAP = 500


@dataclass(frozen=True)
class DeflateConfig:
    """Every tunable of the completion driver.

    rates are per-epoch: p0 funds the one-time norm estimate, pt[t] the
    epoch-t spectral probe, ptp[t] the epoch-t least-squares refit.  zeta
    is a pre-scale for the smoothing noise floor: the driver multiplies it
    by the estimated top singular value at run time.  gap_ratio is the
    spectrum-cut threshold (default 1 - 1/(4k)).
    """

    k: int
    eps: float
    delta: float
    mu_star: float
    mu0: float
    p0: float
    pt: tuple[float, ...]
    ptp: tuple[float, ...]
    lt: int
    l_inner: int
    s_max: int
    zeta: float
    gap_ratio: float
    smoothing: bool = True
    resample: bool = True
    # coherence-target schedule: "additive" grows the target as
    # (sqrt(mu0) + (t-1) sqrt(mu_star k))^2; "compounded" uses
    # (sqrt(mu0) (1 + c5/k)^(t-1) + (t-1) 16 sqrt(mu_star ln n))^2
    mu_schedule: str = "additive"
    mu_c5: float = 1.0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("target rank k must be >= 1")
        if not 0.0 < self.eps < 1.0:
            raise ValueError("eps must lie in (0, 1)")
        if self.delta < 0.0:
            raise ValueError("delta must be nonnegative")
        if self.mu_star < 1.0 or self.mu0 < 1.0:
            raise ValueError("coherence parameters must be >= 1")
        if not 0.0 < self.gap_ratio < 1.0:
            raise ValueError("gap_ratio must lie in (0, 1)")
        if self.p0 <= 0.0 or any(p <= 0.0 for p in self.pt) or any(p <= 0.0 for p in self.ptp):
            raise ValueError("all sampling rates must be positive")
        if len(self.pt) != self.k or len(self.ptp) != self.k:
            raise ValueError("pt and ptp must supply one rate per potential epoch")
        if self.lt < 1 or self.l_inner < 1 or self.s_max < 1:
            raise ValueError("iteration counts must be >= 1")
        if self.zeta <= 0.0:
            raise ValueError("zeta must be positive")
        if self.mu_schedule not in ("additive", "compounded"):
            raise ValueError("mu_schedule must be 'additive' or 'compounded'")

    @property
    def total_rate(self) -> float:
        return self.p0 + sum(self.pt) + sum(self.ptp)


@dataclass(frozen=True)
class EpochRecord:
    t: int
    r_t: int
    d_t: int
    s_t: float
    tau_t: float
    mu_t: float
    sigma_estimates: tuple[float, ...]
    sin_theta: Optional[float]
    wall_ms: float


@dataclass
class EpochTrace:
    """Per-epoch bookkeeping of the driver plus the initial norm estimate."""

    s0: float = 0.0
    epochs: list[EpochRecord] = field(default_factory=list)
    early_return: bool = False

    def comparable(self) -> tuple:
        """Deterministic view of the trace: everything except wall times."""
        return (
            self.s0,
            self.early_return,
            tuple(
                (e.t, e.r_t, e.d_t, e.s_t, e.tau_t, e.mu_t, e.sigma_estimates, e.sin_theta)
                for e in self.epochs
            ),
        )


def find_gap(sigmas: Sequence[float], k: int, r_prev: int, gap_ratio: float) -> int:
    """Width of the next spectrum block: the smallest i with a ratio gap after it.

    Returns the smallest i <= k - r_prev such that sigma_{i+1} <=
    gap_ratio * sigma_i; when no such i exists (including when fewer than
    i + 1 estimates are available) it falls back to k - r_prev, always >= 1.
    """
    sig = np.asarray(sigmas, dtype=np.float64)
    if sig.size == 0:
        raise ValueError("need at least one singular value estimate")
    if r_prev >= k:
        raise ValueError("previous rank already reached the target")
    remaining = k - r_prev
    for i in range(1, remaining + 1):
        if i < sig.size and sig[i] <= gap_ratio * sig[i - 1]:
            return i
    return remaining


def soft_deflate(
    obs: ObservationSet,
    config: DeflateConfig,
    rng: np.random.Generator,
    truth_basis: Optional[np.ndarray] = None,
) -> tuple[Factors, EpochTrace]:
    """Complete a symmetric matrix from observed entries, epoch by epoch.

    Splits the observations into the norm-estimate slice plus per-epoch
    probe/refit slices, then per epoch: clamp the normalized residual at
    tau_t, estimate its top spectrum by subspace iteration, return early
    when the top estimate falls under 10 * eps * s0, otherwise cut at the
    next ratio gap, rotate + clamp the new directions, extend the basis,
    and refit with median alternating least squares.  Stops once the
    maintained rank reaches k.

    truth_basis, when given, adds a sin-theta diagnostic per epoch.
    """
    n = obs.n
    if config.k > n:
        raise ValueError(f"target rank {config.k} exceeds dimension {n}")
    if obs.p + 1e-9 < config.total_rate:
        raise ValueError(
            f"insufficient sampling rate: observations carry p={obs.p} but the "
            f"schedule needs {config.total_rate}"
        )
    k = config.k
    rates = [config.p0]
    for pt, ptp in zip(config.pt, config.ptp):
        rates.extend((pt, ptp))
    parts = split_observations(obs, rates, rng)
    omega0 = parts[0]
    probe_sets = parts[1::2]
    refit_sets = parts[2::2]

    s0 = spectral_norm(make_residual_operator(omega0), config.l_inner, rng)
    trace = EpochTrace(s0=s0)
    x = np.zeros((n, 0))
    y = np.zeros((n, 0))
    factors = Factors(x, y)
    r_prev = 0
    s_prev = s0
    clamp_bound = _TRUNCATE_FACTOR * math.sqrt(config.mu_star * math.log(n) / n)

    for t in range(1, k + 1):
        t0 = time.perf_counter()
        tau_t = config.mu_star / (n * config.pt[t - 1]) * (2.0 * k * s_prev + config.delta)
        residual = make_residual_operator(
            probe_sets[t - 1], factors if r_prev else None, clamp=tau_t
        )
        estimate = subspace_iteration(residual, k - r_prev, config.l_inner, rng)
        sig1 = float(estimate.sigmas[0])
        # sig1 == 0 covers the identically-zero residual, where the strict
        # comparison against 10 * eps * s0 = 0 would never fire.
        if sig1 < _EARLY_RETURN_FACTOR * config.eps * s0 or sig1 == 0.0:
            trace.early_return = True
            return factors, trace

        d_t = find_gap(estimate.sigmas, k, r_prev, config.gap_ratio)
        r_t = r_prev + d_t
        s_t = float(estimate.sigmas[d_t - 1])
        q_new = estimate.basis[:, :d_t]
        rotation = random_orthonormal(d_t, rng)
        q_flat = np.clip(q_new @ rotation, -clamp_bound, clamp_bound)
        w_t = extend_orthonormal(x, q_flat, rng).q
        if config.mu_schedule == "additive":
            mu_t = (math.sqrt(config.mu0) + (t - 1) * math.sqrt(config.mu_star * k)) ** 2
        else:
            mu_t = (
                math.sqrt(config.mu0) * (1.0 + config.mu_c5 / k) ** (t - 1)
                + (t - 1) * 16.0 * math.sqrt(config.mu_star * math.log(n))
            ) ** 2

        x, y, _ = smaltls(
            refit_sets[t - 1],
            w_t,
            config.lt,
            config.s_max,
            r_t,
            config.zeta * s0,
            mu_t,
            rng,
            smoothing=config.smoothing,
            resample=config.resample,
        )
        factors = Factors(x, y)

        sin_theta = None
        if truth_basis is not None and r_t <= truth_basis.shape[1]:
            sin_theta = principal_angle_sin(truth_basis[:, :r_t], x)
        trace.epochs.append(
            EpochRecord(
                t=t,
                r_t=r_t,
                d_t=d_t,
                s_t=s_t,
                tau_t=tau_t,
                mu_t=mu_t,
                sigma_estimates=tuple(float(v) for v in estimate.sigmas),
                sin_theta=sin_theta,
                wall_ms=(time.perf_counter() - t0) * 1e3,
            )
        )
        r_prev, s_prev = r_t, s_t
        if r_t >= k:
            return factors, trace
    return factors, trace


def default_schedule(n: int, k: int, eps: float, total_observations: float, **overrides) -> DeflateConfig:
    """Practical sampling schedule for a budget of m expected observations.

    Splits the budget 5% / 15% / 80% between the norm estimate, the
    per-epoch spectral probes, and the per-epoch refits (the per-epoch
    shares are even across the k potential epochs); iteration counts follow
    the worst-case gap floor 1/(4k).  Every field can be overridden by
    keyword.  Raises when the per-epoch refit rate cannot give each column
    at least 2k expected observations.
    """
    m = float(total_observations)
    if m <= 0 or m > float(n) * n:
        raise ValueError("total_observations must lie in (0, n^2]")
    p_total = m / (float(n) * n)
    p0 = 0.05 * p_total
    pt = (0.15 * p_total / k,) * k
    ptp = (0.80 * p_total / k,) * k
    if "ptp" not in overrides and ptp[0] * n < 2 * k:
        raise ValueError(
            "budget too small: per-epoch refit rate gives fewer than 2k expected "
            "observations per column"
        )
    fields = dict(
        k=k,
        eps=eps,
        delta=0.0,
        mu_star=3.0,
        mu0=20.0,
        p0=p0,
        pt=pt,
        ptp=ptp,
        lt=math.ceil(4.0 * math.log(k * n / eps) * 4.0 * k),
        l_inner=min(_INNER_ITER_CAP, math.ceil(k**3.5 * math.log(n))),
        s_max=3,
        zeta=eps * k**-5.0,
        gap_ratio=1.0 - 1.0 / (4.0 * k),
        smoothing=True,
        resample=True,
    )
    fields.update(overrides)
    return DeflateConfig(**fields)


def theoretical_sample_rate(
    n: int,
    k: int,
    gamma_star: float,
    sigma1: float,
    sigmak: float,
    eps: float,
    delta_over_em: float,
    mu0: float,
    mu_star: float,
    c: float,
) -> float:
    """Sufficient Bernoulli rate promised by the recovery analysis.

    Evaluates c * k^9 / (gamma_star^3 n) * log(k sigma1 / (sigmak + eps sigma1))
    * (1 + delta_over_em^2) * (mu0 + mu_star k log n) * log^2 n literally.
    Diagnostic only; never used to drive runs.
    """
    if min(n, k) < 1 or not 0.0 < gamma_star <= 1.0:
        raise ValueError("n, k must be positive and gamma_star in (0, 1]")
    log_term = math.log(k * sigma1 / (sigmak + eps * sigma1))
    return (
        c
        * k**9
        / (gamma_star**3 * n)
        * log_term
        * (1.0 + delta_over_em**2)
        * (mu0 + mu_star * k * math.log(n))
        * math.log(n) ** 2
    )
