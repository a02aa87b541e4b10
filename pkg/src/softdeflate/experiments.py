"""Experiment runner:.cfg parsing, algorithm dispatch, CSV emission.

Config grammar is flat `key=value` text: `#` starts a comment, blank lines
are ignored, and repeating a key collects a list (used for sigma, m and
seed).  Every (budget, seed) cell derives its random stream from
(master_seed, budget index, seed index), so reruns of the same config are
byte-identical apart from the wall-clock column, and cells may be computed
on any number of threads without changing the output.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .baselines import DEFAULT_POWER_ITERS, DEFAULT_SVD_ITERS, frank_wolfe, naive_svd_complete
from .deflate import default_schedule, soft_deflate
from .linalg import Factors
from .observations import sample_observations, write_observations
from .synth import fro_error_factored, gen_planted

CSV_HEADER = "algorithm,n,k,spectrum,m,seed,fro_err,sin_theta,sin_theta_blocks,iters,wall_ms"

ALGORITHMS = ("soft_deflate", "frank_wolfe", "naive_svd")

THREADS_ENV_VAR = "SOFTDEFLATE_THREADS"


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


@dataclass
class ExperimentConfig:
    algorithm: str
    n: int
    k: int
    spectrum: tuple[float, ...]
    budgets: tuple[int, ...]
    seeds: tuple[int, ...]
    noise_frobenius: float = 0.0
    master_seed: int = 0
    eps: float = 1e-3
    out: Optional[str] = None
    fro_abs: bool = False
    # soft_deflate overrides (None = schedule default)
    lt: Optional[int] = None
    s_max: Optional[int] = None
    l_inner: Optional[int] = None
    gap_ratio: Optional[float] = None
    mu_star: Optional[float] = None
    mu0: Optional[float] = None
    delta: Optional[float] = None
    smoothing: bool = True
    resample: bool = True
    # frank_wolfe overrides
    fw_eps: float = 0.05
    trace_bound: Optional[float] = None
    power_iters: int = DEFAULT_POWER_ITERS
    # naive_svd overrides
    svd_iters: int = DEFAULT_SVD_ITERS

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; pick one of {ALGORITHMS}")
        if len(self.spectrum) != self.k:
            raise ConfigError("spectrum must supply exactly k values")
        if not self.budgets:
            raise ConfigError("at least one budget m is required")
        if any(m < 1 or m > self.n * self.n for m in self.budgets):
            raise ConfigError("budgets must lie in [1, n^2]")
        if not self.seeds:
            raise ConfigError("at least one seed is required")

    @property
    def spectrum_label(self) -> str:
        return ":".join(format(s, "g") for s in self.spectrum)


@dataclass(frozen=True)
class ResultRow:
    algorithm: str
    n: int
    k: int
    spectrum: str
    m: int
    seed: int
    fro_err: float
    sin_theta: float
    sin_theta_blocks: tuple[float, ...]
    iters: int
    wall_ms: float
    fro_err_abs: float

    def to_csv(self, fro_abs: bool = False) -> str:
        blocks = ";".join(repr(float(v)) for v in self.sin_theta_blocks)
        fields = [
            self.algorithm,
            str(self.n),
            str(self.k),
            self.spectrum,
            str(self.m),
            str(self.seed),
            repr(float(self.fro_err)),
            repr(float(self.sin_theta)),
            blocks,
            str(self.iters),
            repr(float(self.wall_ms)),
        ]
        if fro_abs:
            fields.append(repr(float(self.fro_err_abs)))
        return ",".join(fields)


_LIST_KEYS = {"sigma", "m", "seed"}
_BOOL_KEYS = {"smoothing", "resample", "fro_abs"}


def parse_config(text: str) -> ExperimentConfig:
    """Parse the flat key=value grammar into an ExperimentConfig."""
    values: dict[str, list[str]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not key or not val:
            raise ConfigError(f"line {lineno}: empty key or value")
        values.setdefault(key, []).append(val)

    def single(key: str, default=None):
        got = values.pop(key, None)
        if got is None:
            return default
        if len(got) > 1 and key not in _LIST_KEYS:
            raise ConfigError(f"key {key!r} given {len(got)} times; it is not a list key")
        return got[-1]

    def parse_bool(s: str) -> bool:
        low = s.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"not a boolean: {s!r}")

    try:
        algorithm = single("algorithm")
        if algorithm is None:
            raise ConfigError("missing required key 'algorithm'")
        n = int(single("n", 0))
        if n < 1:
            raise ConfigError("missing or invalid 'n'")
        sigma = [float(v) for v in values.pop("sigma", [])]
        if not sigma:
            raise ConfigError("at least one 'sigma' line is required")
        k = int(single("k", len(sigma)))
        budgets = tuple(int(v) for v in values.pop("m", []))
        seeds = tuple(int(v) for v in values.pop("seed", []))
        kwargs = dict(
            algorithm=algorithm,
            n=n,
            k=k,
            spectrum=tuple(sigma),
            budgets=budgets,
            seeds=seeds,
            noise_frobenius=float(single("noise_fro", 0.0)),
            master_seed=int(single("master_seed", 0)),
            eps=float(single("eps", 1e-3)),
            out=single("out"),
            fw_eps=float(single("fw_eps", 0.05)),
            power_iters=int(single("power_iters", DEFAULT_POWER_ITERS)),
            svd_iters=int(single("svd_iters", DEFAULT_SVD_ITERS)),
        )
        tb = single("trace_bound")
        if tb is not None:
            kwargs["trace_bound"] = float(tb)
        for key, conv in (
            ("lt", int),
            ("s_max", int),
            ("l_inner", int),
            ("gap_ratio", float),
            ("mu_star", float),
            ("mu0", float),
            ("delta", float),
        ):
            got = single(key)
            if got is not None:
                kwargs[key] = conv(got)
        for key in _BOOL_KEYS:
            got = single(key)
            if got is not None:
                kwargs[key] = parse_bool(got)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if values:
        raise ConfigError(f"unknown config keys: {sorted(values)}")
    return ExperimentConfig(**kwargs)


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def _cell_rng(config: ExperimentConfig, m_index: int, seed_index: int) -> np.random.Generator:
    seq = np.random.SeedSequence(
        entropy=(config.master_seed, m_index, config.seeds[seed_index])
    )
    return np.random.default_rng(seq)


def _sin_theta_general(u: np.ndarray, x: np.ndarray) -> float:
    """sin of the largest principal angle of span(U) against span(X).

    Handles X with fewer columns than U (the angle is then 1 whenever a
    direction of U escapes span(X)), via ||(I - X X^T) U||_2.
    """
    if x.shape[1] == 0:
        return 1.0
    c = u.T @ x
    gap = np.eye(u.shape[1]) - c @ c.T
    lam = np.linalg.eigvalsh(0.5 * (gap + gap.T))[-1]
    return float(np.sqrt(min(max(lam, 0.0), 1.0)))


def _block_angles(u: np.ndarray, x: np.ndarray, k: int) -> tuple[float, ...]:
    out = []
    for b in range(1, k + 1):
        if b > x.shape[1]:
            out.append(1.0)
        else:
            out.append(_sin_theta_general(u[:, :b], x[:, :b]))
    return tuple(out)


def _make_deflate_config(config: ExperimentConfig, m: int):
    overrides = {}
    for name in ("lt", "s_max", "l_inner", "gap_ratio", "mu_star", "mu0", "delta"):
        val = getattr(config, name)
        if val is not None:
            overrides[name] = val
    overrides["smoothing"] = config.smoothing
    overrides["resample"] = config.resample
    return default_schedule(config.n, config.k, config.eps, m, **overrides)


def _run_cell(config: ExperimentConfig, m_index: int, seed_index: int) -> ResultRow:
    m = config.budgets[m_index]
    seed = config.seeds[seed_index]
    rng = _cell_rng(config, m_index, seed_index)
    inst_rng, sample_rng, algo_rng = rng.spawn(3)

    instance = gen_planted(config.n, config.spectrum, config.noise_frobenius, inst_rng)
    p = m / (config.n * config.n)
    obs = sample_observations(instance.entry_oracle, config.n, p, sample_rng)

    t0 = time.perf_counter()
    if config.algorithm == "soft_deflate":
        dconf = _make_deflate_config(config, m)
        factors, trace = soft_deflate(obs, dconf, algo_rng)
        iters = len(trace.epochs)
        x_basis = factors.x
    elif config.algorithm == "naive_svd":
        factors = naive_svd_complete(obs, config.k, config.svd_iters, algo_rng)
        iters = config.svd_iters
        x_basis = factors.x
    else:
        trace_bound = (
            config.trace_bound if config.trace_bound is not None else instance.nuclear_norm
        )
        zsum, objective = frank_wolfe(
            obs, config.fw_eps, trace_bound, config.power_iters, algo_rng
        )
        iters = len(objective)
        x_basis = zsum.top_basis(min(config.k, zsum.rank))
        factors = _rank_one_sum_factors(zsum)
    wall_ms = (time.perf_counter() - t0) * 1e3

    fro_abs = fro_error_factored(instance, factors)
    fro_rel = fro_abs / instance.fro_norm
    return ResultRow(
        algorithm=config.algorithm,
        n=config.n,
        k=config.k,
        spectrum=config.spectrum_label,
        m=m,
        seed=seed,
        fro_err=fro_rel,
        sin_theta=_sin_theta_general(instance.u, x_basis),
        sin_theta_blocks=_block_angles(instance.u, x_basis, config.k),
        iters=iters,
        wall_ms=wall_ms,
        fro_err_abs=fro_abs,
    )


def _rank_one_sum_factors(zsum) -> Factors:
    return Factors(zsum.vectors, zsum.vectors * zsum.weights)


def default_thread_count() -> int:
    raw = os.environ.get(THREADS_ENV_VAR, "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def run_experiment(config: ExperimentConfig, threads: Optional[int] = None) -> list[ResultRow]:
    """Run every (budget, seed) cell of a config; rows come back in (m, seed) order."""
    cells = [
        (mi, si) for mi in range(len(config.budgets)) for si in range(len(config.seeds))
    ]
    threads = threads if threads is not None else default_thread_count()
    if threads <= 1 or len(cells) <= 1:
        return [_run_cell(config, mi, si) for mi, si in cells]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(_run_cell, config, mi, si) for mi, si in cells]
        return [f.result() for f in futures]


def sweep(configs: Sequence[ExperimentConfig], threads: Optional[int] = None) -> list[ResultRow]:
    """Concatenate run_experiment over several configs, in config order."""
    fro_flags = {c.fro_abs for c in configs}
    if len(fro_flags) > 1:
        raise ConfigError("sweep configs disagree on the fro_abs column (schema mismatch)")
    rows: list[ResultRow] = []
    for config in configs:
        rows.extend(run_experiment(config, threads))
    return rows


def rows_to_csv(rows: Sequence[ResultRow], fro_abs: bool = False) -> str:
    header = CSV_HEADER + (",fro_err_abs" if fro_abs else "")
    return "\n".join([header] + [row.to_csv(fro_abs) for row in rows]) + "\n"


def write_csv(path, rows: Sequence[ResultRow], fro_abs: bool = False) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(rows_to_csv(rows, fro_abs))


def generate_observation_file(config: ExperimentConfig, path) -> None:
    """Materialize the first (budget, seed) cell's sampled set to a text file."""
    rng = _cell_rng(config, 0, 0)
    inst_rng, sample_rng, _ = rng.spawn(3)
    instance = gen_planted(config.n, config.spectrum, config.noise_frobenius, inst_rng)
    p = config.budgets[0] / (config.n * config.n)
    obs = sample_observations(instance.entry_oracle, config.n, p, sample_rng)
    write_observations(path, obs)
