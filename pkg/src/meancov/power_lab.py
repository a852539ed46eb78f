"""Seeded Monte Carlo power laboratory for T², U and W.

Replicates are generated in fixed-size chunks; chunk ``c`` of a simulation
draws from the substream ``(seed, purpose, index, c)`` (see
:mod:`meancov.streams`). Chunk results are concatenated in chunk order, so
tables are bit-identical for any number of worker threads.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import stats as sps

from . import _jsonfmt
from .errors import ConfigError, DimensionError, NonPositiveDefiniteError
from .invariant_tests import IDENTITY_RTOL, invariant_params, statistics_batch
from .matrix_core import EPS, PartitionedSpdMatrix
from .streams import substream, tag

log = logging.getLogger(__name__)

TESTS = ("T2", "U", "W")
CHUNK_REPS = 2000
WILSON_Z = 1.959963984540054
TSV_COLUMNS = (
    "test", "n", "p1", "p2", "delta1", "delta2", "critical",
    "power", "ci_low", "ci_high", "reps", "resamples",
)


@dataclass(frozen=True, eq=False)
class SimConfig:
    seed: int
    reps: int
    n: int
    dim: int
    split: int
    alpha: float = 0.05
    sigma: PartitionedSpdMatrix | None = None
    theta_grid: tuple[tuple[float, ...], ...] = ()

    def __post_init__(self) -> None:
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.reps < 1:
            raise ConfigError(f"reps must be >= 1, got {self.reps}")
        if not 0 < self.split < self.dim:
            raise ConfigError(f"split must satisfy 0 < p1 < p={self.dim}, got {self.split}")
        if self.n < self.dim + 1:
            raise ConfigError(f"n must be >= p + 1 = {self.dim + 1}, got {self.n}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        sigma = self.sigma
        if sigma is None:
            sigma = PartitionedSpdMatrix(np.eye(self.dim), self.split)
        if sigma.dim != self.dim or sigma.split != self.split:
            raise ConfigError("sigma does not match (dim, split)")
        grid = tuple(tuple(float(v) for v in theta) for theta in self.theta_grid)
        for theta in grid:
            if len(theta) != self.dim:
                raise ConfigError(f"theta {theta} does not have length {self.dim}")
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "theta_grid", grid)

    @property
    def p1(self) -> int:
        return self.split

    @property
    def p2(self) -> int:
        return self.dim - self.split

    def to_dict(self) -> dict[str, Any]:
        """Canonical plain-data form (the input to the manifest's config hash)."""
        return {
            "seed": self.seed,
            "reps": self.reps,
            "n": self.n,
            "p": self.dim,
            "p1": self.split,
            "alpha": self.alpha,
            "sigma": self.sigma.entries.tolist(),
            "theta_grid": [list(t) for t in self.theta_grid],
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SimConfig":
        known = {"seed", "reps", "n", "p", "p1", "alpha", "sigma", "theta_grid"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            p = int(d["p"])
            p1 = int(d["p1"])
            sigma = d.get("sigma")
            grid = d.get("theta_grid", [[0.0] * p])
            return cls(
                seed=int(d.get("seed", 0)),
                reps=int(d["reps"]),
                n=int(d["n"]),
                dim=p,
                split=p1,
                alpha=float(d.get("alpha", 0.05)),
                sigma=None if sigma is None else PartitionedSpdMatrix(np.asarray(sigma, dtype=float), p1),
                theta_grid=tuple(tuple(float(v) for v in t) for t in grid),
            )
        except KeyError as exc:
            raise ConfigError(f"missing config key {exc.args[0]!r}") from exc
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc


@dataclass(frozen=True)
class PowerRow:
    test_id: str
    delta1: float
    delta2: float
    power_hat: float
    ci_low: float
    ci_high: float
    reps: int
    critical_value: float
    n: int = 0
    p1: int = 0
    p2: int = 0
    resamples: int = 0

    def tsv_fields(self) -> list[str]:
        f = _jsonfmt.fmt17
        return [
            self.test_id, str(self.n), str(self.p1), str(self.p2),
            f(self.delta1), f(self.delta2), f(self.critical_value),
            f(self.power_hat), f(self.ci_low), f(self.ci_high),
            str(self.reps), str(self.resamples),
        ]


@dataclass
class SimBatch:
    """Statistics of ``reps`` replicates and the number of resampled degenerate ones."""

    stats: dict[str, NDArray]
    resamples: int = 0
    chunks: int = 0
    extra: dict[str, Any] = field(default_factory=dict)


def wilson_interval(successes: int, trials: int, z: float = WILSON_Z) -> tuple[float, float]:
    if trials <= 0:
        raise ValueError("trials must be positive")
    phat = successes / trials
    denom = 1.0 + z * z / trials
    centre = (phat + z * z / (2 * trials)) / denom
    half = z / denom * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials))
    return max(0.0, centre - half), min(1.0, centre + half)


def _cholesky(sigma: PartitionedSpdMatrix) -> NDArray:
    try:
        return np.linalg.cholesky(sigma.entries)
    except np.linalg.LinAlgError as exc:
        raise NonPositiveDefiniteError("sigma is not positive definite") from exc


def sample_dataset(rng: np.random.Generator, n: int, theta: ArrayLike, sigma: PartitionedSpdMatrix) -> NDArray:
    """``n`` iid rows ``theta + L z`` with ``L L' = sigma`` and ``z`` standard normal."""
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (sigma.dim,):
        raise DimensionError(f"theta must have length {sigma.dim}")
    chol = _cholesky(sigma)
    return theta + rng.standard_normal((n, sigma.dim)) @ chol.T


def _draw(rng: np.random.Generator, size: int, n: int, theta: NDArray, chol: NDArray) -> tuple[NDArray, NDArray]:
    x = theta + rng.standard_normal((size, n, theta.size)) @ chol.T
    xbar = x.mean(axis=1)
    centered = x - xbar[:, None, :]
    scatter = np.einsum("rni,rnj->rij", centered, centered)
    return xbar, 0.5 * (scatter + np.swapaxes(scatter, 1, 2))


def _degenerate(scatter: NDArray) -> NDArray:
    w = np.linalg.eigvalsh(scatter)
    p = scatter.shape[-1]
    return w[:, 0] <= p * EPS * np.abs(w[:, -1])


def _simulate_chunk(rng: np.random.Generator, size: int, n: int, theta: NDArray, chol: NDArray, split: int) -> SimBatch:
    xbar, scatter = _draw(rng, size, n, theta, chol)
    resamples = 0
    bad = _degenerate(scatter)
    while bad.any():
        idx = np.flatnonzero(bad)
        resamples += idx.size
        xb, sc = _draw(rng, idx.size, n, theta, chol)
        xbar[idx] = xb
        scatter[idx] = sc
        bad = np.zeros_like(bad)
        bad[idx] = _degenerate(sc)
    stats = statistics_batch(xbar, scatter, n, split)
    # T² = U + M on every replicate.
    gap = np.abs(stats["t2"] - stats["u"] - stats["m"])
    worst = float(np.max(gap / np.maximum(stats["t2"], np.finfo(float).tiny)))
    if worst > IDENTITY_RTOL:
        raise ArithmeticError(f"T^2 = U + M violated on a replicate (relative gap {worst:.3e})")
    return SimBatch(stats=stats, resamples=resamples, chunks=1, extra={"identity_gap": worst})


def simulate_statistics(
    seed: int,
    key: Sequence[int],
    reps: int,
    n: int,
    theta: ArrayLike,
    sigma: PartitionedSpdMatrix,
    workers: int = 1,
) -> SimBatch:
    """T², U, M and W for ``reps`` datasets drawn at ``(theta, sigma)``.

    ``key`` selects the substream family; chunk ``c`` draws from
    ``substream(seed, *key, c)``.
    """
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (sigma.dim,):
        raise DimensionError(f"theta must have length {sigma.dim}")
    chol = _cholesky(sigma)
    sizes = [min(CHUNK_REPS, reps - s) for s in range(0, reps, CHUNK_REPS)]

    def run(c: int) -> SimBatch:
        return _simulate_chunk(substream(seed, *key, c), sizes[c], n, theta, chol, sigma.split)

    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    else:
        parts = [run(c) for c in range(len(sizes))]
    stats = {name: np.concatenate([b.stats[name] for b in parts]) for name in parts[0].stats}
    return SimBatch(
        stats=stats,
        resamples=sum(b.resamples for b in parts),
        chunks=len(parts),
        extra={"identity_gap": max(b.extra["identity_gap"] for b in parts)},
    )


def _stat_key(test_id: str) -> str:
    if test_id not in TESTS:
        raise ConfigError(f"unknown test {test_id!r}; expected one of {TESTS}")
    return test_id.lower()


def t2_reference_critical(n: int, p: int, alpha: float) -> float:
    """Exact null critical value of T²: ``(n-1) p / (n-p) * F_{1-alpha}(p, n-p)``."""
    return (n - 1) * p / (n - p) * float(sps.f.ppf(1.0 - alpha, p, n - p))


def calibrate_critical(cfg: SimConfig, test_id: str, workers: int = 1) -> float:
    """Empirical upper-``alpha`` point of the statistic under ``theta = 0``.

    Each test uses its own calibration substream. The value is the
    ``ceil((1 - alpha) reps)``-th order statistic, so a test rejecting on
    ``statistic > critical`` has empirical size at most ``alpha`` on the
    calibration sample.
    """
    key = _stat_key(test_id)
    batch = simulate_statistics(
        cfg.seed, (tag("calibrate"), TESTS.index(test_id)), cfg.reps, cfg.n,
        np.zeros(cfg.dim), cfg.sigma, workers,
    )
    crit = float(np.quantile(batch.stats[key], 1.0 - cfg.alpha, method="inverted_cdf"))
    if test_id == "T2":
        ref = t2_reference_critical(cfg.n, cfg.dim, cfg.alpha)
        log.debug("T2 critical: Monte Carlo %.6g vs F reference %.6g", crit, ref)
        if abs(crit - ref) > 0.02 * ref:
            log.warning("T2 Monte Carlo critical %.6g is more than 2%% from the F reference %.6g", crit, ref)
    return crit


def _rows_for_point(cfg: SimConfig, batch: SimBatch, theta: tuple[float, ...], crits: dict[str, float]) -> list[PowerRow]:
    params = invariant_params(theta, cfg.sigma, cfg.n)
    rows = []
    for test_id, crit in crits.items():
        rejections = int(np.count_nonzero(batch.stats[_stat_key(test_id)] > crit))
        lo, hi = wilson_interval(rejections, cfg.reps)
        rows.append(
            PowerRow(
                test_id=test_id,
                delta1=params.delta1,
                delta2=params.delta2,
                power_hat=rejections / cfg.reps,
                ci_low=lo,
                ci_high=hi,
                reps=cfg.reps,
                critical_value=crit,
                n=cfg.n,
                p1=cfg.p1,
                p2=cfg.p2,
                resamples=batch.resamples,
            )
        )
    return rows


def _power_batches(cfg: SimConfig, workers: int):
    for gi, theta in enumerate(cfg.theta_grid):
        batch = simulate_statistics(cfg.seed, (tag("power"), gi), cfg.reps, cfg.n, theta, cfg.sigma, workers)
        yield gi, theta, batch


def estimate_power(cfg: SimConfig, test_id: str, critical_value: float, workers: int = 1) -> list[PowerRow]:
    """Rejection frequency of ``statistic > critical_value`` at every grid point.

    All tests share the power substream of a grid point, so their rows are
    computed from the same simulated datasets.
    """
    _stat_key(test_id)
    if not critical_value >= 0:
        raise ConfigError(f"critical value must be >= 0, got {critical_value}")
    rows = []
    for _, theta, batch in _power_batches(cfg, workers):
        rows.extend(_rows_for_point(cfg, batch, theta, {test_id: critical_value}))
    return rows


def _sort_key(indexed: tuple[int, PowerRow]) -> tuple:
    gi, row = indexed
    return (TESTS.index(row.test_id), row.delta1, row.delta2, gi)


def power_table(cfg: SimConfig, workers: int = 1, crits: dict[str, float] | None = None) -> list[PowerRow]:
    """Calibrate all three tests and estimate their power on the grid.

    Rows are sorted by (test, delta1, delta2, grid position).
    """
    if crits is None:
        crits = {t: calibrate_critical(cfg, t, workers) for t in TESTS}
    indexed: list[tuple[int, PowerRow]] = []
    for gi, theta, batch in _power_batches(cfg, workers):
        indexed.extend((gi, row) for row in _rows_for_point(cfg, batch, theta, crits))
    return [row for _, row in sorted(indexed, key=_sort_key)]


def format_tsv(rows: Sequence[PowerRow]) -> str:
    lines = ["\t".join(TSV_COLUMNS)]
    lines.extend("\t".join(r.tsv_fields()) for r in rows)
    return "\n".join(lines) + "\n"


def parse_tsv(text: str) -> list[dict[str, str]]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header = lines[0].split("\t")
    return [dict(zip(header, ln.split("\t"))) for ln in lines[1:]]
