"""Geometric probes of the T² and U acceptance regions.

For a fixed scatter matrix the T² region is an ellipsoid in ``xbar`` and
therefore bounded, while the U region is a cylinder that is unbounded
along the ``p2``-dimensional subspace ``{xbar : xbar_{1:2} = 0}``. The
functions here measure exit radii along rays, test membership in the
dual cone of the restricted alternative, and evaluate the exponential
family half-spaces used to separate acceptance regions.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from . import _jsonfmt
from .errors import DimensionError, OutOfRangeError
from .invariant_tests import SufficientStats, compute_statistics
from .matrix_core import EPS, PartitionedSpdMatrix, b_plus, schur_complement
from .streams import substream, tag

INFINITE = math.inf


class Region(str, enum.Enum):
    T2 = "T2"
    U = "U"


class HalfSpaceVariant(str, enum.Enum):
    H_STAR = "H_STAR"
    H_A = "H_A"


@dataclass(frozen=True, eq=False)
class HalfSpaceSpec:
    """``{(xbar, S) : n theta' Sigma^{-1} xbar - tr(Sigma^{-1} Q) / 2 > c}``.

    ``Q = S`` for ``H_STAR`` and ``Q = S + n xbar xbar'`` for ``H_A``.
    """

    theta: NDArray
    sigma: PartitionedSpdMatrix
    c: float
    variant: HalfSpaceVariant = HalfSpaceVariant.H_STAR

    def __post_init__(self) -> None:
        theta = np.asarray(self.theta, dtype=np.float64)
        if theta.shape != (self.sigma.dim,):
            raise DimensionError(f"theta must have length {self.sigma.dim}")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "variant", HalfSpaceVariant(self.variant))


@dataclass(frozen=True, eq=False)
class ConeProbeResult:
    direction: NDArray
    exit_radius: float
    region: Region

    @property
    def infinite(self) -> bool:
        return math.isinf(self.exit_radius)

    def to_json_line(self) -> str:
        return _jsonfmt.dumps(
            {"region": self.region.value, "direction": self.direction.tolist(), "exit_radius": self.exit_radius}
        )


def _transformed_w1(w: NDArray, sigma: PartitionedSpdMatrix) -> NDArray:
    """First block of ``[[I, -Sigma12 Sigma22^{-1}], [0, I]] w``."""
    return w[: sigma.split] - sigma.s12 @ np.linalg.solve(sigma.s22, w[sigma.split :])


def dual_cone_membership(
    w: ArrayLike,
    sigma: PartitionedSpdMatrix,
    samples: int = 64,
    seed: int = 0,
    rtol: float = 1e-10,
) -> bool:
    """Whether ``w`` lies in the dual cone of ``{Sigma^{-1} theta : theta_2 = 0}``.

    ``w`` is first mapped by the covariate-whitening transform; it is
    accepted iff ``theta_1' Sigma_{11:2}^{-1} w~_1 <= 0`` for every sampled
    ``theta_1`` and for its negation, which holds exactly when ``w~_1 = 0``.
    The comparison uses a tolerance relative to ``|theta_1| |w|`` so the
    answer is invariant under positive scaling of ``w``.
    """
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (sigma.dim,):
        raise DimensionError(f"w must have length {sigma.dim}")
    if samples < 1:
        raise OutOfRangeError("samples must be >= 1")
    w1 = _transformed_w1(w, sigma)
    schur = schur_complement(sigma)
    g = np.linalg.solve(schur, w1)
    scale = np.linalg.norm(np.linalg.inv(schur), 2) * max(np.linalg.norm(w), np.finfo(float).tiny)
    rng = substream(seed, tag("dual_cone"))
    thetas = rng.standard_normal((samples, sigma.split))
    for th in thetas:
        for signed in (th, -th):
            if signed @ g > rtol * np.linalg.norm(signed) * scale:
                return False
    return True


def _quadratic(region: Region, d: NDArray, s: PartitionedSpdMatrix) -> tuple[float, float]:
    """Quadratic form of the region along ``d`` and the matrix norm used to judge zero."""
    if region is Region.T2:
        q = float(d @ np.linalg.solve(s.entries, d))
        return q, float(np.linalg.norm(np.linalg.inv(s.entries), 2))
    bp = b_plus(s)
    return float(d @ bp @ d), float(np.linalg.norm(bp, 2))


def region_exit_radius(
    region: Region | str,
    direction: ArrayLike,
    s: PartitionedSpdMatrix,
    n: int,
    k: float,
) -> ConeProbeResult:
    """Largest ``t`` with ``statistic(t * direction, S) <= k``.

    The statistic is ``n(n-1) t² q`` with ``q`` the quadratic form of
    ``S^{-1}`` (T²) or ``B+(S)`` (U) at the direction, so the radius is
    ``sqrt(k / (n(n-1) q))``, infinite when ``q`` vanishes to rounding.
    """
    region = Region(region.upper() if isinstance(region, str) else region)
    d = np.asarray(direction, dtype=np.float64)
    if d.shape != (s.dim,):
        raise DimensionError(f"direction must have length {s.dim}")
    norm = np.linalg.norm(d)
    if norm == 0:
        raise OutOfRangeError("direction must be nonzero")
    d = d / norm
    if not k > 0:
        raise OutOfRangeError(f"k must be > 0, got {k}")
    if n < 2:
        raise OutOfRangeError(f"n must be >= 2, got {n}")
    q, mat_norm = _quadratic(region, d, s)
    if q <= 64 * s.dim * EPS * mat_norm:
        radius = INFINITE
    else:
        radius = math.sqrt(k / (n * (n - 1) * q))
    return ConeProbeResult(direction=d, exit_radius=radius, region=region)


def random_directions(count: int, dim: int, seed: int) -> NDArray:
    rng = substream(seed, tag("directions"))
    d = rng.standard_normal((count, dim))
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def null_subspace_directions(s: PartitionedSpdMatrix, count: int, seed: int) -> NDArray:
    """Unit directions with vanishing adjusted first block: ``(S12 S22^{-1} d2, d2)``."""
    rng = substream(seed, tag("null_directions"))
    d2 = rng.standard_normal((count, s.p2))
    d1 = d2 @ np.linalg.solve(s.s22, s.s21)
    d = np.hstack([d1, d2])
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def exit_radius_sweep(
    region: Region | str,
    s: PartitionedSpdMatrix,
    n: int,
    k: float,
    directions: NDArray,
) -> list[ConeProbeResult]:
    return [region_exit_radius(region, d, s, n, k) for d in directions]


def half_space_value(spec: HalfSpaceSpec, stats: SufficientStats) -> float:
    if stats.dim != spec.sigma.dim:
        raise DimensionError("statistics and half-space dimensions differ")
    sig = spec.sigma.entries
    n = stats.n
    xbar = stats.xbar
    lin = n * float(spec.theta @ np.linalg.solve(sig, xbar))
    q = stats.scatter.entries
    if spec.variant is HalfSpaceVariant.H_A:
        q = q + n * np.outer(xbar, xbar)
    return lin - 0.5 * float(np.trace(np.linalg.solve(sig, q)))


def half_space_membership(spec: HalfSpaceSpec, stats: SufficientStats) -> bool:
    """Strict-inequality membership of ``(xbar, S)`` in the half-space."""
    return half_space_value(spec, stats) > spec.c


@dataclass(frozen=True)
class HalfSpaceProbe:
    accepted: int
    in_h_a: int
    in_h_star: int
    draws: int


def probe_au_half_space(
    theta: ArrayLike,
    sigma: PartitionedSpdMatrix,
    n: int,
    k: float,
    c: float,
    samples: int,
    seed: int = 0,
) -> HalfSpaceProbe:
    """Sample points of the U acceptance region and count those inside ``H_A`` and ``H_STAR``.

    Points are drawn as ``xbar ~ N(0, Sigma / n)`` and ``S`` from the
    null scatter distribution, and kept when ``U <= k``. Zero counts are
    evidence of disjointness at these parameters, never a proof.
    """
    from .power_lab import _draw  # local import: power_lab depends on this module's peers

    rng = substream(seed, tag("half_space_probe"))
    chol = np.linalg.cholesky(sigma.entries)
    h_a = HalfSpaceSpec(theta, sigma, c, HalfSpaceVariant.H_A)
    h_star = HalfSpaceSpec(theta, sigma, c, HalfSpaceVariant.H_STAR)
    accepted = in_a = in_star = draws = 0
    while accepted < samples:
        xbar, scatter = _draw(rng, 1, n, np.zeros(sigma.dim), chol)
        draws += 1
        st = SufficientStats.from_arrays(n, xbar[0], scatter[0], sigma.split)
        if compute_statistics(st).u > k:
            continue
        accepted += 1
        in_a += half_space_membership(h_a, st)
        in_star += half_space_membership(h_star, st)
    return HalfSpaceProbe(accepted=accepted, in_h_a=in_a, in_h_star=in_star, draws=draws)
