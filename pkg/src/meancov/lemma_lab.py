"""Randomized numerical checks of the matrix inequalities behind the covariate-adjusted U test.

Each verifier draws independent trials from substreams addressed by
``(seed, lemma, trial index)``, evaluates a margin that is nonnegative when
the claimed inequality holds, and reports the most negative margin seen
together with the first violating instance. Margins are normalized by the
spectral scale of the matrices being compared.

A FAIL verdict is a numerical finding about the claim being checked, not a
malfunction of the verifier.
"""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from numpy.typing import NDArray

from . import _jsonfmt
from .errors import ConfigError
from .invariant_tests import SufficientStats, compute_statistics, t2_statistic
from .matrix_core import (
    PartitionedSpdMatrix,
    b_mp,
    b_plus,
    gen_inv_quadratic,
    loewner_compare,
    pseudo_inverse,
    symmetrize,
)
from .streams import random_spd, substream, tag

CHUNK = 256


class LemmaId(str, enum.Enum):
    L1_BPLUS_CONVEX = "L1_BPLUS_CONVEX"
    L2_PENROSE = "L2_PENROSE"
    L4_B_CONCAVE = "L4_B_CONCAVE"
    L6_QUAD_CONVEX = "L6_QUAD_CONVEX"
    EQ28_CHAIN = "EQ28_CHAIN"
    EQ29_CHAIN = "EQ29_CHAIN"
    THM1_AU_CONVEX = "THM1_AU_CONVEX"
    T2_REGION_CONVEX = "T2_REGION_CONVEX"
    W_REGION_NONCONVEX = "W_REGION_NONCONVEX"


class ReportVerdict(str, enum.Enum):
    PASS = "PASS"
    FAIL = "FAIL"
    WITNESS_FOUND = "WITNESS_FOUND"


@dataclass(frozen=True)
class VerifierConfig:
    """Settings shared by all verifiers.

    ``n`` and ``k`` only matter for the acceptance-region checks; when ``k``
    is ``None`` the region verifiers use the median statistic of a pilot
    sample (and the W search uses 1).
    """

    seed: int = 0
    trials: int = 1000
    dim: int = 4
    split: int = 2
    tol: float = 1e-8
    step: float = 1e-3
    n: int | None = None
    k: float | None = None
    include_canonical: bool = True
    workers: int = 1

    def __post_init__(self) -> None:
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if not 0 < self.split < self.dim:
            raise ConfigError(f"split must satisfy 0 < p1 < p={self.dim}, got {self.split}")
        if not self.tol > 0:
            raise ConfigError(f"tol must be positive, got {self.tol}")
        if not 0 < self.step < 0.5:
            raise ConfigError(f"step must lie in (0, 0.5), got {self.step}")
        if self.n is None:
            object.__setattr__(self, "n", max(10, self.dim + 1))
        if self.n < self.dim + 1:
            raise ConfigError(f"n must be >= p + 1 = {self.dim + 1}, got {self.n}")
        if self.k is not None and not self.k > 0:
            raise ConfigError(f"k must be positive, got {self.k}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")


@dataclass
class VerifierReport:
    lemma_id: LemmaId
    seed: int
    trials_run: int
    worst_violation: float
    tol: float
    verdict: ReportVerdict
    violations: int = 0
    witness: dict[str, Any] | None = None
    details: dict[str, Any] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        """True for PASS, and for WITNESS_FOUND on the W search (the expected outcome)."""
        if self.verdict is ReportVerdict.WITNESS_FOUND:
            return self.lemma_id is LemmaId.W_REGION_NONCONVEX
        return self.verdict is ReportVerdict.PASS

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "lemma_id": self.lemma_id.value,
            "seed": self.seed,
            "trials": self.trials_run,
            "worst_violation": self.worst_violation,
            "tol": self.tol,
            "verdict": self.verdict.value,
            "violations": self.violations,
        }
        if self.witness is not None:
            out["witness"] = self.witness
        if self.details:
            out["details"] = self.details
        return out

    def to_json_line(self) -> str:
        return _jsonfmt.dumps(self.to_dict())


@dataclass
class _Outcome:
    margin: float
    violated: bool
    witness: dict[str, Any] | None = None
    extra: dict[str, float] = field(default_factory=dict)


TrialFn = Callable[[np.random.Generator, int], _Outcome]


def _trial_rng(cfg: VerifierConfig, lemma: LemmaId, index: int) -> np.random.Generator:
    return substream(cfg.seed, tag(lemma.value), 0, index)


def _run_chunk(cfg: VerifierConfig, lemma: LemmaId, fn: TrialFn, start: int, stop: int) -> list[_Outcome]:
    return [fn(_trial_rng(cfg, lemma, i), i) for i in range(start, stop)]


def _run_trials(
    cfg: VerifierConfig,
    lemma: LemmaId,
    fn: TrialFn,
    stop_early: Callable[[_Outcome], bool] | None = None,
) -> list[_Outcome]:
    """Evaluate trials ``0 .. cfg.trials-1`` in index order.

    Chunks may run on several threads, but outcomes are always assembled by
    trial index. With ``stop_early`` the run ends after the first chunk
    group containing a matching outcome and is truncated just past it, so
    the result does not depend on the worker count.
    """
    bounds = [(s, min(s + CHUNK, cfg.trials)) for s in range(0, cfg.trials, CHUNK)]
    outcomes: list[_Outcome] = []
    group = max(cfg.workers, 1)
    pool = ThreadPoolExecutor(max_workers=cfg.workers) if cfg.workers > 1 else None
    try:
        for g in range(0, len(bounds), group):
            batch = bounds[g : g + group]
            if pool is None:
                parts = [_run_chunk(cfg, lemma, fn, s, e) for s, e in batch]
            else:
                parts = list(pool.map(lambda b: _run_chunk(cfg, lemma, fn, *b), batch))
            for part in parts:
                outcomes.extend(part)
            if stop_early is not None:
                for i, o in enumerate(outcomes):
                    if stop_early(o):
                        return outcomes[: i + 1]
    finally:
        if pool is not None:
            pool.shutdown()
    return outcomes


def _summarize(
    cfg: VerifierConfig, lemma: LemmaId, outcomes: list[_Outcome], details: dict[str, Any] | None = None
) -> VerifierReport:
    worst = min((o.margin for o in outcomes), default=0.0)
    violated = [o for o in outcomes if o.violated]
    verdict = ReportVerdict.FAIL if violated or worst < -cfg.tol else ReportVerdict.PASS
    return VerifierReport(
        lemma_id=lemma,
        seed=cfg.seed,
        trials_run=len(outcomes),
        worst_violation=worst,
        tol=cfg.tol,
        verdict=verdict,
        violations=len(violated),
        witness=violated[0].witness if violated else None,
        details=details or {},
    )


def _mat(a: NDArray) -> list[list[float]]:
    return np.asarray(a).tolist()


# ---------------------------------------------------------------------------
# segment convexity / concavity of B+ and B


def bplus_chord_gap(s: NDArray, t: NDArray, alpha: float, split: int, tol: float = 1e-8):
    """Loewner check of ``alpha B+(S) + (1-alpha) B+(T) >= B+(alpha S + (1-alpha) T)``."""
    mid = PartitionedSpdMatrix(alpha * s + (1 - alpha) * t, split)
    avg = alpha * b_plus(PartitionedSpdMatrix(s, split)) + (1 - alpha) * b_plus(PartitionedSpdMatrix(t, split))
    return loewner_compare(avg, b_plus(mid), tol)


def b_chord_gap(s: NDArray, t: NDArray, alpha: float, split: int, tol: float = 1e-8):
    """Loewner check of ``B(alpha S + (1-alpha) T) >= alpha B(S) + (1-alpha) B(T)``."""
    mid = PartitionedSpdMatrix(alpha * s + (1 - alpha) * t, split)
    avg = alpha * b_mp(PartitionedSpdMatrix(s, split)) + (1 - alpha) * b_mp(PartitionedSpdMatrix(t, split))
    return loewner_compare(b_mp(mid), avg, tol)


def second_difference(fn: Callable[[NDArray], NDArray], s: NDArray, t: NDArray, alpha: float, h: float) -> tuple[NDArray, float]:
    """Matrix second central difference of ``a -> fn((1-a) S + a T)`` at ``alpha``.

    Also returns the spectral norm of ``fn`` at ``alpha`` for normalization.
    """

    def psi(a: float) -> NDArray:
        return fn((1 - a) * s + a * t)

    centre = psi(alpha)
    d2 = psi(alpha + h) - 2 * centre + psi(alpha - h)
    return symmetrize(d2), float(np.linalg.norm(centre, 2))


def _segment_trial(cfg: VerifierConfig, builder, sign: int) -> TrialFn:
    """Shared trial for the B+ convexity (sign=+1) and B concavity (sign=-1) checks."""
    p, p1, h = cfg.dim, cfg.split, cfg.step
    gap = bplus_chord_gap if sign > 0 else b_chord_gap

    def fn(rng: np.random.Generator, index: int) -> _Outcome:
        s = random_spd(rng, p)
        t = random_spd(rng, p)
        alpha = float(rng.uniform())
        chord = gap(s, t, alpha, p1, cfg.tol)

        a0 = float(rng.uniform(h, 1 - h))
        v = rng.standard_normal(p)
        v /= np.linalg.norm(v)
        d2, norm = second_difference(lambda m: builder(PartitionedSpdMatrix(m, p1)), s, t, a0, h)
        d2 = sign * d2
        curv_scale = max(norm, 1.0)
        scalar = float(v @ d2 @ v) / curv_scale
        matrix = float(np.linalg.eigvalsh(d2)[0]) / curv_scale
        scalar_bad = scalar < -cfg.tol
        matrix_bad = matrix < -cfg.tol

        violated = (not chord.holds) or scalar_bad
        witness = None
        if violated:
            witness = {
                "index": index,
                "S": _mat(s),
                "T": _mat(t),
                "alpha": alpha,
                "min_eig": chord.min_eig,
                "scale": chord.scale,
                "curvature_alpha": a0,
                "curvature_direction": v.tolist(),
                "curvature": scalar,
            }
        return _Outcome(
            margin=min(chord.margin, scalar),
            violated=violated,
            witness=witness,
            extra={
                "chord": chord.margin,
                "chord_bad": float(not chord.holds),
                "scalar": scalar,
                "scalar_bad": float(scalar_bad),
                "matrix_bad": float(matrix_bad),
                # a negative scalar curvature forces a negative matrix curvature
                "disagree": float(scalar_bad and not matrix_bad),
            },
        )

    return fn


def _segment_details(outcomes: list[_Outcome]) -> dict[str, Any]:
    ex = [o.extra for o in outcomes]
    return {
        "chord_worst": min(e["chord"] for e in ex),
        "chord_violations": int(sum(e["chord_bad"] for e in ex)),
        "curvature_worst": min(e["scalar"] for e in ex),
        "curvature_violations": int(sum(e["scalar_bad"] for e in ex)),
        "matrix_curvature_violations": int(sum(e["matrix_bad"] for e in ex)),
        "sign_disagreements": int(sum(e["disagree"] for e in ex)),
    }


def verify_bplus_convex(cfg: VerifierConfig) -> VerifierReport:
    """Matrix convexity of ``S -> B+(S)`` along random segments of p.d. matrices.

    Each trial checks the chord inequality at a random ``alpha`` in the
    Loewner order, and the scalar second central difference of
    ``alpha -> v' B+((1-alpha) S + alpha T) v`` for a random unit ``v``.
    """
    outcomes = _run_trials(cfg, LemmaId.L1_BPLUS_CONVEX, _segment_trial(cfg, b_plus, +1))
    return _summarize(cfg, LemmaId.L1_BPLUS_CONVEX, outcomes, _segment_details(outcomes))


def verify_b_concave(cfg: VerifierConfig) -> VerifierReport:
    """Matrix concavity of ``S -> B(S)``; mirror image of :func:`verify_bplus_convex`."""
    outcomes = _run_trials(cfg, LemmaId.L4_B_CONCAVE, _segment_trial(cfg, b_mp, -1))
    return _summarize(cfg, LemmaId.L4_B_CONCAVE, outcomes, _segment_details(outcomes))


# ---------------------------------------------------------------------------
# Penrose conditions


def penrose_residuals(bp: NDArray, bm: NDArray) -> tuple[float, float, float, float]:
    """Scale-free residuals of the four Penrose conditions for ``bm = bp^+``."""
    nb = float(np.linalg.norm(bm, 2))
    np_ = float(np.linalg.norm(bp, 2))
    tiny = np.finfo(float).tiny
    bm_bp = bm @ bp
    bp_bm = bp @ bm
    r1 = np.linalg.norm(bm_bp @ bm - bm, 2) / max(nb * nb * np_, tiny)
    r2 = np.linalg.norm(bp_bm @ bp - bp, 2) / max(np_ * np_ * nb, tiny)
    r3 = np.linalg.norm(bm_bp - bm_bp.T, 2) / max(nb * np_, tiny)
    r4 = np.linalg.norm(bp_bm - bp_bm.T, 2) / max(nb * np_, tiny)
    return float(r1), float(r2), float(r3), float(r4)


def verify_penrose(cfg: VerifierConfig) -> VerifierReport:
    p, p1 = cfg.dim, cfg.split

    def fn(rng: np.random.Generator, index: int) -> _Outcome:
        s = random_spd(rng, p)
        m = PartitionedSpdMatrix(s, p1)
        res = penrose_residuals(b_plus(m), b_mp(m))
        worst = max(res)
        bad = worst > cfg.tol
        return _Outcome(
            margin=-worst,
            violated=bad,
            witness={"index": index, "S": _mat(s), "residuals": list(res)} if bad else None,
            extra={f"r{i + 1}": r for i, r in enumerate(res)},
        )

    outcomes = _run_trials(cfg, LemmaId.L2_PENROSE, fn)
    details = {f"max_r{i}": max(o.extra[f"r{i}"] for o in outcomes) for i in range(1, 5)}
    return _summarize(cfg, LemmaId.L2_PENROSE, outcomes, details)


# ---------------------------------------------------------------------------
# generalized-inverse quadratic form and the chain for the U region


def verify_quad_convex(cfg: VerifierConfig) -> VerifierReport:
    """Subadditivity ``f(x+y, A1+A2) <= f(x, A1) + f(y, A2)`` of ``f(x, A) = x'A^+x``.

    ``A1`` and ``A2`` share a random column space of random rank ``r`` and
    ``x``, ``y`` lie in it.
    """
    p = cfg.dim

    def fn(rng: np.random.Generator, index: int) -> _Outcome:
        r = int(rng.integers(1, p + 1))
        basis = rng.standard_normal((p, r))
        a1 = symmetrize(basis @ random_spd(rng, r) @ basis.T)
        a2 = symmetrize(basis @ random_spd(rng, r) @ basis.T)
        x = basis @ rng.standard_normal(r)
        y = basis @ rng.standard_normal(r)
        lhs = gen_inv_quadratic(x + y, a1 + a2)
        rhs = gen_inv_quadratic(x, a1) + gen_inv_quadratic(y, a2)
        margin = (rhs - lhs) / max(abs(rhs), abs(lhs), 1.0)
        bad = margin < -cfg.tol
        witness = None
        if bad:
            witness = {"index": index, "A1": _mat(a1), "A2": _mat(a2), "x": x.tolist(), "y": y.tolist()}
        return _Outcome(margin=margin, violated=bad, witness=witness)

    outcomes = _run_trials(cfg, LemmaId.L6_QUAD_CONVEX, fn)
    return _summarize(cfg, LemmaId.L6_QUAD_CONVEX, outcomes)


def verify_mixed_inverse_bound(cfg: VerifierConfig) -> VerifierReport:
    """``B+(alpha S + (1-alpha) T) <= (alpha B(S) + (1-alpha) B(T))^+`` in the Loewner order."""
    p, p1 = cfg.dim, cfg.split

    def fn(rng: np.random.Generator, index: int) -> _Outcome:
        s = random_spd(rng, p)
        t = random_spd(rng, p)
        alpha = float(rng.uniform())
        mix = alpha * b_mp(PartitionedSpdMatrix(s, p1)) + (1 - alpha) * b_mp(PartitionedSpdMatrix(t, p1))
        rep = loewner_compare(pseudo_inverse(mix), b_plus(PartitionedSpdMatrix(alpha * s + (1 - alpha) * t, p1)), cfg.tol)
        witness = None
        if not rep.holds:
            witness = {"index": index, "S": _mat(s), "T": _mat(t), "alpha": alpha, "min_eig": rep.min_eig}
        return _Outcome(margin=rep.margin, violated=not rep.holds, witness=witness)

    outcomes = _run_trials(cfg, LemmaId.EQ28_CHAIN, fn)
    return _summarize(cfg, LemmaId.EQ28_CHAIN, outcomes)


def u_chain_terms(x: NDArray, y: NDArray, s: NDArray, t: NDArray, alpha: float, split: int) -> tuple[float, float, float]:
    """Left, middle and right members of the two-step bound on U at a convex combination.

    ``left   = z' B+(alpha S + (1-alpha) T) z`` with ``z = alpha x + (1-alpha) y``
    ``middle = z' (alpha B(S) + (1-alpha) B(T))^+ z``
    ``right  = alpha x' B+(S) x + (1-alpha) y' B+(T) y``
    """
    ms = PartitionedSpdMatrix(s, split)
    mt = PartitionedSpdMatrix(t, split)
    z = alpha * x + (1 - alpha) * y
    left = float(z @ b_plus(PartitionedSpdMatrix(alpha * s + (1 - alpha) * t, split)) @ z)
    middle = gen_inv_quadratic(z, alpha * b_mp(ms) + (1 - alpha) * b_mp(mt))
    right = alpha * float(x @ b_plus(ms) @ x) + (1 - alpha) * float(y @ b_plus(mt) @ y)
    return left, middle, right


def verify_u_chain(cfg: VerifierConfig) -> VerifierReport:
    p, p1 = cfg.dim, cfg.split

    def fn(rng: np.random.Generator, index: int) -> _Outcome:
        s = random_spd(rng, p)
        t = random_spd(rng, p)
        x = rng.standard_normal(p)
        y = rng.standard_normal(p)
        alpha = float(rng.uniform())
        left, middle, right = u_chain_terms(x, y, s, t, alpha, p1)
        scale = max(abs(left), abs(middle), abs(right), 1.0)
        first = (middle - left) / scale
        second = (right - middle) / scale
        bad = min(first, second) < -cfg.tol
        witness = None
        if bad:
            witness = {
                "index": index, "xbar": x.tolist(), "ybar": y.tolist(), "S": _mat(s), "T": _mat(t),
                "alpha": alpha, "left": left, "middle": middle, "right": right,
            }
        return _Outcome(
            margin=min(first, second),
            violated=bad,
            witness=witness,
            extra={"first": first, "second": second},
        )

    outcomes = _run_trials(cfg, LemmaId.EQ29_CHAIN, fn)
    details = {
        "first_worst": min(o.extra["first"] for o in outcomes),
        "first_violations": sum(o.extra["first"] < -cfg.tol for o in outcomes),
        "second_worst": min(o.extra["second"] for o in outcomes),
        "second_violations": sum(o.extra["second"] < -cfg.tol for o in outcomes),
    }
    return _summarize(cfg, LemmaId.EQ29_CHAIN, outcomes, details)


# ---------------------------------------------------------------------------
# acceptance regions in (xbar, S)

MAX_REJECTIONS = 10_000


def region_statistic(region: str, xbar: NDArray, s: NDArray, n: int, split: int) -> float:
    """T², U or W for a point ``(xbar, S)``; ``region`` is ``"T2"``, ``"U"`` or ``"W"``."""
    st = SufficientStats.from_arrays(n, xbar, s, split)
    if region == "T2":
        return t2_statistic(st)
    stats = compute_statistics(st)
    if region == "U":
        return stats.u
    if region == "W":
        return stats.w
    raise ConfigError(f"unknown region {region!r}")


def _draw_point(rng: np.random.Generator, p: int) -> tuple[NDArray, NDArray]:
    return rng.standard_normal(p), random_spd(rng, p)


def pilot_threshold(cfg: VerifierConfig, lemma: LemmaId, region: str, size: int = 257) -> float:
    """Median of the region statistic over a pilot sample (own substream)."""
    rng = substream(cfg.seed, tag(lemma.value), 1)
    vals = [region_statistic(region, *_draw_point(rng, cfg.dim), cfg.n, cfg.split) for _ in range(size)]
    return float(np.median(vals))


def _draw_accepted(rng: np.random.Generator, cfg: VerifierConfig, region: str, k: float) -> tuple[NDArray, NDArray, float]:
    for _ in range(MAX_REJECTIONS):
        x, s = _draw_point(rng, cfg.dim)
        val = region_statistic(region, x, s, cfg.n, cfg.split)
        if val <= k:
            return x, s, val
    raise RuntimeError(f"no accepted point for region {region} at k={k} after {MAX_REJECTIONS} draws")


_REGION_LEMMA = {"U": LemmaId.THM1_AU_CONVEX, "T2": LemmaId.T2_REGION_CONVEX}


def verify_region_convex(cfg: VerifierConfig, region: str = "U") -> VerifierReport:
    """Joint convexity in ``(xbar, S)`` of the acceptance region of T² or U.

    Pairs of accepted points are drawn by rejection sampling; the same
    random ``alpha`` combines both the means and the scatter matrices, and
    the combination must satisfy ``statistic <= k`` up to ``tol * max(k, 1)``.
    """
    region = region.upper()
    if region not in _REGION_LEMMA:
        raise ConfigError(f"region must be 'U' or 'T2', got {region!r}")
    lemma = _REGION_LEMMA[region]
    k = cfg.k if cfg.k is not None else pilot_threshold(cfg, lemma, region)

    def fn(rng: np.random.Generator, index: int) -> _Outcome:
        x, s, va = _draw_accepted(rng, cfg, region, k)
        y, t, vb = _draw_accepted(rng, cfg, region, k)
        alpha = float(rng.uniform())
        mid = region_statistic(region, alpha * x + (1 - alpha) * y, alpha * s + (1 - alpha) * t, cfg.n, cfg.split)
        margin = (k - mid) / max(k, 1.0)
        bad = margin < -cfg.tol
        witness = None
        if bad:
            witness = {
                "index": index, "n": cfg.n, "k": k, "alpha": alpha,
                "xbar_a": x.tolist(), "S_a": _mat(s), "stat_a": va,
                "xbar_b": y.tolist(), "S_b": _mat(t), "stat_b": vb,
                "stat_mid": mid,
            }
        return _Outcome(margin=margin, violated=bad, witness=witness)

    outcomes = _run_trials(cfg, lemma, fn)
    return _summarize(cfg, lemma, outcomes, {"region": region, "k": k, "n": cfg.n})


CANONICAL_W = {
    "n": 2,
    "split": 1,
    "xbar_a": [1.0, 1.0],
    "xbar_b": [1.0, -1.0],
    "scatter": [[1.0, 0.0], [0.0, 1.0]],
}


def canonical_w_check(k: float = 1.0) -> dict[str, Any]:
    """Evaluate W at two points sharing ``S = I`` and at their midpoint (``n = 2``)."""
    c = CANONICAL_W
    s = np.asarray(c["scatter"])
    xa = np.asarray(c["xbar_a"])
    xb = np.asarray(c["xbar_b"])
    wa = region_statistic("W", xa, s, c["n"], c["split"])
    wb = region_statistic("W", xb, s, c["n"], c["split"])
    wm = region_statistic("W", 0.5 * (xa + xb), s, c["n"], c["split"])
    return {
        "kind": "canonical", "n": c["n"], "k": k,
        "xbar_a": c["xbar_a"], "xbar_b": c["xbar_b"], "scatter": c["scatter"],
        "w_a": wa, "w_b": wb, "w_mid": wm,
        "is_witness": bool(wa <= k and wb <= k and wm > k),
    }


def find_w_nonconvexity(cfg: VerifierConfig) -> VerifierReport:
    """Search for two points of the W acceptance region whose midpoint is rejected.

    The canonical two-dimensional pair is checked first (unless disabled);
    the random search at ``cfg.dim`` then runs until its first witness or
    until ``cfg.trials`` pairs have been tried.
    """
    lemma = LemmaId.W_REGION_NONCONVEX
    k = cfg.k if cfg.k is not None else 1.0
    canonical = canonical_w_check(k) if cfg.include_canonical else None

    def fn(rng: np.random.Generator, index: int) -> _Outcome:
        x, s = _draw_point(rng, cfg.dim)
        y, t = _draw_point(rng, cfg.dim)
        wa = region_statistic("W", x, s, cfg.n, cfg.split)
        wb = region_statistic("W", y, t, cfg.n, cfg.split)
        if wa > k or wb > k:
            return _Outcome(margin=0.0, violated=False)
        wm = region_statistic("W", 0.5 * (x + y), 0.5 * (s + t), cfg.n, cfg.split)
        margin = (k - wm) / max(k, 1.0)
        if wm <= k:
            return _Outcome(margin=margin, violated=False)
        witness = {
            "kind": "random", "index": index, "n": cfg.n, "k": k,
            "xbar_a": x.tolist(), "S_a": _mat(s), "w_a": wa,
            "xbar_b": y.tolist(), "S_b": _mat(t), "w_b": wb,
            "w_mid": wm,
        }
        return _Outcome(margin=margin, violated=True, witness=witness)

    outcomes = _run_trials(cfg, lemma, fn, stop_early=lambda o: o.violated)
    random_witness = next((o.witness for o in outcomes if o.violated), None)
    margins = [o.margin for o in outcomes]
    if canonical is not None:
        margins.append((k - canonical["w_mid"]) / max(k, 1.0))
    found_canonical = bool(canonical and canonical["is_witness"])

    if found_canonical or random_witness is not None:
        verdict = ReportVerdict.WITNESS_FOUND
        note = "non-convex midpoint found"
    else:
        verdict = ReportVerdict.FAIL
        note = f"no witness at k={k!r} within {len(outcomes)} trials"
    return VerifierReport(
        lemma_id=lemma,
        seed=cfg.seed,
        trials_run=len(outcomes),
        worst_violation=min(margins),
        tol=cfg.tol,
        verdict=verdict,
        violations=int(found_canonical) + int(random_witness is not None),
        witness=canonical if found_canonical else random_witness,
        details={
            "k": k,
            "canonical_found": found_canonical,
            "random_witness": random_witness,
            "note": note,
        },
    )


VERIFIERS: dict[LemmaId, Callable[[VerifierConfig], VerifierReport]] = {
    LemmaId.L1_BPLUS_CONVEX: verify_bplus_convex,
    LemmaId.L2_PENROSE: verify_penrose,
    LemmaId.L4_B_CONCAVE: verify_b_concave,
    LemmaId.L6_QUAD_CONVEX: verify_quad_convex,
    LemmaId.EQ28_CHAIN: verify_mixed_inverse_bound,
    LemmaId.EQ29_CHAIN: verify_u_chain,
    LemmaId.THM1_AU_CONVEX: lambda cfg: verify_region_convex(cfg, "U"),
    LemmaId.T2_REGION_CONVEX: lambda cfg: verify_region_convex(cfg, "T2"),
    LemmaId.W_REGION_NONCONVEX: find_w_nonconvexity,
}


def run_verifier(lemma: LemmaId | str, cfg: VerifierConfig) -> VerifierReport:
    return VERIFIERS[LemmaId(lemma)](cfg)
