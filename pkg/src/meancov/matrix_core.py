"""Partitioned symmetric matrix algebra.

Schur complements, regression-adjusted means, the symmetric Moore-Penrose
pseudoinverse, the rank-``p1`` matrices ``B+(S)`` and ``B(S)`` whose quadratic
form gives the covariate-adjusted U statistic, Loewner-order comparison and simultaneous
diagonalization of two p.s.d. matrices with a common column space.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import linalg

from .errors import (
    DimensionError,
    NonPositiveDefiniteError,
    NotSymmetricError,
    RangeMismatchError,
    RankMismatchError,
)

EPS = np.finfo(np.float64).eps
SYMMETRY_RTOL = 1e-12
LOEWNER_TOL = 1e-8


def symmetrize(a: ArrayLike) -> NDArray:
    a = np.asarray(a, dtype=np.float64)
    return 0.5 * (a + a.T)


def asymmetry(a: NDArray) -> float:
    """Largest entry of ``|a - a'|`` relative to the largest entry of ``|a|``."""
    big = float(np.max(np.abs(a))) if a.size else 0.0
    if big == 0.0:
        return 0.0
    return float(np.max(np.abs(a - a.T))) / big


def is_positive_definite(a: NDArray) -> bool:
    """Factorization-based p.d. check with an eigenvalue fallback.

    Cholesky is tried first; LAPACK can still succeed on matrices whose
    smallest eigenvalue is at rounding level, so a successful factorization
    is confirmed by a positive diagonal and, when that diagonal is tiny
    relative to the matrix, by ``eigvalsh``.
    """
    a = symmetrize(a)
    if not np.all(np.isfinite(a)):
        return False
    try:
        chol = np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        return False
    diag = np.diag(chol)
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    if np.min(diag) ** 2 > a.shape[0] * EPS * scale:
        return True
    return bool(np.linalg.eigvalsh(a)[0] > a.shape[0] * EPS * scale)


def rank_cutoff(eigenvalues: NDArray, dim: int) -> float:
    top = float(np.max(np.abs(eigenvalues))) if eigenvalues.size else 0.0
    return dim * EPS * top


def numerical_rank(a: ArrayLike) -> int:
    """Rank of a symmetric matrix at the pseudoinverse cutoff."""
    a = symmetrize(a)
    w = np.linalg.eigvalsh(a)
    return int(np.sum(np.abs(w) > rank_cutoff(w, a.shape[0])))


@dataclass(frozen=True, eq=False)
class PartitionedSpdMatrix:
    """A symmetric ``p x p`` matrix with a declared ``(p1, p2)`` block split.

    The matrix is positive definite unless ``relaxed`` is set, in which case
    eigenvalues down to ``-psd_tol * ||A||`` are allowed. The stored entries
    are an exactly symmetric, read-only copy of the input.
    """

    entries: NDArray
    split: int
    relaxed: bool = False
    psd_tol: float = 1e-10

    def __post_init__(self) -> None:
        a = np.array(self.entries, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionError(f"expected a square matrix, got shape {a.shape}")
        p = a.shape[0]
        if not isinstance(self.split, (int, np.integer)) or not 0 < self.split < p:
            raise DimensionError(f"split must satisfy 0 < p1 < p={p}, got {self.split}")
        if not np.all(np.isfinite(a)):
            raise NonPositiveDefiniteError("matrix has non-finite entries")
        if asymmetry(a) > SYMMETRY_RTOL:
            raise NotSymmetricError(f"relative asymmetry {asymmetry(a):.3e} exceeds {SYMMETRY_RTOL}")
        a = symmetrize(a)
        if self.relaxed:
            w = np.linalg.eigvalsh(a)
            if w[0] < -self.psd_tol * max(float(np.max(np.abs(w))), 1.0):
                raise NonPositiveDefiniteError(f"matrix is not p.s.d. (min eigenvalue {w[0]:.3e})")
        elif not is_positive_definite(a):
            raise NonPositiveDefiniteError("matrix is not positive definite")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)
        object.__setattr__(self, "split", int(self.split))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def p1(self) -> int:
        return self.split

    @property
    def p2(self) -> int:
        return self.dim - self.split

    @property
    def s11(self) -> NDArray:
        return self.entries[: self.split, : self.split]

    @property
    def s12(self) -> NDArray:
        return self.entries[: self.split, self.split :]

    @property
    def s21(self) -> NDArray:
        return self.entries[self.split :, : self.split]

    @property
    def s22(self) -> NDArray:
        return self.entries[self.split :, self.split :]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)

    def __repr__(self) -> str:
        return f"PartitionedSpdMatrix(dim={self.dim}, split={self.split})"


def as_partitioned(m: PartitionedSpdMatrix | ArrayLike, split: int | None = None) -> PartitionedSpdMatrix:
    if isinstance(m, PartitionedSpdMatrix):
        if split is not None and split != m.split:
            raise DimensionError(f"split {split} conflicts with matrix split {m.split}")
        return m
    if split is None:
        raise DimensionError("a raw array needs an explicit split")
    return PartitionedSpdMatrix(np.asarray(m, dtype=np.float64), split)


def _cho_22(m: PartitionedSpdMatrix):
    try:
        return linalg.cho_factor(m.s22, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise NonPositiveDefiniteError("lower-right block S22 is not positive definite") from exc


def regression_coefficients(m: PartitionedSpdMatrix) -> NDArray:
    """``S22^{-1} S21``, the ``p2 x p1`` coefficients of block 1 on block 2."""
    return linalg.cho_solve(_cho_22(m), m.s21, check_finite=False)


def schur_complement(m: PartitionedSpdMatrix) -> NDArray:
    """``S11 - S12 S22^{-1} S21``.

    Examples
    --------
    >>> schur_complement(PartitionedSpdMatrix([[2.0, 1.0], [1.0, 1.0]], 1))
    array([[1.]])
    """
    coef = regression_coefficients(m)
    return symmetrize(m.s11 - m.s12 @ coef)


def adjusted_mean(xbar: ArrayLike, m: PartitionedSpdMatrix) -> NDArray:
    """First block of ``xbar`` with the regression on the second block removed."""
    xbar = np.asarray(xbar, dtype=np.float64)
    if xbar.shape != (m.dim,):
        raise DimensionError(f"xbar must have length {m.dim}, got shape {xbar.shape}")
    solved = linalg.cho_solve(_cho_22(m), xbar[m.split :], check_finite=False)
    return xbar[: m.split] - m.s12 @ solved


def pseudo_inverse(a: ArrayLike, sym_rtol: float = 1e-8) -> NDArray:
    """Moore-Penrose inverse of a symmetric matrix via its eigendecomposition.

    Eigenvalues with ``|lambda| <= p * eps * max|lambda|`` are treated as
    exact zeros. The input is symmetrized first; asymmetry beyond
    ``sym_rtol`` (relative to the largest entry) is an error.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    if asymmetry(a) > sym_rtol:
        raise NotSymmetricError(f"relative asymmetry {asymmetry(a):.3e} exceeds {sym_rtol}")
    w, v = np.linalg.eigh(symmetrize(a))
    keep = np.abs(w) > rank_cutoff(w, a.shape[0])
    vk = v[:, keep]
    return symmetrize((vk / w[keep]) @ vk.T)


def _block_factor(m: PartitionedSpdMatrix) -> tuple[NDArray, NDArray]:
    """``C = [I; -S22^{-1} S21]`` and the Schur complement."""
    coef = regression_coefficients(m)
    c = np.vstack([np.eye(m.split), -coef])
    return c, symmetrize(m.s11 - m.s12 @ coef)


def b_plus(m: PartitionedSpdMatrix) -> NDArray:
    """Rank-``p1`` matrix with ``xbar' B+(S) xbar = xbar_{1:2}' S_{11:2}^{-1} xbar_{1:2}``.

    Built from the factored form ``C S_{11:2}^{-1} C'`` with
    ``C = [I; -S22^{-1} S21]``; see :func:`b_plus_difference_form` for the
    equivalent ``S^{-1} - diag(0, S22^{-1})``.
    """
    c, schur = _block_factor(m)
    try:
        cs = linalg.cho_solve(linalg.cho_factor(schur, lower=True), c.T)
    except linalg.LinAlgError as exc:
        raise NonPositiveDefiniteError("Schur complement is not positive definite") from exc
    return symmetrize(c @ cs)


def b_plus_difference_form(m: PartitionedSpdMatrix) -> NDArray:
    """``S^{-1} - diag(0, S22^{-1})``, the second expression for ``B+(S)``."""
    try:
        s_inv = linalg.cho_solve(linalg.cho_factor(m.entries, lower=True), np.eye(m.dim))
    except linalg.LinAlgError as exc:
        raise NonPositiveDefiniteError("matrix is not positive definite") from exc
    out = s_inv.copy()
    out[m.split :, m.split :] -= linalg.cho_solve(_cho_22(m), np.eye(m.p2))
    return symmetrize(out)


def b_mp(m: PartitionedSpdMatrix) -> NDArray:
    """Explicit Moore-Penrose inverse of :func:`b_plus`.

    ``B(S) = C K^{-1} S_{11:2} K^{-1} C'`` with ``K = I + S12 S22^{-2} S21``
    (so that ``K = C'C``).
    """
    c, schur = _block_factor(m)
    k = c.T @ c
    k_inv_s = np.linalg.solve(k, schur)
    return symmetrize(c @ np.linalg.solve(k, k_inv_s.T).T @ c.T)


class Verdict(str, enum.Enum):
    PSD = "PSD"
    NOT_PSD = "NOT_PSD"


@dataclass(frozen=True)
class LoewnerReport:
    min_eig: float
    scale: float
    tol: float
    verdict: Verdict

    @property
    def margin(self) -> float:
        """``min_eig`` normalized by ``max(scale, 1)``."""
        return self.min_eig / max(self.scale, 1.0)

    @property
    def holds(self) -> bool:
        return self.verdict is Verdict.PSD


def loewner_compare(a: ArrayLike, b: ArrayLike, tol: float = LOEWNER_TOL) -> LoewnerReport:
    """Check ``a >= b`` in the Loewner order.

    >>> loewner_compare(2 * np.eye(2), np.eye(2)).verdict.value
    'PSD'
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"cannot compare shapes {a.shape} and {b.shape}")
    min_eig = float(np.linalg.eigvalsh(symmetrize(a - b))[0])
    scale = float(np.linalg.norm(a, 2) + np.linalg.norm(b, 2))
    verdict = Verdict.PSD if min_eig >= -tol * max(scale, 1.0) else Verdict.NOT_PSD
    return LoewnerReport(min_eig=min_eig, scale=scale, tol=tol, verdict=verdict)


@dataclass(frozen=True, eq=False)
class SimDiagResult:
    g: NDArray
    d: NDArray
    rank: int


def simultaneous_diagonalize(a1: ArrayLike, a2: ArrayLike, range_tol: float = 1e-8) -> SimDiagResult:
    """Find nonsingular ``G`` with ``a1 = G diag(I_r, 0) G'`` and ``a2 = G diag(D_r, 0) G'``.

    Both inputs must be symmetric p.s.d. of the same numerical rank ``r`` and
    share a column space. ``D_r`` holds the nonzero eigenvalues of
    ``a2 a1^+`` in ascending order.

    The construction first congruence-transforms ``a1`` to ``diag(I_r, 0)``
    with ``F = [V_r L_r^{1/2}, V_0]``; the transformed ``a2`` is then
    supported on its leading ``r x r`` block, whose orthogonal
    eigendecomposition supplies the rotation.

    Raises
    ------
    RankMismatchError
        If the numerical ranks differ.
    RangeMismatchError
        If the projector onto ``range(a1)`` does not reproduce ``a2``.
    """
    a1 = np.asarray(a1, dtype=np.float64)
    a2 = np.asarray(a2, dtype=np.float64)
    if a1.shape != a2.shape or a1.ndim != 2 or a1.shape[0] != a1.shape[1]:
        raise DimensionError(f"shapes {a1.shape} and {a2.shape} are not equal square")
    for a in (a1, a2):
        if asymmetry(a) > 1e-8:
            raise NotSymmetricError("inputs must be symmetric")
    a1 = symmetrize(a1)
    a2 = symmetrize(a2)
    p = a1.shape[0]

    w1, v1 = np.linalg.eigh(a1)
    w2 = np.linalg.eigvalsh(a2)
    nz1 = w1 > rank_cutoff(w1, p)
    r = int(np.sum(nz1))
    r2 = int(np.sum(w2 > rank_cutoff(w2, p)))
    if r != r2:
        raise RankMismatchError(f"rank(a1)={r} but rank(a2)={r2}")

    vr = v1[:, nz1]
    v0 = v1[:, ~nz1]
    proj = vr @ vr.T
    norm2 = max(float(np.linalg.norm(a2, 2)), np.finfo(float).tiny)
    if np.linalg.norm(proj @ a2 - a2, 2) > range_tol * norm2:
        raise RangeMismatchError("a1 and a2 do not share a column space")

    root = np.sqrt(w1[nz1])
    f = np.hstack([vr * root, v0])
    # F^{-1} = [diag(1/root) V_r'; V_0'] because V is orthogonal.
    f_inv = np.vstack([vr.T / root[:, None], v0.T])
    a_star = symmetrize(f_inv @ a2 @ f_inv.T)
    d, q = np.linalg.eigh(a_star[:r, :r])
    rot = np.eye(p)
    rot[:r, :r] = q
    return SimDiagResult(g=f @ rot, d=d, rank=r)


def gen_inv_quadratic(x: ArrayLike, a: ArrayLike) -> float:
    """``x' A^+ x`` for a symmetric p.s.d. ``A``; zero on the null space of ``A``."""
    x = np.asarray(x, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or x.shape != (a.shape[0],):
        raise DimensionError(f"incompatible shapes {x.shape} and {a.shape}")
    return float(x @ pseudo_inverse(a) @ x)
