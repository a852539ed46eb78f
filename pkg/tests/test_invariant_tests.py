import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from meancov.errors import (
    DimensionError,
    NonFiniteError,
    OutOfRangeError,
    SingularGroupError,
    SingularScatterError,
    TooFewRowsError,
)
from meancov.invariant_tests import (
    GroupElement,
    SufficientStats,
    accept_t2,
    accept_u,
    accept_w,
    compute_statistics,
    group_act,
    invariant_params,
    statistics_batch,
    sufficient_stats,
    threshold_map,
    u_statistic,
    u_statistic_bplus,
    whiten_covariates,
    whitened_sigma,
)
from meancov.matrix_core import PartitionedSpdMatrix
from meancov.streams import random_spd

from conftest import random_group_element


def _stats(n, xbar, s, split=1):
    return SufficientStats.from_arrays(n, xbar, s, split)


def _random_stats(rng, p, split, n=None):
    n = n or p + 5
    return _stats(n, rng.standard_normal(p), random_spd(rng, p), split)


def test_two_points_singular():
    with pytest.raises(SingularScatterError) as exc:
        sufficient_stats([[0.0, 0.0], [2.0, 2.0]], 1)
    assert isinstance(exc.value, TooFewRowsError)


def test_four_point_design():
    st_ = sufficient_stats([[0, 0], [1, 0], [0, 1], [1, 1]], 1)
    np.testing.assert_allclose(st_.xbar, [0.5, 0.5])
    np.testing.assert_allclose(st_.scatter.entries, np.eye(2))


def test_scatter_two_pass_oracle(rng):
    x = rng.standard_normal((50, 3))
    st_ = sufficient_stats(x, 1)
    mean = [sum(col) / len(col) for col in x.T]
    ref = np.zeros((3, 3))
    for row in x:
        d = np.array([row[j] - mean[j] for j in range(3)])
        ref += np.outer(d, d)
    np.testing.assert_allclose(st_.xbar, mean, rtol=1e-12)
    np.testing.assert_allclose(st_.scatter.entries, ref, rtol=1e-10)


def test_collinear_rows_singular():
    x = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
    with pytest.raises(SingularScatterError) as exc:
        sufficient_stats(x, 1)
    assert not isinstance(exc.value, TooFewRowsError)


@pytest.mark.parametrize("bad", [np.nan, np.inf])
def test_non_finite(bad):
    x = np.eye(3)[:, :2].copy()
    x[0, 0] = bad
    with pytest.raises(NonFiniteError):
        sufficient_stats(x, 1)


def test_bad_split():
    with pytest.raises(DimensionError):
        sufficient_stats(np.eye(4)[:, :2], 2)


@pytest.mark.parametrize(
    "xbar,t2,u,m,w",
    [
        ((1.0, 1.0), 4.0, 2.0, 2.0, 2.0 / 3.0),
        ((1.0, 0.0), 2.0, 2.0, 0.0, 2.0),
    ],
)
def test_statistics_hand_cases(xbar, t2, u, m, w):
    ts = compute_statistics(_stats(2, xbar, np.eye(2)))
    assert (ts.t2, ts.u, ts.m) == pytest.approx((t2, u, m), rel=1e-14)
    assert ts.w == pytest.approx(w, rel=1e-14)
    assert ts.l == ts.w


def test_statistics_dense_oracle(rng):
    st_ = _random_stats(rng, 5, 2, n=30)
    ts = compute_statistics(st_)
    s_inv = np.linalg.inv(st_.scatter.entries)
    assert ts.t2 == pytest.approx(30 * 29 * st_.xbar @ s_inv @ st_.xbar, rel=1e-10)
    assert ts.t2 == pytest.approx(ts.u + ts.m, rel=1e-10)
    assert u_statistic(st_) == pytest.approx(u_statistic_bplus(st_), rel=1e-10)


def test_batch_matches_scalar(rng):
    xs = rng.standard_normal((20, 4))
    ss = np.array([random_spd(rng, 4) for _ in range(20)])
    out = statistics_batch(xs, ss, 12, 2)
    for i in range(20):
        ts = compute_statistics(_stats(12, xs[i], ss[i], 2))
        assert out["t2"][i] == pytest.approx(ts.t2, rel=1e-10)
        assert out["u"][i] == pytest.approx(ts.u, rel=1e-10)
        assert out["w"][i] == pytest.approx(ts.w, rel=1e-10)


def test_invariant_params_cases():
    ip = invariant_params([1.0, 0.0], PartitionedSpdMatrix(np.eye(2), 1), 4)
    assert (ip.delta1, ip.delta2, ip.delta_star, ip.delta) == pytest.approx((4, 0, 4, 4))
    ip = invariant_params([0.0, 0.0, 0.0], PartitionedSpdMatrix(np.eye(3), 2), 7)
    assert (ip.delta1, ip.delta2, ip.delta_star, ip.delta) == (0, 0, 0, 0)
    ip = invariant_params([1.0, 1.0], PartitionedSpdMatrix(np.array([[2.0, 1.0], [1.0, 1.0]]), 1), 2)
    assert ip.delta1 == pytest.approx(0.0, abs=1e-14)
    assert (ip.delta2, ip.delta_star, ip.delta) == pytest.approx((2.0, 2.0, 2.0))


def test_invariant_params_properties(rng):
    for _ in range(50):
        sig = PartitionedSpdMatrix(random_spd(rng, 4), 2)
        th = np.r_[rng.standard_normal(2), 0.0, 0.0]
        ip = invariant_params(th, sig, 10)
        assert ip.delta1 == pytest.approx(ip.delta, rel=1e-12)
        assert ip.delta_star == ip.delta1 + ip.delta2


def test_accept_predicates():
    s11 = _stats(2, [1.0, 1.0], np.eye(2))
    s10 = _stats(2, [1.0, 0.0], np.eye(2))
    assert accept_u(s11, 2.0) and not accept_u(s11, 1.9)
    assert accept_t2(s11, 4.0) and not accept_t2(s11, 3.9)
    assert accept_w(s11, 1.0)
    assert not accept_w(s10, 1.0)
    with pytest.raises(OutOfRangeError):
        accept_u(s11, -1.0)


def test_accept_u_monotone(rng):
    st_ = _random_stats(rng, 3, 1)
    ks = np.linspace(0, 2 * compute_statistics(st_).u, 50)
    flags = [accept_u(st_, k) for k in ks]
    assert flags == sorted(flags)


@pytest.mark.parametrize("k_star,expected", [(0.5, 1.0), (0.0, 0.0), (0.9, 9.0)])
def test_threshold_map(k_star, expected):
    assert threshold_map(k_star) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("k_star", [-0.1, 1.0, 2.0])
def test_threshold_map_range(k_star):
    with pytest.raises(OutOfRangeError):
        threshold_map(k_star)


def test_group_act_hand_case():
    st_ = _stats(2, [1.0, 1.0], np.eye(2))
    out = group_act(GroupElement([[2.0]], [[0.0]], [[1.0]]), st_)
    np.testing.assert_allclose(out.xbar, [2.0, 1.0])
    np.testing.assert_allclose(out.scatter.entries, np.diag([4.0, 1.0]))
    assert compute_statistics(out).u == pytest.approx(2.0)


def test_group_identity_fixed_point(rng):
    st_ = _random_stats(rng, 4, 2)
    out = group_act(GroupElement(np.eye(2), np.zeros((2, 2)), np.eye(2)), st_)
    np.testing.assert_array_equal(out.xbar, st_.xbar)
    np.testing.assert_allclose(out.scatter.entries, st_.scatter.entries)


def test_group_singular_block():
    with pytest.raises(SingularGroupError):
        GroupElement(np.zeros((1, 1)), [[1.0]], [[1.0]])


def test_group_dimension_mismatch(rng):
    st_ = _random_stats(rng, 3, 1)
    with pytest.raises(DimensionError):
        group_act(GroupElement(np.eye(2), np.zeros((2, 1)), [[1.0]]), st_)


def test_group_invariance_random(rng):
    for _ in range(1000):
        st_ = _random_stats(rng, 4, 2)
        g = random_group_element(rng, 2, 2)
        a = compute_statistics(st_)
        b = compute_statistics(group_act(g, st_))
        for f in ("t2", "u", "w", "m"):
            assert getattr(b, f) == pytest.approx(getattr(a, f), rel=1e-9)


def test_t2_region_inside_u_region(rng):
    for _ in range(200):
        st_ = _random_stats(rng, 4, 2)
        k = float(rng.uniform(0.1, 20.0))
        if accept_t2(st_, k):
            assert accept_u(st_, k)


def test_whiten_block_diagonal(rng):
    st_ = _random_stats(rng, 4, 2)
    sig = PartitionedSpdMatrix(np.diag([1.0, 2.0, 3.0, 4.0]), 2)
    z, s0 = whiten_covariates(st_, sig)
    np.testing.assert_allclose(z, st_.xbar)
    np.testing.assert_allclose(s0, st_.scatter.entries)


def test_whiten_at_sigma(rng):
    sig_m = random_spd(rng, 4)
    sig = PartitionedSpdMatrix(sig_m, 2)
    _, s0 = whiten_covariates(_stats(9, rng.standard_normal(4), sig_m, 2), sig)
    expected = np.zeros((4, 4))
    expected[:2, :2] = sig_m[:2, :2] - sig_m[:2, 2:] @ np.linalg.inv(sig_m[2:, 2:]) @ sig_m[2:, :2]
    expected[2:, 2:] = sig_m[2:, 2:]
    np.testing.assert_allclose(s0, expected, atol=1e-10 * np.abs(sig_m).max())


def test_whiten_trace_identity(rng):
    for _ in range(20):
        st_ = _random_stats(rng, 5, 2, n=11)
        sig = PartitionedSpdMatrix(random_spd(rng, 5), 2)
        z, s0 = whiten_covariates(st_, sig)
        n, x = st_.n, st_.xbar
        lhs = np.trace(np.linalg.inv(sig.entries) @ (st_.scatter.entries + n * np.outer(x, x)))
        rhs = np.trace(np.linalg.inv(whitened_sigma(sig)) @ (s0 + n * np.outer(z, z)))
        assert rhs == pytest.approx(lhs, rel=1e-10)


@settings(max_examples=80, deadline=None)
@given(
    arrays(np.float64, (3, 3), elements=st.floats(-2, 2)),
    arrays(np.float64, (3,), elements=st.floats(-5, 5)),
    st.integers(4, 40),
)
def test_identities_property(lo, xbar, n):
    st_ = _stats(n, xbar, lo @ lo.T + 0.3 * np.eye(3), 1)
    ts = compute_statistics(st_)
    assert ts.t2 == pytest.approx(ts.u + ts.m, rel=1e-10, abs=1e-300)
    assert ts.w * (1 + ts.m) == pytest.approx(ts.u, rel=1e-10, abs=1e-300)
    assert min(ts.t2, ts.u, ts.m, ts.w) >= 0
