import json

import numpy as np
import pytest

from meancov.errors import ConfigError
from meancov.lemma_lab import (
    LemmaId,
    ReportVerdict,
    VerifierConfig,
    b_chord_gap,
    bplus_chord_gap,
    canonical_w_check,
    u_chain_terms,
    penrose_residuals,
    region_statistic,
    run_verifier,
)
from meancov.matrix_core import PartitionedSpdMatrix, Verdict, b_mp, b_plus
from meancov.streams import random_spd


def _bplus_oracle(s, split):
    inv = np.linalg.inv(s)
    inv[split:, split:] -= np.linalg.inv(s[split:, split:])
    return inv


@pytest.mark.parametrize("kwargs", [{"trials": 0}, {"dim": 3, "split": 3}, {"tol": 0.0}, {"n": 3}, {"workers": 0}])
def test_config_validation(kwargs):
    with pytest.raises(ConfigError):
        VerifierConfig(**kwargs)


def test_default_n_tracks_dim():
    assert VerifierConfig(dim=3, split=1).n == 10
    assert VerifierConfig(dim=12, split=4).n == 13


@pytest.mark.parametrize("dim,split", [(2, 1), (3, 1), (4, 2), (6, 3)])
def test_penrose_passes(dim, split):
    rep = run_verifier(LemmaId.L2_PENROSE, VerifierConfig(seed=42, trials=200, dim=dim, split=split))
    assert rep.verdict is ReportVerdict.PASS and rep.ok
    assert max(rep.details[f"max_r{i}"] for i in range(1, 5)) < 1e-9


def test_penrose_residuals_oracle(rng):
    s = PartitionedSpdMatrix(random_spd(rng, 5), 2)
    bp = b_plus(s)
    assert max(penrose_residuals(bp, np.linalg.pinv(bp, rcond=1e-10, hermitian=True))) < 1e-9
    assert max(penrose_residuals(bp, np.eye(5))) > 1e-3


def test_quad_convex_passes():
    rep = run_verifier(LemmaId.L6_QUAD_CONVEX, VerifierConfig(seed=3, trials=300, dim=5, split=2))
    assert rep.verdict is ReportVerdict.PASS


def test_t2_region_convex_passes():
    rep = run_verifier(LemmaId.T2_REGION_CONVEX, VerifierConfig(seed=5, trials=300, dim=3, split=1))
    assert rep.verdict is ReportVerdict.PASS


def test_bplus_chord_exact_counterexample():
    # rational hand computation: avg - B+(mid) has (2,2) entry -14/117
    s = np.array([[14.0, 10.0], [10.0, 9.0]])
    t = np.diag([2.0, 1.0])
    mid = b_plus(PartitionedSpdMatrix(0.5 * (s + t), 1))
    np.testing.assert_allclose(mid, np.full((2, 2), 1 / 3) * [[1, -1], [-1, 1]], atol=1e-15)
    avg = 0.5 * (b_plus(PartitionedSpdMatrix(s, 1)) + b_plus(PartitionedSpdMatrix(t, 1)))
    assert (avg - mid)[1, 1] == pytest.approx(-14 / 117, rel=1e-12)
    rep = bplus_chord_gap(s, t, 0.5, 1)
    assert rep.verdict is Verdict.NOT_PSD


def test_b_chord_counterexample_matches_oracle():
    s, t = np.eye(2), np.array([[1.0, 0.5], [0.5, 1.0]])
    rep = b_chord_gap(s, t, 0.5, 1)
    pinv = lambda m: np.linalg.pinv(_bplus_oracle(m, 1), rcond=1e-10, hermitian=True)  # noqa: E731
    diff = pinv(0.5 * (s + t)) - 0.5 * (pinv(s) + pinv(t))
    assert rep.min_eig == pytest.approx(np.linalg.eigvalsh(diff)[0], rel=1e-9)
    assert rep.verdict is Verdict.NOT_PSD


def test_u_chain_terms_oracle(rng):
    s, t = random_spd(rng, 3), random_spd(rng, 3)
    x, y = rng.standard_normal(3), rng.standard_normal(3)
    left, middle, right = u_chain_terms(x, y, s, t, 0.3, 1)
    z = 0.3 * x + 0.7 * y
    assert left == pytest.approx(z @ _bplus_oracle(0.3 * s + 0.7 * t, 1) @ z, rel=1e-9)
    assert right == pytest.approx(0.3 * x @ _bplus_oracle(s, 1) @ x + 0.7 * y @ _bplus_oracle(t, 1) @ y, rel=1e-9)
    avg = 0.3 * b_mp(PartitionedSpdMatrix(s, 1)) + 0.7 * b_mp(PartitionedSpdMatrix(t, 1))
    assert middle == pytest.approx(z @ np.linalg.pinv(avg, rcond=1e-10, hermitian=True) @ z, rel=1e-8)


def test_u_region_midpoint_counterexample():
    # n = 2, p1 = 1: U = 2 (x1 - s12 x2)^2 / (1 - s12^2)
    sa = np.array([[1.0, 0.9], [0.9, 1.0]])
    sb = np.array([[1.0, -0.9], [-0.9, 1.0]])
    ua = region_statistic("U", np.array([1.0, 1.0]), sa, 2, 1)
    ub = region_statistic("U", np.array([1.0, -1.0]), sb, 2, 1)
    um = region_statistic("U", np.array([1.0, 0.0]), 0.5 * (sa + sb), 2, 1)
    assert ua == pytest.approx(2 / 19) and ub == pytest.approx(2 / 19)
    assert um == pytest.approx(2.0)


def test_canonical_w_witness():
    c = canonical_w_check(1.0)
    assert c["is_witness"]
    assert c["w_a"] == pytest.approx(2 / 3) and c["w_b"] == pytest.approx(2 / 3)
    assert c["w_mid"] == pytest.approx(2.0)


def test_w_search_reports_canonical_and_random():
    rep = run_verifier(LemmaId.W_REGION_NONCONVEX, VerifierConfig(seed=0, trials=100_000, dim=3, split=1))
    assert rep.verdict is ReportVerdict.WITNESS_FOUND and rep.ok
    assert rep.witness["kind"] == "canonical"
    rw = rep.details["random_witness"]
    assert rw is not None
    k = rep.details["k"]
    assert rw["w_a"] <= k and rw["w_b"] <= k and rw["w_mid"] > k
    mid = region_statistic(
        "W",
        0.5 * (np.array(rw["xbar_a"]) + np.array(rw["xbar_b"])),
        0.5 * (np.array(rw["S_a"]) + np.array(rw["S_b"])),
        rw["n"],
        1,
    )
    assert mid == pytest.approx(rw["w_mid"], rel=1e-12)


def test_witness_found_is_not_ok_elsewhere():
    rep = run_verifier(LemmaId.L2_PENROSE, VerifierConfig(trials=5, dim=3, split=1))
    rep.verdict = ReportVerdict.WITNESS_FOUND
    assert not rep.ok


@pytest.mark.parametrize("lemma", [LemmaId.L1_BPLUS_CONVEX, LemmaId.EQ29_CHAIN, LemmaId.THM1_AU_CONVEX])
def test_reports_identical_across_worker_counts(lemma):
    a = run_verifier(lemma, VerifierConfig(seed=9, trials=600, dim=3, split=1, workers=1)).to_json_line()
    b = run_verifier(lemma, VerifierConfig(seed=9, trials=600, dim=3, split=1, workers=4)).to_json_line()
    assert a == b


def test_report_json_shape():
    rep = run_verifier("L2_PENROSE", VerifierConfig(seed=1, trials=10, dim=3, split=1))
    d = json.loads(rep.to_json_line())
    assert {"lemma_id", "seed", "trials", "worst_violation", "tol", "verdict"} <= set(d)
    assert d["trials"] == 10 and d["lemma_id"] == "L2_PENROSE"
