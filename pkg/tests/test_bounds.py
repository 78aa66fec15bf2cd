import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from chunknet import bounds as B

# frozen from direct evaluation of the closed forms with log base 2
DENSE_1024_4 = 1110.2192809488736
DENSE_1024_1 = 1049.2877123795495
CC_1024_4_4 = 1360.8771237954945
OCC_1024_4_4 = 1345.9455552261702
ERASURE_DENSE = 1030.6438561897746
ERASURE_CC_64 = 1833.2067961455823


def test_dense_bound_values():
    assert B.dense_bound(1024, 4, 0.01).n_min == pytest.approx(DENSE_1024_4, abs=1e-9)
    assert B.dense_bound(1024, 1, 0.01).n_min == pytest.approx(DENSE_1024_1, abs=1e-9)
    assert B.dense_bound(1024, 4, 0.01).terms["l*log(kl/eps)"] == pytest.approx(4 * 18.6437, abs=1e-3)


def test_cc_and_occ_values():
    assert B.cc_bound(1024, 4, 4, 0.01).n_min == pytest.approx(CC_1024_4_4, abs=1e-9)
    assert B.occ_bound(1024, 4, 4, 0.01).n_min == pytest.approx(OCC_1024_4_4, abs=1e-9)


def test_erasure_values():
    assert B.erasure_bounds("dense", 1024, 1, 0.01).n_min == pytest.approx(ERASURE_DENSE, abs=1e-9)
    assert B.erasure_bounds("chunked", 1024, 64, 0.01).n_min == pytest.approx(ERASURE_CC_64, abs=1e-9)
    assert B.erasure_bounds("chunked", 1024, 1, 0.01).n_min == pytest.approx(ERASURE_DENSE)
    with pytest.raises(ValueError):
        B.erasure_bounds("overlapped", 1024, 4, 0.01)


def test_n_min_is_left_to_right_sum_of_terms():
    for r in (B.dense_bound(1000, 3, 0.05), B.cc_bound(1024, 2, 8, 0.001), B.occ_bound(512, 5, 4, 0.1),
              B.occ_small_overlap_bound(1024, 1, 128, 0.01), B.erasure_bounds("chunked", 1024, 16, 0.01)):
        total = 0.0
        for v in r.terms.values():
            total += v
        assert r.n_min == total
        assert r.overhead == total - r.terms["k"]


def test_cc_with_single_chunk_is_dense_minus_l():
    for l in (1, 2, 4, 7):
        assert B.cc_bound(1024, l, 1, 0.01).n_min == pytest.approx(B.dense_bound(1024, l, 0.01).n_min - l)


def test_occ_with_single_chunk_is_dense_like():
    for l in (1, 3):
        assert B.occ_bound(1024, l, 1, 0.01).n_min == pytest.approx(B.dense_bound(1024, l, 0.01).n_min)


def test_occ_term_comparison_at_four_hop_preset():
    lhs = 4 * 4 + math.log2(100) + 1
    rhs = 4 * math.log2(100) + 4 * 2 + 4
    assert lhs == pytest.approx(23.64, abs=0.01) and rhs == pytest.approx(38.58, abs=0.01)
    assert B.occ_bound(1024, 4, 4, 0.01).n_min < B.cc_bound(1024, 4, 4, 0.01).n_min


def test_doubling_q_more_than_doubles_cc_overhead():
    for q in (2, 4, 8, 16, 32):
        assert B.cc_bound(1024, 2, 2 * q, 0.01).overhead > 2 * B.cc_bound(1024, 2, q, 0.01).overhead


def test_small_overlap_bound():
    r = B.occ_small_overlap_bound(1024, 1, 128, 0.01)
    assert r.terms["q*l*log(kl/eps)"] == pytest.approx(128 * math.log2(102400))
    assert r.terms["kappa_upper"] == pytest.approx(128 * math.log2(100) + 128 * 7 + 128)
    assert r.n_min == pytest.approx(B.cc_bound(1024, 1, 128, 0.01).n_min)
    assert any("upper bound" in note for note in r.notes)
    kappas = [B.occ_small_overlap_bound(1024, 1, q, 0.01).terms["kappa_upper"] for q in (2, 4, 8, 16)]
    assert all(b > 2 * a for a, b in zip(kappas, kappas[1:]))


def test_bound_for_picks_overlap_regime():
    assert B.bound_for("overlapped", 1024, 4, 4, 0.01, tau=2).name == "overlapped"
    # gamma = 12 < sqrt(1024)
    assert B.bound_for("overlapped", 1024, 1, 256, 0.01, tau=4).name == "overlapped-small"
    assert B.bound_for("dense", 1024, 4, 1, 0.01).name == "dense"


@given(st.sampled_from(["dense", "cc", "occ", "occ_small"]), st.integers(1, 6), st.sampled_from([1, 2, 4, 8, 16]),
       st.floats(1e-6, 0.5))
def test_bounds_monotone(which, l, q, eps):
    fn = {
        "dense": lambda l, q, e: B.dense_bound(1024, l, e),
        "cc": lambda l, q, e: B.cc_bound(1024, l, q, e),
        "occ": lambda l, q, e: B.occ_bound(1024, l, q, e),
        "occ_small": lambda l, q, e: B.occ_small_overlap_bound(1024, l, q, e),
    }[which]
    base = fn(l, q, eps).n_min
    assert fn(l + 1, q, eps).n_min > base
    assert fn(l, q, eps / 2).n_min > base
    if which != "dense":
        assert fn(l, 2 * q, eps).n_min > base


def test_occ_below_cc_on_preset_grid():
    for l in (1, 2, 4):
        for q in (2, 4, 64, 128, 256, 512, 1024):
            assert B.occ_bound(1024, l, q, 0.01).n_min < B.cc_bound(1024, l, q, 0.01).n_min


def test_invalid_arguments():
    with pytest.raises(ValueError):
        B.dense_bound(1024, 0, 0.01)
    with pytest.raises(ValueError):
        B.cc_bound(1024, 1, 3, 0.01)
    with pytest.raises(ValueError):
        B.dense_bound(1024, 1, 1.5)
    with pytest.raises(ValueError):
        B.eps_from_exponent(1024, 0)


def test_eps_from_exponent():
    assert B.eps_from_exponent(1024, 1) == pytest.approx(1 / 1024)


# ---------------------------------------------------------------- diagnostics


def test_flow_after_loss_examples():
    assert B.flow_after_loss(1024, 4, 4, 0.01) == pytest.approx(-496.296, abs=1e-3)
    big = 10**12
    assert B.flow_after_loss(big, 1, 1, 0.01) / big > 0.99
    assert B.flow_after_loss(4096, 1, 4, 0.01, constant=0) == 4096 / 4


def test_chunk_count_condition_ratio():
    assert B.condition_chunk_count(1024, 4, 4, 0.01) == pytest.approx(74.5754, abs=1e-3)


def test_condition_ratios_minimal_at_unit_parameters():
    base = dict(B.condition_diagnostics(1024, 1100, 1, 1, 1, 1024, 0.01))
    for l, q in ((2, 1), (1, 2), (3, 4)):
        other = dict(B.condition_diagnostics(1024, 1100, l, q, 1, 1024 // q, 0.01))
        for name in base:
            assert other[name] >= base[name]


def test_single_link_condition_is_weaker():
    for n in (64, 1024, 10**6):
        for l in (1, 2, 4):
            for q in (1, 4, 64):
                assert B.condition_single_link(n, q, 0.01) <= B.condition_line_flow(n, l, q, 0.01)


def test_dense_columns_diagnostic():
    v = B.dense_columns_per_chunk(4096, 2, 4, 0.01)
    assert v == pytest.approx(1024 - 2 * (10 + math.log2(100) + 1 + 1))


def test_conjecture_values():
    assert B.conjecture_rank_failure_prob(64, 64) == 1.0
    assert B.conjecture_rank_failure_prob(64, 50) == 1.0
    assert B.conjecture_rank_failure_prob(64, 74) == 2.0**-10
    assert B.conjecture_rank_failure_prob(64, 74, eps=0.5) == 2.0**-11


def test_log_base_is_two():
    assert B.LOG_BASE == 2
    assert B.dense_bound(1024, 1, 0.01, base=math.e).n_min < DENSE_1024_1
