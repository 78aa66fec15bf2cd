import warnings
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from chunknet.coding import (
    CodeSpec,
    DegenerateSpecWarning,
    Kind,
    NodeState,
    Packet,
    SpecError,
    chunk_support,
    emit,
    make_code_spec,
    simulate,
)
from chunknet.decoding import global_rank
from chunknet.gf2 import BinaryVector, random_bernoulli, xor_combine
from chunknet.rng import Stream
from chunknet.schedule import Schedule, generate_schedule
from oracles import full_rank_probability

SMALL_SPECS = [
    ("dense", 8, 1, 1),
    ("dense", 70, 1, 1),
    ("chunked", 8, 4, 1),
    ("chunked", 12, 3, 1),
    ("overlapped", 8, 4, 2),
    ("overlapped", 8, 4, 3),
    ("overlapped", 16, 8, 5),
    ("overlapped", 128, 2, 2),
    ("chunked", 256, 2, 1),
]


def spec_of(params):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateSpecWarning)
        return make_code_spec(*params)


# ---------------------------------------------------------------- specs


def test_overlapped_fig3_spec():
    s = make_code_spec("overlapped", 1024, 256, 4)
    assert (s.alpha, s.gamma, s.stride) == (16, 12, 4)
    assert s.label == "OCC-q256-t4"


def test_chunked_fig2_spec():
    s = make_code_spec(Kind.CHUNKED, 1024, 4)
    assert (s.alpha, s.gamma) == (256, 0)
    assert s.label == "CC-q4"


def test_dense_spec():
    s = make_code_spec("dense", 1024)
    assert (s.q, s.tau, s.alpha, s.gamma) == (1, 1, 1024, 0)
    assert s.label == "DC"


def test_overlap_not_dividing_k_is_still_valid():
    s = make_code_spec("overlapped", 8, 4, 3)
    assert (s.stride, s.alpha, s.gamma) == (2, 6, 4)


@pytest.mark.parametrize(
    "args",
    [
        ("chunked", 8, 3, 1),
        ("overlapped", 8, 4, 5),
        ("overlapped", 8, 4, 0),
        ("dense", 8, 2, 1),
        ("chunked", 8, 4, 2),
        ("mystery", 8, 4, 1),
        ("chunked", 0, 1, 1),
    ],
)
def test_invalid_specs(args):
    with pytest.raises(SpecError):
        make_code_spec(*args)


def test_degenerate_overlap_warns():
    with pytest.warns(DegenerateSpecWarning):
        s = make_code_spec("overlapped", 8, 4, 4)
    assert s.degenerate and s.alpha == 8


# ---------------------------------------------------------------- chunk layout


def test_chunk_support_examples():
    assert chunk_support(make_code_spec("chunked", 8, 4), 2) == [4, 5]
    assert chunk_support(make_code_spec("chunked", 8, 2), 1) == [4, 5, 6, 7]
    assert chunk_support(make_code_spec("overlapped", 8, 4, 2), 3) == [6, 7, 0, 1]
    assert chunk_support(make_code_spec("overlapped", 1024, 256, 4), 0) == list(range(16))


def test_chunk_support_out_of_range():
    with pytest.raises(IndexError):
        chunk_support(make_code_spec("chunked", 8, 4), 4)


@pytest.mark.parametrize("params", SMALL_SPECS)
def test_every_symbol_in_exactly_tau_chunks(params):
    s = spec_of(params)
    counts = np.zeros(s.k, dtype=int)
    for w in range(s.q):
        sup = chunk_support(s, w)
        assert len(set(sup)) == s.alpha
        counts[sup] += 1
    assert np.all(counts == s.tau)


@pytest.mark.parametrize("params", SMALL_SPECS)
def test_contiguous_chunks_share_gamma_symbols(params):
    s = spec_of(params)
    if s.q == 1 or s.degenerate:
        return
    a, b = set(chunk_support(s, 0)), set(chunk_support(s, 1))
    assert len(a & b) == s.gamma


def test_tau_one_layout_is_block_partition():
    s = make_code_spec("chunked", 12, 3)
    blocks = [chunk_support(s, w) for w in range(3)]
    assert blocks == [[0, 1, 2, 3], [4, 5, 6, 7], [8, 9, 10, 11]]


def test_packet_global_vector_wraps():
    s = make_code_spec("overlapped", 8, 4, 2)
    p = Packet(3, BinaryVector.from_bits("1001"))
    assert p.global_vector(s).support() == [1, 6]


# ---------------------------------------------------------------- emit


def test_relay_with_empty_buffer_sends_nothing():
    s = make_code_spec("chunked", 8, 4)
    relay = NodeState(s, "relay")
    assert emit(relay, s, "uniform-all", Stream(0)) is None
    assert emit(relay, s, "uniform-nonempty", Stream(0)) is None


def _seed_with_mask(bits, nbits):
    for seed in range(10_000):
        r = Stream(seed)
        r.next()  # chunk choice
        if random_bernoulli(nbits, r).to_bits() == bits:
            return seed
    raise AssertionError("no seed found")


def test_relay_combines_masked_buffer():
    s = make_code_spec("dense", 4)
    relay = NodeState(s, "relay")
    p1 = Packet(0, BinaryVector.from_bits("1010"))
    p2 = Packet(0, BinaryVector.from_bits("0110"))
    relay.receive(p1)
    relay.receive(p2)
    out = emit(relay, s, "uniform-all", Stream(_seed_with_mask("11", 2)))
    assert out.chunk == 0
    assert out.coeffs == BinaryVector.from_bits("1100")


@given(st.integers(0, 2**64 - 1), st.integers(1, 9))
def test_relay_output_is_the_drawn_combination(seed, nbuf):
    s = make_code_spec("overlapped", 16, 4, 2)
    relay = NodeState(s, "relay")
    gen = Stream(seed ^ 0x5555)
    for _ in range(nbuf):
        relay.receive(Packet(1, random_bernoulli(s.alpha, gen)))
    rng, twin = Stream(seed), Stream(seed)
    out = emit(relay, s, "uniform-nonempty", rng)
    twin.next()
    mask = random_bernoulli(nbuf, twin)
    assert out.chunk == 1
    assert out.coeffs == xor_combine([p.coeffs for p in relay.buffer(1)], mask)
    assert rng.next() == twin.next()


def test_dense_source_coefficients_are_fair_coins():
    s = make_code_spec("dense", 4)
    src = NodeState(s, "source")
    rng = Stream(12)
    counts = np.zeros(4)
    for _ in range(20_000):
        counts += np.array([int(b) for b in emit(src, s, "uniform-all", rng).coeffs.to_bits()])
    assert np.all(np.abs(counts / 20_000 - 0.5) < 0.015)


def test_source_chunk_choice_is_uniform():
    s = make_code_spec("overlapped", 16, 4, 2)
    src = NodeState(s, "source")
    rng = Stream(13)
    chunks = np.bincount([emit(src, s, "uniform-all", rng).chunk for _ in range(8000)], minlength=4)
    assert np.all(np.abs(chunks / 8000 - 0.25) < 0.02)


def test_source_payload_is_xor_of_message():
    s = make_code_spec("overlapped", 8, 4, 2)
    msg = np.arange(1, 9, dtype=np.uint64) * 1000
    src = NodeState(s, "source", msg)
    rng = Stream(14)
    for _ in range(50):
        p = emit(src, s, "uniform-all", rng)
        expected = 0
        for i in p.global_vector(s).support():
            expected ^= int(msg[i])
        assert int(p.info[0]) == expected


# ---------------------------------------------------------------- simulate


@st.composite
def runs(draw):
    spec = spec_of(draw(st.sampled_from(SMALL_SPECS)))
    l = draw(st.integers(1, 4))
    n = draw(st.integers(1, 40))
    seed = draw(st.integers(0, 2**64 - 1))
    policy = draw(st.sampled_from(["uniform-all", "uniform-nonempty"]))
    mode = draw(st.sampled_from(["rank", "payload"]))
    return spec, l, n, seed, policy, mode


def _run(spec, l, n, seed, policy, mode, backend="compiled"):
    schedule = generate_schedule(l, n, Stream(seed, "schedule"))
    message = Stream(seed, "message").words(spec.k * 2).reshape(spec.k, 2) if mode == "payload" else None
    rng = Stream(seed, "coding")
    report = simulate(spec, schedule, rng, mode, message, policy, backend=backend)
    return schedule, message, report, rng


@given(runs())
def test_python_and_compiled_backends_agree(run):
    _, _, a, rng_a = _run(*run)
    _, _, b, rng_b = _run(*run, backend="python")
    assert np.array_equal(a.local, b.local)
    assert np.array_equal(a.chunks, b.chunks)
    assert a.link_transmissions == b.link_transmissions
    assert rng_a.next() == rng_b.next()


@given(runs())
def test_terminal_support_within_chunk(run):
    _, _, report, _ = _run(*run)
    spec = report.spec
    for p in report.packets:
        support = set(chunk_support(spec, p.chunk))
        assert set(p.global_vector(spec).support()) <= support


@given(runs())
def test_column_count_and_waste(run):
    schedule, _, report, _ = _run(*run)
    spec, l, n, seed, policy, mode = run
    link_l = int(np.count_nonzero(schedule.links == l))
    assert report.n_packets + report.wasted_slots == link_l
    if l == 1:
        assert report.wasted_slots == 0
    assert global_rank(report) <= min(spec.k, n)


@given(runs())
def test_payload_symbols_match_message(run):
    spec, l, n, seed, policy, _ = run
    _, message, report, _ = _run(spec, l, n, seed, policy, "payload")
    rows = report.matrix()
    symbols = report.symbols()
    for j, col in enumerate(rows.columns):
        expected = np.zeros(2, dtype=np.uint64)
        for i in col.support():
            expected ^= message[i]
        assert np.array_equal(symbols[j], expected)


@given(runs())
def test_rank_and_payload_modes_share_coefficients(run):
    spec, l, n, seed, policy, _ = run
    _, _, a, _ = _run(spec, l, n, seed, policy, "rank")
    _, _, b, _ = _run(spec, l, n, seed, policy, "payload")
    ncoef = a.local.shape[1]
    assert np.array_equal(a.local, b.local[:, :ncoef])
    assert np.array_equal(a.chunks, b.chunks)


def test_simulation_is_deterministic():
    spec = make_code_spec("overlapped", 64, 8, 3)
    _, _, a, _ = _run(spec, 3, 80, 77, "uniform-all", "payload")
    _, _, b, _ = _run(spec, 3, 80, 77, "uniform-all", "payload")
    assert np.array_equal(a.local, b.local) and np.array_equal(a.chunks, b.chunks)


def test_zero_masks_are_delivered():
    # with q=1 and a single nonzero buffered packet, half the relay emissions
    # are all-zero (seed 16 draws a nonzero source packet)
    spec = make_code_spec("dense", 3)
    s = Schedule.from_transmissions(2, [(1, 1)] + [(2, t) for t in range(2, 402)])
    report = simulate(spec, s, Stream(16))
    assert report.n_packets == 400
    zeros = int(np.count_nonzero(report.local[:, 0] == 0))
    assert 150 < zeros < 250


def test_payload_mode_requires_message():
    spec = make_code_spec("dense", 4)
    s = generate_schedule(1, 4, Stream(0))
    with pytest.raises(ValueError):
        simulate(spec, s, Stream(0), mode="payload")


def test_dense_k4_single_link_probability():
    # 4 transmissions on one link: the terminal sees 4 uniform columns
    spec = make_code_spec("dense", 4)
    s = Schedule.from_transmissions(1, [(1, t) for t in range(1, 5)])
    rng = Stream(16)
    trials = 6000
    ok = sum(global_rank(simulate(spec, s, rng)) == 4 for _ in range(trials))
    p = float(full_rank_probability(4, 4))
    assert p == float(Fraction(20160, 65536))
    sd = (p * (1 - p) / trials) ** 0.5
    assert abs(ok / trials - p) < 3.3 * sd


def test_codespec_is_hashable_value():
    assert make_code_spec("chunked", 8, 4) == CodeSpec(Kind.CHUNKED, 8, 4, 1)
    assert len({make_code_spec("chunked", 8, 4), make_code_spec("chunked", 8, 4)}) == 1
