# std
import math
from fractions import Fraction

# third-party
import pytest
import numpy as np
from loguru import logger
from hypothesis import given, settings, strategies as st
from cixorshift import (
    CiGenerator, DegenerateOrbitError, LogisticMap, LogisticState, MarkSequence,
    OldCiGenerator, ParameterError, ScriptedStream, StreamExhausted, XorShift,
    ZeroStateError, as_state, bits_from_text, build_m_thresholds, ci_next_state,
    ci_round, check_logistic_seed, cycle_length, format_state, has_full_period,
    logistic_step, make_generator, map_to_m, next_strategy_block, old_ci_cell,
    old_ci_m, old_ci_round, pack_bits, seed_generator, xorshift_step)
from cixorshift.battery import chi_square_p

# ---------------------------------------------------------------------------- #
logger.enable('cixorshift')

# ---------------------------------------------------------------------------- #
SEEDS = (123456789, 362436069)
TABLE_M = (0, 4, 2, 2)
TABLE_B = (1, 4, 2, 2, 3, 3, 4, 1, 1, 4)

seeds = st.integers(1, (1 << 32) - 1)

# ---------------------------------------------------------------------------- #


def popcount(x):
    return bin(x).count('1')


def reference_generator(x0, seed_m, seed_b, n_cells):
    # index draws through a plain callable, so the generic decimation path runs
    gen_b = XorShift(seed_b)
    return CiGenerator(x0, XorShift(seed_m), lambda: next(gen_b) % n_cells + 1,
                       n_cells)


# ---------------------------------------------------------------------------- #
# XORshift

def test_xorshift_step():
    assert xorshift_step(1) == (270369, 270369)
    assert next(XorShift(1)) == 270369


@pytest.mark.parametrize('make', [lambda: XorShift(0), lambda: xorshift_step(0)])
def test_xorshift_zero_state(make):
    with pytest.raises(ZeroStateError, match='zero state'):
        make()


def test_xorshift_full_period():
    assert has_full_period()

    gen = XorShift(1)
    assert gen.jump((1 << 32) - 1) == 1


@pytest.mark.parametrize('steps', [0, 1, 2, 1000, 4097])
def test_xorshift_jump(steps):
    jumped, walked = XorShift(7), XorShift(7)
    jumped.jump(steps)
    for _ in range(steps):
        next(walked)
    assert jumped.z == walked.z


@pytest.mark.parametrize('shifts', [(7, 9, 8), (1, 3, 10), (3, 1, 14)])
def test_period_test_agrees_with_walk(shifts):
    full = has_full_period(shifts, 16)
    assert (cycle_length(1, shifts, 16) == (1 << 16) - 1) is full
    if full:
        assert cycle_length(54321, shifts, 16) == (1 << 16) - 1


# ---------------------------------------------------------------------------- #
# m sequence

def test_thresholds_four_cells():
    thresholds = build_m_thresholds(4)
    assert thresholds.cuts == (268435456, 1342177280, 2952790016, 4026531840)
    assert thresholds.cumulative() == tuple(Fraction(k, 16) for k in (1, 5, 11, 15, 16))


@pytest.mark.parametrize('y, m', [(0, 0),
                                  (268435455, 0),
                                  (268435456, 1),
                                  (1 << 31, 2),
                                  (4026531839, 3),
                                  ((1 << 32) - 1, 4)])
def test_map_to_m(y, m):
    assert map_to_m(y, build_m_thresholds(4)) == m


@pytest.mark.parametrize('n_cells', [2, 4, 16, 32, 64])
def test_thresholds_binomial(n_cells):
    thresholds = build_m_thresholds(n_cells)
    cumulative = thresholds.cumulative()
    assert cumulative[-1] == 1
    assert sum(thresholds.probabilities()) == 1
    assert list(thresholds.cuts) == [math.floor(c * (1 << 32)) for c in cumulative[:-1]]
    assert all(a <= b for a, b in zip(thresholds.cuts, thresholds.cuts[1:]))
    if n_cells <= 32:
        assert all(a < b for a, b in zip(thresholds.cuts, thresholds.cuts[1:]))


@pytest.mark.parametrize('n_cells', [0, 1, 65])
def test_thresholds_bad_cells(n_cells):
    with pytest.raises(ParameterError):
        build_m_thresholds(n_cells)


@pytest.mark.parametrize('n_cells', [4, 8])
@pytest.mark.parametrize('draws', [20_000, pytest.param(1_000_000, marks=pytest.mark.slow)])
def test_m_frequencies(n_cells, draws):
    # every m within 4 standard deviations of its binomial weight
    thresholds = build_m_thresholds(n_cells)
    gen = XorShift(SEEDS[0])
    m = [map_to_m(next(gen), thresholds) for _ in range(draws)]
    counts = np.bincount(m, minlength=n_cells + 1)

    p = np.array([math.comb(n_cells, j) for j in range(n_cells + 1)]) / (1 << n_cells)
    sigma = np.sqrt(draws * p * (1 - p))
    assert np.all(np.abs(counts - draws * p) <= 4 * sigma)


# ---------------------------------------------------------------------------- #
# Strategy

def test_decimation():
    marks = MarkSequence(4)
    draw = ScriptedStream((1, 4, 2, 2, 3, 3, 4), 1, 4, 'b')
    assert next_strategy_block(draw, marks, 4) == [1, 4, 2, 3]
    assert len(marks) == 4

    marks.reset()
    assert next_strategy_block(draw, marks, 2) == [3, 4]
    assert 3 in marks and 1 not in marks


def test_empty_block_draws_nothing():
    draw = ScriptedStream((3, ), 1, 4, 'b')
    assert next_strategy_block(draw, MarkSequence(4), 0) == []
    assert draw() == 3


@pytest.mark.parametrize('block, expected', [((1, ), '1100'),
                                             ((), '0100'),
                                             ((1, 2, 3, 4), '1011')])
def test_ci_next_state(block, expected):
    assert format_state(ci_next_state(0b0100, block, 4), 4) == expected


@pytest.mark.parametrize('block', [(1, 1), (0, ), (5, )])
def test_ci_next_state_invalid(block):
    with pytest.raises(ParameterError):
        ci_next_state(0, block, 4)


@given(x=st.integers(0, (1 << 32) - 1),
       block=st.lists(st.integers(1, 32), unique=True, max_size=32))
def test_ci_next_state_involution(x, block):
    once = ci_next_state(x, block, 32)
    assert ci_next_state(once, block, 32) == x
    assert popcount(once ^ x) == len(block)


def test_scripted_stream_range():
    with pytest.raises(ParameterError):
        ScriptedStream((1, 5), 1, 4, 'b')

    draw = ScriptedStream((), 1, 4, 'b')
    with pytest.raises(StreamExhausted):
        draw()


# ---------------------------------------------------------------------------- #
# CI(XORshift, XORshift)

def test_worked_example():
    gen = CiGenerator.from_streams('0100', TABLE_M, TABLE_B, 4)
    assert gen.integers() == [4, 4, 11, 8]
    assert gen.rounds == 4


def test_worked_example_bits():
    gen = CiGenerator.from_streams('0100', TABLE_M, TABLE_B, 4)
    assert ''.join(map(str, gen.bits(16))) == '0100010010111000'


def test_worked_example_extended():
    gen = CiGenerator.from_streams((0, 1, 0, 0), TABLE_M + (3, ),
                                   TABLE_B + (3, 2, 1), 4)
    assert gen.integers() == [4, 4, 11, 8, 1]


def test_ci_round():
    gen = CiGenerator.from_streams('0100', (1, ), (1, ), 4)
    out = ci_round(gen)
    assert out.state == 0b1100
    assert out.bits == '1100'
    assert (out.m, out.block) == (1, (1, ))


def test_full_flip_complements():
    gen = CiGenerator.from_streams('0100', (4, ), (1, 2, 3, 4), 4)
    assert gen.step() == 0b1011


def test_index_stream_exhausted():
    gen = CiGenerator.from_streams('0100', (4, ), (1, 2), 4)
    with pytest.raises(StreamExhausted):
        gen.integers()


def test_bits_short_stream():
    gen = CiGenerator.from_streams('0100', (0, ), (), 4)
    with pytest.raises(StreamExhausted):
        gen.bits(8)


@pytest.mark.parametrize('n_cells', [4, 17, 32, 64])
def test_fast_path_matches_reference(n_cells):
    fast = seed_generator(1, *SEEDS, n_cells)
    slow = reference_generator(1, *SEEDS, n_cells)
    assert fast._apply == fast._apply_fast
    for _ in range(300):
        assert fast.step() == slow.step()
        assert fast.last_block == slow.last_block


@given(seed_m=seeds, seed_b=seeds)
@settings(max_examples=25)
def test_hamming_distance_is_m(seed_m, seed_b):
    gen = seed_generator(0, seed_m, seed_b)
    for _ in range(50):
        x = gen.x
        new = gen.step()
        assert popcount(x ^ new) == gen.last_m == len(gen.last_block)
        assert len(set(gen.last_block)) == gen.last_m


@pytest.mark.slow
def test_hamming_distance_is_m_long_run():
    gen = seed_generator(0, *SEEDS)
    violations = 0
    for _ in range(100_000):
        x = gen.x
        new = gen.step()
        violations += popcount(x ^ new) != gen.last_m or len(set(gen.last_block)) != gen.last_m
    assert violations == 0


def test_seeded_determinism():
    a = seed_generator(5, *SEEDS)
    b = seed_generator(5, *SEEDS)
    np.testing.assert_array_equal(a.bits(1000), b.bits(1000))


def test_zero_seed():
    with pytest.raises(ZeroStateError):
        seed_generator(0, 0, 1)


def test_identical_seeds_warn():
    messages = []
    sink = logger.add(messages.append, level='WARNING')
    try:
        seed_generator(0, 5, 5)
    finally:
        logger.remove(sink)
    assert any('identical' in message for message in messages)


def _uniformity_p(n_cells, per_state, seeds=SEEDS):
    k = 1 << n_cells
    states = seed_generator(0, *seeds, n_cells).integers(k * per_state)
    counts = np.bincount(states, minlength=k)
    statistic = ((counts - per_state) ** 2).sum() / per_state
    return chi_square_p(statistic, k - 1)


def test_state_uniformity():
    assert _uniformity_p(4, 1000) > 1e-6


@pytest.mark.slow
def test_state_uniformity_large():
    assert _uniformity_p(8, 2000) > 1e-6


@pytest.mark.slow
def test_state_uniformity_many_seeds():
    # 10**6 rounds at N = 4 for each of 100 seed pairs
    rng = np.random.default_rng(2024)
    passed = sum(_uniformity_p(4, 62_500, tuple(map(int, pair))) >= 1e-4
                 for pair in rng.integers(1, 1 << 32, (100, 2)))
    assert passed >= 99


# ---------------------------------------------------------------------------- #
# State helpers

@pytest.mark.parametrize('x0', ['0100', (0, 1, 0, 0), [False, True, False, False], 4])
def test_as_state(x0):
    assert as_state(x0, 4) == 4


@pytest.mark.parametrize('x0', ['012', '01000', 16, -1, (0, 1, 2, 0)])
def test_as_state_invalid(x0):
    with pytest.raises(ParameterError):
        as_state(x0, 4)


def test_bit_text():
    assert bits_from_text('01 1\n0').tolist() == [0, 1, 1, 0]
    with pytest.raises(ParameterError):
        bits_from_text('0120')


def test_pack_bits_msb_first():
    assert pack_bits([1, 0, 0, 0, 0, 0, 0, 1, 1]) == b'\x81\x80'


# ---------------------------------------------------------------------------- #
# Logistic map and old generator

@pytest.mark.parametrize('x, expected', [(0.25, 0.75), (0.75, 0.75), (0.5, 1.0)])
def test_logistic_step(x, expected):
    assert logistic_step(LogisticState(x, 4)).x == expected


def test_logistic_escape():
    top = logistic_step(LogisticState(0.5, 4))
    with pytest.raises(DegenerateOrbitError):
        logistic_step(top)


@pytest.mark.parametrize('x, r', [(0.5, 3.999999), (0.75, 4), (0.0, 4), (1.0, 4),
                                  (1 - 1 / 3.999999, 3.999999)])
def test_logistic_seed_rejected(x, r):
    with pytest.raises(DegenerateOrbitError):
        check_logistic_seed(x, r)


def test_logistic_bits():
    bits = LogisticMap(0.3).bits(1000)
    assert set(np.unique(bits)) <= {0, 1}
    np.testing.assert_array_equal(bits, LogisticMap(0.3).bits(1000))
    assert logistic_step(LogisticState(0.3)).x == pytest.approx(0.83999979)


@pytest.mark.parametrize('a, c, m', [(0.7, 96, 97), (0.3, 96, 96)])
def test_old_ci_m(a, c, m):
    assert old_ci_m(a, c) == m


@pytest.mark.parametrize('n_cells', [4, 32, 64])
def test_old_ci_cell(n_cells):
    assert old_ci_cell(0.123456, n_cells) == 12345 % n_cells


def test_old_ci_flip_parity():
    gen = OldCiGenerator(0, 0.3, 0.6)
    assert gen.c == 96
    for _ in range(100):
        x = gen.x
        new = gen.step()
        assert gen.last_m in (96, 97)
        assert popcount(x ^ new) % 2 == (gen.last_m + 1) % 2


def test_old_ci_round():
    gen, twin = OldCiGenerator(5, 0.3, 0.6), OldCiGenerator(5, 0.3, 0.6)
    assert [old_ci_round(gen) for _ in range(10)] == list(twin.states(11))[1:]


def test_old_ci_small_constant():
    with pytest.raises(ParameterError):
        OldCiGenerator(0, 0.3, 0.6, n_cells=32, c=95)


# ---------------------------------------------------------------------------- #
@pytest.mark.parametrize('name', ['xorshift', 'logistic', 'old-ci', 'new-ci'])
def test_make_generator(name):
    gen = make_generator(name, *SEEDS)
    assert gen.name == name
    bits = gen.bits(100)
    assert bits.shape == (100, )
    np.testing.assert_array_equal(bits, make_generator(name, *SEEDS).bits(100))


@pytest.mark.parametrize('args', [('new-ci', 1), ('old-ci', 1), ('mersenne', 1, 2)])
def test_make_generator_invalid(args):
    with pytest.raises(ParameterError):
        make_generator(*args)
