# third-party
import pytest
import numpy as np
from loguru import logger
from hypothesis import given, settings, strategies as st
from cixorshift import ZeroStateError, watermark
from cixorshift.netpbm import BitMatrix, GrayImage
from cixorshift.watermark import (
    LOW_BITS, CapacityError, KeyFormatError, KeyStream, WatermarkKey,
    carrier_bit_plane, embed, embedding_positions, encrypt_watermark,
    decrypt_watermark, extract, fold_bit_plane, iterate_negation, psnr, strategy,
    u_sequence_step)

# ---------------------------------------------------------------------------- #
logger.enable('cixorshift')

# ---------------------------------------------------------------------------- #
KEY = WatermarkKey(0x0123456789abcdef, 2463534242, 88675123)
KEY_LINE = 'N=64 x0=0123456789abcdef sm=2463534242 sb=88675123'

# ---------------------------------------------------------------------------- #


def random_key(rng):
    x0, seed_m, seed_b = rng.integers(1, 1 << 32, 3)
    return WatermarkKey(int(x0) << 32 | int(seed_m), int(seed_m), int(seed_b))


def random_case(seed, size=16, mark=8):
    rng = np.random.default_rng(seed)
    carrier = GrayImage(rng.integers(0, 256, (size, size), np.uint8))
    w = BitMatrix(rng.integers(0, 2, (mark, mark)))
    return carrier, w, random_key(rng)


def used_positions(key, size, modulus):
    # replay the key stream: encryption strategy first, then the U positions
    stream = KeyStream(key)
    strategy(stream, size, 2 * size)
    return embedding_positions(stream, size, modulus)


def flip_low_bit(image, position):
    pixels = image.pixels.copy()
    pixel, bit = divmod(int(position), LOW_BITS)
    pixels.flat[pixel] ^= 1 << (LOW_BITS - 1 - bit)
    return GrayImage(pixels)


@pytest.fixture(scope='module')
def lena():
    # smooth 256 x 256 carrier with a 64 x 64 mark
    yy, xx = np.mgrid[:256, :256]
    carrier = GrayImage((127.5 * (1 + np.sin(xx / 17) * np.cos(yy / 23))).astype(np.uint8))
    w = BitMatrix(np.random.default_rng(3).integers(0, 2, (64, 64)))
    return carrier, w, embed(carrier, w, KEY)


# ---------------------------------------------------------------------------- #
# Key

def test_key_line():
    assert str(KEY) == KEY_LINE
    assert WatermarkKey.parse(KEY_LINE) == KEY
    assert WatermarkKey.parse(f'  {KEY_LINE}\n') == KEY


@given(x0=st.integers(0, (1 << 64) - 1),
       seed_m=st.integers(1, (1 << 32) - 1),
       seed_b=st.integers(1, (1 << 32) - 1))
def test_key_line_round_trip(x0, seed_m, seed_b):
    key = WatermarkKey(x0, seed_m, seed_b)
    assert WatermarkKey.parse(str(key)) == key


def test_key_file(tmp_path):
    path = tmp_path / 'key.txt'
    KEY.to_file(path)
    assert WatermarkKey.from_file(path) == KEY


@pytest.mark.parametrize('line', ['', 'N=64 x0=zz sm=1 sb=2', 'N=64 x0=01 sm=1',
                                  'x0=01 sm=1 sb=2'])
def test_key_malformed(line):
    with pytest.raises(KeyFormatError):
        WatermarkKey.parse(line)


def test_key_zero_seed():
    with pytest.raises(ZeroStateError):
        WatermarkKey(1, 0, 5)


# ---------------------------------------------------------------------------- #
# Encryption

def test_single_flip():
    assert iterate_negation(np.zeros(8, np.uint8), [1]).tolist() == [1] + [0] * 7


@given(st.lists(st.integers(1, 12), max_size=50))
def test_negation_parity(terms):
    # literal chaotic iterations, one complemented cell per term
    x = np.random.default_rng(len(terms)).integers(0, 2, 12).astype(np.uint8)
    expected = x.copy()
    for i in terms:
        expected[i - 1] ^= 1
    np.testing.assert_array_equal(iterate_negation(x, terms), expected)


def test_strategy_range():
    terms = strategy(KeyStream(KEY), 4096, 8192)
    assert terms.min() >= 1 and terms.max() <= 4096
    assert len(np.unique(terms)) > 3000


def test_encryption_involution():
    w = BitMatrix(np.random.default_rng(1).integers(0, 2, (64, 64)))
    encrypted = encrypt_watermark(w, KEY)
    assert encrypted.shape == (4096, )
    assert 0.4 < np.mean(encrypted != w.bits.ravel()) < 0.6
    np.testing.assert_array_equal(encrypt_watermark(encrypted, KEY), w.bits.ravel())
    assert decrypt_watermark(encrypted, KEY, w.shape) == w


def test_encryption_key_sensitivity():
    w = BitMatrix(np.zeros((64, 64), np.uint8))
    other = WatermarkKey(KEY.x0, KEY.seed_m ^ 1, KEY.seed_b)
    differ = np.mean(encrypt_watermark(w, KEY) != encrypt_watermark(w, other))
    assert 0.45 < differ < 0.55


# ---------------------------------------------------------------------------- #
# Positions

def test_u_sequence_step():
    assert u_sequence_step(5, 3, 0, 196608) == 13
    assert u_sequence_step(196607, 1, 0, 196608) == 196607
    assert u_sequence_step(10, 0, 7, 16) == 11


def test_positions_distinct():
    positions = embedding_positions(KeyStream(KEY), 500, 768)
    assert len(set(positions.tolist())) == 500
    assert positions.min() >= 0 and positions.max() < 768


def test_positions_full_capacity():
    positions = embedding_positions(KeyStream(KEY), 48, 48)
    assert sorted(positions.tolist()) == list(range(48))


def test_positions_over_capacity():
    with pytest.raises(CapacityError):
        embedding_positions(KeyStream(KEY), 49, 48)


# ---------------------------------------------------------------------------- #
# Bit planes

def test_bit_plane_order():
    image = GrayImage(np.array([[0b10110101, 0b00000010]], np.uint8))
    plane = carrier_bit_plane(image)
    assert plane.tolist() == [1, 0, 1, 0, 1, 0]

    folded = fold_bit_plane(image, [0, 1, 1, 1, 0, 0])
    assert folded.pixels.tolist() == [[0b10110011, 0b00000100]]


# ---------------------------------------------------------------------------- #
# Embedding

@pytest.mark.parametrize('seed', range(50))
def test_round_trip(seed):
    carrier, w, key = random_case(seed)
    marked = embed(carrier, w, key)
    assert extract(marked, key, w.shape) == w

    change = np.abs(marked.pixels.astype(int) - carrier.pixels.astype(int))
    assert change.max() <= 7
    np.testing.assert_array_equal(marked.pixels >> LOW_BITS, carrier.pixels >> LOW_BITS)


def test_lena(lena):
    carrier, w, marked = lena
    assert extract(marked, KEY, (64, 64)) == w
    assert psnr(carrier, marked) > 37
    assert np.count_nonzero(marked.pixels != carrier.pixels) <= 4096
    assert psnr(carrier, carrier) == float('inf')


def test_substitution_touches_used_positions_only():
    carrier = GrayImage(np.random.default_rng(5).integers(0, 256, (32, 32), np.uint8))
    zeros = embed(carrier, BitMatrix(np.zeros((16, 16), np.uint8)), KEY)
    ones = embed(carrier, BitMatrix(np.ones((16, 16), np.uint8)), KEY)

    differ = np.flatnonzero(carrier_bit_plane(zeros) != carrier_bit_plane(ones))
    positions = used_positions(KEY, 256, 3 * 1024)
    assert sorted(differ.tolist()) == sorted(positions.tolist())


@pytest.mark.parametrize('t', [1, 5, 64])
def test_tamper_locality(t):
    carrier, w, key = random_case(11, size=32, mark=16)
    marked = embed(carrier, w, key)
    positions = used_positions(key, w.size, LOW_BITS * carrier.size)

    # t used low bits: exactly t watermark bits change
    tampered = marked
    for position in positions[17:17 + t]:
        tampered = flip_low_bit(tampered, position)
    assert np.count_nonzero(extract(tampered, key, w.shape).bits != w.bits) == t

    # unused low bit and high bit planes: nothing changes
    unused = np.setdiff1d(np.arange(LOW_BITS * carrier.size), positions)[0]
    assert extract(flip_low_bit(marked, unused), key, w.shape) == w

    pixels = marked.pixels ^ np.uint8(0b11111000)
    assert extract(GrayImage(pixels), key, w.shape) == w


def test_embed_logs_changed_bits(monkeypatch):
    calls = []

    def plane(image):
        calls.append(image)
        return carrier_bit_plane(image)

    monkeypatch.setattr(watermark, 'carrier_bit_plane', plane)
    carrier, w, key = random_case(4)
    messages = []
    sink = logger.add(messages.append, level='DEBUG', format='{message}')
    try:
        marked = embed(carrier, w, key)
    finally:
        logger.remove(sink)

    changed = np.count_nonzero(carrier_bit_plane(carrier) != carrier_bit_plane(marked))
    assert len(calls) == 1
    assert any(f'; {changed} low bits changed' in message for message in messages)


def test_wrong_key():
    carrier, w, key = random_case(3, size=64, mark=32)
    marked = embed(carrier, w, key)
    wrong = WatermarkKey(key.x0, key.seed_m, key.seed_b ^ 1)
    assert 0.4 < np.mean(extract(marked, wrong, w.shape).bits != w.bits) < 0.6


def test_key_determinism():
    # positions and encryption depend on the key alone
    w = BitMatrix(np.random.default_rng(2).integers(0, 2, (8, 8)))
    a = embed(GrayImage(np.zeros((16, 16), np.uint8)), w, KEY)
    b = embed(GrayImage(np.full((16, 16), 255, np.uint8)), w, KEY)
    positions = used_positions(KEY, w.size, 768)
    np.testing.assert_array_equal(carrier_bit_plane(a)[positions],
                                  carrier_bit_plane(b)[positions])


@pytest.mark.parametrize('size, mark', [(4, 8), (2, 5)])
def test_capacity(size, mark):
    carrier = GrayImage(np.zeros((size, size), np.uint8))
    with pytest.raises(CapacityError):
        embed(carrier, BitMatrix(np.zeros((mark, mark), np.uint8)), KEY)
    with pytest.raises(CapacityError):
        extract(carrier, KEY, (mark, mark))


@given(seed=st.integers(0, 10_000))
@settings(max_examples=20, deadline=None)
def test_round_trip_rectangular(seed):
    rng = np.random.default_rng(seed)
    height, width = rng.integers(1, 12, 2)
    carrier = GrayImage(rng.integers(0, 256, (8, 6), np.uint8))
    w = BitMatrix(rng.integers(0, 2, (height, width)))
    if w.size > LOW_BITS * carrier.size:
        return

    key = random_key(rng)
    assert extract(embed(carrier, w, key), key, w.shape) == w
