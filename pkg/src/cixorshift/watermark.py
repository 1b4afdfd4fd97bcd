"""
Chaotic-iterations watermarking.

The binary watermark is encrypted by chaotic iterations with the vectorial
negation, driven by a strategy read from a keyed CI(XORshift, XORshift)
generator. The encrypted bits then replace bits of the carrier's three low
bit planes at positions given by the dyadic recurrence

    U^0 = S^0,    U^{n+1} = S^{n+1} + 2 U^n + n  (mod |L|)

where already used positions are skipped. Extraction replays the same key
stream, so only the key is needed.
"""

# std
import re
import math
from pathlib import Path
from dataclasses import dataclass

# third-party
import numpy as np
from loguru import logger

# relative
from ._logging import LoggingMixin
from .netpbm import BitMatrix, GrayImage
from .core import as_state, check_cells, check_seed, seed_generator


# ---------------------------------------------------------------------------- #
WATERMARK_CELLS = 64
LOW_BITS = 3
ENCRYPTION_PASSES = 2

RGX_KEY = re.compile(r'N=(\d+)\s+x0=([0-9a-fA-F]+)\s+sm=(\d+)\s+sb=(\d+)')

# ---------------------------------------------------------------------------- #


class KeyFormatError(ValueError):
    """Malformed watermark key line."""


class CapacityError(ValueError):
    """Carrier low bit planes cannot hold the watermark."""


@dataclass(frozen=True)
class WatermarkKey:
    """Secret key: initial state and both XORshift seeds of the CI generator."""

    x0: int
    seed_m: int
    seed_b: int
    n_cells: int = WATERMARK_CELLS

    def __post_init__(self):
        check_cells(self.n_cells)
        object.__setattr__(self, 'x0', as_state(self.x0, self.n_cells))
        check_seed(self.seed_m)
        check_seed(self.seed_b)

    def __str__(self):
        digits = -(-self.n_cells // 4)
        return (f'N={self.n_cells} x0={self.x0:0{digits}x} '
                f'sm={self.seed_m} sb={self.seed_b}')

    @classmethod
    def parse(cls, text):
        if not (match := RGX_KEY.fullmatch(text.strip())):
            raise KeyFormatError(f'Could not parse watermark key {text.strip()!r}. '
                                 "Expected 'N=<int> x0=<hex> sm=<u32> sb=<u32>'.")

        n, x0, seed_m, seed_b = match.groups()
        return cls(int(x0, 16), int(seed_m), int(seed_b), int(n))

    @classmethod
    def from_file(cls, path):
        return cls.parse(Path(path).read_text())

    def to_file(self, path):
        Path(path).write_text(f'{self}\n')

    def generator(self):
        return seed_generator(self.x0, self.seed_m, self.seed_b, self.n_cells)


class KeyStream(LoggingMixin):
    """
    Output bits of the keyed CI generator, consumed as fixed width windows,
    most significant bit first. The seed state x^0 belongs to the key and is
    skipped.
    """

    def __init__(self, key):
        self.key = key
        self.generator = key.generator()
        self._states = self.generator.states()
        next(self._states)
        self._buffer = 0
        self._available = 0

    def window(self, width):
        n = self.generator.n_cells
        while self._available < width:
            self._buffer = (self._buffer << n) | next(self._states)
            self._available += n

        self._available -= width
        value = self._buffer >> self._available
        self._buffer &= (1 << self._available) - 1
        return value

    def windows(self, width, count):
        self.logger.debug('Drawing {} windows of {} bits.', count, width)
        return np.fromiter((self.window(width) for _ in range(count)),
                           np.int64, count)


def _window_width(size):
    return max(1, (size - 1).bit_length())


def _flat(w):
    return np.asarray(w.bits if isinstance(w, BitMatrix) else w, np.uint8).ravel()


# ---------------------------------------------------------------------------- #
# Encryption

def strategy(stream, size, count):
    """`count` strategy terms in [1, size] from the key stream."""
    return stream.windows(_window_width(size), count) % size + 1


def iterate_negation(x, terms):
    """
    Chaotic iterations with the vectorial negation: term S^k complements
    cell S^k. Only the parity of the visits to a cell matters, so the result
    is x XOR (visit counts mod 2).
    """
    x = np.asarray(x, np.uint8)
    visits = np.bincount(np.asarray(terms) - 1, minlength=x.size)
    return x ^ (visits & 1).astype(np.uint8)


def _encrypt(flat, stream, passes):
    return iterate_negation(flat, strategy(stream, flat.size, passes * flat.size))


def encrypt_watermark(w, key, passes=ENCRYPTION_PASSES):
    """
    Encrypt the watermark `w` (BitMatrix or bit array) into a flat bit
    vector. Encryption is an involution: applying it again with the same key
    restores the watermark.
    """
    return _encrypt(_flat(w), KeyStream(key), passes)


def decrypt_watermark(bits, key, shape, passes=ENCRYPTION_PASSES):
    return BitMatrix(encrypt_watermark(bits, key, passes).reshape(shape))


# ---------------------------------------------------------------------------- #
# Embedding

def u_sequence_step(u_prev, s_next, n, modulus):
    return (s_next + 2 * u_prev + n) % modulus


def embedding_positions(stream, count, modulus):
    """
    The first `count` distinct positions of the U recurrence. Positions seen
    before are skipped, though the recurrence still advances through them.
    """
    if count > modulus:
        raise CapacityError(f'Cannot pick {count} distinct positions out of {modulus}.')

    width = _window_width(modulus)
    used = np.zeros(modulus, bool)
    positions = []
    u = stream.window(width) % modulus
    n = 0
    limit = 64 * modulus
    while len(positions) < count:
        if not used[u]:
            used[u] = True
            positions.append(u)
            continue

        u = u_sequence_step(u, stream.window(width) % modulus, n, modulus)
        n += 1
        if n > limit:
            raise RuntimeError(f'U recurrence found only {len(positions)} of '
                               f'{count} positions in {limit} steps.')

    return np.array(positions, np.int64)


def carrier_bit_plane(image):
    """
    L: the three low bits of every pixel, row-major, each pixel contributing
    bits 2, 1, 0 in that order.
    """
    return np.unpackbits(image.pixels.reshape(-1, 1), axis=1)[:, -LOW_BITS:].ravel()


def fold_bit_plane(image, plane):
    """Carrier with its three low bit planes replaced by `plane`."""
    weights = 1 << np.arange(LOW_BITS - 1, -1, -1)
    low = np.asarray(plane, np.uint8).reshape(-1, LOW_BITS) @ weights
    high = image.pixels.ravel() & ~np.uint8((1 << LOW_BITS) - 1)
    return GrayImage((high | low.astype(np.uint8)).reshape(image.pixels.shape))


def _check_capacity(image, size):
    if size <= 0:
        raise ValueError(f'Watermark size must be positive, got {size}.')

    if (capacity := LOW_BITS * image.size) < size:
        raise CapacityError(f'Carrier {image!r} holds {capacity} low bits, too few '
                            f'for a watermark of {size} bits.')
    return capacity


def embed(carrier, w, key, passes=ENCRYPTION_PASSES):
    """
    Embed watermark `w` into `carrier` under `key`.

    Parameters
    ----------
    carrier : GrayImage
    w : BitMatrix
    key : WatermarkKey

    Returns
    -------
    GrayImage
        The watermarked image. Only the three low bits of the pixels holding
        the |w| used positions can differ from the carrier.
    """
    modulus = _check_capacity(carrier, w.size)
    stream = KeyStream(key)
    encrypted = _encrypt(_flat(w), stream, passes)
    positions = embedding_positions(stream, w.size, modulus)

    plane = carrier_bit_plane(carrier)
    previous = plane[positions]
    plane[positions] = encrypted
    logger.opt(lazy=True).debug('Embedded {} bits in {}; {} low bits changed.',
                                lambda: w.size, lambda: carrier,
                                lambda: np.count_nonzero(previous != encrypted))
    return fold_bit_plane(carrier, plane)


def extract(watermarked, key, shape, passes=ENCRYPTION_PASSES):
    """
    Recover the watermark of `shape` = (height, width) from `watermarked`
    using only the key.
    """
    height, width = shape
    size = height * width
    modulus = _check_capacity(watermarked, size)
    stream = KeyStream(key)
    mask = _encrypt(np.zeros(size, np.uint8), stream, passes)
    positions = embedding_positions(stream, size, modulus)
    bits = carrier_bit_plane(watermarked)[positions] ^ mask
    return BitMatrix(bits.reshape(height, width))


def psnr(a, b):
    """Peak signal to noise ratio between two 8-bit images in dB."""
    mse = np.mean((a.pixels.astype(float) - b.pixels.astype(float)) ** 2)
    return math.inf if mse == 0 else 10 * math.log10(255 ** 2 / mse)
