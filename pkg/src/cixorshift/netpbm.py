"""
Netpbm codecs for the watermarking tools: PGM (P5 binary, P2 ASCII, maxval
255) for grayscale carriers and PBM (P4 binary, P1 ASCII) for binary
watermarks. Writers emit the binary variants.
"""

# std
import re
from pathlib import Path
from dataclasses import dataclass

# third-party
import numpy as np


# ---------------------------------------------------------------------------- #
MAXVAL = 255
WHITESPACE = b' \t\n\r\v\f'
GRAY_MAGIC = (b'P5', b'P2')
BITMAP_MAGIC = (b'P4', b'P1')

RGX_TOKEN = re.compile(rb'#[^\n]*|\S+')
RGX_BIT = re.compile(rb'#[^\n]*|[01]|\S')

# ---------------------------------------------------------------------------- #


class FormatError(ValueError):
    """Malformed or truncated netpbm data. `offset` locates the problem."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f'{message} (byte offset {offset})'
        super().__init__(message)
        self.offset = offset


def _as_matrix(values, kind):
    array = np.asarray(values)
    if array.ndim != 2 or 0 in array.shape:
        raise ValueError(f'{kind} needs a non-empty 2d array, got shape {array.shape}.')
    return array


@dataclass(frozen=True, eq=False)
class GrayImage:
    """8-bit grayscale image, pixels stored row-major as (height, width)."""

    pixels: np.ndarray

    def __post_init__(self):
        pixels = _as_matrix(self.pixels, type(self).__name__)
        if pixels.dtype != np.uint8:
            if pixels.min() < 0 or pixels.max() > MAXVAL:
                raise ValueError(f'Pixel values outside [0, {MAXVAL}].')
            pixels = pixels.astype(np.uint8)
        object.__setattr__(self, 'pixels', pixels)

    def __repr__(self):
        return f'GrayImage({self.width}x{self.height})'

    def __eq__(self, other):
        return isinstance(other, GrayImage) and np.array_equal(self.pixels, other.pixels)

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def size(self):
        return self.pixels.size


@dataclass(frozen=True, eq=False)
class BitMatrix:
    """Binary image, bits stored row-major as (height, width) 0 / 1 values."""

    bits: np.ndarray

    def __post_init__(self):
        bits = _as_matrix(self.bits, type(self).__name__)
        if ((bits < 0) | (bits > 1)).any():
            raise ValueError('BitMatrix values must be 0 or 1.')
        object.__setattr__(self, 'bits', bits.astype(np.uint8))

    def __repr__(self):
        return f'BitMatrix({self.width}x{self.height})'

    def __eq__(self, other):
        return isinstance(other, BitMatrix) and np.array_equal(self.bits, other.bits)

    @property
    def width(self):
        return self.bits.shape[1]

    @property
    def height(self):
        return self.bits.shape[0]

    @property
    def shape(self):
        return self.bits.shape

    @property
    def size(self):
        return self.bits.size


# ---------------------------------------------------------------------------- #
def _skip_space(data, pos):
    # whitespace and '#' comments running to the end of line
    while pos < len(data):
        if data[pos] in WHITESPACE:
            pos += 1
        elif data[pos] == ord('#'):
            end = data.find(b'\n', pos)
            pos = len(data) if end < 0 else end
        else:
            break
    return pos


def read_header(data, magics, n_fields):
    """
    Parse the magic number and `n_fields` decimal header fields.

    Returns
    -------
    magic : bytes
    fields : list of int
    offset : int
        Offset of the first payload byte.
    """
    magic = bytes(data[:2])
    if magic not in magics:
        raise FormatError(f'Expected one of {[m.decode() for m in magics]}, '
                          f'found magic {magic!r}.', 0)

    if data[2:3] and data[2] not in WHITESPACE:
        raise FormatError('Missing whitespace after magic number.', 2)

    pos = 2
    fields = []
    while len(fields) < n_fields:
        start = pos = _skip_space(data, pos)
        while pos < len(data) and 48 <= data[pos] <= 57:
            pos += 1

        if pos == start:
            what = 'Truncated header' if pos >= len(data) else 'Invalid header field'
            raise FormatError(what, pos)

        fields.append(int(data[start:pos]))

    if pos >= len(data) or data[pos] not in WHITESPACE:
        raise FormatError('Header not terminated by whitespace.', pos)

    if 0 in fields[:2]:
        raise FormatError(f'Image dimensions must be positive, got {fields[:2]}.', pos)

    return magic, fields, pos + 1


def _ascii_values(data, start, count, rgx, maximum):
    values = []
    for match in rgx.finditer(data, start):
        token = match.group()
        if token.startswith(b'#'):
            continue
        if not token.isdigit() or int(token) > maximum:
            raise FormatError(f'Invalid token {token!r} in ASCII payload.', match.start())
        values.append(int(token))
        if len(values) == count:
            return values

    raise FormatError(f'Truncated payload: expected {count} values, found '
                      f'{len(values)}.', len(data))


def _binary_payload(data, start, count):
    if (found := len(data) - start) < count:
        raise FormatError(f'Truncated payload: expected {count} bytes, found '
                          f'{found}.', len(data))
    return np.frombuffer(bytes(data[start:start + count]), np.uint8)


# ---------------------------------------------------------------------------- #
def decode_pgm(data):
    magic, (width, height, maxval), start = read_header(data, GRAY_MAGIC, 3)
    if maxval != MAXVAL:
        raise FormatError(f'Only maxval {MAXVAL} is supported, got {maxval}.', start - 1)

    count = width * height
    if magic == b'P5':
        pixels = _binary_payload(data, start, count)
    else:
        pixels = np.array(_ascii_values(data, start, count, RGX_TOKEN, MAXVAL))

    return GrayImage(pixels.reshape(height, width).astype(np.uint8))


def encode_pgm(image):
    header = f'P5\n{image.width} {image.height}\n{MAXVAL}\n'.encode()
    return header + image.pixels.tobytes()


def decode_pbm(data):
    magic, (width, height), start = read_header(data, BITMAP_MAGIC, 2)
    if magic == b'P4':
        row_bytes = -(-width // 8)
        packed = _binary_payload(data, start, row_bytes * height)
        bits = np.unpackbits(packed.reshape(height, row_bytes), axis=1)[:, :width]
    else:
        bits = np.array(_ascii_values(data, start, width * height, RGX_BIT, 1),
                        np.uint8).reshape(height, width)

    return BitMatrix(bits)


def encode_pbm(matrix):
    header = f'P4\n{matrix.width} {matrix.height}\n'.encode()
    return header + np.packbits(matrix.bits, axis=1).tobytes()


def read_pgm(path):
    return decode_pgm(Path(path).read_bytes())


def write_pgm(path, image):
    Path(path).write_bytes(encode_pgm(image))


def read_pbm(path):
    return decode_pbm(Path(path).read_bytes())


def write_pbm(path, matrix):
    Path(path).write_bytes(encode_pbm(matrix))
