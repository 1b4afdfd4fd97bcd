"""
Deterministic generators: the 32-bit XORshift, the logistic map, and the two
chaotic-iterations (CI) generators built on top of them.

A CI state is an N-cell boolean vector. Throughout this module it is held as a
python integer whose most significant bit is cell 1, so the state
(x_1, ..., x_N) = (0, 1, 0, 0) is the integer 4.
"""

# std
import math
import bisect
import numbers
import itertools as itt
import functools as ftl
from fractions import Fraction
from dataclasses import dataclass
from collections import namedtuple

# third-party
import numpy as np
from loguru import logger

# relative
from ._logging import LoggingMixin


# ---------------------------------------------------------------------------- #
WORD = 32
MASK32 = (1 << WORD) - 1
SHIFTS = (13, 17, 5)            # left, right, left
N_CELLS = 32
N_CELLS_MIN, N_CELLS_MAX = 2, 64
LOGISTIC_R = 3.999999

GENERATORS = ('xorshift', 'logistic', 'old-ci', 'new-ci')

# ---------------------------------------------------------------------------- #


class ZeroStateError(ValueError):
    """XORshift seeded (or stepped) from the all-zero word."""


class DegenerateOrbitError(ArithmeticError):
    """Logistic orbit left the open unit interval, or was seeded on a trap."""


class StreamExhausted(RuntimeError):
    """An injected m or b stream has no values left."""


class ParameterError(ValueError):
    """A generator or test parameter is outside its supported range."""


# ---------------------------------------------------------------------------- #
# Bit stream framing

def bits_from_text(text):
    """
    Convert a string of '0' / '1' characters to a uint8 bit array. Whitespace
    is ignored.
    """
    text = ''.join(text.split())
    bits = np.frombuffer(text.encode('ascii'), np.uint8) - ord('0')
    if (bits > 1).any():
        bad = text[int(np.argmax(bits > 1))]
        raise ParameterError(f'Invalid character {bad!r} in bit string.')
    return bits


def bits_to_text(bits):
    return (np.asarray(bits, np.uint8) + ord('0')).tobytes().decode('ascii')


def pack_bits(bits):
    """Pack bits into bytes, most significant bit first."""
    return np.packbits(np.asarray(bits, np.uint8)).tobytes()


def unpack_bits(data, n=None):
    bits = np.unpackbits(np.frombuffer(bytes(data), np.uint8))
    return bits if n is None else bits[:n]


def format_state(x, n_cells):
    return format(x, f'0{n_cells}b')


def to_bits(x, n_cells):
    """Integer state to the tuple (x_1, ..., x_N)."""
    return tuple(x >> (n_cells - i) & 1 for i in range(1, n_cells + 1))


def from_bits(bits):
    """Tuple (x_1, ..., x_N) to the integer state."""
    x = 0
    for bit in bits:
        x = (x << 1) | (1 if bit else 0)
    return x


def check_cells(n_cells, low=N_CELLS_MIN, high=N_CELLS_MAX):
    if not isinstance(n_cells, numbers.Integral) or not low <= n_cells <= high:
        raise ParameterError(f'Number of cells N = {n_cells!r} outside supported '
                             f'range [{low}, {high}].')
    return int(n_cells)


def as_state(x0, n_cells):
    """
    Resolve an initial CI state given as an integer, a bit string such as
    '0100', or a sequence of bits (x_1, ..., x_N).
    """
    if isinstance(x0, str):
        if len(x0) != n_cells or set(x0) - set('01'):
            raise ParameterError(f'Initial state {x0!r} is not a string of '
                                 f'{n_cells} binary digits.')
        return int(x0, 2)

    if isinstance(x0, numbers.Integral):
        if not 0 <= x0 < (1 << n_cells):
            raise ParameterError(f'Initial state {x0} does not fit in '
                                 f'{n_cells} cells.')
        return int(x0)

    bits = tuple(x0)
    if len(bits) != n_cells or set(bits) - {0, 1, True, False}:
        raise ParameterError(f'Initial state {bits} is not a vector of '
                             f'{n_cells} bits.')
    return from_bits(bits)


# ---------------------------------------------------------------------------- #
# XORshift

def _shift_xor(z, shifts=SHIFTS, mask=MASK32):
    a, b, c = shifts
    z ^= (z << a) & mask
    z ^= z >> b
    z ^= (z << c) & mask
    return z


def check_seed(seed, width=WORD):
    if not isinstance(seed, numbers.Integral):
        raise TypeError(f'XORshift seed should be an integer, not {type(seed)}.')

    if seed == 0:
        raise ZeroStateError('XORshift zero state: 0 is a fixed point of the '
                             'recurrence and cannot be used as a seed.')

    if not 0 < seed < (1 << width):
        raise ParameterError(f'XORshift seed {seed} does not fit in {width} bits.')

    return int(seed)


def xorshift_step(z, shifts=SHIFTS, width=WORD):
    """
    One round of the 32-bit XORshift: shift-XOR by 13 left, 17 right, 5 left.

    Parameters
    ----------
    z : int
        Nonzero state word.

    Returns
    -------
    (int, int)
        Updated state and the output word (which are the same value).
    """
    if not z:
        raise ZeroStateError('XORshift zero state.')

    z = _shift_xor(z, shifts, (1 << width) - 1)
    return z, z


# The shift-XOR map is linear over GF(2). Matrices are tuples of column words:
# column j is the image of the basis word 1 << j.

def _gf2_identity(width):
    return tuple(1 << j for j in range(width))


def _gf2_apply(columns, v):
    out = 0
    for column in columns:
        if not v:
            break
        if v & 1:
            out ^= column
        v >>= 1
    return out


def _gf2_compose(a, b):
    return tuple(_gf2_apply(a, column) for column in b)


def _gf2_power(columns, k):
    result = _gf2_identity(len(columns))
    while k:
        if k & 1:
            result = _gf2_compose(columns, result)
        columns = _gf2_compose(columns, columns)
        k >>= 1
    return result


@ftl.lru_cache()
def transition_matrix(shifts=SHIFTS, width=WORD):
    mask = (1 << width) - 1
    return tuple(_shift_xor(1 << j, shifts, mask) for j in range(width))


def _prime_factors(n):
    factors = []
    f = 2
    while f * f <= n:
        if n % f == 0:
            factors.append(f)
            while n % f == 0:
                n //= f
        f += 1
    if n > 1:
        factors.append(n)
    return factors


def has_full_period(shifts=SHIFTS, width=WORD):
    """
    Decide whether the XORshift with the given shift triple has period
    2**width - 1. The transition matrix T must satisfy T**(2**w - 1) = I while
    no T**((2**w - 1) / p) = I for a prime p dividing 2**w - 1. A matrix of
    that order has a primitive characteristic polynomial, so every nonzero
    seed then lies on the single full cycle.
    """
    columns = transition_matrix(tuple(shifts), width)
    order = (1 << width) - 1
    identity = _gf2_identity(width)
    if _gf2_power(columns, order) != identity:
        return False

    return all(_gf2_power(columns, order // p) != identity
               for p in _prime_factors(order))


def cycle_length(seed, shifts=SHIFTS, width=WORD):
    """Brute-force walk from `seed` back to itself. Only sensible for narrow words."""
    mask = (1 << width) - 1
    z = _shift_xor(check_seed(seed, width), shifts, mask)
    steps = 1
    while z != seed:
        z = _shift_xor(z, shifts, mask)
        steps += 1
        if steps > mask:
            raise RuntimeError(f'No return to seed {seed} within {mask} steps.')
    return steps


# ---------------------------------------------------------------------------- #
class BitGenerator(LoggingMixin):
    """
    Base for the generators compared by the test battery. Subclasses yield
    fixed width words from `_chunks`, read most significant bit first.
    """

    name = None
    width = None

    def __repr__(self):
        return f'<{self.__class__.__name__}: {self.name}>'

    def _chunks(self):
        raise NotImplementedError()

    def bits(self, n):
        """
        Draw the next `n` bits of the output stream.

        Returns
        -------
        np.ndarray
            uint8 array of 0s and 1s.
        """
        if n < 0:
            raise ParameterError(f'Cannot draw a negative number of bits ({n}).')

        words = itt.islice(self._chunks(), -(-n // self.width))
        text = ''.join(map(f'{{:0{self.width}b}}'.format, words))
        if len(text) < n:
            raise StreamExhausted(f'{self!r} produced only {len(text)} of the '
                                  f'{n} requested bits.')
        return bits_from_text(text[:n])


class XorShift(BitGenerator):
    """
    The 32-bit XORshift generator. Iterating yields successive output words;
    the seed itself is never emitted.
    """

    name = 'xorshift'
    width = WORD

    def __init__(self, seed, shifts=SHIFTS, width=WORD):
        self.shifts = tuple(shifts)
        self.width = width
        self.mask = (1 << width) - 1
        self.z = check_seed(seed, width)

    def __iter__(self):
        return self

    def __next__(self):
        self.z = _shift_xor(self.z, self.shifts, self.mask)
        return self.z

    def _chunks(self):
        return self

    def jump(self, steps):
        """Advance the state by `steps` rounds in O(log steps) matrix products."""
        if steps < 0:
            raise ParameterError('XORshift cannot be rewound.')

        self.logger.debug('Jumping {} steps ahead from z = {}.', steps, self.z)
        power = _gf2_power(transition_matrix(self.shifts, self.width), steps)
        self.z = _gf2_apply(power, self.z)
        return self.z


# ---------------------------------------------------------------------------- #
# m sequence

@dataclass(frozen=True)
class MSequenceThresholds:
    """
    Integer cut points realising the binomial law of m. `cuts` holds
    t_1, ..., t_N, with t_0 = 0 and t_{N+1} = 2**32 left implicit, such that
    m = j exactly when t_j <= y < t_{j+1}.
    """

    n_cells: int
    cuts: tuple

    def cumulative(self):
        """Exact cumulative probabilities P(m <= j), j = 0, ..., N."""
        n = self.n_cells
        return tuple(itt.accumulate(Fraction(math.comb(n, i), 1 << n)
                                    for i in range(n + 1)))

    def probabilities(self):
        n = self.n_cells
        return tuple(Fraction(math.comb(n, i), 1 << n) for i in range(n + 1))


@ftl.lru_cache()
def build_m_thresholds(n_cells):
    n = check_cells(n_cells)
    cuts = (((total << WORD) >> n)
            for total in itt.accumulate(math.comb(n, i) for i in range(n)))
    return MSequenceThresholds(n, tuple(cuts))


def map_to_m(y, thresholds):
    return bisect.bisect_right(thresholds.cuts, y)


# ---------------------------------------------------------------------------- #
# Strategy

class MarkSequence:
    """Flags d_1, ..., d_N of the cells already flipped in the current round."""

    __slots__ = ('n_cells', 'flags')

    def __init__(self, n_cells):
        self.n_cells = n_cells
        self.flags = 0      # bit i - 1 holds d_i

    def __repr__(self):
        return f'MarkSequence({tuple(map(int, self))})'

    def __iter__(self):
        return (bool(self.flags >> i & 1) for i in range(self.n_cells))

    def __len__(self):
        return bin(self.flags).count('1')

    def __contains__(self, i):
        return bool(self.flags >> (i - 1) & 1)

    def reset(self):
        self.flags = 0

    def mark(self, i):
        """Set d_i. Returns False (discard) when the flag was already set."""
        bit = 1 << (i - 1)
        if self.flags & bit:
            return False
        self.flags |= bit
        return True


class ScriptedStream:
    """
    Explicit values standing in for a generator's draws, so that worked
    examples can be replayed exactly.
    """

    def __init__(self, values, low, high, name):
        self.values = values = tuple(map(int, values))
        self.name = name
        if bad := [v for v in values if not low <= v <= high]:
            raise ParameterError(f'Injected {name} values {bad} outside [{low}, {high}].')
        self._iter = iter(values)

    def __repr__(self):
        return f'ScriptedStream({self.name}={self.values})'

    def __call__(self):
        try:
            return next(self._iter)
        except StopIteration:
            raise StreamExhausted(f'Injected {self.name} stream exhausted.') from None


def next_strategy_block(draw_index, marks, m):
    """
    Irregular decimation of the index stream: draw until `m` distinct cells
    are accepted. Draws hitting an already marked cell are discarded.

    Parameters
    ----------
    draw_index : callable
        Returns the next raw index b in [1, N].
    marks : MarkSequence
        Mark flags, all clear on entry.
    m : int
        Number of cells to select, 0 <= m <= N.

    Returns
    -------
    list of int
        The accepted indices in arrival order.
    """
    if not 0 <= m <= marks.n_cells:
        raise ParameterError(f'Block size m = {m} outside [0, {marks.n_cells}].')

    block = []
    while len(block) < m:
        if marks.mark(i := draw_index()):
            block.append(i)
    return block


def ci_next_state(x, block, n_cells):
    """Complement the cells listed in `block` (vectorial negation, one cell at a time)."""
    if len(set(block)) != len(block):
        raise ParameterError(f'Strategy block {block} repeats a cell.')

    for i in block:
        if not 1 <= i <= n_cells:
            raise ParameterError(f'Cell index {i} outside [1, {n_cells}].')
        x ^= 1 << (n_cells - i)
    return x


# ---------------------------------------------------------------------------- #
RoundOutput = namedtuple('RoundOutput', ('state', 'bits', 'm', 'block'))


class CiGenerator(BitGenerator):
    """
    The CI(XORshift, XORshift) generator. One XORshift (`gen_m`) drives the
    number m of cells flipped per round through the binomial thresholds, a
    second one (`gen_b`) drives which cells, decimated so that no cell flips
    twice between two outputs.

    The state stream starts at x^0. Each further output costs one round: m is
    drawn, the current state emitted, then the m flips applied.
    """

    name = 'new-ci'

    def __init__(self, x0, gen_m, gen_b, n_cells=N_CELLS):
        self.n_cells = self.width = n = check_cells(n_cells)
        self.x = self.x0 = as_state(x0, n)
        self.thresholds = build_m_thresholds(n)
        self.marks = MarkSequence(n)
        self.gen_m = gen_m
        self.gen_b = gen_b
        self.rounds = 0
        self.last_m = None
        self.last_block = ()

        # draws are either XORshift words or injected values
        if isinstance(gen_m, XorShift):
            self._draw_m = lambda: map_to_m(next(gen_m), self.thresholds)
        else:
            self._draw_m = gen_m

        if isinstance(gen_b, XorShift):
            self._draw_index = lambda: next(gen_b) % n + 1
            self._apply = self._apply_fast
        else:
            self._draw_index = gen_b

    def __repr__(self):
        return (f'<{self.__class__.__name__}: N={self.n_cells}, '
                f'x={format_state(self.x, self.n_cells)}, rounds={self.rounds}>')

    @classmethod
    def from_streams(cls, x0, m_values, b_values, n_cells):
        """Generator replaying explicit m and b sequences (b given 1-based)."""
        return cls(x0,
                   ScriptedStream(m_values, 0, n_cells, 'm'),
                   ScriptedStream(b_values, 1, n_cells, 'b'),
                   n_cells)

    # ------------------------------------------------------------------------ #
    def _apply(self, m):
        self.marks.reset()
        block = next_strategy_block(self._draw_index, self.marks, m)
        self.x = ci_next_state(self.x, block, self.n_cells)
        return self._record(m, block)

    def _apply_fast(self, m):
        # same as `_apply` with the index XORshift and the marks inlined
        n = self.n_cells
        if not 0 <= m <= n:
            raise ParameterError(f'Block size m = {m} outside [0, {n}].')

        gen = self.gen_b
        a, b, c = gen.shifts
        mask = gen.mask
        z, x, flags, block = gen.z, self.x, 0, []
        while len(block) < m:
            z ^= (z << a) & mask
            z ^= z >> b
            z ^= (z << c) & mask
            i = z % n
            if not flags >> i & 1:
                flags |= 1 << i
                block.append(i + 1)
                x ^= 1 << (n - 1 - i)

        gen.z = z
        self.marks.flags = flags
        self.x = x
        return self._record(m, block)

    def _record(self, m, block):
        self.rounds += 1
        self.last_m = m
        self.last_block = tuple(block)
        return self.x

    def step(self):
        """Run one round; returns the new state."""
        return self._apply(self._draw_m())

    def states(self, count=None):
        """
        Iterate the output states (integers) starting with x^0. Ends early if
        an injected m stream runs dry.
        """
        for _ in (itt.count() if count is None else range(count)):
            try:
                m = self._draw_m()
            except StreamExhausted:
                self.logger.debug('m stream exhausted after {} rounds.', self.rounds)
                return

            state = self.x
            self._apply(m)
            yield state

    def integers(self, count=None):
        return list(self.states(count))

    _chunks = states


def ci_round(generator):
    """One round of `generator`; the new state as integer and as bit string."""
    x = generator.step()
    return RoundOutput(x, format_state(x, generator.n_cells),
                       generator.last_m, generator.last_block)


def seed_generator(x0, seed_m, seed_b, n_cells=N_CELLS):
    """Deterministic CI(XORshift, XORshift) generator from explicit seeds."""
    gen_m, gen_b = XorShift(seed_m), XorShift(seed_b)
    if seed_m == seed_b:
        logger.warning('The m and b XORshifts share the seed {}; their streams '
                       'will be identical.', seed_m)
    return CiGenerator(x0, gen_m, gen_b, n_cells)


# ---------------------------------------------------------------------------- #
# Logistic map and the old generator

@dataclass(frozen=True)
class LogisticState:
    x: float
    r: float = LOGISTIC_R


def logistic_step(state):
    x, r = state.x, state.r
    if not 0 < x < 1:
        raise DegenerateOrbitError(f'Logistic orbit left (0, 1): x = {x!r}.')
    return LogisticState(r * x * (1 - x), r)


def check_logistic_seed(x, r=LOGISTIC_R):
    x = float(x)
    if not 0 < x < 1:
        raise DegenerateOrbitError(f'Logistic seed {x!r} outside (0, 1).')

    if x == 0.5 or x == 1 - 1 / r:
        raise DegenerateOrbitError(f'Logistic seed {x!r} is a degenerate point '
                                   f'of the map with r = {r}.')
    return x


def seed_to_unit(seed):
    """Map a 32-bit integer seed to a logistic seed in (0, 1)."""
    return check_seed(seed) / (1 << WORD)


class LogisticMap(BitGenerator):
    """Bit generator thresholding the logistic orbit: bit = [x > 0.5]."""

    name = 'logistic'
    width = 1

    def __init__(self, x0, r=LOGISTIC_R):
        self.r = r
        self.x = check_logistic_seed(x0, r)

    def bits(self, n):
        if n < 0:
            raise ParameterError(f'Cannot draw a negative number of bits ({n}).')

        r, x = self.r, self.x
        out = []
        for _ in range(n):
            if not 0 < x < 1:
                self.x = x
                raise DegenerateOrbitError(f'Logistic orbit left (0, 1): x = {x!r}.')
            x = r * x * (1 - x)
            out.append(x > 0.5)

        self.x = x
        return np.array(out, np.uint8)


def old_ci_m(a, c):
    """Flip count of an old generator round: d + c with d = [a > 0.5]."""
    return int(a > 0.5) + c


def old_ci_cell(b, n_cells):
    """0-based cell picked by the second logistic value: floor(100000 b) mod N."""
    return int(100000 * b) % n_cells


class OldCiGenerator(BitGenerator):
    """
    The earlier CI(Logistic, Logistic) generator. Each round flips cells picked
    by a second logistic map m + 1 times, repeats allowed.
    """

    name = 'old-ci'

    def __init__(self, x0, a0, b0, n_cells=N_CELLS, c=None, r=LOGISTIC_R):
        self.n_cells = self.width = n = check_cells(n_cells)
        self.c = 3 * n if c is None else int(c)
        if self.c < 3 * n:
            raise ParameterError(f'Constant c = {self.c} must be at least 3N = {3 * n}.')

        self.x = self.x0 = as_state(x0, n)
        self.r = r
        self.a = check_logistic_seed(a0, r)
        self.b = check_logistic_seed(b0, r)
        self.last_m = None

    def __repr__(self):
        return (f'<{self.__class__.__name__}: N={self.n_cells}, c={self.c}, '
                f'x={format_state(self.x, self.n_cells)}>')

    def step(self):
        n, r = self.n_cells, self.r
        self.a = a = logistic_step(LogisticState(self.a, r)).x
        self.last_m = m = old_ci_m(a, self.c)

        b, x = self.b, self.x
        for _ in range(m + 1):
            if not 0 < b < 1:
                raise DegenerateOrbitError(f'Logistic orbit left (0, 1): b = {b!r}.')
            b = r * b * (1 - b)
            x ^= 1 << (n - 1 - old_ci_cell(b, n))

        self.b, self.x = b, x
        return x

    def states(self, count=None):
        for _ in (itt.count() if count is None else range(count)):
            state = self.x
            self.step()
            yield state

    _chunks = states


def old_ci_round(generator):
    return generator.step()


# ---------------------------------------------------------------------------- #
def make_generator(name, seed_m, seed_b=None, x0=0, n_cells=N_CELLS, c=None):
    """
    Build one of the compared generators from integer seeds. The logistic
    based generators take their real seeds as seed / 2**32.

    Parameters
    ----------
    name : {'xorshift', 'logistic', 'old-ci', 'new-ci'}
    seed_m, seed_b : int
        Nonzero 32-bit seeds. `seed_b` is required by the CI generators.
    x0 : int or str or sequence
        Initial CI state.
    """
    if name == 'xorshift':
        return XorShift(seed_m)

    if name == 'logistic':
        return LogisticMap(seed_to_unit(seed_m))

    if seed_b is None:
        raise ParameterError(f'Generator {name!r} needs two seeds.')

    if name == 'old-ci':
        return OldCiGenerator(x0, seed_to_unit(seed_m), seed_to_unit(seed_b),
                              n_cells, c)

    if name == 'new-ci':
        return seed_generator(x0, seed_m, seed_b, n_cells)

    raise ParameterError(f'Unknown generator {name!r}. Choose from {GENERATORS}.')
