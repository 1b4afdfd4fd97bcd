"""
Five classical randomness tests (frequency, serial, poker, runs and
autocorrelation) with their chi-square / normal evaluation, the key
sensitivity experiment and the generator comparison harness.
"""

# std
import io
import csv
import math
import time
import statistics
from fractions import Fraction
from dataclasses import dataclass

# third-party
import numpy as np
from loguru import logger

# relative
from .core import ParameterError, bits_from_text


# ---------------------------------------------------------------------------- #
ALPHA = 0.01
AUTOCORRELATION_SHIFT = 8
BENCH_LENGTH = 200_000
BENCH_REPEATS = 5
MIN_BATTERY_LENGTH = 10_000

TESTS = ('monobit', 'serial', 'poker', 'runs', 'autocorrelation')
CSV_COLUMNS = ('method', *TESTS, 'time_s', 'n')

# smallest lengths for which the asymptotic distributions are trusted
MONOBIT_MIN = 100
SERIAL_MIN = 21
AUTOCORRELATION_MIN = 10

# incomplete gamma evaluation
_MAX_ITER = 100_000
_EPS = 1e-15
_TINY = 1e-300

# ---------------------------------------------------------------------------- #


def as_bits(s):
    """
    Validate a bit sequence and return it as a read-only uint8 array.

    Parameters
    ----------
    s : str or array-like
        Either a string of '0' / '1' characters or a sequence of 0 / 1 values.
    """
    bits = bits_from_text(s) if isinstance(s, str) else np.array(s, np.uint8)
    if bits.ndim != 1:
        raise ParameterError(f'Bit sequence should be one dimensional, not '
                             f'shape {bits.shape}.')
    if bits.size == 0:
        raise ParameterError('Empty bit sequence.')
    if (bits > 1).any():
        raise ParameterError('Bit sequence contains values other than 0 and 1.')

    bits.flags.writeable = False
    return bits


@dataclass(frozen=True)
class TestReport:
    """
    Outcome of one test. `dof` is the chi-square degrees of freedom, or
    'normal' for the two-sided normal test. `valid` is False when the
    sequence is too short for the asymptotic law behind the p-value.
    """

    __test__ = False  # not a pytest class

    name: str
    statistic: float
    dof: object
    p_value: float
    alpha: float = ALPHA
    n: int = 0
    valid: bool = True

    @property
    def passed(self):
        return self.p_value >= self.alpha

    def __str__(self):
        flag = '' if self.valid else ' (n below asymptotic threshold)'
        return (f'{self.name}: X = {self.statistic:.4f}, dof = {self.dof}, '
                f'p = {self.p_value:.6f}, {"pass" if self.passed else "FAIL"}{flag}')


def _chi_square_report(name, statistic, dof, alpha, n, valid):
    statistic = float(statistic)
    return TestReport(name, statistic, dof, chi_square_p(statistic, dof),
                      alpha, n, valid)


# ---------------------------------------------------------------------------- #
# Distribution tails

def _gamma_prefactor(a, x):
    return math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_p_series(a, x):
    term = total = 1 / a
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            return total * _gamma_prefactor(a, x)

    raise ArithmeticError(f'Incomplete gamma series did not converge for '
                          f'a = {a}, x = {x}.')


def _gamma_q_fraction(a, x):
    # modified Lentz evaluation of the continued fraction for Q(a, x)
    b = x + 1 - a
    c = 1 / _TINY
    d = 1 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1 / d
        delta = d * c
        h *= delta
        if abs(delta - 1) < _EPS:
            return h * _gamma_prefactor(a, x)

    raise ArithmeticError(f'Incomplete gamma continued fraction did not '
                          f'converge for a = {a}, x = {x}.')


def gamma_q(a, x):
    """Regularized upper incomplete gamma function Q(a, x)."""
    if x <= 0:
        return 1.0
    if x < a + 1:
        return min(1.0, max(0.0, 1 - _gamma_p_series(a, x)))
    return min(1.0, max(0.0, _gamma_q_fraction(a, x)))


def chi_square_p(statistic, dof):
    """
    Upper tail probability of the chi-square distribution with `dof`
    degrees of freedom.
    """
    statistic = float(statistic)
    if not (math.isfinite(statistic) and math.isfinite(dof)):
        raise ValueError(f'Non-finite input: statistic = {statistic}, dof = {dof}.')
    if statistic < 0 or dof < 1:
        raise ParameterError(f'Invalid chi-square input: statistic = {statistic}, '
                             f'dof = {dof}.')
    if statistic == 0:
        return 1.0

    return gamma_q(dof / 2, statistic / 2)


def normal_two_sided_p(z):
    return math.erfc(abs(z) / math.sqrt(2))


# ---------------------------------------------------------------------------- #
# Counts

def ones_count(bits):
    return int(np.count_nonzero(bits))


def pair_counts(bits):
    """Overlapping pair counts (n00, n01, n10, n11)."""
    counts = np.bincount(2 * bits[:-1] + bits[1:], minlength=4)
    assert counts.sum() == bits.size - 1
    return tuple(map(int, counts))


def pattern_counts(bits, m):
    """Counts of each m-bit pattern over the non-overlapping blocks."""
    k = bits.size // m
    blocks = np.asarray(bits[:k * m], np.int64).reshape(k, m)
    values = blocks @ (1 << np.arange(m - 1, -1, -1, dtype=np.int64))
    counts = np.bincount(values, minlength=1 << m)
    assert counts.sum() == k
    return counts


def run_counts(bits, k=None):
    """
    Number of blocks (runs of ones) and gaps (runs of zeros) of each length
    1, ..., k. Runs longer than k are counted as length k.

    Returns
    -------
    blocks, gaps : np.ndarray
        Counts indexed by run length - 1.
    """
    starts = np.concatenate(([0], np.flatnonzero(np.diff(bits)) + 1))
    lengths = np.diff(np.concatenate((starts, [bits.size])))
    values = bits[starts]
    if k is None:
        k = int(lengths.max())

    lengths = np.minimum(lengths, k) - 1
    return (np.bincount(lengths[values == 1], minlength=k),
            np.bincount(lengths[values == 0], minlength=k))


def autocorrelation_count(bits, d):
    """A(d): number of positions where the sequence differs from its d-shift."""
    return int(np.count_nonzero(bits[:-d] ^ bits[d:]))


def expected_runs(n, i):
    return Fraction(n - i + 3, 1 << (i + 2))


def runs_buckets(n):
    """Largest run length i with at least 5 expected blocks (or gaps)."""
    k = 0
    while expected_runs(n, k + 1) >= 5:
        k += 1
    return k


def default_poker_length(n):
    """Largest pattern length m with floor(n / m) >= 5 * 2**m."""
    m = 0
    while n // (m + 1) >= 5 << (m + 1):
        m += 1
    if m == 0:
        raise ParameterError(f'Sequence of length {n} too short for the poker test.')
    return m


# ---------------------------------------------------------------------------- #
# Tests

def monobit(s, alpha=ALPHA):
    """Frequency test: X1 = (n0 - n1)**2 / n, chi-square with 1 dof."""
    bits = as_bits(s)
    n = bits.size
    n1 = ones_count(bits)
    statistic = Fraction((n - 2 * n1) ** 2, n)
    return _chi_square_report('monobit', statistic, 1, alpha, n, n >= MONOBIT_MIN)


def serial(s, alpha=ALPHA):
    """Two-bit test over overlapping pairs, chi-square with 2 dof."""
    bits = as_bits(s)
    if (n := bits.size) < 2:
        raise ParameterError('Serial test needs at least two bits.')

    n1 = ones_count(bits)
    n0 = n - n1
    pairs = pair_counts(bits)
    statistic = (Fraction(4, n - 1) * sum(c * c for c in pairs)
                 - Fraction(2, n) * (n0 * n0 + n1 * n1) + 1)
    return _chi_square_report('serial', statistic, 2, alpha, n, n >= SERIAL_MIN)


def poker(s, m=None, alpha=ALPHA, strict=True):
    """
    Poker test on non-overlapping m-bit patterns, chi-square with 2**m - 1
    dof. With `strict`, the requirement floor(n / m) >= 5 * 2**m is enforced,
    otherwise the report is only flagged.
    """
    bits = as_bits(s)
    n = bits.size
    if m is None:
        m = default_poker_length(n)

    if m < 1 or (k := n // m) < 1:
        raise ParameterError(f'Invalid poker pattern length m = {m} for n = {n}.')

    valid = k >= 5 << m
    if strict and not valid:
        raise ParameterError(f'Poker test with m = {m} needs floor(n / m) >= '
                             f'{5 << m}, got {k}.')

    counts = pattern_counts(bits, m)
    statistic = Fraction(1 << m, k) * int((counts * counts).sum()) - k
    return _chi_square_report('poker', statistic, (1 << m) - 1, alpha, n, valid)


def runs(s, alpha=ALPHA, strict=True):
    """
    Runs test comparing the numbers of blocks and gaps of each length with
    their expectations e_i = (n - i + 3) / 2**(i + 2), chi-square with
    2k - 2 dof.
    """
    bits = as_bits(s)
    n = bits.size
    if (k := runs_buckets(n)) < 1:
        raise ParameterError(f'Sequence of length {n} too short for the runs test.')

    valid = k >= 2
    if strict and not valid:
        raise ParameterError(f'Runs test needs at least two run lengths with '
                             f'five expected runs (n >= 79), got n = {n}.')

    blocks, gaps = run_counts(bits, k)
    statistic = Fraction(0)
    for i in range(1, k + 1):
        e = expected_runs(n, i)
        statistic += ((int(blocks[i - 1]) - e) ** 2 + (int(gaps[i - 1]) - e) ** 2) / e

    return _chi_square_report('runs', statistic, max(2 * k - 2, 1), alpha, n, valid)


def autocorrelation(s, d=AUTOCORRELATION_SHIFT, alpha=ALPHA):
    """
    Autocorrelation test with shift `d`:
    X5 = 2 (A(d) - (n - d) / 2) / sqrt(n - d), two-sided normal.
    """
    bits = as_bits(s)
    n = bits.size
    if not 1 <= d <= n // 2 or n - d < AUTOCORRELATION_MIN:
        raise ParameterError(f'Autocorrelation shift d = {d} invalid for n = {n}: '
                             f'need 1 <= d <= {n // 2} and n - d >= '
                             f'{AUTOCORRELATION_MIN}.')

    a = autocorrelation_count(bits, d)
    statistic = 2 * (a - (n - d) / 2) / math.sqrt(n - d)
    return TestReport('autocorrelation', statistic, 'normal',
                      normal_two_sided_p(statistic), alpha, n)


def run_battery(s, alpha=ALPHA, poker_m=None, shift=AUTOCORRELATION_SHIFT,
                strict=True):
    """Run the five tests in table order."""
    bits = as_bits(s)
    if bits.size < MIN_BATTERY_LENGTH:
        logger.warning('Battery run on {} bits; reports below {} bits carry '
                       'little weight.', bits.size, MIN_BATTERY_LENGTH)

    return [monobit(bits, alpha),
            serial(bits, alpha),
            poker(bits, poker_m, alpha, strict),
            runs(bits, alpha, strict),
            autocorrelation(bits, shift, alpha)]


# ---------------------------------------------------------------------------- #
# Key sensitivity

def hamming_ratio(a, b):
    a, b = as_bits(a), as_bits(b)
    if a.size != b.size:
        raise ParameterError(f'Sequences differ in length: {a.size} != {b.size}.')
    return np.count_nonzero(a != b) / a.size


def key_sensitivity(factory, seed_a, seed_b, n):
    """
    Variance ratio P = H / n between the n-bit outputs of two generators
    built by `factory` from the parameterizations `seed_a` and `seed_b`.
    """
    if n <= 0:
        raise ParameterError(f'Sequence length must be positive, got {n}.')
    return hamming_ratio(factory(seed_a).bits(n), factory(seed_b).bits(n))


def sensitivity_sweep(factory, seed_a, seed_b, lengths):
    """
    P for each length in `lengths`, computed on prefixes of one pair of
    streams.

    Returns
    -------
    list of (int, float)
    """
    lengths = sorted(map(int, lengths))
    if not lengths or lengths[0] <= 0:
        raise ParameterError(f'Invalid sequence lengths: {lengths}.')

    if seed_a == seed_b:
        logger.warning('Identical parameterizations: P is trivially 0.')

    n = lengths[-1]
    diff = factory(seed_a).bits(n) != factory(seed_b).bits(n)
    hits = np.cumsum(diff)
    return [(k, float(hits[k - 1] / k)) for k in lengths]


def flip_parameter_bit(params, name, bit):
    """
    Copy of the mapping `params` with bit `bit` (0 = least significant) of
    `params[name]` flipped. Bit string states are read as binary numbers.
    """
    value = params[name]
    if isinstance(value, str):
        i = len(value) - 1 - bit
        value = value[:i] + '10'[int(value[i])] + value[i + 1:]
    else:
        value ^= 1 << bit
    return {**params, name: value}


# ---------------------------------------------------------------------------- #
# Comparison harness

@dataclass(frozen=True)
class ComparisonRow:
    """Battery statistics and generation time of one generator at one length."""

    method: str
    n: int
    time_s: float
    reports: tuple

    def __post_init__(self):
        if not self.time_s > 0:
            raise ValueError(f'Generation time must be positive, got {self.time_s}.')

    @property
    def statistics(self):
        return {report.name: report.statistic for report in self.reports}

    def passed(self):
        return all(report.passed for report in self.reports)


def time_generation(factory, n, repeats=BENCH_REPEATS):
    """
    Median wall-clock time to draw `n` bits from a fresh generator, over
    `repeats` runs. Returns the time and the bits of the last run.
    """
    times = []
    for _ in range(repeats):
        generator = factory()
        start = time.perf_counter()
        bits = generator.bits(n)
        times.append(time.perf_counter() - start)
    return statistics.median(times), bits


def compare_generators(factories, lengths=BENCH_LENGTH, repeats=BENCH_REPEATS,
                       **kws):
    """
    Time each generator and run the battery on its output.

    Parameters
    ----------
    factories : dict
        Mapping of generator name to a zero-argument callable building a
        freshly seeded generator.
    lengths : int or sequence of int
        Bit count(s). One row is produced per (generator, length).
    kws
        Passed to `run_battery`.

    Returns
    -------
    list of ComparisonRow
    """
    lengths = [lengths] if isinstance(lengths, int) else list(lengths)
    rows = []
    for n in lengths:
        for name, factory in factories.items():
            elapsed, bits = time_generation(factory, n, repeats)
            logger.info('Generated {} bits with {} in {:.4f}s.', n, name, elapsed)
            rows.append(ComparisonRow(name, n, elapsed,
                                      tuple(run_battery(bits, **kws))))
    return rows


# ---------------------------------------------------------------------------- #
# Output

def format_reports(reports):
    header = f'{"test":<16}{"statistic":>14}{"dof":>8}{"p-value":>12}  result'
    lines = [header, '-' * len(header)]
    for r in reports:
        lines.append(f'{r.name:<16}{r.statistic:>14.4f}{r.dof!s:>8}'
                     f'{r.p_value:>12.6f}  {"pass" if r.passed else "FAIL"}'
                     f'{"" if r.valid else " *"}')
    return '\n'.join(lines)


def format_table(rows):
    """Aligned text table, one line per comparison row."""
    width = max([len('method'), *(len(row.method) for row in rows)])
    header = (f'{"method":<{width}}' + ''.join(f'{name:>17}' for name in TESTS)
              + f'{"time":>10}{"n":>10}')
    lines = [header, '-' * len(header)]
    for row in rows:
        stats = row.statistics
        lines.append(f'{row.method:<{width}}'
                     + ''.join(f'{stats[name]:>17.4f}' for name in TESTS)
                     + f'{row.time_s:>9.3f}s{row.n:>10}')
    return '\n'.join(lines)


def to_csv(rows):
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        stats = row.statistics
        writer.writerow((row.method, *(f'{stats[name]:.6g}' for name in TESTS),
                         f'{row.time_s:.6f}', row.n))
    return buffer.getvalue()
