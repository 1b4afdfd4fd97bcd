"""
Command line front end.

    cixorshift gen          bit or state streams
    cixorshift test         the five-test battery on a stream
    cixorshift bench        time and test several generators
    cixorshift sensitivity  variance ratio P against sequence length
    cixorshift wm           watermark keygen / embed / extract

Exit codes: 0 success, 1 usage error, 2 data or format error.
"""

# std
import sys
import time
import argparse
import itertools as itt
from pathlib import Path
from dataclasses import dataclass, fields

# third-party
from loguru import logger

# relative
from . import battery, watermark as wm
from .netpbm import FormatError, read_pbm, read_pgm, write_pbm, write_pgm
from .core import (GENERATORS, N_CELLS, CiGenerator, DegenerateOrbitError,
                   ParameterError, StreamExhausted, ZeroStateError, as_state,
                   bits_from_text, bits_to_text, check_cells, check_seed,
                   make_generator, pack_bits, unpack_bits, xorshift_step)


# ---------------------------------------------------------------------------- #
FORMATS = ('bits-ascii', 'bits-raw', 'integers-csv')
SENSITIVITY_LENGTHS = tuple(range(10_000, 200_001, 10_000))
LOG_LEVELS = ('WARNING', 'INFO', 'DEBUG')

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

# ---------------------------------------------------------------------------- #


class UsageError(ValueError):
    """Inconsistent or invalid command line options."""


class InputError(ValueError):
    """Input data unusable for the requested operation."""


# data problems are checked first: several of them are ValueErrors too
DATA_ERRORS = (FormatError, wm.CapacityError, wm.KeyFormatError, InputError,
               DegenerateOrbitError, StreamExhausted, OSError)
USAGE_ERRORS = (UsageError, ZeroStateError, ParameterError, ValueError)


def int_list(text):
    return [int(float(value)) for value in text.split(',') if value.strip()]


def any_int(text):
    # decimal, or 0x / 0b prefixed
    return int(text, 0)


# ---------------------------------------------------------------------------- #
@dataclass
class CliConfig:
    """Options of one invocation, validated once before anything runs."""

    command: str
    generator: str = 'new-ci'
    n_cells: int = N_CELLS
    seed: str = 'time'
    x0: str = None
    length: int = None
    format: str = 'bits-ascii'
    output: str = None
    input: str = None
    alpha: float = battery.ALPHA
    poker_m: int = None
    shift: int = battery.AUTOCORRELATION_SHIFT
    inject_m: list = None
    inject_b: list = None
    generators: list = None
    lengths: list = None
    repeats: int = battery.BENCH_REPEATS
    csv: bool = False
    plot: str = None
    export: str = None
    param: str = 'seed_m'
    bit: int = 0
    wm_command: str = None
    carrier: str = None
    watermark: str = None
    key: str = None
    width: int = None
    height: int = None
    figure: str = None
    verbose: int = 0

    @classmethod
    def from_namespace(cls, namespace):
        return cls(**{f.name: getattr(namespace, f.name)
                      for f in fields(cls) if hasattr(namespace, f.name)})

    @property
    def injected(self):
        return self.inject_m is not None or self.inject_b is not None

    def validate(self):
        check_cells(self.n_cells)

        if self.injected:
            if self.inject_m is None or self.inject_b is None:
                raise UsageError('--inject-m and --inject-b must be given together.')
            if self.generator != 'new-ci':
                raise UsageError('Injected streams drive only the new-ci generator.')
            if self.x0 is None:
                raise UsageError('Injected streams need an explicit --x0.')

        for name in ('length', 'repeats'):
            if (value := getattr(self, name)) is not None and value <= 0:
                raise UsageError(f'--{name} must be positive, got {value}.')

        if self.lengths is not None and (not self.lengths or min(self.lengths) <= 0):
            raise UsageError(f'--lengths must be positive, got {self.lengths}.')

        if not 0 < self.alpha < 1:
            raise UsageError(f'--alpha must lie in (0, 1), got {self.alpha}.')

        if bad := set(self.generators or ()) - set(GENERATORS):
            raise UsageError(f'Unknown generators {sorted(bad)}. Choose from {GENERATORS}.')

        if self.seed != 'time':
            seeds = parse_seeds(self.seed)
            if len(seeds) == 2 and seeds[0] == seeds[1] and self.command != 'test':
                raise UsageError(f'The two seeds are identical ({seeds[0]}); the m and '
                                 'b streams would coincide.')

        if self.command == 'sensitivity':
            if self.param not in ('seed_m', 'seed_b', 'x0'):
                raise UsageError(f'Unknown parameter {self.param!r}.')
            if self.param != 'seed_m' and self.generator in ('xorshift', 'logistic'):
                raise UsageError(f'Generator {self.generator!r} does not use '
                                 f'{self.param}: the parameterizations would be '
                                 'identical.')

        if self.command == 'wm' and self.wm_command == 'extract':
            if not (self.width and self.height) or min(self.width, self.height) <= 0:
                raise UsageError('Extraction needs positive --width and --height.')

        return self


# ---------------------------------------------------------------------------- #
# Seeds

def parse_seeds(text):
    """'SEED' or 'SEED_M,SEED_B' as integers."""
    try:
        seeds = [any_int(value) for value in text.split(',')]
    except ValueError:
        raise UsageError(f"Invalid seed {text!r}: expected 'time', an integer, or "
                         'two integers separated by a comma.') from None

    if len(seeds) > 2:
        raise UsageError(f'At most two seeds can be given, got {len(seeds)}.')
    return seeds


def time_seeds(n_cells, clock=time.time):
    """
    Seeds from the clock: whole seconds since the Epoch seed the m stream,
    one XORshift step of that seeds the b stream, and the microsecond part
    reduced mod 2**N is the initial state.
    """
    now = clock()
    seed_m = int(now) % (1 << 32) or 1
    seed_b, _ = xorshift_step(seed_m)
    x0 = int(round((now % 1) * 1e6)) % (1 << n_cells)
    return seed_m, seed_b, x0


def resolve_seeds(config, clock=time.time, stream=None):
    """Seeds and initial state for the configured generator."""
    if config.seed == 'time':
        seed_m, seed_b, x0 = time_seeds(config.n_cells, clock)
        if config.x0 is not None:
            x0 = parse_state(config.x0, config.n_cells)
        print(f'seeds: --seed {seed_m},{seed_b} --x0 {x0}', file=stream or sys.stderr)
        return seed_m, seed_b, x0

    seeds = parse_seeds(config.seed)
    seed_m = check_seed(seeds[0])
    seed_b = check_seed(seeds[1]) if len(seeds) > 1 else xorshift_step(seed_m)[0]
    x0 = 0 if config.x0 is None else parse_state(config.x0, config.n_cells)
    return seed_m, seed_b, x0


def parse_state(text, n_cells):
    """
    Initial state from the command line: a string of exactly N binary digits
    is read cell by cell, anything else as an integer (0x / 0b prefixes
    allowed).
    """
    if len(text) == n_cells and not set(text) - set('01'):
        return as_state(text, n_cells)

    try:
        value = any_int(text)
    except ValueError:
        try:
            value = int(text)
        except ValueError:
            raise UsageError(f'Invalid initial state {text!r}.') from None

    return as_state(value, n_cells)


def build_generator(config, clock=time.time):
    if config.injected:
        return CiGenerator.from_streams(parse_state(config.x0, config.n_cells),
                                        config.inject_m, config.inject_b,
                                        config.n_cells)

    seed_m, seed_b, x0 = resolve_seeds(config, clock)
    return make_generator(config.generator, seed_m, seed_b, x0, config.n_cells)


def generator_factory(name, seeds, n_cells):
    """Zero-argument factory building freshly seeded copies of one generator."""
    seed_m, seed_b, x0 = seeds
    return lambda: make_generator(name, seed_m, seed_b, x0, n_cells)


# ---------------------------------------------------------------------------- #
# Output helpers

def _write(config, payload):
    if config.output:
        mode = 'wb' if isinstance(payload, bytes) else 'w'
        with open(config.output, mode) as fp:
            fp.write(payload)
        logger.info('Wrote {}.', config.output)
    elif isinstance(payload, bytes):
        sys.stdout.buffer.write(payload)
        sys.stdout.flush()
    else:
        sys.stdout.write(payload)


def _integers(generator, count):
    if hasattr(generator, 'states'):
        return list(generator.states(count))
    if count is None:
        raise UsageError('--length is required for this generator.')
    if generator.width == 1:
        return generator.bits(count).tolist()
    return list(itt.islice(generator._chunks(), count))


def _bits(generator, count):
    if count is not None:
        return generator.bits(count)

    # injected streams: everything the m stream allows
    states = generator.states()
    return bits_from_text(''.join(f'{x:0{generator.n_cells}b}' for x in states))


def read_bits(path, fmt):
    data = Path(path).read_bytes()
    if fmt == 'bits-raw':
        return unpack_bits(data)
    try:
        return bits_from_text(data.decode('ascii'))
    except (UnicodeDecodeError, ParameterError) as err:
        raise InputError(f'{path} is not an ASCII bit file: {err}') from None


def export_nist(path, bits):
    """ASCII '0' / '1' file, one character per bit and nothing else."""
    Path(path).write_text(bits_to_text(bits))
    logger.info('Exported {} bits to {}.', len(bits), path)


# ---------------------------------------------------------------------------- #
# Commands

def cmd_gen(config):
    generator = build_generator(config)
    if config.length is None and not config.injected:
        config.length = battery.BENCH_LENGTH

    if config.format == 'integers-csv':
        _write(config, ','.join(map(str, _integers(generator, config.length))) + '\n')
    elif config.format == 'bits-raw':
        _write(config, pack_bits(_bits(generator, config.length)))
    else:
        _write(config, bits_to_text(_bits(generator, config.length)) + '\n')


def cmd_test(config):
    if config.input:
        bits = read_bits(config.input, config.format)
        if config.length:
            bits = bits[:config.length]
    else:
        bits = _bits(build_generator(config), config.length or battery.BENCH_LENGTH)

    if (n := len(bits)) < battery.MIN_BATTERY_LENGTH:
        raise InputError(f'Input holds {n} bits; the battery needs at least '
                         f'{battery.MIN_BATTERY_LENGTH}.')

    if config.export:
        export_nist(config.export, bits)

    reports = battery.run_battery(bits, config.alpha, config.poker_m, config.shift)
    if config.csv:
        lines = ['test,statistic,dof,p_value,passed']
        lines.extend(f'{r.name},{r.statistic:.6g},{r.dof},{r.p_value:.6g},{r.passed}'
                     for r in reports)
        _write(config, '\n'.join(lines) + '\n')
    else:
        _write(config, f'{battery.format_reports(reports)}\n')


def cmd_bench(config):
    names = config.generators or list(GENERATORS)
    seeds = resolve_seeds(config)
    factories = {name: generator_factory(name, seeds, config.n_cells)
                 for name in names}
    rows = battery.compare_generators(factories,
                                      config.lengths or config.length or battery.BENCH_LENGTH,
                                      config.repeats, alpha=config.alpha,
                                      poker_m=config.poker_m, shift=config.shift)
    _write(config, battery.to_csv(rows) if config.csv
           else f'{battery.format_table(rows)}\n')

    if config.plot:
        from .plotting import battery_figure

        battery_figure(rows, config.alpha).savefig(config.plot)
        logger.info('Saved battery figure to {}.', config.plot)


def cmd_sensitivity(config):
    seed_m, seed_b, x0 = resolve_seeds(config)
    params = {'seed_m': seed_m, 'seed_b': seed_b, 'x0': x0}
    flipped = battery.flip_parameter_bit(params, config.param, config.bit)

    def factory(p):
        return make_generator(config.generator, p['seed_m'], p['seed_b'], p['x0'],
                              config.n_cells)

    lengths = config.lengths or SENSITIVITY_LENGTHS
    pairs = battery.sensitivity_sweep(factory, params, flipped, lengths)
    _write(config, 'length,P\n' + ''.join(f'{n},{p:.6f}\n' for n, p in pairs))

    if config.plot:
        from .plotting import sensitivity_figure

        label = f'{config.generator}: bit {config.bit} of {config.param}'
        sensitivity_figure({label: pairs}).savefig(config.plot)
        logger.info('Saved sensitivity figure to {}.', config.plot)


def _load_key(config):
    if config.key is None:
        raise UsageError('A watermark key is needed (--key PATH or --key "N=64 ...").')
    if (path := Path(config.key)).is_file():
        return wm.WatermarkKey.from_file(path)
    return wm.WatermarkKey.parse(config.key)


def cmd_wm(config):
    if config.wm_command == 'keygen':
        seed_m, seed_b, x0 = resolve_seeds(config)
        key = wm.WatermarkKey(x0, seed_m, seed_b, config.n_cells)
        _write(config, f'{key}\n')
        return

    key = _load_key(config)
    if config.wm_command == 'embed':
        carrier = read_pgm(config.carrier)
        mark = read_pbm(config.watermark)
        marked = wm.embed(carrier, mark, key)
        write_pgm(config.output, marked)
        logger.info('PSNR {:.2f} dB.', wm.psnr(carrier, marked))
        if config.figure:
            from .plotting import watermark_figure

            extracted = wm.extract(marked, key, mark.shape)
            watermark_figure(carrier, mark, marked, extracted).savefig(config.figure)
        return

    extracted = wm.extract(read_pgm(config.input), key, (config.height, config.width))
    write_pbm(config.output, extracted)


COMMANDS = {'gen': cmd_gen,
            'test': cmd_test,
            'bench': cmd_bench,
            'sensitivity': cmd_sensitivity,
            'wm': cmd_wm}


# ---------------------------------------------------------------------------- #
# Parser

class ArgumentParser(argparse.ArgumentParser):
    """Parser reporting usage errors with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f'{self.prog}: error: {message}\n')


def _add_generator_options(parser, generator=True):
    if generator:
        parser.add_argument('-g', '--gen', dest='generator', default='new-ci',
                            choices=GENERATORS, help='Generator to run.')
    parser.add_argument('-N', '--n', '--cells', dest='n_cells', type=int,
                        default=N_CELLS, help='Number of CI cells N.')
    parser.add_argument('-s', '--seed', default='time',
                        help="'time', SEED, or SEED_M,SEED_B (nonzero 32-bit).")
    parser.add_argument('--x0', help='Initial state: bit string, or integer '
                        '(0x prefix for hex).')


def _add_battery_options(parser):
    parser.add_argument('--alpha', type=float, default=battery.ALPHA)
    parser.add_argument('--poker-m', type=int, help='Poker pattern length.')
    parser.add_argument('-d', '--shift', type=int,
                        default=battery.AUTOCORRELATION_SHIFT,
                        help='Autocorrelation shift.')
    parser.add_argument('--csv', action='store_true', help='Emit CSV.')


def build_parser():
    parser = ArgumentParser(prog='cixorshift', description=__doc__.split('\n')[1],
                            formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument('-v', '--verbose', action='count', default=0)
    commands = parser.add_subparsers(dest='command', required=True,
                                     parser_class=ArgumentParser)

    # gen
    gen = commands.add_parser('gen', help='Generate a bit or state stream.')
    _add_generator_options(gen)
    gen.add_argument('-n', '--length', type=lambda s: int(float(s)),
                     help='Number of bits (or values for integers-csv).')
    gen.add_argument('-f', '--format', choices=FORMATS, default='bits-ascii')
    gen.add_argument('-o', '--output', help='Output file (default stdout).')
    gen.add_argument('--inject-m', type=int_list, help='Explicit m values.')
    gen.add_argument('--inject-b', type=int_list, help='Explicit 1-based cell indices.')

    # test
    test = commands.add_parser('test', help='Run the randomness battery.')
    _add_generator_options(test)
    test.add_argument('-i', '--input', help='Bit file to test instead of generating.')
    test.add_argument('-f', '--format', choices=FORMATS[:2], default='bits-ascii',
                      help='Format of the input file.')
    test.add_argument('-n', '--length', type=lambda s: int(float(s)))
    test.add_argument('-o', '--output')
    test.add_argument('--export', nargs=2, metavar=('FORMAT', 'PATH'),
                      help="'nist PATH': also write the tested bits as ASCII.")
    _add_battery_options(test)

    # bench
    bench = commands.add_parser('bench', help='Compare generators.')
    _add_generator_options(bench, generator=False)
    bench.add_argument('-G', '--gens', dest='generators',
                       type=lambda s: s.split(','), help='Comma separated generators.')
    bench.add_argument('-l', '--lengths', type=int_list,
                       help='Comma separated bit counts, eg. 1e5,2e5.')
    bench.add_argument('-r', '--repeats', type=int, default=battery.BENCH_REPEATS)
    bench.add_argument('-o', '--output')
    bench.add_argument('--plot', help='Save the p-value sweep figure.')
    _add_battery_options(bench)

    # sensitivity
    sens = commands.add_parser('sensitivity', help='Key sensitivity sweep.')
    _add_generator_options(sens)
    sens.add_argument('-p', '--param', default='seed_m',
                      choices=('seed_m', 'seed_b', 'x0'))
    sens.add_argument('-b', '--bit', type=int, default=0,
                      help='Bit to flip, 0 being the least significant.')
    sens.add_argument('-l', '--lengths', type=int_list)
    sens.add_argument('-o', '--output')
    sens.add_argument('--plot', help='Save the P against length figure.')

    # wm
    water = commands.add_parser('wm', help='Chaotic iterations watermarking.')
    actions = water.add_subparsers(dest='wm_command', required=True,
                                   parser_class=ArgumentParser)

    keygen = actions.add_parser('keygen', help='Write a watermark key.')
    _add_generator_options(keygen, generator=False)
    keygen.set_defaults(n_cells=wm.WATERMARK_CELLS)
    keygen.add_argument('-o', '--output')

    embed = actions.add_parser('embed', help='Embed a PBM watermark into a PGM.')
    embed.add_argument('-c', '--carrier', required=True)
    embed.add_argument('-w', '--watermark', required=True)
    embed.add_argument('-k', '--key', required=True, help='Key file or key line.')
    embed.add_argument('-o', '--output', required=True)
    embed.add_argument('--figure', help='Save the five panel demo figure.')

    extract = actions.add_parser('extract', help='Extract a watermark.')
    extract.add_argument('-i', '--input', required=True)
    extract.add_argument('-k', '--key', required=True)
    extract.add_argument('--width', type=int, required=True)
    extract.add_argument('--height', type=int, required=True)
    extract.add_argument('-o', '--output', required=True)
    return parser


def _parse_export(config):
    if config.export:
        kind, path = config.export
        if kind != 'nist':
            raise UsageError(f'Unknown export format {kind!r}; only nist is supported.')
        config.export = path


def setup_logging(verbose):
    logger.remove()
    logger.add(sys.stderr, level=LOG_LEVELS[min(verbose, len(LOG_LEVELS) - 1)],
               format='{level: <8} {name}:{function} - {message}')
    logger.enable('cixorshift')


def main(argv=None):
    namespace = build_parser().parse_args(argv)
    setup_logging(namespace.verbose)
    try:
        config = CliConfig.from_namespace(namespace)
        _parse_export(config)
        COMMANDS[config.validate().command](config)
    except DATA_ERRORS as err:
        logger.debug('Data error: {!r}', err)
        print(f'cixorshift: error: {err}', file=sys.stderr)
        return EXIT_DATA
    except USAGE_ERRORS as err:
        logger.debug('Usage error: {!r}', err)
        print(f'cixorshift: error: {err}', file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK
