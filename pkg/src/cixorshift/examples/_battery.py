# std
import sys

# local
from cixorshift import GENERATORS, make_generator
from cixorshift.plotting import sensitivity_figure
from cixorshift.battery import compare_generators, format_table, sensitivity_sweep

# ---------------------------------------------------------------------------- #
# ensure we don't use pyplot
sys.modules['matplotlib.pyplot'] = None

SEEDS = dict(seed_m=2463534242, seed_b=88675123)

# ---------------------------------------------------------------------------- #


def example_comparison(n=200_000, seeds=SEEDS):
    # Time the four generators on `n` bits each (median of 5 runs) and run the
    # five tests on their output
    factories = {name: (lambda name=name: make_generator(name, **seeds))
                 for name in GENERATORS}
    rows = compare_generators(factories, n)
    print(format_table(rows))
    return rows


def example_sensitivity(lengths=range(10_000, 200_001, 10_000), seeds=SEEDS):
    # Flip the lowest bit of the m seed and track the fraction of output bits
    # that change as the sequences grow
    flipped = {**seeds, 'seed_m': seeds['seed_m'] ^ 1}
    curves = {}
    for name in ('new-ci', 'old-ci'):
        curves[name] = sensitivity_sweep(lambda p, name=name: make_generator(name, **p),
                                         seeds, flipped, lengths)

    fig = sensitivity_figure(curves)
    return fig


if __name__ == '__main__':
    example_sensitivity().savefig('sensitivity.png')
