# local
from cixorshift import CiGenerator, bits_to_text, format_state, seed_generator

# ---------------------------------------------------------------------------- #
TABLE_M = (0, 4, 2, 2, 3)
TABLE_B = (1, 4, 2, 2, 3, 3, 4, 1, 1, 4, 3, 2, 1)

# ---------------------------------------------------------------------------- #


def example_table(x0='0100', m=TABLE_M, b=TABLE_B):
    # Replay the CI(XORshift, XORshift) generator on N = 4 cells with explicit
    # m and b streams in place of the two XORshifts. Each line shows an output
    # state and the cells flipped to reach the next one.
    gen = CiGenerator.from_streams(x0, m, b, n_cells=4)
    for x in gen.states():
        print(format_state(x, 4), x, gen.last_block)

    return gen


def example_stream(seed_m=123456789, seed_b=362436069, n=128):
    # Print the first `n` output bits of a seeded 32-cell generator
    gen = seed_generator(0, seed_m, seed_b)
    bits = gen.bits(n)
    print(bits_to_text(bits))
    return bits


if __name__ == '__main__':
    example_table()
