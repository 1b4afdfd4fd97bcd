"""
Figures for the sensitivity experiment, the battery sweep and the
watermarking demo. Everything uses the object API of matplotlib; pyplot is
never imported, so no GUI backend is needed.
"""

# std
import itertools as itt

# third-party
import numpy as np
from matplotlib.figure import Figure

# relative
from .battery import ALPHA, TESTS


# ---------------------------------------------------------------------------- #
COLOURS = ('tab:blue', 'tab:orange', 'tab:green', 'tab:red', 'tab:purple')
MARKERS = 'o^sDv'

# ---------------------------------------------------------------------------- #


def _figure(fig, **kws):
    fig = fig or Figure(**kws)
    assert isinstance(fig, Figure)
    return fig


def sensitivity_figure(curves, fig=None):
    """
    Variance ratio P against sequence length.

    Parameters
    ----------
    curves : dict
        Mapping of label to the (length, P) pairs of `sensitivity_sweep`.
    """
    fig = _figure(fig, figsize=(7, 4))
    ax = fig.subplots()
    for (label, pairs), colour in zip(curves.items(), itt.cycle(COLOURS)):
        lengths, ratios = np.transpose(pairs)
        ax.plot(lengths, ratios, '.-', color=colour, label=label)

    ax.axhline(0.5, color='0.5', ls='--', lw=1)
    ax.set(xlabel='sequence length', ylabel='variance ratio P', ylim=(0.4, 0.6))
    ax.legend()
    ax.grid(alpha=0.3)
    return fig


def battery_figure(rows, alpha=ALPHA, fig=None):
    """
    One panel per test: the p-value of every generator across the lengths of
    a comparison sweep, with the rejection level marked.
    """
    fig = _figure(fig, figsize=(12, 6))
    axes = fig.subplots(1, len(TESTS), sharey=True)
    methods = list(dict.fromkeys(row.method for row in rows))
    for ax, test in zip(axes, TESTS):
        for method, colour, marker in zip(methods, itt.cycle(COLOURS),
                                          itt.cycle(MARKERS)):
            points = [(row.n, next(r.p_value for r in row.reports if r.name == test))
                      for row in rows if row.method == method]
            ax.plot(*zip(*points), marker=marker, color=colour, label=method)

        ax.axhline(alpha, color='k', ls=':', lw=1)
        ax.set(title=test, xlabel='n', ylim=(0, 1))

    axes[0].set_ylabel('p-value')
    axes[-1].legend(loc='upper right')
    return fig


def watermark_figure(carrier, watermark, watermarked, extracted, fig=None):
    """Carrier, watermark, watermarked image, amplified difference, extraction."""
    fig = _figure(fig, figsize=(15, 3.5))
    axes = fig.subplots(1, 5)
    difference = np.abs(watermarked.pixels.astype(int) - carrier.pixels.astype(int))
    panels = {'carrier': (carrier.pixels, 255),
              'watermark': (watermark.bits, 1),
              'watermarked': (watermarked.pixels, 255),
              'difference (x36)': (36 * difference, 255),
              'extracted': (extracted.bits, 1)}
    for ax, (title, (image, vmax)) in zip(axes, panels.items()):
        ax.imshow(image, cmap='gray', vmin=0, vmax=vmax, interpolation='nearest')
        ax.set_title(title)
        ax.set_axis_off()

    return fig
