# std
import sys

# third-party
import numpy as np

# local
from cixorshift.plotting import watermark_figure
from cixorshift import BitMatrix, GrayImage, WatermarkKey, embed, extract, psnr

# ---------------------------------------------------------------------------- #
# ensure we don't use pyplot
sys.modules['matplotlib.pyplot'] = None

KEY = 'N=64 x0=0123456789abcdef sm=2463534242 sb=88675123'

# ---------------------------------------------------------------------------- #


def example_watermark(size=256, mark=64, key=KEY):
    # Embed a random 64x64 watermark in the three low bit planes of a smooth
    # synthetic carrier, then recover it using only the key
    yy, xx = np.mgrid[:size, :size]
    carrier = GrayImage((127.5 * (1 + np.sin(xx / 17) * np.cos(yy / 23))).astype(np.uint8))
    w = BitMatrix(np.random.default_rng(7).integers(0, 2, (mark, mark)))

    key = WatermarkKey.parse(key)
    marked = embed(carrier, w, key)
    extracted = extract(marked, key, w.shape)
    print(f'PSNR {psnr(carrier, marked):.2f} dB, watermark recovered: {extracted == w}')

    fig = watermark_figure(carrier, w, marked, extracted)
    return fig


if __name__ == '__main__':
    example_watermark().savefig('watermark.png')
