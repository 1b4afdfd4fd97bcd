"""
Chaotic-iterations pseudo-random generation with XORshift, the classical
five-test randomness battery, and chaotic-iterations watermarking.
"""

from .core import *
from .battery import (TestReport, ComparisonRow, compare_generators,
                      key_sensitivity, run_battery, sensitivity_sweep)
from .netpbm import BitMatrix, FormatError, GrayImage
from .watermark import (CapacityError, WatermarkKey, embed, encrypt_watermark,
                        extract, psnr)


logger.disable('cixorshift')
