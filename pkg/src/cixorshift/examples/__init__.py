from . import _generation
from . import _battery
from . import _watermark
