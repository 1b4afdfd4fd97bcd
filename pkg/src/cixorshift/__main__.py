# std
import sys

# relative
from .cli import main


sys.exit(main())
