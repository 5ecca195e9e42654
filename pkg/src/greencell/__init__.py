"""Energy, carbon and sleep-control simulator for 4G/5G mobile networks."""
from . import _accel  # noqa: F401  (applies GREENCELL_THREADS before numpy loads BLAS)

__version__ = "0.1.0"
