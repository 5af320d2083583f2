"""Hardware-free simulation of an autonomous robot-to-robot docking charger."""
from .errors import MobileChargerError

__version__ = "0.1.0"

__all__ = ["MobileChargerError", "__version__"]
