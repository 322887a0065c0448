"""Relaxation of a driven-dissipative qubit toward a thermal bath, with emulated hardware runs."""
from .thermal import BELEM, DEVICES, MANILA, DeviceParams, gibbs_populations, gibbs_state

__version__ = "0.1.0"

__all__ = ["BELEM", "DEVICES", "MANILA", "DeviceParams", "gibbs_populations", "gibbs_state", "__version__"]
