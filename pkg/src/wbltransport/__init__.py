"""Wide-band-limit transient quantum transport through a reduced density matrix."""

from .device import DeviceSpec, LeadSpec, SystemSpec, validate
from .propagate import TransientRecord, equilibrium_density, run_transient
from .steadystate import SteadyConfig, landauer_current, steady_sigma, transmission
from .units import HBAR

__all__ = [
    "DeviceSpec",
    "LeadSpec",
    "SystemSpec",
    "validate",
    "TransientRecord",
    "equilibrium_density",
    "run_transient",
    "SteadyConfig",
    "landauer_current",
    "steady_sigma",
    "transmission",
    "HBAR",
]
__version__ = "0.1.0"
