"""Unit tags accepted in dataset files and their SI scale factors.

Stored conventions: frequencies are ordinary frequencies in Hz, times in s,
temperatures in K, energies as equivalent temperatures in K, binding energies
in eV. Angular frequency is formed with ``2*pi*f`` at the point of use and
never serialized.
"""
import math

from .errors import UnitError

TWO_PI = 2.0 * math.pi

# dimension -> {tag: factor to SI}
_SCALES = {
    "frequency": {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9},
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "ns": 1e-9, "ps": 1e-12},
    "temperature": {"K": 1.0, "mK": 1e-3},
    "energy_ev": {"eV": 1.0, "meV": 1e-3},
    "power": {"dBm": 1.0},
    "dimensionless": {"1": 1.0, "": 1.0},
    "counts": {"counts": 1.0, "1": 1.0, "cps": 1.0},
}

CANONICAL = {
    "frequency": "Hz",
    "time": "s",
    "temperature": "K",
    "energy_ev": "eV",
    "power": "dBm",
    "dimensionless": "1",
    "counts": "counts",
}


def scale(tag, dimension):
    """Return the factor converting a value tagged ``tag`` to SI.

    Raises UnitError for tags that are unknown or belong to another dimension.
    """
    try:
        table = _SCALES[dimension]
    except KeyError:
        raise UnitError(f"unknown dimension {dimension!r}") from None
    if not isinstance(tag, str) or tag not in table:
        raise UnitError(f"unparseable unit tag {tag!r} for {dimension}")
    return table[tag]
