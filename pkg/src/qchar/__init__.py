"""Analysis toolkit for superconducting-qubit and resonator characterization data."""
from importlib import resources

__version__ = "0.1.0"


def bundled_path(name):
    """Path of a bundled data file (``name`` without the ``.json`` suffix)."""
    return resources.files(__name__).joinpath("data", f"{name}.json")
