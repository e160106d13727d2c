"""Half-line Dirac operator families: spectra, boundary states, topology."""
from __future__ import annotations

__version__ = "0.1.0"
