"""Coherent optical transmission simulator for the 3D-Simplex modulation format.

The package is organized as a pure-computation core (formats, sequences, tx,
channel, dsp, analysis), an experiment layer that turns declarative configs
into result tables, and a FastAPI service wrapping that layer. The command
line client in :mod:`simplexsim.cli` talks to the service, by default mounted
in-process.
"""

__version__ = "0.1.0"

from .formats import FormatDescriptor, FormatMetrics, build_format, format_metrics, osnr_gap_db
from .sequences import BitStream, de_bruijn, prbs
from .waveform import DualPolWaveform, SymbolStream

__all__ = [
    "FormatDescriptor",
    "FormatMetrics",
    "build_format",
    "format_metrics",
    "osnr_gap_db",
    "BitStream",
    "de_bruijn",
    "prbs",
    "DualPolWaveform",
    "SymbolStream",
    "__version__",
]
