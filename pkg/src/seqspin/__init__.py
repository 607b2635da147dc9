"""Correlations of successive spin measurements, Bell-type inequalities for
them, and a classical protocol that reproduces the spin-1/2 case."""

__version__ = "0.1.0"

from .spinmath import Direction, SpinSystem, parse_spin  # noqa: E402
from .sequential import DiagonalState, MeasurementChain, NoisyStateSpec, correlation  # noqa: E402
from .inequalities import MKSettings, bell_bi, mk_expectation, mk_mki, svetlichny  # noqa: E402

__all__ = [
    "__version__",
    "Direction",
    "SpinSystem",
    "parse_spin",
    "DiagonalState",
    "MeasurementChain",
    "NoisyStateSpec",
    "correlation",
    "MKSettings",
    "bell_bi",
    "mk_expectation",
    "mk_mki",
    "svetlichny",
]
