"""Numerical toolkit for a delay-controlled bi-stable piezoelectric energy
harvester driven by colored noise and a weak periodic excitation.

Modules: model (parameters and closed forms), freq (energy-dependent
frequency), averaging (stationary densities and mean power), resonance
(two-state SNR theory), mcs (Monte Carlo cross-validation), cli (run harness).
"""

__version__ = "0.1.0"

from .model import (  # noqa: F401
    EffectiveCoeffs,
    ExcitationParams,
    MotionRegime,
    NoiseParams,
    SystemParams,
)
