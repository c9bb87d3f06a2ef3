"""Velocity-jump model of collective motion on a ring and its mean-field limits.

Modules
-------
core
    Parameters, interaction kernels, periodic geometry, configs and the RNG contract.
abm
    The N-agent simulation, histograms and switching-time statistics.
meanfield
    Fokker-Planck potential, noise regimes, Kramers estimate and the exact birth-death chain.
kinetic
    Finite-difference solvers for the two-speed kinetic system and its closures.
limits
    Monte Carlo checks of the finite-N window averages against their limits.
"""
from . import abm, core, kinetic, limits, meanfield
from ._backend import BACKEND
from .core import InteractionKernel, ModelParams, SwarmState

__version__ = "0.1.0"

__all__ = ["abm", "core", "kinetic", "limits", "meanfield", "BACKEND", "InteractionKernel", "ModelParams", "SwarmState"]
