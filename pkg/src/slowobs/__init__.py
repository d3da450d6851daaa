"""Pure-state many-body dynamics laboratory.

Builds nonintegrable spin-chain models, coarse-grains collective
observables into macrostate projectors, propagates pure states exactly or
with Krylov stepping, and evaluates classicality, Markovianity and local
detailed balance diagnostics, plus Monte-Carlo checks of banded random
matrix scaling estimates.
"""

from slowobs.basis import SectorBasis, build_basis, flip_all
from slowobs.operators import (
    HermitianOperator,
    CoarseObservable,
    build_xxz,
    build_density_wave,
    coarse_grain,
)
from slowobs.spectral import Spectrum, diagonalize
from slowobs.propagation import PureState, PropagatorConfig, evolve

__all__ = [
    "SectorBasis",
    "build_basis",
    "flip_all",
    "HermitianOperator",
    "CoarseObservable",
    "build_xxz",
    "build_density_wave",
    "coarse_grain",
    "Spectrum",
    "diagonalize",
    "PureState",
    "PropagatorConfig",
    "evolve",
]
