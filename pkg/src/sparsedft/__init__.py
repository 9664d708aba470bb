"""Near-field beam training for extremely large arrays with a sparse DFT codebook."""
from .channel import SystemConfig, UserLocation, make_channel
from .codebooks import AngularGrid, Codebook, Codeword
from .training import (
    ThreePhaseParams,
    TrainingOutcome,
    exhaustive_train,
    optimal_interval,
    three_phase_train,
)

__all__ = [
    "AngularGrid",
    "Codebook",
    "Codeword",
    "SystemConfig",
    "ThreePhaseParams",
    "TrainingOutcome",
    "UserLocation",
    "exhaustive_train",
    "make_channel",
    "optimal_interval",
    "three_phase_train",
]
__version__ = "0.1.0"
