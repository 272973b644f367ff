"""Python interface to the nvlab finite-volume particle-system laboratory."""

from ._core import (
    BoxDomain,
    Configuration,
    PairPotentialModel,
    sym,
    check_conditions,
    mayer_integral,
    energy,
    interaction_energy,
    __version__,
)

__all__ = [
    "BoxDomain",
    "Configuration",
    "PairPotentialModel",
    "sym",
    "check_conditions",
    "mayer_integral",
    "energy",
    "interaction_energy",
    "__version__",
]
