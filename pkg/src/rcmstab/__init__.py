"""Resolved-rate control of RCM manipulators with biased out-of-view joint readings."""

from .chain import ChainModel, lnd_chain, out_of_view_chain
from .errmodel import ErrorState
from .geom import Transform
from .stability import derive_tau

__version__ = "0.1.0"

__all__ = ["ChainModel", "ErrorState", "Transform", "derive_tau", "lnd_chain", "out_of_view_chain"]
