"""Forest-fire simulation and percolation estimation on the half-plane
triangular lattice."""

__version__ = "0.1.0"

from .clocks import T_C
from .lattice import ConeRegion, RhombusSurface, Site, TubeRegion, Window

__all__ = ["T_C", "Window", "Site", "ConeRegion", "TubeRegion",
           "RhombusSurface", "__version__"]
