"""Land-use polygon classification with two fusion strategies.

A single all-source classifier (pre-classification fusion) and per-source
classifiers merged with belief-function combination (post-classification
fusion), plus the machinery to quantify source contributions, conflicts and
class-imbalance effects.
"""

__version__ = "0.1.0"

from landfuse.geometry import Polygon, ShapeDescriptors, shape_descriptors
from landfuse.evidence import Frame, MassFunction

__all__ = [
    "Polygon",
    "ShapeDescriptors",
    "shape_descriptors",
    "Frame",
    "MassFunction",
    "__version__",
]
