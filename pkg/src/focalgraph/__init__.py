"""focalgraph: real-time depth-from-focus over a sparse edge graph.

An ordered focal stack goes in; a dense depth-index map comes out, built
from edge-filtered focus measures, a Delaunay graph of focus maxima, a
three-point Gaussian peak fit over edge traces, and barycentric
rasterization of the refined graph. A small HTTP service maps image
points to focal-length commands for hover/gaze driven focus control.
"""

__version__ = "0.1.0"
