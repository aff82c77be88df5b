"""homoglab: numerical laboratory for weighted-L2 elliptic homogenization.

Library layout mirrors the computable objects: geometry (polygons, meshes,
boundary layers), weights (Muckenhoupt classes), dyadic (cube trees and
maximal operators), fem (P1 systems), cell (periodic correctors and the
homogenized matrix), estimates (the measurement harness) and cli.
"""

__version__ = "0.1.0"
