"""
dispcurve: pseudospectral simulation and verification of fourth-order
dispersive flows for closed curves on constant-curvature surfaces.
"""

__version__ = "0.1.0"
