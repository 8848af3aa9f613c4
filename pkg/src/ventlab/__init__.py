"""Finite element laboratory for Ventcel-type eigenproblems.

Assembles Lagrange P1/P2/P3 volume and surface matrices on simplicial
meshes, solves generalized symmetric eigenproblems by shift-invert
Lanczos, and runs convergence studies against problems with known
analytic solutions.
"""

__version__ = "0.1.0"
