"""Spectral analysis of self-similar ultrametric Cantor sets.

Builds stationary Bratteli diagrams from substitution matrices and computes
the full pure-point spectrum of the associated Laplace-Beltrami operators,
together with measures, zeta partial sums, eigenvalue recursions, Weyl
counting, heat-trace scaling, eigenvalue-lattice strip analysis, and 1D
factor complexity.
"""

__version__ = "0.1.0"
