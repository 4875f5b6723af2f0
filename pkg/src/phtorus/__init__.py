"""Numerical laboratory for center cocycles of partially hyperbolic
symplectic torus maps: Lyapunov spectra, rate audits, holonomies, localized
center twists and projective fiber measures."""

__version__ = "0.1.0"
