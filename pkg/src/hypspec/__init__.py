"""Numerical checks for essential spectra of submanifolds of hyperbolic space."""
