"""Numerical routes to S_Delta: the harmonic grid solver and the reflected random walk."""
