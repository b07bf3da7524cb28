"""Numerical core: geometry, kernels, Poisson solvers, energies and the two energy bounds."""
