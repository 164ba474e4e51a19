"""Linear-growth splitting densities, delta-regularized minimization and regularity probes."""
__version__ = "0.1.0"
