"""Quenched compound-Poisson return statistics for random piecewise-linear maps."""
__version__ = "0.1.0"
