"""Belief-function wrapping of Bayesian MLP weight posteriors.

Pipeline: train a variational Bayesian MLP, truncate selected Gaussian
weight posteriors, turn them into belief/mass assignments on interval
grids, fit Dirichlet distributions to the mass grids by weighted
L-moments, and run a hybrid interval network built from the sampled
weight intervals.
"""

__version__ = "0.1.0"
