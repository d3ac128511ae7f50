"""Benchmark for post hoc explainers against known marginal effects.

The package generates synthetic tabular datasets from structural models
with known coefficients, trains small neural classifiers on them, explains
the classifiers with from-scratch LIME and Shapley-value attribution, and
scores the explanations against the generator's true marginal effects.
"""

__version__ = "0.1.0"
