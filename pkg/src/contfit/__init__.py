"""Continuous-domain reconstruction from scattered samples.

``contfit.bspline`` fits tensor-product cubic B-splines with ridge penalty,
``contfit.inr`` trains a hash-encoded neural representation with separate
encoder / MLP weight decay, and ``contfit.hyperopt`` chooses those weight
decays by grid search or bilevel Bayesian optimization.
"""

__version__ = "0.1.0"
