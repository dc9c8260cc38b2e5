"""Linear fractional relative risk aversion: utilities, markups, estimation.

A numerical library for the LFRRA utility family -(q u''/u') =
(alpha q + beta) / (alpha sigma q + 1), the monopolistic-competition
price equilibrium it induces (a generalization of the Lambert W
function), and a constrained least-squares estimator that classifies
firm-level data as increasing, decreasing, or constant RRA.
"""

__version__ = "0.1.0"
