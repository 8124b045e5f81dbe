"""misfit: maximum-independent-set toolkit.

Fits a separating cost function over breakup scenarios by linear programming,
minimizes the resulting separable surrogate over the edge-inequality polytope
with Frank-Wolfe, and verifies candidates against an exact branch-and-bound
oracle.
"""

__version__ = "0.1.0"
