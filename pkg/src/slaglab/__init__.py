"""slaglab: numerical laboratory for a degenerate special Lagrangian model.

The package builds and cross-examines one explicit construction: a convex
potential whose Hessian is everywhere rank-2, the compact level-set region K
of its Lagrangian angle, a one-sided solution glued along the free boundary
of K, and the multivalued Legendre transform whose gradient graph is the
singular minimal object under study.
"""

__version__ = "0.1.0"
