"""qlab: exact decision procedures and seeded numerical experiments for
3-dimensional quadratic surfaces in R^5.

A surface here is the graph (r, s, t, Q1(r,s,t), Q2(r,s,t)) over the unit
cube, with Q1, Q2 homogeneous quadratic forms given by rational symmetric
coefficient matrices.  The package answers exact questions about such pairs
(nondegeneracy, simultaneous diagonalizability, degeneracy taxonomy, normal
forms), verifies the algebraic identities behind cylindrical decompositions
and tangent-space transversality, and measures decoupling-type ratios of
exponential sums and extension operators numerically with full seed
determinism.
"""

__version__ = "0.1.0"

from .qform import QuadraticPair, SymMatrix3  # noqa: F401
