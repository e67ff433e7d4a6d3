"""Self-testing toolkit for the generalized tilted-CHSH family.

Modules:
    ncpoly  noncommutative polynomials in A0, A1, B0, B1
    bell    the operator family, its bounds and self-tested parameters
    qsim    finite-dimensional realizations and a see-saw maximizer
    sos     sum-of-squares certificates for the quantum bound
    swap    the swap isometry and its fidelity polynomial
    sdp     a small dense interior-point SDP solver
    npa     moment-matrix relaxations for robustness and randomness
    cli     command-line front end
"""
from .bell import BellFamily, InfeasibleParameters
from .ncpoly import NcPolynomial, Word

__all__ = ["BellFamily", "InfeasibleParameters", "NcPolynomial", "Word"]
__version__ = "0.1.0"
