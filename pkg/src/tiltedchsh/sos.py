"""Sum-of-squares certificates for the shifted operator eta*I - B[alpha, beta].

Two closed-form decompositions are provided, both over the nine products
{I, A0, A1} x {I, B0, B1}.  With

    S0 = A0(B0 - B1) + A1(B0 + B1)/alpha
    S1 = A0(B0 + B1)/alpha - A1(B0 - B1)
    S2 = A0(B0 - B1) - alpha A1(B0 + B1)
    T1 = -beta A0 + eta/(alpha^2 + 1) - A1(B0 - B1)
    T2 = -alpha eta/(alpha^2 + 1) A0 + B0 + B1
    D  = 2 (alpha^2 - 1) eta / (alpha^2 + 1)

the decompositions read

    SOS1:  (D + 2 eta) Bhat = (alpha^2 - 1)(T1^2 + T2^2) + Bhat^2 + alpha^2 (beta A1 - S0)^2
    SOS2:  (D + 2 eta) Bhat = (alpha^2 - 1)(T1^2 + T2^2) + alpha^2 P3^2 + P4^2

where Bhat = eta*I - B and P3, P4 are the last two optimality witnesses.
With Fraction parameters and a rational eta every coefficient is exact.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .bell import BellFamily, InfeasibleParameters, build_operator
from .ncpoly import A0, A1, B0, B1, I, IDENTITY, NcPolynomial, Word
from .sdp import SdpProblem, SdpError, Status, solve

NUMERIC_TOL = 1e-10


class Variant(str, enum.Enum):
    SOS1 = "SOS1"
    SOS2 = "SOS2"


@dataclass(frozen=True)
class SosCertificate:
    """shift = sum(scale * poly^dagger * poly)."""

    shift: NcPolynomial
    terms: Tuple[Tuple[object, NcPolynomial], ...]
    variant: str
    family: BellFamily

    def to_dict(self) -> dict:
        res = verify_certificate(self)
        return {
            "variant": str(getattr(self.variant, "value", self.variant)),
            "alpha": str(self.family.alpha),
            "beta": str(self.family.beta),
            "shift": self.shift.to_text(),
            "terms": [{"scale": str(s), "poly": p.to_text()} for s, p in self.terms],
            "residual_max_coefficient": res.max_abs_coefficient(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def chsh_classes(alpha) -> Tuple[NcPolynomial, NcPolynomial, NcPolynomial]:
    """The three CHSH-like combinations S0, S1, S2."""
    plus, minus = B0 + B1, B0 - B1
    s0 = A0 * minus + (A1 * plus) / alpha
    s1 = (A0 * plus) / alpha - A1 * minus
    s2 = A0 * minus - A1 * plus * alpha
    return s0, s1, s2


def shifted_operator(fam: BellFamily) -> NcPolynomial:
    return I * fam.quantum_bound - build_operator(fam)


def optimality_witnesses(fam: BellFamily) -> List[NcPolynomial]:
    """P1..P4: polynomials that annihilate any maximally violating state."""
    a, b, eta = fam.alpha, fam.beta, fam.quantum_bound
    s0, s1, s2 = chsh_classes(a)
    p1 = shifted_operator(fam)
    p2 = A1 * b - s0
    p3 = A0 * 2 - (B0 + B1) * (eta / (2 * a)) + s1 * (b / 2)
    p4 = A1 * 2 - (B0 - B1) * (eta / 2) + s2 * (b / 2)
    return [p1, p2, p3, p4]


def _shared_terms(fam: BellFamily):
    a, b, eta = fam.alpha, fam.beta, fam.quantum_bound
    t1 = -(A0 * b) + I * (eta / (a * a + 1)) - A1 * (B0 - B1)
    t2 = A0 * (-(a * eta) / (a * a + 1)) + B0 + B1
    return t1, t2


def build_certificate(fam: BellFamily, variant="SOS1") -> SosCertificate:
    variant = Variant(getattr(variant, "value", variant))
    a, eta = fam.alpha, fam.quantum_bound
    pref = 1 / (fam.delta + 2 * eta)
    w = (a * a - 1) * pref
    t1, t2 = _shared_terms(fam)
    p1, p2, p3, p4 = optimality_witnesses(fam)
    terms: List[Tuple[object, NcPolynomial]] = []
    if w != 0:
        terms += [(w, t1), (w, t2)]
    if variant is Variant.SOS1:
        terms += [(pref, p1), (a * a * pref, p2)]
    else:
        terms += [(a * a * pref, p3), (pref, p4)]
    return SosCertificate(shifted_operator(fam), tuple(terms), variant, fam)


def sum_of_squares(terms: Sequence[Tuple[object, NcPolynomial]]) -> NcPolynomial:
    total = NcPolynomial()
    for scale, p in terms:
        total = total + (p.adjoint() * p) * scale
    return total


def verify_certificate(cert: SosCertificate) -> NcPolynomial:
    """Residual shift - sum(scale P^dagger P); exactly zero for a valid exact certificate."""
    return cert.shift - sum_of_squares(cert.terms)


def certificate_holds(cert: SosCertificate, tol: float = NUMERIC_TOL) -> bool:
    res = verify_certificate(cert)
    if res.is_zero():
        return True
    return res.max_abs_coefficient() <= tol


# basis of the annihilating subspace ---------------------------------------

V_LABELS = ("I", "A0", "A1", "B0", "B1", "A0B0", "A0B1", "A1B0", "A1B1")
V_POLYS = (I, A0, A1, B0, B1, A0 * B0, A0 * B1, A1 * B0, A1 * B1)


def symmetry(p: NcPolynomial) -> NcPolynomial:
    """A1 -> -A1 together with B0 <-> B1; leaves every B[alpha, beta] invariant."""
    out = {}
    for w, c in p.items():
        sign = (-1) ** sum(1 for x in w.a if x == 1)
        nw = Word(w.a, tuple(1 - y for y in w.b))
        out[nw] = out.get(nw, 0) + sign * c
    return NcPolynomial(out)


@dataclass(frozen=True)
class SosBasis:
    """Five coefficient vectors over V spanning the polynomials that kill the ideal state."""

    r_vectors: np.ndarray  # (5, 9)
    invariant: Tuple[int, ...] = (0, 1, 2)
    odd: Tuple[int, ...] = (3, 4)

    def polynomials(self) -> List[NcPolynomial]:
        out = []
        for r in self.r_vectors:
            p = NcPolynomial()
            for c, v in zip(r, V_POLYS):
                p = p + v * float(c)
            out.append(p)
        return out


def _trig_from_family(fam: BellFamily) -> Tuple[float, float]:
    """(cos 2theta, sin 2theta) from alpha and beta; valid at alpha*beta = 2."""
    a, b = float(fam.alpha), float(fam.beta)
    s = math.sqrt(max(0.0, (4 - a * a * b * b) / (4 + b * b)))
    c = b * math.sqrt(a * a + s * s) / 2
    return c, s


def sos_basis(fam: BellFamily) -> SosBasis:
    a = float(fam.alpha)
    c, s = _trig_from_family(fam)
    k = 1 / math.sqrt(a * a + s * s)
    r = np.array(
        [
            [0, -2 * a * k, 0, 1, 1, 0, 0, 0, 0],
            [-2 * a * k, 0, 0, 0, 0, 1, 1, 0, 0],
            [-2 * k, 0, 0, c / a, c / a, 0, 0, 1, -1],
            [0, 0, -2 * k, 1, -1, 0, 0, c / a, c / a],
            [0, 0, -2 * c * k, 0, 0, 1, -1, 1 / a, 1 / a],
        ]
    )
    return SosBasis(r)


# Gram-matrix search --------------------------------------------------------

def _gram_problem(fam: BellFamily, basis: SosBasis):
    """SDP over Gram blocks (3 + 2) matching -B on every word but the identity.

    The identity coefficient of the Gram sum is the bound being minimized.
    """
    polys = basis.polynomials()
    groups = (basis.invariant, basis.odd)
    target = -build_operator(fam).map_coefficients(float)
    coeffs = {}  # word -> {(block, i, j): c}
    for k, idx in enumerate(groups):
        for i in range(len(idx)):
            for j in range(i, len(idx)):
                p, q = polys[idx[i]], polys[idx[j]]
                prod = p * q if i == j else p * q + q * p
                for w, c in prod.items():
                    if abs(c) > 1e-15:
                        coeffs.setdefault(w, {})[(k, i, j)] = float(c)
    words = set(coeffs) | set(target.words())
    words.discard(IDENTITY)
    cons = [(coeffs.get(w, {}), float(target.coefficient(w) or 0.0)) for w in sorted(words)]
    objective = coeffs.get(IDENTITY, {})
    return SdpProblem([len(g) for g in groups], objective, cons, "min"), groups, polys


@dataclass
class SearchResult:
    certificate: SosCertificate
    bound: float
    gram: List[np.ndarray]


def search_certificate(fam: BellFamily, tol: float = 1e-10) -> SearchResult:
    """Find a PSD Gram matrix over the R-basis by SDP and factor it into squares."""
    basis = sos_basis(fam)
    prob, groups, polys = _gram_problem(fam, basis)
    try:
        sol = solve(prob, tol=tol, max_iter=200)
    except SdpError as exc:
        raise InfeasibleParameters(f"no Gram matrix matches the operator: {exc}") from exc
    if sol.status == Status.INFEASIBLE:
        raise InfeasibleParameters("Gram-matrix SDP is infeasible")
    if sol.status != Status.OPTIMAL and sol.primal_residual > 1e-8:
        raise InfeasibleParameters(f"Gram-matrix SDP did not converge ({sol.status.value})")
    bound = float(sol.objective)
    terms = []
    for m, idx in zip(sol.primal, groups):
        w, v = np.linalg.eigh((m + m.T) / 2)
        for lam, vec in zip(w, v.T):
            if lam <= 0:
                continue
            p = NcPolynomial()
            for c, j in zip(vec, idx):
                p = p + polys[j] * float(c)
            terms.append((float(lam), p))
    cert = SosCertificate(I * bound - build_operator(fam).map_coefficients(float), tuple(terms), "search", fam)
    return SearchResult(cert, bound, sol.primal)
