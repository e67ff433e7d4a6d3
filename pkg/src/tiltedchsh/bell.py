"""Generalized tilted-CHSH operators, their bounds and self-tested parameters.

    B[alpha, beta] = beta*A0 + alpha*(A0B0 + A0B1) + A1B0 - A1B1

with classical bound ``2*alpha + beta`` and quantum bound
``sqrt((4 + beta^2)(1 + alpha^2))``.  Maximal violation self-tests
``cos(t)|00> + sin(t)|11>`` with ``sin 2t = sqrt((4 - a^2 b^2)/(4 + b^2))``
together with the measurements at angle ``tan(mu) = sin(2t)/alpha``.
"""
from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Sequence

from .ncpoly import A0, A1, B0, B1, NcPolynomial


class InfeasibleParameters(ValueError):
    """(alpha, beta) outside alpha >= 1, beta >= 0, alpha*beta <= 2."""


class ProductStateBoundary(InfeasibleParameters):
    """alpha*beta == 2: classical and quantum bounds coincide, sin 2theta = 0."""


class WeakEntanglementError(InfeasibleParameters):
    pass


def _sqrt(x):
    """Square root that stays in Fraction when x is a rational square."""
    if isinstance(x, (int, Fraction)):
        x = Fraction(x)
        n, d = math.isqrt(x.numerator), math.isqrt(x.denominator)
        if n * n == x.numerator and d * d == x.denominator:
            return Fraction(n, d)
    return math.sqrt(x)


@dataclass(frozen=True)
class BellFamily:
    """Parameters of one generalized tilted-CHSH operator.

    ``alpha`` and ``beta`` may be floats or Fractions; with Fractions the
    bounds are returned exactly whenever they are rational.
    """

    alpha: object
    beta: object = 0

    def __post_init__(self):
        a, b = self.alpha, self.beta
        if not a >= 1:
            raise InfeasibleParameters(f"alpha must be >= 1 (got {a})")
        if not b >= 0:
            raise InfeasibleParameters(f"beta must be >= 0 (got {b})")
        if a * a * b * b > 4 and not math.isclose(float(a * b), 2.0, rel_tol=1e-12):
            raise InfeasibleParameters(f"alpha*beta must be <= 2 (got {float(a * b)})")

    @property
    def classical_bound(self):
        return 2 * self.alpha + self.beta

    @property
    def eta_squared(self):
        return (4 + self.beta**2) * (1 + self.alpha**2)

    @property
    def quantum_bound(self):
        return _sqrt(self.eta_squared)

    @property
    def at_boundary(self) -> bool:
        return math.isclose(float(self.alpha * self.beta), 2.0, rel_tol=1e-12, abs_tol=1e-15)

    @property
    def sin2theta(self) -> float:
        a, b = float(self.alpha), float(self.beta)
        if self.at_boundary:
            raise ProductStateBoundary(
                "alpha*beta = 2 gives sin(2 theta) = 0: the self-tested state would be a product state"
            )
        return math.sqrt((4 - a * a * b * b) / (4 + b * b))

    @property
    def theta(self) -> float:
        return 0.5 * math.asin(min(1.0, self.sin2theta))

    @property
    def mu(self) -> float:
        return math.atan(self.sin2theta / float(self.alpha))

    @property
    def delta(self):
        """Offset 2(alpha^2 - 1) sqrt((beta^2 + 4)/(alpha^2 + 1)) in the SOS prefactors."""
        a = self.alpha
        return 2 * (a * a - 1) * self.quantum_bound / (a * a + 1)

    def operator(self) -> NcPolynomial:
        return build_operator(self)

    def normalized_violation(self, observed: float) -> float:
        c, q = float(self.classical_bound), float(self.quantum_bound)
        return (observed - c) / (q - c)

    def violation_from_normalized(self, v: float) -> float:
        c, q = float(self.classical_bound), float(self.quantum_bound)
        return c + v * (q - c)


def build_operator(fam: BellFamily) -> NcPolynomial:
    a, b = fam.alpha, fam.beta
    return A0 * b + (A0 * B0 + A0 * B1) * a + A1 * B0 - A1 * B1


def deterministic_value(fam: BellFamily, a0, a1, b0, b1):
    """Bell expression evaluated on commuting scalars (deterministic outcomes)."""
    return fam.beta * a0 + fam.alpha * (a0 * b0 + a0 * b1) + a1 * b0 - a1 * b1


def classical_bound_enumerated(fam: BellFamily):
    """Maximum over the 16 deterministic +-1 assignments."""
    return max(deterministic_value(fam, *s) for s in itertools.product((1, -1), repeat=4))


def params_from_state(theta: float, mu: float) -> BellFamily:
    """Family whose maximal violation self-tests (theta, mu)."""
    s2 = math.sin(2 * theta)
    if not (0 < s2 <= 1 + 1e-15):
        raise InfeasibleParameters(f"theta={theta} does not give an entangled state")
    if not 0 < mu <= math.pi / 4 + 1e-15:
        raise InfeasibleParameters(f"mu must lie in (0, pi/4] (got {mu})")
    alpha = s2 / math.tan(mu)
    if alpha < 1 - 1e-12:
        raise WeakEntanglementError("state too weakly entangled for this mu")
    alpha = max(alpha, 1.0)
    c2 = abs(math.cos(2 * theta))
    beta = 2 * c2 / math.sqrt(alpha**2 + s2**2)
    return BellFamily(alpha, beta)


def application_params(theta: float, protocol: str) -> BellFamily:
    protocol = protocol.upper()
    if protocol == "QKD":
        t = math.tan(2 * theta)
        if not t > 0:
            raise InfeasibleParameters(f"QKD needs tan(2 theta) > 0 (got theta={theta})")
        if t > 1 + 1e-12:
            raise InfeasibleParameters("QKD needs tan(2 theta) <= 1 so that alpha >= 1")
        return BellFamily(max(1.0, 1 / t), 0.0)
    if protocol == "QPQ":
        beta = 2 * math.cos(theta) / math.sqrt(1 + math.sin(theta) ** 2)
        fam = BellFamily(1.0, max(beta, 0.0))
        if fam.at_boundary:
            raise ProductStateBoundary(f"theta={theta} gives beta=2, a product state")
        return fam
    raise ValueError(f"unknown protocol {protocol!r}; expected QKD or QPQ")


@dataclass(frozen=True)
class CurveRow:
    beta: float
    alpha: float
    classical: float
    quantum: float
    feasible: bool


def alpha_for_mu(mu: float, beta: float) -> float:
    """alpha with alpha*tan(mu) = sqrt((4 - alpha^2 beta^2)/(4 + beta^2))."""
    t = math.tan(mu)
    return 2 / math.sqrt(t * t * (4 + beta * beta) + beta * beta)


def bound_curve(mu: float, beta_grid: Sequence[float]) -> List[CurveRow]:
    rows = []
    for beta in beta_grid:
        alpha = alpha_for_mu(mu, beta)
        feasible = alpha >= 1 - 1e-12 and beta >= 0
        classical = 2 * alpha + beta
        quantum = math.sqrt((4 + beta**2) * (1 + alpha**2))
        rows.append(CurveRow(float(beta), alpha, classical, quantum, feasible))
    return rows


def bound_curve_csv(rows: Sequence[CurveRow], feasible_only: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["beta", "alpha", "classical", "quantum"])
    for r in rows:
        if feasible_only and not r.feasible:
            continue
        w.writerow([f"{r.beta:.12g}", f"{r.alpha:.12g}", f"{r.classical:.12g}", f"{r.quantum:.12g}"])
    return buf.getvalue()


# The three targets used for the robustness and randomness curves, all
# measured with tan(mu) = 3/4.
MU_34 = math.atan(0.75)


@dataclass(frozen=True)
class Case:
    name: str
    family: BellFamily
    theta: float
    mu: float


def paper_cases() -> List[Case]:
    return [
        Case("biased", BellFamily(4 / 3, 0.0), math.pi / 4, MU_34),
        Case("tilted", BellFamily(1.0, 2 * math.sqrt(7) / 5), 0.5 * math.asin(0.75), MU_34),
        Case("generalized", BellFamily(2 / math.sqrt(3), 2 * math.sqrt(3) / 5), math.pi / 6, MU_34),
    ]


def chsh_case() -> Case:
    return Case("chsh", BellFamily(1.0, 0.0), math.pi / 4, math.pi / 4)


def standard_tilted_case(theta: float) -> Case:
    """Standard tilted-CHSH (alpha = 1) self-test of ``theta`` with its own mu."""
    s2 = math.sin(2 * theta)
    fam = BellFamily(1.0, 2 * abs(math.cos(2 * theta)) / math.sqrt(1 + s2 * s2))
    return Case("standard-tilted", fam, theta, math.atan(s2))
