"""Moment-matrix relaxations for the two-input, two-output Bell scenario.

Rows and columns of the moment matrix are indexed by normal-form words
u_i; entry (i, j) is the moment <u_i^dagger u_j>.  The matrix is kept real
symmetric, so a word and its adjoint share one moment variable.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .bell import BellFamily, build_operator
from .ncpoly import A0, A1, B0, B1, I, IDENTITY, NcPolynomial, Word
from .sdp import SdpProblem, SdpSolution, Status, solve
from .swap import fidelity_objective_symbolic

log = logging.getLogger(__name__)


class SuperQuantumValue(ValueError):
    pass


class SolverFailure(RuntimeError):
    def __init__(self, message: str, solution: Optional[SdpSolution] = None):
        super().__init__(message)
        self.solution = solution


def moment_id(w: Word) -> Word:
    return min(w, w.adjoint())


def _party_words(max_len: int) -> List[Tuple[int, ...]]:
    out = [()]
    for n in range(1, max_len + 1):
        for first in (0, 1):
            out.append(tuple((first + k) % 2 for k in range(n)))
    return out


LOCAL1 = tuple(Word(a, b) for a in ((), (0,), (1,)) for b in ((), (0,), (1,)))
# products of local words of length <= 2 on each side (25 words)
LOCAL2 = tuple(Word(a, b) for a in _party_words(2) for b in _party_words(2))


@dataclass(frozen=True)
class MomentBasis:
    monomials: Tuple[Word, ...]

    def __post_init__(self):
        if not self.monomials or self.monomials[0] != IDENTITY:
            raise ValueError("the identity must be the first basis element")
        if len(set(self.monomials)) != len(self.monomials):
            raise ValueError("duplicate basis words")

    @property
    def index(self) -> Dict[Word, int]:
        return {w: i for i, w in enumerate(self.monomials)}

    def __len__(self):
        return len(self.monomials)

    def covered(self) -> set:
        return _products(self.monomials, self.monomials)

    def labels(self) -> List[str]:
        return [str(w) for w in self.monomials]


def _products(us: Iterable[Word], vs: Iterable[Word]) -> set:
    vs = list(vs)
    return {moment_id(u.adjoint() * v) for u in us for v in vs}


def _support(polys: Iterable[NcPolynomial]) -> set:
    return {moment_id(w) for p in polys for w in p.words()}


def build_basis(
    objective: Optional[NcPolynomial] = None,
    extra: Sequence[NcPolynomial] = (),
    seed: Sequence[Word] = LOCAL1,
) -> MomentBasis:
    """Local level-one basis, greedily augmented to cover ``objective`` and ``extra``.

    Without an objective (or with the zero polynomial) this is the nine
    products {I, A0, A1} x {I, B0, B1}.  Otherwise candidate words are added
    one at a time, each time taking the word that covers the most missing
    moments, ties going to the shorter and then lexicographically smaller
    word, until every monomial is some u^dagger v.
    """
    basis = list(seed)
    polys = [p for p in [objective, *extra] if p is not None]
    needed = _support(polys)
    covered = _products(basis, basis)
    missing = needed - covered
    if not missing:
        return MomentBasis(tuple(basis))
    da = max(len(w.a) for w in missing)
    db = max(len(w.b) for w in missing)
    candidates = [
        Word(a, b)
        for a in _party_words(max(1, (da + 1) // 2 + 1))
        for b in _party_words(max(1, (db + 1) // 2 + 1))
    ]
    candidates = sorted(set(candidates) - set(basis), key=lambda w: (len(w.a) + len(w.b), w))
    while missing:
        best, best_gain = None, 0
        for c in candidates:
            new = _products([c], basis + [c]) & missing
            if len(new) > best_gain:
                best, best_gain = c, len(new)
        if best is None:
            raise ValueError(f"cannot cover moments {sorted(str(w) for w in missing)}")
        basis.append(best)
        candidates.remove(best)
        missing -= _products([best], basis)
    return MomentBasis(tuple(basis))


@dataclass
class MomentMatrixStructure:
    basis: MomentBasis
    entry_class: Dict[Tuple[int, int], Word]
    known_entries: Dict[Word, float]
    classes: Dict[Word, List[Tuple[int, int]]]

    @property
    def moment_ids(self) -> List[Word]:
        return list(self.classes)


def moment_structure(basis: MomentBasis) -> MomentMatrixStructure:
    entry_class: Dict[Tuple[int, int], Word] = {}
    classes: Dict[Word, List[Tuple[int, int]]] = {}
    ws = basis.monomials
    for i in range(len(ws)):
        for j in range(i, len(ws)):
            mid = moment_id(ws[i].adjoint() * ws[j])
            entry_class[(i, j)] = mid
            classes.setdefault(mid, []).append((i, j))
    return MomentMatrixStructure(basis, entry_class, {IDENTITY: 1.0}, classes)


def functional(p: NcPolynomial, structure: MomentMatrixStructure) -> Dict[Word, float]:
    """Coefficients of <p> on the moment variables; raises on uncovered monomials."""
    out: Dict[Word, float] = {}
    for w, c in p.items():
        mid = moment_id(w)
        if mid not in structure.classes:
            raise ValueError(f"monomial {w} is not covered by the moment basis")
        out[mid] = out.get(mid, 0.0) + float(c)
    return {k: v for k, v in out.items() if v != 0.0}


def bell_value_functional(fam: BellFamily, basis: MomentBasis) -> Dict[Word, float]:
    return functional(build_operator(fam), moment_structure(basis))


def evaluate_functional(f: Dict[Word, float], moments: Dict[Word, float]) -> float:
    return float(sum(c * moments.get(w, 0.0) for w, c in f.items()))


def realization_moments(r, structure: MomentMatrixStructure) -> Dict[Word, float]:
    """Real parts of <psi|w|psi> for every moment variable."""
    from .ncpoly import operator_matrix

    out = {}
    for mid in structure.classes:
        m = operator_matrix(NcPolynomial({mid: 1}), r.assignment)
        out[mid] = float(np.vdot(r.state, m @ r.state).real)
    return out


def moment_matrix(structure: MomentMatrixStructure, moments: Dict[Word, float]) -> np.ndarray:
    n = len(structure.basis)
    g = np.zeros((n, n))
    for (i, j), mid in structure.entry_class.items():
        g[i, j] = g[j, i] = moments[mid]
    return g


def correlator_polynomial(a: int, b: int, x: int, y: int) -> NcPolynomial:
    """Projector product ((I + a A_x)/2)((I + b B_y)/2)."""
    ax = (A0, A1)[x]
    by = (B0, B1)[y]
    return (I + ax * a) * (I + by * b) / 4


@dataclass
class MomentProblem:
    structure: MomentMatrixStructure
    objective: Dict[Word, float]
    constraints: List[Tuple[Dict[Word, float], float, str]]  # (functional, rhs, "==" or ">=")
    sense: str = "min"

    def to_sdp(self) -> Tuple[SdpProblem, Dict[Word, Tuple[int, int, int]]]:
        st = self.structure
        n = len(st.basis)
        blocks = [n]
        rep: Dict[Word, Tuple[int, int, int]] = {}
        cons = []
        for mid, entries in st.classes.items():
            first = entries[0]
            rep[mid] = (0, *first)
            if mid in st.known_entries:
                for e in entries:
                    cons.append(({(0, *e): 1.0}, st.known_entries[mid]))
            else:
                for e in entries[1:]:
                    cons.append(({(0, *first): 1.0, (0, *e): -1.0}, 0.0))
        n_slack = sum(1 for _, _, kind in self.constraints if kind == ">=")
        slack_block = 1
        for f, rhs, kind in self.constraints:
            row = {}
            for mid, c in f.items():
                if mid in st.known_entries:
                    rhs -= c * st.known_entries[mid]
                else:
                    row[rep[mid]] = row.get(rep[mid], 0.0) + c
            if kind == ">=":
                blocks.append(1)
                row[(slack_block, 0, 0)] = -1.0
                slack_block += 1
            elif kind != "==":
                raise ValueError(f"unknown constraint kind {kind!r}")
            cons.append((row, rhs))
        obj = {rep[mid]: c for mid, c in self.objective.items() if mid not in st.known_entries}
        self._offset = sum(c * st.known_entries[mid] for mid, c in self.objective.items() if mid in st.known_entries)
        assert len(blocks) == 1 + n_slack
        return SdpProblem(blocks, obj, cons, self.sense), rep

    def solve(self, tol: float = 1e-8, max_iter: int = 100) -> "MomentSolution":
        sdp, rep = self.to_sdp()
        sol = solve(sdp, tol=tol, max_iter=max_iter)
        g = sol.primal[0]
        moments = {mid: float(g[i, j]) for mid, (_, i, j) in rep.items()}
        moments.update(self.structure.known_entries)
        bound = None if sol.certified_bound is None else sol.certified_bound + self._offset
        return MomentSolution(sol.objective + self._offset, sol, moments, sdp, bound)


@dataclass
class MomentSolution:
    value: float
    sdp: SdpSolution
    moments: Dict[Word, float]
    problem: SdpProblem
    dual_bound: Optional[float] = None

    @property
    def bound(self) -> float:
        """Value backed by a dual-feasible point: lower bound for min, upper for max."""
        return self.value if self.dual_bound is None else self.dual_bound

    @property
    def status(self) -> Status:
        return self.sdp.status


# tolerance for "observed value exceeds the quantum bound"
VALUE_TOL = 1e-9


def _check_observed(fam: BellFamily, observed: float):
    eta, c = float(fam.quantum_bound), float(fam.classical_bound)
    if observed > eta + VALUE_TOL:
        raise SuperQuantumValue(f"super-quantum value {observed} > {eta}")
    if observed < c - VALUE_TOL:
        raise ValueError(f"observed value {observed} is below the classical bound {c}")
    return min(observed, eta)


def _accept(sol: MomentSolution, loose: float = 1e-5):
    """Optimal, or a dual-feasible bound that a near-feasible primal iterate matched.

    At the boundary of the quantum set the dual optimum is typically not
    attained and the primal iterates lose accuracy; the dual objective of a
    feasible dual point remains a valid bound.
    """
    s = sol.sdp
    if s.status == Status.OPTIMAL:
        return
    if s.certified_bound is not None:
        d = s.certified_bound
        for rec in s.history:
            p = rec.primal_objective
            if rec.primal_infeasibility < loose and abs(p - d) / (1 + abs(p) + abs(d)) < loose:
                log.info("accepting %s solution through its dual bound %.10g", s.status.value, d)
                return
    raise SolverFailure(
        f"SDP ended with status {s.status.value} (gap {s.duality_gap:.2e}, "
        f"pinf {s.primal_residual:.2e}, dinf {s.dual_residual:.2e})",
        s,
    )


@lru_cache(maxsize=64)
def _fidelity_setup(theta: float, mu: float, alpha: float, beta: float):
    fam = BellFamily(alpha, beta)
    obj = fidelity_objective_symbolic(theta, mu)
    basis = build_basis(obj, [build_operator(fam)], seed=LOCAL2)
    return obj, basis, moment_structure(basis)


def fidelity_problem(fam: BellFamily, theta: float, mu: float, observed: float, inequality: bool = False) -> MomentProblem:
    obj, basis, st = _fidelity_setup(float(theta), float(mu), float(fam.alpha), float(fam.beta))
    bell = functional(build_operator(fam), st)
    return MomentProblem(st, functional(obj, st), [(bell, observed, ">=" if inequality else "==")], "min")


def robustness_solve(fam, theta, mu, observed, inequality=False, tol=1e-8) -> MomentSolution:
    observed = _check_observed(fam, observed)
    sol = fidelity_problem(fam, theta, mu, observed, inequality).solve(tol=tol)
    _accept(sol)
    return sol


def robustness_bound(
    fam: BellFamily, theta: float, mu: float, observed_value: float, inequality: bool = False, tol: float = 1e-8
) -> float:
    """Lower bound on the swap fidelity with cos(theta)|00> + sin(theta)|11>."""
    # rho_swap is PSD, so zero is always a valid floor
    return max(0.0, robustness_solve(fam, theta, mu, observed_value, inequality, tol).bound)


def randomness_problem(fam, observed, input_pair, outcome, basis=None, inequality=False) -> MomentProblem:
    basis = basis or build_basis()
    st = moment_structure(basis)
    bell = functional(build_operator(fam), st)
    obj = functional(correlator_polynomial(*outcome, *input_pair), st)
    return MomentProblem(st, obj, [(bell, observed, ">=" if inequality else "==")], "max")


@dataclass
class RandomnessResult:
    guess_probability: float
    min_entropy: float
    per_outcome: Dict[Tuple[int, int], float] = field(default_factory=dict)

    def __iter__(self):
        return iter((self.guess_probability, self.min_entropy))


def randomness_bound(
    fam: BellFamily,
    observed_value: float,
    input_pair: Tuple[int, int] = (0, 0),
    basis: Optional[MomentBasis] = None,
    inequality: bool = False,
    tol: float = 1e-8,
) -> RandomnessResult:
    """Max over outcomes of the largest compatible p(ab|xy), and -log2 of it."""
    observed = _check_observed(fam, observed_value)
    per = {}
    for outcome in itertools.product((1, -1), repeat=2):
        sol = randomness_problem(fam, observed, input_pair, outcome, basis, inequality).solve(tol=tol)
        _accept(sol)
        per[outcome] = min(1.0, sol.bound)
    pg = max(per.values())
    return RandomnessResult(pg, 0.0 - math.log2(pg), per)
