"""Finite-dimensional realizations: states, +-1 observables, behaviors.

Also hosts the see-saw maximizer used as an independent oracle for the
quantum bound.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .bell import BellFamily, build_operator
from .ncpoly import NcPolynomial, operator_matrix

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
ID2 = np.eye(2, dtype=complex)

OUTCOMES = (1, -1)


@dataclass
class Realization:
    state: np.ndarray
    obs_a: Tuple[np.ndarray, np.ndarray]
    obs_b: Tuple[np.ndarray, np.ndarray]

    def __post_init__(self):
        self.state = np.asarray(self.state, dtype=complex).ravel()
        self.obs_a = tuple(np.asarray(m, dtype=complex) for m in self.obs_a)
        self.obs_b = tuple(np.asarray(m, dtype=complex) for m in self.obs_b)
        if self.state.shape[0] != self.dims[0] * self.dims[1]:
            raise ValueError("state dimension does not match dA*dB")

    @property
    def dims(self) -> Tuple[int, int]:
        return self.obs_a[0].shape[0], self.obs_b[0].shape[0]

    @property
    def assignment(self) -> Dict[str, np.ndarray]:
        return {"A0": self.obs_a[0], "A1": self.obs_a[1], "B0": self.obs_b[0], "B1": self.obs_b[1]}

    def validate(self, tol: float = 1e-12):
        if abs(np.linalg.norm(self.state) - 1) > tol:
            raise ValueError("state is not normalized")
        for name, m in self.assignment.items():
            if np.abs(m - m.conj().T).max() > tol:
                raise ValueError(f"observable {name} is not Hermitian")
            if np.abs(m @ m - np.eye(m.shape[0])).max() > tol:
                raise ValueError(f"observable {name} does not square to identity")
        return self

    def expectation(self, p: NcPolynomial) -> float:
        val = np.vdot(self.state, operator_matrix(p, self.assignment) @ self.state)
        return float(val.real)

    def apply(self, p: NcPolynomial) -> np.ndarray:
        return operator_matrix(p, self.assignment) @ self.state


def target_state(theta: float) -> np.ndarray:
    psi = np.zeros(4, dtype=complex)
    psi[0], psi[3] = math.cos(theta), math.sin(theta)
    return psi


def ideal_realization(theta: float, mu: float) -> Realization:
    c, s = math.cos(mu), math.sin(mu)
    return Realization(
        target_state(theta),
        (SZ, SX),
        (c * SZ + s * SX, c * SZ - s * SX),
    )


def bell_value(r: Realization, fam: BellFamily) -> float:
    return r.expectation(build_operator(fam))


@dataclass
class Behavior:
    """p[(x, y)][i][j] = p(a_i, b_j | x, y) with a_0 = b_0 = +1."""

    p: Dict[Tuple[int, int], np.ndarray]

    def prob(self, a: int, b: int, x: int, y: int) -> float:
        return float(self.p[(x, y)][OUTCOMES.index(a), OUTCOMES.index(b)])

    def correlator(self, x: int, y: int) -> float:
        t = self.p[(x, y)]
        return float(t[0, 0] - t[0, 1] - t[1, 0] + t[1, 1])

    def marginal_a(self, x: int, y: int) -> np.ndarray:
        return self.p[(x, y)].sum(axis=1)

    def marginal_b(self, x: int, y: int) -> np.ndarray:
        return self.p[(x, y)].sum(axis=0)

    def check(self, tol: float = 1e-12):
        for xy, t in self.p.items():
            if t.min() < -tol:
                raise ValueError(f"negative probability at {xy}")
            if abs(t.sum() - 1) > tol:
                raise ValueError(f"probabilities at {xy} do not sum to 1")
        for x in (0, 1):
            if np.abs(self.marginal_a(x, 0) - self.marginal_a(x, 1)).max() > tol:
                raise ValueError(f"Alice marginal for x={x} depends on y")
        for y in (0, 1):
            if np.abs(self.marginal_b(0, y) - self.marginal_b(1, y)).max() > tol:
                raise ValueError(f"Bob marginal for y={y} depends on x")
        return self

    def expectation(self, fam: BellFamily) -> float:
        """Bell value computed from the outcome table alone."""
        ma0 = self.marginal_a(0, 0) @ np.array(OUTCOMES)
        return float(
            fam.beta * ma0
            + fam.alpha * (self.correlator(0, 0) + self.correlator(0, 1))
            + self.correlator(1, 0)
            - self.correlator(1, 1)
        )

    def to_json(self) -> str:
        data = {f"{x},{y}": self.p[(x, y)].tolist() for x in (0, 1) for y in (0, 1)}
        return json.dumps({"p": data})

    @classmethod
    def from_json(cls, text: str) -> "Behavior":
        raw = json.loads(text)["p"]
        return cls({tuple(int(v) for v in k.split(",")): np.array(t, dtype=float) for k, t in raw.items()})


def _projector(obs: np.ndarray, outcome: int) -> np.ndarray:
    return (np.eye(obs.shape[0]) + outcome * obs) / 2


def behavior_of(r: Realization) -> Behavior:
    p = {}
    for x in (0, 1):
        for y in (0, 1):
            t = np.zeros((2, 2))
            for i, a in enumerate(OUTCOMES):
                for j, b in enumerate(OUTCOMES):
                    m = np.kron(_projector(r.obs_a[x], a), _projector(r.obs_b[y], b))
                    t[i, j] = np.vdot(r.state, m @ r.state).real
            p[(x, y)] = t
    return Behavior(p)


# see-saw oracle ------------------------------------------------------------

def _bell_matrix(fam: BellFamily, obs_a, obs_b) -> np.ndarray:
    return operator_matrix(
        build_operator(fam),
        {"A0": obs_a[0], "A1": obs_a[1], "B0": obs_b[0], "B1": obs_b[1]},
    )


def _hermitian_sign(g: np.ndarray) -> np.ndarray:
    """Best +-1 observable against ``g``: argmax_O tr(O g) over involutions."""
    g = (g + g.conj().T) / 2
    w, v = np.linalg.eigh(g)
    s = np.where(w >= 0, 1.0, -1.0)
    return (v * s) @ v.conj().T


def _partial_a(rho: np.ndarray, k_b: np.ndarray, da: int, db: int) -> np.ndarray:
    # G = tr_B[(I (x) K) rho], so that tr((O (x) K) rho) = tr(O G)
    r = rho.reshape(da, db, da, db)
    return np.einsum("ajbk,kj->ba", r, k_b).T


def _partial_b(rho: np.ndarray, k_a: np.ndarray, da: int, db: int) -> np.ndarray:
    r = rho.reshape(da, db, da, db)
    return np.einsum("iajb,ji->ba", r, k_a).T


def random_involution(d: int, rng: np.random.Generator, real: bool = False) -> np.ndarray:
    z = rng.normal(size=(d, d))
    if not real:
        z = z + 1j * rng.normal(size=(d, d))
    q, _ = np.linalg.qr(z)
    signs = rng.choice([1.0, -1.0], size=d)
    if abs(signs.sum()) == d and d > 1:
        signs[0] = -signs[0]
    return (q * signs) @ q.conj().T


def random_state(d: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


def random_realization(rng: np.random.Generator, dims=(2, 2)) -> Realization:
    da, db = dims
    return Realization(
        random_state(da * db, rng),
        (random_involution(da, rng), random_involution(da, rng)),
        (random_involution(db, rng), random_involution(db, rng)),
    )


def seesaw(fam: BellFamily, obs_a, obs_b, tol: float = 1e-12, max_sweeps: int = 500):
    da, db = obs_a[0].shape[0], obs_b[0].shape[0]
    a, b = float(fam.alpha), float(fam.beta)
    ia, ib = np.eye(da), np.eye(db)
    prev = -np.inf
    for _ in range(max_sweeps):
        w, v = np.linalg.eigh(_bell_matrix(fam, obs_a, obs_b))
        psi = v[:, -1]
        rho = np.outer(psi, psi.conj())
        # Alice: B = A0 (x) (b I + a(B0+B1)) + A1 (x) (B0-B1)
        k0 = b * ib + a * (obs_b[0] + obs_b[1])
        k1 = obs_b[0] - obs_b[1]
        obs_a = (_hermitian_sign(_partial_a(rho, k0, da, db)), _hermitian_sign(_partial_a(rho, k1, da, db)))
        # Bob: B = b A0 (x) I + (a A0 + A1) (x) B0 + (a A0 - A1) (x) B1
        l0 = a * obs_a[0] + obs_a[1]
        l1 = a * obs_a[0] - obs_a[1]
        obs_b = (_hermitian_sign(_partial_b(rho, l0, da, db)), _hermitian_sign(_partial_b(rho, l1, da, db)))
        value = float(np.linalg.eigvalsh(_bell_matrix(fam, obs_a, obs_b))[-1])
        if value - prev < tol:
            break
        prev = value
    w, v = np.linalg.eigh(_bell_matrix(fam, obs_a, obs_b))
    return Realization(v[:, -1], obs_a, obs_b), float(w[-1])


def maximize_violation(
    fam: BellFamily,
    dims: Tuple[int, int] = (2, 2),
    restarts: int = 20,
    seed: int = 0,
    tol: float = 1e-12,
    max_sweeps: int = 500,
) -> Tuple[Realization, float]:
    """Best Bell value found by see-saw from ``restarts`` random starts."""
    da, db = dims
    if da < 2 or db < 2:
        raise ValueError("dims must be at least (2, 2)")
    rng = np.random.default_rng(seed)
    best: Optional[Tuple[Realization, float]] = None
    for _ in range(restarts):
        oa = (random_involution(da, rng), random_involution(da, rng))
        ob = (random_involution(db, rng), random_involution(db, rng))
        r, v = seesaw(fam, oa, ob, tol=tol, max_sweeps=max_sweeps)
        if best is None or v > best[1]:
            best = (r, v)
    return best


# self-test relations -------------------------------------------------------

@dataclass
class SelfTestReport:
    bell_value: float
    quantum_bound: float
    z_residual: float
    x_residual: float
    at_maximal_violation: bool
    flags: List[str] = field(default_factory=list)


def extraction_matrices(r: Realization, mu: float):
    """Numeric Z_A, X_A, Z_B, X_B on the joint space."""
    da, db = r.dims
    ia, ib = np.eye(da), np.eye(db)
    zb = (r.obs_b[0] + r.obs_b[1]) / (2 * math.cos(mu))
    xb = (r.obs_b[0] - r.obs_b[1]) / (2 * math.sin(mu))
    return (
        np.kron(r.obs_a[0], ib),
        np.kron(r.obs_a[1], ib),
        np.kron(ia, zb),
        np.kron(ia, xb),
    )


def verify_selftest_relations(r: Realization, fam: BellFamily, tol: float = 1e-9) -> SelfTestReport:
    theta, mu = fam.theta, fam.mu
    za, xa, zb, xb = extraction_matrices(r, mu)
    one = np.eye(za.shape[0])
    psi = r.state
    z_res = float(np.linalg.norm((za - zb) @ psi))
    x_op = math.sin(theta) * xa @ (one + zb) - math.cos(theta) * xb @ (one - za)
    x_res = float(np.linalg.norm(x_op @ psi))
    value = bell_value(r, fam)
    eta = float(fam.quantum_bound)
    report = SelfTestReport(value, eta, z_res, x_res, value >= eta - tol)
    if not report.at_maximal_violation:
        report.flags.append("not at maximal violation")
    return report
