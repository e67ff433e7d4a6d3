"""Swap isometry built from the untrusted observables.

Each party attaches a |0> ancilla and applies H, controlled-Z, H,
controlled-X with

    Z_A = A0,   X_A = A1,   Z_B = (B0 + B1)/(2 cos mu),   X_B = (B0 - B1)/(2 sin mu).

The ancilla pair then carries

    Phi(psi) = sum_{i,s} K_A^i K_B^s |psi> |i s>,
    K^0 = (I + Z)/2,   K^1 = X (I - Z)/2.

Off the ideal point Z_B and X_B are not unitary; the map is applied as
written, so the ancilla trace can differ from one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .ncpoly import A0, A1, B0, B1, I, NcPolynomial
from .qsim import Realization, extraction_matrices, target_state


class ExtractionUndefined(ValueError):
    pass


def _check_mu(mu: float):
    if abs(math.sin(mu)) < 1e-12 or abs(math.cos(mu)) < 1e-12:
        raise ExtractionUndefined(f"extraction operators undefined at mu={mu}")


@dataclass(frozen=True)
class ExtractionOps:
    z_a: NcPolynomial
    x_a: NcPolynomial
    z_b: NcPolynomial
    x_b: NcPolynomial

    def kraus_a(self) -> Tuple[NcPolynomial, NcPolynomial]:
        return (I + self.z_a) / 2, self.x_a * (I - self.z_a) / 2

    def kraus_b(self) -> Tuple[NcPolynomial, NcPolynomial]:
        return (I + self.z_b) / 2, self.x_b * (I - self.z_b) / 2


def extraction_ops(mu: float) -> ExtractionOps:
    _check_mu(mu)
    return ExtractionOps(
        A0,
        A1,
        (B0 + B1) * (1 / (2 * math.cos(mu))),
        (B0 - B1) * (1 / (2 * math.sin(mu))),
    )


@dataclass
class SwapOutput:
    output_state: np.ndarray  # system (x) ancilla_A (x) ancilla_B
    reduced_ancilla: np.ndarray
    branches: np.ndarray  # branches[2*i + s] = K_A^i K_B^s |psi>

    def fidelity(self, target: np.ndarray) -> float:
        t = np.asarray(target, dtype=complex)
        return float(np.vdot(t, self.reduced_ancilla @ t).real)


def apply_isometry(r: Realization, mu: float) -> SwapOutput:
    _check_mu(mu)
    za, xa, zb, xb = extraction_matrices(r, mu)
    one = np.eye(za.shape[0])
    ka = ((one + za) / 2, xa @ (one - za) / 2)
    kb = ((one + zb) / 2, xb @ (one - zb) / 2)
    branches = np.array([ka[i] @ kb[s] @ r.state for i in (0, 1) for s in (0, 1)])
    # |Phi> = sum_k branch_k (x) |k>
    out = branches.T.reshape(-1)
    rho = branches.conj() @ branches.T
    rho = rho.T  # rho[k, l] = <branch_l | branch_k>
    return SwapOutput(out, rho, branches)


def swap_fidelity(r: Realization, theta: float, mu: float) -> float:
    return apply_isometry(r, mu).fidelity(target_state(theta))


def junk_state(r: Realization, theta: float) -> np.ndarray:
    da, db = r.dims
    za = np.kron(r.obs_a[0], np.eye(db))
    return (r.state + za @ r.state) / (2 * math.cos(theta))


def _ancilla_factor(first, second, z: NcPolynomial, x: NcPolynomial) -> NcPolynomial:
    """4 (K^first)^dagger K^second for one party."""
    left = I + z if first == 0 else x - z * x
    right = I + z if second == 0 else x - x * z
    return left * right


def fidelity_objective_symbolic(theta: float, mu: float, target=None) -> NcPolynomial:
    """Polynomial F with <psi|F|psi> = <target|rho_swap|target> for every realization.

    ``rho_swap = sum C_ijst |j><i| (x) |t><s|`` with
    ``C_ijst = <(K_A^i K_B^s)^dagger K_A^j K_B^t>``.
    """
    ops = extraction_ops(mu)
    t = target_state(theta).real if target is None else np.asarray(target, dtype=float)
    fa = {(i, j): _ancilla_factor(i, j, ops.z_a, ops.x_a) for i in (0, 1) for j in (0, 1)}
    fb = {(s, u): _ancilla_factor(s, u, ops.z_b, ops.x_b) for s in (0, 1) for u in (0, 1)}
    total = NcPolynomial()
    for i in (0, 1):
        for s in (0, 1):
            w_is = t[2 * i + s]
            if w_is == 0:
                continue
            for j in (0, 1):
                for u in (0, 1):
                    w_ju = t[2 * j + u]
                    if w_ju == 0:
                        continue
                    total = total + (fa[(i, j)] * fb[(s, u)]) * (float(w_is * w_ju) / 16)
    return total.map_coefficients(lambda c: c if abs(c) > 1e-15 else 0.0)


def max_word_degree(f: NcPolynomial) -> Tuple[int, int]:
    return f.max_degree()
