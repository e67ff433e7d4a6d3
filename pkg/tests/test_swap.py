import math

import numpy as np
import pytest

from tiltedchsh import bell
from tiltedchsh.ncpoly import IDENTITY, NcPolynomial
from tiltedchsh.qsim import Realization, ideal_realization, random_realization, target_state
from tiltedchsh.swap import (
    ExtractionUndefined, apply_isometry, fidelity_objective_symbolic, junk_state, max_word_degree,
    swap_fidelity,
)

CASES = [bell.chsh_case(), *bell.paper_cases()]


@pytest.mark.parametrize("case", CASES, ids=lambda c: c.name)
def test_ideal_output_is_target(case):
    out = apply_isometry(ideal_realization(case.theta, case.mu), case.mu)
    assert out.fidelity(target_state(case.theta)) == pytest.approx(1.0, abs=1e-10)
    assert np.trace(out.reduced_ancilla).real == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("case", CASES, ids=lambda c: c.name)
def test_junk_state_factorizes(case):
    r = ideal_realization(case.theta, case.mu)
    out = apply_isometry(r, case.mu)
    junk = junk_state(r, case.theta)
    expected = np.kron(junk, target_state(case.theta))
    assert np.abs(out.output_state - expected).max() < 1e-10


def test_undefined_extraction():
    r = ideal_realization(0.3, 0.4)
    for mu in (0.0, math.pi / 2):
        with pytest.raises(ExtractionUndefined):
            apply_isometry(r, mu)


def _noisy(v, theta, mu):
    """Purification of v|psi><psi| + (1 - v) I/4 with the ideal measurements on a local qubit pair."""
    ideal = ideal_realization(theta, mu)
    # Alice holds (qubit, purifying qubit), Bob holds (qubit, purifying qubit)
    weights = [math.sqrt(v + (1 - v) / 4)] + [math.sqrt((1 - v) / 4)] * 3
    eigvecs = [ideal.state] + _complement(ideal.state)
    total = np.zeros((2, 2, 2, 2), dtype=complex)
    for k, (w, e) in enumerate(zip(weights, eigvecs)):
        aux = np.zeros(4)
        aux[k] = 1
        total += w * np.einsum("ab,cd->acbd", e.reshape(2, 2), aux.reshape(2, 2))
    state = total.reshape(16)
    eye = np.eye(2)
    return Realization(
        state,
        tuple(np.kron(o, eye) for o in ideal.obs_a),
        tuple(np.kron(o, eye) for o in ideal.obs_b),
    )


def _complement(v):
    q, _ = np.linalg.qr(np.column_stack([v, np.eye(4)[:, :3]]))
    return [q[:, k] for k in (1, 2, 3)]


def test_white_noise_fidelity_decreases():
    theta = mu = math.pi / 4
    fids = [swap_fidelity(_noisy(v, theta, mu), theta, mu) for v in (1.0, 0.9, 0.7, 0.5)]
    assert fids[0] == pytest.approx(1.0, abs=1e-10)
    assert all(a > b for a, b in zip(fids, fids[1:]))


@pytest.mark.parametrize("case", CASES, ids=lambda c: c.name)
def test_symbolic_fidelity_is_one_at_ideal(case):
    f = fidelity_objective_symbolic(case.theta, case.mu)
    assert ideal_realization(case.theta, case.mu).expectation(f) == pytest.approx(1.0, abs=1e-10)


def test_symbolic_matches_numeric_on_random_realizations():
    rng = np.random.default_rng(11)
    for k in range(20):
        case = CASES[k % 4]
        r = random_realization(rng)
        f = fidelity_objective_symbolic(case.theta, case.mu)
        assert r.expectation(f) == pytest.approx(swap_fidelity(r, case.theta, case.mu), abs=1e-10)


def test_reduced_ancilla_is_psd():
    rng = np.random.default_rng(4)
    for _ in range(10):
        rho = apply_isometry(random_realization(rng), 0.6).reduced_ancilla
        assert np.abs(rho - rho.conj().T).max() < 1e-12
        assert np.linalg.eigvalsh(rho).min() > -1e-10


def test_trace_can_exceed_one_off_ideal():
    # Z_B and X_B are not unitary away from the ideal point
    rng = np.random.default_rng(0)
    traces = [np.trace(apply_isometry(random_realization(rng), 0.3).reduced_ancilla).real for _ in range(30)]
    assert max(traces) > 1 + 1e-6


def test_fidelity_polynomial_degree():
    f = fidelity_objective_symbolic(0.4, 0.5)
    assert max_word_degree(f) == (3, 4)
    assert max_word_degree(fidelity_objective_symbolic(math.pi / 4, 0.5)) == (3, 4)
    assert max_word_degree(NcPolynomial()) == (0, 0)


def test_identity_coefficient_golden():
    # pinned from the first verified expansion at theta = mu = pi/4
    f = fidelity_objective_symbolic(math.pi / 4, math.pi / 4)
    assert f.coefficient(IDENTITY) == pytest.approx(7 / 32, abs=1e-15)
    assert len(f) == 28
