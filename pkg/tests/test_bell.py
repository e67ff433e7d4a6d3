import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tiltedchsh import bell
from tiltedchsh.bell import (
    BellFamily, InfeasibleParameters, ProductStateBoundary, WeakEntanglementError,
    alpha_for_mu, application_params, bound_curve, bound_curve_csv, classical_bound_enumerated,
    params_from_state, MU_34,
)


def test_chsh_bounds():
    fam = BellFamily(1, 0)
    assert fam.classical_bound == 2
    assert float(fam.quantum_bound) == pytest.approx(2 * math.sqrt(2))
    assert fam.theta == pytest.approx(math.pi / 4)
    assert fam.mu == pytest.approx(math.pi / 4)


def test_rational_quantum_bound_is_exact():
    assert BellFamily(F(4, 3), 0).quantum_bound == F(10, 3)
    assert BellFamily(F(4, 3), F(3, 2)).quantum_bound == F(25, 6)


def test_delta_value():
    assert BellFamily(F(4, 3), 0).delta == F(28, 15)


@pytest.mark.parametrize("a,b", [(0.5, 0), (1, -0.1), (2, 1.5)])
def test_infeasible_parameters(a, b):
    with pytest.raises(InfeasibleParameters):
        BellFamily(a, b)


def test_boundary_is_product_state():
    fam = BellFamily(F(4, 3), F(3, 2))
    assert fam.at_boundary
    assert fam.quantum_bound == fam.classical_bound
    with pytest.raises(ProductStateBoundary):
        fam.theta


@settings(max_examples=40)
@given(st.fractions(1, 3, max_denominator=9), st.fractions(0, 1, max_denominator=9))
def test_enumerated_classical_bound(a, t):
    fam = BellFamily(a, t * 2 / a)
    assert classical_bound_enumerated(fam) == 2 * fam.alpha + fam.beta


@settings(max_examples=40)
@given(st.floats(0.05, math.pi / 4), st.floats(0.05, math.pi / 4))
def test_params_from_state_roundtrip(theta, mu):
    try:
        fam = params_from_state(theta, mu)
    except WeakEntanglementError:
        assert math.sin(2 * theta) / math.tan(mu) < 1 + 1e-9
        return
    assert fam.theta == pytest.approx(theta, abs=1e-9)
    assert fam.mu == pytest.approx(mu, abs=1e-9)


def test_params_from_state_rejects_product():
    with pytest.raises(InfeasibleParameters):
        params_from_state(0.0, 0.5)


def test_case_parameters_match_closed_forms():
    biased, tilted, gen = bell.paper_cases()
    assert float(biased.family.quantum_bound) == pytest.approx(10 / 3)
    assert float(tilted.family.quantum_bound) == pytest.approx(16 / 5)
    assert float(gen.family.quantum_bound) == pytest.approx(28 / (5 * math.sqrt(3)))
    for case in (biased, tilted, gen):
        assert case.family.theta == pytest.approx(case.theta, abs=1e-12)
        assert case.family.mu == pytest.approx(case.mu, abs=1e-12)


def test_standard_tilted_case_is_alpha_one():
    c = bell.standard_tilted_case(math.pi / 6)
    assert c.family.alpha == 1
    assert c.family.theta == pytest.approx(math.pi / 6)
    assert math.tan(c.mu) == pytest.approx(math.sqrt(3) / 2)


def test_bound_curve_hits_cases():
    for case in bell.paper_cases():
        assert alpha_for_mu(MU_34, case.family.beta) == pytest.approx(case.family.alpha, abs=1e-12)


def test_bound_curve_csv_empty_grid():
    assert bound_curve_csv(bound_curve(MU_34, [])) == "beta,alpha,classical,quantum\n"


def test_bound_curve_drops_infeasible_rows():
    rows = bound_curve(MU_34, np.linspace(0, 1.2, 25))
    text = bound_curve_csv(rows)
    assert len(text.strip().splitlines()) - 1 == sum(r.feasible for r in rows) < 25


def test_qkd_params():
    fam = application_params(0.3, "QKD")
    assert fam.beta == 0 and fam.alpha == pytest.approx(1 / math.tan(0.6))
    with pytest.raises(InfeasibleParameters):
        application_params(0.5, "QKD")


def test_qpq_params():
    fam = application_params(math.pi / 3, "QPQ")
    assert fam.alpha == 1 and fam.beta == pytest.approx(2 / math.sqrt(7))
    fam = application_params(math.pi / 2, "QPQ")
    assert fam.beta == pytest.approx(0, abs=1e-15)


def test_qkd_at_pi_over_8_is_chsh():
    fam = application_params(math.pi / 8, "QKD")
    assert fam.alpha == pytest.approx(1) and fam.beta == 0


@pytest.mark.parametrize(
    "theta,alpha,beta",
    [
        (math.pi / 4, 4 / 3, 0.0),
        (0.5 * math.asin(0.75), 1.0, 2 * math.sqrt(7) / 5),
        (math.pi / 3, 2 / math.sqrt(3), 2 * math.sqrt(3) / 5),
    ],
)
def test_params_from_state_cases(theta, alpha, beta):
    fam = params_from_state(theta, MU_34)
    assert fam.alpha == pytest.approx(alpha, abs=1e-12)
    assert fam.beta == pytest.approx(beta, abs=1e-12)


def test_enumerated_bound_irrational_case():
    fam = bell.paper_cases()[2].family
    assert classical_bound_enumerated(fam) == pytest.approx(4 / math.sqrt(3) + 2 * math.sqrt(3) / 5)


def test_unknown_protocol():
    with pytest.raises(ValueError):
        application_params(0.3, "BB84")


def test_normalized_violation_roundtrip():
    fam = bell.paper_cases()[2].family
    for v in (0, 0.3, 1):
        assert fam.normalized_violation(fam.violation_from_normalized(v)) == pytest.approx(v)
