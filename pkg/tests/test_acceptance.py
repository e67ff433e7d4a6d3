"""Acceptance suite: one group of checks per criterion, summarized by conftest."""
import math
import time
from fractions import Fraction

import numpy as np
import pytest
from scipy.linalg import expm

from tiltedchsh import bell, npa, qsim, sos, swap
from tiltedchsh.bell import BellFamily

CASES = bell.paper_cases()


def _fraction_grid(n=20):
    pts = []
    for k in range(n):
        a = 1 + Fraction(k, 10)
        b = Fraction(2, 1) / a * Fraction(k % 5, 5)
        pts.append(BellFamily(a, b))
    return pts


@pytest.mark.criterion(1)
def test_bounds_enumeration_and_seesaw():
    start = time.perf_counter()
    for k, fam in enumerate(_fraction_grid()):
        assert bell.classical_bound_enumerated(fam) == 2 * fam.alpha + fam.beta
        _, value = qsim.maximize_violation(fam, restarts=3, seed=k)
        a, b = float(fam.alpha), float(fam.beta)
        assert value == pytest.approx(math.sqrt((4 + b * b) * (1 + a * a)), abs=1e-8)
    assert time.perf_counter() - start < 10


@pytest.mark.criterion(2)
def test_sos_certificates():
    start = time.perf_counter()
    for beta in (Fraction(3, 2), Fraction(0)):
        fam = BellFamily(Fraction(4, 3), beta)
        for variant in ("SOS1", "SOS2"):
            assert sos.verify_certificate(sos.build_certificate(fam, variant)).is_zero()
    rng = np.random.default_rng(2)
    for _ in range(50):
        a = rng.uniform(1, 3)
        fam = BellFamily(a, rng.uniform(0, 2 / a))
        for variant in ("SOS1", "SOS2"):
            res = sos.verify_certificate(sos.build_certificate(fam, variant))
            assert res.is_zero() or res.max_abs_coefficient() < 1e-10
    assert time.perf_counter() - start < 30


@pytest.mark.criterion(3)
@pytest.mark.parametrize("case", CASES, ids=lambda c: c.name)
def test_selftest_relations(case):
    r = qsim.ideal_realization(case.theta, case.mu)
    rep = qsim.verify_selftest_relations(r, case.family)
    assert rep.z_residual < 1e-10 and rep.x_residual < 1e-10
    assert swap.swap_fidelity(r, case.theta, case.mu) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.criterion(4)
def test_symbolic_numeric_fidelity():
    rng = np.random.default_rng(4)
    for k in range(20):
        case = CASES[k % 3]
        r = qsim.random_realization(rng)
        poly = swap.fidelity_objective_symbolic(case.theta, case.mu)
        assert r.expectation(poly) == pytest.approx(swap.swap_fidelity(r, case.theta, case.mu), abs=1e-10)


@pytest.mark.criterion(5)
@pytest.mark.parametrize(
    "case,target,tol",
    [(bell.chsh_case(), 1.2283, 5e-3), (CASES[0], 1.1519, 5e-3), (CASES[1], 0.4195, 1e-2), (CASES[2], 0.5669, 1e-2)],
    ids=["chsh", "biased", "tilted", "generalized"],
)
def test_min_entropy_at_maximal_violation(case, target, tol):
    start = time.perf_counter()
    res = npa.randomness_bound(case.family, float(case.family.quantum_bound))
    elapsed = time.perf_counter() - start
    assert res.min_entropy == pytest.approx(target, abs=tol)
    # four outcome SDPs per call
    assert elapsed / 4 < 5


@pytest.mark.criterion(6)
def test_robustness_curves():
    start = time.perf_counter()
    grid = np.linspace(0, 1, 10)
    for case in CASES:
        fam = case.family
        fid = [npa.robustness_bound(fam, case.theta, case.mu, fam.violation_from_normalized(v)) for v in grid]
        assert fid[-1] >= 0.999
        assert all(b >= a - 1e-7 for a, b in zip(fid, fid[1:]))
    gen = CASES[2]
    std = bell.standard_tilted_case(gen.theta)
    f_gen = npa.robustness_bound(gen.family, gen.theta, gen.mu, gen.family.violation_from_normalized(0.95))
    f_std = npa.robustness_bound(std.family, std.theta, std.mu, std.family.violation_from_normalized(0.95))
    assert f_gen > f_std
    assert time.perf_counter() - start < 300


@pytest.mark.criterion(7)
def test_bound_curve_data():
    rows = bell.bound_curve(bell.MU_34, np.linspace(0, 1.2, 25))
    feasible = [r for r in rows if r.feasible]
    assert feasible and all(r.classical < r.quantum for r in feasible)
    for case in CASES:
        fam = case.family
        assert bell.alpha_for_mu(bell.MU_34, float(fam.beta)) == pytest.approx(float(fam.alpha), abs=1e-9)


def _perturbed(case, rng, eps=0.05):
    def herm():
        z = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        return (z + z.conj().T) / 2

    def rot(obs):
        u = expm(1j * eps * herm())
        return u @ obs @ u.conj().T

    r0 = qsim.ideal_realization(case.theta, case.mu)
    psi = r0.state + eps * (rng.normal(size=4) + 1j * rng.normal(size=4))
    psi /= np.linalg.norm(psi)
    return qsim.Realization(psi, tuple(map(rot, r0.obs_a)), tuple(map(rot, r0.obs_b)))


@pytest.mark.criterion(8)
def test_soundness_on_random_realizations():
    rng = np.random.default_rng(8)
    done = 0
    while done < 10:
        case = CASES[done % 3]
        fam = case.family
        r = _perturbed(case, rng)
        value = qsim.bell_value(r, fam)
        if value < float(fam.classical_bound):
            continue
        lower = npa.robustness_bound(fam, case.theta, case.mu, value)
        assert lower <= swap.swap_fidelity(r, case.theta, case.mu) + 1e-7
        done += 1
