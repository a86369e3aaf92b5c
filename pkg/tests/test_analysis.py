import numpy as np
import pytest

from coherentfb.algebra import to_quadrature
from coherentfb.analysis import (StabilityClass, SupplyRate, classify_stability, decay_bound,
                                 dissipation_feasible, hinf_norm, is_hurwitz, lqg_cost,
                                 lqg_cost_batch, lyapunov_solve, passivity_check,
                                 spectral_abscissa, strict_brl, transfer)
from coherentfb.errors import NotHurwitzError
from coherentfb.interconnect import close_loop
from coherentfb.io import load_scenario
from coherentfb.model import GeneralModel, build
import oracles


def cavity(kappa=2.0, w=1.0):
    return build(GeneralModel(w, c_minus=np.sqrt(kappa)))


def dpa(kappa=2.0, eps=1.0):
    return build(GeneralModel(0.0, 1j * eps / 2, np.sqrt(kappa)))


# --- stability -------------------------------------------------------------------------


def test_closed_oscillator_is_marginal():
    assert classify_stability(build(GeneralModel(1.3)).A) is StabilityClass.MARGINALLY_STABLE


def test_dpa_stability_classes():
    assert classify_stability(dpa(2.0, 1.0).A) is StabilityClass.EXPONENTIALLY_STABLE
    assert classify_stability(dpa(2.0, 3.0).A) is StabilityClass.UNSTABLE


def test_stabilization_classes():
    sc = load_scenario("builtin:stabilization")
    assert classify_stability(close_loop(*sc.build(km=0.0, kp=0.0)).A) is StabilityClass.UNSTABLE
    assert classify_stability(close_loop(*sc.build()).A) is StabilityClass.EXPONENTIALLY_STABLE


def test_defective_imaginary_eigenvalue_is_unstable():
    assert classify_stability(np.array([[0.0, 1.0], [0.0, 0.0]])) is StabilityClass.UNSTABLE
    assert classify_stability(np.zeros((2, 2))) is StabilityClass.MARGINALLY_STABLE
    assert classify_stability(np.zeros((0, 0))) is StabilityClass.EXPONENTIALLY_STABLE
    assert str(StabilityClass.UNSTABLE) == "Unstable"


def test_spectral_abscissa():
    assert spectral_abscissa(np.diag([-1.0, -3.0])) == pytest.approx(-1.0)
    assert is_hurwitz(np.diag([-1.0, -3.0])) and not is_hurwitz(np.diag([-1.0, 0.0]))


# --- Lyapunov --------------------------------------------------------------------------


def test_lyapunov_scalar():
    assert lyapunov_solve(np.array([[-1.0]]), np.array([[1.0]])) == pytest.approx(0.5)


def test_lyapunov_against_oracles(rng):
    for cplx in (False, True):
        A = oracles.random_stable(rng, 4, cplx)
        Bw = rng.normal(size=(4, 2)) + (1j * rng.normal(size=(4, 2)) if cplx else 0)
        W = Bw @ Bw.conj().T
        P = lyapunov_solve(A, W)
        assert np.allclose(P, oracles.lyapunov_integral(A, W), atol=1e-9)
        assert np.allclose(P, oracles.lyapunov_scipy(A, W), atol=1e-9)
        assert np.abs(P - P.conj().T).max() <= 1e-10
        assert np.linalg.eigvalsh(P).min() >= -1e-12


def test_lyapunov_requires_hurwitz():
    with pytest.raises(NotHurwitzError):
        lyapunov_solve(np.eye(2), np.eye(2))


def test_exponential_stability_implies_lyapunov(rng):
    for _ in range(5):
        A = oracles.random_stable(rng, 3, True)
        assert classify_stability(A) is StabilityClass.EXPONENTIALLY_STABLE
        lyapunov_solve(A, np.eye(3))


# --- decay certificate -----------------------------------------------------------------


def test_decay_bound_cavity():
    kappa = 2.0
    S = cavity(kappa)
    cert = decay_bound(S.A, S.B_f, np.eye(2), kappa * np.eye(2), kappa)
    assert cert.holds and cert.lam == pytest.approx(kappa) and not cert.issues


def test_decay_bound_zero_storage():
    S = cavity()
    Z = np.zeros((2, 2))
    cert = decay_bound(S.A, S.B_f, Z, Z, 1.0)
    assert cert.holds and cert.lam == 0.0


def test_decay_bound_unstable_dpa():
    S = dpa(2.0, 3.0)
    cert = decay_bound(S.A, S.B_f, np.eye(2), 0.1 * np.eye(2), 0.1)
    assert not cert.holds and cert.max_eig > 0


def test_decay_bound_reports_preconditions():
    S = cavity()
    cert = decay_bound(S.A, S.B_f, -np.eye(2), np.eye(2), -1.0)
    assert not cert.holds
    assert any("positive" in i for i in cert.issues)


# --- dissipation and passivity ----------------------------------------------------------


def test_dissipation_zero_supply_rate():
    S = cavity()
    Z2 = np.zeros((2, 2))
    res = dissipation_feasible(S.A, S.B_f, S.B_f, SupplyRate(Z2, Z2, Z2))
    assert res.feasible


def test_dissipation_passivity_rate_cavity():
    kappa = 2.0
    S = cavity(kappa)
    R = SupplyRate.passivity(kappa * np.eye(2), S.B_f.conj().T)
    res = dissipation_feasible(S.A, S.B_f, S.B_f, R)
    assert res.feasible and res.lam is not None


def test_dissipation_gain_rate_brackets_norm():
    S = dpa(2.0, 1.0)
    C, D = S.C_f, np.eye(2)
    g = hinf_norm(S.A, S.B_f, C, D)
    assert g == pytest.approx(3.0, abs=1e-6)
    assert dissipation_feasible(S.A, S.B_f, S.B_f, SupplyRate.gain(C, D, 1.02 * g)).feasible
    assert not dissipation_feasible(S.A, S.B_f, S.B_f, SupplyRate.gain(C, D, 0.98 * g)).feasible


def test_dissipation_gain_agrees_with_norm_on_random_systems(rng):
    for _ in range(4):
        A = oracles.random_stable(rng, 3)
        B, C = rng.normal(size=(3, 2)), rng.normal(size=(2, 3))
        D = np.zeros((2, 2))
        g = hinf_norm(A, B, C, D)
        assert dissipation_feasible(A, B, B, SupplyRate.gain(C, D, 1.01 * g)).feasible
        assert not dissipation_feasible(A, B, B, SupplyRate.gain(C, D, 0.99 * g)).feasible


def test_supply_rate_must_be_hermitian():
    with pytest.raises(ValueError, match="Hermitian"):
        SupplyRate(np.array([[0.0, 1.0], [0.0, 0.0]]), np.zeros((2, 1)), np.zeros((1, 1)))


def test_passivity_directly_coupled_oscillator():
    gam = 0.5
    G = GeneralModel(1.0, k_minus=gam)
    S = build(G)
    res = passivity_check(S.A, S.B_d, -gam * np.eye(2))
    assert res.passive and res.natural_applies


def test_passivity_dpa_threshold():
    for eps, want in ((1.0, True), (2.0, True), (2.5, False)):
        S = dpa(2.0, eps)
        assert passivity_check(S.A, S.B_f, S.B_f.conj().T).passive is want


def test_passivity_amplifier_threshold():
    kappa = 4.0
    for gam, want in ((1.0, True), (4.0, True), (5.0, False)):
        S = build(GeneralModel(0.0, c_minus=np.sqrt(kappa), c_plus=np.sqrt(gam)))
        assert passivity_check(S.A, S.B_f, S.B_f.conj().T).passive is want


def test_passivity_forced_storage_not_positive():
    # P B = C_p^dag fixes P, and with B = -sqrt(2) I the forced P is negative
    S = cavity()
    res = passivity_check(S.A, S.B_f, np.array([[1.0, 0.0], [0.0, 2.0]]))
    assert res.passive is False and not res.natural_applies
    assert np.linalg.eigvalsh(res.P).max() < 0


def test_passivity_family_goes_to_solver():
    # B = 0 leaves P free: any P >= 0 with PA + A^T P <= 0 works
    A = -np.eye(2)
    res = passivity_check(A, np.zeros((2, 1)), np.zeros((1, 2)))
    assert res.passive


# --- H-infinity ------------------------------------------------------------------------


def test_hinf_cavity_unit_gain():
    for kappa, w in ((1, 0), (2, 1), (5, 3)):
        S = cavity(kappa, w)
        assert hinf_norm(S.A, S.B_f, S.C_f, np.eye(2)) == pytest.approx(1.0, abs=1e-8)


def test_hinf_dpa_and_amplifier_formulas():
    S = dpa(2.0, 1.0)
    assert hinf_norm(S.A, S.B_f, S.C_f, np.eye(2)) == pytest.approx(3.0, abs=1e-8)
    S = build(GeneralModel(0.0, c_minus=2.0, c_plus=1.0))
    # z = sqrt(kappa) a + w with kappa = 4, gamma = 1
    assert hinf_norm(S.A, S.B_f, 2.0 * np.eye(2), np.eye(2)) == pytest.approx(3.0, abs=1e-8)


def test_hinf_against_grid_oracle(rng):
    for cplx in (False, True):
        A = oracles.random_stable(rng, 4, cplx)
        B, C = rng.normal(size=(4, 2)), rng.normal(size=(3, 4))
        D = rng.normal(size=(3, 2))
        assert hinf_norm(A, B, C, D) == pytest.approx(oracles.hinf_grid(A, B, C, D), rel=1e-6)


def test_hinf_special_cases():
    assert hinf_norm(np.eye(2), np.eye(2), np.eye(2)) == np.inf
    assert hinf_norm(-np.eye(2), np.zeros((2, 2)), np.zeros((2, 2)), 2 * np.eye(2)) == pytest.approx(2.0)
    assert hinf_norm(-np.eye(2), np.zeros((2, 0)), np.zeros((0, 2))) == 0.0


def test_hinf_quadrature_invariance():
    S = dpa(2.0, 1.5)
    h = hinf_norm(S.A, S.B_f, S.C_f, np.eye(2))
    hq = hinf_norm(*(to_quadrature(M) for M in (S.A, S.B_f, S.C_f, np.eye(2))))
    assert abs(h - hq) <= 1e-8 * h


def test_transfer_matches_definition():
    A, B, C, D = -np.eye(1), np.ones((1, 1)), np.ones((1, 1)), np.zeros((1, 1))
    assert transfer(A, B, C, D, 1j)[0, 0] == pytest.approx(1 / (1j + 1))


# --- bounded-real lemma ----------------------------------------------------------------


def test_strict_brl_cavity_bracket():
    S = cavity()
    above = strict_brl(S.A, S.B_f, S.C_f, np.eye(2), 1.01)
    below = strict_brl(S.A, S.B_f, S.C_f, np.eye(2), 0.99)
    assert above.holds and above.lmi_feasible and above.riccati_ok
    assert not below.holds and not below.norm_below_g


def test_strict_brl_dpa():
    S = dpa(2.0, 1.0)
    assert strict_brl(S.A, S.B_f, S.C_f, np.eye(2), 3.01).holds


def test_strict_brl_random_above_norm(rng):
    A = oracles.random_stable(rng, 3)
    B, C = rng.normal(size=(3, 2)), rng.normal(size=(2, 3))
    g = hinf_norm(A, B, C, None)
    res = strict_brl(A, B, C, None, 1.05 * g)
    assert res.lmi_feasible and res.riccati_ok
    # the stabilizing Riccati solution is the smallest certificate
    assert res.ordering >= -1e-6
    res = strict_brl(A, B, C, None, 0.95 * g)
    assert not res.lmi_feasible and not res.riccati_ok


# --- LQG -------------------------------------------------------------------------------


def test_lqg_cost_against_integral_oracle():
    sc = load_scenario("builtin:lqg_atom")
    cl = close_loop(*sc.build())
    J = lqg_cost(cl.A, cl.G, cl.C, 1.0)
    assert J == pytest.approx(oracles.lqg_cost(cl.A, cl.G, cl.C, 1.0), rel=1e-9)
    assert J == pytest.approx(4.1793, abs=5e-3)


def test_lqg_cost_unstable_is_inf():
    assert lqg_cost(np.eye(2), np.eye(2), np.eye(2)) == np.inf


def test_lqg_batch_matches_single(rng):
    As = np.array([oracles.random_stable(rng, 3, True) for _ in range(4)] + [np.eye(3)])
    G, C = rng.normal(size=(3, 2)), rng.normal(size=(2, 3))
    out = lqg_cost_batch(As, G, C, 0.5)
    for k in range(4):
        assert out[k] == pytest.approx(lqg_cost(As[k], G, C, 0.5), rel=1e-10)
    assert out[4] == pytest.approx(1e6 + 1.0)
