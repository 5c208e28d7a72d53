import numpy as np
import pytest
from numpy.testing import assert_allclose

import minenergy as me

LN2_HALF = 0.5 * np.log(2.0)


def scalar_pairing_sides(t):
    """Both sides of the weighted-pairing derivative for the 1-d benchmark.

    With unit H-norm probes the derivative of <P(t)x, y>_H equals
    -2 e^{-2t} / (1 - e^{-2t})^2 on either side of the equation.
    """
    e = np.exp(-2.0 * t)
    return -2.0 * e / (1.0 - e) ** 2


def test_pv_candidate_scalar_value(scalar_sys):
    cand = me.pv_candidate(scalar_sys)
    P1 = cand.evaluate(1.0)
    # Q_inf / Q_1 = 0.5 / ((1 - e^{-2})/2)
    assert P1[0, 0] == pytest.approx(1.0 / (1.0 - np.exp(-2.0)), rel=1e-12)


def test_residual_H_scalar_identity(scalar_sys):
    cand = me.pv_candidate(scalar_sys)
    rep = me.riccati_residual_H(cand, [0.5, 1.0, 2.0])
    assert rep.passed
    assert max(rep.residuals) < rep.tol_scaled


def test_scalar_pairing_both_sides_closed_form(scalar_sys):
    # compute both sides of the weighted-pairing equation by hand for a unit
    # H-norm probe and pin them to the closed form
    cand = me.pv_candidate(scalar_sys)
    x = 1.0 / np.sqrt(2.0)  # |x|_H = sqrt(2)|x| = 1
    W = 2.0                 # metric = Q_inf^+
    for t in (0.5, 1.0, 2.0):
        h = 1e-5
        pair = lambda s: float(cand.evaluate(s)[0, 0]) * x * W * x
        lhs = (pair(t + h) - pair(t - h)) / (2 * h)
        P = float(cand.evaluate(t)[0, 0])
        A = -1.0
        rhs = -2.0 * A * P * (x * W * x) + 2.0 * A * P * P * (x * W * x)
        want = scalar_pairing_sides(t)
        assert lhs == pytest.approx(want, rel=1e-5)
        assert rhs == pytest.approx(want, rel=1e-12)


def test_commuting_consistency_field(scalar_sys):
    # in the commuting case the general and specialized right-hand sides must
    # agree on the probes; the report carries their worst disagreement
    cand = me.pv_candidate(scalar_sys)
    rep = me.riccati_residual_commuting(cand, [0.5, 1.0])
    assert np.isfinite(rep.consistency)
    assert rep.consistency < 1e-8


def test_residual_X_scalar(scalar_sys):
    cand = me.inverse_candidate(scalar_sys)
    rep = me.riccati_residual_X(cand, [0.5, 1.0, 2.0])
    assert rep.passed


def test_residual_commuting_scalar(scalar_sys):
    cand = me.pv_candidate(scalar_sys)
    rep = me.riccati_residual_commuting(cand, [0.5, 1.0, 2.0])
    assert rep.passed


def test_residuals_on_random_commuting(rng):
    # diagonal systems: all three residual forms must pass simultaneously
    for _ in range(3):
        lam = np.sort(rng.uniform(0.3, 2.5, size=3))
        b = rng.uniform(0.4, 2.0, size=3)
        sys = me.LinearSystem(np.diag(-lam), np.diag(np.sqrt(b)))
        cand = me.pv_candidate(sys)
        times = [0.4, 1.0, 2.5]
        assert me.riccati_residual_H(cand, times).passed
        assert me.riccati_residual_commuting(cand, times).passed
        assert me.riccati_residual_X(me.inverse_candidate(sys), times).passed


def test_residual_H_noncommuting(coupled_sys):
    cand = me.pv_candidate(coupled_sys)
    rep = me.riccati_residual_H(cand, [0.5, 1.0, 2.0])
    assert rep.passed


def test_perturbed_candidate_fails(scalar_sys):
    base = me.pv_candidate(scalar_sys)

    def shifted(t):
        return base.evaluate(t) + np.eye(1)

    bad = me.callable_candidate(scalar_sys, base.geometry, shifted, kind="shifted")
    rep = me.riccati_residual_H(bad, [0.5, 1.0])
    assert not rep.passed
    # failure must be decisive, not marginal
    assert max(rep.residuals) > 100 * rep.tol_scaled


def test_zero_candidate_solves_X_trivially(scalar_sys):
    geom = me.pv_candidate(scalar_sys).geometry
    zero = me.callable_candidate(scalar_sys, geom, lambda t: np.zeros((1, 1)), kind="zero")
    rep = me.riccati_residual_X(zero, [0.5, 1.0])
    assert rep.passed  # R = 0 kills every term of the inverse-form equation


def test_pv_norm_nonincreasing(rng):
    sys = me.random_stable_system(rng, 3)
    cand = me.pv_candidate(sys)
    ts = np.linspace(0.3, 3.0, 12)
    norms = [cand.h_norm_of(t) for t in ts]
    for a, b in zip(norms, norms[1:]):
        assert b <= a * (1 + 1e-9)
    assert norms[-1] >= 1.0 - 1e-9  # limit is the identity on H


def test_pv_blows_up_at_short_horizon(scalar_sys):
    cand = me.pv_candidate(scalar_sys)
    small = cand.evaluate(1e-3)
    assert small[0, 0] > 100.0  # ~ 1/(2t) growth


def test_uniqueness_reconstruction_scalar(scalar_sys):
    cand = me.pv_candidate(scalar_sys)
    rep = me.uniqueness_reconstruction(cand, 1.0, np.linspace(0.5, 3.0, 6))
    assert rep.passed
    assert rep.match_at_t0 < 1e-8  # relative mismatch of the t0 snapshot
    assert max(rep.reconstruction_errors) < 1e-6
    assert len(rep.hypotheses_checked) >= 2
    assert min(rep.smallest_singular_values) > 0.0


def test_uniqueness_rejects_scaled_family(scalar_sys):
    base = me.pv_candidate(scalar_sys)
    doubled = me.callable_candidate(
        scalar_sys, base.geometry, lambda t: 2.0 * base.evaluate(t), kind="doubled"
    )
    rep = me.uniqueness_reconstruction(doubled, 1.0, np.linspace(0.5, 2.0, 4))
    assert not rep.passed
    assert rep.match_at_t0 > 0.1  # wrong snapshot is flagged at t0 already


# --- exponential family / threshold ---


def test_detect_t1_scalar_closed_form(scalar_sys):
    t1 = me.detect_t1(scalar_sys, [[2.0]], margin=1e-6)
    # exact crossing of sigma_min = margin: log(2/(1-margin))/2
    want = np.log(2.0 / (1.0 - 1e-6)) / 2.0
    assert t1 == pytest.approx(want, abs=1e-12)
    assert t1 == pytest.approx(LN2_HALF, abs=1e-6)


def test_detect_t1_zero_for_small_K(scalar_sys):
    assert me.detect_t1(scalar_sys, [[0.3]], margin=1e-6) == 0.0


def test_detect_t1_diagonal_takes_worst_mode(diag_sys):
    K = np.diag([1.5, 0.5])
    t1 = me.detect_t1(diag_sys, K, margin=1e-6)
    # mode 1: log(1.5)/2 (lambda = 1); mode 2 is safe from t = 0
    assert t1 == pytest.approx(np.log(1.5 / (1.0 - 1e-6)) / 2.0, abs=1e-12)


def test_detect_t1_noncommuting_dip():
    # rotate K so it no longer commutes with A; the dip of the smallest
    # singular value is narrow and must still be found
    A = np.diag([-1.0, -2.0])
    th = 0.4
    R = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    K = R @ np.diag([2.0, 0.5]) @ R.T
    sys = me.LinearSystem(A, np.eye(2))
    t1 = me.detect_t1(sys, K, margin=1e-6)
    assert t1 > 0.0
    # just past t1 the family must be safely invertible
    S = np.eye(2) - me.expm(A, t1 + 1e-3) @ K @ me.expm(A, t1 + 1e-3)
    assert np.linalg.svd(S, compute_uv=False)[-1] > 1e-6


def test_commuting_family_values(scalar_sys):
    sol = me.commuting_family(scalar_sys, [[2.0]], 1.0)
    want = 1.0 / (1.0 - 2.0 * np.exp(-2.0))
    assert sol.operator[0, 0] == pytest.approx(want, rel=1e-12)
    assert sol.t1 == pytest.approx(np.log(2.0 / (1.0 - 1e-6)) / 2.0, abs=1e-12)


def test_commuting_family_identity_for_zero_K(scalar_sys):
    sol = me.commuting_family(scalar_sys, [[0.0]], 0.5)
    assert_allclose(sol.operator, np.eye(1), atol=1e-14)


def test_commuting_family_below_threshold_raises(scalar_sys):
    with pytest.raises(me.MarginError):
        me.commuting_family(scalar_sys, [[2.0]], 0.2)


def test_commuting_candidate_solves_commuting_equation(diag_sys):
    K = np.diag([0.4, 0.7])
    cand = me.commuting_candidate(diag_sys, K)
    rep = me.riccati_residual_commuting(cand, [0.5, 1.0, 2.0])
    assert rep.passed


def test_recover_L_roundtrip(scalar_sys):
    K = np.array([[0.3]])
    cand = me.commuting_candidate(scalar_sys, K)
    t_star = 1.0
    rep = me.recover_L(scalar_sys, cand, t_star)
    assert rep.passed
    # L = e^{T* A} K e^{T* A}; undo the conjugation to recover K
    E_inv = me.expm(scalar_sys.A, -t_star)
    K_back = E_inv @ rep.L @ E_inv
    assert_allclose(K_back, K, rtol=1e-9)


def test_recover_L_random_diagonal(rng):
    for _ in range(5):
        lam = np.sort(rng.uniform(0.4, 2.0, size=3))
        sys = me.LinearSystem(np.diag(-lam), np.eye(3))
        K = np.diag(rng.uniform(0.0, 2.0, size=3))
        cand = me.commuting_candidate(sys, K)
        t_star = cand.t1 + 0.5
        rep = me.recover_L(sys, cand, t_star)
        assert rep.passed
        E_inv = me.expm(sys.A, -t_star)
        assert_allclose(E_inv @ rep.L @ E_inv, K, atol=1e-8)


# --- projections ---


def test_projection_invariance_pass(diag_sys):
    K = np.diag([0.5, 0.8])
    cand = me.commuting_candidate(diag_sys, K)
    P = np.diag([1.0, 0.0])  # spectral projector: commutes with everything here
    rep = me.projected_solution_check(diag_sys, cand, P, [0.5, 1.0, 2.0])
    assert rep.range_condition_holds
    assert rep.is_solution
    assert not rep.mixed_verdict


def test_projection_biconditional_fails_coupled():
    # coupled K mixes the coordinates, so S(t) does not preserve ran(P) and
    # the compressed family must NOT solve the equation (and the check must
    # not report a contradictory verdict)
    sys = me.LinearSystem(np.diag([-1.0, -2.0]), np.diag([1.0, np.sqrt(2.0)]))
    K = np.array([[0.3, 0.2], [0.2, 0.3]])
    cand = me.commuting_candidate(sys, K)
    P = np.diag([1.0, 0.0])
    rep = me.projected_solution_check(sys, cand, P, [0.8, 1.2, 2.0])
    assert not rep.range_condition_holds
    assert not rep.is_solution
    assert not rep.mixed_verdict
    assert rep.witness_time is not None


def test_projection_rejects_non_idempotent(diag_sys):
    cand = me.commuting_candidate(diag_sys, np.diag([0.5, 0.5]))
    with pytest.raises(me.PreconditionError):
        me.projected_solution_check(diag_sys, cand, np.array([[0.5, 0.0], [0.0, 1.0]]), [1.0])


def test_residual_report_tolerance_scaling(scalar_sys):
    cand = me.pv_candidate(scalar_sys)
    rep = me.riccati_residual_H(cand, [1.0], tol=1e-6)
    # scaled tolerance tracks the magnitude of the equation's terms
    assert rep.tol_scaled >= 1e-6
    assert rep.n_probes >= 1
    assert rep.fd_step > 0
