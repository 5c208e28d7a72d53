import numpy as np
import pytest
from numpy.testing import assert_allclose

import minenergy as me
from minenergy.linalg import as_matrix


def test_expm_scalar_closed_form():
    assert_allclose(me.expm([[-1.0]], 2.0), [[np.exp(-2.0)]], rtol=1e-14)


def test_expm_rotation_closed_form():
    J = np.array([[0.0, 1.0], [-1.0, 0.0]])
    t = 0.7
    expected = np.array([[np.cos(t), np.sin(t)], [-np.sin(t), np.cos(t)]])
    assert_allclose(me.expm(J, t), expected, atol=1e-14)


def test_expm_nilpotent():
    N = np.array([[0.0, 1.0], [0.0, 0.0]])
    assert_allclose(me.expm(N, 3.0), [[1.0, 3.0], [0.0, 1.0]], atol=1e-14)


def test_pinv_penrose_identities(rng):
    for _ in range(20):
        n, m = rng.integers(1, 7, size=2)
        M = rng.standard_normal((n, m))
        if rng.random() < 0.5:  # make it rank deficient half the time
            r = int(rng.integers(0, min(n, m)))
            U, s, Vt = np.linalg.svd(M, full_matrices=False)
            s[r:] = 0.0
            M = (U * s) @ Vt
        P = me.pinv(M)
        assert_allclose(M @ P @ M, M, atol=1e-10)
        assert_allclose(P @ M @ P, P, atol=1e-10)
        assert_allclose((M @ P).T, M @ P, atol=1e-10)
        assert_allclose((P @ M).T, P @ M, atol=1e-10)


def test_pinv_rank_policy_cuts_noise_singular_values():
    M = np.diag([1.0, 1e-14])
    P = me.pinv(M)
    # the 1e-14 direction is treated as kernel, not inverted to 1e14
    assert P[1, 1] == 0.0
    assert P[0, 0] == pytest.approx(1.0)


def test_psd_sqrt_rotated_rank_one():
    th = 0.3
    R = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    M = R @ np.diag([1.0, 1e-14]) @ R.T
    S = me.psd_sqrt(M)
    # sqrt keeps the kernel: S^2 reproduces only the surviving direction
    assert_allclose(S @ S, R @ np.diag([1.0, 0.0]) @ R.T, atol=1e-10)
    assert np.linalg.matrix_rank(S, tol=1e-8) == 1


def test_symmetric_psd_rejects_asymmetry():
    with pytest.raises(me.NotSymmetricError):
        me.SymmetricPSD([[1.0, 0.5], [0.0, 1.0]])


def test_symmetric_psd_rejects_indefinite():
    with pytest.raises(me.NotPSDError):
        me.SymmetricPSD([[1.0, 0.0], [0.0, -0.5]])


def test_symmetric_psd_clips_roundoff_negatives():
    Q = me.SymmetricPSD([[1.0, 0.0], [0.0, -1e-14]])
    assert Q.eigenvalues.min() == 0.0
    assert Q.rank == 1


def test_symmetric_psd_pinv_matches_numpy_on_full_rank(rng):
    X = rng.standard_normal((4, 4))
    M = X @ X.T + 0.5 * np.eye(4)
    Q = me.SymmetricPSD(M)
    assert_allclose(Q.pinv(), np.linalg.inv(M), rtol=1e-9)


def test_commutes_detects_commutation():
    A = np.diag([-1.0, -2.0])
    assert me.commutes(A, np.diag([3.0, 4.0]))
    assert not me.commutes(A, np.array([[0.0, 1.0], [1.0, 0.0]]))


def test_commutes_iff_exponentials_commute(rng):
    for _ in range(10):
        A = rng.standard_normal((3, 3))
        K = rng.standard_normal((3, 3))
        lhs = me.expm(A) @ me.expm(K)
        rhs = me.expm(K) @ me.expm(A)
        if me.commutes(A, K, tol=1e-12):
            assert_allclose(lhs, rhs, atol=1e-10)
        else:
            assert not np.allclose(lhs, rhs, atol=1e-12)


def test_range_inclusion_identity_case():
    A1 = np.diag([1.0, 0.0])
    A2 = np.eye(2)
    rep = me.range_inclusion(A1, A2)
    assert rep.included
    assert rep.defect <= 1e-12
    # constant bounds the factorization norm: A1 = A2 C with ||C|| = 1
    assert rep.constant == pytest.approx(1.0, abs=1e-9)


def test_range_inclusion_fails_across_kernels():
    A1 = np.eye(2)
    A2 = np.diag([1.0, 0.0])
    rep = me.range_inclusion(A1, A2)
    assert not rep.included
    assert rep.defect > 0.1


def test_range_inclusion_constant_scales():
    # A1 = e1 (norm 1), A2 = 10*e1: factor C has norm 1/10
    rep = me.range_inclusion(np.diag([1.0, 0.0]), np.diag([10.0, 0.0]))
    assert rep.included
    assert rep.constant == pytest.approx(0.1, rel=1e-9)


def test_commuting_pinv_compose_matches_direct():
    # A2^+ A1 for commuting factors with range(A1) inside range(A2)
    D1 = np.diag([2.0, 1.0, 0.0])
    D2 = np.diag([4.0, 0.5, 0.0])
    out = me.commuting_pinv_compose(D1, D2)
    assert_allclose(out, np.diag([0.5, 2.0, 0.0]), atol=1e-12)


def test_commuting_pinv_compose_rejects_range_escape():
    with pytest.raises(me.PreconditionError):
        me.commuting_pinv_compose(np.eye(2), np.diag([1.0, 0.0]))


def test_negative_type_bound_scalar():
    M, omega = me.negative_type_bound([[-1.0]])
    assert omega == pytest.approx(1.0)
    assert M == pytest.approx(1.0)


def test_negative_type_bound_controls_norm(rng):
    A = me.random_stable_system(rng, 4).A
    M, omega = me.negative_type_bound(A, t_max=2.0)
    for t in np.linspace(0.0, 2.0, 17):
        assert np.linalg.norm(me.expm(A, t), 2) <= M * np.exp(-omega * t) * (1 + 1e-9)


def test_as_matrix_rejects_ragged():
    with pytest.raises((ValueError, TypeError)):
        as_matrix([[1.0, 2.0], [3.0]], "M")


def test_random_stable_system_is_stable(rng):
    for n in (1, 3, 6):
        sys = me.random_stable_system(rng, n)
        assert sys.stable
        assert np.max(np.linalg.eigvals(sys.A).real) < 0
