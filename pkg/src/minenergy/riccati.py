"""Quadratic operator families and their verification.

The central family is the Gramian ratio P(t) = Q_inf Q_t^+, viewed as an
operator on the Gramian-weighted space.  In that geometry it solves a
quadratic differential equation whose linear part carries a reversed sign
relative to the classical control Riccati equation, with the inverse family
R(t) = Q_t^+ solving the analogous equation in the original inner product.
Verification is by finite differences on weak-form pairings against probe
vectors, since the equations only hold tested against smooth directions.

In the commuting selfadjoint case the same equation admits the explicit
solutions (I - e^{tA} K e^{tA})^{-1}, defined past the first time the
bracket becomes invertible; this module detects that threshold, recovers K
(in shifted form) from a single snapshot, and checks when compressions by a
projection remain solutions.
"""

from dataclasses import dataclass

import math

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import MarginError, PreconditionError, UnstableSystemError
from .gramians import GramianCache, compute_gramian
from .linalg import DEFAULT_POLICY, commutes, expm
from .energy import HGeometry, null_controllability_test

__all__ = [
    "RiccatiCandidate",
    "ResidualReport",
    "build_pv",
    "pv_candidate",
    "inverse_candidate",
    "commuting_candidate",
    "callable_candidate",
    "residual_probes",
    "riccati_residual_H",
    "riccati_residual_X",
    "riccati_residual_commuting",
    "uniqueness_reconstruction",
    "UniquenessReport",
    "detect_t1",
    "commuting_family",
    "CommutingSolution",
    "recover_L",
    "RecoverLReport",
    "projected_solution_check",
    "ProjectionReport",
    "lyapunov_residual",
    "LyapunovReport",
]

FD_STEP_FACTOR = 1e-4


class RiccatiCandidate:
    """A time-indexed operator family to be tested against the quadratic equations.

    ``fn`` maps a positive time to an (n, n) matrix acting on state
    coordinates; ``geometry`` fixes the weighted inner product the family is
    measured in.  Evaluations are memoized (residual scans hit the same
    times repeatedly through finite differencing).
    """

    def __init__(self, sys, geometry, fn, kind="custom"):
        self.sys = sys
        self.geometry = geometry
        self.kind = kind
        self._fn = fn
        self._memo = {}

    def evaluate(self, t):
        t = float(t)
        hit = self._memo.get(t)
        if hit is None:
            hit = np.asarray(self._fn(t), dtype=float)
            self._memo[t] = hit
        return hit

    def h_norm_of(self, t):
        """Operator norm of the family member in the weighted geometry."""
        g = self.geometry
        return float(np.linalg.norm(g.pinv_sqrt @ self.evaluate(t) @ g.sqrt_matrix, 2))

    def validate(self, times, rng=None):
        """Max weighted-symmetry defect and min weighted quadratic form over times."""
        rng = np.random.default_rng(0) if rng is None else rng
        worst_sym = 0.0
        min_form = np.inf
        for t in np.atleast_1d(times):
            M = self.evaluate(t)
            worst_sym = max(worst_sym, self.geometry.symmetry_defect(M, rng))
            U = self.geometry.gram.Q.range_basis()
            for _ in range(8):
                x = self.geometry.normalize(U @ rng.standard_normal(U.shape[1]))
                min_form = min(min_form, self.geometry.inner(M @ x, x))
        return worst_sym, min_form


def _default_geometry(sys, policy):
    return HGeometry(compute_gramian(sys, np.inf, policy=policy), policy)


def build_pv(sys, t, policy=DEFAULT_POLICY, cache=None, _nc_checked=False):
    """The Gramian-ratio operator Q_inf Q_t^+ at a single time.

    Defined for stable systems; outside the commuting selfadjoint case the
    horizon must already make the system null controllable (the range test
    is run and failure raises PreconditionError), which is what keeps the
    ratio bounded in the weighted geometry.
    """
    if not sys.stable:
        raise UnstableSystemError("the Gramian-ratio family needs a stable system")
    t = float(t)
    if t <= 0.0:
        raise ValueError(f"time must be positive, got {t}")
    if cache is None:
        cache = GramianCache(policy)
    if not _nc_checked and not sys.is_commuting_selfadjoint():
        nc = null_controllability_test(sys, t, policy)
        if not nc.satisfied:
            raise PreconditionError(
                f"system is not null controllable at horizon {t:g} "
                f"(range defect {nc.defect:.3e}); the ratio family is unbounded there"
            )
    Q_inf = cache.get(sys, np.inf).matrix
    Q_t = cache.get(sys, t).Q
    return Q_inf @ Q_t.pinv()


def pv_candidate(sys, policy=DEFAULT_POLICY, cache=None, verified_from=None):
    """Candidate wrapping the Gramian-ratio family.

    ``verified_from``: a time at which the null-controllability range test
    is run once; later evaluations reuse that verdict (Gramian ranges only
    grow with the horizon, so the check is monotone).
    """
    if cache is None:
        cache = GramianCache(policy)
    geometry = HGeometry(cache.get(sys, np.inf), policy)
    checked = sys.is_commuting_selfadjoint()
    if not checked and verified_from is not None:
        nc = null_controllability_test(sys, verified_from, policy)
        if not nc.satisfied:
            raise PreconditionError(
                f"not null controllable at horizon {verified_from:g}"
            )
        checked = True

    def fn(t, _checked=checked):
        return build_pv(sys, t, policy, cache, _nc_checked=_checked)

    return RiccatiCandidate(sys, geometry, fn, kind="gramian_ratio")


def inverse_candidate(sys, policy=DEFAULT_POLICY, cache=None):
    """Candidate wrapping the inverse-Gramian family R(t) = Q_t^+ (plain geometry)."""
    if cache is None:
        cache = GramianCache(policy)
    geometry = _default_geometry(sys, policy)

    def fn(t):
        return cache.get(sys, t).Q.pinv()

    return RiccatiCandidate(sys, geometry, fn, kind="gramian_inverse")


def callable_candidate(sys, geometry, fn, kind="custom"):
    return RiccatiCandidate(sys, geometry, fn, kind=kind)


def residual_probes(cand, t, n_random=10, seed=0, weighted=True):
    """Probe vectors for weak-form residuals at time t.

    An orthonormal basis of range(Q_t) plus ``n_random`` seeded random
    vectors inside it; normalized in the weighted norm when ``weighted``,
    in the Euclidean norm otherwise.
    """
    rng = np.random.default_rng(seed)
    gram_t = compute_gramian(cand.sys, t, policy=cand.geometry.policy)
    U = gram_t.Q.range_basis()
    cols = [U[:, j] for j in range(U.shape[1])]
    for _ in range(n_random):
        cols.append(U @ rng.standard_normal(U.shape[1]))
    probes = []
    for v in cols:
        if weighted:
            probes.append(cand.geometry.normalize(v))
        else:
            probes.append(v / np.linalg.norm(v))
    return np.array(probes)


@dataclass(frozen=True)
class ResidualReport:
    """Max weak-form residual per time, with the scale-aware pass threshold."""

    kind: str
    times: tuple
    residuals: tuple           # max |lhs - rhs| over probe pairs, per time
    tol: float                 # requested base tolerance
    tol_scaled: float          # tol * max(1,||P||)^2 * max(1,||A||), worst over times
    fd_step: float
    n_probes: int
    passed: bool
    consistency: float = np.nan  # commuting-vs-general right-hand-side agreement


def _pairing_derivative(cand, t, X, Y, W, h):
    """d/dt of the probe pairing matrix X^T W P(t) Y by Richardson-extrapolated
    central differences (W is the metric of the pairing)."""

    def pairing(tau):
        # [i, j] = <P(tau) x_i, y_j>_W  =  y_j^T W P x_i
        P = cand.evaluate(tau)
        return (Y @ (W @ (P @ X.T))).T

    d1 = (pairing(t + h) - pairing(t - h)) / (2.0 * h)
    d2 = (pairing(t + 0.5 * h) - pairing(t - 0.5 * h)) / h
    return (4.0 * d2 - d1) / 3.0


def _scale(cand, t, weighted):
    A_norm = np.linalg.norm(cand.sys.A, 2)
    if weighted:
        P_norm = cand.h_norm_of(t)
    else:
        P_norm = np.linalg.norm(cand.evaluate(t), 2)
    return max(1.0, P_norm) ** 2 * max(1.0, A_norm)


def _as_times(t):
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(ts <= 0.0):
        raise ValueError("times must be positive")
    return ts


def riccati_residual_H(cand, t, probes=None, tol=1e-6, fd_step=None, seed=0):
    """Weak-form residual of the weighted-space equation with reversed linear sign:

        d/dt <P x, y>_H  =  - <A x, W P y>  -  <W P x, A y>  -  <B^T W P x, B^T W P y>

    with W the weighted metric (the pseudoinverse of the limit Gramian).
    Probes default to a basis of range(Q_t) plus seeded random vectors,
    normalized in the weighted norm.  The pass threshold is
    ``tol * max(1, ||P||_H)^2 * max(1, ||A||)``.
    """
    times = _as_times(t)
    A = cand.sys.A
    Bt = cand.sys.B.T
    W = cand.geometry.metric
    residuals = []
    worst_scale = 0.0
    n_probes = 0
    for tau in times:
        X = residual_probes(cand, tau, seed=seed) if probes is None else np.asarray(probes)
        n_probes = X.shape[0]
        h = (fd_step if fd_step is not None else FD_STEP_FACTOR * max(1.0, tau))
        lhs = _pairing_derivative(cand, tau, X, X, W, h)
        P = cand.evaluate(tau)
        WP_X = W @ (P @ X.T)          # columns: W P x_i
        AX = A @ X.T
        BtWP = Bt @ WP_X
        rhs = -(AX.T @ WP_X) - (WP_X.T @ AX) - (BtWP.T @ BtWP)
        residuals.append(float(np.abs(lhs - rhs).max()))
        worst_scale = max(worst_scale, _scale(cand, tau, weighted=True))
    tol_scaled = tol * worst_scale
    return ResidualReport(
        kind="weighted",
        times=tuple(float(x) for x in times),
        residuals=tuple(residuals),
        tol=tol,
        tol_scaled=float(tol_scaled),
        fd_step=float(fd_step if fd_step is not None else FD_STEP_FACTOR),
        n_probes=n_probes,
        passed=bool(max(residuals) <= tol_scaled),
    )


def riccati_residual_X(cand, t, probes=None, tol=1e-6, fd_step=None, seed=0):
    """Weak-form residual of the plain-space equation

        d/dt <R x, y>  =  - <A x, R y>  -  <R x, A y>  -  <B^T R x, B^T R y>

    (Euclidean pairings; probes Euclidean-normalized in range(Q_t)).
    """
    times = _as_times(t)
    A = cand.sys.A
    Bt = cand.sys.B.T
    n = cand.sys.n
    residuals = []
    worst_scale = 0.0
    n_probes = 0
    for tau in times:
        X = (residual_probes(cand, tau, seed=seed, weighted=False)
             if probes is None else np.asarray(probes))
        n_probes = X.shape[0]
        h = (fd_step if fd_step is not None else FD_STEP_FACTOR * max(1.0, tau))
        lhs = _pairing_derivative(cand, tau, X, X, np.eye(n), h)
        R = cand.evaluate(tau)
        RX = R @ X.T
        AX = A @ X.T
        BtR = Bt @ RX
        rhs = -(AX.T @ RX) - (RX.T @ AX) - (BtR.T @ BtR)
        residuals.append(float(np.abs(lhs - rhs).max()))
        worst_scale = max(worst_scale, _scale(cand, tau, weighted=False))
    tol_scaled = tol * worst_scale
    return ResidualReport(
        kind="plain",
        times=tuple(float(x) for x in times),
        residuals=tuple(residuals),
        tol=tol,
        tol_scaled=float(tol_scaled),
        fd_step=float(fd_step if fd_step is not None else FD_STEP_FACTOR),
        n_probes=n_probes,
        passed=bool(max(residuals) <= tol_scaled),
    )


def riccati_residual_commuting(cand, t, probes=None, tol=1e-6, fd_step=None, seed=0):
    """Weak-form residual of the commuting-case equation (all pairings weighted):

        d/dt <P x, y>_H = - <A x, P y>_H - <P x, A y>_H + 2 <A P x, P y>_H

    Also reports how far this right-hand side is from the general weighted
    one on the same probes (``consistency``): in the commuting case
    2 A y = - B B^T W y on the space, so the two must agree.
    """
    if not cand.sys.is_commuting_selfadjoint():
        raise PreconditionError("commuting-case residual requires symmetric A commuting with B B^T")
    times = _as_times(t)
    A = cand.sys.A
    Bt = cand.sys.B.T
    W = cand.geometry.metric
    residuals = []
    consistency = 0.0
    worst_scale = 0.0
    n_probes = 0
    for tau in times:
        X = residual_probes(cand, tau, seed=seed) if probes is None else np.asarray(probes)
        n_probes = X.shape[0]
        h = (fd_step if fd_step is not None else FD_STEP_FACTOR * max(1.0, tau))
        lhs = _pairing_derivative(cand, tau, X, X, W, h)
        P = cand.evaluate(tau)
        PX = P @ X.T
        AX = A @ X.T
        APX = A @ PX
        rhs = -(AX.T @ (W @ PX)) - (PX.T @ (W @ AX)) + 2.0 * (APX.T @ (W @ PX))
        # general weighted right-hand side on the same probes
        WP_X = W @ PX
        BtWP = Bt @ WP_X
        rhs_general = -(AX.T @ WP_X) - (WP_X.T @ AX) - (BtWP.T @ BtWP)
        consistency = max(consistency, float(np.abs(rhs - rhs_general).max()))
        residuals.append(float(np.abs(lhs - rhs).max()))
        worst_scale = max(worst_scale, _scale(cand, tau, weighted=True))
    tol_scaled = tol * worst_scale
    return ResidualReport(
        kind="commuting",
        times=tuple(float(x) for x in times),
        residuals=tuple(residuals),
        tol=tol,
        tol_scaled=float(tol_scaled),
        fd_step=float(fd_step if fd_step is not None else FD_STEP_FACTOR),
        n_probes=n_probes,
        passed=bool(max(residuals) <= tol_scaled),
        consistency=float(consistency),
    )


@dataclass(frozen=True)
class UniquenessReport:
    """Snapshot-matching reconstruction: does S(t)^{-1} Q_inf reproduce Q_t?"""

    t0: float
    match_at_t0: float         # relative gap between S(t0) and the ratio family there
    times: tuple
    reconstruction_errors: tuple
    smallest_singular_values: tuple
    passed: bool
    hypotheses_checked: tuple

    @property
    def max_error(self):
        return max(self.reconstruction_errors) if self.reconstruction_errors else np.nan


def uniqueness_reconstruction(cand, t0, t_grid, rtol=1e-6, policy=DEFAULT_POLICY,
                              cache=None):
    """Partial-uniqueness check for invertible solution families.

    Preconditions verified numerically: the family matches the Gramian
    ratio at t0 (1e-8 relative) and stays invertible on the weighted space
    along the grid.  Conclusion checked: S(t)^{-1} Q_inf equals Q_t to
    ``rtol`` at every grid time — i.e. a single correct snapshot pins the
    family to the Gramian ratio.
    """
    if cache is None:
        cache = GramianCache(policy)
    sys = cand.sys
    geometry = cand.geometry
    Q_inf = geometry.Q_inf
    U = geometry.gram.Q.range_basis()

    Pv0 = build_pv(sys, t0, policy, cache)
    S0 = cand.evaluate(t0)
    scale0 = max(np.linalg.norm(Pv0, 2), 1e-300)
    match = float(np.linalg.norm(
        U.T @ (S0 - Pv0) @ U, 2) / scale0)

    times = []
    errors = []
    sigmas = []
    ok = match <= 1e-8
    for t in np.atleast_1d(np.asarray(t_grid, dtype=float)):
        S = cand.evaluate(t)
        M = U.T @ S @ U
        sigma = np.linalg.svd(M, compute_uv=False)
        smin = float(sigma[-1])
        sigmas.append(smin)
        if smin <= 1e-12 * sigma[0]:
            times.append(float(t))
            errors.append(np.inf)
            ok = False
            continue
        S_inv = U @ np.linalg.inv(M) @ U.T
        Q_rec = S_inv @ Q_inf
        Q_t = cache.get(sys, t).matrix
        Pr = U @ U.T
        err = np.linalg.norm(Pr @ (Q_rec - Q_t) @ Pr, 2) / max(np.linalg.norm(Q_t, 2), 1e-300)
        times.append(float(t))
        errors.append(float(err))
        if err > rtol:
            ok = False
    return UniquenessReport(
        t0=float(t0),
        match_at_t0=match,
        times=tuple(times),
        reconstruction_errors=tuple(errors),
        smallest_singular_values=tuple(sigmas),
        passed=bool(ok),
        hypotheses_checked=(
            "family matches the Gramian ratio at t0 (relative 1e-8)",
            "family invertible on the weighted space along the grid",
            "reconstructed Gramians match the direct ones (relative tolerance)",
        ),
    )


def _commuting_t1(sys, K, margin):
    """Exact threshold when K commutes with A: the bracket diagonalizes.

    Each simultaneous eigenpair (lambda, kappa) contributes the branch
    1 - kappa e^{2 lambda t}; its margin crossing is at
    t = log(kappa / (1 - margin)) / (-2 lambda) whenever kappa reaches
    1 - margin at all (branches with kappa below that, or negative, never
    come close to singular).
    """
    lam, V = np.linalg.eigh(sys.A)
    Kp = V.T @ K @ V
    # K is exactly block diagonal across distinct eigenspaces of A;
    # diagonalize it within each (numerically grouped) eigenspace.
    n = lam.size
    group_tol = 1e-10 * max(1.0, float(np.abs(lam).max()))
    t1 = 0.0
    i = 0
    while i < n:
        j = i
        while j + 1 < n and lam[j + 1] - lam[i] <= group_tol:
            j += 1
        block = Kp[i : j + 1, i : j + 1]
        kappas = np.linalg.eigvalsh(0.5 * (block + block.T))
        lam_g = float(np.mean(lam[i : j + 1]))
        for kappa in kappas:
            if kappa >= 1.0 - margin and lam_g < 0.0:
                t1 = max(t1, math.log(kappa / (1.0 - margin)) / (-2.0 * lam_g))
        i = j + 1
    return float(t1)


def detect_t1(sys, K, margin=1e-6, n_scan=512):
    """First time after which I - e^{tA} K e^{tA} stays invertible with margin.

    When K commutes with A the threshold is computed exactly from the
    simultaneous eigenpairs.  Otherwise the smallest singular value is
    scanned on [0, t_hi] (t_hi chosen so the decay makes the bracket
    uniformly safe), every scan-grid local minimum is polished with a
    bounded scalar minimizer — near-singular dips are far narrower than
    any practical grid — and the last margin crossing is bisected.
    Returns 0.0 when the bracket is safe from the start.
    """
    if not sys.is_commuting_selfadjoint():
        raise PreconditionError("the exponential family needs symmetric A commuting with B B^T")
    if not sys.stable:
        raise UnstableSystemError("the exponential family threshold needs a stable system")
    K = np.asarray(K, dtype=float)
    normK = np.linalg.norm(K, 2)
    if normK == 0.0:
        return 0.0
    if commutes(sys.A, K, tol=1e-12):
        return _commuting_t1(sys, K, margin)

    def sigma_min(t):
        E = expm(sys.A, t)
        return float(np.linalg.svd(np.eye(sys.n) - E @ K @ E, compute_uv=False)[-1])

    # past t_hi:  ||e^{tA} K e^{tA}|| <= ||K|| e^{-2 omega t} <= 1/2
    t_hi = max(np.log(max(2.0 * normK, 2.0)) / (2.0 * sys.omega), 1.0 / sys.omega)
    ts = np.linspace(0.0, t_hi, n_scan)
    vals = np.array([sigma_min(t) for t in ts])
    unsafe = [float(t) for t, v in zip(ts, vals) if v <= margin]
    for i in range(1, n_scan - 1):
        if vals[i] < vals[i - 1] and vals[i] < vals[i + 1]:
            res = minimize_scalar(
                sigma_min, bounds=(ts[i - 1], ts[i + 1]), method="bounded",
                options={"xatol": 1e-14},
            )
            if res.fun <= margin:
                unsafe.append(float(res.x))
    if not unsafe:
        return 0.0
    step = ts[1] - ts[0]
    lo = max(unsafe)
    hi = lo + step
    while hi < t_hi + step and sigma_min(hi) <= margin:
        hi += step
    if sigma_min(hi) <= margin:
        raise MarginError("bracket never becomes safely invertible inside the scan window")
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if sigma_min(mid) <= margin:
            lo = mid
        else:
            hi = mid
    return float(hi)


@dataclass(frozen=True)
class CommutingSolution:
    """One member of the exponential solution family, with its safety margins."""

    operator: np.ndarray
    t: float
    t1: float                  # detected invertibility threshold for this K
    margin: float              # smallest singular value of the bracket at t


def commuting_family(sys, K, t, margin=1e-6, t1=None):
    """Evaluate (I - e^{tA} K e^{tA})^{-1} for the commuting selfadjoint case.

    ``K`` must be symmetric in the weighted geometry (for the diagonal
    models used here, plain symmetry suffices when it commutes with the
    metric).  Times at or below the detected threshold raise MarginError.
    """
    K = np.asarray(K, dtype=float)
    if t1 is None:
        t1 = detect_t1(sys, K, margin)
    t = float(t)
    if t <= t1:
        raise MarginError(
            f"time {t:g} is at or below the invertibility threshold {t1:g} of this family"
        )
    E = expm(sys.A, t)
    G = np.eye(sys.n) - E @ K @ E
    smin = float(np.linalg.svd(G, compute_uv=False)[-1])
    if smin <= margin:
        raise MarginError(
            f"bracket nearly singular at t={t:g}: smallest singular value {smin:.3e}"
        )
    return CommutingSolution(operator=np.linalg.inv(G), t=t, t1=float(t1), margin=smin)


def commuting_candidate(sys, K, policy=DEFAULT_POLICY, margin=1e-6):
    """Candidate wrapping the exponential family for a fixed K."""
    geometry = _default_geometry(sys, policy)
    t1 = detect_t1(sys, K, margin)

    def fn(t):
        return commuting_family(sys, K, t, margin, t1=t1).operator

    cand = RiccatiCandidate(sys, geometry, fn, kind="commuting_exponential")
    cand.t1 = t1
    return cand


@dataclass(frozen=True)
class RecoverLReport:
    """Snapshot inversion of the exponential family: L = I - S(T*)^{-1}."""

    L: np.ndarray
    t_star: float
    times: tuple
    errors: tuple              # relative forward-prediction errors
    passed: bool


def recover_L(sys, cand, t_star, t_grid=None, rtol=1e-6):
    """Recover the family's mixing operator from one snapshot and verify forward.

    Given S from the exponential family, L = I - S(T*)^{-1} regenerates the
    family as (I - e^{(t-T*)A} L e^{(t-T*)A})^{-1}; agreement on a forward
    grid certifies the snapshot characterizes the family.
    """
    S_star = cand.evaluate(t_star)
    sigma = np.linalg.svd(S_star, compute_uv=False)
    if sigma[-1] <= 1e-12 * sigma[0]:
        raise MarginError(f"family is not invertible at T* = {t_star:g}")
    L = np.eye(sys.n) - np.linalg.inv(S_star)
    if t_grid is None:
        span = 2.0 / max(sys.omega, 1e-3)
        t_grid = t_star + np.linspace(0.0, span, 9)[1:]
    times = []
    errors = []
    ok = True
    for t in np.atleast_1d(np.asarray(t_grid, dtype=float)):
        E = expm(sys.A, t - t_star)
        G = np.eye(sys.n) - E @ L @ E
        sm = np.linalg.svd(G, compute_uv=False)[-1]
        if sm <= 1e-12:
            times.append(float(t)); errors.append(np.inf); ok = False
            continue
        predicted = np.linalg.inv(G)
        actual = cand.evaluate(t)
        err = np.linalg.norm(predicted - actual, 2) / max(np.linalg.norm(actual, 2), 1e-300)
        times.append(float(t))
        errors.append(float(err))
        if err > rtol:
            ok = False
    return RecoverLReport(L=L, t_star=float(t_star), times=tuple(times),
                          errors=tuple(errors), passed=bool(ok))


@dataclass(frozen=True)
class ProjectionReport:
    """Compression test: P S(t) P solves iff S(t) maps ran(P) into ran(P)."""

    times: tuple
    range_defects: tuple       # weighted-norm defect of (I-P) S(t) P per time
    range_condition_holds: bool
    residual: ResidualReport
    is_solution: bool
    mixed_verdict: bool        # True would witness a biconditional violation
    witness_time: float
    witness_vector: np.ndarray


def projected_solution_check(sys, cand, P, times, tol=1e-6, range_tol=1e-8, seed=0):
    """Check the compression biconditional for a projection P.

    P must be an orthogonal projection in the weighted geometry commuting
    with A.  The range condition is measured as the weighted operator-norm
    defect of (I - P) S(t) P; the compressed family P S(t) P is then run
    through the commuting-case residual on probes from ran(P).
    """
    P = np.asarray(P, dtype=float)
    geometry = cand.geometry
    idem = np.linalg.norm(P @ P - P, 2)
    if idem > 1e-10 * max(np.linalg.norm(P, 2), 1.0):
        raise PreconditionError(f"P is not idempotent: ||P^2 - P|| = {idem:.3e}")
    if geometry.symmetry_defect(P) > 1e-8:
        raise PreconditionError("P is not an orthogonal projection in the weighted geometry")
    if not commutes(sys.A, P, tol=1e-10):
        raise PreconditionError("P must commute with A")

    times = _as_times(times)
    pinv_sqrt = geometry.pinv_sqrt
    sqrt_m = geometry.sqrt_matrix
    defects = []
    worst = (0.0, times[0], None)
    for t in times:
        S = cand.evaluate(t)
        M = (np.eye(sys.n) - P) @ S @ P
        d = float(np.linalg.norm(pinv_sqrt @ M @ sqrt_m, 2))
        scale = max(1.0, cand.h_norm_of(t))
        d_rel = d / scale
        defects.append(d_rel)
        if d_rel > worst[0]:
            # witness: the probe direction in ran(P) most expelled from it
            Mw = pinv_sqrt @ M @ sqrt_m
            _, _, Vt = np.linalg.svd(Mw)
            worst = (d_rel, float(t), sqrt_m @ Vt[0])
    range_ok = max(defects) <= range_tol

    compressed = RiccatiCandidate(
        sys, geometry, lambda t: P @ cand.evaluate(t) @ P, kind="compressed"
    )
    # probes restricted to ran(P) (and to the weighted space)
    rng = np.random.default_rng(seed)
    U = geometry.gram.Q.range_basis()
    cols = []
    for j in range(U.shape[1]):
        v = P @ U[:, j]
        if np.linalg.norm(v) > 1e-12:
            cols.append(geometry.normalize(v))
    for _ in range(10):
        v = P @ (U @ rng.standard_normal(U.shape[1]))
        if np.linalg.norm(v) > 1e-12:
            cols.append(geometry.normalize(v))
    probes = np.array(cols)
    residual = riccati_residual_commuting(compressed, times, probes=probes, tol=tol)
    is_solution = residual.passed
    return ProjectionReport(
        times=tuple(float(t) for t in times),
        range_defects=tuple(defects),
        range_condition_holds=bool(range_ok),
        residual=residual,
        is_solution=bool(is_solution),
        mixed_verdict=bool(range_ok != is_solution),
        witness_time=worst[1],
        witness_vector=worst[2] if worst[2] is not None else np.zeros(sys.n),
    )


@dataclass(frozen=True)
class LyapunovReport:
    mode: str
    times: tuple
    residuals: tuple
    tol_scaled: float
    passed: bool


def lyapunov_residual(sys, Q, mode, times=None, tol=1e-7, fd_step=None):
    """Residual of the Gramian's own linear equation.

    mode 'differential': Q is a callable family; checks
    d/dt Q(t) = A Q + Q A^T + B B^T by Richardson central differences.
    mode 'algebraic': Q is a matrix; checks A Q + Q A^T + B B^T = 0.
    Thresholds scale with ||B B^T||.
    """
    C = sys.BBt
    scale = max(np.linalg.norm(C, 2), 1e-300)
    if mode == "algebraic":
        resid = float(np.linalg.norm(sys.A @ Q + Q @ sys.A.T + C, 2))
        tol_scaled = tol * scale
        return LyapunovReport("algebraic", (np.inf,), (resid,), float(tol_scaled),
                              bool(resid <= tol_scaled))
    if mode != "differential":
        raise ValueError(f"unknown mode {mode!r}")
    if times is None:
        raise ValueError("differential mode needs times")
    residuals = []
    for t in _as_times(times):
        h = (fd_step if fd_step is not None else FD_STEP_FACTOR * max(1.0, t))
        d1 = (Q(t + h) - Q(t - h)) / (2.0 * h)
        d2 = (Q(t + 0.5 * h) - Q(t - 0.5 * h)) / h
        dQ = (4.0 * d2 - d1) / 3.0
        Qt = Q(t)
        residuals.append(float(np.linalg.norm(dQ - (sys.A @ Qt + Qt @ sys.A.T + C), 2)))
    tol_scaled = tol * scale
    return LyapunovReport("differential", tuple(float(t) for t in _as_times(times)),
                          tuple(residuals), float(tol_scaled),
                          bool(max(residuals) <= tol_scaled))
