"""Controllability Gramians over finite and infinite horizons.

Four routes to the same object, kept deliberately independent so they can
cross-validate each other:

* ``gramian_quadrature``     -- composite Gauss-Legendre on the defining integral
* ``gramian_lyapunov_ode``   -- RK4 on the differential Lyapunov equation
* ``gramian_infinite``       -- dense algebraic Lyapunov solve (stable systems)
* ``gramian_commuting_closed_form`` -- entrywise formula when A = A^T commutes
  with B B^T
* ``gramian_algebraic``      -- finite horizon from the infinite one via the
  exact splitting Q_t = Q_inf - e^{tA} Q_inf e^{tA^T}
"""

from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError, StiffnessError, UnstableSystemError
from .linalg import DEFAULT_POLICY, SymmetricPSD, expm, range_inclusion
from .systems import LinearSystem

__all__ = [
    "Gramian",
    "GramianCache",
    "gramian_quadrature",
    "gramian_lyapunov_ode",
    "gramian_infinite",
    "gramian_commuting_closed_form",
    "gramian_algebraic",
    "compute_gramian",
    "solve_algebraic_lyapunov",
    "kernel_chain_check",
    "KernelChainReport",
    "range_equality_check",
    "RangeEqualityReport",
]


@dataclass(frozen=True)
class Gramian:
    """A computed Gramian: the PSD matrix plus how and for which horizon it was made."""

    Q: SymmetricPSD
    horizon: float
    method: str
    system_fingerprint: str

    @property
    def matrix(self):
        return self.Q.matrix

    def to_json_dict(self):
        horizon = "inf" if np.isinf(self.horizon) else float(self.horizon)
        return {
            "Q": self.Q.matrix.tolist(),
            "horizon": horizon,
            "method": self.method,
            "system_fingerprint": self.system_fingerprint,
        }


def _finite_horizon(t):
    t = float(t)
    if not np.isfinite(t) or t <= 0.0:
        raise ValueError(f"horizon must be finite and positive, got {t}")
    return t


def _wrap(sys, Q, t, method, policy):
    Q = 0.5 * (Q + Q.T)
    return Gramian(SymmetricPSD(Q, policy), float(t), method, sys.fingerprint())


def _quadrature_fixed(sys, t, n_nodes, panels):
    nodes, weights = np.polynomial.legendre.leggauss(n_nodes)
    Q = np.zeros((sys.n, sys.n))
    h = t / panels
    for p in range(panels):
        mid = (p + 0.5) * h
        for xi, wi in zip(nodes, weights):
            r = mid + 0.5 * h * xi
            G = expm(sys.A, r) @ sys.B
            Q += (0.5 * h * wi) * (G @ G.T)
    return Q


def gramian_quadrature(sys, t, n_nodes=8, rtol=1e-10, max_panels=2 ** 14,
                       policy=DEFAULT_POLICY):
    """Finite-horizon Gramian by composite Gauss-Legendre quadrature.

    Starts from a single ``n_nodes``-point panel and doubles the panel count
    until two successive refinements agree to ``rtol`` (relative, entrywise),
    giving up at ``max_panels``.

    Parameters
    ----------
    sys : LinearSystem
    t : float
        Horizon, finite and positive.
    n_nodes : int
        Gauss-Legendre nodes per panel (>= 2).
    """
    t = _finite_horizon(t)
    if n_nodes < 2:
        raise ValueError(f"n_nodes must be at least 2, got {n_nodes}")
    panels = 1
    Q_prev = _quadrature_fixed(sys, t, n_nodes, panels)
    while panels < max_panels:
        panels *= 2
        Q = _quadrature_fixed(sys, t, n_nodes, panels)
        scale = max(np.abs(Q).max(), np.finfo(float).tiny)
        if np.abs(Q - Q_prev).max() <= rtol * scale:
            return _wrap(sys, Q, t, "quadrature", policy)
        Q_prev = Q
    raise StiffnessError(
        f"quadrature did not converge to rtol={rtol:g} within {max_panels} panels "
        f"(horizon {t:g}, ||A|| ~ {np.abs(sys.A).max():.3g})"
    )


def _rk4_lyapunov(sys, t, n_steps):
    A, C = sys.A, sys.BBt
    h = t / n_steps

    def f(Q):
        return A @ Q + Q @ A.T + C

    Q = np.zeros((sys.n, sys.n))
    # a step size above the stability limit of stiff modes makes the iterate
    # blow up; silence the transient overflow and report the divergence to
    # the caller (which reacts by halving the step), instead of warning
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(n_steps):
            k1 = f(Q)
            k2 = f(Q + 0.5 * h * k1)
            k3 = f(Q + 0.5 * h * k2)
            k4 = f(Q + h * k3)
            Q = Q + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            Q = 0.5 * (Q + Q.T)
            if not np.all(np.isfinite(Q)):
                return np.full((sys.n, sys.n), np.inf)
    return Q


def gramian_lyapunov_ode(sys, t, rtol=1e-8, n_steps0=64, max_doublings=14,
                         policy=DEFAULT_POLICY):
    """Finite-horizon Gramian by integrating Q' = AQ + QA^T + BB^T, Q(0) = 0.

    Classical RK4 with the iterate symmetrized after every step; the whole
    run is repeated with the step halved until two runs agree to ``rtol``.
    """
    t = _finite_horizon(t)
    n = n_steps0
    Q_prev = _rk4_lyapunov(sys, t, n)
    for _ in range(max_doublings):
        n *= 2
        Q = _rk4_lyapunov(sys, t, n)
        if not np.all(np.isfinite(Q)) or not np.all(np.isfinite(Q_prev)):
            Q_prev = Q
            continue
        scale = max(np.abs(Q).max(), np.finfo(float).tiny)
        if np.abs(Q - Q_prev).max() <= rtol * scale:
            return _wrap(sys, Q, t, "lyapunov_ode", policy)
        Q_prev = Q
    re = np.linalg.eigvals(sys.A).real
    raise StiffnessError(
        f"step refinement exhausted at {n} steps without reaching rtol={rtol:g}; "
        f"eigenvalue real parts span [{re.min():.3g}, {re.max():.3g}]"
    )


def _sym_basis_pairs(n, ordering):
    pairs = [(i, j) for i in range(n) for j in range(i, n)]
    if ordering == "row":
        return pairs
    if ordering == "col":
        return sorted(pairs, key=lambda ij: (ij[1], ij[0]))
    raise ValueError(f"unknown ordering {ordering!r}; use 'row' or 'col'")


def solve_algebraic_lyapunov(A, C, ordering="row"):
    """Solve ``A X + X A^T + C = 0`` for symmetric X by a dense linear solve.

    The unknown is the upper triangle of X (n(n+1)/2 coefficients); the map
    X -> AX + XA^T is assembled column by column in that coordinate system
    and inverted directly.  ``ordering`` picks the enumeration of the
    unknowns ('row' or 'col'); the solution must not depend on it, which the
    tests use as a uniqueness check.
    """
    A = np.asarray(A, dtype=float)
    C = np.asarray(C, dtype=float)
    n = A.shape[0]
    pairs = _sym_basis_pairs(n, ordering)
    N = len(pairs)
    L = np.empty((N, N))
    for col, (i, j) in enumerate(pairs):
        E = np.zeros((n, n))
        E[i, j] = 1.0
        E[j, i] = 1.0
        M = A @ E + E @ A.T
        L[:, col] = [M[k, l] for (k, l) in pairs]
    rhs = np.array([-C[k, l] for (k, l) in pairs])
    coef = np.linalg.solve(L, rhs)
    X = np.zeros((n, n))
    for c, (i, j) in zip(coef, pairs):
        X[i, j] = c
        X[j, i] = c
    return X


def gramian_infinite(sys, policy=DEFAULT_POLICY, residual_rtol=1e-10):
    """Infinite-horizon Gramian of a stable system via the algebraic Lyapunov equation.

    Raises UnstableSystemError when the decay margin is zero, and
    StiffnessError when the direct solve cannot meet the residual bound
    ``||A Q + Q A^T + BB^T|| <= residual_rtol * ||BB^T||``.
    """
    if not sys.stable:
        raise UnstableSystemError(
            f"infinite-horizon Gramian needs a strictly stable system; decay margin is {sys.omega}"
        )
    C = sys.BBt
    Q = solve_algebraic_lyapunov(sys.A, C)
    scale = max(np.abs(C).max(), np.finfo(float).tiny)
    resid = np.abs(sys.A @ Q + Q @ sys.A.T + C).max()
    if resid > residual_rtol * scale:
        raise StiffnessError(
            f"algebraic solve residual {resid:.3e} exceeds {residual_rtol:g} * ||BB^T||; "
            "eigenvalue pair sums are nearly singular"
        )
    return _wrap(sys, Q, np.inf, "algebraic", policy)


def gramian_commuting_closed_form(sys, t, policy=DEFAULT_POLICY):
    """Entrywise closed form for symmetric A commuting with B B^T.

    Finite horizon:  Q_t = (1/2) A^{-1} (e^{2tA} - I) B B^T
    Infinite:        Q_inf = -(1/2) A^{-1} B B^T   (stable A only)

    A must be invertible.  Raises PreconditionError off the commuting case.
    """
    if not sys.is_commuting_selfadjoint():
        raise PreconditionError("closed form requires symmetric A commuting with B B^T")
    eigs = np.linalg.eigvalsh(sys.A)
    if np.abs(eigs).min() <= 1e-12 * max(np.abs(eigs).max(), 1.0):
        raise PreconditionError("closed form requires invertible A")
    if np.isinf(t):
        if not sys.stable:
            raise UnstableSystemError("infinite-horizon closed form needs a stable system")
        Q = -0.5 * np.linalg.solve(sys.A, sys.BBt)
        return _wrap(sys, Q, np.inf, "closed_form", policy)
    t = _finite_horizon(t)
    Q = 0.5 * np.linalg.solve(sys.A, (expm(sys.A, 2.0 * t) - np.eye(sys.n)) @ sys.BBt)
    return _wrap(sys, Q, t, "closed_form", policy)


def gramian_algebraic(sys, t, policy=DEFAULT_POLICY):
    """Finite-horizon Gramian of a stable system without quadrature.

    Uses the exact horizon splitting Q_t = Q_inf - e^{tA} Q_inf e^{tA^T},
    so the only numerical work is one algebraic Lyapunov solve and one
    matrix exponential.
    """
    if np.isinf(t):
        return gramian_infinite(sys, policy)
    t = _finite_horizon(t)
    Qinf = gramian_infinite(sys, policy).matrix
    E = expm(sys.A, t)
    Q = Qinf - E @ Qinf @ E.T
    return _wrap(sys, Q, t, "algebraic", policy)


def compute_gramian(sys, t, method="auto", policy=DEFAULT_POLICY):
    """Dispatch to a Gramian route.

    ``auto`` prefers exactness and speed: the commuting closed form when
    available, the algebraic splitting for stable systems, and quadrature
    otherwise.
    """
    if method == "auto":
        if sys.is_commuting_selfadjoint():
            eigs = np.linalg.eigvalsh(sys.A)
            if np.abs(eigs).min() > 1e-12 * max(np.abs(eigs).max(), 1.0):
                return gramian_commuting_closed_form(sys, t, policy)
        if np.isinf(t) or sys.stable:
            return gramian_algebraic(sys, t, policy)
        return gramian_quadrature(sys, t, policy=policy)
    if method == "quadrature":
        return gramian_quadrature(sys, t, policy=policy)
    if method == "lyapunov_ode":
        return gramian_lyapunov_ode(sys, t, policy=policy)
    if method == "closed_form":
        return gramian_commuting_closed_form(sys, t, policy)
    if method == "algebraic":
        return gramian_algebraic(sys, t, policy)
    raise ValueError(f"unknown Gramian method {method!r}")


class GramianCache:
    """Write-once cache keyed by (system fingerprint, horizon, method).

    Trajectory and residual scans evaluate Gramians on dense time grids;
    caching keeps each (system, time) pair computed exactly once.
    """

    def __init__(self, policy=DEFAULT_POLICY):
        self._store = {}
        self.policy = policy

    def get(self, sys, t, method="auto"):
        key = (sys.fingerprint(), float(t), method)
        hit = self._store.get(key)
        if hit is None:
            hit = compute_gramian(sys, t, method, self.policy)
            self._store[key] = hit
        return hit

    def __len__(self):
        return len(self._store)


@dataclass(frozen=True)
class KernelChainReport:
    """Nullspace nesting across horizons: ker Q_t ⊆ ker Q_s ⊆ ker B^T for s <= t."""

    times: tuple
    kernel_dims: tuple
    dim_ker_Bt: int
    inclusions: tuple          # (label, defect, ok) triples, largest horizon first
    commuting: bool
    equalities_ok: bool        # only meaningful when commuting
    violations: tuple          # (label, defect, offending_vector) triples

    @property
    def all_ok(self):
        return all(ok for (_, _, ok) in self.inclusions)


def _subspace_defect(vectors, basis):
    """Largest distance from a unit vector in ``vectors`` to span(basis)."""
    if vectors.shape[1] == 0:
        return 0.0
    resid = vectors - basis @ (basis.T @ vectors)
    return float(np.linalg.norm(resid, axis=0).max())


def kernel_chain_check(sys, times, policy=DEFAULT_POLICY, tol=1e-6):
    """Check the kernel chain over ascending horizons, including ker B^T at the end.

    Larger horizons can only shrink the kernel, and every Gramian kernel
    sits inside ker B^T.  In the commuting selfadjoint case all inclusions
    are equalities, which is checked as well.
    """
    times = sorted(float(t) for t in times)
    if not times or times[0] <= 0.0:
        raise ValueError("times must be positive")
    grams = [compute_gramian(sys, t, policy=policy) for t in times]
    kernels = [g.Q.kernel_basis() for g in grams]
    # ker B^T = orthogonal complement of range(B)
    U, s, _ = np.linalg.svd(sys.B, full_matrices=True)
    rank_b = int(np.count_nonzero(s > policy.cutoff(s[0]))) if s.size and s[0] > 0 else 0
    ker_bt = U[:, rank_b:]

    inclusions = []
    violations = []
    order = np.argsort(times)[::-1]   # largest horizon first
    chain = [(f"ker Q_{times[i]:g}", kernels[i]) for i in order]
    chain.append(("ker B^T", ker_bt))
    for (lab_small, small), (lab_big, big) in zip(chain[:-1], chain[1:]):
        defect = _subspace_defect(small, big)
        ok = defect <= tol
        label = f"{lab_small} ⊆ {lab_big}"
        inclusions.append((label, defect, ok))
        if not ok:
            worst = small[:, int(np.argmax(np.linalg.norm(
                small - big @ (big.T @ small), axis=0)))]
            violations.append((label, defect, worst))

    commuting = sys.is_commuting_selfadjoint()
    equalities_ok = True
    if commuting:
        dims = [k.shape[1] for k in kernels] + [ker_bt.shape[1]]
        equalities_ok = len(set(dims)) == 1 and all(ok for (_, _, ok) in inclusions)

    return KernelChainReport(
        times=tuple(times),
        kernel_dims=tuple(k.shape[1] for k in kernels),
        dim_ker_Bt=ker_bt.shape[1],
        inclusions=tuple(inclusions),
        commuting=commuting,
        equalities_ok=equalities_ok,
        violations=tuple(violations),
    )


@dataclass(frozen=True)
class RangeEqualityReport:
    """Two-sided range comparison of Q_t^{1/2} against Q_inf^{1/2}."""

    t: float
    reference_time: float
    included_forward: bool     # range(Q_t^{1/2}) ⊆ range(Q_inf^{1/2})
    included_backward: bool
    constant_forward: float
    constant_backward: float
    commuting: bool

    @property
    def equal(self):
        return self.included_forward and self.included_backward


def range_equality_check(sys, t, T0=None, policy=DEFAULT_POLICY):
    """Compare range(Q_t^{1/2}) with range(Q_inf^{1/2}) in both directions.

    For stable systems the ranges agree from the null-controllability time
    onward; in the commuting selfadjoint case they agree for every t > 0.
    ``T0`` is carried into the report for the caller's bookkeeping.
    """
    S_t = compute_gramian(sys, t, policy=policy).Q.sqrt().matrix
    S_inf = compute_gramian(sys, np.inf, policy=policy).Q.sqrt().matrix
    fw = range_inclusion(S_t, S_inf, policy)
    bw = range_inclusion(S_inf, S_t, policy)
    return RangeEqualityReport(
        t=float(t),
        reference_time=float(T0) if T0 is not None else np.nan,
        included_forward=fw.included,
        included_backward=bw.included,
        constant_forward=fw.constant,
        constant_backward=bw.constant,
        commuting=sys.is_commuting_selfadjoint(),
    )
