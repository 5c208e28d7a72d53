"""Minimum-energy steering: value function, optimal controls and trajectories,
reachability classification, and the Gramian-weighted state geometry.

Steering problem: drive the state from 0 at time -t to a target x at time 0
with the least control energy (1/2) ∫ ||u||^2.  The value is
(1/2) ||Q_t^{-1/2} x||^2 whenever x lies in the range of Q_t^{1/2}; the
optimizer flows the Gramian inverse of the target through the adjoint
dynamics.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NotInSpaceError, ReachabilityError
from .gramians import GramianCache, compute_gramian
from .linalg import DEFAULT_POLICY, expm, pinv, range_inclusion

__all__ = [
    "ControlSignal",
    "ReachabilityClass",
    "HGeometry",
    "classify_target",
    "value_function",
    "optimal_control",
    "optimal_trajectory",
    "Trajectory",
    "simulate_control",
    "feedback_gain",
    "brute_force_min_energy",
    "LeastNormControl",
    "null_controllability_test",
    "NullControllability",
    "h_norm",
]

_trapz = getattr(np, "trapezoid", None) or np.trapz


@dataclass(frozen=True)
class ControlSignal:
    """A control sampled on an ascending grid in [-t, 0], interpolated linearly."""

    grid: np.ndarray           # shape (k,)
    values: np.ndarray         # shape (k, m)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if values.shape[0] != grid.shape[0]:
            raise ValueError(
                f"values must have one row per grid node: {values.shape} vs {grid.shape}"
            )
        if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be a strictly ascending 1-d array with >= 2 nodes")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    @property
    def horizon(self):
        return -float(self.grid[0])

    def __call__(self, r):
        """Piecewise-linear interpolation, one column per input channel."""
        r = np.asarray(r, dtype=float)
        cols = [np.interp(r, self.grid, self.values[:, j])
                for j in range(self.values.shape[1])]
        return np.stack(cols, axis=-1)

    def energy(self):
        """(1/2) ∫ ||u(r)||^2 dr by the trapezoid rule on the grid."""
        sq = np.sum(self.values ** 2, axis=1)
        return 0.5 * float(_trapz(sq, self.grid))


@dataclass(frozen=True)
class ReachabilityClass:
    """Tri-state reachability verdict with the distance to the reachable set.

    category is one of:
      'in_range_Q'          -- x in range(Q_t): finite energy and an attaining control
      'in_range_Qhalf_only' -- x in range(Q_t^{1/2}) only: finite value, optimizer
                               exists only in the limit
      'unreachable'         -- positive distance to range(Q_t^{1/2})
    defect is the Euclidean distance from x to range(Q_t^{1/2}).
    """

    category: str
    defect: float

    @property
    def reachable(self):
        return self.category != "unreachable"


def classify_target(gram, x, policy=DEFAULT_POLICY):
    """Classify a target against the ranges of Q_t and Q_t^{1/2}.

    Under the relative rank policy the two ranges genuinely differ: an
    eigendirection survives in range(Q^{1/2}) when its eigenvalue clears the
    *squared* relative threshold, mirroring the fact that the square root
    has the larger range.
    """
    x = np.asarray(x, dtype=float)
    lam = gram.Q.eigenvalues
    V = gram.Q.eigenvectors
    lam_max = lam[-1] if lam.size else 0.0
    tau = policy.rel_threshold
    w = V.T @ x
    norm_x = np.linalg.norm(x)
    if lam_max <= 0.0:
        defect = float(norm_x)
        category = "in_range_Q" if norm_x == 0.0 else "unreachable"
        return ReachabilityClass(category, defect)
    in_q = lam > tau * lam_max
    in_half = lam > tau * tau * lam_max
    defect_q = float(np.linalg.norm(w[~in_q]))
    defect_half = float(np.linalg.norm(w[~in_half]))
    tol = tau * max(norm_x, 1e-300)
    if defect_q <= tol:
        return ReachabilityClass("in_range_Q", defect_half)
    if defect_half <= tol:
        return ReachabilityClass("in_range_Qhalf_only", defect_half)
    return ReachabilityClass("unreachable", defect_half)


def value_function(gram, x, policy=DEFAULT_POLICY):
    """Minimum steering energy (1/2) ||Q_t^{-1/2} x||^2 for a reachable target.

    Raises ReachabilityError (carrying the defect) when x is outside
    range(Q_t^{1/2}) under the rank policy.
    """
    x = np.asarray(x, dtype=float)
    cls = classify_target(gram, x, policy)
    if not cls.reachable:
        raise ReachabilityError(
            f"target at distance {cls.defect:.3e} from the reachable subspace",
            defect=cls.defect,
        )
    y = gram.Q.sqrt().pinv() @ x
    return 0.5 * float(y @ y)


def _control_grid(t, grid):
    if np.isscalar(grid):
        k = int(grid)
        if k < 2:
            raise ValueError(f"need at least 2 grid nodes, got {k}")
        return np.linspace(-t, 0.0, k)
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or g.size < 2 or np.any(np.diff(g) <= 0):
        raise ValueError("grid must be strictly ascending with >= 2 nodes")
    span = max(t, 1.0)
    if g[0] < -t - 1e-12 * span or g[-1] > 1e-12 * span:
        raise ValueError(f"grid must lie inside [{-t:g}, 0]")
    return g


def optimal_control(sys, gram, x, grid=129, policy=DEFAULT_POLICY):
    """The minimum-energy control u(r) = B^T e^{-r A^T} Q_t^+ x on [-t, 0].

    Requires the target to be in range(Q_t); sampling happens on ``grid``
    (an int node count or an explicit ascending array in [-t, 0]).
    """
    x = np.asarray(x, dtype=float)
    cls = classify_target(gram, x, policy)
    if cls.category != "in_range_Q":
        raise ReachabilityError(
            f"optimal control requires a target in range(Q_t); "
            f"classification was {cls.category!r} with defect {cls.defect:.3e}",
            defect=cls.defect,
        )
    t = gram.horizon
    g = _control_grid(t, grid)
    z = gram.Q.pinv() @ x
    values = np.empty((g.size, sys.m))
    for i, r in enumerate(g):
        values[i] = sys.B.T @ (expm(sys.A.T, -r) @ z)
    return ControlSignal(g, values)


@dataclass(frozen=True)
class Trajectory:
    """States sampled on an ascending grid in [-t, 0]."""

    grid: np.ndarray
    states: np.ndarray         # shape (k, n)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        cols = [np.interp(r, self.grid, self.states[:, j])
                for j in range(self.states.shape[1])]
        return np.stack(cols, axis=-1)


def optimal_trajectory(sys, x, t, grid=129, cache=None, policy=DEFAULT_POLICY):
    """The optimally steered state y(r) = Q_{t+r} e^{-r A^T} Q_t^+ x on [-t, 0].

    Endpoints are exact by construction: Q_0 = 0 gives y(-t) = 0, and at
    r = 0 the Gramian cancels its pseudoinverse on range(Q_t), giving x.
    Intermediate Gramians come from ``cache`` (one solve per time).
    """
    x = np.asarray(x, dtype=float)
    if cache is None:
        cache = GramianCache(policy)
    gram_t = cache.get(sys, t)
    cls = classify_target(gram_t, x, policy)
    if cls.category != "in_range_Q":
        raise ReachabilityError(
            f"optimal trajectory requires a target in range(Q_t); "
            f"classification was {cls.category!r} with defect {cls.defect:.3e}",
            defect=cls.defect,
        )
    g = _control_grid(t, grid)
    z = gram_t.Q.pinv() @ x
    states = np.empty((g.size, sys.n))
    for i, r in enumerate(g):
        s = t + r
        if s <= 0.0 or np.isclose(s, 0.0, atol=1e-14 * max(t, 1.0)):
            states[i] = 0.0
            continue
        Qs = cache.get(sys, s).matrix
        states[i] = Qs @ (expm(sys.A.T, -r) @ z)
    return Trajectory(g, states)


def simulate_control(sys, signal, y_start=None, substeps=8):
    """Integrate y' = Ay + Bu(r) over the signal's grid with RK4.

    The control is the signal's piecewise-linear interpolant; each grid
    interval is subdivided ``substeps`` times.  Returns the trajectory on
    the signal grid.
    """
    y = np.zeros(sys.n) if y_start is None else np.asarray(y_start, dtype=float).copy()
    states = np.empty((signal.grid.size, sys.n))
    states[0] = y

    def f(r, y):
        return sys.A @ y + sys.B @ signal(r)

    for i in range(signal.grid.size - 1):
        r0, r1 = signal.grid[i], signal.grid[i + 1]
        h = (r1 - r0) / substeps
        for k in range(substeps):
            r = r0 + k * h
            k1 = f(r, y)
            k2 = f(r + 0.5 * h, y + 0.5 * h * k1)
            k3 = f(r + 0.5 * h, y + 0.5 * h * k2)
            k4 = f(r + h, y + h * k3)
            y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        states[i + 1] = y
    return Trajectory(signal.grid.copy(), states)


def feedback_gain(sys, s, cache=None, policy=DEFAULT_POLICY):
    """Feedback form of the optimizer: gain F(s) = B^T Q_s^+ at time-to-go s.

    Along an optimal pair, u(r) = F(t + r) y(r).  As s grows in the
    commuting selfadjoint stable case, A + B F(s) approaches -A^T: the
    optimally steered flow reverses the adjoint dynamics.
    """
    if s <= 0.0:
        raise ValueError(f"time-to-go must be positive, got {s}")
    if cache is None:
        cache = GramianCache(policy)
    return sys.B.T @ cache.get(sys, s).Q.pinv()


@dataclass(frozen=True)
class LeastNormControl:
    """Discrete minimum-energy control: piecewise constant on [-t, 0].

    ``energy`` uses the exact interval-weighted quadratic form
    (1/2) Σ h_k ||u_k||^2, and ``edges``/``values`` give the intervals and
    the constant value on each.
    """

    energy: float
    edges: np.ndarray          # shape (N+1,)
    values: np.ndarray         # shape (N, m)


def brute_force_min_energy(sys, x, t, n_steps, feas_rtol=1e-8):
    """Least-norm piecewise-constant steering oracle.

    Builds the exact control-to-state map for piecewise-constant inputs on a
    uniform grid (per-interval integrals of the exponential are computed via
    the augmented-matrix exponential, not by quadrature), then solves the
    interval-length-weighted least-norm problem.  Converges to the true
    value from above as the grid refines.
    """
    x = np.asarray(x, dtype=float)
    t = float(t)
    if t <= 0.0 or not np.isfinite(t):
        raise ValueError(f"horizon must be positive and finite, got {t}")
    n_steps = int(n_steps)
    if n_steps < 1:
        raise ValueError("need at least one step")
    n, m = sys.n, sys.m
    h = t / n_steps
    # one-step quantities: e^{hA} and Phi = ∫_0^h e^{sA} ds B, both exact
    aug = np.zeros((2 * n, 2 * n))
    aug[:n, :n] = sys.A
    aug[:n, n:] = np.eye(n)
    E_aug = expm(aug, h)
    E_h = E_aug[:n, :n]
    Phi = E_aug[:n, n:] @ sys.B
    # interval k ends at -t + (k+1)h; its contribution is e^{(t-(k+1)h)A} Phi
    blocks = [None] * n_steps
    Ek = np.eye(n)
    for k in range(n_steps - 1, -1, -1):
        blocks[k] = Ek @ Phi
        Ek = Ek @ E_h
    L = np.hstack(blocks)
    # interval-length weighting: substitute v = sqrt(h) u
    Lv = L / np.sqrt(h)
    v = pinv(Lv) @ x
    resid = float(np.linalg.norm(Lv @ v - x))
    if resid > feas_rtol * max(np.linalg.norm(x), 1e-300):
        raise ReachabilityError(
            f"target not reachable on the discrete control space: defect {resid:.3e}",
            defect=resid,
        )
    u = (v / np.sqrt(h)).reshape(n_steps, m)
    edges = np.linspace(-t, 0.0, n_steps + 1)
    return LeastNormControl(energy=0.5 * float(v @ v), edges=edges, values=u)


@dataclass(frozen=True)
class NullControllability:
    """Range-test verdict: can every free state at time T0 be steered to zero.

    ``constant`` is the smallest c with ||e^{T0 A^T} x||^2 <= c <Q_{T0} x, x>
    (finite exactly when the verdict holds).
    """

    satisfied: bool
    constant: float
    defect: float


def null_controllability_test(sys, T0, policy=DEFAULT_POLICY):
    """Test range(e^{T0 A}) ⊆ range(Q_{T0}^{1/2}) and compute its constant."""
    T0 = float(T0)
    if T0 <= 0.0 or not np.isfinite(T0):
        raise ValueError(f"T0 must be positive and finite, got {T0}")
    S = compute_gramian(sys, T0, policy=policy).Q.sqrt().matrix
    incl = range_inclusion(expm(sys.A, T0), S, policy)
    constant = incl.constant ** 2 if incl.included else np.inf
    return NullControllability(incl.included, float(constant), incl.defect)


class HGeometry:
    """The state space re-normed by the infinite-horizon Gramian.

    The norm is ||x||_H = ||Q_inf^{-1/2} x||; membership in H means lying in
    range(Q_inf^{1/2}).  Operators that are selfadjoint in this geometry
    satisfy M = Q_inf M^T Q_inf^{-1} on H.
    """

    def __init__(self, gram, policy=DEFAULT_POLICY):
        if not np.isinf(gram.horizon):
            raise ValueError("HGeometry needs an infinite-horizon Gramian")
        self.gram = gram
        self.policy = policy
        root = gram.Q.sqrt()
        self.sqrt_matrix = root.matrix
        self.pinv_sqrt = root.pinv()
        self.metric = gram.Q.pinv()       # = pinv_sqrt^T pinv_sqrt
        self.projector = gram.Q.range_projector()

    @property
    def Q_inf(self):
        return self.gram.matrix

    def defect(self, x):
        """Distance from x to the space (range of Q_inf^{1/2})."""
        x = np.asarray(x, dtype=float)
        return float(np.linalg.norm(x - self.projector @ x))

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return self.defect(x) <= self.policy.rel_threshold * max(np.linalg.norm(x), 1e-300)

    def inner(self, x, y):
        return float(np.asarray(x, dtype=float) @ (self.metric @ np.asarray(y, dtype=float)))

    def norm(self, x):
        return float(np.linalg.norm(self.pinv_sqrt @ np.asarray(x, dtype=float)))

    def normalize(self, x):
        nx = self.norm(x)
        if nx == 0.0:
            raise ValueError("cannot normalize a zero vector")
        return np.asarray(x, dtype=float) / nx

    def adjoint(self, M):
        """Adjoint of M in this geometry: Q_inf M^T Q_inf^+ (acting on the space)."""
        return self.Q_inf @ np.asarray(M, dtype=float).T @ self.gram.Q.pinv()

    def symmetry_defect(self, M, rng=None, n_probes=8):
        """Max |<Mx,y>_H - <x,My>_H| over probe pairs, scaled by probe norms."""
        rng = np.random.default_rng(0) if rng is None else rng
        U = self.gram.Q.range_basis()
        worst = 0.0
        for _ in range(n_probes):
            x = U @ rng.standard_normal(U.shape[1])
            y = U @ rng.standard_normal(U.shape[1])
            x = self.normalize(x)
            y = self.normalize(y)
            worst = max(worst, abs(self.inner(M @ x, y) - self.inner(x, M @ y)))
        return worst


def h_norm(geom, x):
    """Norm of x in the Gramian-weighted geometry; error if x is outside it."""
    x = np.asarray(x, dtype=float)
    d = geom.defect(x)
    if d > geom.policy.rel_threshold * max(np.linalg.norm(x), 1e-300):
        raise NotInSpaceError(
            f"vector is outside the weighted space: defect {d:.3e}", defect=d
        )
    return geom.norm(x)
