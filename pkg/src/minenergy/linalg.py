"""Dense linear-algebra kernels: exponentials, rank-aware pseudoinverses,
PSD square roots, commutation and range-inclusion tests.

All range/kernel decisions in the package go through one relative rank
policy so that "numerically zero" means the same thing everywhere: a
singular value (or eigenvalue) is treated as zero when it is at most
``rel_threshold`` times the largest one.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NotPSDError, NotSymmetricError, PreconditionError

__all__ = [
    "RankPolicy",
    "DEFAULT_POLICY",
    "SymmetricPSD",
    "RangeInclusion",
    "as_matrix",
    "expm",
    "pinv",
    "psd_sqrt",
    "commutes",
    "range_inclusion",
    "commuting_pinv_compose",
    "negative_type_bound",
]

SYMMETRY_RTOL = 1e-12


@dataclass(frozen=True)
class RankPolicy:
    """Relative cutoff deciding which singular values count as zero."""

    rel_threshold: float = 1e-10

    def __post_init__(self):
        if not (0.0 < self.rel_threshold < 1.0):
            raise ValueError(
                f"rel_threshold must lie strictly between 0 and 1, got {self.rel_threshold}"
            )

    def cutoff(self, largest):
        return self.rel_threshold * largest


DEFAULT_POLICY = RankPolicy()


def as_matrix(M, name="matrix"):
    """Coerce to a 2-d float array and reject non-finite entries."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} contains non-finite entries")
    return M


def _sym_error(M):
    scale = np.abs(M).max()
    if scale == 0.0:
        return 0.0
    return np.abs(M - M.T).max() / scale


class SymmetricPSD:
    """A symmetric positive-semidefinite matrix with a cached eigendecomposition.

    Construction validates symmetry (relative deviation at most 1e-12) and
    clips slightly negative eigenvalues to zero: an eigenvalue in
    ``[-rank_tol * lam_max, 0)`` is attributed to roundoff, anything more
    negative raises ``NotPSDError``.

    Parameters
    ----------
    entries : (n, n) array_like
        Symmetric matrix.
    policy : RankPolicy, optional
        Relative threshold used both for the clip above and for all
        rank/range decisions made through this object.
    """

    def __init__(self, entries, policy=DEFAULT_POLICY):
        M = as_matrix(entries, "SymmetricPSD entries")
        n, m = M.shape
        if n != m:
            raise ValueError(f"matrix must be square, got shape {M.shape}")
        err = _sym_error(M)
        if err > SYMMETRY_RTOL:
            raise NotSymmetricError(
                f"matrix is not symmetric: relative asymmetry {err:.3e} exceeds {SYMMETRY_RTOL:.1e}"
            )
        M = 0.5 * (M + M.T)
        lam, V = np.linalg.eigh(M)
        lam_max = max(lam[-1], 0.0)
        floor = -policy.cutoff(lam_max) if lam_max > 0 else 0.0
        if np.any(lam < floor):
            worst = lam.min()
            raise NotPSDError(
                f"matrix has eigenvalue {worst:.6e} below the roundoff floor "
                f"{floor:.6e}; not positive semidefinite"
            )
        lam = np.where(lam < 0.0, 0.0, lam)
        self._policy = policy
        self._lam = lam
        self._V = V
        self._M = (V * lam) @ V.T
        self._M = 0.5 * (self._M + self._M.T)
        for arr in (self._lam, self._V, self._M):
            arr.setflags(write=False)

    @property
    def matrix(self):
        return self._M

    @property
    def policy(self):
        return self._policy

    @property
    def eigenvalues(self):
        """Eigenvalues in ascending order (negatives already clipped)."""
        return self._lam

    @property
    def eigenvectors(self):
        """Orthonormal eigenvectors, columns matching ``eigenvalues``."""
        return self._V

    @property
    def shape(self):
        return self._M.shape

    def _keep(self):
        lam_max = self._lam[-1] if self._lam.size else 0.0
        if lam_max <= 0.0:
            return np.zeros_like(self._lam, dtype=bool)
        return self._lam > self._policy.cutoff(lam_max)

    @property
    def rank(self):
        """Rank under the policy threshold."""
        return int(np.count_nonzero(self._keep()))

    def range_basis(self):
        """Orthonormal basis of the range (columns), per the rank policy."""
        return self._V[:, self._keep()]

    def kernel_basis(self):
        return self._V[:, ~self._keep()]

    def range_projector(self):
        U = self.range_basis()
        return U @ U.T

    def pinv(self):
        """Moore-Penrose pseudoinverse under the rank policy."""
        keep = self._keep()
        inv = np.zeros_like(self._lam)
        inv[keep] = 1.0 / self._lam[keep]
        P = (self._V * inv) @ self._V.T
        return 0.5 * (P + P.T)

    def sqrt(self):
        """The PSD square root, with sub-threshold eigenvalues zeroed.

        Zeroing keeps the root's kernel equal to the matrix kernel under the
        rank policy (a raw sqrt would promote noise eigenvalues across the
        threshold).
        """
        keep = self._keep()
        root = np.where(keep, np.sqrt(self._lam), 0.0)
        S = (self._V * root) @ self._V.T
        return SymmetricPSD(0.5 * (S + S.T), self._policy)

    def apply(self, x):
        return self._M @ x

    def range_defect(self, x):
        """Euclidean distance from x to the range (policy rank)."""
        x = np.asarray(x, dtype=float)
        U = self.range_basis()
        return float(np.linalg.norm(x - U @ (U.T @ x)))


def expm(A, t=1.0):
    """Matrix exponential ``e^{tA}``.

    Diagonal matrices take an exact entrywise path; general matrices go
    through scaling-and-squaring (scipy).  Negative ``t`` is allowed: a
    square matrix always generates a group, so the backward flow is
    well-defined here (unlike for genuinely unbounded generators).
    """
    A = as_matrix(A, "A")
    n, m = A.shape
    if n != m:
        raise ValueError(f"matrix exponential needs a square matrix, got {A.shape}")
    if not np.isfinite(t):
        raise ValueError(f"t must be finite, got {t}")
    d = np.diagonal(A)
    if np.count_nonzero(A - np.diag(d)) == 0:
        return np.diag(np.exp(t * d))
    return scipy.linalg.expm(t * A)


def pinv(M, policy=DEFAULT_POLICY):
    """Moore-Penrose pseudoinverse with the relative rank cutoff of ``policy``.

    Singular values at or below ``rel_threshold * sigma_max`` are treated as
    zero.  The all-zero matrix maps to the all-zero matrix of transposed
    shape.
    """
    M = as_matrix(M, "M")
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((M.shape[1], M.shape[0]))
    keep = s > policy.cutoff(s[0])
    inv = np.zeros_like(s)
    inv[keep] = 1.0 / s[keep]
    return (Vt.T * inv) @ U.T


def psd_sqrt(M, policy=DEFAULT_POLICY):
    """Symmetric PSD square root of a symmetric PSD matrix (ndarray in, ndarray out).

    Accepts either a SymmetricPSD or raw entries; sub-threshold eigenvalues
    are zeroed so that kernel(S) = kernel(M) under the rank policy.
    """
    if not isinstance(M, SymmetricPSD):
        M = SymmetricPSD(M, policy)
    return M.sqrt().matrix


def commutes(A, K, tol=1e-10):
    """Whether ``AK = KA`` up to ``tol`` relative to the product of norms.

    For matrices this is equivalent to the exponential commutation
    ``e^{tA} K = K e^{tA}`` for all t (one implies the other by the power
    series); tests exercise that equivalence on sampled times.
    """
    A = as_matrix(A, "A")
    K = as_matrix(K, "K")
    if A.shape[0] != A.shape[1] or A.shape != K.shape:
        raise ValueError(f"commutation needs equal square shapes, got {A.shape} and {K.shape}")
    scale = np.abs(A).max() * np.abs(K).max()
    if scale == 0.0:
        return True
    resid = np.abs(A @ K - K @ A).max()
    return bool(resid <= tol * scale)


@dataclass(frozen=True)
class RangeInclusion:
    """Outcome of a range-inclusion test ``range(A1) ⊆ range(A2)``.

    ``constant`` is the smallest k with ``||A1^T x|| <= k ||A2^T x||`` for
    all x (finite iff the inclusion holds); ``defect`` is the spectral norm
    of the part of A1 sticking out of range(A2).
    """

    included: bool
    constant: float
    defect: float


def range_inclusion(A1, A2, policy=DEFAULT_POLICY):
    """Test ``range(A1) ⊆ range(A2)`` and compute the smallest norm-domination constant.

    The inclusion holds exactly when there is a finite k with
    ``||A1^T x|| <= k ||A2^T x||`` for every x; the returned ``constant`` is
    the smallest such k, computed as ``||A1^T U (A2^T U)^+||`` with U an
    orthonormal basis of range(A2).  Decision rule: the projection defect
    ``||(I - P_range(A2)) A1||`` must be at most ``rel_threshold * ||A1||``.
    """
    A1 = as_matrix(A1, "A1")
    A2 = as_matrix(A2, "A2")
    if A1.shape[0] != A2.shape[0]:
        raise ValueError(
            f"operators must share their codomain: got {A1.shape[0]} and {A2.shape[0]} rows"
        )
    U2, s2, _ = np.linalg.svd(A2, full_matrices=False)
    norm1 = np.linalg.norm(A1, 2)
    if s2.size == 0 or s2[0] == 0.0:
        # range(A2) = {0}: included iff A1 = 0
        included = norm1 == 0.0
        return RangeInclusion(included, 0.0 if included else np.inf, float(norm1))
    U = U2[:, s2 > policy.cutoff(s2[0])]
    resid = A1 - U @ (U.T @ A1)
    defect = float(np.linalg.norm(resid, 2))
    included = defect <= policy.rel_threshold * max(norm1, s2[0])
    if not included:
        return RangeInclusion(False, np.inf, defect)
    M1 = A1.T @ U
    M2 = A2.T @ U
    k = float(np.linalg.norm(M1 @ pinv(M2, policy), 2))
    return RangeInclusion(True, k, defect)


def commuting_pinv_compose(A1, A2, policy=DEFAULT_POLICY):
    """Return ``A2^+ A1`` for commuting A1, A2 with ``range(A1) ⊆ range(A2)``.

    Under those preconditions the pseudoinverse slides past A1, so the
    result agrees with ``A1 A2^+`` on range(A2) — the compositions commute
    where it matters.  A2 must be symmetric PSD.
    """
    A1 = as_matrix(A1, "A1")
    if not isinstance(A2, SymmetricPSD):
        A2 = SymmetricPSD(A2, policy)
    if not commutes(A1, A2.matrix):
        raise PreconditionError("A1 and A2 do not commute")
    incl = range_inclusion(A1, A2.matrix, policy)
    if not incl.included:
        raise PreconditionError(
            f"range(A1) is not contained in range(A2): defect {incl.defect:.3e}"
        )
    return A2.pinv() @ A1


def negative_type_bound(A, omega=None, t_max=1.0, n_samples=201):
    """Estimate (M, omega) with ``||e^{tA}|| <= M e^{-omega t}`` on samples.

    ``omega`` defaults to the spectral margin ``-max Re lambda(A)``; M is the
    sampled supremum of ``||e^{tA}|| e^{omega t}`` over ``[0, t_max]``.
    """
    A = as_matrix(A, "A")
    if omega is None:
        omega = float(-np.max(np.linalg.eigvals(A).real))
    ts = np.linspace(0.0, t_max, n_samples)
    M = max(np.linalg.norm(expm(A, t), 2) * np.exp(omega * t) for t in ts)
    return float(M), float(omega)
