"""Finite-dimensional linear control systems x' = Ax + Bu."""

import hashlib
import json

import numpy as np

from .linalg import as_matrix, commutes

__all__ = ["LinearSystem", "random_stable_system"]


class LinearSystem:
    """State matrix A (n x n) and input matrix B (n x m).

    The decay margin ``omega = max(0, -max Re lambda(A))`` is computed once;
    ``omega > 0`` means the flow is uniformly exponentially stable, which is
    what infinite-horizon computations require.
    """

    def __init__(self, A, B):
        A = as_matrix(A, "A")
        B = as_matrix(B, "B")
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got {A.shape}")
        if B.ndim != 2 or B.shape[0] != A.shape[0]:
            raise ValueError(
                f"B must have one row per state: A is {A.shape}, B is {B.shape}"
            )
        self.A = A.copy()
        self.B = B.copy()
        self.A.setflags(write=False)
        self.B.setflags(write=False)
        self.n = A.shape[0]
        self.m = B.shape[1]
        self.omega = float(max(0.0, -np.max(np.linalg.eigvals(self.A).real)))

    @property
    def BBt(self):
        return self.B @ self.B.T

    @property
    def stable(self):
        return self.omega > 0.0

    def is_commuting_selfadjoint(self, tol=1e-10):
        """True when A is symmetric and commutes with B B^T.

        This is the regime in which the Gramians have entrywise closed forms
        and the quadratic operator family admits the exponential solution
        formula.
        """
        scale = np.abs(self.A).max()
        sym = scale == 0.0 or np.abs(self.A - self.A.T).max() <= tol * scale
        return bool(sym and commutes(self.A, self.BBt, tol))

    def fingerprint(self):
        """Stable hex digest of (A, B), used to tag derived quantities."""
        h = hashlib.sha256()
        h.update(np.array(self.A.shape, dtype=np.int64).tobytes())
        h.update(np.ascontiguousarray(self.A).tobytes())
        h.update(np.array(self.B.shape, dtype=np.int64).tobytes())
        h.update(np.ascontiguousarray(self.B).tobytes())
        return h.hexdigest()[:16]

    def to_json_dict(self):
        return {"A": self.A.tolist(), "B": self.B.tolist()}

    @classmethod
    def from_json_dict(cls, data):
        if not isinstance(data, dict) or "A" not in data or "B" not in data:
            raise ValueError("system description must be an object with 'A' and 'B'")
        return cls(np.asarray(data["A"], dtype=float), np.asarray(data["B"], dtype=float))

    @classmethod
    def from_json(cls, text):
        return cls.from_json_dict(json.loads(text))

    def __repr__(self):
        return f"LinearSystem(n={self.n}, m={self.m}, omega={self.omega:.4g})"


def random_stable_system(rng, n, m=None, margin=0.5, coupling=1.0):
    """Draw a random exponentially stable, almost-surely controllable system.

    A dense Gaussian matrix is shifted left so its spectral abscissa sits at
    ``-margin``; B is dense Gaussian, which makes (A, B) controllable with
    probability one.
    """
    if m is None:
        m = max(1, n // 2)
    G = rng.standard_normal((n, n)) * (coupling / np.sqrt(n))
    abscissa = np.max(np.linalg.eigvals(G).real)
    A = G - (abscissa + margin) * np.eye(n)
    B = rng.standard_normal((n, m)) / np.sqrt(n)
    return LinearSystem(A, B)
