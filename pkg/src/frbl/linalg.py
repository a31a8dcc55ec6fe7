"""Dense symmetric linear algebra on small matrices.

Every matrix in this package (weight maps, feasibility iterates, Gaussian
quadratic forms) has dimension of order ten, so plain dense
eigendecomposition-based routines are used throughout.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "DEFAULT_LOEWNER_TOL",
    "SymMatrix",
    "loewner_geq",
    "psd_project",
    "sqrt_psd",
    "sym_eig",
]

# Absolute tolerance on the minimum eigenvalue for Loewner-order checks when
# the caller does not pin one explicitly.
DEFAULT_LOEWNER_TOL = 1e-9

# How far below zero an eigenvalue may sit before a matrix stops counting as
# positive semidefinite for square-root purposes.
PSD_TOL = 1e-10


class SymMatrix:
    """A real symmetric matrix.

    The upper triangle of the input is mirrored onto the lower one, so the
    stored matrix is exactly symmetric even when the input carries rounding
    asymmetry (products such as ``Q @ sigma @ Q.T`` routinely do).
    """

    __slots__ = ("mat",)

    def __init__(self, entries) -> None:
        m = np.array(entries, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("matrix entries must all be finite")
        sym = np.triu(m) + np.triu(m, 1).T
        sym.setflags(write=False)
        self.mat = sym

    @classmethod
    def identity(cls, dim: int) -> "SymMatrix":
        return cls(np.eye(dim))

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.mat)[0])

    def __array__(self, dtype=None, copy=None):
        if dtype is not None:
            return self.mat.astype(dtype)
        return self.mat

    def __repr__(self) -> str:
        return f"SymMatrix({self.mat.tolist()!r})"


def sym_eig(m: SymMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues in ascending order and orthonormal eigenvectors of ``m``.

    The reconstruction ``V @ diag(w) @ V.T`` matches ``m`` to relative
    precision around 1e-12 of its Frobenius norm.
    """
    return np.linalg.eigh(m.mat)


def loewner_geq(a: SymMatrix, b: SymMatrix, tol: float = DEFAULT_LOEWNER_TOL) -> bool:
    """True iff ``a - b`` is positive semidefinite up to ``-tol``.

    ``tol`` is an absolute slack on the minimum eigenvalue of the difference.
    """
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    w = np.linalg.eigvalsh(a.mat - b.mat)
    return bool(w[0] >= -tol)


def psd_project(m: SymMatrix) -> SymMatrix:
    """Frobenius-nearest positive semidefinite matrix.

    Negative eigenvalues are clipped to zero, everything else is kept.
    """
    w, v = np.linalg.eigh(m.mat)
    w = np.clip(w, 0.0, None)
    return SymMatrix((v * w) @ v.T)


def sqrt_psd(m: SymMatrix, tol: float = PSD_TOL) -> SymMatrix:
    """The unique positive semidefinite square root of a PSD matrix.

    Eigenvalues in ``[-tol, 0)`` are treated as rounding noise and clipped;
    anything below ``-tol`` raises.
    """
    w, v = np.linalg.eigh(m.mat)
    if w[0] < -tol:
        raise ValueError(
            f"matrix is not positive semidefinite (min eigenvalue {w[0]:.3e})"
        )
    w = np.clip(w, 0.0, None)
    return SymMatrix((v * np.sqrt(w)) @ v.T)
