"""Dense complex matrix kernel.

Thin wrappers over numpy/scipy that add the conditioning checks the
transport code relies on. Matrices are plain ``numpy.ndarray`` objects of
dtype ``complex128``.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg


COND_LIMIT = 1e12
EXP_NORM_LIMIT = 1e4


class MatrixError(ArithmeticError):
    pass


class NonDiagonalizable(MatrixError):
    def __init__(self, condition):
        self.condition = condition
        super().__init__(f"eigenvector matrix is ill-conditioned (cond = {condition:.3e})")


class SingularMatrix(MatrixError):
    def __init__(self, condition):
        self.condition = condition
        super().__init__(f"matrix is singular to working precision (cond = {condition:.3e})")


class Overflow(MatrixError):
    def __init__(self, norm, limit):
        self.norm = norm
        super().__init__(f"exponent norm {norm:.3e} exceeds configured bound {limit:.3e}; check the time step")


def as_cmatrix(a):
    """Coerce ``a`` to a square, finite complex128 array."""
    m = np.atleast_2d(np.asarray(a, dtype=np.complex128))
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def is_hermitian(a, tol=1e-12):
    """True when ``||a - a^H||_F <= tol * max(1, ||a||_F)``."""
    a = np.asarray(a)
    return np.linalg.norm(a - a.conj().T) <= tol * max(1.0, np.linalg.norm(a))


def hermiticity_defect(a):
    a = np.asarray(a)
    return float(np.linalg.norm(a - a.conj().T))


@dataclass(frozen=True)
class EigDecomposition:
    """Right eigenvectors ``vectors`` and their inverse, ``A = V diag(w) V^-1``."""

    eigenvalues: np.ndarray
    vectors: np.ndarray
    inverse: np.ndarray

    @property
    def dim(self):
        return self.eigenvalues.shape[0]

    def apply(self, diag_values):
        """Return ``V diag(diag_values) V^-1``."""
        return (self.vectors * diag_values) @ self.inverse

    def conjugate(self, middle):
        """Return ``V middle V^-1`` for a full matrix ``middle``."""
        return self.vectors @ middle @ self.inverse

    def shifted(self, shift):
        """Decomposition of ``A + shift * I``; eigenvectors are shared."""
        return EigDecomposition(self.eigenvalues + shift, self.vectors, self.inverse)

    def reconstruct(self):
        return self.apply(self.eigenvalues)


def eig_general(a, cond_limit=COND_LIMIT):
    """Eigendecomposition of a general complex matrix.

    Raises
    ------
    NonDiagonalizable
        If the eigenvector matrix has a 2-norm condition number above
        ``cond_limit``.
    """
    a = as_cmatrix(a)
    w, v = np.linalg.eig(a)
    # unit-norm columns keep the condition number meaningful
    v = v / np.linalg.norm(v, axis=0)
    cond = np.linalg.cond(v)
    if not np.isfinite(cond) or cond > cond_limit:
        raise NonDiagonalizable(cond)
    return EigDecomposition(w, v, np.linalg.inv(v))


def mat_exp(a, norm_limit=EXP_NORM_LIMIT):
    """Matrix exponential by scaling and squaring (Pade)."""
    a = as_cmatrix(a)
    norm = np.linalg.norm(a, 1)
    if norm > norm_limit:
        raise Overflow(norm, norm_limit)
    return scipy.linalg.expm(a)


def solve(a, b, cond_limit=COND_LIMIT):
    """Solve ``a @ x = b`` for ``x``; ``b`` may be a vector or a matrix."""
    a = as_cmatrix(a)
    b = np.asarray(b, dtype=np.complex128)
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > cond_limit:
        raise SingularMatrix(cond)
    return np.linalg.solve(a, b)


def anticommutator(a, b):
    return a @ b + b @ a


def commutator(a, b):
    return a @ b - b @ a
