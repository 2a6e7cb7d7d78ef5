"""Dense complex Hermitian kernel: eigendecomposition, spectral functions, isometry completion.

Everything downstream (states, channels, measures, dilations) is built on the
four operations here.  All tolerances are keyword arguments with the package
defaults below.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

HERMITICITY_TOL = 1e-10
EIGENVALUE_CLAMP = 1e-10
ZERO_EIGENVALUE_TRIM = 1e-14
ISOMETRY_TOL = 1e-10


class Spectrum(NamedTuple):
    """Eigendecomposition A = U diag(w) U† with w real ascending and U unitary."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def asymmetry(A: np.ndarray) -> float:
    """Max elementwise deviation from Hermiticity, max|A - A†|."""
    A = np.asarray(A)
    return float(np.abs(A - A.conj().T).max())


def require_hermitian(A, tol: float = HERMITICITY_TOL) -> np.ndarray:
    """Return A as a complex array, raising if it is not square Hermitian."""
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if not np.isfinite(A).all():
        raise ValueError("matrix has non-finite entries")
    dev = asymmetry(A)
    if dev > tol:
        raise ValueError(
            f"matrix is not Hermitian: max|A - A†| = {dev:.3e} exceeds {tol:.1e}"
        )
    return A


def hermitian_eig(H, tol: float = HERMITICITY_TOL) -> Spectrum:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending."""
    H = require_hermitian(H, tol)
    w, U = np.linalg.eigh(H)
    return Spectrum(w, U)


def psd_sqrt(
    A,
    tol: float = HERMITICITY_TOL,
    clamp: float = EIGENVALUE_CLAMP,
    trim: float = ZERO_EIGENVALUE_TRIM,
) -> np.ndarray:
    """Square root U sqrt(L) U† of a Hermitian PSD matrix A = U L U†.

    Eigenvalues in [-clamp, 0) are treated as round-off and clamped to zero;
    anything more negative raises.  Magnitudes at or below `trim` are zeroed
    as well: an exact-zero eigenvalue computes as ~1e-16 noise whose square
    root (~1e-8) would otherwise pollute products of square roots.
    """
    w, U = hermitian_eig(A, tol)
    if w.size and w[0] < -clamp:
        raise ValueError(
            f"matrix is not positive semidefinite: eigenvalue {w[0]:.3e} < -{clamp:.1e}"
        )
    w = np.where(w <= trim, 0.0, w)
    s = np.sqrt(w)
    return (U * s) @ U.conj().T


def trace_abs(A, tol: float = HERMITICITY_TOL) -> float:
    """Trace norm tr|A| of a Hermitian matrix: sum of absolute eigenvalues."""
    A = require_hermitian(A, tol)
    return float(np.abs(np.linalg.eigvalsh(A)).sum())


def complete_isometry(V, tol: float = ISOMETRY_TOL) -> np.ndarray:
    """Extend an isometry V (shape (d*n, n), V†V = I) to a full unitary.

    The first n columns of the result are V exactly as given; the remaining
    columns are an orthonormal basis of the orthogonal complement of col(V),
    obtained from a complete QR factorization (deterministic).
    """
    V = np.asarray(V, dtype=complex)
    if V.ndim != 2 or V.shape[0] < V.shape[1]:
        raise ValueError(f"expected a tall matrix, got shape {V.shape}")
    rows, n = V.shape
    dev = float(np.abs(V.conj().T @ V - np.eye(n)).max())
    if dev > tol:
        raise ValueError(f"not an isometry: max|V†V - I| = {dev:.3e} exceeds {tol:.1e}")
    if rows == n:
        return V.copy()
    Q = np.linalg.qr(V, mode="complete")[0]
    return np.hstack([V, Q[:, n:]])
