"""Dense complex linear-algebra helpers shared by the rest of the package.

Matrices are plain ``numpy`` arrays of dtype ``complex128``.  Density matrices
and pure states are validated on entry by :func:`as_density` and
:func:`as_pure` rather than wrapped in classes.
"""

from __future__ import annotations

import numpy as np
from scipy import linalg as sla

from .errors import DimensionMismatch, NotSquare, RankDeficientInconsistent

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
EIGEN_TOL = 1e-10
EIGEN_FLOOR = 1e-13


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix contains non-finite entries")
    return m


def as_pure(psi, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Return ``psi`` as a normalized 1-D complex vector, or raise."""
    v = np.asarray(psi, dtype=complex).reshape(-1)
    norm2 = float(np.vdot(v, v).real)
    if abs(norm2 - 1.0) > tol:
        raise ValueError(f"state is not normalized (|psi|^2 = {norm2!r})")
    return v


def as_density(rho, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Validate a density matrix: Hermitian, unit trace, positive semidefinite."""
    m = as_matrix(rho)
    if m.shape[0] != m.shape[1]:
        raise NotSquare(f"density matrix must be square, got {m.shape}")
    if np.max(np.abs(m - m.conj().T)) > tol:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(m) - 1.0) > TRACE_TOL:
        raise ValueError(f"density matrix trace is {np.trace(m)!r}")
    if np.min(np.linalg.eigvalsh(m)) < -EIGEN_TOL:
        raise ValueError("density matrix has a negative eigenvalue")
    return m


def projector(psi) -> np.ndarray:
    v = np.asarray(psi, dtype=complex).reshape(-1)
    return np.outer(v, v.conj())


def kron(a, b) -> np.ndarray:
    return np.kron(as_matrix(a), as_matrix(b))


def schur(a, b) -> np.ndarray:
    """Entry-wise (Hadamard) product."""
    a, b = as_matrix(a), as_matrix(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"schur product needs equal shapes, got {a.shape} and {b.shape}")
    return a * b


def trace_norm(a) -> float:
    """Sum of singular values, tr sqrt(A^dagger A)."""
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise NotSquare(f"trace norm needs a square matrix, got {a.shape}")
    return float(np.sum(np.linalg.svd(a, compute_uv=False)))


def numeric_rank(a, tol: float | None = None) -> int:
    """Number of singular values above ``tol``.

    The default threshold is ``1e-10`` times the largest singular value.
    """
    sv = np.linalg.svd(as_matrix(a), compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    if tol is None:
        tol = 1e-10 * sv[0]
    return int(np.sum(sv > tol))


def min_norm_solve(coeffs, rhs, rtol: float = 1e-10, rcond: float = 1e-10):
    """Minimum-norm least-squares solution of ``coeffs @ x = rhs``.

    Singular values below ``rcond`` times the largest one are treated as zero
    (pseudo-inverse semantics).

    Returns
    -------
    x : ndarray
        The solution of smallest Euclidean norm.
    residual : float
        ``|coeffs @ x - rhs|``.

    Raises
    ------
    RankDeficientInconsistent
        If the residual exceeds ``rtol * |rhs|``.
    """
    a = as_matrix(coeffs)
    b = np.asarray(rhs, dtype=complex).reshape(-1)
    if a.shape[0] != b.shape[0]:
        raise DimensionMismatch(f"coefficient rows {a.shape[0]} != rhs length {b.shape[0]}")
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    keep = s > rcond * s[0] if s.size and s[0] > 0 else np.zeros_like(s, dtype=bool)
    inv = np.zeros_like(s)
    inv[keep] = 1.0 / s[keep]
    x = vh.conj().T @ (inv * (u.conj().T @ b))
    residual = float(np.linalg.norm(a @ x - b))
    if residual > rtol * max(float(np.linalg.norm(b)), np.finfo(float).tiny):
        raise RankDeficientInconsistent(
            f"system inconsistent: residual {residual:.3e} exceeds {rtol:.1e}*|rhs|", residual
        )
    return x, residual


def null_space(a, rcond: float = 1e-10) -> np.ndarray:
    """Orthonormal basis (as columns) of the right null space of ``a``."""
    return sla.null_space(as_matrix(a), rcond=rcond)


def fidelity(target, state) -> float:
    """Overlap <psi|rho|psi> of a pure target with a density matrix."""
    psi = np.asarray(target, dtype=complex).reshape(-1)
    rho = as_matrix(state)
    if rho.shape != (psi.size, psi.size):
        raise DimensionMismatch(f"state of shape {rho.shape} does not match target of dim {psi.size}")
    return float(np.vdot(psi, rho @ psi).real)


def state_fidelity(rho, sigma) -> float:
    """Uhlmann fidelity (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2 for mixed states."""
    rho, sigma = as_matrix(rho), as_matrix(sigma)
    if rho.shape != sigma.shape:
        raise DimensionMismatch(f"shapes {rho.shape} and {sigma.shape} differ")
    # eigen-decomposition keeps the square roots Hermitian
    # eigenvalues at rounding level are zeroed so rank-deficient inputs stay accurate
    w, v = np.linalg.eigh(rho)
    w = np.where(w > EIGEN_FLOOR * max(w.max(), 0.0), w, 0.0)
    root = (v * np.sqrt(w)) @ v.conj().T
    inner = np.linalg.eigvalsh(root @ sigma @ root)
    inner = np.where(inner > EIGEN_FLOOR * max(inner.max(), 0.0), inner, 0.0)
    return float(np.sum(np.sqrt(inner)) ** 2)


def is_unitary(u, tol: float = 1e-10) -> bool:
    u = as_matrix(u)
    return u.shape[0] == u.shape[1] and np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) <= tol


def haar_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random pure state of dimension ``dim``."""
    z = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return z / np.linalg.norm(z)


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_density(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random density matrix drawn from the induced (Ginibre) measure."""
    k = dim if rank is None else rank
    g = rng.standard_normal((dim, k)) + 1j * rng.standard_normal((dim, k))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real
