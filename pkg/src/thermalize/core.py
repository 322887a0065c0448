"""Small dense complex matrix algebra and density-matrix validity checks.

States are plain ``numpy`` arrays: a density matrix is an ``(n, n)`` complex
array, a pure state a length-``n`` complex vector. The helpers here check the
physical invariants and provide the Hermitian spectral tools the rest of the
package builds on.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import (
    DomainError,
    InvalidDensityMatrix,
    NoConvergence,
    NormalizationError,
    NotHermitian,
)

TOL_HERM = 1e-10
TOL_TRACE = 1e-10
TOL_PSD = 1e-10
TOL_REPAIRABLE = 1e-6
TOL_NORM = 1e-12
MAX_DIM = 8

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
# lowering operator |0><1|: |0> is the ground state
SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_PLUS = SIGMA_MINUS.conj().T.copy()


def as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def hermiticity_residual(m: np.ndarray) -> float:
    return float(np.max(np.abs(m - m.conj().T)))


def hermitian_eigendecomposition(m, tol: float = TOL_HERM) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenvector columns of a Hermitian matrix.

    Raises
    ------
    NotHermitian
        If ``max |m_ij - conj(m_ji)|`` exceeds ``tol``.
    NoConvergence
        If LAPACK fails to converge.
    """
    a = as_matrix(m)
    if hermiticity_residual(a) > tol:
        raise NotHermitian(f"hermiticity residual {hermiticity_residual(a):.3e} > {tol:g}")
    a = 0.5 * (a + a.conj().T)
    try:
        evals, evecs = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(str(exc)) from exc
    return evals, evecs


def matrix_function(m, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Apply a real scalar function to a Hermitian matrix through its spectrum.

    ``f`` receives the eigenvalue array and must return finite values; a
    non-finite result (e.g. ``log`` of a zero eigenvalue) raises DomainError.
    """
    evals, evecs = hermitian_eigendecomposition(m)
    with np.errstate(all="ignore"):
        fv = np.asarray(f(evals), dtype=float)
    if not np.all(np.isfinite(fv)):
        raise DomainError(f"function undefined on spectrum {evals}")
    return (evecs * fv) @ evecs.conj().T


def pure_to_density(psi) -> np.ndarray:
    """Projector ``|psi><psi|`` of a normalized state vector."""
    v = np.asarray(psi, dtype=complex).ravel()
    if v.size < 2:
        raise NormalizationError("pure state needs dimension >= 2")
    norm = np.linalg.norm(v)
    if abs(norm - 1.0) > TOL_NORM:
        raise NormalizationError(f"state norm {norm!r} is not 1")
    return np.outer(v, v.conj())


def density_violations(rho: np.ndarray) -> tuple[float, float, float]:
    """Return (hermiticity residual, trace error, minimum eigenvalue)."""
    herm = hermiticity_residual(rho)
    tr = abs(np.trace(rho) - 1.0)
    h = 0.5 * (rho + rho.conj().T)
    min_eig = float(np.linalg.eigvalsh(h)[0])
    return herm, float(tr), min_eig


def is_density_matrix(rho, psd_tol: float = TOL_PSD) -> bool:
    try:
        a = as_matrix(rho)
    except ValueError:
        return False
    herm, tr, min_eig = density_violations(a)
    return herm <= TOL_HERM and tr <= TOL_TRACE and min_eig >= -psd_tol


def check_density_matrix(rho, psd_tol: float = TOL_PSD) -> np.ndarray:
    """Validate and return ``rho`` as a complex array, raising InvalidDensityMatrix."""
    a = as_matrix(rho)
    if a.shape[0] > MAX_DIM:
        raise InvalidDensityMatrix(f"dimension {a.shape[0]} exceeds {MAX_DIM}")
    herm, tr, min_eig = density_violations(a)
    if herm > TOL_HERM:
        raise InvalidDensityMatrix(f"not Hermitian (residual {herm:.3e})")
    if tr > TOL_TRACE:
        raise InvalidDensityMatrix(f"trace differs from 1 by {tr:.3e}")
    if min_eig < -psd_tol:
        kind = "repairable" if min_eig >= -TOL_REPAIRABLE else "invalid"
        raise InvalidDensityMatrix(f"negative eigenvalue {min_eig:.3e} ({kind})")
    return a


def is_repairable(rho) -> bool:
    a = as_matrix(rho)
    herm, _, min_eig = density_violations(a)
    return herm <= TOL_REPAIRABLE and min_eig >= -TOL_REPAIRABLE


def clamp_and_renormalize(rho) -> np.ndarray:
    """Project a slightly unphysical matrix onto the state space.

    Negative eigenvalues are set to zero and the trace is restored to 1.
    """
    a = as_matrix(rho)
    h = 0.5 * (a + a.conj().T)
    evals, evecs = np.linalg.eigh(h)
    evals = np.clip(evals, 0.0, None)
    if evals.sum() <= 0:
        raise InvalidDensityMatrix("no positive weight left after clamping")
    evals = evals / evals.sum()
    return (evecs * evals) @ evecs.conj().T


def maximally_mixed(n: int) -> np.ndarray:
    return np.eye(n, dtype=complex) / n


def basis_state(index: int, n: int = 2) -> np.ndarray:
    v = np.zeros(n, dtype=complex)
    v[index] = 1.0
    return v


def rk4_step_matrix(generator: np.ndarray, dt: float) -> np.ndarray:
    """One classical RK4 step for the linear system ``dy/dt = G y`` as a matrix.

    Applying the returned matrix ``k`` times reproduces ``k`` RK4 steps exactly
    (up to rounding), because every stage of RK4 is linear in ``y`` here.
    """
    g = np.asarray(generator)
    hg = dt * g
    eye = np.eye(g.shape[0], dtype=g.dtype)
    hg2 = hg @ hg
    return eye + hg + hg2 / 2 + hg2 @ hg / 6 + hg2 @ hg2 / 24
