"""Vectorized operator algebra.

Operators act on a d-dimensional Hilbert space; superoperators are dense
(d^2 x d^2) complex matrices acting on column-stacked ("vectorized")
operators.  Column stacking fixes every superoperator matrix unambiguously:

    vec(A rho B) = (B^T (x) A) vec(rho),

so the map rho -> A rho B^dagger has matrix kron(conj(B), A).

The module also provides the two generalized-inverse tools used throughout:
the group/Drazin inverse of operators with a known semisimple kernel, and
the pseudo-determinant (product of nonzero eigenvalues) of symmetric
matrices.
"""

from __future__ import annotations

import logging
import math

import numpy as np

from .errors import DegenerateSteadyStateError, NumericsError, ValidationError

logger = logging.getLogger(__name__)

#: eigenvalue-1 detection tolerance, relative to the spectral radius
STEADY_STATE_TOL = 1e-9

#: default relative threshold separating zero from nonzero eigenvalues
PDET_TOL = 1e-10


def vectorize(rho: np.ndarray) -> np.ndarray:
    """Column-stack a square matrix into a length-d^2 vector."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {rho.shape}")
    return rho.reshape(-1, order="F")


def devectorize(vec: np.ndarray) -> np.ndarray:
    """Inverse of :func:`vectorize`; the length must be a perfect square."""
    vec = np.asarray(vec)
    if vec.ndim != 1:
        raise ValidationError(f"expected a vector, got shape {vec.shape}")
    d = math.isqrt(vec.size)
    if d * d != vec.size:
        raise ValidationError(f"vector length {vec.size} is not a perfect square")
    return vec.reshape(d, d, order="F")


def identity_covector(dim: int) -> np.ndarray:
    """Covector representing the trace functional: dot(it, vec(rho)) = tr(rho)."""
    return vectorize(np.eye(dim)).astype(complex)


def sandwich_superop(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Superoperator matrix of rho -> A rho B^dagger."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"operators must be square and same shape, got {a.shape} and {b.shape}")
    return np.kron(b.conj(), a)


def apply_superop(superop: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Apply a superoperator matrix to an operator given in matrix form."""
    return devectorize(superop @ vectorize(rho))


def frobenius_inner(sigma: np.ndarray, rho: np.ndarray) -> complex:
    """Hilbert-Schmidt inner product tr(sigma^dagger rho)."""
    sigma = np.asarray(sigma)
    rho = np.asarray(rho)
    if sigma.shape != rho.shape:
        raise ValidationError(f"shape mismatch: {sigma.shape} vs {rho.shape}")
    return complex(np.vdot(sigma, rho))


def is_trace_preserving(superop: np.ndarray, atol: float = 1e-10) -> bool:
    """Check <<1| S = <<1| within ``atol`` (max-norm on the covector residual)."""
    d2 = superop.shape[0]
    d = math.isqrt(d2)
    one = identity_covector(d)
    return bool(np.max(np.abs(one @ superop - one)) <= atol)


def stationary_state(superop: np.ndarray, tol: float = STEADY_STATE_TOL) -> np.ndarray:
    """Fixed point of a trace-preserving superoperator, as a vectorized state.

    The returned vector devectorizes to a Hermitian, unit-trace matrix;
    Hermiticity is enforced by symmetrization and the residual is logged.

    Raises
    ------
    ValidationError
        If the map is not trace preserving.
    DegenerateSteadyStateError
        If no eigenvalue lies within ``tol`` (relative to the spectral
        radius) of 1, or several do.
    """
    superop = np.asarray(superop, dtype=complex)
    if not is_trace_preserving(superop, atol=1e-8):
        raise ValidationError("superoperator is not trace preserving; no meaningful fixed point")
    evals, evecs = np.linalg.eig(superop)
    radius = float(np.max(np.abs(evals)))
    near_one = np.flatnonzero(np.abs(evals - 1.0) < tol * radius)
    if near_one.size == 0:
        raise DegenerateSteadyStateError("no eigenvalue within tolerance of 1")
    if near_one.size > 1:
        raise DegenerateSteadyStateError(
            f"eigenvalue 1 has multiplicity {near_one.size}: multiple steady states"
        )
    vec = evecs[:, near_one[0]]
    rho = devectorize(vec)
    trace = np.trace(rho)
    if abs(trace) < 1e-14:
        raise NumericsError("steady-state candidate has vanishing trace")
    rho = rho / trace
    residual = float(np.max(np.abs(rho - rho.conj().T)))
    if residual > 1e-10:
        logger.warning("steady state symmetrized; Hermiticity residual %.3e", residual)
    else:
        logger.debug("steady state Hermiticity residual %.3e", residual)
    rho = (rho + rho.conj().T) / 2
    return vectorize(rho)


def fixed_point_projector(superop: np.ndarray, tol: float = STEADY_STATE_TOL) -> np.ndarray:
    """Spectral projector onto the (possibly degenerate) eigenvalue-1 eigenspace.

    For a simple fixed point this equals |pi><<1|; for channels with
    conserved sectors it spans all fixed directions, which is what the
    group-inverse shift formula needs.
    """
    superop = np.asarray(superop, dtype=complex)
    evals, evecs = np.linalg.eig(superop)
    radius = float(np.max(np.abs(evals)))
    idx = np.flatnonzero(np.abs(evals - 1.0) < tol * radius)
    if idx.size == 0:
        raise DegenerateSteadyStateError("no eigenvalue within tolerance of 1")
    left = np.linalg.inv(evecs)[idx, :]
    return evecs[:, idx] @ left


def drazin_via_projector(a: np.ndarray, projector: np.ndarray) -> np.ndarray:
    """Group inverse of ``a`` given the (idempotent) projector onto its kernel."""
    a = np.asarray(a, dtype=complex)
    shifted = a + projector
    cond = np.linalg.cond(shifted)
    if not np.isfinite(cond) or cond > 1e12:
        raise NumericsError(
            f"shifted operator is numerically singular (cond={cond:.2e}); "
            "degenerate spectrum or wrong kernel projector"
        )
    return np.linalg.solve(shifted, np.eye(a.shape[0])) - projector


def _kernel_projector(left_kernel: np.ndarray, right_kernel: np.ndarray) -> np.ndarray:
    """Oblique projector onto span(right) along the complement of span(left).

    ``left_kernel`` holds covectors as rows (k, n), ``right_kernel`` vectors
    as columns (n, k); 1-D inputs are promoted to a single pair.  The
    projector is R (L R)^-1 L, idempotent by construction.
    """
    left = np.atleast_2d(np.asarray(left_kernel, dtype=complex))
    right = np.asarray(right_kernel, dtype=complex)
    if right.ndim == 1:
        right = right[:, None]
    if left.shape[0] != right.shape[1] or left.shape[1] != right.shape[0]:
        raise ValidationError(
            f"kernel shapes incompatible: left {left.shape}, right {right.shape}"
        )
    gram = left @ right
    try:
        coeff = np.linalg.solve(gram, left)
    except np.linalg.LinAlgError as exc:
        raise ValidationError("left and right kernels are not biorthogonalizable") from exc
    return right @ coeff


def drazin_inverse(
    a: np.ndarray, left_kernel: np.ndarray, right_kernel: np.ndarray
) -> np.ndarray:
    """Group (Drazin, index 1) inverse of ``a`` with an explicitly known kernel.

    Uses the shift formula A^D = (A + P0)^-1 - P0 with P0 the oblique
    projector built from the supplied kernel pair(s); valid when the kernel
    is semisimple and exactly spanned by the supplied vectors.  Then
    A A^D = A^D A = I - P0 and A^D annihilates the kernel from both sides.
    """
    a = np.asarray(a, dtype=complex)
    return drazin_via_projector(a, _kernel_projector(left_kernel, right_kernel))


def sym_drazin(s: np.ndarray, null_basis: np.ndarray) -> np.ndarray:
    """Drazin inverse of a symmetric matrix given an orthonormal null basis.

    ``null_basis`` has the null vectors as columns; for symmetric matrices
    the group inverse reduces to (S + N N^T)^-1 - N N^T.
    """
    s = np.asarray(s, dtype=float)
    n = np.asarray(null_basis, dtype=float)
    if n.ndim == 1:
        n = n[:, None]
    return drazin_inverse(s.astype(complex), n.T, n).real


def pseudo_det(s: np.ndarray, tol: float = PDET_TOL, asym_tol: float = 1e-8) -> float:
    """Product of the eigenvalues of a real symmetric matrix above threshold.

    Eigenvalues with |lambda| <= tol * max|lambda| count as zero.  Equals
    det(S + N N^T) for an orthonormal null basis N: the added term lifts the
    nullspace to a 1-eigenspace without touching the rest of the spectrum.
    """
    s = np.asarray(s, dtype=float)
    scale = float(np.max(np.abs(s))) if s.size else 0.0
    if np.max(np.abs(s - s.T)) > asym_tol * max(scale, 1.0):
        raise ValidationError("matrix is not symmetric within tolerance")
    evals = np.linalg.eigvalsh((s + s.T) / 2)
    top = float(np.max(np.abs(evals)))
    if top == 0.0:
        return 1.0
    kept = evals[np.abs(evals) > tol * top]
    return float(np.prod(kept))


def hermitian_exp(h: np.ndarray, t: float) -> np.ndarray:
    """Unitary exp(-i H t) of a Hermitian matrix via spectral decomposition."""
    h = np.asarray(h, dtype=complex)
    scale = max(float(np.max(np.abs(h))), 1.0)
    if np.max(np.abs(h - h.conj().T)) > 1e-10 * scale:
        raise ValidationError("matrix is not Hermitian within tolerance")
    evals, evecs = np.linalg.eigh(h)
    return (evecs * np.exp(-1j * evals * t)) @ evecs.conj().T


def spectral_decomposition(
    superop: np.ndarray, cond_limit: float = 1e10
) -> tuple[np.ndarray, list[np.ndarray]]:
    """Eigenvalues and spectral projectors of a (non-defective) superoperator.

    Returns one rank-one projector |r_j><l_j| per eigenvector, built from the
    right eigenvector matrix and its inverse, so that P_i P_j = delta_ij P_i
    and sum_j P_j = I.  Defective or near-defective inputs (ill-conditioned
    eigenvector matrix) raise :class:`NumericsError`; index-1 kernels only.
    """
    superop = np.asarray(superop, dtype=complex)
    evals, evecs = np.linalg.eig(superop)
    cond = np.linalg.cond(evecs)
    if not np.isfinite(cond) or cond > cond_limit:
        raise NumericsError(
            f"eigenvector matrix ill-conditioned (cond={cond:.2e}); "
            "matrix is defective or near-defective"
        )
    left = np.linalg.inv(evecs)
    projectors = [np.outer(evecs[:, j], left[j, :]) for j in range(evals.size)]
    return evals, projectors
