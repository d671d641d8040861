"""Geometry of symmetric positive definite (SPD) matrices.

Spatial covariances of multichannel signals are SPD and live on a curved
manifold; Euclidean operations on them distort distances and means. This
module provides the primitives the rest of the package is built on: matrix
functions via symmetric eigendecomposition, the affine-invariant distance,
log-Euclidean and Frechet (Karcher) means, tangent-space projection and
half-vectorisation.

All functions are pure and operate on plain ``(e, e)`` float ndarrays.
A "valid SPD matrix" is symmetric to relative tolerance ``SYM_RTOL`` with
every eigenvalue above ``e * eps * lambda_max``. Inputs failing positivity
are rejected, never repaired; repair (shrinkage) belongs to the covariance
module.
"""

from __future__ import annotations

from typing import Iterable

import numpy as np
import scipy.linalg

from .errors import ConvergenceError, NumericalError

SYM_RTOL = 1e-10

__all__ = [
    "matrix_log",
    "matrix_exp",
    "matrix_sqrt",
    "matrix_invsqrt",
    "riemannian_distance",
    "log_euclidean_mean",
    "frechet_mean",
    "tangent_project",
    "tangent_project_many",
    "half_vectorize",
    "unvectorize",
    "tangent_dim",
    "validate_spd",
]


def _as_square(C: np.ndarray, name: str = "matrix") -> np.ndarray:
    C = np.asarray(C, dtype=np.float64)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ValueError(f"{name} must be square, got shape {C.shape}")
    if not np.all(np.isfinite(C)):
        raise ValueError(f"{name} contains non-finite entries")
    return C


def _check_symmetric(C: np.ndarray, name: str = "matrix") -> np.ndarray:
    C = _as_square(C, name)
    norm = np.linalg.norm(C)
    asym = np.linalg.norm(C - C.T)
    if asym > SYM_RTOL * max(norm, 1e-300):
        raise ValueError(
            f"{name} is not symmetric: relative asymmetry {asym / max(norm, 1e-300):.3e}"
        )
    # Work on the exactly symmetric part so eigh sees a Hermitian input.
    return 0.5 * (C + C.T)


def _spd_eigh(C: np.ndarray, name: str = "matrix") -> tuple[np.ndarray, np.ndarray]:
    """Eigendecompose a symmetric matrix and enforce strict positivity."""
    C = _check_symmetric(C, name)
    try:
        w, V = np.linalg.eigh(C)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition of {name} failed: {exc}") from exc
    floor = C.shape[0] * np.finfo(np.float64).eps * max(w[-1], 0.0)
    if w[0] <= floor:
        raise NumericalError(
            f"{name} is not positive definite: min eigenvalue {w[0]:.3e} "
            f"<= floor {floor:.3e}"
        )
    return w, V


def validate_spd(C: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Validate that ``C`` is SPD and return its symmetrised copy.

    Raises ValueError for non-finite or asymmetric input and NumericalError
    when an eigenvalue falls at or below the positivity floor.
    """
    C = _check_symmetric(C, name)
    _spd_eigh(C, name)
    return C


def _sym(A: np.ndarray) -> np.ndarray:
    """Symmetric part; used to scrub floating-point drift from products
    that are symmetric in exact arithmetic."""
    return 0.5 * (A + A.T)


def matrix_log(C: np.ndarray) -> np.ndarray:
    """Matrix logarithm of an SPD matrix.

    Computed from the symmetric eigendecomposition ``C = V diag(w) V^T`` as
    ``V diag(ln w) V^T``. The result is symmetric but in general indefinite.
    """
    w, V = _spd_eigh(C, "C")
    return _sym((V * np.log(w)) @ V.T)


def matrix_exp(S: np.ndarray) -> np.ndarray:
    """Matrix exponential of a symmetric matrix; the result is SPD."""
    S = _check_symmetric(S, "S")
    try:
        w, V = np.linalg.eigh(S)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition of S failed: {exc}") from exc
    return _sym((V * np.exp(w)) @ V.T)


def matrix_sqrt(C: np.ndarray) -> np.ndarray:
    """Principal square root of an SPD matrix."""
    w, V = _spd_eigh(C, "C")
    return _sym((V * np.sqrt(w)) @ V.T)


def matrix_invsqrt(C: np.ndarray) -> np.ndarray:
    """Inverse principal square root of an SPD matrix."""
    w, V = _spd_eigh(C, "C")
    return _sym((V / np.sqrt(w)) @ V.T)


def riemannian_distance(C1: np.ndarray, C2: np.ndarray) -> float:
    """Affine-invariant Riemannian distance between two SPD matrices.

    ``delta(C1, C2) = sqrt(sum_n ln^2 lambda_n)`` where ``lambda_n`` are the
    eigenvalues of ``C1^{-1} C2``, obtained from the generalized symmetric
    eigenproblem ``C2 v = lambda C1 v`` (reduced internally via Cholesky
    whitening) rather than an explicit inverse.

    The distance is symmetric in its arguments, zero iff ``C1 == C2``, and
    invariant under congruence ``C -> W C W^T`` for any invertible ``W``.
    """
    C1 = _check_symmetric(C1, "C1")
    C2 = _check_symmetric(C2, "C2")
    if C1.shape != C2.shape:
        raise ValueError(f"dimension mismatch: {C1.shape} vs {C2.shape}")
    try:
        lam = scipy.linalg.eigvalsh(C2, C1)
    except (scipy.linalg.LinAlgError, np.linalg.LinAlgError) as exc:
        raise NumericalError(f"generalized eigenproblem failed: {exc}") from exc
    if np.any(lam <= 0):
        raise NumericalError("inputs are not positive definite (pencil has "
                             "non-positive eigenvalues)")
    return float(np.sqrt(np.sum(np.log(lam) ** 2)))


def _as_spd_stack(Cs: Iterable[np.ndarray] | np.ndarray) -> np.ndarray:
    arr = np.asarray(list(Cs) if not isinstance(Cs, np.ndarray) else Cs,
                     dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[np.newaxis]
    if arr.ndim != 3 or arr.shape[0] == 0 or arr.shape[1] != arr.shape[2]:
        raise ValueError(f"expected a nonempty stack of square matrices, got {arr.shape}")
    return arr


def log_euclidean_mean(Cs: Iterable[np.ndarray]) -> np.ndarray:
    """Log-Euclidean mean: ``exp(mean_i log(C_i))``.

    Closed form and deterministic; equals the elementwise geometric mean for
    a commuting (e.g. diagonal) family.
    """
    stack = _as_spd_stack(Cs)
    logs = np.stack([matrix_log(C) for C in stack])
    return matrix_exp(logs.mean(axis=0))


def frechet_mean(Cs: Iterable[np.ndarray], tol: float = 1e-8,
                 max_iter: int = 50) -> np.ndarray:
    """Frechet (Karcher) mean under the affine-invariant metric.

    Fixed-point iteration
    ``M <- M^{1/2} exp(mean_i log(M^{-1/2} C_i M^{-1/2})) M^{1/2}``
    with unit step, initialised at the log-Euclidean mean, stopped when the
    Frobenius norm of the mean tangent increment drops below ``tol``. The
    returned matrix locally minimises the summed squared Riemannian distance
    to the inputs.

    Raises ConvergenceError (carrying the last iterate and residual) if
    ``max_iter`` sweeps do not reach ``tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    stack = _as_spd_stack(Cs)
    if stack.shape[0] == 1:
        return validate_spd(stack[0])
    M = log_euclidean_mean(stack)
    residual = np.inf
    for _ in range(max_iter):
        M_sqrt = matrix_sqrt(M)
        M_invsqrt = matrix_invsqrt(M)
        J = np.zeros_like(M)
        for C in stack:
            J += matrix_log(_sym(M_invsqrt @ C @ M_invsqrt))
        J /= stack.shape[0]
        residual = float(np.linalg.norm(J))
        if residual < tol:
            return M
        M = M_sqrt @ matrix_exp(J) @ M_sqrt
        M = 0.5 * (M + M.T)
    raise ConvergenceError(
        f"Frechet mean did not converge in {max_iter} iterations "
        f"(residual {residual:.3e} >= tol {tol:.3e})",
        last_iterate=M, residual=residual,
    )


def tangent_dim(n_channels: int) -> int:
    """Length of the half-vectorised tangent vector: ``e (e + 1) / 2``."""
    return n_channels * (n_channels + 1) // 2


def half_vectorize(P: np.ndarray) -> np.ndarray:
    """Half-vectorise a symmetric matrix, upper triangle in row-major order.

    Off-diagonal entries are scaled by sqrt(2) so the Euclidean norm of the
    output equals the Frobenius norm of ``P``: the map is a linear isometry
    between (symmetric matrices, Frobenius) and (vectors, Euclidean).
    """
    P = _check_symmetric(P, "P")
    e = P.shape[0]
    iu = np.triu_indices(e)
    weights = np.where(iu[0] == iu[1], 1.0, np.sqrt(2.0))
    return P[iu] * weights


def unvectorize(v: np.ndarray) -> np.ndarray:
    """Exact inverse of :func:`half_vectorize`."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"expected a vector, got shape {v.shape}")
    d = v.shape[0]
    e = int((np.sqrt(8 * d + 1) - 1) / 2)
    if tangent_dim(e) != d:
        raise ValueError(f"length {d} is not of the form e(e+1)/2")
    iu = np.triu_indices(e)
    weights = np.where(iu[0] == iu[1], 1.0, np.sqrt(2.0))
    P = np.zeros((e, e))
    P[iu] = v / weights
    return P + np.triu(P, 1).T


def tangent_project(C: np.ndarray, C_ref: np.ndarray) -> np.ndarray:
    """Project an SPD matrix to the tangent space at ``C_ref``.

    Computes ``P = C_ref^{1/2} logm(C_ref^{-1/2} C C_ref^{-1/2}) C_ref^{1/2}``
    and returns its half-vectorisation. At ``C_ref = I`` this reduces to
    ``half_vectorize(logm(C))``.
    """
    return tangent_project_many([C], C_ref)[0]


def tangent_project_many(Cs: Iterable[np.ndarray], C_ref: np.ndarray) -> np.ndarray:
    """Tangent-project a stack of SPD matrices at a shared reference.

    The reference square roots are factored once; returns an ``(t, d)``
    array with ``d = e(e+1)/2``.
    """
    stack = _as_spd_stack(Cs)
    ref_sqrt = matrix_sqrt(C_ref)
    ref_invsqrt = matrix_invsqrt(C_ref)
    if C_ref.shape[0] != stack.shape[1]:
        raise ValueError(
            f"dimension mismatch: reference {C_ref.shape} vs matrices "
            f"{stack.shape[1:]}"
        )
    out = np.empty((stack.shape[0], tangent_dim(stack.shape[1])))
    for i, C in enumerate(stack):
        L = matrix_log(_sym(ref_invsqrt @ C @ ref_invsqrt))
        out[i] = half_vectorize(_sym(ref_sqrt @ L @ ref_sqrt))
    return out
