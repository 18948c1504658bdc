"""Closed-form orthogonal fitting between paired point sets.

The best orthogonal map R minimizing ``||X R - Y||_F`` is ``U V^T`` where
``U s V^T`` is the SVD of ``X^T Y``.  The SVD here is a self-contained
one-sided Jacobi: pairs of columns are rotated until mutually orthogonal,
singular values are the surviving column norms.  No external decomposition
routine is involved; numpy supplies only elementwise and product arithmetic.

Reflections are allowed: R ranges over the full orthogonal group, no
determinant constraint is applied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SvdConvergenceError",
    "SvdResult",
    "ProcrustesResult",
    "svd",
    "orthogonal_procrustes",
    "apply_map",
    "frobenius_error",
]

_SWEEP_CAP = 60        # full Jacobi sweeps before declaring non-convergence
_OFFDIAG_TOL = 1e-12   # relative column coherence below which a pair counts as orthogonal


class SvdConvergenceError(RuntimeError):
    """Jacobi sweeps failed to orthogonalize the columns within the cap."""


@dataclass(frozen=True)
class SvdResult:
    """Thin SVD ``M = u @ diag(singular_values) @ v.T``.

    ``u`` is p x r and ``v`` is q x r with orthonormal columns,
    r = min(p, q); singular values are non-negative and non-increasing.
    """

    u: np.ndarray
    singular_values: np.ndarray
    v: np.ndarray


@dataclass(frozen=True)
class ProcrustesResult:
    """Orthogonal map minimizing ``||X R - Y||_F`` plus that residual."""

    rotation: np.ndarray
    residual: float


def svd(matrix) -> SvdResult:
    """Deterministic thin SVD by one-sided Jacobi rotations.

    Sign convention: the largest-magnitude entry of every ``u`` column is
    positive (ties resolved toward the lowest row index), with the matching
    ``v`` column flipped alongside.  Identical input bits give identical
    output bits.
    """
    m = np.array(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ValueError(f"need a p x q matrix with p, q >= 1, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix contains non-finite entries")

    if m.shape[0] >= m.shape[1]:
        u, sigma, v = _one_sided_jacobi(m)
    else:
        # M^T = u' s v'^T  =>  M = v' s u'^T: the roles of u and v swap.
        v, sigma, u = _one_sided_jacobi(m.T)

    order = np.argsort(-sigma, kind="stable")
    u, sigma, v = u[:, order], sigma[order], v[:, order]

    for col in range(u.shape[1]):
        anchor = int(np.argmax(np.abs(u[:, col])))
        if u[anchor, col] < 0.0:
            u[:, col] = -u[:, col]
            v[:, col] = -v[:, col]
    return SvdResult(u=u, singular_values=sigma, v=v)


def _one_sided_jacobi(m: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # Requires p >= q.  Column squared norms are cached and refreshed after
    # every rotation so the convergence test never uses stale values.
    p, q = m.shape
    a = m.copy()
    v = np.eye(q)
    norms_sq = np.einsum("ij,ij->j", a, a)

    for _ in range(_SWEEP_CAP):
        worst = 0.0
        for i in range(q - 1):
            for j in range(i + 1, q):
                alpha = norms_sq[i]
                beta = norms_sq[j]
                if alpha == 0.0 or beta == 0.0:
                    continue
                gamma = float(a[:, i] @ a[:, j])
                coherence = abs(gamma) / math.sqrt(alpha * beta)
                if coherence > worst:
                    worst = coherence
                if coherence <= _OFFDIAG_TOL:
                    continue
                # Rotation angle solving g t^2 + (beta - alpha) t - g = 0,
                # smaller-magnitude root (|t| <= 1 keeps sweeps convergent).
                zeta = (beta - alpha) / (2.0 * gamma)
                t = math.copysign(1.0, zeta) / (abs(zeta) + math.hypot(1.0, zeta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                col_i = a[:, i].copy()
                col_j = a[:, j].copy()
                a[:, i] = c * col_i - s * col_j
                a[:, j] = s * col_i + c * col_j
                rot_i = v[:, i].copy()
                rot_j = v[:, j].copy()
                v[:, i] = c * rot_i - s * rot_j
                v[:, j] = s * rot_i + c * rot_j
                norms_sq[i] = float(a[:, i] @ a[:, i])
                norms_sq[j] = float(a[:, j] @ a[:, j])
        # A sweep with worst <= tol performed no rotation, so every pair was
        # measured on the final column set: convergence is simultaneous.
        if worst <= _OFFDIAG_TOL:
            break
    else:
        raise SvdConvergenceError(
            f"one-sided Jacobi did not converge in {_SWEEP_CAP} sweeps"
        )

    sigma = np.sqrt(norms_sq)
    u = np.empty((p, q))
    zero_cols = []
    for col in range(q):
        if sigma[col] > 0.0:
            u[:, col] = a[:, col] / sigma[col]
        else:
            zero_cols.append(col)
    if zero_cols:
        _complete_basis(u, zero_cols)
    return u, sigma, v


def _complete_basis(u: np.ndarray, zero_cols: list[int]) -> None:
    # Zero singular values leave their u columns undefined; fill them with
    # unit vectors orthogonal to everything else, chosen deterministically
    # from coordinate directions (largest projection residual wins).
    p, q = u.shape
    filled = [col for col in range(q) if col not in zero_cols]
    for col in zero_cols:
        basis = u[:, filled] if filled else np.zeros((p, 0))
        best = None
        best_norm = 0.0
        for coord in range(p):
            candidate = np.zeros(p)
            candidate[coord] = 1.0
            if filled:
                candidate -= basis @ (basis.T @ candidate)
                candidate -= basis @ (basis.T @ candidate)  # re-orthogonalize
            norm = float(np.linalg.norm(candidate))
            if norm > best_norm:
                best_norm = norm
                best = candidate / norm
        u[:, col] = best
        filled.append(col)


def orthogonal_procrustes(x, y) -> ProcrustesResult:
    """Best orthogonal map from the rows of X onto the rows of Y.

    ``R = u @ v.T`` from the SVD of ``X^T Y``; the residual is
    ``||X R - Y||_F``.  X and Y must share shape (m, d) with m >= 1.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 2 or x.shape != y.shape:
        raise ValueError(
            f"X and Y must share shape (m, d), got {getattr(x, 'shape', None)}"
            f" and {getattr(y, 'shape', None)}"
        )
    if x.shape[0] < 1:
        raise ValueError("need at least one row pair")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("inputs contain non-finite entries")
    decomposition = svd(x.T @ y)
    rotation = decomposition.u @ decomposition.v.T
    residual = frobenius_error(x @ rotation, y)
    return ProcrustesResult(rotation=rotation, residual=residual)


def apply_map(x, rotation) -> np.ndarray:
    """Apply a learned map to rows: ``X @ R`` with a width check."""
    x = np.asarray(x, dtype=np.float64)
    rotation = np.asarray(rotation, dtype=np.float64)
    if x.ndim not in (1, 2) or rotation.ndim != 2:
        raise ValueError("x must be 1-D or 2-D and rotation 2-D")
    if x.shape[-1] != rotation.shape[0]:
        raise ValueError(
            f"width {x.shape[-1]} does not match map input {rotation.shape[0]}"
        )
    return x @ rotation


def frobenius_error(a, b) -> float:
    """``||A - B||_F`` for equal-shape matrices."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b))
