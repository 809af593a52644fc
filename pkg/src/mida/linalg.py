"""Small shared linear-algebra helpers."""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import NumericalError

# Relative condition number beyond which a symmetric solve is refused.
CONDITION_LIMIT = 1e12


def spd_solve(a: np.ndarray, b: np.ndarray, context: str = "") -> np.ndarray:
    """Solve a @ x = b for symmetric positive definite a via Cholesky.

    Raises NumericalError with a condition estimate when the matrix is
    numerically singular (relative condition above CONDITION_LIMIT).
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NumericalError(f"expected a square matrix, got shape {a.shape}")
    where = f" in {context}" if context else ""
    try:
        cf = scipy.linalg.cho_factor(a, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        cond = _condition_estimate(a)
        raise NumericalError(
            f"matrix is not positive definite{where} (condition ~ {cond:.3e})"
        ) from exc
    cond = _condition_estimate(a)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise NumericalError(
            f"matrix is numerically singular{where} (condition ~ {cond:.3e})"
        )
    return scipy.linalg.cho_solve(cf, b, check_finite=False)


def _condition_estimate(a: np.ndarray) -> float:
    eig = np.linalg.eigvalsh((a + a.T) / 2.0)
    lo, hi = float(np.min(eig)), float(np.max(np.abs(eig)))
    if lo <= 0:
        return np.inf
    return hi / lo


def spectral_norm(m: np.ndarray, tol: float = 1e-10, max_iter_per_dim: int = 10) -> float:
    """Largest singular value by power iteration on M^T M.

    Diagnostic-grade: capped at max_iter_per_dim * dim iterations. Falls back
    to a second deterministic start vector if the first lands in a null space.
    """
    m = np.asarray(m, dtype=float)
    if m.size == 0:
        return 0.0
    if m.ndim == 1:
        return float(np.linalg.norm(m))
    gram = m.T @ m
    dim = gram.shape[0]
    for start in (np.ones(dim), np.arange(1.0, dim + 1.0)):
        v = start / np.linalg.norm(start)
        lam = 0.0
        for _ in range(max_iter_per_dim * dim):
            w = gram @ v
            norm = np.linalg.norm(w)
            if norm == 0.0:
                break
            v_next = w / norm
            lam_next = float(v_next @ gram @ v_next)
            if abs(lam_next - lam) <= tol * max(1.0, abs(lam_next)):
                lam = lam_next
                break
            v, lam = v_next, lam_next
        if lam > 0.0:
            return float(np.sqrt(lam))
    return 0.0
