"""Small symmetric-matrix helpers shared by every module."""

from __future__ import annotations

import numpy as np


def sym(M: np.ndarray) -> np.ndarray:
    """Return (M + M^T) / 2 over the last two axes."""
    return 0.5 * (M + np.swapaxes(M, -1, -2))


def psd_tol(A: np.ndarray, B: np.ndarray) -> float:
    """Scale-aware tolerance used for every Loewner comparison of A and B."""
    return 1e-8 * (1.0 + max(np.linalg.norm(A), np.linalg.norm(B)))


def psd_leq(A: np.ndarray, B: np.ndarray, tol: float | None = None) -> bool:
    """True iff A <= B in the Loewner order, i.e. lambda_min(B - A) >= -tol.

    When ``tol`` is omitted the scale-aware default :func:`psd_tol` is used.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch {A.shape} vs {B.shape}")
    if tol is None:
        tol = psd_tol(A, B)
    return bool(np.linalg.eigvalsh(sym(B - A))[0] >= -tol)


def lambda_max(M: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(sym(M))[-1])


def lambda_min(M: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(sym(M))[0])


def psd_sqrt(M: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root; tiny negative eigenvalues are clipped to zero."""
    w, V = np.linalg.eigh(sym(M))
    w = np.clip(w, 0.0, None)
    return sym((V * np.sqrt(w)) @ V.T)
