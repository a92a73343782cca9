"""Sample trispectrum (fourth-order cumulant) and covariance matrices.

Realizations are the rows of an ``(R, L)`` array. Every expectation is
replaced by a sample mean over the R rows; sums run over fixed-size blocks of
rows that are then combined pairwise, which keeps rounding error growth
logarithmic in R and makes the result independent of the thread count.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import ValidationError

__all__ = ["estimate_trispectrum", "estimate_covariance", "hermitian_part"]

BLOCK_ROWS = 32


def _as_realizations(realizations) -> np.ndarray:
    if isinstance(realizations, np.ndarray):
        X = realizations
    else:
        rows = [np.asarray(r).ravel() for r in realizations]
        if not rows:
            raise ValidationError("at least one realization is required")
        lengths = {r.size for r in rows}
        if len(lengths) != 1:
            raise ValidationError(f"realizations have mismatched lengths {sorted(lengths)}")
        X = np.stack(rows)
    X = np.asarray(X, dtype=complex)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValidationError("at least one realization is required")
    if X.shape[1] == 0:
        raise ValidationError("realizations must be non-empty")
    return X


def _pairwise(parts: list[np.ndarray]) -> np.ndarray:
    while len(parts) > 1:
        nxt = [parts[i] + parts[i + 1] for i in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            nxt.append(parts[-1])
        parts = nxt
    return parts[0]


def _gram_mean(A: np.ndarray, threads: int = 1, block: int = BLOCK_ROWS) -> np.ndarray:
    """``mean_r a_r a_r^H`` for the rows of A, block-summed then reduced pairwise."""
    R = A.shape[0]
    starts = range(0, R, block)

    def part(s):
        blk = A[s:s + block]
        return blk.T @ blk.conj()

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(part, starts))
    else:
        parts = [part(s) for s in starts]
    return _pairwise(parts) / R


def hermitian_part(C: np.ndarray) -> np.ndarray:
    return 0.5 * (C + C.conj().T)


def estimate_covariance(realizations, *, threads: int = 1) -> np.ndarray:
    """``mean_r X_r X_r^H`` (L x L, Hermitian PSD)."""
    X = _as_realizations(realizations)
    return hermitian_part(_gram_mean(X, threads))


def estimate_trispectrum(realizations, *, threads: int = 1) -> np.ndarray:
    """Sample fourth-order cumulant matrix of size ``L^2 x L^2``.

    With ``Y_r = X_r kron conj(X_r)`` this is
    ``mean[Y Y^H] - mean[Y] mean[Y]^H - mean[X X^H] kron conj(mean[X X^H])``.
    Entry ``(a*L+b, c*L+d)`` equals
    ``E[x_a x_b* x_c* x_d] - E[x_a x_b*] E[x_c* x_d] - E[x_a x_c*] E[x_b* x_d]``.
    """
    X = _as_realizations(realizations)
    R, L = X.shape
    Y = (X[:, :, None] * X.conj()[:, None, :]).reshape(R, L * L)
    m4 = _gram_mean(Y, threads)
    mean_y = _pairwise([Y[s:s + BLOCK_ROWS].sum(axis=0) for s in range(0, R, BLOCK_ROWS)]) / R
    m4 -= np.outer(mean_y, mean_y.conj())
    cov = _gram_mean(X, threads)
    m4 -= np.kron(cov, cov.conj())
    return hermitian_part(m4)
