"""Signal / noise subspace split of a Hermitian moment matrix."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .errors import ValidationError

__all__ = ["EigenSplit", "eigensplit", "signal_dim_for"]

HERMITIAN_TOL = 1e-10
# Above this size a partial (Lanczos) solve is used unless method="full".
FULL_SOLVE_LIMIT = 1024


def signal_dim_for(num_paths: int, order: str) -> int:
    if order == "fourth":
        return num_paths * num_paths
    if order == "second":
        return num_paths
    raise ValidationError(f"order must be 'second' or 'fourth', got {order!r}")


@dataclass(frozen=True, eq=False)
class EigenSplit:
    """Eigen-decomposition ordered by decreasing eigenvalue magnitude.

    ``noise_basis`` is ``None`` when only the signal subspace was computed; the
    noise projector is then ``I - signal_basis signal_basis^H``.
    """

    eigenvalues: np.ndarray
    signal_basis: np.ndarray
    noise_basis: np.ndarray | None
    signal_dim: int
    order: str

    @property
    def dim(self) -> int:
        return self.signal_basis.shape[0]

    @property
    def noise_dim(self) -> int:
        return self.dim - self.signal_dim

    def noise_energy(self, vectors: np.ndarray) -> np.ndarray:
        """``|U_n^H v|^2`` per column of ``vectors``, via the complement identity."""
        v = np.asarray(vectors)
        if v.ndim == 1:
            v = v[:, None]
        total = np.sum(np.abs(v) ** 2, axis=0)
        return total - np.sum(np.abs(self.signal_basis.conj().T @ v) ** 2, axis=0)


def eigensplit(matrix: np.ndarray, num_paths: int, order: str = "fourth",
               method: str = "auto") -> EigenSplit:
    """Split ``matrix`` into its dominant ``P`` (second order) or ``P^2``
    (fourth order) eigenvectors and the remainder.

    Eigenvalues are ranked by magnitude: a cumulant matrix is indefinite and
    for constant-modulus arrivals its signal eigenvalues are negative.

    ``method`` is ``"full"`` (dense solver, noise basis included),
    ``"partial"`` (Lanczos on the dominant ``signal_dim`` eigenpairs only) or
    ``"auto"`` (full up to ``FULL_SOLVE_LIMIT`` rows).
    """
    A = np.asarray(matrix)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValidationError("matrix has non-finite entries")
    dim = A.shape[0]
    k = signal_dim_for(num_paths, order)
    if num_paths < 1 or k >= dim:
        side = int(round(np.sqrt(dim))) if order == "fourth" else dim
        raise ValidationError(
            f"signal dimension {k} (P={num_paths}, {order} order) must be smaller "
            f"than the matrix dimension {dim} (L={side})"
        )
    scale = np.linalg.norm(A)
    asym = np.linalg.norm(A - A.conj().T)
    if asym > HERMITIAN_TOL * max(scale, np.finfo(float).tiny):
        raise ValidationError(
            f"matrix is not Hermitian (relative asymmetry {asym / scale:.2e})"
        )
    A = 0.5 * (A + A.conj().T)

    if method == "auto":
        method = "full" if dim <= FULL_SOLVE_LIMIT else "partial"
    if method == "full":
        w, V = scipy.linalg.eigh(A)
        idx = np.argsort(-np.abs(w), kind="stable")
        w, V = w[idx], V[:, idx]
        return EigenSplit(w, V[:, :k], V[:, k:], k, order)
    if method == "partial":
        if k + 1 >= dim:
            return eigensplit(A, num_paths, order, "full")
        # Deterministic start vector: ARPACK's default is random.
        v0 = np.ones(dim, dtype=A.dtype) / np.sqrt(dim)
        w, V = scipy.sparse.linalg.eigsh(A, k=k, which="LM", v0=v0)
        idx = np.argsort(-np.abs(w), kind="stable")
        return EigenSplit(w[idx], V[:, idx], None, k, order)
    raise ValidationError(f"unknown eigen method {method!r}")
