"""End-to-end estimation: cube -> realizations -> moment matrix -> subspace -> grid."""
from __future__ import annotations

import logging

from .cumulant import estimate_covariance, estimate_trispectrum
from .errors import ValidationError
from .smoothing import SmoothingPlan, subcube_vectors
from .spectrum import (GridSpec, PseudoSpectrumGrid, eval_double2, eval_double4,
                       eval_smoothing_musical)
from .subspace import eigensplit
from .synth import SpectralCube

log = logging.getLogger(__name__)

METHODS = ("double4", "double2", "smusical")


def estimate(cube: SpectralCube, num_paths: int, method: str, plan: SmoothingPlan,
             grid: GridSpec, *, band_offset: int | None = None, threads: int = 1,
             eig_method: str = "auto") -> PseudoSpectrumGrid:
    """Run one estimator on a cube.

    ``smusical`` uses only the reference source's data and ignores
    ``plan.k_e`` and the emission axis of ``grid``.
    """
    if method not in METHODS:
        raise ValidationError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    if method == "smusical":
        cube = cube.reference_source()
        plan = SmoothingPlan(k_e=1, k_r=plan.k_r, k_f=plan.k_f)
    X = subcube_vectors(cube, plan)
    log.info("%s: %d realizations of length %d", method, *X.shape)
    if method == "double4":
        C = estimate_trispectrum(X, threads=threads)
        split = eigensplit(C, num_paths, "fourth", method=eig_method)
        return eval_double4(split, cube.geom, plan, grid, band_offset=band_offset,
                            threads=threads)
    C = estimate_covariance(X, threads=threads)
    split = eigensplit(C, num_paths, "second", method=eig_method)
    evaluator = eval_double2 if method == "double2" else eval_smoothing_musical
    return evaluator(split, cube.geom, plan, grid, band_offset=band_offset, threads=threads)
