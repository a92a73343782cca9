"""Sliding sub-cube extraction across receivers, sources and frequency bins."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ValidationError
from .geometry import ArrayGeometry, steering_vector
from .synth import SpectralCube

__all__ = ["SmoothingPlan", "subcube_vectors", "smoothed_steering", "default_plan"]


@dataclass(frozen=True)
class SmoothingPlan:
    """Sub-array counts along sources (``k_e``), receivers (``k_r``), frequency (``k_f``)."""

    k_e: int = 1
    k_r: int = 1
    k_f: int = 1

    def __post_init__(self):
        if min(self.k_e, self.k_r, self.k_f) < 1:
            raise ValidationError(f"smoothing counts must be >= 1, got {self}")

    def sub_lengths(self, geom: ArrayGeometry) -> tuple[int, int, int]:
        """``(M_s, N_s, F_s)``: sub-cube extent along receivers, sources, frequencies."""
        self.check(geom)
        return (geom.num_receivers - self.k_r + 1,
                geom.num_sources - self.k_e + 1,
                geom.num_freqs - self.k_f + 1)

    def check(self, geom: ArrayGeometry) -> None:
        M, N, F = geom.shape
        if self.k_r > M or self.k_e > N or self.k_f > F:
            raise ValidationError(
                f"plan (k_e={self.k_e}, k_r={self.k_r}, k_f={self.k_f}) exceeds "
                f"cube dimensions (N={N}, M={M}, F={F})"
            )

    @property
    def count(self) -> int:
        return self.k_e * self.k_r * self.k_f

    def vector_length(self, geom: ArrayGeometry) -> int:
        Ms, Ns, Fs = self.sub_lengths(geom)
        return Ms * Ns * Fs

    def centre_offset(self) -> int:
        return (self.k_f - 1) // 2


def default_plan(geom: ArrayGeometry, max_length: int = 64) -> SmoothingPlan:
    """Roughly halve each array, then fit as many frequency bins as ``max_length`` allows."""
    M, N, F = geom.shape
    Ms, Ns = (M + 2) // 2, (N + 2) // 2
    Fs = max(1, min(F, max_length // (Ms * Ns)))
    return SmoothingPlan(k_e=N - Ns + 1, k_r=M - Ms + 1, k_f=F - Fs + 1)


def subcube_vectors(cube: SpectralCube, plan: SmoothingPlan) -> np.ndarray:
    """All shifted sub-cubes, flattened, as the rows of an ``(R, L)`` array.

    Row order is frequency offset outermost, then source offset, then receiver
    offset; each row uses the receiver-innermost flat layout.
    """
    Ms, Ns, Fs = plan.sub_lengths(cube.geom)
    win = sliding_window_view(cube.data, (Ms, Ns, Fs))
    # (K_r, K_e, K_f, Ms, Ns, Fs) -> (K_f, K_e, K_r, Fs, Ns, Ms)
    win = win.transpose(2, 1, 0, 5, 4, 3)
    return np.ascontiguousarray(win).reshape(plan.count, Ms * Ns * Fs)


def smoothed_steering(geom: ArrayGeometry, plan: SmoothingPlan, theta_e: float,
                      theta_r: float, arrival_time: float,
                      band_offset: int = 0) -> np.ndarray:
    """Steering vector on the reduced (sub-cube) geometry.

    ``band_offset`` picks which sub-band's frequencies are used; 0 is the
    lowest band, i.e. the frequencies of the zero-offset sub-cube.
    """
    return steering_vector(reduced_geometry(geom, plan, band_offset),
                           theta_e, theta_r, arrival_time)


def reduced_geometry(geom: ArrayGeometry, plan: SmoothingPlan,
                     band_offset: int = 0) -> ArrayGeometry:
    Ms, Ns, Fs = plan.sub_lengths(geom)
    if not 0 <= band_offset < plan.k_f:
        raise ValidationError(f"band_offset must lie in [0, {plan.k_f}), got {band_offset}")
    return geom.reduced(Ms, Ns, Fs, freq_offset=band_offset)
