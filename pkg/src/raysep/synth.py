"""Synthetic multipath spectra with white or AR-coloured Gaussian noise."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.signal import lfilter

from .errors import ValidationError
from .geometry import ArrayGeometry, RaypathParams, _steering_cube

__all__ = ["SpectralCube", "NoiseSpec", "synthesize", "generate_noise", "measure_snr"]


@dataclass(frozen=True, eq=False)
class SpectralCube:
    """Received spectra ``data[m, n, f]`` for receiver m, source n, frequency f."""

    geom: ArrayGeometry
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        if data.shape != self.geom.shape:
            raise ValidationError(
                f"cube shape {data.shape} does not match geometry {self.geom.shape}"
            )
        if not np.all(np.isfinite(data)):
            raise ValidationError("cube contains non-finite values")
        object.__setattr__(self, "data", data)

    def flat(self) -> np.ndarray:
        return self.data.ravel(order="F")

    def reference_source(self) -> "SpectralCube":
        """Receiver x frequency data of the reference source alone (N = 1)."""
        g = self.geom
        sub = ArrayGeometry(
            num_receivers=g.num_receivers,
            num_sources=1,
            spacing=g.spacing,
            sound_speed=g.sound_speed,
            frequencies=g.frequencies,
            ref_receiver=g.ref_receiver,
            ref_source=1,
            source_spectrum=g.source_spectrum,
        )
        n0 = g.ref_source - 1
        return SpectralCube(sub, self.data[:, n0:n0 + 1, :])


@dataclass(frozen=True)
class NoiseSpec:
    """Additive noise recipe.

    ``kind`` is ``"white"`` or ``"colored"``; coloured noise is white noise run
    through ``y[f] = w[f] + sum_i ar_coeffs[i] * y[f-1-i]`` along frequency.
    """

    kind: str = "white"
    snr_db: float = 0.0
    ar_coeffs: tuple[float, ...] = field(default_factory=tuple)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("white", "colored"):
            raise ValidationError(f"noise kind must be 'white' or 'colored', got {self.kind!r}")
        object.__setattr__(self, "ar_coeffs", tuple(float(a) for a in self.ar_coeffs))
        if self.kind == "colored":
            if not self.ar_coeffs:
                raise ValidationError("colored noise needs at least one AR coefficient")
            if _ar_radius(self.ar_coeffs) >= 1.0:
                raise ValidationError(
                    f"AR coefficients {list(self.ar_coeffs)} give an unstable filter"
                )
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError("seed must be an unsigned 64-bit integer")


def _ar_radius(coeffs: Sequence[float]) -> float:
    """Largest root modulus of ``z^p - a1 z^(p-1) - ... - ap``."""
    roots = np.roots(np.r_[1.0, -np.asarray(coeffs, dtype=float)])
    return float(np.max(np.abs(roots))) if roots.size else 0.0


def generate_noise(shape: tuple[int, int, int], spec: NoiseSpec) -> np.ndarray:
    """Unit-average-power circular complex Gaussian noise cube.

    The AR recursion (coloured case) runs along the last (frequency) axis,
    independently per channel, after a burn-in long enough for the filter
    transient to decay below 1e-12.
    """
    rng = np.random.default_rng(int(spec.seed))
    M, N, F = shape
    if spec.kind == "white":
        w = rng.standard_normal((M, N, F, 2)) @ np.array([1.0, 1.0j])
        noise = w / math.sqrt(2.0)
    else:
        radius = _ar_radius(spec.ar_coeffs)
        burn = 0 if radius == 0 else int(math.ceil(math.log(1e-12) / math.log(radius)))
        w = rng.standard_normal((M, N, F + burn, 2)) @ np.array([1.0, 1.0j])
        a = np.r_[1.0, -np.asarray(spec.ar_coeffs)]
        noise = lfilter([1.0], a, w / math.sqrt(2.0), axis=-1)[..., burn:]
    power = np.mean(np.abs(noise) ** 2)
    return noise / math.sqrt(power)


def synthesize(geom: ArrayGeometry, paths: Sequence[RaypathParams],
               noise: NoiseSpec | None = None) -> SpectralCube:
    """Sum of steering responses ``a_p d(theta_e, theta_r, T)`` plus optional noise.

    Noise is scaled so the cube-wide signal-to-noise ratio equals
    ``noise.snr_db`` exactly.
    """
    if len(paths) == 0:
        raise ValidationError("at least one raypath is required")
    signal = np.zeros(geom.shape, dtype=complex)
    for p in paths:
        signal += p.amplitude * _steering_cube(
            geom, p.emission_angle, p.reception_angle, p.arrival_time
        )
    if noise is None:
        return SpectralCube(geom, signal)
    return SpectralCube(geom, signal + scaled_noise(signal, noise))


def scaled_noise(signal: np.ndarray, spec: NoiseSpec) -> np.ndarray:
    b = generate_noise(signal.shape, spec)
    ratio = np.vdot(signal, signal).real / np.vdot(b, b).real
    return b * math.sqrt(ratio / 10.0 ** (spec.snr_db / 10.0))


def measure_snr(signal: np.ndarray, noisy: np.ndarray) -> float:
    """``10 log10(|signal|^2 / |noisy - signal|^2)``; ``inf`` when noise-free."""
    signal = np.asarray(signal)
    noisy = np.asarray(noisy)
    if signal.shape != noisy.shape:
        raise ValidationError(f"shape mismatch: {signal.shape} vs {noisy.shape}")
    resid = noisy - signal
    e_noise = np.vdot(resid, resid).real
    if e_noise == 0:
        return math.inf
    return 10.0 * math.log10(np.vdot(signal, signal).real / e_noise)
