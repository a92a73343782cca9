"""Double-array geometry, raypath parameters and steering vectors.

Data cubes are stored as ``(M, N, F)`` arrays indexed ``[receiver, source,
frequency]``. The flat (vectorized) form concatenates receivers first, then
sources, then frequencies, which is exactly Fortran-order raveling of that
array. Every module relies on this convention.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import ClassVar

import numpy as np

from .errors import ValidationError

__all__ = [
    "ArrayGeometry",
    "RaypathParams",
    "FlatIndexLayout",
    "delay",
    "steering_vector",
    "quadratic_steering",
    "midpoint_index",
]


def midpoint_index(count: int) -> int:
    """1-based array midpoint, rounding down (4 -> 2, 5 -> 3)."""
    return (count + 1) // 2


def delay(theta_deg, spacing: float, sound_speed: float):
    """Inter-element delay ``d sin(theta) / c`` in seconds.

    Accepts scalars or arrays of angles in degrees.
    """
    if sound_speed <= 0:
        raise ValidationError(f"sound speed must be positive, got {sound_speed}")
    return spacing * np.sin(np.deg2rad(theta_deg)) / sound_speed


@dataclass(frozen=True, eq=False)
class ArrayGeometry:
    """Source array, receiver array and frequency grid of one experiment.

    Reference indices are 1-based and default to the array midpoints.
    ``source_spectrum`` defaults to a flat unit spectrum.
    """

    num_receivers: int
    num_sources: int
    spacing: float
    sound_speed: float
    frequencies: np.ndarray
    ref_receiver: int | None = None
    ref_source: int | None = None
    source_spectrum: np.ndarray | None = None

    # Sub-cube geometries keep the parent's reference elements.
    _external_refs: ClassVar[bool] = False

    def __post_init__(self):
        M, N = int(self.num_receivers), int(self.num_sources)
        if M < 1 or N < 1:
            raise ValidationError(f"array sizes must be >= 1, got M={M}, N={N}")
        if not self.spacing > 0:
            raise ValidationError(f"spacing must be positive, got {self.spacing}")
        if not self.sound_speed > 0:
            raise ValidationError(f"sound speed must be positive, got {self.sound_speed}")
        freqs = np.array(self.frequencies, dtype=float).ravel()
        if freqs.size < 1:
            raise ValidationError("at least one frequency is required")
        if not np.all(np.isfinite(freqs)) or np.any(np.diff(freqs) <= 0):
            raise ValidationError("frequencies must be finite and strictly increasing")
        m0 = midpoint_index(M) if self.ref_receiver is None else int(self.ref_receiver)
        n0 = midpoint_index(N) if self.ref_source is None else int(self.ref_source)
        if not self._external_refs and not 1 <= m0 <= M:
            raise ValidationError(f"ref_receiver must lie in [1, {M}], got {m0}")
        if not self._external_refs and not 1 <= n0 <= N:
            raise ValidationError(f"ref_source must lie in [1, {N}], got {n0}")
        if self.source_spectrum is None:
            spec = np.ones(freqs.size, dtype=complex)
        else:
            spec = np.array(self.source_spectrum, dtype=complex).ravel()
        if spec.size != freqs.size:
            raise ValidationError(
                f"source_spectrum has {spec.size} entries, expected {freqs.size}"
            )
        if np.any(spec == 0) or not np.all(np.isfinite(spec)):
            raise ValidationError("source_spectrum entries must be finite and non-zero")
        freqs.flags.writeable = False
        spec.flags.writeable = False
        object.__setattr__(self, "num_receivers", M)
        object.__setattr__(self, "num_sources", N)
        object.__setattr__(self, "spacing", float(self.spacing))
        object.__setattr__(self, "sound_speed", float(self.sound_speed))
        object.__setattr__(self, "frequencies", freqs)
        object.__setattr__(self, "ref_receiver", m0)
        object.__setattr__(self, "ref_source", n0)
        object.__setattr__(self, "source_spectrum", spec)

    @property
    def num_freqs(self) -> int:
        return self.frequencies.size

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.num_receivers, self.num_sources, self.num_freqs)

    def delay(self, theta_deg):
        return delay(theta_deg, self.spacing, self.sound_speed)

    def reduced(self, sub_receivers: int, sub_sources: int, sub_freqs: int,
                freq_offset: int = 0) -> "ArrayGeometry":
        """Geometry of a sub-cube starting at receiver/source 1.

        Keeps the reference indices of the full arrays (they need not lie inside
        the sub-array) so phases stay referenced to the same elements.
        ``freq_offset`` selects which contiguous block of frequencies is kept.
        """
        if not 1 <= sub_freqs <= self.num_freqs - freq_offset or freq_offset < 0:
            raise ValidationError(
                f"sub-band [{freq_offset}, {freq_offset + sub_freqs}) exceeds "
                f"{self.num_freqs} frequencies"
            )
        if not (1 <= sub_receivers <= self.num_receivers
                and 1 <= sub_sources <= self.num_sources):
            raise ValidationError("sub-array larger than the array")
        sl = slice(freq_offset, freq_offset + sub_freqs)
        return _ReducedGeometry(
            num_receivers=sub_receivers,
            num_sources=sub_sources,
            spacing=self.spacing,
            sound_speed=self.sound_speed,
            frequencies=self.frequencies[sl],
            source_spectrum=self.source_spectrum[sl],
            ref_receiver=self.ref_receiver,
            ref_source=self.ref_source,
        )


class _ReducedGeometry(ArrayGeometry):
    _external_refs = True


@dataclass(frozen=True)
class RaypathParams:
    """One raypath: amplitude, emission/reception angles (deg), arrival time (s)."""

    amplitude: float
    emission_angle: float
    reception_angle: float
    arrival_time: float

    def __post_init__(self):
        for name in ("emission_angle", "reception_angle"):
            value = getattr(self, name)
            if not -90.0 < value < 90.0:
                raise ValidationError(f"{name} must lie in (-90, 90) degrees, got {value}")
        if not self.arrival_time >= 0:
            raise ValidationError(f"arrival_time must be >= 0, got {self.arrival_time}")
        if not np.isfinite(self.amplitude):
            raise ValidationError("amplitude must be finite")


@dataclass(frozen=True)
class FlatIndexLayout:
    """Flat position of a (receiver, source, frequency) triple, all 1-based."""

    sub_receivers: int
    sub_sources: int
    sub_freqs: int
    length: int = field(init=False)

    def __post_init__(self):
        if min(self.sub_receivers, self.sub_sources, self.sub_freqs) < 1:
            raise ValidationError("layout dimensions must be positive")
        object.__setattr__(
            self, "length", self.sub_receivers * self.sub_sources * self.sub_freqs
        )

    def flatten(self, m: int, n: int, f: int) -> int:
        if not (1 <= m <= self.sub_receivers and 1 <= n <= self.sub_sources
                and 1 <= f <= self.sub_freqs):
            raise IndexError(f"({m}, {n}, {f}) outside layout")
        return ((f - 1) * self.sub_sources + (n - 1)) * self.sub_receivers + (m - 1)

    def unflatten(self, index: int) -> tuple[int, int, int]:
        if not 0 <= index < self.length:
            raise IndexError(f"flat index {index} outside [0, {self.length})")
        rest, m = divmod(index, self.sub_receivers)
        f, n = divmod(rest, self.sub_sources)
        return m + 1, n + 1, f + 1


def _steering_cube(geom: ArrayGeometry, theta_e, theta_r, arrival_time) -> np.ndarray:
    m = np.arange(1, geom.num_receivers + 1) - geom.ref_receiver
    n = np.arange(1, geom.num_sources + 1) - geom.ref_source
    tau = (arrival_time
           + n[None, :] * geom.delay(theta_e)
           + m[:, None] * geom.delay(theta_r))
    phase = np.exp(-2j * np.pi * geom.frequencies[None, None, :] * tau[:, :, None])
    return geom.source_spectrum[None, None, :] * phase


def steering_vector(geom: ArrayGeometry, theta_e: float, theta_r: float,
                    arrival_time: float) -> np.ndarray:
    """Model response of the whole array stack to one raypath.

    Entry ``(m, n, f)`` is ``s_f exp(-2j pi nu_f (T + (n-n0) tau_e + (m-m0) tau_r))``;
    the source index pairs with the emission angle and the receiver index with
    the reception angle. Returned in flat order (length ``M*N*F``).
    """
    return _steering_cube(geom, theta_e, theta_r, arrival_time).ravel(order="F")


def quadratic_steering(d: np.ndarray) -> np.ndarray:
    """Fourth-order steering vector ``d kron conj(d)``."""
    d = np.asarray(d)
    if d.size == 0:
        raise ValidationError("steering vector must be non-empty")
    return np.kron(d, d.conj())
