"""MUSIC-type pseudo-spectra over (emission angle, reception angle, arrival time).

All three estimators evaluate ``1 / |U_n^H v|^2`` through the complement
identity ``|U_n^H v|^2 = |v|^2 - |U_s^H v|^2`` so only the (small) signal
basis is touched. The steering vector factorizes per frequency into an
emission term, a reception term and an arrival-time phase; grid evaluation
contracts the angle terms first and applies the time phases last as one
matrix product, so the cost per grid point is a handful of multiply-adds
instead of an ``L^2``-long inner product.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.ndimage import maximum_filter

from .errors import ValidationError
from .geometry import ArrayGeometry, RaypathParams
from .smoothing import SmoothingPlan, reduced_geometry
from .subspace import EigenSplit

__all__ = [
    "Axis",
    "GridSpec",
    "PseudoSpectrumGrid",
    "Peak",
    "PeakSearch",
    "MatchReport",
    "eval_double4",
    "eval_double2",
    "eval_smoothing_musical",
    "extract_peaks",
    "match_to_truth",
    "FLOOR",
]

FLOOR = 1e-12
ANGLE_CHUNK = 8


@dataclass(frozen=True)
class Axis:
    """Uniform axis ``start, start + step, ...`` up to ``stop`` (inclusive)."""

    start: float
    stop: float
    step: float

    def __post_init__(self):
        if not (math.isfinite(self.start) and math.isfinite(self.stop)):
            raise ValidationError("axis bounds must be finite")
        if not self.step > 0:
            raise ValidationError(f"axis step must be positive, got {self.step}")
        if self.start > self.stop:
            raise ValidationError(f"axis start {self.start} exceeds stop {self.stop}")

    @property
    def size(self) -> int:
        return int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1

    def values(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.size)

    def coordinate(self, value: float) -> float:
        """Fractional cell index of ``value``."""
        return (value - self.start) / self.step

    @classmethod
    def point(cls, value: float) -> "Axis":
        return cls(value, value, 1.0)


@dataclass(frozen=True)
class GridSpec:
    emission: Axis
    reception: Axis
    time: Axis

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.emission.size, self.reception.size, self.time.size)

    @classmethod
    def default(cls, arrival_times: Sequence[float], geom: ArrayGeometry,
                angle_limit: float = 30.0, angle_step: float = 0.5,
                time_steps: int = 200) -> "GridSpec":
        """+-30 deg at 0.5 deg; a time window around the given arrivals.

        The window is padded by 10% of the time-ambiguity period ``1/dnu``
        and never exceeds that period, beyond which grid points alias.
        """
        angles = Axis(-angle_limit, angle_limit, angle_step)
        t = np.asarray(arrival_times, dtype=float)
        period = ambiguity_period(geom)
        lo, hi = float(t.min()), float(t.max())
        half = min(0.5 * (hi - lo) + 0.1 * period, 0.495 * period)
        mid = 0.5 * (lo + hi)
        step = 2 * half / time_steps if half > 0 else 1.0
        return cls(angles, angles, Axis(mid - half, mid - half + step * time_steps, step))


def ambiguity_period(geom: ArrayGeometry) -> float:
    """Arrival-time period of the steering vectors (``1/dnu``; inf if F = 1)."""
    if geom.num_freqs < 2:
        return math.inf
    return 1.0 / float(np.min(np.diff(geom.frequencies)))


@dataclass(frozen=True, eq=False)
class PseudoSpectrumGrid:
    """Estimator values on a grid.

    ``values`` has shape ``(n_theta_e, n_theta_r, n_t)``; for the 2-D
    smoothing-MUSICAL estimator it is ``(n_theta_r, n_t)``.
    """

    grid: GridSpec
    values: np.ndarray
    estimator: str

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        expected = self.grid.shape if v.ndim == 3 else self.grid.shape[1:]
        if v.shape != expected:
            raise ValidationError(f"values shape {v.shape} does not match grid {expected}")
        object.__setattr__(self, "values", v)

    @property
    def ndim(self) -> int:
        return self.values.ndim

    @property
    def axes(self) -> tuple[Axis, ...]:
        g = self.grid
        return (g.emission, g.reception, g.time) if self.ndim == 3 else (g.reception, g.time)


# -- steering factors ---------------------------------------------------------

def _phase_factors(rg: ArrayGeometry, theta: np.ndarray, count: int, ref: int) -> np.ndarray:
    """``exp(-2j pi nu_f (i - ref) tau(theta))`` as an ``(F, n_theta, count)`` array."""
    offsets = np.arange(1, count + 1) - ref
    tau = rg.delay(np.asarray(theta, dtype=float))
    return np.exp(-2j * np.pi * rg.frequencies[:, None, None]
                  * tau[None, :, None] * offsets[None, None, :])


def _lag_table(freqs: np.ndarray, weights: np.ndarray):
    """Group ``(f, g)`` pairs by ``nu_f - nu_g``.

    Returns the ``(F^2, n_lag)`` weighted membership matrix and the lag values.
    """
    diff = (freqs[:, None] - freqs[None, :]).ravel()
    tol = 1e-9 * max(1.0, float(np.max(np.abs(freqs))))
    keys = np.round(diff / tol).astype(np.int64)
    _, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
    table = np.zeros((diff.size, first.size), dtype=complex)
    table[np.arange(diff.size), inverse.ravel()] = weights.ravel()
    return table, diff[first]


def _run_chunks(func, n: int, threads: int) -> list:
    starts = list(range(0, n, ANGLE_CHUNK))
    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(func, starts))
    return [func(s) for s in starts]


def second_order_energy(basis: np.ndarray, rg: ArrayGeometry, theta_e: np.ndarray,
                        theta_r: np.ndarray, times: np.ndarray,
                        threads: int = 1) -> np.ndarray:
    """``|basis^H d|^2`` for every grid point, shape ``(n_e, n_r, n_t)``."""
    Ms, Ns, Fs = rg.shape
    K = basis.shape[1]
    Uc = basis.conj().T.reshape(K, Fs, Ns, Ms)
    E = _phase_factors(rg, theta_e, Ns, rg.ref_source)       # (F, A, Ns)
    Rr = _phase_factors(rg, theta_r, Ms, rg.ref_receiver)    # (F, B, Ms)
    # G[f, k, n, b] = sum_m Uc[k, f, n, m] R[f, b, m]
    G = np.matmul(Uc.transpose(1, 0, 2, 3), Rr.transpose(0, 2, 1)[:, None])
    W = rg.source_spectrum[:, None] * np.exp(-2j * np.pi * rg.frequencies[:, None] * times[None, :])
    B = len(theta_r)

    def chunk(a0):
        Ea = E[:, a0:a0 + ANGLE_CHUNK]                      # (F, a, Ns)
        H = np.matmul(Ea[:, None], G)                       # (F, K, a, B)
        A = Ea.shape[1]
        H = H.transpose(1, 2, 3, 0).reshape(K, A * B, Fs)
        Q = H @ W                                           # (K, a*B, T)
        return (Q.real ** 2 + Q.imag ** 2).sum(axis=0).reshape(A, B, -1)

    return np.concatenate(_run_chunks(chunk, len(theta_e), threads), axis=0)


def fourth_order_energy(basis: np.ndarray, rg: ArrayGeometry, theta_e: np.ndarray,
                        theta_r: np.ndarray, times: np.ndarray,
                        threads: int = 1) -> np.ndarray:
    """``|basis^H (d kron conj d)|^2`` for every grid point.

    Uses ``u^H (d kron d*) = conj(d^H U d)`` with ``U`` the ``L x L`` reshape of
    ``u``, expanded per frequency pair so the arrival time enters only through
    ``exp(2j pi (nu_f - nu_g) T)``.
    """
    Ms, Ns, Fs = rg.shape
    K = basis.shape[1]
    U = basis.T.reshape(K, Fs, Ns, Ms, Fs, Ns, Ms)           # [k, f, n, m, g, p, q]
    E = _phase_factors(rg, theta_e, Ns, rg.ref_source)       # (F, A, Ns)
    Rr = _phase_factors(rg, theta_r, Ms, rg.ref_receiver)    # (F, B, Ms)
    B = len(theta_r)
    # S1[k,f,n,m,g,p,b] = sum_q U[k,f,n,m,g,p,q] R[g,b,q]
    S1 = np.matmul(U, Rr.transpose(0, 2, 1))
    # S2[k,f,n,g,p,b] = sum_m conj(R[f,b,m]) S1[k,f,n,m,g,p,b]
    S2 = np.einsum("fbm,kfnmgpb->kfngpb", Rr.conj(), S1, optimize=True)
    del S1
    s = rg.source_spectrum
    table, lags = _lag_table(rg.frequencies, np.outer(s.conj(), s))
    W = np.exp(2j * np.pi * lags[:, None] * times[None, :])  # (n_lag, T)

    def chunk(a0):
        Ea = E[:, a0:a0 + ANGLE_CHUNK]                      # (F, a, Ns)
        A = Ea.shape[1]
        # S3[k,f,n,g,a,b] = sum_p E[g,a,p] S2[k,f,n,g,p,b]
        S3 = np.matmul(Ea, S2)
        # V[k,f,g,a,b] = sum_n conj(E[f,a,n]) S3[k,f,n,g,a,b]
        Ec = Ea.conj().transpose(0, 2, 1)                   # (F, Ns, a)
        V = np.einsum("fna,kfngab->kfgab", Ec, S3, optimize=True)
        V = V.transpose(0, 3, 4, 1, 2).reshape(K, A * B, Fs * Fs)
        Q = (V @ table) @ W                                 # (K, a*B, T)
        return (Q.real ** 2 + Q.imag ** 2).sum(axis=0).reshape(A, B, -1)

    return np.concatenate(_run_chunks(chunk, len(theta_e), threads), axis=0)


# -- estimators ---------------------------------------------------------------

def _invert(energy: np.ndarray, norm2: float) -> np.ndarray:
    return 1.0 / np.maximum(norm2 - energy, FLOOR * norm2)


def _check_split(split: EigenSplit, length: int, order: str) -> None:
    dim = length * length if order == "fourth" else length
    if split.order != order:
        raise ValidationError(f"expected a {order}-order eigensplit, got {split.order}")
    if split.dim != dim:
        raise ValidationError(
            f"subspace dimension {split.dim} does not match steering length {dim} "
            f"implied by geometry and smoothing plan"
        )


def _band(plan: SmoothingPlan, band_offset: int | None) -> int:
    return plan.centre_offset() if band_offset is None else int(band_offset)


def eval_double4(split: EigenSplit, geom: ArrayGeometry, plan: SmoothingPlan,
                 grid: GridSpec, *, band_offset: int | None = None,
                 threads: int = 1) -> PseudoSpectrumGrid:
    """Fourth-order double-array estimator ``1 / (d4^H U_n U_n^H d4)``.

    ``band_offset`` selects the sub-band whose frequencies the steering vector
    uses; default is the centre sub-band.
    """
    rg = reduced_geometry(geom, plan, _band(plan, band_offset))
    L = int(np.prod(rg.shape))
    _check_split(split, L, "fourth")
    norm2 = float(np.sum(np.abs(rg.source_spectrum) ** 2) * rg.num_receivers
                  * rg.num_sources) ** 2
    energy = fourth_order_energy(split.signal_basis, rg, grid.emission.values(),
                                 grid.reception.values(), grid.time.values(), threads)
    return PseudoSpectrumGrid(grid, _invert(energy, norm2), "double4")


def eval_double2(split: EigenSplit, geom: ArrayGeometry, plan: SmoothingPlan,
                 grid: GridSpec, *, band_offset: int | None = None,
                 threads: int = 1) -> PseudoSpectrumGrid:
    """Second-order double-array estimator (double-MUSICAL)."""
    rg = reduced_geometry(geom, plan, _band(plan, band_offset))
    L = int(np.prod(rg.shape))
    _check_split(split, L, "second")
    norm2 = float(np.sum(np.abs(rg.source_spectrum) ** 2) * rg.num_receivers
                  * rg.num_sources)
    energy = second_order_energy(split.signal_basis, rg, grid.emission.values(),
                                 grid.reception.values(), grid.time.values(), threads)
    return PseudoSpectrumGrid(grid, _invert(energy, norm2), "double2")


def eval_smoothing_musical(split: EigenSplit, geom: ArrayGeometry, plan: SmoothingPlan,
                           grid: GridSpec, *, band_offset: int | None = None,
                           threads: int = 1) -> PseudoSpectrumGrid:
    """Point-to-array estimator over (reception angle, arrival time).

    ``geom`` must describe the reference source alone (``num_sources == 1``,
    see ``SpectralCube.reference_source``); the emission axis of ``grid`` is
    ignored.
    """
    if geom.num_sources != 1 or plan.k_e != 1:
        raise ValidationError("smoothing-MUSICAL needs single-source data and k_e = 1")
    rg = reduced_geometry(geom, plan, _band(plan, band_offset))
    L = int(np.prod(rg.shape))
    _check_split(split, L, "second")
    norm2 = float(np.sum(np.abs(rg.source_spectrum) ** 2) * rg.num_receivers)
    energy = second_order_energy(split.signal_basis, rg, np.zeros(1),
                                 grid.reception.values(), grid.time.values(), threads)
    flat_grid = GridSpec(Axis.point(0.0), grid.reception, grid.time)
    return PseudoSpectrumGrid(flat_grid, _invert(energy[0], norm2), "smusical")


# -- peaks and matching -------------------------------------------------------

@dataclass(frozen=True)
class Peak:
    theta_e: float
    theta_r: float
    arrival_time: float
    value: float
    rank: int
    index: tuple[int, ...]


@dataclass(frozen=True)
class PeakSearch:
    peaks: list[Peak]
    requested: int

    @property
    def complete(self) -> bool:
        return len(self.peaks) >= self.requested

    def __iter__(self):
        return iter(self.peaks)

    def __len__(self):
        return len(self.peaks)

    def __getitem__(self, i):
        return self.peaks[i]


def extract_peaks(ps: PseudoSpectrumGrid, count: int) -> PeakSearch:
    """Top ``count`` local maxima (full-neighbourhood stencil).

    A point is a local maximum when no neighbour is larger; ties in value are
    ordered by grid index.
    """
    if count < 1:
        raise ValidationError(f"count must be >= 1, got {count}")
    v = ps.values
    neigh = maximum_filter(v, size=3, mode="constant", cval=-np.inf)
    idx = np.argwhere(v >= neigh)
    vals = v[tuple(idx.T)]
    # lexsort: last key is primary
    order = np.lexsort(tuple(idx[:, i] for i in reversed(range(v.ndim))) + (-vals,))
    order = order[:count]
    axes = [a.values() for a in ps.axes]
    peaks = []
    for rank, j in enumerate(order, start=1):
        ix = tuple(int(i) for i in idx[j])
        coords = [float(ax[i]) for ax, i in zip(axes, ix)]
        if ps.ndim == 2:
            coords = [float(ps.grid.emission.start)] + coords
        peaks.append(Peak(coords[0], coords[1], coords[2], float(vals[j]), rank, ix))
    return PeakSearch(peaks, count)


@dataclass(frozen=True)
class TruthMatch:
    truth: RaypathParams
    hit: bool
    peak: Peak | None
    distance: float | None


@dataclass(frozen=True)
class MatchReport:
    matches: list[TruthMatch]
    tolerance: float

    @property
    def hits(self) -> int:
        return sum(m.hit for m in self.matches)

    @property
    def all_hit(self) -> bool:
        return self.hits == len(self.matches)


def _cell_offsets(peak: Peak, truth: RaypathParams, grid: GridSpec) -> np.ndarray:
    axes = [grid.emission, grid.reception, grid.time]
    values = [truth.emission_angle, truth.reception_angle, truth.arrival_time]
    skip = 3 - len(peak.index)
    return np.array([abs(peak.index[i - skip] - axes[i].coordinate(values[i]))
                     for i in range(skip, 3)])


def match_to_truth(peaks: Sequence[Peak], truths: Sequence[RaypathParams],
                   grid: GridSpec, cell_tolerance: float = 1.0) -> MatchReport:
    """Greedy one-to-one assignment of peaks to true raypaths.

    A truth is hit when an unassigned peak lies within ``cell_tolerance`` cells
    on every axis. Candidate pairs are taken closest first (Chebyshev, then
    Euclidean cell distance; ties by truth order and peak grid index). Peaks
    from a 2-D grid are compared on reception angle and time only.
    """
    pairs = []
    for ti, t in enumerate(truths):
        for p in peaks:
            off = _cell_offsets(p, t, grid)
            cheb = float(off.max())
            if cheb <= cell_tolerance + 1e-9:
                pairs.append((cheb, float(np.hypot.reduce(off)), ti, p.index, p))
    pairs.sort(key=lambda x: x[:4])
    taken_t, taken_p, chosen = set(), set(), {}
    for cheb, _, ti, pidx, p in pairs:
        if ti in taken_t or pidx in taken_p:
            continue
        taken_t.add(ti)
        taken_p.add(pidx)
        chosen[ti] = (p, cheb)
    matches = []
    for ti, t in enumerate(truths):
        if ti in chosen:
            p, dist = chosen[ti]
            matches.append(TruthMatch(t, True, p, dist))
        else:
            matches.append(TruthMatch(t, False, None, None))
    return MatchReport(matches, cell_tolerance)
