"""Scenario configs (TOML), binary cube/grid files and grid export.

Cube file (``SPC1``), little-endian::

    4s   magic "SPC1"
    u32  M, u32 N, u32 F
    F x f64            frequencies (Hz)
    M*N*F x (f64, f64) complex samples, receiver innermost, frequency outermost

Grid file (``PSG1``), little-endian::

    4s   magic "PSG1"
    u32  ndim (2 or 3)
    u8   tag length, then the estimator tag in ASCII
    3 x (f64 start, f64 stop, f64 step)   emission, reception, time axes
    f64 values in C order, shape (n_e, n_r, n_t) or (n_r, n_t)
"""
from __future__ import annotations

import math
import struct
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ConfigError, FormatError, RaysepError, StorageError
from .geometry import ArrayGeometry, RaypathParams
from .smoothing import SmoothingPlan, default_plan
from .spectrum import Axis, GridSpec, PseudoSpectrumGrid
from .synth import NoiseSpec, SpectralCube

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "ScenarioConfig",
    "load_config",
    "parse_config",
    "save_cube",
    "load_cube",
    "save_grid",
    "load_grid",
    "export_grid",
]

CUBE_MAGIC = b"SPC1"
GRID_MAGIC = b"PSG1"


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    name: str
    geometry: ArrayGeometry
    paths: list[RaypathParams]
    noise: NoiseSpec | None
    plan: SmoothingPlan
    grid: GridSpec
    estimator: str = "double4"
    seed: int = 0
    num_paths: int = 0
    metadata: dict[str, Any] = field(default_factory=dict)

    def with_seed(self, seed: int) -> "ScenarioConfig":
        noise = self.noise
        if noise is not None:
            noise = NoiseSpec(noise.kind, noise.snr_db, noise.ar_coeffs, seed)
        return ScenarioConfig(self.name, self.geometry, self.paths, noise, self.plan,
                              self.grid, self.estimator, seed, self.num_paths,
                              self.metadata)


def _get(table: dict, key: str, where: str, kind=float, default=...):
    if key not in table:
        if default is ...:
            raise ConfigError(f"[{where}] missing required key '{key}'")
        return default
    try:
        return kind(table[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{where}] key '{key}': {exc}") from None


def _axis(spec, where: str) -> Axis:
    if not isinstance(spec, (list, tuple)) or len(spec) != 3:
        raise ConfigError(f"[grid] '{where}' must be [start, stop, step]")
    return Axis(*(float(v) for v in spec))


def parse_config(doc: dict, source: str = "<config>") -> ScenarioConfig:
    """Build a validated scenario from a parsed TOML document."""
    try:
        return _parse(doc)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    except RaysepError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def _parse(doc: dict) -> ScenarioConfig:
    scen = doc.get("scenario", {})
    g = doc.get("geometry")
    if g is None:
        raise ConfigError("missing [geometry] table")
    band = g.get("band")
    if band is None:
        raise ConfigError("missing [geometry.band] table")
    freqs = np.linspace(_get(band, "start", "geometry.band"),
                        _get(band, "stop", "geometry.band"),
                        _get(band, "count", "geometry.band", int))
    spectrum = None
    if "source_spectrum_real" in g:
        re = np.asarray(g["source_spectrum_real"], dtype=float)
        im = np.asarray(g.get("source_spectrum_imag", np.zeros_like(re)), dtype=float)
        spectrum = re + 1j * im
    geom = ArrayGeometry(
        num_receivers=_get(g, "num_receivers", "geometry", int),
        num_sources=_get(g, "num_sources", "geometry", int),
        spacing=_get(g, "spacing", "geometry"),
        sound_speed=_get(g, "sound_speed", "geometry"),
        frequencies=freqs,
        ref_receiver=_get(g, "ref_receiver", "geometry", int, None),
        ref_source=_get(g, "ref_source", "geometry", int, None),
        source_spectrum=spectrum,
    )
    metadata = {k: band[k] for k in ("centre", "width", "samples") if k in band}
    range_m = _get(g, "range", "geometry", float, None)
    if range_m is not None:
        metadata["range"] = range_m
    direct = range_m / geom.sound_speed if range_m is not None else None

    paths = []
    for i, p in enumerate(doc.get("paths", [])):
        where = f"paths[{i}]"
        if "arrival_time" in p:
            t = _get(p, "arrival_time", where)
        elif "delay" in p:
            if direct is None:
                raise ConfigError(f"[{where}] 'delay' needs geometry.range")
            t = direct + _get(p, "delay", where)
        else:
            raise ConfigError(f"[{where}] needs 'arrival_time' or 'delay'")
        paths.append(RaypathParams(_get(p, "amplitude", where),
                                   _get(p, "emission_angle", where),
                                   _get(p, "reception_angle", where), t))

    seed = _get(scen, "seed", "scenario", int, 0)
    noise = None
    if "noise" in doc:
        n = doc["noise"]
        noise = NoiseSpec(kind=str(n.get("kind", "white")),
                          snr_db=_get(n, "snr_db", "noise"),
                          ar_coeffs=tuple(n.get("ar_coeffs", ())),
                          seed=_get(n, "seed", "noise", int, seed))

    s = doc.get("smoothing")
    plan = default_plan(geom) if s is None else SmoothingPlan(
        k_e=_get(s, "k_e", "smoothing", int, 1),
        k_r=_get(s, "k_r", "smoothing", int, 1),
        k_f=_get(s, "k_f", "smoothing", int, 1))
    plan.check(geom)

    gr = doc.get("grid", {})
    if "time" in gr:
        grid = GridSpec(_axis(gr.get("emission", [-30, 30, 0.5]), "emission"),
                        _axis(gr.get("reception", [-30, 30, 0.5]), "reception"),
                        _axis(gr["time"], "time"))
    else:
        if not paths:
            raise ConfigError("[grid] needs an explicit 'time' axis when no paths are given")
        base = GridSpec.default([p.arrival_time for p in paths], geom)
        grid = GridSpec(_axis(gr["emission"], "emission") if "emission" in gr else base.emission,
                        _axis(gr["reception"], "reception") if "reception" in gr else base.reception,
                        base.time)

    num_paths = _get(scen, "num_paths", "scenario", int, len(paths))
    if num_paths < 1:
        raise ConfigError("scenario needs at least one path (or scenario.num_paths)")
    return ScenarioConfig(
        name=str(scen.get("name", "scenario")),
        geometry=geom,
        paths=paths,
        noise=noise,
        plan=plan,
        grid=grid,
        estimator=str(scen.get("estimator", "double4")),
        seed=seed,
        num_paths=num_paths,
        metadata=metadata,
    )


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise StorageError(f"cannot read config {path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(doc, str(path))


# -- cube files ---------------------------------------------------------------

def save_cube(path, cube: SpectralCube) -> None:
    M, N, F = cube.geom.shape
    flat = cube.flat()
    payload = np.empty(2 * flat.size, dtype="<f8")
    payload[0::2] = flat.real
    payload[1::2] = flat.imag
    blob = (CUBE_MAGIC + struct.pack("<III", M, N, F)
            + cube.geom.frequencies.astype("<f8").tobytes() + payload.tobytes())
    _write(path, blob)


def load_cube(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a cube file; returns ``(frequencies, data[m, n, f])``."""
    blob = _read(path)
    if len(blob) < 16:
        raise FormatError(f"{path}: truncated header ({len(blob)} of 16 bytes)")
    if blob[:4] != CUBE_MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:4]!r} at byte 0, expected {CUBE_MAGIC!r}")
    M, N, F = struct.unpack_from("<III", blob, 4)
    if min(M, N, F) == 0:
        raise FormatError(f"{path}: zero dimension in header at byte 4 (M={M}, N={N}, F={F})")
    expected = 16 + 8 * F + 16 * M * N * F
    if len(blob) != expected:
        raise FormatError(
            f"{path}: size mismatch for M={M}, N={N}, F={F}: expected {expected} bytes, "
            f"got {len(blob)}"
        )
    freqs = np.frombuffer(blob, dtype="<f8", count=F, offset=16).astype(float)
    raw = np.frombuffer(blob, dtype="<f8", offset=16 + 8 * F)
    if not np.all(np.isfinite(freqs)):
        raise FormatError(f"{path}: non-finite frequency in bytes 16..{16 + 8 * F}")
    bad = np.flatnonzero(~np.isfinite(raw))
    if bad.size:
        raise FormatError(f"{path}: non-finite sample at byte {16 + 8 * F + 8 * int(bad[0])}")
    data = (raw[0::2] + 1j * raw[1::2]).reshape((M, N, F), order="F")
    return freqs, data


def cube_for(config: ScenarioConfig, freqs: np.ndarray, data: np.ndarray) -> SpectralCube:
    """Attach a scenario's geometry to loaded cube data, checking they agree."""
    g = config.geometry
    if data.shape != g.shape:
        raise ConfigError(f"cube dimensions {data.shape} do not match config {g.shape}")
    if not np.allclose(freqs, g.frequencies, rtol=1e-12, atol=0):
        raise ConfigError("cube frequencies do not match the config band")
    return SpectralCube(g, data)


# -- grid files ---------------------------------------------------------------

def save_grid(path, ps: PseudoSpectrumGrid) -> None:
    tag = ps.estimator.encode("ascii")
    head = GRID_MAGIC + struct.pack("<IB", ps.ndim, len(tag)) + tag
    g = ps.grid
    for ax in (g.emission, g.reception, g.time):
        head += struct.pack("<ddd", ax.start, ax.stop, ax.step)
    _write(path, head + np.ascontiguousarray(ps.values, dtype="<f8").tobytes())


def load_grid(path) -> PseudoSpectrumGrid:
    blob = _read(path)
    if blob[:4] != GRID_MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:4]!r} at byte 0, expected {GRID_MAGIC!r}")
    if len(blob) < 9:
        raise FormatError(f"{path}: truncated header")
    ndim, ntag = struct.unpack_from("<IB", blob, 4)
    if ndim not in (2, 3):
        raise FormatError(f"{path}: ndim {ndim} at byte 4 must be 2 or 3")
    pos = 9 + ntag
    if len(blob) < pos + 72:
        raise FormatError(f"{path}: truncated header")
    tag = blob[9:pos].decode("ascii", errors="replace")
    axes = [Axis(*struct.unpack_from("<ddd", blob, pos + 24 * i)) for i in range(3)]
    pos += 72
    grid = GridSpec(*axes)
    shape = grid.shape if ndim == 3 else grid.shape[1:]
    expected = pos + 8 * int(np.prod(shape))
    if len(blob) != expected:
        raise FormatError(f"{path}: size mismatch: expected {expected} bytes, got {len(blob)}")
    values = np.frombuffer(blob, dtype="<f8", offset=pos).reshape(shape).astype(float)
    return PseudoSpectrumGrid(grid, values, tag)


# -- export -------------------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def export_grid(ps: PseudoSpectrumGrid, fmt: str, dest) -> list[Path]:
    """Write ``csv`` (one row per grid point) or ``pgm`` (one P5 image per
    emission-angle slice; rows are reception angles, columns arrival times;
    log10 values mapped linearly onto 0..255 over the whole grid).
    """
    dest = Path(dest)
    g = ps.grid
    values = ps.values if ps.ndim == 3 else ps.values[None]
    emis = g.emission.values() if ps.ndim == 3 else np.array([math.nan])
    if fmt == "csv":
        lines = ["theta_e_deg,theta_r_deg,t_s,value"]
        rec, tim = g.reception.values(), g.time.values()
        for a, te in enumerate(emis):
            for b, tr in enumerate(rec):
                row = values[a, b]
                lines.extend(f"{_fmt(te)},{_fmt(tr)},{_fmt(t)},{_fmt(v)}"
                             for t, v in zip(tim, row))
        _write(dest, ("\n".join(lines) + "\n").encode("ascii"))
        return [dest]
    if fmt == "pgm":
        try:
            dest.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise StorageError(f"cannot create {dest}: {exc.strerror}") from None
        logv = np.log10(values)
        lo, hi = float(logv.min()), float(logv.max())
        if hi > lo:
            pix = np.rint(255.0 * (logv - lo) / (hi - lo)).astype(np.uint8)
        else:
            pix = np.full(values.shape, 128, dtype=np.uint8)
        out = []
        rows, cols = values.shape[1:]
        for a, te in enumerate(emis):
            name = (f"slice_{a:04d}.pgm" if ps.ndim == 3 else "slice_2d.pgm")
            path = dest / name
            header = f"P5\n# theta_e_deg {_fmt(te)}\n{cols} {rows}\n255\n".encode("ascii")
            _write(path, header + pix[a].tobytes())
            out.append(path)
        return out
    raise ConfigError(f"unknown export format {fmt!r}; use 'csv' or 'pgm'")


def _write(path, blob: bytes) -> None:
    try:
        with open(path, "wb") as fh:
            fh.write(blob)
    except OSError as exc:
        raise StorageError(f"cannot write {path}: {exc.strerror}") from None


def _read(path) -> bytes:
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise StorageError(f"cannot read {path}: {exc.strerror}") from None
