"""Acceptance criteria 1-8, one test each, at the stated tolerances.

Every test records a PASS/FAIL line that is printed in the pytest terminal
summary (section "acceptance criteria") and to stdout.
"""
import contextlib
import json
import time
from importlib import resources

import numpy as np
import pytest

import oracles
from conftest import ACCEPTANCE
from raysep import (ArrayGeometry, Axis, GridSpec, NoiseSpec, RaypathParams, SmoothingPlan,
                    eigensplit, estimate, estimate_trispectrum, eval_double4, extract_peaks,
                    generate_noise, match_to_truth, quadratic_steering, smoothed_steering,
                    subcube_vectors, synthesize)
from raysep.cli import main
from raysep.io import load_config

SCENARIO = resources.files("raysep") / "scenarios" / "table2_simulation.toml"
SEEDS = range(1, 21)


@contextlib.contextmanager
def criterion(n, detail=""):
    info = {"detail": detail}
    try:
        yield info
    except BaseException as exc:
        msg = f"{info['detail']} | {type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"
        ACCEPTANCE[n] = (False, msg)
        print(f"criterion {n}: FAIL  {msg}")
        raise
    ACCEPTANCE[n] = (True, info["detail"])
    print(f"criterion {n}: PASS  {info['detail']}")


def test_criterion_1_oracle_equivalence():
    with criterion(1) as info:
        rng = np.random.default_rng(20240101)
        t0 = time.perf_counter()
        worst = 0.0
        for _ in range(10):
            L, R = int(rng.integers(1, 9)), int(rng.integers(1, 17))
            X = rng.standard_normal((R, L)) + 1j * rng.standard_normal((R, L))
            worst = max(worst, float(np.max(np.abs(estimate_trispectrum(X)
                                                   - oracles.trispectrum(X)))))
        elapsed = time.perf_counter() - t0
        info["detail"] = f"max abs error {worst:.2e} over 10 cases, {elapsed:.2f} s"
        assert worst <= 1e-10
        assert elapsed < 5.0


def test_criterion_2_identical_realizations():
    with criterion(2) as info:
        t0 = time.perf_counter()
        rng = np.random.default_rng(7)
        x = rng.standard_normal(9) + 1j * rng.standard_normal(9)
        C = estimate_trispectrum(np.tile(x, (12, 1)))
        xx = np.outer(x, x.conj())
        ref = -np.kron(xx, xx.conj())
        rel = np.linalg.norm(C - ref) / np.linalg.norm(ref)
        elapsed = time.perf_counter() - t0
        info["detail"] = f"relative Frobenius error {rel:.2e}, {elapsed:.3f} s"
        assert rel <= 1e-12
        assert elapsed < 1.0


def _noise_norm(kind, coeffs, R, seed):
    X = generate_noise((R, 1, 8), NoiseSpec(kind, 0.0, coeffs, seed))[:, 0, :]
    return np.linalg.norm(estimate_trispectrum(X))


def test_criterion_3_gaussian_suppression():
    with criterion(3) as info:
        t0 = time.perf_counter()
        ratios = {}
        for kind, coeffs in (("white", ()), ("colored", (0.8,))):
            small = np.median([_noise_norm(kind, coeffs, 64, s) for s in range(10)])
            large = np.median([_noise_norm(kind, coeffs, 4096, 100 + s) for s in range(10)])
            ratios[kind] = large / small
        elapsed = time.perf_counter() - t0
        info["detail"] = (f"norm ratio R=4096/R=64: white {ratios['white']:.3f}, "
                          f"AR(1) {ratios['colored']:.3f}, {elapsed:.1f} s")
        assert ratios["white"] < 0.25 and ratios["colored"] < 0.25
        assert elapsed < 60.0


ANGLES = Axis(-30.0, 30.0, 0.5)
# Scenarios in which the smoothed data model is exact (see the decisions log):
# one wideband path without smoothing, and narrowband coherent paths
# decorrelated by spatial smoothing (arrival time then only sets a phase).
ORTHO_CASES = [
    (ArrayGeometry(3, 3, 2.5, 1500.0, np.linspace(0, 5000, 4)), SmoothingPlan(),
     [RaypathParams(0.8, 7.5, -12.0, 0.0101)],
     GridSpec(ANGLES, ANGLES, Axis(0.0099, 0.0103, 0.00005))),
    (ArrayGeometry(5, 5, 2.5, 1500.0, [300.0]), SmoothingPlan(2, 2, 1),
     [RaypathParams(1.0, -10.0, 5.0, 0.0101), RaypathParams(-0.8, 12.0, -15.0, 0.0104)],
     GridSpec(ANGLES, ANGLES, Axis.point(0.0101))),
    (ArrayGeometry(7, 7, 2.5, 1500.0, [300.0]), SmoothingPlan(4, 4, 1),
     [RaypathParams(1.0, -10.0, 5.0, 0.0101), RaypathParams(-0.8, 12.0, -15.0, 0.0104),
      RaypathParams(0.6, 3.0, 20.0, 0.0107)],
     GridSpec(ANGLES, ANGLES, Axis.point(0.0101))),
]


def _residuals(geom, plan, paths, band=0):
    X = subcube_vectors(synthesize(geom, paths), plan)
    split = eigensplit(estimate_trispectrum(X), len(paths), "fourth", method="full")
    out = []
    for p in paths:
        d4 = quadratic_steering(smoothed_steering(geom, plan, p.emission_angle,
                                                  p.reception_angle, p.arrival_time, band))
        out.append(np.sqrt(max(split.noise_energy(d4)[0], 0.0)) / np.linalg.norm(d4))
    return split, out


def test_criterion_4_noiseless_orthogonality():
    with criterion(4) as info:
        t0 = time.perf_counter()
        parts = []
        for geom, plan, paths, grid in ORTHO_CASES:
            P = len(paths)
            assert plan.vector_length(geom) >= 3 * P
            split, res = _residuals(geom, plan, paths)
            ps = eval_double4(split, geom, plan, grid, band_offset=0)
            rep = match_to_truth(list(extract_peaks(ps, P)), paths, grid, 1.0)
            parts.append((P, max(res), rep.hits))
        # general wideband off-broadside case, reported only
        g = ArrayGeometry(3, 3, 2.5, 1500.0, np.linspace(0, 5000, 16))
        _, wide = _residuals(g, SmoothingPlan(2, 2, 13),
                             [RaypathParams(1.0, -10.0, 5.0, 0.0101),
                              RaypathParams(-0.8, 12.0, -15.0, 0.0104)])
        elapsed = time.perf_counter() - t0
        info["detail"] = ("; ".join(f"P={P}: residual {r:.1e}, hits {h}/{P}" for P, r, h in parts)
                          + f"; (wideband off-broadside P=2 residual {max(wide):.2f}, not asserted)"
                          + f"; {elapsed:.1f} s")
        for P, r, h in parts:
            assert r <= 1e-6
            assert h == P
        assert elapsed < 120.0


@pytest.fixture(scope="module")
def five_path_runs():
    cfg = load_config(SCENARIO)
    t0 = time.perf_counter()
    runs = {m: [] for m in ("double4", "double2", "smusical")}
    for seed in SEEDS:
        c = cfg.with_seed(seed)
        cube = synthesize(c.geometry, c.paths, c.noise)
        for method in runs:
            ps = estimate(cube, c.num_paths, method, c.plan, c.grid)
            rep = match_to_truth(list(extract_peaks(ps, c.num_paths)), c.paths, ps.grid, 1.0)
            runs[method].append([m.hit for m in rep.matches])
    return cfg, runs, time.perf_counter() - t0


def _table(cfg, runs):
    lines = ["path  theta_e theta_r  T-D/c(ms) " + " ".join(f"{m:>9}" for m in runs)]
    t0 = cfg.metadata["range"] / cfg.geometry.sound_speed
    for i, p in enumerate(cfg.paths):
        rates = " ".join(f"{np.mean([h[i] for h in runs[m]]):>9.2f}" for m in runs)
        lines.append(f"{i + 1:>4} {p.emission_angle:>8.1f} {p.reception_angle:>7.1f} "
                     f"{(p.arrival_time - t0) * 1e3:>10.2f} {rates}")
    lines.append("all-5 seed rate                 "
                 + " ".join(f"{np.mean([all(h) for h in runs[m]]):>9.2f}" for m in runs))
    return "\n".join(lines)


def test_criterion_5_five_path_reproduction(five_path_runs):
    cfg, runs, elapsed = five_path_runs
    with criterion(5) as info:
        rate = np.mean([all(h) for h in runs["double4"]])
        per_seed = [sum(h) for h in runs["double4"]]
        info["detail"] = (f"double4 all-5 rate {rate:.2f} over {len(SEEDS)} seeds "
                          f"(hits per seed {per_seed}), {elapsed:.0f} s")
        print(_table(cfg, runs))
        assert rate >= 0.9
        assert elapsed < 15 * 60


def test_criterion_6_baseline_contrast(five_path_runs):
    cfg, runs, _ = five_path_runs
    with criterion(6) as info:
        all5 = {m: float(np.mean([all(h) for h in runs[m]])) for m in runs}
        miss = {m: float(np.mean([not all(h) for h in runs[m]])) for m in runs}
        per_truth = {m: float(np.mean(runs[m])) for m in runs}
        info["detail"] = ("all-5 rates " + ", ".join(f"{m} {v:.2f}" for m, v in all5.items())
                          + "; per-truth rates "
                          + ", ".join(f"{m} {v:.2f}" for m, v in per_truth.items()))
        print(_table(cfg, runs))
        assert miss["double2"] >= 0.5 and miss["smusical"] >= 0.5
        assert all5["double4"] > all5["double2"] and all5["double4"] > all5["smusical"]


def test_criterion_7_invariance_suite():
    with criterion(7) as info:
        t0 = time.perf_counter()
        g = ArrayGeometry(3, 3, 2.5, 1500.0, np.linspace(0, 5000, 16))
        plan = SmoothingPlan(2, 2, 13)
        paths = [RaypathParams(1.0, 4.0, -3.0, 0.01), RaypathParams(-0.6, -5.0, 6.0, 0.0106)]
        X = subcube_vectors(synthesize(g, paths, NoiseSpec("white", 5.0, (), 4)), plan)
        grid = GridSpec(Axis(-10, 10, 1.0), Axis(-10, 10, 1.0), Axis(0.0098, 0.0108, 1e-4))
        C = estimate_trispectrum(X)
        split = eigensplit(C, 2, "fourth", method="full")
        base = eval_double4(split, g, plan, grid)
        peaks = [p.index for p in extract_peaks(base, 4)]
        for s in (1e-8, 0.5, 42.0, 1e8):
            other = eval_double4(eigensplit(s * C, 2, "fourth", method="full"), g, plan, grid)
            assert np.argmax(other.values) == np.argmax(base.values)
            assert [p.index for p in extract_peaks(other, 4)] == peaks
        phase_err = 0.0
        for phi in (0.3, 1.7, 4.0):
            C2 = estimate_trispectrum(np.exp(1j * phi) * X)
            v = eval_double4(eigensplit(C2, 2, "fourth", method="full"), g, plan, grid).values
            phase_err = max(phase_err, float(np.max(np.abs(v - base.values) / base.values)))
        rng = np.random.default_rng(11)
        comp_err = 0.0
        for _ in range(20):
            v = rng.standard_normal(split.dim) + 1j * rng.standard_normal(split.dim)
            direct = oracles.noise_energy(split.noise_basis, v)
            comp_err = max(comp_err, abs(split.noise_energy(v)[0] - direct) / direct)
        U = np.hstack([split.signal_basis, split.noise_basis])
        recon = np.linalg.norm((U * split.eigenvalues) @ U.conj().T - C) / np.linalg.norm(C)
        elapsed = time.perf_counter() - t0
        info["detail"] = (f"phase {phase_err:.1e}, complement {comp_err:.1e}, "
                          f"reconstruction {recon:.1e}, {elapsed:.1f} s")
        assert phase_err <= 1e-10
        assert comp_err <= 1e-9
        assert recon <= 1e-10
        assert elapsed < 60.0


def test_criterion_8_pipeline_determinism(tmp_path, capsys):
    with criterion(8) as info:
        for run in ("a", "b"):
            assert main(["compare", "--config", str(SCENARIO), "--seed", "7", "--deterministic",
                         "--out-dir", str(tmp_path / run)]) == 0
        capsys.readouterr()
        names = sorted(p.name for p in (tmp_path / "a").iterdir())
        assert names == sorted(p.name for p in (tmp_path / "b").iterdir())
        same = [(tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()
                for n in names]
        info["detail"] = f"{sum(same)}/{len(names)} files identical ({', '.join(names)})"
        json.loads((tmp_path / "a" / "report.json").read_text())
        assert all(same)
