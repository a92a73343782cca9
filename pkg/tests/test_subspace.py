import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from raysep import (ArrayGeometry, RaypathParams, SmoothingPlan, ValidationError, eigensplit,
                    estimate_trispectrum, quadratic_steering, subcube_vectors, synthesize)


def rand_herm(rng, n):
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return A + A.conj().T


def full_basis(split):
    return np.hstack([split.signal_basis, split.noise_basis])


def test_identity():
    s = eigensplit(np.eye(6), 2, "second")
    assert np.allclose(s.eigenvalues, 1.0, atol=1e-14)
    U = full_basis(s)
    assert np.linalg.norm(U @ np.diag(s.eigenvalues) @ U.conj().T - np.eye(6)) <= 1e-12


def test_rank_one():
    rng = np.random.default_rng(0)
    v = rng.standard_normal(7) + 1j * rng.standard_normal(7)
    v *= 2 / np.linalg.norm(v)
    s = eigensplit(np.outer(v, v.conj()), 1, "second")
    assert s.eigenvalues[0] == pytest.approx(4.0, rel=1e-12)
    assert np.all(np.abs(s.eigenvalues[1:]) <= 1e-12 * 4)
    u = s.signal_basis[:, 0]
    assert abs(abs(np.vdot(u, v)) - 2.0) <= 1e-12


def test_noiseless_two_path_rank():
    # broadside paths with distinct arrival times: the smoothed model is exact
    g = ArrayGeometry(2, 2, 2.5, 1500.0, np.linspace(0, 5000, 16))
    paths = [RaypathParams(1.0, 0, 0, 1e-3), RaypathParams(-0.7, 0, 0, 1.75e-3)]
    C = estimate_trispectrum(subcube_vectors(synthesize(g, paths), SmoothingPlan(1, 1, 10)))
    s = eigensplit(C, 2, "fourth")
    mags = np.abs(s.eigenvalues)
    assert np.sum(mags > 1e-8 * mags[0]) == 4
    for p in paths:
        d4 = quadratic_steering(oracles.steering(2, 2, g.frequencies[:7], 2.5, 1500.0, 1, 1,
                                                 0.0, 0.0, p.arrival_time))
        assert oracles.noise_energy(s.noise_basis, d4) <= 1e-12 * np.vdot(d4, d4).real


def test_single_path_cumulant_is_negative():
    # constant-modulus data: the only signal eigenvalue is negative, so ranking
    # by magnitude is what puts it first
    g = ArrayGeometry(2, 2, 2.5, 1500.0, np.linspace(0, 5000, 4))
    X = subcube_vectors(synthesize(g, [RaypathParams(1.0, 4.0, -6.0, 0.01)]), SmoothingPlan())
    s = eigensplit(estimate_trispectrum(X), 1, "fourth")
    assert s.eigenvalues[0] < 0
    d4 = quadratic_steering(X[0])
    assert s.noise_energy(d4)[0] <= 1e-10 * np.vdot(d4, d4).real


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 30), st.integers(0, 2**32 - 1))
def test_reconstruction_and_complement(n, seed):
    rng = np.random.default_rng(seed)
    A = rand_herm(rng, n)
    s = eigensplit(A, 1, "second", method="full")
    U = full_basis(s)
    assert np.linalg.norm(U @ np.diag(s.eigenvalues) @ U.conj().T - A) <= 1e-10 * np.linalg.norm(A)
    Ps = s.signal_basis @ s.signal_basis.conj().T
    Pn = s.noise_basis @ s.noise_basis.conj().T
    assert np.linalg.norm(Ps + Pn - np.eye(n)) <= 1e-10
    assert np.linalg.norm(U.conj().T @ U - np.eye(n)) <= 1e-10
    mags = np.abs(s.eigenvalues)
    assert np.all(np.diff(mags) <= 1e-12 * mags[0])


@settings(max_examples=20, deadline=None)
@given(st.integers(3, 20), st.integers(0, 2**32 - 1))
def test_complement_identity_matches_projector(n, seed):
    rng = np.random.default_rng(seed)
    s = eigensplit(rand_herm(rng, n), 2, "second", method="full")
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    direct = oracles.noise_energy(s.noise_basis, v)
    assert s.noise_energy(v)[0] == pytest.approx(direct, rel=1e-9, abs=1e-12)


def test_sort_invariant_under_symmetrization():
    A = rand_herm(np.random.default_rng(3), 12)
    a = eigensplit(A, 2, "second")
    b = eigensplit(0.5 * (A + A.conj().T), 2, "second")
    assert np.allclose(a.eigenvalues, b.eigenvalues, atol=1e-12)


def test_partial_matches_full_projector():
    rng = np.random.default_rng(4)
    Q, _ = np.linalg.qr(rng.standard_normal((40, 40)) + 1j * rng.standard_normal((40, 40)))
    w = np.r_[-9.0, 7.0, 6.0, -5.0, rng.uniform(-0.1, 0.1, 36)]
    A = (Q * w) @ Q.conj().T
    full = eigensplit(A, 2, "fourth", method="full")
    part = eigensplit(A, 2, "fourth", method="partial")
    assert part.noise_basis is None
    assert np.allclose(part.eigenvalues, full.eigenvalues[:4], atol=1e-10)
    Pf = full.signal_basis @ full.signal_basis.conj().T
    Pp = part.signal_basis @ part.signal_basis.conj().T
    assert np.linalg.norm(Pf - Pp) <= 1e-8


def test_errors():
    with pytest.raises(ValidationError, match="P=3.*L=3"):
        eigensplit(np.eye(9), 3, "fourth")
    with pytest.raises(ValidationError, match="P=4"):
        eigensplit(np.eye(4), 4, "second")
    with pytest.raises(ValidationError, match="Hermitian"):
        eigensplit(np.triu(np.ones((4, 4))), 1, "second")
    with pytest.raises(ValidationError):
        eigensplit(np.ones((3, 4)), 1, "second")
    with pytest.raises(ValidationError):
        eigensplit(np.full((3, 3), np.nan), 1, "second")
    with pytest.raises(ValidationError):
        eigensplit(np.eye(4), 1, "third")
    with pytest.raises(ValidationError):
        eigensplit(np.eye(4), 1, "second", method="magic")
