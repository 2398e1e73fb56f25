from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from locwalk.coins import DisorderRealization, Haar, UnitaryCoin, flip, hadamard, sample_haar_many
from locwalk.errors import FlipCoin, NearSpectrum, OffCircle, SingularCorner, SiteOutOfRange
from locwalk.restriction import build_finite_walk
from locwalk.transfer import (
    TransferMatrix,
    leading_coefficient,
    plane_check,
    resolvent_decomposition,
    resolvent_entry_via_transfer,
    scaled_product,
    spectral_polynomial_coefficients,
    spectral_polynomial_eval,
    tau,
    tau_inv,
    tau_many,
    tau_matrix,
    transfer_product,
)


def _unit_z(rng, n):
    return np.exp(2j * np.pi * rng.random(n))


def test_tau_hadamard_closed_form():
    z = np.exp(0.3j)
    s = np.sqrt(2)
    # det H = -1
    expected = s * np.array([[-1 / z, 1 / s], [-1 / s, z]])
    assert np.allclose(tau_matrix(hadamard(), z), expected)


def test_tau_determinant():
    rng = np.random.default_rng(0)
    u = sample_haar_many(rng, 100)
    for m, z in zip(u, _unit_z(rng, 100)):
        t = tau_matrix(m, z)
        # det tau = det U / a^2 * ... = d / a for unitary U
        assert np.linalg.det(t) == pytest.approx(m[1, 1] / m[0, 0], rel=1e-12)


def test_tau_rejects_flip():
    with pytest.raises(FlipCoin):
        tau_matrix(flip(), 1.0)
    with pytest.raises(SingularCorner):
        tau_inv(np.zeros((2, 2)), 1.0)


def test_tau_inverse_roundtrip(rng):
    u = sample_haar_many(rng, 200)
    for m, z in zip(u, _unit_z(rng, 200)):
        back = tau_inv(tau(m, z))
        assert np.linalg.norm(back.matrix - m) <= 1e-12


def test_tau_inverse_off_image_not_unitary():
    z = 1.0
    t = tau_matrix(hadamard(), z) * 2.0
    coin = tau_inv(t, z)
    assert coin.unitarity_residual() > 1e-3


def test_tau_many_matches_single(rng):
    u = sample_haar_many(rng, 6)
    z = 1.3 * np.exp(0.4j)
    stack = tau_many(u, z)
    for m, t in zip(u, stack):
        assert np.allclose(t, tau_matrix(m, z))


@pytest.mark.parametrize("z", [np.exp(0.7j), 1.2 * np.exp(-1.1j), 0.8])
def test_generalized_eigenfunction_recursion(z):
    # Gamma_{x+1} = tau(U_x) Gamma_x for a solution of W phi = z phi, checked on an
    # eigenvector of W(N) when |z| = 1 and on an explicitly propagated solution otherwise
    r = DisorderRealization(Haar(), 31)
    fw = build_finite_walk(r, 6)
    if abs(abs(z) - 1) < 1e-12:
        k = int(np.argmin(np.abs(fw.eigenvalues - z)))
        z, phi = fw.eigenvalues[k], fw.eigenvectors[:, k]
        lo = fw.f_range[0]
        for x in range(-fw.n, fw.n + 1):
            g = phi[[2 * x - 1 - lo, 2 * x - lo]]
            g1 = phi[[2 * x + 1 - lo, 2 * x + 2 - lo]]
            assert np.allclose(tau_matrix(fw.coin(x), z) @ g, g1, atol=1e-12)
    else:
        # apply W(N) - z to the left-adapted solution: it vanishes away from the right wall
        lo = fw.f_range[0]
        phi = np.zeros(fw.dim, dtype=complex)
        g = np.array([1.0, z * np.exp(-1j * fw.eta_l)])
        for x in range(-fw.n, fw.n + 2):
            phi[2 * x - 1 - lo], phi[2 * x - lo] = g
            if x <= fw.n:
                g = tau_matrix(fw.coin(x), z) @ g
        res = fw.matrix @ phi - z * phi
        assert np.abs(res[:-2]).max() <= 1e-10 * np.abs(phi).max()


def test_scaled_product_matches_plain(rng):
    r = DisorderRealization(Haar(), 4)
    z = np.exp(0.9j)
    sp = scaled_product(r, z, -5, 20)
    plain = np.eye(2, dtype=complex)
    for x in range(-5, 21):
        plain = tau_matrix(r.coin_matrix(x), z) @ plain
    assert np.allclose(sp.full(), plain, rtol=1e-12)
    assert np.allclose(transfer_product(r, z, -5, 20), plain, rtol=1e-12)


def test_scaled_product_long_chain_finite():
    r = DisorderRealization(Haar(), 4)
    sp = scaled_product(r, np.exp(0.2j), 0, 5000)
    assert np.all(np.isfinite(sp.matrix)) and sp.log_scale > 100


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32), st.floats(0, 2 * np.pi), st.floats(0, 2 * np.pi), st.floats(0, 2 * np.pi))
def test_plane_invariance(seed, th, p1, p2):
    rng = np.random.default_rng(seed)
    m = sample_haar_many(rng, 1)[0]
    if abs(m[0, 0]) < 1e-6:
        return
    z = np.exp(1j * th)
    v = np.array([np.exp(1j * p1), np.exp(1j * p2)])
    w = plane_check(tau_matrix(m, z), v, z)
    assert abs(abs(w[0]) - abs(w[1])) <= 1e-10 * np.abs(w).max()


def test_plane_check_errors():
    t = TransferMatrix(tau_matrix(hadamard(), 1.1), 1.1)
    with pytest.raises(OffCircle):
        plane_check(t, [1, 1])
    with pytest.raises(ValueError):
        plane_check(tau_matrix(hadamard(), 1.0), [1, 2], 1.0)


def test_plane_not_preserved_off_circle():
    z = 1.3
    w = tau_matrix(hadamard(), z) @ np.array([1.0, 1.0])
    assert abs(abs(w[0]) - abs(w[1])) > 1e-3


def _z_off_spectrum(fw, rng, min_dist=1e-3):
    while True:
        z = rng.uniform(0.7, 1.3) * np.exp(2j * np.pi * rng.random())
        if rng.random() < 0.5:
            z = z / abs(z)
        if np.min(np.abs(fw.eigenvalues - z)) > min_dist:
            return z


@pytest.mark.parametrize("n", [0, 1, 4, 8])
def test_resolvent_matches_dense_inverse(n, rng):
    fw = build_finite_walk(DisorderRealization(Haar(), 50 + n), n, rng.random(), rng.random())
    z = _z_off_spectrum(fw, rng)
    dense = np.abs(np.linalg.inv(fw.matrix - z * np.eye(fw.dim)))
    lo, hi = fw.f_range
    for row in range(lo, hi + 1):
        for col in range(-2 * n, 2 * n + 2):
            val = resolvent_entry_via_transfer(fw, z, row, col, check_spectrum=False)
            ref = dense[row - lo, col - lo]
            assert abs(val - ref) <= 1e-8 * ref


def test_resolvent_errors():
    fw = build_finite_walk(DisorderRealization(Haar(), 1), 2)
    with pytest.raises(SiteOutOfRange):
        resolvent_entry_via_transfer(fw, 1.5, 0, 2 * 2 + 2)
    with pytest.raises(SiteOutOfRange):
        resolvent_entry_via_transfer(fw, 1.5, 100, 0)
    with pytest.raises(NearSpectrum):
        resolvent_entry_via_transfer(fw, fw.eigenvalues[3], 0, 0)


def test_resolvent_decomposition_matches_dense(rng):
    fw = build_finite_walk(DisorderRealization(Haar(), 8), 6, 0.5, 1.0)
    for _ in range(10):
        z = _z_off_spectrum(fw, rng)
        z = z / abs(z)
        if np.min(np.abs(fw.eigenvalues - z)) < 1e-3:
            continue
        dense = np.abs(np.linalg.inv(fw.matrix - z * np.eye(fw.dim)))
        lo = fw.f_range[0]
        for x, y in [(-6, 6), (-2, 3), (0, 1)]:
            dec = resolvent_decomposition(fw, z, x, y)
            assert abs(abs(dec.phi_minus[0]) - abs(dec.phi_minus[1])) < 1e-12
            assert abs(abs(dec.phi_plus[0]) - abs(dec.phi_plus[1])) < 1e-12
            assert np.linalg.norm(dec.phi_minus) == pytest.approx(1.0)
            ref = dense[2 * x - lo, 2 * y - 1 - lo]
            assert dec.value == pytest.approx(ref, rel=1e-9)


def test_resolvent_decomposition_requires_circle():
    fw = build_finite_walk(DisorderRealization(Haar(), 8), 3)
    with pytest.raises(OffCircle):
        resolvent_decomposition(fw, 1.2, -1, 1)
    with pytest.raises(SiteOutOfRange):
        resolvent_decomposition(fw, 1.0, 1, 1)


@pytest.mark.parametrize("n", [0, 2, 4])
def test_spectral_polynomial(n):
    fw = build_finite_walk(DisorderRealization(Haar(), 70 + n), n, 0.3, 2.0)
    for lam in fw.eigenvalues:
        assert abs(spectral_polynomial_eval(fw, lam)) <= 1e-9
    coeffs = spectral_polynomial_coefficients(fw, 4 * (n + 1) + 8)
    deg = 4 * (n + 1)
    assert np.abs(coeffs[deg + 1 :]).max() <= 1e-10 * np.abs(coeffs).max()
    assert abs(coeffs[deg] - leading_coefficient(fw)) <= 1e-10 * abs(coeffs[deg])
    roots = np.sort_complex(np.roots(coeffs[: deg + 1][::-1]))
    # every root is an eigenvalue and vice versa
    dist = np.abs(roots[:, None] - fw.eigenvalues[None, :])
    assert dist.min(axis=1).max() <= 1e-8 and dist.min(axis=0).max() <= 1e-8


def test_characteristic_polynomial_proportional():
    # independent route: det(z - W) has the same zeros, so the ratio is constant
    fw = build_finite_walk(DisorderRealization(Haar(), 3), 2, 1.0, 0.4)
    zs = [1.7, -0.6 + 0.9j, 0.3j]
    ratios = [spectral_polynomial_eval(fw, z) / np.linalg.det(z * np.eye(fw.dim) - fw.matrix) for z in zs]
    assert np.allclose(ratios, ratios[0], rtol=1e-10)
    assert ratios[0] == pytest.approx(leading_coefficient(fw), rel=1e-10)


def test_leading_coefficient_rejects_flip():
    r = DisorderRealization(Haar(), 3).with_overrides({1: flip()})
    fw = build_finite_walk(r, 2)
    with pytest.raises(FlipCoin):
        leading_coefficient(fw)


def test_unitary_coin_type_accepted():
    c = UnitaryCoin.from_matrix(hadamard().matrix)
    assert np.allclose(tau_matrix(c, 1.0), tau_matrix(c.matrix, 1.0))


def test_tau_examples_identity():
    from locwalk.coins import identity_coin

    assert np.allclose(tau_matrix(identity_coin(), 1.0), np.eye(2))
    back = tau_inv(np.eye(2), 1.0)
    assert np.allclose(back.matrix, np.eye(2))


def test_tau_hadamard_printed_form():
    z = np.exp(1.1j)
    s = np.sqrt(2)
    assert np.allclose(tau_matrix(hadamard(), z), [[-s / z, 1], [-1, s * z]])


def test_transfer_product_ranges():
    r = DisorderRealization(Haar(), 8)
    z = np.exp(0.5j)
    assert np.array_equal(transfer_product(r, z, 3, 2), np.eye(2))
    assert np.allclose(transfer_product(r, z, 4, 4), tau_matrix(r.coin_matrix(4), z))


def test_plane_check_examples():
    v = np.array([1, 1]) / np.sqrt(2)
    w = plane_check(tau_matrix(hadamard(), 1.0), v, 1.0)
    assert abs(abs(w[0]) - abs(w[1])) <= 1e-12
    assert np.array_equal(plane_check(np.eye(2), v, 1.0), v)


@pytest.mark.parametrize("radius", [1.3, 0.7])
def test_resolvent_examples_n4(radius):
    fw = build_finite_walk(DisorderRealization(Haar(), 389), 4)
    z = radius * np.exp(0.77j)
    dense = np.abs(np.linalg.inv(fw.matrix - z * np.eye(fw.dim)))
    lo, hi = fw.f_range
    for row in range(lo, hi + 1):
        for col in range(-8, 10):
            assert resolvent_entry_via_transfer(fw, z, row, col) == pytest.approx(dense[row - lo, col - lo], rel=1e-8)


def test_spectral_polynomial_midpoints_nonzero():
    fw = build_finite_walk(DisorderRealization(Haar(), 398), 4)
    ph = np.sort(np.angle(fw.eigenvalues) % (2 * np.pi))
    mids = 0.5 * (ph + np.roll(ph, -1) + np.r_[np.zeros(ph.size - 1), 2 * np.pi])
    circle = np.exp(2j * np.pi * np.arange(2048) / 2048)
    cmax = max(abs(spectral_polynomial_eval(fw, w)) for w in circle)
    vals = np.array([abs(spectral_polynomial_eval(fw, np.exp(1j * m))) for m in mids])
    assert vals.min() > 1e-6 * cmax


@pytest.mark.parametrize("n", [0, 2, 5])
def test_leading_coefficient_examples(n):
    from locwalk.coins import Fixed, identity_coin

    ident = build_finite_walk(DisorderRealization(Fixed(identity_coin()), 0), n)
    assert leading_coefficient(ident) == pytest.approx(1.0)
    had = build_finite_walk(DisorderRealization(Fixed(hadamard()), 0), n, 0.4, 0.3)
    assert abs(leading_coefficient(had)) == pytest.approx(2 ** ((2 * n + 1) / 2))


def test_leading_coefficient_least_squares_oracle():
    fw = build_finite_walk(DisorderRealization(Haar(), 409), 3, 0.2, 0.6)
    deg = 4 * (fw.n + 1)
    nodes = np.exp(2j * np.pi * (np.arange(60) + 0.37) / 60)
    vand = nodes[:, None] ** np.arange(deg + 1)[None, :]
    vals = np.array([spectral_polynomial_eval(fw, w) for w in nodes])
    coef, *_ = np.linalg.lstsq(vand, vals, rcond=None)
    assert coef[-1] == pytest.approx(leading_coefficient(fw), rel=1e-8)
