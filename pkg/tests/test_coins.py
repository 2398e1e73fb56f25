from __future__ import annotations

import json

import numpy as np
import pytest
import scipy.stats

from locwalk.coins import (
    Discrete,
    DisorderRealization,
    Fixed,
    Haar,
    Mixture,
    UnitaryCoin,
    distribution_from_json,
    flip,
    hadamard,
    identity_coin,
    realization_seed,
    sample_haar_many,
    two_coin_set,
    two_coin_x,
)
from locwalk.errors import ConfigError, NotUnitary


@pytest.mark.parametrize("coin", [hadamard(), identity_coin(), flip(), flip(0.7), two_coin_x(0.6, 0.8j)])
def test_named_coins_unitary(coin):
    assert coin.unitarity_residual() < 1e-14


def test_flip_detection():
    assert flip().is_flip
    assert not hadamard().is_flip
    assert UnitaryCoin(1e-15, 1.0, 1.0, 0.0).is_flip


def test_from_matrix_rejects_non_unitary():
    with pytest.raises(NotUnitary):
        UnitaryCoin.from_matrix([[1, 1], [0, 1]])
    with pytest.raises(ValueError):
        UnitaryCoin.from_matrix(np.eye(3))


def test_haar_samples_unitary(rng):
    u = sample_haar_many(rng, 10_000)
    res = np.linalg.norm(np.conj(np.swapaxes(u, 1, 2)) @ u - np.eye(2), axis=(1, 2))
    assert res.max() < 1e-13


def test_haar_moments(rng):
    # under Haar measure |a|^2 is uniform on [0, 1] and det is uniform on the circle
    u = sample_haar_many(rng, 40_000)
    a2 = np.abs(u[:, 0, 0]) ** 2
    assert scipy.stats.kstest(a2, "uniform").pvalue > 1e-3
    det_phase = np.angle(np.linalg.det(u)) % (2 * np.pi) / (2 * np.pi)
    assert scipy.stats.kstest(det_phase, "uniform").pvalue > 1e-3
    # left-invariance: a fixed rotation does not change the law of |a|^2
    a2_rot = np.abs((hadamard().matrix @ u)[:, 0, 0]) ** 2
    assert scipy.stats.ks_2samp(a2, a2_rot).pvalue > 1e-3
    assert abs(u.mean(axis=0)).max() < 0.02


def test_haar_expected_log_abs_a():
    assert Haar().expected_log_abs_a() == pytest.approx(-0.5, abs=1e-12)


def test_haar_expected_log_abs_a_monte_carlo(rng):
    u = sample_haar_many(rng, 200_000)
    mc = np.log(np.abs(u[:, 0, 0])).mean()
    assert mc == pytest.approx(-0.5, abs=0.01)


def test_discrete_sampling_frequencies(rng):
    mu = two_coin_set(0.6, 0.8j, p=0.3)
    s = mu.sample_many(rng, 20_000)
    frac_h = np.mean(np.all(np.isclose(s, hadamard().matrix), axis=(1, 2)))
    assert frac_h == pytest.approx(0.3, abs=0.015)


def test_discrete_validation():
    with pytest.raises(ValueError):
        Discrete(((hadamard(), 0.4), (identity_coin(), 0.4)))
    with pytest.raises(ValueError):
        Discrete(((hadamard(), 1.2), (identity_coin(), -0.2)))


def test_reflectivity_and_log_a():
    mu = Discrete(((flip(), 0.25), (hadamard(), 0.75)))
    assert mu.reflectivity() == 0.25
    assert mu.expected_log_abs_a() == -np.inf
    assert Fixed(hadamard()).expected_log_abs_a() == pytest.approx(-0.5 * np.log(2))
    assert Fixed(hadamard()).is_deterministic
    assert not Haar().is_deterministic


def test_mixture_weights():
    mu = Mixture(((Haar(), 0.5), (Fixed(hadamard()), 0.5)))
    assert mu.continuous_weight == 0.5
    assert mu.expected_log_abs_a() == pytest.approx(0.5 * -0.5 + 0.5 * -0.5 * np.log(2))


@pytest.mark.parametrize(
    "mu",
    [
        Haar(),
        Fixed(hadamard()),
        two_coin_set(0.6, 0.8j),
        Mixture(((Haar(), 0.25), (Fixed(identity_coin()), 0.75))),
    ],
)
def test_json_roundtrip(mu):
    text = json.dumps(mu.to_json())
    back = distribution_from_json(json.loads(text))
    assert back.to_json() == mu.to_json()


def test_json_named_coin():
    mu = distribution_from_json({"kind": "fixed", "coin": "hadamard"})
    assert np.allclose(mu.coin.matrix, hadamard().matrix)


@pytest.mark.parametrize(
    "obj, where",
    [
        ({"kind": "nope"}, "dist.kind"),
        ({"kind": "fixed"}, "dist.coin"),
        ({"kind": "discrete", "atoms": []}, "dist.atoms"),
        ({"kind": "discrete", "atoms": [{"coin": "hadamard"}]}, "dist.atoms[0]"),
        ({"kind": "mixture", "parts": [{"dist": {"kind": "bad"}, "weight": 1.0}]}, "dist.parts[0].dist"),
        ({"kind": "fixed", "coin": [[1, 0], [1, 0], [0, 0], [1, 0]]}, "not unitary"),
    ],
)
def test_json_errors(obj, where):
    with pytest.raises(ConfigError, match=where.replace("[", r"\[").replace("]", r"\]")):
        distribution_from_json(obj)


def test_realization_is_deterministic_and_local():
    r1 = DisorderRealization(Haar(), 7)
    r2 = DisorderRealization(Haar(), 7)
    # different access order, same coins
    a = r1.coins(-100, 100)
    for x in (50, -3, 99, -100):
        assert np.array_equal(r2.coin_matrix(x), a[x + 100])
    assert np.array_equal(r2.coins(-100, 100), a)
    assert not np.array_equal(DisorderRealization(Haar(), 8).coins(-100, 100), a)


def test_realization_overrides():
    r = DisorderRealization(Haar(), 3).with_overrides({5: flip()})
    assert r.coin_at(5).is_flip
    assert np.array_equal(r.coins(0, 10)[5], flip().matrix)
    assert not r.coin_at(4).is_flip


def test_realization_seeds_distinct():
    seeds = {realization_seed(11, k) for k in range(1000)}
    assert len(seeds) == 1000
    assert realization_seed(11, 4) == realization_seed(11, 4)


def test_haar_spec_marginals():
    rng = np.random.default_rng(125)
    u = sample_haar_many(rng, 100_000)
    assert np.abs(u.mean(axis=0)).max() <= 0.02
    assert scipy.stats.kstest(np.abs(u[:, 0, 0]) ** 2, "uniform").statistic <= 0.01


def test_haar_right_invariance(rng):
    u = sample_haar_many(rng, 40_000)
    a2 = np.abs(u[:, 0, 0]) ** 2
    rot = (u @ two_coin_x(0.6, 0.8j).matrix)[:, 0, 0]
    assert scipy.stats.ks_2samp(a2, np.abs(rot) ** 2).pvalue > 1e-3


def test_fixed_realization_constant():
    r = DisorderRealization(Fixed(hadamard()), 5)
    assert np.array_equal(r.coins(-300, 300), np.broadcast_to(hadamard().matrix, (601, 2, 2)))
    assert r.coin_at(17) == r.coin_at(17)


def test_two_coin_site_frequencies():
    r = DisorderRealization(two_coin_set(0.6, 0.8j), 135)
    c = r.coins(0, 9999)
    frac = np.mean(np.all(np.isclose(c, hadamard().matrix), axis=(1, 2)))
    assert 0.47 <= frac <= 0.53


def test_reflectivity_examples():
    assert Fixed(hadamard()).reflectivity() == 0.0
    assert Discrete(((flip(0.4), 0.3), (hadamard(), 0.7))).reflectivity() == 0.3
    assert Haar().reflectivity() == 0.0
