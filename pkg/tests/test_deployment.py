import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from spectrum_sharing.config import ConfigError, NetworkConfig
from spectrum_sharing.deployment import (
    Deployment, instantaneous_sinr, large_scale_gain, pathloss_db, sample_deployment,
)


def test_mean_count_per_operator(cfg):
    counts = np.array([sample_deployment(cfg, s).counts(cfg.K) for s in range(2000)])
    # Poisson(8): mean and variance both 8; SE of the mean ~ 0.045
    assert counts.mean() == pytest.approx(8.0, abs=0.2)
    assert counts.var() == pytest.approx(8.0, rel=0.1)


def test_vanishing_intensity_gives_empty_deployment():
    cfg = NetworkConfig(lam=1e-12)
    assert all(sample_deployment(cfg, s).n_sbs == 0 for s in range(50))


def test_deterministic_given_seed(cfg):
    assert sample_deployment(cfg, 7).same(sample_deployment(cfg, 7))
    assert not sample_deployment(cfg, 7).same(sample_deployment(cfg, 8))


def test_deployment_invariants(cfg):
    for seed in range(20):
        dep = sample_deployment(cfg, seed)
        d = np.hypot(*(dep.ue_xy - dep.sbs_xy).T)
        assert np.all(d <= cfg.r_c)
        assert np.all(dep.fading > 0)
        assert np.all(np.hypot(*dep.sbs_xy.T) <= cfg.area_radius)
        if dep.n_sbs:
            with pytest.raises(ValueError):
                dep.fading[0, 0] = 1.0


def test_ue_radial_density(cfg):
    # r ~ 2r / r_c^2 on [0, r_c]: E[r] = 2 r_c / 3
    d = np.concatenate([np.hypot(*(dep.ue_xy - dep.sbs_xy).T)
                        for dep in (sample_deployment(cfg, s) for s in range(300))])
    assert d.mean() == pytest.approx(2 * cfg.r_c / 3, rel=0.03)


def test_operators_exchangeable(cfg):
    counts = np.array([sample_deployment(cfg, s).counts(2) for s in range(2000)])
    assert abs(counts[:, 0].mean() - counts[:, 1].mean()) < 0.4


def test_invalid_config_rejected():
    with pytest.raises(ConfigError):
        NetworkConfig(K=2, L=1, c=(1, 1), b=(1,))


def test_pathloss_values(cfg):
    assert pathloss_db(cfg, 10.0, "direct") == pytest.approx(57.0)
    assert pathloss_db(cfg, 10.0, "cross") == pytest.approx(78.0)
    assert pathloss_db(cfg, 1.0, "direct") == pytest.approx(37.0)
    with pytest.raises(ValueError):
        pathloss_db(cfg, 0.0)
    with pytest.raises(ValueError):
        pathloss_db(cfg, 1.0, "diagonal")


def _toy(n=4, seed=0):
    rng = np.random.default_rng(seed)
    sbs = rng.uniform(-50, 50, size=(n, 2))
    ue = sbs + rng.uniform(-5, 5, size=(n, 2))
    return Deployment(sbs, ue, np.arange(n) % 2, rng.exponential(size=(n, n)),
                      rng.normal(0, 4, size=(n, n)), seed)


def _sinr_oracle(cfg, dep, rb, power, target, mode):
    def gain(i, j):
        dx = dep.sbs_xy[i][0] - dep.ue_xy[j][0]
        dy = dep.sbs_xy[i][1] - dep.ue_xy[j][1]
        d = math.sqrt(dx * dx + dy * dy)
        if mode == "analytic":
            return d ** -cfg.alpha
        d = max(d, cfg.d_min)
        if i == j:
            pl = 37 + 20 * math.log10(d)
        else:
            pl = 7 + 56 * math.log10(d) + 15
        return 10 ** (-(pl + dep.shadowing_db[i][j]) / 10)

    num = dep.fading[target][target] * gain(target, target) * power[target]
    den = cfg.sigma2
    for j in range(dep.n_sbs):
        if j != target and rb[j] == rb[target]:
            den += dep.fading[j][target] * gain(j, target) * power[j]
    return num / den


@pytest.mark.parametrize("mode", ["analytic", "empirical"])
def test_sinr_matches_direct_evaluation(cfg, mode):
    for seed in range(10):
        dep = _toy(5, seed)
        rng = np.random.default_rng(seed)
        rb = rng.integers(0, 2, size=5).tolist()
        power = rng.uniform(0.001, 0.01, size=5).tolist()
        for t in range(5):
            got = instantaneous_sinr(cfg, dep, rb, power, t, mode)
            assert got == pytest.approx(_sinr_oracle(cfg, dep, rb, power, t, mode), rel=1e-12)


def test_snr_without_interferers(cfg):
    dep = _toy(3)
    s = instantaneous_sinr(cfg, dep, {0: 0}, {0: 0.01}, 0, "analytic")
    d = np.hypot(*(dep.sbs_xy[0] - dep.ue_xy[0]))
    assert s == pytest.approx(dep.fading[0, 0] * d**-4 * 0.01 / cfg.sigma2)


def test_symmetric_interferers_halve_sinr():
    cfg = NetworkConfig(sigma2=1e-300)
    # both interferers sit 10 m from the target UE at (1, 0)
    dep = Deployment(np.array([[0.0, 0.0], [1.0, 10.0], [1.0, -10.0]]),
                     np.array([[1.0, 0.0], [2.0, 10.0], [2.0, -10.0]]),
                     np.array([0, 1, 1]), np.ones((3, 3)), np.zeros((3, 3)), None)
    one = instantaneous_sinr(cfg, dep, {0: 0, 1: 0}, {0: 1.0, 1: 1.0}, 0, "analytic")
    two = instantaneous_sinr(cfg, dep, [0, 0, 0], [1.0, 1.0, 1.0], 0, "analytic")
    assert two == pytest.approx(one / 2, rel=1e-12)


def test_sinr_errors(cfg):
    dep = _toy(3)
    with pytest.raises(KeyError):
        instantaneous_sinr(cfg, dep, [0, 0, 0], [1, 1, 1], 7)
    with pytest.raises(ValueError):
        instantaneous_sinr(cfg, dep, [0, 0, 0], [0, 1, 1], 0)


def test_empirical_gain_uses_distance_floor(cfg):
    dep = Deployment(np.zeros((1, 2)), np.array([[0.2, 0.0]]), np.array([0]),
                     np.ones((1, 1)), np.zeros((1, 1)), None)
    g = large_scale_gain(cfg, dep, "empirical")
    assert g[0, 0] == pytest.approx(10 ** -3.7)


powers = st.floats(min_value=1e-4, max_value=1.0)


@given(p0=powers, p1=powers, p2=powers, bump=st.floats(min_value=1.01, max_value=10.0),
       seed=st.integers(0, 1000), mode=st.sampled_from(["analytic", "empirical"]))
def test_sinr_monotone(p0, p1, p2, bump, seed, mode):
    cfg = NetworkConfig()
    dep = _toy(3, seed)
    rb = [0, 0, 0]
    base = instantaneous_sinr(cfg, dep, rb, [p0, p1, p2], 0, mode)
    assert instantaneous_sinr(cfg, dep, rb, [p0 * bump, p1, p2], 0, mode) > base
    assert instantaneous_sinr(cfg, dep, rb, [p0, p1 * bump, p2], 0, mode) < base
    # dropping an interferer (moving it to another RB) never hurts
    assert instantaneous_sinr(cfg, dep, [0, 0, 1], [p0, p1, p2], 0, mode) >= base
