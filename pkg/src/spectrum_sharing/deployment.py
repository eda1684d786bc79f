"""PPP small-cell deployments and the instantaneous channel.

Two channel modes are supported:

* ``"analytic"``: pure power-law pathloss ``d**-alpha`` with Rayleigh fading,
  the model behind the closed-form rate analysis.
* ``"empirical"``: dB pathloss (direct ``37 + 20 log10 d``, cross
  ``7 + 56 log10 d + wall``), log-normal shadowing and Rayleigh fading.

Only SBSs inside the sampled disc interfere (no wrap-around), so interference
near the boundary is mildly underestimated. The cross pathloss is lower than
the direct one for d below about 3.4 m; the formulas are used as given.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .config import NetworkConfig
from .units import db_to_linear


@dataclass(frozen=True, eq=False)
class Deployment:
    """One PPP realization. Arrays are read-only.

    ``fading[i, j]`` and ``shadowing_db[i, j]`` refer to the link from SBS i
    to the UE served by SBS j.
    """

    sbs_xy: np.ndarray
    ue_xy: np.ndarray
    operator: np.ndarray
    fading: np.ndarray
    shadowing_db: np.ndarray
    seed: int | None

    def __post_init__(self):
        for name in ("sbs_xy", "ue_xy", "operator", "fading", "shadowing_db"):
            arr = np.array(getattr(self, name))
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def n_sbs(self) -> int:
        return len(self.operator)

    def sbs_of(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.operator == k)

    def counts(self, K: int) -> np.ndarray:
        return np.bincount(self.operator, minlength=K)

    def distances(self) -> np.ndarray:
        """``d[i, j]`` = distance from SBS i to UE j."""
        diff = self.sbs_xy[:, None, :] - self.ue_xy[None, :, :]
        return np.hypot(diff[..., 0], diff[..., 1])

    def same(self, other: "Deployment") -> bool:
        return all(
            np.array_equal(getattr(self, n), getattr(other, n))
            for n in ("sbs_xy", "ue_xy", "operator", "fading", "shadowing_db")
        )


def _uniform_disc(rng, n, radius):
    r = radius * np.sqrt(rng.random(n))
    theta = 2.0 * np.pi * rng.random(n)
    return np.column_stack((r * np.cos(theta), r * np.sin(theta)))


def sample_deployment(cfg: NetworkConfig, seed) -> Deployment:
    """Sample an independent PPP per operator over the disc of ``area_radius``.

    Each SBS gets one UE uniform on the disc of radius ``r_c`` around it, and
    every SBS-UE link gets fresh exponential fading and normal shadowing (dB).
    """
    cfg.validate()
    rng = np.random.default_rng(seed)
    mean = cfg.expected_sbs_count
    counts = rng.poisson(mean, size=cfg.K)
    sbs = [_uniform_disc(rng, n, cfg.area_radius) for n in counts]
    sbs_xy = np.concatenate(sbs) if sbs else np.zeros((0, 2))
    operator = np.repeat(np.arange(cfg.K), counts)
    n = len(operator)
    ue_xy = sbs_xy + _uniform_disc(rng, n, cfg.r_c)
    fading = rng.exponential(1.0 / cfg.eta, size=(n, n))
    shadowing = rng.normal(0.0, cfg.shadow_sigma_db, size=(n, n))
    return Deployment(sbs_xy, ue_xy, operator, fading, shadowing,
                      seed if isinstance(seed, (int, np.integer)) else None)


def pathloss_db(cfg: NetworkConfig, d, link_kind: str = "direct"):
    """Empirical pathloss in dB at distance ``d`` meters."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("pathloss needs d > 0")
    if link_kind == "direct":
        a, s = cfg.pl_direct
        out = a + s * np.log10(d)
    elif link_kind == "cross":
        a, s = cfg.pl_cross
        out = a + s * np.log10(d) + cfg.wall_loss_db
    else:
        raise ValueError(f"link_kind must be 'direct' or 'cross' (got {link_kind!r})")
    return out if out.ndim else float(out)


def large_scale_gain(cfg: NetworkConfig, deployment: Deployment, mode: str | None = None,
                     sbs=None, ues=None) -> np.ndarray:
    """Linear gain without fading, ``G[i, j]`` from SBS i to UE j.

    ``sbs``/``ues`` select index subsets (default: all).
    """
    mode = mode or cfg.channel
    sbs = np.arange(deployment.n_sbs) if sbs is None else np.asarray(sbs)
    ues = np.arange(deployment.n_sbs) if ues is None else np.asarray(ues)
    diff = deployment.sbs_xy[sbs][:, None, :] - deployment.ue_xy[ues][None, :, :]
    d = np.hypot(diff[..., 0], diff[..., 1])
    if mode == "analytic":
        return np.power(d, -cfg.alpha)
    if mode != "empirical":
        raise ValueError(f"unknown channel mode {mode!r}")
    d = np.maximum(d, cfg.d_min)
    direct = sbs[:, None] == ues[None, :]
    pl = np.where(direct, pathloss_db(cfg, d, "direct"), pathloss_db(cfg, d, "cross"))
    return db_to_linear(-(pl + deployment.shadowing_db[np.ix_(sbs, ues)]))


def instantaneous_sinr(cfg: NetworkConfig, deployment: Deployment, rb_of_sbs,
                       power_of_sbs, target: int, mode: str | None = None,
                       fading: np.ndarray | None = None) -> float:
    """SINR of the UE served by ``target``.

    ``rb_of_sbs`` and ``power_of_sbs`` are mappings or arrays indexed by SBS id;
    SBSs missing from a mapping (or with RB -1) are silent. Interferers are all
    other SBSs on the target's RB.
    """
    n = deployment.n_sbs
    if not (0 <= int(target) < n):
        raise KeyError(f"unknown SBS id {target}")
    target = int(target)
    rb = _get(rb_of_sbs, target, None)
    p = _get(power_of_sbs, target, 0.0)
    if rb is None or rb < 0 or p <= 0:
        raise ValueError(f"SBS {target} must transmit with positive power on some RB")
    h = deployment.fading if fading is None else fading
    others = [j for j in range(n) if j != target and _get(rb_of_sbs, j, -1) == rb]
    idx = np.array([target] + others, dtype=int)
    g = large_scale_gain(cfg, deployment, mode, sbs=idx, ues=[target])[:, 0]
    powers = np.array([_get(power_of_sbs, j, 0.0) for j in idx], dtype=float)
    rx = h[idx, target] * g * powers
    return float(rx[0] / (rx[1:].sum() + cfg.sigma2))


def _get(m, i, default):
    if isinstance(m, Mapping):
        return m.get(i, default)
    v = m[i]
    return default if v is None else v
