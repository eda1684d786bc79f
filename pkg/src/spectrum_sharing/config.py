"""Network configuration shared by every module.

`NetworkConfig` holds the scalar model parameters. Defaults describe the
reference scenario: 8 SBSs per operator in a 500 m disc, UEs within 20 m
of their SBS, 10 dBm maximum power, -120 dBm noise, 3 dB SINR threshold,
T_b = 100, gamma = 0.95, epsilon = 0.1 and a constant learning rate of 0.5.
Every RB can host all K operators unless ``b`` says otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Any, Mapping

from .units import db_to_linear, dbm_to_watts


class ConfigError(ValueError):
    """Raised when a configuration violates a model invariant."""


DEFAULT_INTENSITY = 8.0 / (math.pi * 500.0**2)


@dataclass(frozen=True)
class NetworkConfig:
    K: int = 2
    L: int = 4
    c: tuple = (2, 2)
    b: tuple | int | None = None  # None: every RB can host all K operators
    lam: float = DEFAULT_INTENSITY
    area_radius: float = 500.0
    r_c: float = 20.0
    alpha: float = 4.0
    eta: float = 1.0
    sigma2: float = float(dbm_to_watts(-120.0))
    p_tot: float = float(dbm_to_watts(10.0))
    n_levels: int = 10
    sinr_th: float = float(db_to_linear(3.0))
    rho_op: tuple | None = None
    rho_sbs: float = 1.0
    # matching
    T_b: float = 100.0
    # Q-learning
    gamma: float = 0.95
    epsilon: float = 0.1
    beta: float | str = 0.5
    T_p: float | None = None
    exploration: str = "epsilon"
    strict_max: bool = False
    epoch_steps: int = 200
    pmf_mode: str = "empirical"
    # empirical channel
    channel: str = "empirical"
    pl_direct: tuple = (37.0, 20.0)
    pl_cross: tuple = (7.0, 56.0)
    wall_loss_db: float = 15.0
    shadow_sigma_db: float = 4.0
    d_min: float = 1.0
    # analytic rate integrand: "derived" or "printed"
    integrand: str = "derived"

    def __post_init__(self):
        c = _as_int_tuple(self.c, "c")
        b = self.b
        if b is None:
            b = int(self.K)
        if isinstance(b, (int, float)):
            b = (int(b),) * int(self.L)
        b = _as_int_tuple(b, "b")
        rho = self.rho_op
        if rho is None:
            rho = (1.0,) * len(c)
        elif isinstance(rho, (int, float)):
            rho = (float(rho),) * len(c)
        rho = tuple(float(x) for x in rho)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "rho_op", rho)
        object.__setattr__(self, "pl_direct", tuple(float(x) for x in self.pl_direct))
        object.__setattr__(self, "pl_cross", tuple(float(x) for x in self.pl_cross))
        self.validate()

    @property
    def delta(self) -> float:
        """Power quantum: the grid is {0, delta, ..., (n_levels - 1) * delta}."""
        return self.p_tot / self.n_levels

    @property
    def n_children(self) -> int:
        return sum(self.c)

    @property
    def expected_sbs_count(self) -> float:
        return self.lam * math.pi * self.area_radius**2

    def validate(self) -> None:
        def fail(msg):
            raise ConfigError(msg)

        if self.K < 1 or self.L < 1:
            fail(f"K and L must be >= 1 (got K={self.K}, L={self.L})")
        if len(self.c) != self.K:
            fail(f"demand vector c must have length K={self.K} (got {len(self.c)})")
        if len(self.b) != self.L:
            fail(f"supply vector b must have length L={self.L} (got {len(self.b)})")
        if len(self.rho_op) != self.K:
            fail(f"rho_op must have length K={self.K}")
        if any(ck < 1 for ck in self.c):
            fail("every demand c_k must be >= 1")
        if any(bl < 0 for bl in self.b):
            fail("every supply b_l must be >= 0")
        if any(ck > self.L for ck in self.c):
            fail(f"demand c_k <= L violated: c={list(self.c)}, L={self.L}")
        if sum(self.c) > sum(self.b):
            fail(f"sum(c) <= sum(b) violated: {sum(self.c)} > {sum(self.b)}")
        if self.n_levels < 1:
            fail("n_levels >= 1 violated")
        for name in ("lam", "area_radius", "r_c", "alpha", "eta", "sigma2", "p_tot", "sinr_th"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                fail(f"{name} must be strictly positive and finite (got {v})")
        if not 0.0 <= self.epsilon <= 1.0:
            fail(f"0 <= epsilon <= 1 violated (got {self.epsilon})")
        if not 0.0 <= self.gamma <= 1.0:
            fail(f"0 <= gamma <= 1 violated (got {self.gamma})")
        if self.beta != "visits" and not (
            isinstance(self.beta, (int, float)) and 0.0 <= self.beta < 1.0
        ):
            fail(f"beta must be 'visits' or a constant in [0, 1) (got {self.beta!r})")
        if self.T_b <= 0:
            fail("T_b > 0 violated")
        if any(r <= 0 for r in self.rho_op) or self.rho_sbs <= 0:
            fail("weights must be positive")
        if self.exploration not in ("epsilon", "boltzmann"):
            fail(f"exploration must be 'epsilon' or 'boltzmann' (got {self.exploration!r})")
        if self.exploration == "boltzmann" and not (self.T_p and self.T_p > 0):
            fail("boltzmann exploration needs T_p > 0")
        if self.channel not in ("analytic", "empirical"):
            fail(f"channel must be 'analytic' or 'empirical' (got {self.channel!r})")
        if self.integrand not in ("derived", "printed"):
            fail(f"integrand must be 'derived' or 'printed' (got {self.integrand!r})")
        if self.pmf_mode not in ("empirical", "policy"):
            fail(f"pmf_mode must be 'empirical' or 'policy' (got {self.pmf_mode!r})")
        if self.d_min <= 0:
            fail("d_min > 0 violated")
        if self.epoch_steps < 1:
            fail("epoch_steps >= 1 violated")

    def with_(self, **changes) -> "NetworkConfig":
        return replace(self, **changes)


# Dotted config keys -> (field name, converter). Keys ending in _dbm/_db are
# converted to linear units here so the rest of the code never sees dB.
_KEYMAP: dict[str, tuple[str, Any]] = {
    "network.K": ("K", int),
    "network.L": ("L", int),
    "network.c": ("c", lambda v: _as_int_tuple(v, "c")),
    "network.b": ("b", lambda v: v if isinstance(v, int) else _as_int_tuple(v, "b")),
    "network.lambda": ("lam", float),
    "network.sbs_per_operator": ("lam", None),  # resolved against area_radius
    "network.area_radius": ("area_radius", float),
    "network.r_c": ("r_c", float),
    "channel.alpha": ("alpha", float),
    "channel.eta": ("eta", float),
    "channel.noise_dbm": ("sigma2", lambda v: float(dbm_to_watts(v))),
    "channel.mode": ("channel", str),
    "channel.pl_direct": ("pl_direct", tuple),
    "channel.pl_cross": ("pl_cross", tuple),
    "channel.wall_loss_db": ("wall_loss_db", float),
    "channel.shadow_sigma_db": ("shadow_sigma_db", float),
    "channel.d_min": ("d_min", float),
    "power.p_tot_dbm": ("p_tot", lambda v: float(dbm_to_watts(v))),
    "power.n_levels": ("n_levels", int),
    "qos.sinr_th_db": ("sinr_th", lambda v: float(db_to_linear(v))),
    "weights.rho_op": ("rho_op", None),
    "weights.rho_sbs": ("rho_sbs", float),
    "matching.T_b": ("T_b", float),
    "qlearning.gamma": ("gamma", float),
    "qlearning.epsilon": ("epsilon", float),
    "qlearning.beta": ("beta", lambda v: v if v == "visits" else float(v)),
    "qlearning.T_p": ("T_p", lambda v: None if v is None else float(v)),
    "qlearning.exploration": ("exploration", str),
    "qlearning.strict_max": ("strict_max", bool),
    "qlearning.epoch_steps": ("epoch_steps", int),
    "qlearning.pmf_mode": ("pmf_mode", str),
    "rate.integrand": ("integrand", str),
}

REQUIRED_KEYS = ("network.K", "network.L", "network.c")


def config_from_flat(flat: Mapping[str, Any]) -> NetworkConfig:
    """Build a `NetworkConfig` from flat dotted keys (``network.K`` ...).

    Unknown ``network.*``/``channel.*``/... keys are rejected so that typos do
    not silently fall back to defaults. Keys under other prefixes are ignored.
    """
    missing = [k for k in REQUIRED_KEYS if k not in flat]
    if missing:
        raise ConfigError(f"missing required field(s): {', '.join(missing)}")
    prefixes = {k.split(".", 1)[0] for k in _KEYMAP}
    kwargs: dict[str, Any] = {}
    for key, value in flat.items():
        if key.split(".", 1)[0] not in prefixes:
            continue
        if key not in _KEYMAP:
            raise ConfigError(f"unknown config field {key!r}")
        name, conv = _KEYMAP[key]
        if key == "network.sbs_per_operator":
            continue
        try:
            kwargs[name] = conv(value) if conv is not None else value
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key!r}: {value!r} ({exc})") from None
    if "network.sbs_per_operator" in flat:
        radius = kwargs.get("area_radius", NetworkConfig.area_radius)
        kwargs["lam"] = float(flat["network.sbs_per_operator"]) / (math.pi * radius**2)
    try:
        return NetworkConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def config_field_names() -> list[str]:
    return [f.name for f in fields(NetworkConfig)]


def _as_int_tuple(v, name) -> tuple:
    if isinstance(v, (int, float)):
        v = (v,)
    try:
        out = tuple(int(x) for x in v)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a list of integers (got {v!r})") from None
    if any(float(x) != int(x) for x in v):
        raise ConfigError(f"{name} must contain integers (got {v!r})")
    return out
