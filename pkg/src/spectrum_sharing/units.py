"""Decibel and rate-unit conversions.

Everything inside the package works in linear watts and natural-log rates;
these helpers are the only place where dB, dBm or bits appear.
"""

import math

import numpy as np

LN2 = math.log(2.0)


def db_to_linear(db):
    return np.power(10.0, np.asarray(db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))


def dbm_to_watts(dbm):
    return db_to_linear(dbm) * 1e-3


def watts_to_dbm(w):
    return linear_to_db(np.asarray(w, dtype=float) * 1e3)


def convert_rate(value, units):
    """Convert a rate given in nats to ``units`` ("nats" or "bits")."""
    if units == "nats":
        return value
    if units == "bits":
        return value / LN2
    raise ValueError(f"unknown rate units {units!r}; expected 'nats' or 'bits'")
