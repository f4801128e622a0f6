"""Conversions between decibel and linear scales.

All powers inside the package are linear milliwatts and all gains are linear ratios.
These helpers are the only place where a dB value turns into a linear one.
"""

from typing import Union

import numpy as np

ArrayOrFloat = Union[float, np.ndarray]


def _as_output(value: np.ndarray) -> ArrayOrFloat:
    if value.ndim == 0:
        return float(value)
    return value


def db_to_linear(value_db: ArrayOrFloat) -> ArrayOrFloat:
    return _as_output(np.power(10.0, np.asarray(value_db, dtype=float) / 10.0))


def linear_to_db(value: ArrayOrFloat) -> ArrayOrFloat:
    return _as_output(10.0 * np.log10(np.asarray(value, dtype=float)))


def dbm_to_mw(value_dbm: ArrayOrFloat) -> ArrayOrFloat:
    """dBm is dB relative to one milliwatt, so the conversion lands in mW."""
    return db_to_linear(value_dbm)


def mw_to_dbm(value_mw: ArrayOrFloat) -> ArrayOrFloat:
    return linear_to_db(value_mw)
