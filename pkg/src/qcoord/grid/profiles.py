"""Nominal daily shapes on a ``T``-step horizon (values are multipliers in [0, 1])."""
from __future__ import annotations

import csv
from importlib import resources

import numpy as np


def hours(T: int) -> np.ndarray:
    """Mid-step clock time in hours."""
    return (np.arange(T) + 0.5) * 24.0 / T


def load_shape(T: int) -> np.ndarray:
    """Feeder load: night trough, morning shoulder, evening peak near 19:00."""
    h = hours(T)
    return 0.55 + 0.22 * np.exp(-(((h - 9.0) / 2.5) ** 2)) + 0.45 * np.exp(-(((h - 19.0) / 2.2) ** 2))


def pv_shape(T: int) -> np.ndarray:
    h = hours(T)
    return np.clip(np.sin(np.pi * (h - 6.0) / 12.0), 0.0, None) * ((h > 6.0) & (h < 18.0))


def wind_shape(T: int) -> np.ndarray:
    """Stronger at night."""
    h = hours(T)
    return 0.55 + 0.3 * np.cos(2 * np.pi * (h - 3.0) / 24.0)


RES_SHAPES = {"pv": pv_shape, "wind": wind_shape}


def default_price_dn(T: int = 96) -> np.ndarray:
    """Upstream two-tier day/night price, resampled from the shipped 96-step file."""
    text = resources.files("qcoord.data").joinpath("price_dn.csv").read_text()
    rows = [r for r in csv.DictReader(line for line in text.splitlines() if not line.startswith("#"))]
    base = np.array([float(r["price"]) for r in rows])
    if T == base.size:
        return base
    idx = np.minimum((np.arange(T) * base.size) // T, base.size - 1)
    return base[idx]
