"""Synthetic regression problems sized for the experiments and tests."""

from __future__ import annotations

import numpy as np

from .dataio import Dataset


def friedman(n: int, p: int = 10, noise: float = 0.1, seed: int = 0,
             standardize: bool = True) -> Dataset:
    """Friedman's benchmark surface on uniform features (needs p >= 5)."""
    if p < 5:
        raise ValueError("friedman needs at least 5 features")
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(n, p))
    y = (10.0 * np.sin(np.pi * X[:, 0] * X[:, 1])
         + 20.0 * (X[:, 2] - 0.5) ** 2
         + 10.0 * X[:, 3] + 5.0 * X[:, 4])
    if noise > 0.0:
        y = y + noise * rng.standard_normal(n)
    if standardize:
        y = _standardize(y)
    names = [f"x{j}" for j in range(p)]
    return Dataset.from_arrays(X, y, names)


def station_winds(n: int = 6574, p: int = 14, noise: float = 0.25,
                  seed: int = 0, standardize: bool = True) -> Dataset:
    """Correlated multi-station series with a smooth nonlinear response.

    Shaped like a daily wind-speed panel: one latent weather factor drives
    all stations, plus per-station idiosyncratic noise and a slow seasonal
    term, with the response depending nonlinearly on a handful of stations.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(n)
    season = np.sin(2.0 * np.pi * t / 365.25)
    factor = rng.standard_normal(n)
    loadings = rng.uniform(0.4, 0.9, size=p)
    X = (loadings * factor[:, None]
         + np.sqrt(1.0 - loadings ** 2) * rng.standard_normal((n, p))
         + 0.5 * season[:, None])
    y = (X[:, 0] * X[:, 1]
         + np.maximum(X[:, 2], 0.0) * 2.0
         + np.sin(X[:, 3])
         + 0.5 * X[:, 4] ** 2
         + X[:, 5])
    if noise > 0.0:
        y = y + noise * rng.standard_normal(n)
    if standardize:
        y = _standardize(y)
    names = [f"station_{j}" for j in range(p)]
    return Dataset.from_arrays(X, y, names)


def _standardize(y: np.ndarray) -> np.ndarray:
    sd = float(y.std())
    if sd == 0.0:
        return y - float(y.mean())
    return (y - float(y.mean())) / sd
