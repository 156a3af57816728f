"""Seeded random instances used by the property suites and the CLI."""

from __future__ import annotations

import numpy as np


def rng(seed: int = 0) -> np.random.Generator:
    return np.random.default_rng(seed)


def complex_matrix(gen: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    return gen.normal(size=(rows, cols)) + 1j * gen.normal(size=(rows, cols))


def state(gen: np.random.Generator, n: int, normalized: bool = True) -> np.ndarray:
    v = complex_matrix(gen, n, 1)
    return v / np.linalg.norm(v) if normalized else v


def unitary(gen: np.random.Generator, n: int) -> np.ndarray:
    """Haar-distributed unitary from the QR factorization of a Ginibre matrix."""
    q, r = np.linalg.qr(complex_matrix(gen, n, n))
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def relation(gen: np.random.Generator, rows: int, cols: int, density: float = 0.5) -> np.ndarray:
    return gen.random((rows, cols)) < density


def partition(gen: np.random.Generator, n: int) -> list[int]:
    """Random composition of ``n`` into positive parts."""
    cuts = sorted(gen.choice(np.arange(1, n), size=gen.integers(0, n), replace=False)) if n > 1 else []
    bounds = [0, *cuts, n]
    return [b - a for a, b in zip(bounds, bounds[1:])]
