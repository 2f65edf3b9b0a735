"""Seeded random streams and the samplers used by the Gibbs sweep.

Base variates (uniform, standard normal) come from numpy's PCG64. Gamma
variates use the Marsaglia-Tsang squeeze/rejection method, with the
``U**(1/shape)`` boost for shapes below one; inverse-gamma and Dirichlet
draws are built on top of it.
"""

from __future__ import annotations

import math

import numpy as np

from .model import DomainError

_SEED_MASK = (1 << 64) - 1


class RngState:
    """Single-owner random stream.

    Two instances built from the same ``(seed, stream)`` produce identical
    draw sequences. Independent runs use ``seed + run_index``; ``stream``
    separates uses that share a seed (pixel noise vs. chain moves).
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed) & _SEED_MASK
        self.stream = int(stream)
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def __repr__(self):
        return f"RngState(seed={self.seed}, stream={self.stream})"

    def uniform(self, size=None):
        return self._gen.random(size)

    def standard_normal(self, size=None):
        return self._gen.standard_normal(size)


def sample_uniform(rng: RngState, size=None):
    """Uniform variate(s) on ``[0, 1)``."""
    return rng.uniform(size)


def sample_normal(rng: RngState, mean: float, variance: float, size=None):
    if not variance > 0:
        raise DomainError(f"normal variance must be positive, got {variance!r}")
    return mean + np.sqrt(variance) * rng.standard_normal(size)


def _gamma_mt_scalar(rng: RngState, shape: float) -> float:
    # Marsaglia & Tsang (2000), valid for shape >= 1.
    d = shape - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    normal, uniform = rng._gen.standard_normal, rng._gen.random
    while True:
        x = normal()
        v = 1.0 + c * x
        if v <= 0:
            continue
        v = v * v * v
        u = uniform()
        x2 = x * x
        if u < 1.0 - 0.0331 * x2 * x2:
            return d * v
        if u > 0 and math.log(u) < 0.5 * x2 + d * (1.0 - v + math.log(v)):
            return d * v


def _gamma_mt(rng: RngState, shape: float, n: int) -> np.ndarray:
    # vectorized twin of _gamma_mt_scalar: retry only the rejected slots
    d = shape - 1.0 / 3.0
    c = 1.0 / np.sqrt(9.0 * d)
    out = np.empty(n)
    todo = np.arange(n)
    while todo.size:
        k = todo.size
        x = rng.standard_normal(k)
        v = 1.0 + c * x
        u = rng.uniform(k)
        ok = v > 0
        v3 = np.where(ok, v, 1.0) ** 3
        x2 = x * x
        accept = ok & (
            (u < 1.0 - 0.0331 * x2 * x2)
            | (np.log(u, where=u > 0, out=np.full(k, -np.inf)) < 0.5 * x2 + d * (1.0 - v3 + np.log(v3)))
        )
        out[todo[accept]] = d * v3[accept]
        todo = todo[~accept]
    return out


def sample_gamma(rng: RngState, shape: float, size=None):
    """Gamma(shape, 1) variate(s)."""
    if not shape > 0 or not np.isfinite(shape):
        raise DomainError(f"gamma shape must be positive, got {shape!r}")
    if size is None:
        if shape >= 1.0:
            return _gamma_mt_scalar(rng, shape)
        g = _gamma_mt_scalar(rng, shape + 1.0)
        return math.exp(math.log(g) + math.log1p(-rng._gen.random()) / shape)
    n = int(np.prod(size))
    if shape >= 1.0:
        g = _gamma_mt(rng, shape, n)
    else:
        g = _gamma_mt(rng, shape + 1.0, n)
        # log-space keeps tiny shapes from underflowing to exactly zero
        g = np.exp(np.log(g) + np.log1p(-rng.uniform(n)) / shape)
    return g.reshape(size)


def sample_inverse_gamma(rng: RngState, shape: float, scale: float, size=None):
    """Draw(s) with density proportional to ``x**(-shape-1) exp(-scale/x)``."""
    if not scale > 0 or not np.isfinite(scale):
        raise DomainError(f"inverse-gamma scale must be positive, got {scale!r}")
    if not shape > 0 or not np.isfinite(shape):
        raise DomainError(f"inverse-gamma shape must be positive, got {shape!r}")
    return scale / sample_gamma(rng, shape, size)


def sample_dirichlet(rng: RngState, beta: float, dim: int, size=None) -> np.ndarray:
    """Symmetric Dirichlet(beta) point(s) on the ``dim``-simplex.

    With ``size=n`` returns an ``(n, dim)`` array, one draw per row.
    """
    if not beta > 0:
        raise DomainError(f"Dirichlet concentration must be positive, got {beta!r}")
    if int(dim) != dim or dim < 2:
        raise DomainError(f"Dirichlet dimension must be an integer >= 2, got {dim!r}")
    n = 1 if size is None else int(size)
    g = sample_gamma(rng, beta, (n, int(dim)))
    # a row of all-zero gammas is possible for very small beta; redraw those rows
    bad = g.sum(axis=1) == 0
    while np.any(bad):
        g[bad] = sample_gamma(rng, beta, (int(bad.sum()), int(dim)))
        bad = g.sum(axis=1) == 0
    out = g / g.sum(axis=1, keepdims=True)
    return out[0] if size is None else out
