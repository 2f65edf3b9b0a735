"""Domain types, the polynomial post-nonlinear forward model and log-densities.

Observation model for one pixel with ``L`` bands and ``R`` endmembers::

    y = M a + b * (M a) ** 2 + noise,    noise ~ N(0, sigma2 * I_L)

with ``a`` on the probability simplex. Priors: symmetric Dirichlet(beta) on
``a``, N(0, sigma_b2) on ``b``, Jeffreys (1 / sigma2) on ``sigma2`` and
InvGamma(gamma, nu) on ``sigma_b2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import lgamma, log, pi

import numpy as np

SIMPLEX_TOL = 1e-12
# Abundance coordinates are kept at or above this floor inside the sampler.
ABUNDANCE_FLOOR = 1e-10


class DimensionError(ValueError):
    """Library, abundance and pixel sizes are incompatible."""


class DomainError(ValueError):
    """A parameter is outside the support of a density or sampler."""


class BoundaryError(DomainError):
    """An abundance coordinate sits on (or beyond) the simplex boundary."""


def _as_vector(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be one-dimensional, got shape {arr.shape}")
    return arr


def check_simplex(a, tol: float = SIMPLEX_TOL) -> np.ndarray:
    """Return ``a`` as a float array after checking nonnegativity and unit sum."""
    a = _as_vector(a, "abundance")
    if a.size < 1 or not np.all(np.isfinite(a)):
        raise DomainError("abundance vector must be nonempty and finite")
    if np.any(a < 0):
        raise DomainError(f"negative abundance: {a.min()!r}")
    if abs(a.sum() - 1.0) > tol:
        raise DomainError(f"abundances sum to {a.sum()!r}, expected 1")
    return a


@dataclass(frozen=True)
class EndmemberLibrary:
    """Endmember spectra as an ``L x R`` matrix with band centers and labels."""

    wavelengths: np.ndarray
    spectra: np.ndarray
    names: tuple[str, ...]

    def __post_init__(self):
        wl = np.asarray(self.wavelengths, dtype=float)
        m = np.asarray(self.spectra, dtype=float)
        names = tuple(str(n) for n in self.names)
        if m.ndim != 2:
            raise DimensionError(f"spectra must be a matrix, got shape {m.shape}")
        n_bands, n_members = m.shape
        if n_bands < 2 or n_members < 2:
            raise DimensionError(f"need L >= 2 and R >= 2, got L={n_bands}, R={n_members}")
        if wl.shape != (n_bands,):
            raise DimensionError(f"{wl.size} wavelengths for {n_bands} bands")
        if len(names) != n_members:
            raise DimensionError(f"{len(names)} names for {n_members} endmembers")
        if not np.all(np.isfinite(wl)) or np.any(np.diff(wl) <= 0):
            raise DomainError("wavelengths must be finite and strictly increasing")
        if not np.all(np.isfinite(m)) or m.min() < 0 or m.max() > 1:
            raise DomainError("reflectances must be finite and within [0, 1]")
        wl.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "wavelengths", wl)
        object.__setattr__(self, "spectra", m)
        object.__setattr__(self, "names", names)

    @property
    def n_bands(self) -> int:
        return self.spectra.shape[0]

    @property
    def n_endmembers(self) -> int:
        return self.spectra.shape[1]

    def __eq__(self, other):
        if not isinstance(other, EndmemberLibrary):
            return NotImplemented
        return (
            self.names == other.names
            and np.array_equal(self.wavelengths, other.wavelengths)
            and np.array_equal(self.spectra, other.spectra)
        )

    __hash__ = None


@dataclass(frozen=True)
class PriorHyperparams:
    beta: float = 0.5
    gamma: float = 1.0
    nu: float = 0.01

    def __post_init__(self):
        for key in ("beta", "gamma", "nu"):
            value = getattr(self, key)
            if not np.isfinite(value) or value <= 0:
                raise DomainError(f"{key} must be positive, got {value!r}")


@dataclass(frozen=True)
class ModelParams:
    """Full parameter state ``(a, b, sigma2, sigma_b2)``."""

    a: np.ndarray
    b: float
    sigma2: float
    sigma_b2: float

    def __post_init__(self):
        a = check_simplex(self.a).copy()
        a.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", float(self.b))
        for key in ("sigma2", "sigma_b2"):
            value = float(getattr(self, key))
            if not np.isfinite(value) or value <= 0:
                raise DomainError(f"{key} must be positive, got {value!r}")
            object.__setattr__(self, key, value)
        if not np.isfinite(self.b):
            raise DomainError("b must be finite")

    def replace(self, **changes) -> "ModelParams":
        values = dict(a=self.a, b=self.b, sigma2=self.sigma2, sigma_b2=self.sigma_b2)
        values.update(changes)
        return ModelParams(**values)

    def __eq__(self, other):
        if not isinstance(other, ModelParams):
            return NotImplemented
        return (
            np.array_equal(self.a, other.a)
            and self.b == other.b
            and self.sigma2 == other.sigma2
            and self.sigma_b2 == other.sigma_b2
        )

    __hash__ = None


def _matrix(M) -> np.ndarray:
    if isinstance(M, EndmemberLibrary):
        return M.spectra
    m = np.asarray(M, dtype=float)
    if m.ndim != 2:
        raise DimensionError(f"endmember matrix must be 2-D, got shape {m.shape}")
    return m


def linear_mixture(M, a) -> np.ndarray:
    m = _matrix(M)
    a = _as_vector(a, "abundance")
    if m.shape[1] != a.size:
        raise DimensionError(
            f"library has {m.shape[1]} endmembers but abundance vector has {a.size} entries"
        )
    return m @ a


def nonlinear_term(M, a) -> np.ndarray:
    """Elementwise square of the linear mixture, the regressor of ``b``."""
    x = linear_mixture(M, a)
    return x * x


def forward_ppnmm(M, a, b: float) -> np.ndarray:
    """Noise-free spectrum ``Ma + b (Ma)**2``."""
    x = linear_mixture(M, a)
    return x + b * (x * x)


def check_pixel(y, n_bands: int) -> np.ndarray:
    y = _as_vector(y, "pixel")
    if y.size != n_bands:
        raise DimensionError(f"pixel has {y.size} bands but library has {n_bands}")
    if not np.all(np.isfinite(y)):
        raise DomainError("pixel contains non-finite values")
    return y


def residual_sq(y, M, a, b: float) -> float:
    r = np.asarray(y, dtype=float) - forward_ppnmm(M, a, b)
    return float(r @ r)


def log_likelihood(y, M, params: ModelParams) -> float:
    sigma2 = params.sigma2
    if sigma2 <= 0:
        raise DomainError("sigma2 must be positive")
    y = check_pixel(y, _matrix(M).shape[0])
    n_bands = y.size
    return -0.5 * n_bands * log(2.0 * pi * sigma2) - residual_sq(y, M, params.a, params.b) / (
        2.0 * sigma2
    )


def log_dirichlet_prior(a, beta: float) -> float:
    """Symmetric Dirichlet log-density, normalizing constant included."""
    if not beta > 0:
        raise DomainError(f"beta must be positive, got {beta!r}")
    a = _as_vector(a, "abundance")
    if np.any(a <= 0):
        raise BoundaryError("Dirichlet log-density needs every abundance strictly positive")
    n = a.size
    return lgamma(n * beta) - n * lgamma(beta) + (beta - 1.0) * float(np.sum(np.log(a)))


def log_normal_pdf(x: float, mean: float, variance: float) -> float:
    if variance <= 0:
        raise DomainError("variance must be positive")
    return -0.5 * log(2.0 * pi * variance) - (x - mean) ** 2 / (2.0 * variance)


def log_inverse_gamma_pdf(x: float, shape: float, scale: float) -> float:
    """Density proportional to ``x**(-shape-1) * exp(-scale/x)``."""
    if shape <= 0 or scale <= 0:
        raise DomainError("inverse-gamma shape and scale must be positive")
    if x <= 0:
        raise DomainError("inverse-gamma support is x > 0")
    return shape * log(scale) - lgamma(shape) - (shape + 1.0) * log(x) - scale / x


def log_joint(y, M, params: ModelParams, hyper: PriorHyperparams) -> float:
    """Unnormalized log posterior of ``params`` given pixel ``y``."""
    return (
        log_likelihood(y, M, params)
        + log_dirichlet_prior(params.a, hyper.beta)
        + log_normal_pdf(params.b, 0.0, params.sigma_b2)
        - log(params.sigma2)
        + log_inverse_gamma_pdf(params.sigma_b2, hyper.gamma, hyper.nu)
    )


# Closed-form full conditionals of b, sigma2 and sigma_b2. The sampler draws
# from these; the log-densities exist so they can be checked against log_joint.


def b_conditional_moments(y, M, a, sigma2: float, sigma_b2: float) -> tuple[float, float]:
    if sigma2 <= 0 or sigma_b2 <= 0:
        raise DomainError("sigma2 and sigma_b2 must be positive")
    x = linear_mixture(M, a)
    h = x * x
    r = np.asarray(y, dtype=float) - x
    hh = float(h @ h)
    denom = sigma_b2 * hh + sigma2
    return sigma_b2 * float(r @ h) / denom, sigma_b2 * sigma2 / denom


def sigma2_conditional_params(y, M, a, b: float) -> tuple[float, float]:
    y = np.asarray(y, dtype=float)
    return 0.5 * y.size, 0.5 * residual_sq(y, M, a, b)


def sigma_b2_conditional_params(b: float, hyper: PriorHyperparams) -> tuple[float, float]:
    return 0.5 + hyper.gamma, 0.5 * b * b + hyper.nu


def log_b_conditional(b: float, y, M, params: ModelParams) -> float:
    mean, var = b_conditional_moments(y, M, params.a, params.sigma2, params.sigma_b2)
    return log_normal_pdf(b, mean, var)


def log_sigma2_conditional(sigma2: float, y, M, params: ModelParams) -> float:
    shape, scale = sigma2_conditional_params(y, M, params.a, params.b)
    return log_inverse_gamma_pdf(sigma2, shape, scale)


def log_sigma_b2_conditional(sigma_b2: float, params: ModelParams, hyper: PriorHyperparams) -> float:
    shape, scale = sigma_b2_conditional_params(params.b, hyper)
    return log_inverse_gamma_pdf(sigma_b2, shape, scale)


def uniform_abundance(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)

