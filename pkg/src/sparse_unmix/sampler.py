"""Metropolis-within-Gibbs sampler for the sparse-Dirichlet PPNMM posterior.

One sweep updates, in order: the abundance vector (random-walk Metropolis on
the simplex), ``b`` (Gaussian full conditional), ``sigma2`` and ``sigma_b2``
(inverse-gamma full conditionals).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import model
from .model import (
    ABUNDANCE_FLOOR,
    DomainError,
    ModelParams,
    PriorHyperparams,
)
from .rand import RngState, sample_inverse_gamma, sample_normal, sample_uniform

# Robbins-Monro gain exponent for the burn-in step-size adaptation.
ADAPT_DECAY = 0.6
MAX_STEP = 1.0
MAX_LOG_STEP = 10.0
PROPOSALS = ("logratio", "additive")


class SamplerError(RuntimeError):
    """A conditional draw failed inside a chain."""


class DegenerateConditionalError(DomainError):
    """The noise-variance conditional is improper because the residual is zero."""


@dataclass(frozen=True)
class SamplerConfig:
    n_iter: int = 10000
    burn_in: int = 1000
    hyper: PriorHyperparams = field(default_factory=PriorHyperparams)
    proposal_step: float = 0.05
    # "logratio": per-coordinate multiplicative walk (default);
    # "additive": one Gaussian step on the first R-1 coordinates.
    proposal: str = "logratio"
    adapt: bool = True
    target_accept: float = 0.3
    seed: int = 0
    # Drop the likelihood from the abundance move and freeze b and sigma2.
    # Diagnostic only: the chain then samples the abundance prior.
    prior_only: bool = False

    def __post_init__(self):
        if int(self.n_iter) != self.n_iter or int(self.burn_in) != self.burn_in:
            raise ValueError("n_iter and burn_in must be integers")
        if not 0 <= self.burn_in < self.n_iter:
            raise ValueError(
                f"need 0 <= burn_in < n_iter, got burn_in={self.burn_in}, n_iter={self.n_iter}"
            )
        if not self.proposal_step > 0:
            raise ValueError(f"proposal_step must be positive, got {self.proposal_step!r}")
        if self.proposal not in PROPOSALS:
            raise ValueError(f"proposal must be one of {PROPOSALS}, got {self.proposal!r}")
        if not 0 < self.target_accept < 1:
            raise ValueError(f"target_accept must be in (0, 1), got {self.target_accept!r}")

    def replace(self, **changes) -> "SamplerConfig":
        values = {k: getattr(self, k) for k in self.__dataclass_fields__}
        values.update(changes)
        return SamplerConfig(**values)


@dataclass(frozen=True, eq=False)
class Chain:
    """Every post-sweep state of one run, stored column-wise."""

    a: np.ndarray
    b: np.ndarray
    sigma2: np.ndarray
    sigma_b2: np.ndarray
    accepted: np.ndarray
    steps: np.ndarray
    accept_count_a: int
    proposal_count_a: int
    final_step: np.ndarray

    def __post_init__(self):
        for name in ("a", "b", "sigma2", "sigma_b2", "accepted", "steps", "final_step"):
            getattr(self, name).setflags(write=False)

    def __len__(self):
        return self.b.shape[0]

    def __getitem__(self, i: int) -> ModelParams:
        return ModelParams(a=self.a[i], b=self.b[i], sigma2=self.sigma2[i], sigma_b2=self.sigma_b2[i])

    @property
    def samples(self) -> list[ModelParams]:
        return [self[i] for i in range(len(self))]

    @property
    def acceptance_rate(self) -> float:
        return self.accept_count_a / self.proposal_count_a if self.proposal_count_a else 0.0

    def acceptance_rate_after(self, burn_in: int) -> float:
        tail = self.accepted[burn_in:]
        return float(tail.mean()) if tail.size else 0.0

    def identical(self, other: "Chain") -> bool:
        return all(
            np.array_equal(getattr(self, k), getattr(other, k))
            for k in ("a", "b", "sigma2", "sigma_b2", "accepted", "steps")
        ) and (self.accept_count_a, self.proposal_count_a, tuple(self.final_step)) == (
            other.accept_count_a,
            other.proposal_count_a,
            tuple(other.final_step),
        )


def sample_b_conditional(rng: RngState, y, M, a, sigma2: float, sigma_b2: float) -> float:
    mean, var = model.b_conditional_moments(y, M, a, sigma2, sigma_b2)
    return float(sample_normal(rng, mean, var))


def sample_sigma2_conditional(rng: RngState, y, M, a, b: float) -> float:
    shape, scale = model.sigma2_conditional_params(y, M, a, b)
    if not scale > 0:
        raise DegenerateConditionalError(
            "residual is exactly zero so the sigma2 conditional is improper; "
            "add noise to the pixel or start from a different state"
        )
    return float(sample_inverse_gamma(rng, shape, scale))


def sample_sigma_b2_conditional(rng: RngState, b: float, hyper: PriorHyperparams) -> float:
    shape, scale = model.sigma_b2_conditional_params(b, hyper)
    return float(sample_inverse_gamma(rng, shape, scale))


def log_abundance_target(y, M, a, b: float, sigma2: float, beta: float, prior_only: bool = False) -> float:
    """Log of the abundance full conditional, up to a constant."""
    a = np.asarray(a, dtype=float)
    logp = (beta - 1.0) * float(np.sum(np.log(a)))
    if not prior_only:
        logp -= model.residual_sq(y, M, a, b) / (2.0 * sigma2)
    return logp


def log_accept_ratio(y, M, params: ModelParams, a_new, hyper: PriorHyperparams, prior_only: bool = False) -> float:
    """Metropolis log-ratio for moving ``params.a`` to ``a_new``.

    Returns ``-inf`` when ``a_new`` has a coordinate below the floor.
    """
    a_new = np.asarray(a_new, dtype=float)
    if np.any(a_new < ABUNDANCE_FLOOR):
        return -math.inf
    args = (params.b, params.sigma2, hyper.beta, prior_only)
    return log_abundance_target(y, M, a_new, *args) - log_abundance_target(y, M, params.a, *args)


def propose_abundance(rng: RngState, a, step: float) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    free = a[:-1] + step * rng.standard_normal(a.size - 1)
    return np.append(free, 1.0 - free.sum())


def metropolis_step_abundance(
    rng: RngState,
    y,
    M,
    params: ModelParams,
    hyper: PriorHyperparams,
    step: float,
    prior_only: bool = False,
) -> tuple[np.ndarray, bool]:
    """One random-walk Metropolis update of the abundances.

    The first ``R-1`` coordinates get Gaussian increments and the last one
    absorbs the sum constraint, so the proposal is symmetric and no Hastings
    correction is needed.
    """
    proposal = propose_abundance(rng, params.a, step)
    if np.any(proposal < ABUNDANCE_FLOOR):
        return np.array(params.a), False
    delta = log_accept_ratio(y, M, params, proposal, hyper, prior_only)
    u = sample_uniform(rng)
    if u == 0.0 or math.log(u) < delta:
        return proposal, True
    return np.array(params.a), False


def log_accept_ratio_logratio(
    y, M, params: ModelParams, a_new, hyper: PriorHyperparams, prior_only: bool = False
) -> float:
    """Metropolis log-ratio for the log-ratio walk.

    Proposals are symmetric in additive-log-ratio coordinates, where the
    target picks up the Jacobian ``prod(a)``; hence the extra ``sum(log a)``.
    """
    base = log_accept_ratio(y, M, params, a_new, hyper, prior_only)
    if base == -math.inf:
        return base
    return base + float(np.sum(np.log(a_new)) - np.sum(np.log(params.a)))


def logratio_step_abundance(
    rng: RngState,
    y,
    M,
    params: ModelParams,
    hyper: PriorHyperparams,
    coordinate: int,
    step: float,
    prior_only: bool = False,
) -> tuple[np.ndarray, bool]:
    """Rescale one abundance by ``exp(step * N(0, 1))``, renormalize, accept or reject."""
    w = np.array(params.a)
    w[coordinate] *= math.exp(step * float(rng.standard_normal()))
    proposal = w / w.sum()
    if proposal.min() < ABUNDANCE_FLOOR:
        return np.array(params.a), False
    delta = log_accept_ratio_logratio(y, M, params, proposal, hyper, prior_only)
    u = sample_uniform(rng)
    if u == 0.0 or math.log(u) < delta:
        return proposal, True
    return np.array(params.a), False


def initial_state(y, M) -> ModelParams:
    """Uniform abundances, ``b = 0``, ``sigma2`` from the linear residual, ``sigma_b2 = 1``."""
    m = model._matrix(M)
    a = model.uniform_abundance(m.shape[1])
    r = np.asarray(y, dtype=float) - m @ a
    sigma2 = max(float(r @ r) / r.size, 1e-12)
    return ModelParams(a=a, b=0.0, sigma2=sigma2, sigma_b2=1.0)


def run_chain(y, M, config: SamplerConfig, init: ModelParams | None = None) -> Chain:
    """Run ``config.n_iter`` sweeps and keep every state.

    Proposal steps adapt toward ``config.target_accept`` during burn-in and
    are frozen afterwards.
    """
    m = model._matrix(M)
    y = model.check_pixel(y, m.shape[0])
    hyper = config.hyper
    beta = hyper.beta
    rng = RngState(config.seed, stream=1)
    normal, uniform = rng._gen.standard_normal, rng._gen.random
    state = init if init is not None else initial_state(y, m)
    if state.a.size != m.shape[1]:
        raise model.DimensionError(
            f"initial abundance has {state.a.size} entries but library has {m.shape[1]} endmembers"
        )

    n, n_members = config.n_iter, m.shape[1]
    logratio = config.proposal == "logratio"
    n_moves = n_members if logratio else 1
    # the log-ratio walk targets the alr-space density, whose Jacobian adds 1 to beta - 1
    prior_power = beta if logratio else beta - 1.0

    a_out = np.empty((n, n_members))
    b_out = np.empty(n)
    s2_out = np.empty(n)
    sb2_out = np.empty(n)
    acc_out = np.zeros((n, n_moves), dtype=bool)
    step_out = np.empty((n, n_moves))

    a = np.array(state.a)
    b, sigma2, sigma_b2 = state.b, state.sigma2, state.sigma_b2
    x = m @ a
    r_cur = y - x - b * x * x
    sum_log_a = float(np.sum(np.log(a)))
    steps = np.full(n_moves, float(config.proposal_step))
    log_steps = np.log(steps)
    log_max_step = math.log(MAX_STEP if not logratio else MAX_LOG_STEP)

    def try_move(proposal):
        # Metropolis accept/reject of one abundance proposal; updates the cache
        nonlocal a, x, r_cur, sum_log_a
        if proposal.min() < ABUNDANCE_FLOOR:
            return False
        new_sum_log = float(np.sum(np.log(proposal)))
        delta = prior_power * (new_sum_log - sum_log_a)
        x_new = m @ proposal
        r_new = y - x_new - b * x_new * x_new
        if not config.prior_only:
            delta -= (float(r_new @ r_new) - float(r_cur @ r_cur)) / (2.0 * sigma2)
        u = uniform()
        if u == 0.0 or math.log(u) < delta:
            a, x, r_cur, sum_log_a = proposal, x_new, r_new, new_sum_log
            return True
        return False

    for i in range(n):
        try:
            if logratio:
                for k in range(n_members):
                    w = a.copy()
                    w[k] *= math.exp(steps[k] * normal())
                    acc_out[i, k] = try_move(w / w.sum())
            else:
                free = a[:-1] + steps[0] * normal(n_members - 1)
                acc_out[i, 0] = try_move(np.append(free, 1.0 - free.sum()))

            if not config.prior_only:
                b = sample_b_conditional(rng, y, m, a, sigma2, sigma_b2)
                r_cur = y - x - b * x * x
                sigma2 = sample_sigma2_conditional(rng, y, m, a, b)
            sigma_b2 = sample_sigma_b2_conditional(rng, b, hyper)
        except (DomainError, FloatingPointError) as exc:
            raise SamplerError(f"sweep {i}: {exc}") from exc

        a_out[i] = a
        b_out[i] = b
        s2_out[i] = sigma2
        sb2_out[i] = sigma_b2
        step_out[i] = steps

        if config.adapt and i < config.burn_in:
            gain = (i + 1.0) ** -ADAPT_DECAY
            log_steps = np.minimum(log_steps + gain * (acc_out[i] - config.target_accept), log_max_step)
            steps = np.exp(log_steps)

    return Chain(
        a=a_out,
        b=b_out,
        sigma2=s2_out,
        sigma_b2=sb2_out,
        accepted=acc_out,
        steps=step_out,
        accept_count_a=int(acc_out.sum()),
        proposal_count_a=int(acc_out.size),
        final_step=steps.copy(),
    )


def posterior_mean(chain: Chain, burn_in: int) -> ModelParams:
    """MMSE summary of the samples from ``burn_in`` on."""
    if not 0 <= burn_in < len(chain):
        raise ValueError(f"burn_in={burn_in} leaves no samples in a chain of length {len(chain)}")
    a = chain.a[burn_in:].mean(axis=0)
    a = a / a.sum()
    return ModelParams(
        a=a,
        b=float(chain.b[burn_in:].mean()),
        sigma2=float(chain.sigma2[burn_in:].mean()),
        sigma_b2=float(chain.sigma_b2[burn_in:].mean()),
    )


@dataclass(frozen=True, eq=False)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def mass_below(self, x: float) -> int:
        """Counts in bins whose right edge is at most ``x``."""
        return int(self.counts[self.edges[1:] <= x + 1e-12].sum())


def component_samples(chain: Chain, component: str) -> np.ndarray:
    """Trace of ``'a1'..'aR'`` (1-based), ``'b'``, ``'sigma2'`` or ``'sigma_b2'``."""
    if component in ("b", "sigma2", "sigma_b2"):
        return getattr(chain, component)
    if isinstance(component, str) and component.startswith("a") and component[1:].isdigit():
        r = int(component[1:])
        if 1 <= r <= chain.a.shape[1]:
            return chain.a[:, r - 1]
    raise ValueError(f"unknown component {component!r}")


def histogram(values, component: str, bins: int) -> Histogram:
    if int(bins) != bins or bins < 1:
        raise ValueError(f"bins must be a positive integer, got {bins!r}")
    values = np.asarray(values, dtype=float)
    if component.startswith("a"):
        rng = (0.0, 1.0)
    else:
        rng = (float(values.min()), float(values.max())) if values.size else (0.0, 1.0)
    counts, edges = np.histogram(values, bins=int(bins), range=rng)
    return Histogram(edges=edges, counts=counts)


def posterior_histogram(chain: Chain, component: str, burn_in: int, bins: int = 50) -> Histogram:
    """Equal-width histogram of one component after burn-in.

    Abundance bins span ``[0, 1]``; other components use the sample range.
    """
    values = component_samples(chain, component)
    if not 0 <= burn_in <= len(chain):
        raise ValueError(f"burn_in={burn_in} outside chain of length {len(chain)}")
    return histogram(values[burn_in:], component, bins)
