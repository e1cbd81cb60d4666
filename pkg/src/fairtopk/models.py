"""Exact laws of the protected count in a ranking prefix.

Three generative null models are supported:

* ``Hypergeometric`` -- uniform draws without replacement from a pool with a
  fixed number of protected candidates.
* ``FiniteBinomial(f)`` -- Bernoulli(f) group choice while both groups have
  members left, deterministic fill once one group is exhausted.
* ``WeightedHypergeometric(omega)`` -- sequential draws without replacement in
  which each remaining protected candidate carries weight ``omega`` relative to
  a non-protected one (Wallenius' non-central hypergeometric law).

All three share one forward dynamic program over the Markov chain with states
``(draws j, protected drawn y)``; a single sweep to depth ``k`` yields the law
of ``Y_1, ..., Y_k`` at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Union

import numpy as np
from scipy.special import gammaln

__all__ = [
    "DomainError",
    "PopulationSpec",
    "Hypergeometric",
    "FiniteBinomial",
    "WeightedHypergeometric",
    "NullModel",
    "TargetQuota",
    "CountDistribution",
    "PrefixLaws",
    "PROB_TOL",
    "LARGE_N_THRESHOLD",
    "transition_probability",
    "prefix_laws",
    "count_distribution",
    "cdf",
    "quantile",
    "upper_quantile",
    "odds_ratio_for_target",
    "first_draw_probability",
    "hypergeom_pmf_closed_form",
]

#: Absolute tolerance used when a probability is compared against a level.
PROB_TOL = 1e-12

#: Pool size above which the hypergeometric law of a single prefix is
#: evaluated from log-gamma terms instead of the dynamic program.
LARGE_N_THRESHOLD = 10_000


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of an operation."""


@dataclass(frozen=True)
class PopulationSpec:
    """A finite candidate pool: ``n`` candidates of which ``n_p`` are protected."""

    n: int
    n_p: int

    def __post_init__(self):
        if int(self.n) != self.n or int(self.n_p) != self.n_p:
            raise DomainError(f"pool sizes must be integers, got n={self.n!r}, n_p={self.n_p!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "n_p", int(self.n_p))
        if self.n < 1:
            raise DomainError(f"n must be positive, got n={self.n}")
        if not 0 <= self.n_p <= self.n:
            raise DomainError(f"n_p must lie in [0, n={self.n}], got n_p={self.n_p}")

    @property
    def n_n(self) -> int:
        """Number of non-protected candidates."""
        return self.n - self.n_p

    @property
    def p(self) -> float:
        """Protected share of the pool."""
        return self.n_p / self.n

    def support(self, k: int) -> tuple[int, int]:
        """Smallest and largest attainable protected count in a top-``k`` prefix."""
        return max(0, k - self.n_n), min(k, self.n_p)


@dataclass(frozen=True)
class Hypergeometric:
    """Uniform sampling without replacement (a uniform random permutation)."""

    code = 0

    @property
    def param(self) -> float:
        return 0.0


@dataclass(frozen=True)
class FiniteBinomial:
    """Bernoulli(``f``) group selection with deterministic fill after depletion."""

    f: float

    code = 1

    def __post_init__(self):
        if not 0.0 <= self.f <= 1.0:
            raise DomainError(f"fairness probability f must lie in [0, 1], got f={self.f}")

    @property
    def param(self) -> float:
        return float(self.f)


@dataclass(frozen=True)
class WeightedHypergeometric:
    """Wallenius sampling: protected candidates weighted by odds ratio ``omega``."""

    omega: float

    code = 2

    def __post_init__(self):
        if not (self.omega > 0.0 and math.isfinite(self.omega)):
            raise DomainError(f"odds ratio omega must be positive and finite, got omega={self.omega}")

    @property
    def param(self) -> float:
        return float(self.omega)


NullModel = Union[Hypergeometric, FiniteBinomial, WeightedHypergeometric]


@dataclass(frozen=True)
class TargetQuota:
    """Desired protected share ``rho`` at the top of a selection."""

    rho: float

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise DomainError(f"target proportion rho must lie in (0, 1), got rho={self.rho}")


def _check_model(model) -> None:
    if not isinstance(model, (Hypergeometric, FiniteBinomial, WeightedHypergeometric)):
        raise TypeError(f"unknown null model {model!r}")


def _next_protected(model: NullModel, n: int, n_p: int, j: int, y: np.ndarray) -> np.ndarray:
    """Vectorised transition: P(draw j+1 is protected | j drawn, y protected)."""
    rp = (n_p - y).astype(np.float64)
    rn = ((n - n_p) - (j - y)).astype(np.float64)
    if isinstance(model, Hypergeometric):
        return rp / float(n - j)
    if isinstance(model, WeightedHypergeometric):
        w = model.omega * rp
        with np.errstate(invalid="ignore"):
            q = w / (w + rn)
        return np.where(rp + rn > 0, q, 0.0)
    q = np.full(y.shape, float(model.f))
    q = np.where(rn <= 0, 1.0, q)
    return np.where(rp <= 0, 0.0, q)


def transition_probability(model: NullModel, pop: PopulationSpec, j: int, y: int) -> float:
    """Probability that draw ``j + 1`` is protected after ``j`` draws with ``y`` protected.

    Raises:
        DomainError: if ``(j, y)`` is not a reachable state of the draw process.
    """
    _check_model(model)
    if not 0 <= j < pop.n:
        raise DomainError(f"draw count j={j} outside [0, n={pop.n})")
    if not 0 <= y <= min(j, pop.n_p):
        raise DomainError(f"protected count y={y} outside [0, min(j={j}, n_p={pop.n_p})]")
    if j - y > pop.n_n:
        raise DomainError(f"non-protected count j-y={j - y} exceeds n-n_p={pop.n_n}")
    return float(_next_protected(model, pop.n, pop.n_p, j, np.array([y]))[0])


def _kahan_cumsum(rows: np.ndarray, reverse: bool = False) -> np.ndarray:
    """Compensated cumulative sum along the last axis."""
    a = rows[..., ::-1] if reverse else rows
    out = np.empty_like(a)
    s = np.zeros(a.shape[:-1])
    c = np.zeros(a.shape[:-1])
    for i in range(a.shape[-1]):
        t = a[..., i] - c
        u = s + t
        c = (u - s) - t
        s = u
        out[..., i] = s
    return out[..., ::-1] if reverse else out


@dataclass(frozen=True, eq=False)
class PrefixLaws:
    """Laws of ``Y_1, ..., Y_k`` on the common grid ``y = 0, ..., n_p``.

    ``pmf[j - 1, y]`` is ``P(Y_j = y)``. Entries outside the support are zero.
    """

    model: NullModel
    pop: PopulationSpec
    pmf: np.ndarray

    @property
    def k(self) -> int:
        return self.pmf.shape[0]

    @cached_property
    def cdf(self) -> np.ndarray:
        """``cdf[j-1, y] = P(Y_j <= y)``, clipped to [0, 1]."""
        return np.clip(_kahan_cumsum(self.pmf), 0.0, 1.0)

    @cached_property
    def sf(self) -> np.ndarray:
        """``sf[j-1, y] = P(Y_j >= y)``, summed from the upper tail."""
        return np.clip(_kahan_cumsum(self.pmf, reverse=True), 0.0, 1.0)

    def lower_quantiles(self, gamma: float) -> np.ndarray:
        """``min{y : F_j(y) >= gamma}`` for every prefix length ``j``."""
        ok = self.cdf >= gamma - PROB_TOL
        return np.argmax(ok, axis=1)

    def upper_quantiles(self, gamma: float) -> np.ndarray:
        """``max{y : P(Y_j >= y) >= gamma}`` for every prefix length ``j``."""
        ok = self.sf >= gamma - PROB_TOL
        last = ok.shape[1] - 1 - np.argmax(ok[:, ::-1], axis=1)
        return last


def prefix_laws(model: NullModel, pop: PopulationSpec, k: int | None = None) -> PrefixLaws:
    """Run the forward dynamic program to depth ``k`` (default ``n``).

    Cost is O(k * min(k, n_p)) time; the returned table holds every
    intermediate law, which is what the multi-prefix tests need.
    """
    _check_model(model)
    k = pop.n if k is None else int(k)
    if not 1 <= k <= pop.n:
        raise DomainError(f"prefix length k={k} outside [1, n={pop.n}]")
    n, n_p = pop.n, pop.n_p
    table = np.zeros((k, n_p + 1))
    cur = np.zeros(n_p + 1)
    cur[0] = 1.0
    for j in range(k):
        lo, hi = pop.support(j)
        ys = np.arange(lo, hi + 1)
        q = _next_protected(model, n, n_p, j, ys)
        nxt = np.zeros(n_p + 1)
        mass = cur[lo : hi + 1]
        nxt[lo : hi + 1] += mass * (1.0 - q)
        if n_p > 0:
            top = min(hi + 1, n_p)
            nxt[lo + 1 : top + 1] += (mass * q)[: top - lo]
        cur = nxt
        table[j] = cur
    return PrefixLaws(model, pop, table)


@dataclass(frozen=True, eq=False)
class CountDistribution:
    """Exact law of the protected count in the top-``k`` prefix."""

    k: int
    support: np.ndarray
    pmf: np.ndarray
    cdf: np.ndarray

    def pmf_at(self, y: int) -> float:
        lo = int(self.support[0])
        if lo <= y <= int(self.support[-1]):
            return float(self.pmf[y - lo])
        return 0.0

    def cdf_at(self, y: int) -> float:
        lo, hi = int(self.support[0]), int(self.support[-1])
        if y < lo:
            return 0.0
        if y >= hi:
            return 1.0
        return float(self.cdf[y - lo])

    @property
    def mean(self) -> float:
        return float(np.dot(self.support, self.pmf))


def hypergeom_pmf_closed_form(pop: PopulationSpec, k: int, ys: np.ndarray) -> np.ndarray:
    """``C(n_p, y) C(n - n_p, k - y) / C(n, k)`` evaluated through log-gamma."""
    ys = np.asarray(ys, dtype=np.float64)
    n, n_p = float(pop.n), float(pop.n_p)
    logp = (
        gammaln(n_p + 1) - gammaln(ys + 1) - gammaln(n_p - ys + 1)
        + gammaln(n - n_p + 1) - gammaln(k - ys + 1) - gammaln(n - n_p - k + ys + 1)
        - (gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1))
    )
    return np.exp(logp)


def count_distribution(
    model: NullModel,
    pop: PopulationSpec,
    k: int,
    *,
    large_n_threshold: int = LARGE_N_THRESHOLD,
) -> CountDistribution:
    """Exact law of ``Y_k`` under ``model``.

    Hypergeometric pools larger than ``large_n_threshold`` are evaluated in
    closed form via log-gamma; everything else goes through the DP.
    """
    _check_model(model)
    if not 1 <= k <= pop.n:
        raise DomainError(f"prefix length k={k} outside [1, n={pop.n}]")
    lo, hi = pop.support(k)
    ys = np.arange(lo, hi + 1)
    if isinstance(model, Hypergeometric) and pop.n > large_n_threshold:
        pmf = hypergeom_pmf_closed_form(pop, k, ys)
        pmf = pmf / math.fsum(pmf)
    else:
        pmf = prefix_laws(model, pop, k).pmf[-1, lo : hi + 1]
    cum = np.clip(_kahan_cumsum(pmf), 0.0, 1.0)
    return CountDistribution(k=k, support=ys, pmf=pmf, cdf=cum)


def cdf(model: NullModel, pop: PopulationSpec, k: int, y: int) -> float:
    """``P(Y_k <= y)``."""
    return count_distribution(model, pop, k).cdf_at(y)


def _check_level(gamma: float) -> None:
    if not 0.0 < gamma < 1.0:
        raise DomainError(f"probability level must lie in (0, 1), got {gamma}")


def quantile(model: NullModel, pop: PopulationSpec, k: int, gamma: float) -> int:
    """Lower quantile ``min{y in support : P(Y_k <= y) >= gamma}``."""
    _check_level(gamma)
    dist = count_distribution(model, pop, k)
    idx = int(np.argmax(dist.cdf >= gamma - PROB_TOL))
    return int(dist.support[idx])


def upper_quantile(model: NullModel, pop: PopulationSpec, k: int, gamma: float) -> int:
    """Upper-tail quantile ``max{y in support : P(Y_k >= y) >= gamma}``.

    This is the right end of a two-sided acceptance band with tail mass
    ``gamma``; it coincides with ``quantile(1 - gamma)`` unless the CDF has an
    atom exactly at ``1 - gamma``, where it is one larger.
    """
    _check_level(gamma)
    dist = count_distribution(model, pop, k)
    sf = np.clip(_kahan_cumsum(dist.pmf, reverse=True), 0.0, 1.0)
    ok = np.nonzero(sf >= gamma - PROB_TOL)[0]
    return int(dist.support[ok[-1]])


def odds_ratio_for_target(pop: PopulationSpec, quota: TargetQuota | float) -> float:
    """Odds ratio under which the first draw is protected with probability ``rho``."""
    if not isinstance(quota, TargetQuota):
        quota = TargetQuota(float(quota))
    if pop.n_p in (0, pop.n):
        raise DomainError(f"odds ratio undefined for n_p={pop.n_p} with n={pop.n}")
    rho = quota.rho
    return (rho / (1.0 - rho)) * (pop.n_n / pop.n_p)


def first_draw_probability(model: NullModel, pop: PopulationSpec) -> float:
    """Probability that the top-ranked candidate is protected."""
    return transition_probability(model, pop, 0, 0)
