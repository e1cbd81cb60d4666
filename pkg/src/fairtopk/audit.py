"""Fairness tests on ranking prefixes.

A single test checks one prefix length against the exact null law. The
multi-prefix test controls the family-wise error rate over prefixes
``1..k`` by calibrating a per-test level ``alpha_c`` on the Monte Carlo law
of ``Z_k = min_j p_j(Y_j)``, where ``p_j`` is the tail probability on the
chosen side. The same Monte Carlo batch yields the fairness score of an
observed ranking: the share of null rankings whose ``Z_k`` is no larger.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .models import (
    PROB_TOL,
    DomainError,
    NullModel,
    PopulationSpec,
    PrefixLaws,
    prefix_laws,
)
from .sampling import Ranking, min_table_lookup, prefix_histogram

__all__ = [
    "Side",
    "CdfMode",
    "TestConfig",
    "SingleTestResult",
    "AdjustedAlpha",
    "NullZ",
    "AuditReport",
    "ConfidenceBand",
    "BoundaryCurves",
    "prefix_counts",
    "check_ranking",
    "single_test",
    "pvalue_table",
    "z_statistic",
    "null_z",
    "adjust_alpha",
    "fairness_score",
    "multi_test",
    "confidence_band",
    "boundary_curves",
    "required_samples",
    "DEFAULT_NE",
]

Side = Literal["lower", "upper", "two_sided"]
CdfMode = Literal["analytical", "empirical"]
SIDES = ("lower", "upper", "two_sided")
CDF_MODES = ("analytical", "empirical")

DEFAULT_NE = 1_000_000


def _check_alpha(alpha: float, name: str = "alpha") -> None:
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"{name} must lie in (0, 1), got {alpha}")


def _check_side(side: str) -> None:
    if side not in SIDES:
        raise DomainError(f"side must be one of {SIDES}, got {side!r}")


@dataclass(frozen=True)
class TestConfig:
    """Settings of a multi-prefix audit."""

    __test__ = False  # not a pytest class

    alpha: float = 0.1
    k: int | None = None
    side: Side = "lower"
    n_e: int = DEFAULT_NE
    cdf_mode: CdfMode = "analytical"
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        _check_alpha(self.alpha)
        _check_side(self.side)
        if self.cdf_mode not in CDF_MODES:
            raise DomainError(f"cdf_mode must be one of {CDF_MODES}, got {self.cdf_mode!r}")
        if self.n_e < 1:
            raise DomainError(f"n_e must be at least 1, got {self.n_e}")
        if self.k is not None and self.k < 1:
            raise DomainError(f"k must be at least 1, got {self.k}")


def prefix_counts(ranking: Ranking) -> tuple[int, ...]:
    """Cumulative protected counts ``y_1, ..., y_n``."""
    if len(ranking) == 0:
        raise DomainError("ranking is empty")
    return tuple(np.cumsum(ranking.groups, dtype=np.int64).tolist())


def check_ranking(ranking: Ranking, pop: PopulationSpec, k: int | None = None) -> int:
    """Validate ``ranking`` against the pool and return the prefix length to test.

    A ranking may be a top list shorter than the pool, but it can never hold
    more members of a group than the pool does.
    """
    m = len(ranking)
    if m == 0:
        raise DomainError("ranking is empty")
    if m > pop.n:
        raise DomainError(f"ranking has {m} positions but the pool has n={pop.n}")
    ones = ranking.n_protected
    if ones > pop.n_p:
        raise DomainError(f"ranking holds {ones} protected candidates but n_p={pop.n_p}")
    if m - ones > pop.n_n:
        raise DomainError(f"ranking holds {m - ones} non-protected candidates but n-n_p={pop.n_n}")
    k = m if k is None else int(k)
    if not 1 <= k <= m:
        raise DomainError(f"prefix length k={k} outside [1, {m}]")
    return k


def pvalue_table(laws: PrefixLaws, side: str) -> np.ndarray:
    """Tail probability of every (prefix length, count) cell on ``side``."""
    _check_side(side)
    if side == "lower":
        return laws.cdf
    if side == "upper":
        return laws.sf
    return np.minimum(laws.cdf, laws.sf)


@dataclass(frozen=True)
class SingleTestResult:
    k: int
    count: int
    side: str
    alpha: float
    p_value: float
    reject: bool
    band: tuple[int, int] | None = None


def single_test(
    ranking: Ranking,
    pop: PopulationSpec,
    model: NullModel,
    k: int,
    alpha: float,
    side: Side = "lower",
) -> SingleTestResult:
    """Test the top-``k`` count of ``ranking`` against the null law.

    ``lower`` rejects when ``P(Y_k <= y_k) <= alpha``, ``upper`` when
    ``P(Y_k >= y_k) <= alpha``. ``two_sided`` accepts counts inside the band
    ``[min{y: F(y) >= alpha/2}, max{y: P(Y >= y) >= alpha/2}]``; its
    ``p_value`` is the smaller of the two tails.
    """
    _check_alpha(alpha)
    _check_side(side)
    k = check_ranking(ranking, pop, k)
    y = prefix_counts(ranking)[k - 1]
    laws = prefix_laws(model, pop, k)
    lower = float(laws.cdf[k - 1, y])
    upper = float(laws.sf[k - 1, y])
    if side == "lower":
        return SingleTestResult(k, y, side, alpha, lower, lower <= alpha + PROB_TOL)
    if side == "upper":
        return SingleTestResult(k, y, side, alpha, upper, upper <= alpha + PROB_TOL)
    lo = int(laws.lower_quantiles(alpha / 2)[k - 1])
    hi = int(laws.upper_quantiles(alpha / 2)[k - 1])
    return SingleTestResult(k, y, side, alpha, min(lower, upper), not lo <= y <= hi, (lo, hi))


def _observed_pvalues(ranking: Ranking, table: np.ndarray, k: int) -> np.ndarray:
    ys = np.asarray(prefix_counts(ranking)[:k])
    return table[np.arange(k), ys]


def z_statistic(
    ranking: Ranking,
    pop: PopulationSpec,
    model: NullModel,
    k: int | None = None,
    side: Side = "lower",
) -> float:
    """``min_{j<=k}`` of the exact per-prefix p-values of ``ranking``."""
    k = check_ranking(ranking, pop, k)
    table = pvalue_table(prefix_laws(model, pop, k), side)
    return float(_observed_pvalues(ranking, table, k).min())


@dataclass(frozen=True)
class AdjustedAlpha:
    """Calibrated per-prefix level and what it achieves on the Monte Carlo batch."""

    alpha_c: float
    achieved_fwer: float
    n_e_used: int
    warning: str | None = None


@dataclass(frozen=True, eq=False)
class NullZ:
    """Monte Carlo law of ``Z_k`` for one (model, pool, k, side, mode, seed).

    ``table`` is the per-cell p-value table the batch was scored with; the
    observed ranking must be scored with the same table.
    """

    model: NullModel
    pop: PopulationSpec
    k: int
    side: str
    cdf_mode: str
    seed: int
    table: np.ndarray
    z: np.ndarray = field(repr=False)  # sorted ascending

    @property
    def n_e(self) -> int:
        return int(self.z.size)

    def fraction_at_most(self, gamma: float) -> float:
        return int(np.searchsorted(self.z, gamma, side="right")) / self.n_e

    def adjusted_alpha(self, alpha: float) -> AdjustedAlpha:
        """Largest candidate level whose empirical rejection rate stays within ``alpha``.

        Candidates are the observed atoms of ``Z_k`` not above ``alpha``, plus
        ``alpha`` itself. When every atom up to ``alpha`` already rejects more
        than ``alpha`` of the batch, the level drops to just below the
        smallest atom, where nothing is rejected.
        """
        _check_alpha(alpha)
        n_e = self.n_e
        limit = alpha * n_e
        warning = None
        if limit < 10:
            warning = f"n_e={n_e} cannot resolve alpha={alpha} (n_e * alpha < 10)"
        if np.searchsorted(self.z, alpha, side="right") <= limit:
            alpha_c = float(alpha)
        else:
            atoms = np.unique(self.z[: np.searchsorted(self.z, alpha, side="right")])
            counts = np.searchsorted(self.z, atoms, side="right")
            ok = np.nonzero(counts <= limit)[0]
            if ok.size:
                alpha_c = float(atoms[ok[-1]])
            else:
                alpha_c = float(np.nextafter(self.z[0], 0.0))
                warning = (warning + "; " if warning else "") + "smallest Z atom exceeds alpha"
        return AdjustedAlpha(alpha_c, self.fraction_at_most(alpha_c), n_e, warning)

    def score(self, z_obs: float) -> float:
        """Share of null rankings with ``Z_k <= z_obs``."""
        return self.fraction_at_most(z_obs)


def null_z(
    pop: PopulationSpec,
    model: NullModel,
    k: int,
    n_e: int = DEFAULT_NE,
    seed: int = 0,
    *,
    side: Side = "lower",
    cdf_mode: CdfMode = "analytical",
    workers: int = 1,
) -> NullZ:
    """Draw ``n_e`` null rankings and return the sorted ``Z_k`` values.

    In empirical mode the per-prefix CDF is the share of the same batch with
    a count at most ``y`` (self-inclusive), built in a first pass; the batch
    is then regenerated from its seed and scored against that table.
    """
    _check_side(side)
    if not 1 <= k <= pop.n:
        raise DomainError(f"prefix length k={k} outside [1, n={pop.n}]")
    if n_e < 1:
        raise DomainError(f"n_e must be at least 1, got {n_e}")
    if cdf_mode == "analytical":
        table = pvalue_table(prefix_laws(model, pop, k), side)
    elif cdf_mode == "empirical":
        hist = prefix_histogram(model, pop, k, n_e, seed, workers=workers)
        lower = np.cumsum(hist, axis=1) / n_e
        upper = np.cumsum(hist[:, ::-1], axis=1)[:, ::-1] / n_e
        table = {"lower": lower, "upper": upper}.get(side)
        if table is None:
            table = np.minimum(lower, upper)
    else:
        raise DomainError(f"cdf_mode must be one of {CDF_MODES}, got {cdf_mode!r}")
    table = np.ascontiguousarray(table)
    z = np.sort(min_table_lookup(model, pop, table, n_e, seed, workers=workers))
    return NullZ(model, pop, k, side, cdf_mode, seed, table, z)


def adjust_alpha(
    pop: PopulationSpec,
    model: NullModel,
    k: int,
    alpha: float,
    n_e: int = DEFAULT_NE,
    seed: int = 0,
    cdf_mode: CdfMode = "analytical",
    *,
    side: Side = "lower",
    workers: int = 1,
    null: NullZ | None = None,
) -> AdjustedAlpha:
    """Per-prefix level that holds the family-wise error over ``k`` prefixes at ``alpha``."""
    _check_alpha(alpha)
    if null is None:
        null = null_z(pop, model, k, n_e, seed, side=side, cdf_mode=cdf_mode, workers=workers)
    return null.adjusted_alpha(alpha)


def fairness_score(
    ranking: Ranking,
    pop: PopulationSpec,
    model: NullModel,
    k: int | None = None,
    n_e: int = DEFAULT_NE,
    seed: int = 0,
    *,
    side: Side = "lower",
    cdf_mode: CdfMode = "analytical",
    workers: int = 1,
    null: NullZ | None = None,
) -> float:
    """Probability under the null of a ranking at least as extreme as ``ranking``.

    Small scores mean the observed prefix counts are unusually low (or high,
    or either, depending on ``side``) somewhere in the top ``k``.
    """
    k = check_ranking(ranking, pop, k)
    if null is None:
        null = null_z(pop, model, k, n_e, seed, side=side, cdf_mode=cdf_mode, workers=workers)
    z_obs = float(_observed_pvalues(ranking, null.table, null.k).min())
    return null.score(z_obs)


@dataclass(frozen=True)
class AuditReport:
    k: int
    side: str
    per_prefix_pvalues: tuple[float, ...]
    z_statistic: float
    fairness_score: float
    alpha: float
    alpha_c: AdjustedAlpha
    verdict: Literal["pass", "fail"]
    z_rejects: bool
    first_failing_prefix: int | None

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"


def multi_test(
    ranking: Ranking,
    pop: PopulationSpec,
    model: NullModel,
    config: TestConfig = TestConfig(),
    *,
    null: NullZ | None = None,
) -> AuditReport:
    """Audit every prefix ``1..k`` of ``ranking`` at family-wise level ``config.alpha``.

    The verdict fails iff the fairness score is below ``alpha``. The report
    also records whether ``Z <= alpha_c`` and the first prefix whose p-value
    falls to ``alpha_c``; the two criteria can differ by one atom of
    probability at ties.
    """
    k = check_ranking(ranking, pop, config.k)
    if null is None:
        null = null_z(
            pop, model, k, config.n_e, config.seed,
            side=config.side, cdf_mode=config.cdf_mode, workers=config.workers,
        )
    elif (null.k, null.side) != (k, config.side):
        raise DomainError("precomputed null does not match the requested k/side")
    adj = null.adjusted_alpha(config.alpha)
    pvals = _observed_pvalues(ranking, null.table, k)
    z_obs = float(pvals.min())
    score = null.score(z_obs)
    failing = np.nonzero(pvals <= adj.alpha_c + PROB_TOL)[0]
    return AuditReport(
        k=k,
        side=config.side,
        per_prefix_pvalues=tuple(float(v) for v in pvals),
        z_statistic=z_obs,
        fairness_score=score,
        alpha=config.alpha,
        alpha_c=adj,
        verdict="fail" if score < config.alpha else "pass",
        z_rejects=bool(z_obs <= adj.alpha_c + PROB_TOL),
        first_failing_prefix=int(failing[0]) + 1 if failing.size else None,
    )


@dataclass(frozen=True, eq=False)
class ConfidenceBand:
    """Two-sided acceptance band of the protected count for every prefix length."""

    alpha: float
    lower: np.ndarray
    upper: np.ndarray

    @property
    def prefix(self) -> np.ndarray:
        return np.arange(1, self.lower.size + 1)

    @property
    def lower_proportion(self) -> np.ndarray:
        return self.lower / self.prefix

    @property
    def upper_proportion(self) -> np.ndarray:
        return self.upper / self.prefix

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower


def confidence_band(pop: PopulationSpec, model: NullModel, alpha: float) -> ConfidenceBand:
    """Band with ``alpha/2`` tail mass on each side, for ``j = 1..n``.

    The left end is the lower ``alpha/2`` quantile; the right end is the
    largest count whose upper tail still holds ``alpha/2``. Using the upper
    tail (rather than the ``1 - alpha/2`` lower quantile) keeps the band
    symmetric under ``y -> n_p - y`` even when the CDF sits exactly on
    ``1 - alpha/2``.
    """
    _check_alpha(alpha)
    laws = prefix_laws(model, pop)
    return ConfidenceBand(
        alpha=alpha,
        lower=laws.lower_quantiles(alpha / 2).astype(np.int64),
        upper=laws.upper_quantiles(alpha / 2).astype(np.int64),
    )


@dataclass(frozen=True, eq=False)
class BoundaryCurves:
    """Extremes of the protected share attainable at each fraction drawn."""

    p: float
    x: np.ndarray
    upper: np.ndarray
    lower: np.ndarray


def boundary_curves(p: float, grid_size: int = 100) -> BoundaryCurves:
    """Evaluate the attainable-share envelope on ``x = 1/G, 2/G, ..., 1``.

    The upper curve is reached when every protected candidate is ranked
    first, the lower one when they are all ranked last.
    """
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p must lie in [0, 1], got {p}")
    if grid_size < 2:
        raise DomainError(f"grid_size must be at least 2, got {grid_size}")
    x = np.arange(1, grid_size + 1) / grid_size
    upper = np.where(x <= p, 1.0, p / x)
    lower = np.where(x <= 1.0 - p, 0.0, (p - (1.0 - x)) / x)
    return BoundaryCurves(p=p, x=x, upper=np.clip(upper, 0, 1), lower=np.clip(lower, 0, 1))


def required_samples(delta: float, beta: float) -> int:
    """Smallest ``N_e`` whose DKW band ``sqrt(ln(2/beta) / (2 N_e))`` is at most ``10**-delta``."""
    if not delta > 0:
        raise DomainError(f"delta must be positive, got {delta}")
    if not 0.0 < beta < 1.0:
        raise DomainError(f"beta must lie in (0, 1), got {beta}")
    c = math.log(2.0 / beta)
    eps = 10.0 ** (-delta)
    n = max(1, math.ceil(c * 10.0 ** (2 * delta) / 2.0))
    while n > 1 and math.sqrt(c / (2 * (n - 1))) <= eps:
        n -= 1
    while math.sqrt(c / (2 * n)) > eps:
        n += 1
    return n
