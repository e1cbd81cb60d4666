"""Minimal re-ranking that makes every prefix pass the calibrated test.

The sweep is a greedy merge driven by the null model's own quantiles: a
table ``m`` gives the fewest protected candidates each prefix
may hold without being rejected at ``alpha_c``; walking down the ranking,
the best remaining candidate is placed unless that would leave the prefix
below ``m[i]``, in which case the best remaining protected candidate is
promoted. Relative order inside each group never changes.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .audit import (
    DEFAULT_NE,
    AdjustedAlpha,
    _check_alpha,
    adjust_alpha,
    check_ranking,
)
from .models import PROB_TOL, DomainError, NullModel, PopulationSpec, prefix_laws
from .sampling import Ranking

__all__ = ["RerankPlan", "RerankResult", "min_protected_table", "rerank"]


@dataclass(frozen=True)
class RerankPlan:
    """Per-prefix count limits; ``limits[i-1]`` applies to the top-``i`` prefix.

    For ``side="lower"`` the limits are minima of the protected count, for
    ``side="upper"`` maxima.
    """

    limits: tuple[int, ...]
    alpha_c: float
    side: str = "lower"

    @property
    def m(self) -> tuple[int, ...]:
        return self.limits


def min_protected_table(
    pop: PopulationSpec,
    model: NullModel,
    alpha_c: float,
    k: int | None = None,
    *,
    side: str = "lower",
) -> RerankPlan:
    """Smallest count per prefix whose lower-tail p-value exceeds ``alpha_c``.

    With ``side="upper"`` this is instead the largest count whose upper-tail
    p-value exceeds ``alpha_c``.
    """
    _check_alpha(alpha_c, "alpha_c")
    laws = prefix_laws(model, pop, k)
    if side == "lower":
        ok = laws.cdf > alpha_c + PROB_TOL
        limits = np.argmax(ok, axis=1)
    elif side == "upper":
        ok = laws.sf > alpha_c + PROB_TOL
        limits = ok.shape[1] - 1 - np.argmax(ok[:, ::-1], axis=1)
    else:
        raise DomainError(f"re-ranking supports side 'lower' or 'upper', got {side!r}")
    return RerankPlan(tuple(int(v) for v in limits), float(alpha_c), side)


@dataclass(frozen=True)
class RerankResult:
    ranking: Ranking
    order: tuple[int, ...]  # order[i] = input position (0-based) now at position i
    swap_count: int
    positions_adjusted: tuple[int, ...]  # 1-based
    plan: RerankPlan
    adjusted: AdjustedAlpha | None = None


def _sweep(groups: tuple[int, ...], plan: RerankPlan) -> tuple[list[int], list[int]]:
    queues = {1: deque(), 0: deque()}
    for idx, g in enumerate(groups):
        queues[g].append(idx)
    lower = plan.side == "lower"
    order, adjusted = [], []
    y = 0
    for i, limit in enumerate(plan.limits[: len(groups)]):
        heads = [q[0] for q in queues.values() if q]
        best = min(heads)
        g_best = groups[best]
        if lower and y + g_best < limit:
            forced = 1
        elif not lower and y + g_best > limit:
            forced = 0
        else:
            forced = None
        if forced is None:
            pick = queues[g_best].popleft()
        else:
            if not queues[forced]:
                raise DomainError(
                    f"prefix {i + 1} needs a {'protected' if forced else 'non-protected'} "
                    "candidate but none remain"
                )
            pick = queues[forced].popleft()
            if pick != best:
                adjusted.append(i + 1)
        order.append(pick)
        y += groups[pick]
    return order, adjusted


def rerank(
    ranking: Ranking,
    pop: PopulationSpec,
    model: NullModel,
    alpha: float = 0.1,
    n_e: int = DEFAULT_NE,
    seed: int = 0,
    *,
    alpha_c: float | None = None,
    side: str = "lower",
    workers: int = 1,
) -> RerankResult:
    """Re-rank ``ranking`` so that every prefix passes at the calibrated level.

    ``alpha_c`` is calibrated by Monte Carlo over all prefixes of the
    ranking unless given explicitly. The result is deterministic, keeps
    in-group order, and moves candidates only where a prefix would
    otherwise fail; promotions happen as late as the limits allow.
    """
    k = check_ranking(ranking, pop)
    adjusted = None
    if alpha_c is None:
        adjusted = adjust_alpha(
            pop, model, k, alpha, n_e, seed, side=side, workers=workers
        )
        alpha_c = adjusted.alpha_c
    plan = min_protected_table(pop, model, alpha_c, k, side=side)
    order, moved = _sweep(ranking.groups, plan)
    groups = tuple(ranking.groups[i] for i in order)
    ids = tuple(ranking.ids[i] for i in order) if ranking.ids is not None else None
    return RerankResult(
        ranking=Ranking(groups, ids),
        order=tuple(order),
        swap_count=len(moved),
        positions_adjusted=tuple(moved),
        plan=plan,
        adjusted=adjusted,
    )
