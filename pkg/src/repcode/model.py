"""Majority-vote binomial model of the logical error rate and fits to it."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from math import ceil, comb, log
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

P_LOWER = 1e-6
P_UPPER = 0.5 - 1e-6


class FitError(ValueError):
    """Data cannot support the requested fit."""


def binomial_logical_error(d: int, p: float) -> float:
    """Probability that majority voting over ``d`` independently flipped bits fails.

    For even ``d`` an exact half/half split is decided by a fair coin and
    therefore counts with weight one half.
    """
    if int(d) != d or d < 1:
        raise ValueError(f"d must be a positive integer, got {d!r}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p!r}")
    q = 1.0 - p
    total = sum(comb(d, k) * p**k * q ** (d - k) for k in range(d // 2 + 1, d + 1))
    if d % 2 == 0:
        m = d // 2
        total += 0.5 * comb(d, m) * p**m * q**m
    return total


def decay_factor(d: int, p: float) -> float:
    """Leading suppression ``(p/(1-p))**ceil(d/2)``; equal for odd d and d+1."""
    if not 0.0 < p < 0.5:
        raise ValueError(f"decay factor needs 0 < p < 0.5, got {p!r}")
    return (p / (1.0 - p)) ** ceil(d / 2)


def two_round_logical_error(d: int, p0: float, p1: float) -> float:
    """Two independent majority-vote rounds; a logical error survives if either round fails."""
    return 1.0 - (1.0 - binomial_logical_error(d, p0)) * (1.0 - binomial_logical_error(d, p1))


@dataclass(frozen=True)
class FitResult:
    kind: str  # "single" or "two_round"
    p: float | None = None
    p0: float | None = None
    p1: float | None = None
    constraint_p: float | None = None
    residual_log_sse: float = 0.0
    stderr: dict = field(default_factory=dict)
    distances: tuple[int, ...] = ()

    def predict(self, d: int) -> float:
        if self.kind == "single":
            return binomial_logical_error(d, self.p)
        return two_round_logical_error(d, self.p0, self.p1)


def _usable(data: Mapping[int, float], include_d3: bool) -> dict[int, float]:
    out = {}
    for d, P in sorted(data.items()):
        d = int(d)
        if d == 3 and not include_d3:
            continue
        if P is None or not np.isfinite(P) or P < 0:
            raise FitError(f"logical error probability at d={d} is invalid: {P!r}")
        if P == 0:
            warnings.warn(f"dropping d={d}: zero logical error probability has no logarithm")
            continue
        out[d] = float(P)
    if len(out) < 2:
        raise FitError(f"need at least 2 distances with P > 0, got {sorted(out)}")
    return out


def _log_sse(model: Callable[[int], float], data: Mapping[int, float]) -> float:
    sse = 0.0
    for d, P in data.items():
        m = model(d)
        if m <= 0:
            return np.inf
        sse += (log(P) - log(m)) ** 2
    return sse


def _bounded_min(objective, lo: float, hi: float, n_grid: int = 81) -> float:
    """Global grid scan followed by bounded Brent refinement around the best cell."""
    grid = np.linspace(lo, hi, n_grid)
    values = [objective(x) for x in grid]
    i = int(np.argmin(values))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, n_grid - 1)]
    res = minimize_scalar(objective, bounds=(a, b), method="bounded",
                          options={"xatol": 1e-12 * max(1.0, abs(hi)), "maxiter": 500})
    candidates = [(values[i], grid[i])]
    if res.success and np.isfinite(res.fun):
        candidates.append((res.fun, res.x))
    # endpoints are legitimate optima (e.g. p1 = 0 in the two-round fit)
    candidates += [(objective(lo), lo), (objective(hi), hi)]
    return float(min(candidates)[1])


def _fit_single_p(data: Mapping[int, float]) -> tuple[float, float]:
    obj = lambda p: _log_sse(lambda d: binomial_logical_error(d, p), data)  # noqa: E731
    p = _bounded_min(obj, P_LOWER, P_UPPER)
    return p, obj(p)


def _fit_split(data: Mapping[int, float], p_total: float) -> tuple[float, float]:
    obj = lambda p0: _log_sse(  # noqa: E731
        lambda d: two_round_logical_error(d, p0, p_total - p0), data)
    # symmetric in p0 <-> p1, so the p0 >= p1 half is enough
    p0 = _bounded_min(obj, p_total / 2, p_total)
    return p0, obj(p0)


def _bootstrap(run_values: Mapping[int, Sequence[float]], distances, estimator,
               n_boot: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    estimates = []
    for _ in range(n_boot):
        sample = {}
        for d in distances:
            vals = np.asarray(run_values[d], dtype=float)
            sample[d] = float(vals[rng.integers(0, vals.size, vals.size)].mean())
        if any(v <= 0 for v in sample.values()):
            continue
        estimates.append(estimator(sample))
    return np.asarray(estimates)


def fit_single(data: Mapping[int, float], include_d3: bool = False,
               run_values: Mapping[int, Sequence[float]] | None = None,
               n_boot: int = 200, seed: int = 0) -> FitResult:
    """Least-squares fit of the one-parameter model on log probabilities.

    ``run_values`` (per-distance lists of run-level estimates) enables a
    bootstrap error bar on ``p``.
    """
    usable = _usable(data, include_d3)
    p, sse = _fit_single_p(usable)
    stderr = {}
    if run_values is not None:
        boots = _bootstrap(run_values, list(usable), lambda s: _fit_single_p(s)[0], n_boot, seed)
        if boots.size > 1:
            stderr["p"] = float(boots.std(ddof=1))
    return FitResult("single", p=p, residual_log_sse=sse, stderr=stderr, distances=tuple(usable))


def fit_two_round(data: Mapping[int, float], p_total: float, include_d3: bool = False,
                  run_values: Mapping[int, Sequence[float]] | None = None,
                  n_boot: int = 200, seed: int = 0) -> FitResult:
    """Split a fixed total error probability ``p_total = p0 + p1`` between two rounds.

    The search starts at the worst-case split ``(p_total, 0)`` and the result
    is reported with ``p0 >= p1``.
    """
    if not 0.0 < p_total < 0.5:
        raise FitError(f"p_total must lie in (0, 0.5), got {p_total!r}")
    usable = _usable(data, include_d3)
    p0, sse = _fit_split(usable, p_total)
    stderr = {}
    if run_values is not None:
        boots = _bootstrap(run_values, list(usable), lambda s: _fit_split(s, p_total)[0], n_boot, seed)
        if boots.size > 1:
            stderr["p0"] = stderr["p1"] = float(boots.std(ddof=1))
    return FitResult("two_round", p0=p0, p1=p_total - p0, constraint_p=p_total,
                     residual_log_sse=sse, stderr=stderr, distances=tuple(usable))
