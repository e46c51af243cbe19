"""Shot sampling in batches of runs, aggregated into counts tables."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .circuit import (
    MAX_QUBITS,
    CodeLayout,
    NoiseModel,
    ResourceError,
    build_circuit,
    sample_counts,
    sample_flip_counts,
    simulate_exact,
)

BACKENDS = ("exact_sample", "stochastic_flip")


@dataclass(frozen=True)
class CountsTable:
    """Outcome tallies for one run of one (distance, encoded bit) cell.

    Counts are normally integers. Tables built from an exact distribution
    (see :meth:`from_probabilities`) carry float weights summing to 1, which
    every analysis function accepts in place of counts.
    """

    d: int
    encoded: int
    counts: Mapping[str, int | float]
    run: int | str = 0
    source: str = "sim"

    def __post_init__(self):
        if self.encoded not in (0, 1):
            raise ValueError(f"encoded bit must be 0 or 1, got {self.encoded!r}")
        lengths = {len(k) for k in self.counts}
        if len(lengths) > 1:
            raise ValueError(f"mixed key lengths {sorted(lengths)} in counts table")
        for key, c in self.counts.items():
            if c < 0:
                raise ValueError(f"negative count {c} for {key}")
            if set(key) - {"0", "1"}:
                raise ValueError(f"non-binary key {key!r}")

    @property
    def total(self):
        return sum(self.counts.values())

    @property
    def width(self) -> int:
        return len(next(iter(self.counts))) if self.counts else 0

    def check_raw(self) -> None:
        """Raise unless every key holds the full ``2d`` readout (line + s)."""
        if self.counts and self.width != 2 * self.d:
            raise ValueError(f"keys have length {self.width}, expected {2 * self.d} for d={self.d}")

    @classmethod
    def from_probabilities(cls, probs: np.ndarray, d: int, encoded: int, run="exact") -> CountsTable:
        n = 2 * d
        (support,) = np.nonzero(probs)
        counts = {format(int(k), f"0{n}b"): float(probs[k]) for k in support}
        return cls(d, encoded, counts, run=run, source="exact")


@dataclass(frozen=True)
class RunConfig:
    shots_per_run: int = 8192
    n_runs: int = 10
    master_seed: int = 0
    d_list: tuple[int, ...] = (3, 4, 5, 6, 7, 8)
    backend: str = "exact_sample"
    # only read by the stochastic_flip backend
    flip_probability: float = 0.1
    flip_targets: tuple[str, ...] = field(default=("code",))

    def __post_init__(self):
        object.__setattr__(self, "d_list", tuple(int(d) for d in self.d_list))
        object.__setattr__(self, "flip_targets", tuple(self.flip_targets))
        if self.shots_per_run < 1:
            raise ValueError("shots_per_run must be >= 1")
        if self.n_runs < 1:
            raise ValueError("n_runs must be >= 1")
        if not self.d_list or any(d < 2 for d in self.d_list):
            raise ValueError(f"d_list entries must be >= 2, got {self.d_list}")
        if self.backend not in BACKENDS:
            raise ValueError(f"backend must be one of {BACKENDS}, got {self.backend!r}")


def cell_rng(master_seed: int, d: int, encoded: int, run: int) -> np.random.Generator:
    """Independent stream for one (d, E, run) cell, re-creatable in isolation."""
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), d, encoded, run]))


def exact_distribution(d: int, encoded: int, noise: NoiseModel) -> np.ndarray:
    layout = CodeLayout(d)
    return simulate_exact(build_circuit(layout, encoded, noise), layout.n_total)


def run_cell(config: RunConfig, noise: NoiseModel, d: int, encoded: int, run: int,
             probs: np.ndarray | None = None) -> CountsTable:
    rng = cell_rng(config.master_seed, d, encoded, run)
    layout = CodeLayout(d)
    if config.backend == "stochastic_flip":
        counts = sample_flip_counts(layout, encoded, config.flip_probability,
                                    config.shots_per_run, rng, config.flip_targets)
    else:
        if probs is None:
            probs = exact_distribution(d, encoded, noise)
        counts = sample_counts(probs, layout.n_total, config.shots_per_run, rng)
    return CountsTable(d, encoded, counts, run=run, source="sim")


def run_experiment(config: RunConfig, noise: NoiseModel) -> list[CountsTable]:
    """Every (d, E, run) cell of the protocol, ordered by d, then E, then run."""
    too_big = [d for d in config.d_list if 2 * d > MAX_QUBITS]
    if too_big:
        raise ResourceError(f"distances {too_big} exceed the {MAX_QUBITS}-qubit guard")
    tables = []
    for d in config.d_list:
        for encoded in (0, 1):
            probs = None
            if config.backend == "exact_sample":
                # one exact simulation per cell family; runs differ only by stream
                probs = exact_distribution(d, encoded, noise)
            for r in range(config.n_runs):
                tables.append(run_cell(config, noise, d, encoded, r, probs))
    return tables


def merge_runs(tables: list[CountsTable]) -> CountsTable:
    if not tables:
        raise ValueError("cannot merge an empty list of counts tables")
    d, encoded = tables[0].d, tables[0].encoded
    if any((t.d, t.encoded) != (d, encoded) for t in tables):
        raise ValueError("all merged tables must share (d, E)")
    merged: dict[str, int | float] = {}
    for t in tables:
        for key, c in t.counts.items():
            merged[key] = merged.get(key, 0) + c
    return CountsTable(d, encoded, merged, run="merged", source=tables[0].source)

