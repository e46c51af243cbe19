"""Lookup-table decoding and logical error probabilities.

A lookup table holds the empirical conditional distributions pi(R|E) of a
readout string R given the encoded bit E. Two readout projections are used:

* ``full``: code and ancilla outcomes, ``2d-1`` bits (qubit s dropped)
* ``partial``: code outcomes only, ``d`` bits

Comparisons between pi(R|0) and pi(R|1) are made by cross-multiplying the
stored weights with the opposite total, so integer tables never go through a
float division before the order relation is decided.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .sampling import CountsTable, merge_runs

MODES = ("full", "partial")


@dataclass(frozen=True)
class DecodeOutcome:
    decoded: int | None  # None for an unresolved tie (no random stream given)
    tie: bool = False
    unseen: bool = False


def _positions(d: int, mode: str) -> list[int]:
    if mode == "full":
        return list(range(2 * d - 1))
    if mode == "partial":
        return list(range(0, 2 * d - 1, 2))
    raise ValueError(f"unknown decoding mode {mode!r}; expected one of {MODES}")


def key_length(d: int, mode: str) -> int:
    return len(_positions(d, mode))


def project(counts: CountsTable, mode: str) -> CountsTable:
    """Marginalize a raw table onto the positions used by ``mode``."""
    keep = _positions(counts.d, mode)
    counts.check_raw()
    out: dict[str, int | float] = {}
    for key, c in counts.counts.items():
        short = "".join(key[i] for i in keep)
        out[short] = out.get(short, 0) + c
    return CountsTable(counts.d, counts.encoded, out, run=counts.run, source=counts.source)


@dataclass(frozen=True)
class LookupTable:
    mode: str
    d: int
    weights: tuple[Mapping[str, int | float], Mapping[str, int | float]]
    source_totals: tuple[int | float, int | float]

    def pi(self, R: str, encoded: int) -> float:
        return self.weights[encoded].get(R, 0) / self.source_totals[encoded]

    def distribution(self, encoded: int) -> dict[str, float]:
        total = self.source_totals[encoded]
        return {k: v / total for k, v in self.weights[encoded].items()}

    def compare(self, R: str) -> int:
        """Sign of pi(R|1) - pi(R|0), decided exactly on the stored weights."""
        lhs = self.weights[1].get(R, 0) * self.source_totals[0]
        rhs = self.weights[0].get(R, 0) * self.source_totals[1]
        return (lhs > rhs) - (lhs < rhs)

    def keys(self) -> set[str]:
        return set(self.weights[0]) | set(self.weights[1])


def build_lookup(counts0: CountsTable, counts1: CountsTable, mode: str) -> LookupTable:
    if counts0.encoded != 0 or counts1.encoded != 1:
        raise ValueError("build_lookup expects tables for E=0 then E=1")
    if counts0.d != counts1.d:
        raise ValueError(f"distance mismatch: {counts0.d} vs {counts1.d}")
    p0, p1 = project(counts0, mode), project(counts1, mode)
    totals = (p0.total, p1.total)
    if totals[0] <= 0 or totals[1] <= 0:
        raise ValueError("cannot build a lookup table from a zero-total counts table")
    return LookupTable(mode, counts0.d, (dict(p0.counts), dict(p1.counts)), totals)


def decode(table: LookupTable, R: str, rng: np.random.Generator | None = None) -> DecodeOutcome:
    """Most likely encoded bit for readout ``R``; ties go to a fair coin from ``rng``."""
    if len(R) != key_length(table.d, table.mode):
        raise ValueError(f"readout {R!r} has length {len(R)}, "
                         f"expected {key_length(table.d, table.mode)} for {table.mode} d={table.d}")
    sign = table.compare(R)
    if sign:
        return DecodeOutcome(1 if sign > 0 else 0)
    unseen = R not in table.weights[0] and R not in table.weights[1]
    decoded = int(rng.integers(2)) if rng is not None else None
    return DecodeOutcome(decoded, tie=True, unseen=unseen)


def logical_error_probability(table: LookupTable, encoded: int) -> float:
    """In-sample logical error probability for one encoded value.

    Readouts more likely under the other value count fully, exact ties count
    half (the decoder guesses), everything else contributes nothing. Using the
    same table for decoding and evaluation makes this a lower bound.
    """
    sign_wrong = 1 if encoded == 0 else -1
    wrong, tied = 0, 0
    for R, w in table.weights[encoded].items():
        s = table.compare(R)
        if s == sign_wrong:
            wrong += w
        elif s == 0:
            tied += w
    return (2 * wrong + tied) / (2 * table.source_totals[encoded])


def heldout_logical_error_probability(table: LookupTable, counts: CountsTable) -> float:
    """Error rate of ``table``'s decisions on independent shots ``counts``.

    Readouts the table has never seen are ties and weigh one half.
    """
    test = project(counts, table.mode)
    encoded = test.encoded
    sign_wrong = 1 if encoded == 0 else -1
    wrong, tied = 0, 0
    for R, w in test.counts.items():
        s = table.compare(R)
        if s == sign_wrong:
            wrong += w
        elif s == 0:
            tied += w
    return (2 * wrong + tied) / (2 * test.total)


@dataclass(frozen=True)
class LogicalErrorEstimate:
    d: int
    mode: str
    P: tuple[float, float]
    stderr: tuple[float, float]
    per_run: tuple[tuple[float, ...], tuple[float, ...]]


def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return float(arr.mean()), std


def logical_error_per_run(runs: Sequence[tuple[CountsTable, CountsTable]], mode: str,
                          heldout: bool = False) -> LogicalErrorEstimate:
    """Per-run logical error probabilities, averaged with a sample std as error bar.

    With ``heldout`` each run is decoded with a table built from all the
    *other* runs, which removes the in-sample overfitting bias.
    """
    if not runs:
        raise ValueError("no runs supplied")
    ds = {c.d for pair in runs for c in pair}
    if len(ds) != 1:
        raise ValueError(f"runs mix distances {sorted(ds)}")
    if heldout and len(runs) < 2:
        raise ValueError("held-out estimation needs at least two runs")
    (d,) = ds

    per_run: list[list[float]] = [[], []]
    for r, (c0, c1) in enumerate(runs):
        if heldout:
            rest = [pair for j, pair in enumerate(runs) if j != r]
            table = build_lookup(merge_runs([p[0] for p in rest]), merge_runs([p[1] for p in rest]), mode)
            per_run[0].append(heldout_logical_error_probability(table, c0))
            per_run[1].append(heldout_logical_error_probability(table, c1))
        else:
            table = build_lookup(c0, c1, mode)
            per_run[0].append(logical_error_probability(table, 0))
            per_run[1].append(logical_error_probability(table, 1))

    m0, s0 = _mean_std(per_run[0])
    m1, s1 = _mean_std(per_run[1])
    return LogicalErrorEstimate(d, mode, (m0, m1), (s0, s1), (tuple(per_run[0]), tuple(per_run[1])))


def majority_vote(code_bits: str, rng: np.random.Generator | None = None) -> DecodeOutcome:
    if not code_bits:
        raise ValueError("majority vote of an empty string")
    ones = code_bits.count("1")
    zeros = len(code_bits) - ones
    if ones == zeros:
        decoded = int(rng.integers(2)) if rng is not None else None
        return DecodeOutcome(decoded, tie=True)
    return DecodeOutcome(int(ones > zeros))


def majority_vote_error_rate(counts: CountsTable) -> float:
    """Fraction of shots majority vote on the code qubits gets wrong, ties weighing half."""
    part = project(counts, "partial")
    wrong = 0.0
    for key, c in part.counts.items():
        out = majority_vote(key)
        if out.tie:
            wrong += c / 2
        elif out.decoded != counts.encoded:
            wrong += c
    return wrong / part.total


def extract_s(counts: CountsTable, encoded: int | None = None) -> float:
    """Probability that the unencoded reference qubit s reads the wrong value."""
    counts.check_raw()
    if encoded is None:
        encoded = counts.encoded
    bad = str(1 - encoded)
    wrong = sum(c for key, c in counts.counts.items() if key[-1] == bad)
    return wrong / counts.total
