"""Acceptance gate: one test per criterion, each recording a PASS/FAIL summary line."""
import os
import time
from itertools import product
from math import hypot, pi, sqrt
from pathlib import Path

import numpy as np
import pytest

from repcode.circuit import CodeLayout, NoiseModel
from repcode.cli import ExperimentConfig, cmd_errors, cmd_fit, cmd_simulate, read_tsv
from repcode.decoder import (
    build_lookup,
    decode,
    logical_error_per_run,
    logical_error_probability,
    majority_vote_error_rate,
    project,
)
from repcode.ingest import crossover_point, ones_histogram
from repcode.model import binomial_logical_error, fit_single, fit_two_round, two_round_logical_error
from repcode.sampling import CountsTable, RunConfig, exact_distribution, run_experiment

SEEDS = range(10)
DEVICE_ENV = "REPCODE_DEVICE_MANIFEST"


def exact_table(d, e, noise):
    return CountsTable.from_probabilities(exact_distribution(d, e, noise), d, e)


def test_c01_noiseless_exactness(acceptance):
    start = time.perf_counter()
    noise = NoiseModel.noiseless()
    ok = True
    for d in range(2, 9):
        layout = CodeLayout(d)
        tables = [exact_table(d, e, noise) for e in (0, 1)]
        for e, t in enumerate(tables):
            ok &= t.counts == {layout.codeword(e): 1.0}
        for mode in ("full", "partial"):
            table = build_lookup(*tables, mode)
            ok &= logical_error_probability(table, 0) == 0 and logical_error_probability(table, 1) == 0
    elapsed = time.perf_counter() - start
    passed = acceptance(1, "noiseless exactness", ok and elapsed < 1,
                        f"point masses and zero errors for d=2..8: {ok}; {elapsed:.2f}s (< 1s)")
    assert passed


def test_c02_stochastic_flip_oracle(acceptance):
    start = time.perf_counter()
    p, shots = 0.1, 100_000
    expected = 3 * p**2 * (1 - p) + p**3
    se = sqrt(expected * (1 - expected) / shots)
    config = RunConfig(shots_per_run=shots, n_runs=1, master_seed=2024, d_list=(3,),
                       backend="stochastic_flip", flip_probability=p)
    rates = [majority_vote_error_rate(t) for t in run_experiment(config, NoiseModel())]
    elapsed = time.perf_counter() - start
    ok = all(abs(r - expected) < 3 * se for r in rates)
    passed = acceptance(2, "stochastic-flip oracle", ok and elapsed < 10,
                        f"rates {', '.join(f'{r:.4f}' for r in rates)} vs {expected:.3f} "
                        f"+/- {3 * se:.4f}; {elapsed:.2f}s (< 10s)")
    assert passed


def test_c03_exact_vs_sampled(acceptance):
    config = RunConfig(shots_per_run=100_000, n_runs=1, master_seed=77, d_list=(3,))
    tvs = []
    for t in run_experiment(config, NoiseModel()):
        exact = exact_table(3, t.encoded, NoiseModel()).counts
        keys = set(exact) | set(t.counts)
        tvs.append(0.5 * sum(abs(t.counts.get(k, 0) / t.total - exact.get(k, 0.0)) for k in keys))
    passed = acceptance(3, "exact-vs-sampled consistency", max(tvs) < 0.01,
                        f"TV distance E=0 {tvs[0]:.4f}, E=1 {tvs[1]:.4f} (< 0.01)")
    assert passed


def test_c04_model_identities(acceptance):
    grid = [0.01 * i for i in range(1, 50)]
    small = max(abs(binomial_logical_error(d, p) - p) for d in (1, 2) for p in grid)
    half = max(abs(binomial_logical_error(d, 0.5) - 0.5) for d in range(1, 11))
    ratios = [abs(binomial_logical_error(d + 1, 1e-3) / binomial_logical_error(d, 1e-3) - 1)
              for d in (3, 5, 7)]
    ok = small < 1e-12 and half < 1e-12 and max(ratios) < 0.01
    passed = acceptance(4, "analytic model identities", ok,
                        f"d=1,2 max dev {small:.1e}; p=0.5 max dev {half:.1e}; "
                        f"odd/even max ratio dev {max(ratios):.2e} (< 1%)")
    assert passed


def test_c05_fit_recovery(acceptance):
    start = time.perf_counter()
    single = fit_single({d: binomial_logical_error(d, 0.09) for d in range(4, 9)})
    two = fit_two_round({d: two_round_logical_error(d, 0.05, 0.03) for d in range(4, 9)}, 0.08)
    elapsed = time.perf_counter() - start
    errs = (abs(single.p - 0.09), abs(two.p0 - 0.05), abs(two.p1 - 0.03))
    passed = acceptance(5, "fit recovery", max(errs) < 1e-6 and elapsed < 1,
                        f"p={single.p:.8f}, (p0, p1)=({two.p0:.8f}, {two.p1:.8f}); "
                        f"{elapsed:.2f}s (< 1s)")
    assert passed


def _d_estimates(d, seed, mode):
    config = RunConfig(d_list=(d,), master_seed=seed)
    tables = run_experiment(config, NoiseModel())
    zeros = [t for t in tables if t.encoded == 0]
    ones = [t for t in tables if t.encoded == 1]
    return logical_error_per_run(list(zip(zeros, ones)), mode)


def test_c06_full_beats_partial(acceptance):
    start = time.perf_counter()
    wins, gaps = 0, []
    for seed in SEEDS:
        full = _d_estimates(5, seed, "full")
        partial = _d_estimates(5, seed, "partial")
        gap = partial.P[1] - full.P[1]
        combined = hypot(full.stderr[1], partial.stderr[1])
        gaps.append(gap / combined if combined else float("inf"))
        wins += gap > 0 and gap > 2 * combined
    elapsed = time.perf_counter() - start
    passed = acceptance(6, "full-vs-partial benefit (d=5, E=1)", wins >= 8 and elapsed < 120,
                        f"{wins}/10 seeds with gap > 2x combined stderr (need >= 8); "
                        f"gap/stderr per seed {[round(g, 2) for g in gaps]}; {elapsed:.1f}s")
    assert passed


def test_c07_d3_encoded_zero_anomaly(acceptance):
    hits = 0
    for seed in SEEDS:
        full = _d_estimates(3, seed, "full")
        partial = _d_estimates(3, seed, "partial")
        hits += partial.P[0] < full.P[0]
    passed = acceptance(7, "d=3 encoded-0 anomaly", hits > len(SEEDS) // 2,
                        f"P_partial(0) < P_full(0) in {hits}/10 seeds (need a majority)")
    assert passed


def test_c08_crossover_shift(acceptance):
    d = 6
    biased = [ones_histogram(exact_table(d, e, NoiseModel())) for e in (0, 1)]
    k_biased = crossover_point(*biased)
    sym = [ones_histogram(exact_table(d, e, NoiseModel.symmetric(pi / 20))) for e in (0, 1)]
    tie = abs(sym[0].weights[d // 2] - sym[1].weights[d // 2])
    ok = k_biased < d // 2 and tie < 1e-10
    h0, h1 = biased[0].weights, biased[1].weights
    passed = acceptance(8, "crossover shift (d=6)", ok,
                        f"biased crossover {k_biased} (need < {d // 2}); "
                        f"h0[2..3]={h0[2]:.4f},{h0[3]:.4f} h1[2..3]={h1[2]:.4f},{h1[3]:.4f}; "
                        f"symmetric |h0-h1| at k={d // 2}: {tie:.1e} (< 1e-10)")
    assert passed


def _pipeline(manifest, out, config):
    errors = cmd_errors(manifest, config)
    fit = cmd_fit(errors, config, n_boot=50)
    return read_tsv(errors), read_tsv(fit)


def _fit_value(fits, e, mode, kind, field):
    (row,) = [r for r in fits if int(r["E"]) == e and r["mode"] == mode and r["kind"] == kind]
    return float(row[field])


def test_c09_pipeline_end_to_end(acceptance, tmp_path):
    config = ExperimentConfig(seed=5, out=str(tmp_path))
    manifest = cmd_simulate(config)
    errors, fits = _pipeline(manifest, tmp_path, config)
    p = {e: _fit_value(fits, e, "partial", "single", "p") for e in (0, 1)}
    ok = all(0 < v < 0.5 for v in p.values()) and (tmp_path / "fit.svg").is_file()
    ok &= sum(r["kind"] == "two_round" for r in fits) == 2
    device = os.environ.get(DEVICE_ENV)
    passed = acceptance(9, "ingest + fit pipeline", ok,
                        f"simulated data: p(E=0)={p[0]:.4f}, p(E=1)={p[1]:.4f}; device comparison "
                        + (f"run separately from {device}" if device else f"not run, {DEVICE_ENV} unset"))
    assert passed


@pytest.mark.skipif(not os.environ.get(DEVICE_ENV), reason=f"{DEVICE_ENV} not set")
def test_c09_device_values(tmp_path):
    config = ExperimentConfig(out=str(tmp_path))
    errors, fits = _pipeline(Path(os.environ[DEVICE_ENV]), tmp_path, config)
    assert abs(_fit_value(fits, 0, "partial", "single", "p") - 0.088) < 0.005
    assert abs(_fit_value(fits, 1, "partial", "single", "p") - 0.102) < 0.005
    for e, (p0, p1) in ((0, (0.054, 0.034)), (1, (0.051, 0.051))):
        assert abs(_fit_value(fits, e, "full", "two_round", "p0") - p0) < 0.01
        assert abs(_fit_value(fits, e, "full", "two_round", "p1") - p1) < 0.01


def test_c10_decoder_brute_force(acceptance):
    start = time.perf_counter()
    d, noise = 2, NoiseModel()
    raw = [exact_table(d, e, noise) for e in (0, 1)]
    table = build_lookup(*raw, "partial")
    pi = [project(t, "partial").counts for t in raw]
    keys = ["".join(b) for b in product("01", repeat=d)]

    def error_of(rule):
        # rule maps key -> decoded value or 0.5 for a coin flip
        return [sum(pi[e].get(R, 0.0) * (rule[R] if e == 0 else 1 - rule[R]) for R in keys)
                for e in (0, 1)]

    lookup_rule = {}
    for R in keys:
        out = decode(table, R)
        lookup_rule[R] = 0.5 if out.decoded is None else out.decoded
    enumerated = error_of(lookup_rule)
    ours = [logical_error_probability(table, e) for e in (0, 1)]
    match = max(abs(a - b) for a, b in zip(ours, enumerated)) < 1e-12

    best = min(sum(error_of(dict(zip(keys, bits)))) for bits in product((0, 1), repeat=len(keys)))
    optimal = sum(ours) <= best + 1e-12
    elapsed = time.perf_counter() - start
    passed = acceptance(10, "decoder brute-force equivalence (d=2)", match and optimal and elapsed < 1,
                        f"P=({ours[0]:.5f}, {ours[1]:.5f}) matches enumeration: {match}; "
                        f"lookup total {sum(ours):.5f} vs best of 16 decoders {best:.5f}; "
                        f"{elapsed:.2f}s (< 1s)")
    assert passed
