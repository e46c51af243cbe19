"""Repetition-code simulation, lookup-table decoding and decay-model fitting."""

from .circuit import CodeLayout, NoiseModel, build_circuit, sample_outcome, simulate_exact
from .decoder import (
    build_lookup,
    decode,
    extract_s,
    logical_error_per_run,
    logical_error_probability,
    majority_vote,
    project,
)
from .ingest import crossover_point, ones_histogram, parse_counts, per_qubit_one_probability, write_counts
from .model import binomial_logical_error, decay_factor, fit_single, fit_two_round
from .sampling import CountsTable, RunConfig, merge_runs, run_experiment

__version__ = "0.1.0"
