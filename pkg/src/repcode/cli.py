"""Command-line pipeline: simulate -> errors -> fit, plus per-qubit and histogram views.

Every command writes tab-separated tables (header row, ``#`` comments) and,
where relevant, an SVG plot drawn only from the table it just wrote.

Exit codes: 0 success, 1 validation error, 2 I/O error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
import warnings
from dataclasses import dataclass, fields, replace
from math import pi
from pathlib import Path

import numpy as np

from .circuit import INJECTION_POINTS, CircuitError, CodeLayout, NoiseModel
from .decoder import MODES, extract_s, logical_error_per_run
from .ingest import (
    ParseError,
    crossover_point,
    ones_histogram,
    per_qubit_one_probability,
    read_manifest,
    write_counts,
    write_manifest,
)
from .model import FitError, fit_single, fit_two_round
from .sampling import BACKENDS, RunConfig, merge_runs, run_experiment

log = logging.getLogger("repcode")

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_NUMERICAL = 0, 1, 2, 3


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


class MissingDataError(OSError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    distances: tuple[int, ...] = (3, 4, 5, 6, 7, 8)
    shots: int = 8192
    runs: int = 10
    seed: int = 0
    theta_zero: float = pi / 20
    theta_one: float = pi / 10
    injection: tuple[str, ...] = INJECTION_POINTS
    backend: str = "exact_sample"
    flip_probability: float = 0.1
    flip_targets: tuple[str, ...] = ("code",)
    out: str = "."
    modes: tuple[str, ...] = MODES
    include_d3: bool = False
    heldout: bool = False

    def validate(self) -> None:
        if not self.distances or any(d < 2 for d in self.distances):
            raise ConfigError("distances", f"entries must be >= 2, got {self.distances}")
        if any(2 * d > 20 for d in self.distances):
            raise ConfigError("distances", "2d must not exceed the 20-qubit simulator guard")
        if self.shots < 1:
            raise ConfigError("shots", "must be >= 1")
        if self.runs < 1:
            raise ConfigError("runs", "must be >= 1")
        for name in ("theta_zero", "theta_one"):
            if not 0 <= getattr(self, name) <= pi:
                raise ConfigError(name, "must lie in [0, pi]")
        bad = set(self.injection) - set(INJECTION_POINTS)
        if bad:
            raise ConfigError("injection", f"unknown injection points {sorted(bad)}")
        if self.backend not in BACKENDS:
            raise ConfigError("backend", f"must be one of {BACKENDS}")
        if not 0 <= self.flip_probability <= 1:
            raise ConfigError("flip_probability", "must lie in [0, 1]")
        bad = set(self.flip_targets) - {"code", "ancilla", "reference"}
        if bad:
            raise ConfigError("flip_targets", f"unknown roles {sorted(bad)}")
        bad = set(self.modes) - set(MODES)
        if bad:
            raise ConfigError("modes", f"unknown decoding modes {sorted(bad)}")

    def noise(self) -> NoiseModel:
        return NoiseModel(self.theta_zero, self.theta_one, frozenset(self.injection))

    def run_config(self) -> RunConfig:
        return RunConfig(self.shots, self.runs, self.seed, self.distances, self.backend,
                         self.flip_probability, self.flip_targets)


def _split(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _injection(text: str) -> tuple[str, ...]:
    if text.strip() in ("none", ""):
        return ()
    if text.strip() == "all":
        return INJECTION_POINTS
    return tuple(_split(text))


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_PARSERS = {
    "distances": lambda s: tuple(int(x) for x in _split(s)),
    "shots": int,
    "runs": int,
    "seed": int,
    "theta_zero": float,
    "theta_one": float,
    "injection": _injection,
    "backend": str.strip,
    "flip_probability": float,
    "flip_targets": lambda s: tuple(_split(s)),
    "out": str.strip,
    "modes": lambda s: MODES if s.strip() == "both" else tuple(_split(s)),
    "include_d3": _bool,
    "heldout": _bool,
}


def parse_value(key: str, text: str):
    if key not in _PARSERS:
        raise ConfigError(key, "unknown configuration key")
    try:
        return _PARSERS[key](text)
    except ValueError as exc:
        raise ConfigError(key, str(exc)) from None


def load_config_file(path) -> dict:
    """Flat ``key=value`` file; blank lines and ``#`` comments ignored."""
    values = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}", f"expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key] = parse_value(key, value)
    return values


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    config = ExperimentConfig()
    if getattr(args, "config", None):
        config = replace(config, **load_config_file(args.config))
    overrides = {}
    for f in fields(ExperimentConfig):
        raw = getattr(args, f.name, None)
        if raw is None:
            continue
        overrides[f.name] = parse_value(f.name, raw) if isinstance(raw, str) else raw
    config = replace(config, **overrides)
    config.validate()
    return config


# -- tables ------------------------------------------------------------------

def write_tsv(path, header, rows, comments=()) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def read_tsv(path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines, delimiter="\t"))


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(float(x))
    return str(x)


def _savefig(fig, path):
    import matplotlib.pyplot as plt

    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "repcode"
    return plt


# -- commands ----------------------------------------------------------------

def cmd_simulate(config: ExperimentConfig) -> Path:
    out = Path(config.out)
    tables = run_experiment(config.run_config(), config.noise())
    files = {}
    for t in tables:
        rel = Path("counts") / f"d{t.d}_E{t.encoded}_run{t.run}.txt"
        write_counts(t, out / rel, source="sim")
        files[(t.d, t.encoded, t.run)] = rel
    manifest = write_manifest(out / "manifest.txt", config.distances, config.runs, files)
    log.info("wrote %d counts files and %s", len(files), manifest)
    return manifest


def _load_manifest(path, distances=None):
    manifest = read_manifest(path)
    missing = manifest.missing(distances)
    if missing:
        listing = ", ".join(f"(d={d}, E={e}, run={r})" for d, e, r in missing)
        raise MissingDataError(f"manifest {path} is missing {len(missing)} cell(s): {listing}")
    return manifest


def cmd_errors(manifest_path, config: ExperimentConfig) -> Path:
    manifest = _load_manifest(manifest_path)
    rows, run_rows, singles = [], [], {0: [], 1: []}
    for d in manifest.distances:
        t0, t1 = manifest.load(d, 0), manifest.load(d, 1)
        pairs = list(zip(t0, t1))
        for mode in config.modes:
            est = logical_error_per_run(pairs, mode, heldout=config.heldout)
            for e in (0, 1):
                rows.append((d, e, mode, est.P[e], est.stderr[e], len(pairs)))
                for r, value in enumerate(est.per_run[e]):
                    run_rows.append((d, e, mode, r, value))
        for e, tables in ((0, t0), (1, t1)):
            vals = np.array([extract_s(t, e) for t in tables])
            std = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
            rows.append((d, e, "single", float(vals.mean()), std, len(vals)))
            singles[e].append((float(vals.mean()), std, d, len(vals)))
    for e in (0, 1):
        mean, std, d, n = min(singles[e])
        rows.append((d, e, "single_min", mean, std, n))

    out = Path(config.out)
    comments = [f"logical error probabilities from {manifest_path}",
                f"estimator={'heldout' if config.heldout else 'in-sample'}",
                "mode=single is qubit s; single_min is its minimum over distances"]
    write_tsv(out / "errors_runs.tsv", ("d", "E", "mode", "run", "P"),
              [[_fmt(x) for x in r] for r in run_rows], comments[:2])
    path = write_tsv(out / "errors.tsv", ("d", "E", "mode", "P", "stderr", "n_runs"),
                     [[_fmt(x) for x in r] for r in rows], comments)
    for r in rows:
        print("\t".join(_fmt(x) for x in r))
    return path


def _series(rows, e, mode):
    return {int(r["d"]): float(r["P"]) for r in rows if int(r["E"]) == e and r["mode"] == mode}


def _run_series(run_rows, e, mode):
    out: dict[int, list[float]] = {}
    for r in run_rows:
        if int(r["E"]) == e and r["mode"] == mode:
            out.setdefault(int(r["d"]), []).append(float(r["P"]))
    return out


def cmd_fit(errors_path, config: ExperimentConfig, runs_path=None, n_boot: int = 100) -> Path:
    rows = read_tsv(errors_path)
    if runs_path is None:
        guess = Path(errors_path).with_name("errors_runs.tsv")
        runs_path = guess if guess.is_file() else None
    run_rows = read_tsv(runs_path) if runs_path else None

    fits = []
    for e in (0, 1):
        partial_p = None
        for mode in ("partial", "full"):
            data = _series(rows, e, mode)
            if not data:
                continue
            runs = _run_series(run_rows, e, mode) if run_rows else None
            try:
                with warnings.catch_warnings(record=True) as caught:
                    warnings.simplefilter("always")
                    res = fit_single(data, config.include_d3, runs, n_boot=n_boot, seed=config.seed)
                for w in caught:
                    log.warning("E=%d %s: %s", e, mode, w.message)
            except FitError as exc:
                log.warning("skipping E=%d %s fit: %s", e, mode, exc)
                continue
            fits.append((e, mode, res))
            if mode == "partial":
                partial_p = res.p
            elif partial_p is not None:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    two = fit_two_round(data, partial_p, config.include_d3, runs,
                                        n_boot=n_boot, seed=config.seed)
                fits.append((e, mode, two))

    out = Path(config.out)
    fit_rows, curve_rows = [], []
    for e, mode, res in fits:
        fit_rows.append([e, mode, res.kind, res.p, res.p0, res.p1, res.constraint_p,
                         res.residual_log_sse, res.stderr.get("p"), res.stderr.get("p0"),
                         ",".join(str(d) for d in res.distances)])
        for d in range(min(res.distances), max(res.distances) + 1):
            curve_rows.append([e, mode, res.kind, d, res.predict(d)])
    path = write_tsv(out / "fit.tsv",
                     ("E", "mode", "kind", "p", "p0", "p1", "constraint_p", "log_sse",
                      "stderr_p", "stderr_p0p1", "distances"),
                     [[_fmt(x) for x in r] for r in fit_rows],
                     [f"least-squares fits on log probabilities from {errors_path}"])
    write_tsv(out / "fit_curves.tsv", ("E", "mode", "kind", "d", "P_model"),
              [[_fmt(x) for x in r] for r in curve_rows])
    for r in fit_rows:
        print("\t".join(_fmt(x) for x in r))
    plot_fit(errors_path, out / "fit_curves.tsv", out / "fit.svg", config.include_d3)
    return path


def plot_fit(errors_path, curves_path, svg_path, include_d3=False):
    plt = _pyplot()
    rows, curves = read_tsv(errors_path), read_tsv(curves_path)
    fig, ax = plt.subplots(figsize=(6, 4))
    for e, colour in ((0, "tab:blue"), (1, "tab:orange")):
        for mode, marker in (("partial", "o"), ("full", "^")):
            pts = [(int(r["d"]), float(r["P"]), float(r["stderr"])) for r in rows
                   if int(r["E"]) == e and r["mode"] == mode and (include_d3 or int(r["d"]) != 3)]
            if pts:
                d, P, s = zip(*pts)
                ax.errorbar(d, P, yerr=s, fmt=marker, color=colour, label=f"E={e} {mode}")
            for kind, style in (("single", ":"), ("two_round", "--")):
                c = [(int(r["d"]), float(r["P_model"])) for r in curves
                     if int(r["E"]) == e and r["mode"] == mode and r["kind"] == kind]
                if c:
                    ax.plot(*zip(*c), style, color=colour)
    if any(float(r["P"]) > 0 for r in rows):
        ax.set_yscale("log")
    ax.set_xlabel("code distance d")
    ax.set_ylabel("logical error probability")
    ax.legend(fontsize="small")
    _savefig(fig, svg_path)


def cmd_qubits(manifest_path, d: int, config: ExperimentConfig) -> Path:
    manifest = read_manifest(manifest_path)
    if d not in manifest.distances:
        raise ConfigError("d", f"distance {d} not in manifest {manifest_path}")
    _load_manifest(manifest_path, [d])
    probs = {e: per_qubit_one_probability(merge_runs(manifest.load(d, e))) for e in (0, 1)}
    roles = CodeLayout(d).position_role
    rows = [[pos, str(role), _fmt(float(probs[0][pos])), _fmt(float(probs[1][pos]))]
            for pos, role in enumerate(roles)]
    out = Path(config.out)
    path = write_tsv(out / f"qubits_d{d}.tsv", ("position", "role", "P1_E0", "P1_E1"), rows,
                     [f"probability of reading 1 per line position, d={d}, all runs merged"])
    for r in rows:
        print("\t".join(str(x) for x in r))
    plot_qubits(path, out / f"qubits_d{d}.svg")
    return path


def plot_qubits(table_path, svg_path):
    plt = _pyplot()
    rows = read_tsv(table_path)
    pos = [int(r["position"]) for r in rows]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(pos, [float(r["P1_E0"]) for r in rows], "o", color="tab:blue", label="E=0")
    ax.plot(pos, [float(r["P1_E1"]) for r in rows], "^", color="tab:orange", label="E=1")
    ax.set_xticks(pos, [r["role"] for r in rows])
    ax.set_ylim(-0.05, 1.05)
    ax.set_xlabel("line position")
    ax.set_ylabel("P(outcome 1)")
    ax.legend()
    _savefig(fig, svg_path)


def cmd_histogram(manifest_path, d: int, config: ExperimentConfig) -> Path:
    manifest = read_manifest(manifest_path)
    if d not in manifest.distances:
        raise ConfigError("d", f"distance {d} not in manifest {manifest_path}")
    _load_manifest(manifest_path, [d])
    h0 = ones_histogram(merge_runs(manifest.load(d, 0)))
    h1 = ones_histogram(merge_runs(manifest.load(d, 1)))
    k_star = crossover_point(h0, h1)
    rows = [[k, _fmt(float(h0.weights[k])), _fmt(float(h1.weights[k]))] for k in range(d + 1)]
    out = Path(config.out)
    path = write_tsv(out / f"histogram_d{d}.tsv", ("k", "P_E0", "P_E1"), rows,
                     [f"probability of k ones among the code qubits, d={d}",
                      f"crossover={k_star}"])
    for r in rows:
        print("\t".join(str(x) for x in r))
    print(f"crossover\t{k_star}")
    plot_histogram(path, out / f"histogram_d{d}.svg")
    return path


def read_crossover(table_path) -> int:
    with open(table_path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("# crossover="):
                return int(line.split("=", 1)[1])
    raise ValueError(f"no crossover comment in {table_path}")


def plot_histogram(table_path, svg_path):
    plt = _pyplot()
    rows = read_tsv(table_path)
    k = [int(r["k"]) for r in rows]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(k, [float(r["P_E0"]) for r in rows], "o-", color="tab:blue", label="E=0")
    ax.plot(k, [float(r["P_E1"]) for r in rows], "^-", color="tab:orange", label="E=1")
    ax.axvline(read_crossover(table_path), color="grey", linestyle=":")
    ax.set_yscale("symlog", linthresh=1e-4)
    ax.set_xlabel("number of 1s among code qubits")
    ax.set_ylabel("probability")
    ax.legend()
    _savefig(fig, svg_path)


# -- entry point -------------------------------------------------------------

def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master seed")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
    common.add_argument("--config", default=argparse.SUPPRESS, help="key=value config file")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="repcode", parents=[common],
                                     description="Repetition-code simulation and lookup-table decoding")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", parents=[common], help="write counts files and a manifest")
    sim.add_argument("--distances")
    sim.add_argument("--shots", type=int)
    sim.add_argument("--runs", type=int)
    sim.add_argument("--theta-zero", dest="theta_zero", type=float)
    sim.add_argument("--theta-one", dest="theta_one", type=float)
    sim.add_argument("--injection", help="all, none, or comma list of " + ",".join(INJECTION_POINTS))
    sim.add_argument("--backend", choices=BACKENDS)
    sim.add_argument("--flip-probability", dest="flip_probability", type=float)
    sim.add_argument("--flip-targets", dest="flip_targets")

    err = sub.add_parser("errors", parents=[common], help="logical error table from a manifest")
    err.add_argument("manifest")
    err.add_argument("--mode", dest="modes", choices=("full", "partial", "both"))
    err.add_argument("--heldout", action="store_const", const=True)

    fit = sub.add_parser("fit", parents=[common], help="fit the binomial decay model")
    fit.add_argument("errors")
    fit.add_argument("--runs-table")
    fit.add_argument("--include-d3", dest="include_d3", action="store_const", const=True)
    fit.add_argument("--bootstrap", type=int, default=100, help="resamples for error bars")

    for name, text in (("qubits", "per-position readout statistics"),
                       ("histogram", "ones-count histogram and crossover")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("manifest")
        p.add_argument("--d", type=int, required=True)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        config = build_config(args)
        if args.command == "simulate":
            cmd_simulate(config)
        elif args.command == "errors":
            cmd_errors(args.manifest, config)
        elif args.command == "fit":
            cmd_fit(args.errors, config, args.runs_table, n_boot=args.bootstrap)
        elif args.command == "qubits":
            cmd_qubits(args.manifest, args.d, config)
        elif args.command == "histogram":
            cmd_histogram(args.manifest, args.d, config)
    except (OSError, ParseError) as exc:
        log.error("%s", exc)
        return EXIT_IO
    except (FitError, FloatingPointError, np.linalg.LinAlgError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    except (ConfigError, CircuitError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
