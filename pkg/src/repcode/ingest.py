"""Counts files, experiment manifests, and per-qubit / ones-count statistics.

Counts file (UTF-8, LF line endings)::

    #repcode v1 d=3 E=0 run=0 source=sim
    000000 7421
    000001 402
    ...

Keys are written in lexicographic order, so a table always serializes to the
same bytes. Manifest::

    #repcode-manifest v1 distances=3,4 runs=2
    3 0 0 counts/d3_E0_run0.txt
    ...

Each record is ``<d> <E> <run> <path>``; paths are relative to the manifest.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .decoder import project
from .sampling import CountsTable

COUNTS_MAGIC = "#repcode v1"
MANIFEST_MAGIC = "#repcode-manifest v1"

_HEADER = re.compile(r"^#repcode v1 d=(\d+) E=([01]) run=(\S+) source=(sim|device|exact)$")
_RECORD = re.compile(r"^([01]+) ([1-9]\d*)$")


class ParseError(ValueError):
    def __init__(self, path, lineno: int, message: str):
        self.path, self.lineno = str(path), lineno
        super().__init__(f"{path}:{lineno}: {message}")


def _run_label(text: str):
    return int(text) if text.isdigit() else text


def format_counts(table: CountsTable, source: str | None = None) -> str:
    source = source or table.source
    lines = [f"{COUNTS_MAGIC} d={table.d} E={table.encoded} run={table.run} source={source}"]
    for key in sorted(table.counts):
        c = table.counts[key]
        if int(c) != c:
            raise ValueError(f"cannot serialize non-integer count {c!r} for {key}")
        if c:
            lines.append(f"{key} {int(c)}")
    return "\n".join(lines) + "\n"


def write_counts(table: CountsTable, path, source: str | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_counts(table, source))
    return path


def parse_counts(path, position_map: Sequence[int] | None = None) -> CountsTable:
    """Read a counts file into a table with exact integer counts.

    ``position_map`` lists, in line order (code/ancilla alternating, then s),
    the string index of each used qubit in the file. It lets device exports
    with unused qubits be read; shots that only differ on unused qubits are
    summed together.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    lines = text.split("\n")
    m = _HEADER.match(lines[0].rstrip("\r")) if lines else None
    if m is None:
        raise ParseError(path, 1, f"bad header {lines[0][:60]!r}")
    d, encoded, run, source = int(m[1]), int(m[2]), _run_label(m[3]), m[4]
    if position_map is not None and len(position_map) != 2 * d:
        raise ValueError(f"position map has {len(position_map)} entries, expected {2 * d}")

    raw: dict[str, int] = {}
    width = None
    for lineno, line in enumerate(lines[1:], start=2):
        line = line.rstrip("\r")
        if not line.strip():
            continue
        rec = _RECORD.match(line)
        if rec is None:
            raise ParseError(path, lineno, f"malformed record {line[:60]!r}")
        key, count = rec[1], int(rec[2])
        if width is None:
            width = len(key)
        elif len(key) != width:
            raise ParseError(path, lineno, f"key length {len(key)} differs from {width}")
        if key in raw:
            raise ParseError(path, lineno, f"duplicate key {key}")
        raw[key] = count
    if not raw:
        raise ParseError(path, len(lines), "no records")

    if position_map is None:
        if width != 2 * d:
            raise ParseError(path, 2, f"key length {width} does not match 2d = {2 * d}")
        counts = raw
    else:
        if max(position_map) >= width:
            raise ParseError(path, 2, f"position map index {max(position_map)} beyond key length {width}")
        counts = {}
        for key, c in raw.items():
            short = "".join(key[i] for i in position_map)
            counts[short] = counts.get(short, 0) + c
    return CountsTable(d, encoded, counts, run=run, source=source)


@dataclass(frozen=True)
class ManifestEntry:
    d: int
    encoded: int
    run: int | str
    path: Path


@dataclass(frozen=True)
class Manifest:
    distances: tuple[int, ...]
    runs: int
    entries: tuple[ManifestEntry, ...]
    root: Path

    def expected_cells(self):
        return [(d, e, r) for d in self.distances for e in (0, 1) for r in range(self.runs)]

    def lookup(self) -> dict:
        return {(x.d, x.encoded, x.run): x for x in self.entries}

    def missing(self, distances=None) -> list[tuple[int, int, int]]:
        """Cells absent from the manifest or whose file is not on disk."""
        have = self.lookup()
        wanted = set(distances) if distances is not None else None
        out = []
        for cell in self.expected_cells():
            if wanted is not None and cell[0] not in wanted:
                continue
            entry = have.get(cell)
            if entry is None or not entry.path.is_file():
                out.append(cell)
        return out

    def load(self, d: int, encoded: int, position_map=None) -> list[CountsTable]:
        """All run tables for one (d, E) cell family, in run order."""
        have = self.lookup()
        return [parse_counts(have[(d, encoded, r)].path, position_map)
                for r in range(self.runs) if (d, encoded, r) in have]


def write_manifest(path, distances, runs: int, files: dict) -> Path:
    """``files`` maps ``(d, E, run)`` to a path relative to the manifest directory."""
    path = Path(path)
    lines = [f"{MANIFEST_MAGIC} distances={','.join(str(d) for d in distances)} runs={runs}"]
    for (d, e, r), rel in sorted(files.items()):
        lines.append(f"{d} {e} {r} {Path(rel).as_posix()}")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def read_manifest(path) -> Manifest:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").split("\n")
    m = re.match(r"^#repcode-manifest v1 distances=([\d,]+) runs=(\d+)$", lines[0].rstrip("\r"))
    if m is None:
        raise ParseError(path, 1, "bad manifest header")
    distances = tuple(int(x) for x in m[1].split(",") if x)
    runs = int(m[2])
    entries = []
    for lineno, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(maxsplit=3)
        if len(parts) != 4 or not parts[0].isdigit() or parts[1] not in ("0", "1"):
            raise ParseError(path, lineno, f"malformed manifest record {line[:60]!r}")
        entries.append(ManifestEntry(int(parts[0]), int(parts[1]), _run_label(parts[2]),
                                     path.parent / parts[3]))
    return Manifest(distances, runs, tuple(entries), path.parent)


def per_qubit_one_probability(counts: CountsTable) -> np.ndarray:
    """Marginal frequency of reading 1 at each position of the raw readout."""
    counts.check_raw()
    n = 2 * counts.d
    ones = np.zeros(n)
    for key, c in counts.counts.items():
        ones += c * (np.frombuffer(key.encode(), dtype=np.uint8) == ord("1"))
    return ones / counts.total


@dataclass(frozen=True)
class OnesHistogram:
    d: int
    encoded: int
    weights: np.ndarray  # weights[k] = P(k ones among the code qubits)


def ones_histogram(counts: CountsTable) -> OnesHistogram:
    """Distribution of the number of 1s among the code qubits.

    Accepts either a raw table or one already projected to the code qubits.
    """
    if counts.width != counts.d:
        counts = project(counts, "partial")
    w = np.zeros(counts.d + 1)
    for key, c in counts.counts.items():
        w[key.count("1")] += c
    return OnesHistogram(counts.d, counts.encoded, w / w.sum())


def crossover_point(h0: OnesHistogram, h1: OnesHistogram) -> int:
    """Smallest ones-count at which encoded 1 is at least as likely as encoded 0.

    Counts with no support in either histogram are skipped. Returns ``d + 1``
    if the histograms never cross.
    """
    if h0.d != h1.d:
        raise ValueError(f"histograms have different distances {h0.d} and {h1.d}")
    for k, (a, b) in enumerate(zip(h0.weights, h1.weights)):
        if a == 0 and b == 0:
            continue
        if b >= a:
            return k
    return h0.d + 1
