"""Repetition-code circuit construction and exact state-vector simulation.

Line layout for distance ``d`` (``n = 2d`` qubits)::

    c0 a0 c1 a1 ... a(d-2) c(d-1) s

Code and ancilla qubits alternate on a line, ending in a code qubit at
position ``2d-2``. The unencoded reference qubit ``s`` sits at ``2d-1``.
Bit strings returned by the simulator use the same ordering: character ``i``
is the outcome of line position ``i``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import cos, pi, sin
from typing import NamedTuple

import numpy as np

MAX_QUBITS = 20

AFTER_ENCODING = "after_encoding"
BETWEEN_CNOT_LAYERS = "between_cnot_layers"
BEFORE_MEASUREMENT = "before_measurement"
INJECTION_POINTS = (AFTER_ENCODING, BETWEEN_CNOT_LAYERS, BEFORE_MEASUREMENT)


class CircuitError(ValueError):
    """Malformed circuit, layout or noise description."""


class ResourceError(CircuitError):
    """Register too large for the state-vector backend."""


class Role(NamedTuple):
    kind: str  # "code", "ancilla" or "reference"
    index: int

    def __str__(self):
        if self.kind == "reference":
            return "s"
        return f"{self.kind[0]}{self.index}"


@dataclass(frozen=True)
class CodeLayout:
    d: int

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 2:
            raise CircuitError(f"code distance must be an integer >= 2, got {self.d!r}")

    @property
    def n_total(self) -> int:
        return 2 * self.d

    @property
    def position_role(self) -> list[Role]:
        roles = []
        for pos in range(2 * self.d - 1):
            roles.append(Role("code" if pos % 2 == 0 else "ancilla", pos // 2))
        roles.append(Role("reference", 0))
        return roles

    @property
    def code_positions(self) -> list[int]:
        return list(range(0, 2 * self.d - 1, 2))

    @property
    def ancilla_positions(self) -> list[int]:
        return list(range(1, 2 * self.d - 2, 2))

    @property
    def s_position(self) -> int:
        return 2 * self.d - 1

    def code(self, i: int) -> int:
        return 2 * i

    def ancilla(self, i: int) -> int:
        return 2 * i + 1

    def codeword(self, encoded: int) -> str:
        """Ideal noiseless readout for the encoded bit."""
        e = str(int(encoded))
        return "".join(e if r.kind != "ancilla" else "0" for r in self.position_role)


@dataclass(frozen=True)
class NoiseModel:
    """Coherent X-rotation noise whose angle depends on the encoded state.

    Qubits prepared in ``|1>`` by the encoding step get ``theta_one``; every
    other qubit (including all ancillas) gets ``theta_zero``.
    """

    theta_zero: float = pi / 20
    theta_one: float = pi / 10
    injection_points: frozenset = field(default_factory=lambda: frozenset(INJECTION_POINTS))

    def __post_init__(self):
        object.__setattr__(self, "injection_points", frozenset(self.injection_points))
        unknown = self.injection_points - set(INJECTION_POINTS)
        if unknown:
            raise CircuitError(f"unknown injection points: {sorted(unknown)}")
        for name in ("theta_zero", "theta_one"):
            theta = getattr(self, name)
            if not 0.0 <= theta <= pi:
                raise CircuitError(f"{name} must lie in [0, pi], got {theta}")

    @classmethod
    def noiseless(cls) -> NoiseModel:
        return cls(injection_points=frozenset())

    @classmethod
    def symmetric(cls, theta: float) -> NoiseModel:
        return cls(theta_zero=theta, theta_one=theta)


@dataclass(frozen=True)
class Gate:
    kind: str  # "X", "RX", "CNOT", "MEASURE_ALL"
    qubits: tuple[int, ...] = ()
    theta: float | None = None


@dataclass(frozen=True)
class GateSequence:
    gates: tuple[Gate, ...]
    n_qubits: int

    def count(self, kind: str) -> int:
        return sum(1 for g in self.gates if g.kind == kind)

    def validate(self, layout: CodeLayout | None = None) -> None:
        if not self.gates or self.gates[-1].kind != "MEASURE_ALL":
            raise CircuitError("MEASURE_ALL must be the last gate")
        if self.count("MEASURE_ALL") != 1:
            raise CircuitError("MEASURE_ALL must appear exactly once")
        arity = {"X": 1, "RX": 1, "CNOT": 2, "MEASURE_ALL": 0}
        for g in self.gates:
            if g.kind not in arity:
                raise CircuitError(f"unsupported gate {g.kind!r}")
            if len(g.qubits) != arity[g.kind]:
                raise CircuitError(f"{g.kind} expects {arity[g.kind]} qubit(s), got {g.qubits}")
            if any(not 0 <= q < self.n_qubits for q in g.qubits):
                raise CircuitError(f"qubit index out of range in {g}")
            if g.kind == "RX" and g.theta is None:
                raise CircuitError("RX gate without an angle")
            if g.kind == "CNOT":
                c, t = g.qubits
                if c == t:
                    raise CircuitError("CNOT control and target coincide")
                if layout is not None:
                    roles = layout.position_role
                    if roles[c].kind != "code" or roles[t].kind != "ancilla" or abs(c - t) != 1:
                        raise CircuitError(f"CNOT {c}->{t} is not code -> adjacent ancilla")


def build_circuit(layout: CodeLayout, encoded: int, noise: NoiseModel) -> GateSequence:
    if encoded not in (0, 1):
        raise CircuitError(f"encoded bit must be 0 or 1, got {encoded!r}")
    unknown = set(noise.injection_points) - set(INJECTION_POINTS)
    if unknown:
        raise CircuitError(f"unknown injection points: {sorted(unknown)}")

    d, n = layout.d, layout.n_total
    flipped = set(layout.code_positions) | {layout.s_position} if encoded else set()
    gates: list[Gate] = [Gate("X", (q,)) for q in sorted(flipped)]

    def noise_round(point):
        if point not in noise.injection_points:
            return
        for q in range(n):
            theta = noise.theta_one if q in flipped else noise.theta_zero
            gates.append(Gate("RX", (q,), theta))

    noise_round(AFTER_ENCODING)
    for i in range(d - 1):
        gates.append(Gate("CNOT", (layout.code(i), layout.ancilla(i))))
    noise_round(BETWEEN_CNOT_LAYERS)
    for i in range(d - 1):
        gates.append(Gate("CNOT", (layout.code(i + 1), layout.ancilla(i))))
    noise_round(BEFORE_MEASUREMENT)
    gates.append(Gate("MEASURE_ALL"))

    seq = GateSequence(tuple(gates), n)
    seq.validate(layout)
    return seq


def _rx(theta: float) -> np.ndarray:
    c, s = cos(theta / 2), sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def _apply_1q(psi: np.ndarray, u: np.ndarray, q: int) -> np.ndarray:
    out = np.tensordot(u, psi, axes=([1], [q]))
    return np.moveaxis(out, 0, q)


def _apply_cnot(psi: np.ndarray, c: int, t: int) -> np.ndarray:
    idx = [slice(None)] * psi.ndim
    idx[c] = 1
    idx = tuple(idx)
    axis = t if t < c else t - 1
    psi = psi.copy()
    psi[idx] = np.flip(psi[idx], axis=axis)
    return psi


def run_statevector(seq: GateSequence, check_norm: bool = False) -> np.ndarray:
    """Evolve ``|0...0>`` through every unitary gate; returns shape ``(2,)*n``."""
    n = seq.n_qubits
    if n > MAX_QUBITS:
        raise ResourceError(f"{n} qubits exceeds the {MAX_QUBITS}-qubit guard")
    seq.validate()
    psi = np.zeros((2,) * n, dtype=complex)
    psi[(0,) * n] = 1.0
    for g in seq.gates:
        if g.kind == "X":
            psi = np.flip(psi, axis=g.qubits[0])
        elif g.kind == "RX":
            psi = _apply_1q(psi, _rx(g.theta), g.qubits[0])
        elif g.kind == "CNOT":
            psi = _apply_cnot(psi, *g.qubits)
        if check_norm:
            norm = np.vdot(psi, psi).real
            if abs(norm - 1.0) > 1e-10:
                raise CircuitError(f"norm drifted to {norm} after {g}")
    return psi


def simulate_exact(seq: GateSequence, n: int | None = None) -> np.ndarray:
    """Born-rule probability of every outcome.

    Entry ``k`` of the returned vector is the probability of the bit string
    ``format(k, f"0{n}b")``, so the most significant bit is line position 0.
    """
    if n is None:
        n = seq.n_qubits
    if n != seq.n_qubits:
        raise CircuitError(f"sequence acts on {seq.n_qubits} qubits, not {n}")
    if n > MAX_QUBITS:
        raise ResourceError(f"{n} qubits exceeds the {MAX_QUBITS}-qubit guard")
    psi = run_statevector(seq)
    probs = (np.abs(psi) ** 2).reshape(-1)
    total = probs.sum()
    if abs(total - 1.0) > 1e-10:
        raise CircuitError(f"outcome probabilities sum to {total}")
    return probs / total


def index_to_bits(k: int, n: int) -> str:
    return format(k, f"0{n}b")


def distribution_dict(probs: np.ndarray, n: int, cutoff: float = 0.0) -> dict[str, float]:
    """Map nonzero outcome probabilities to their bit strings."""
    (support,) = np.nonzero(probs > cutoff)
    return {index_to_bits(int(k), n): float(probs[k]) for k in support}


def sample_outcome(seq: GateSequence, n: int | None = None, rng_seed=None) -> str:
    """Draw a single measurement record; deterministic for a fixed seed."""
    probs = simulate_exact(seq, n)
    rng = np.random.default_rng(rng_seed)
    k = rng.choice(probs.size, p=probs)
    return index_to_bits(int(k), seq.n_qubits)


def sample_counts(probs: np.ndarray, n: int, shots: int, rng: np.random.Generator) -> dict[str, int]:
    """Tally ``shots`` independent draws from an exact outcome distribution."""
    tallies = rng.multinomial(shots, probs / probs.sum())
    (hit,) = np.nonzero(tallies)
    return {index_to_bits(int(k), n): int(tallies[k]) for k in hit}


def flip_targets(layout: CodeLayout, roles) -> list[int]:
    roles = set(roles)
    unknown = roles - {"code", "ancilla", "reference"}
    if unknown:
        raise CircuitError(f"unknown flip target roles: {sorted(unknown)}")
    return [pos for pos, r in enumerate(layout.position_role) if r.kind in roles]


def sample_flip_counts(
    layout: CodeLayout,
    encoded: int,
    p: float,
    shots: int,
    rng: np.random.Generator,
    targets=("code",),
) -> dict[str, int]:
    """Classical stochastic bit-flip backend.

    Code and reference flips happen right after the ideal encoding, so each
    ancilla records the parity of its two (possibly flipped) neighbours.
    Ancilla flips are applied afterwards and act as readout errors.
    """
    if not 0.0 <= p <= 1.0:
        raise CircuitError(f"flip probability must lie in [0, 1], got {p}")
    n, d = layout.n_total, layout.d
    chosen = np.zeros(n, dtype=bool)
    chosen[flip_targets(layout, targets)] = True

    flips = (rng.random((shots, n)) < p) & chosen
    bits = np.zeros((shots, n), dtype=np.uint8)
    code = np.array(layout.code_positions)
    bits[:, code] = encoded
    bits[:, layout.s_position] = encoded
    bits[:, code] ^= flips[:, code]
    bits[:, layout.s_position] ^= flips[:, layout.s_position]
    for i in range(d - 1):
        a = layout.ancilla(i)
        bits[:, a] = bits[:, layout.code(i)] ^ bits[:, layout.code(i + 1)] ^ flips[:, a]

    weights = 1 << np.arange(n - 1, -1, -1, dtype=np.int64)
    keys = bits.astype(np.int64) @ weights
    uniq, tallies = np.unique(keys, return_counts=True)
    return {index_to_bits(int(k), n): int(c) for k, c in zip(uniq, tallies)}
