"""Dense statevector engine.

Qubit 0 is the most significant bit of the basis-state index (big-endian),
so for three qubits ``|100>`` is index 4. Every operation returns a new
:class:`StateVector`; nothing is mutated in place.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

MAX_QUBITS = 26
NORM_TOL = 1e-10
PREP_TOL = 1e-8
UNITARY_TOL = 1e-10


class StateError(ValueError):
    """Base class for statevector errors."""


class SizeError(StateError):
    pass


class NormalizationError(StateError):
    pass


class DimensionError(StateError):
    pass


class QubitIndexError(StateError, IndexError):
    pass


class ZeroProbabilityError(StateError):
    pass


@dataclass(frozen=True)
class StateVector:
    num_qubits: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.amplitudes.shape != (2**self.num_qubits,):
            raise DimensionError(
                f"expected {2**self.num_qubits} amplitudes, got {self.amplitudes.shape}"
            )

    @property
    def norm(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def tensor(self) -> np.ndarray:
        """View the amplitudes as an n-axis array with axis k = qubit k."""
        return self.amplitudes.reshape((2,) * self.num_qubits)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
_SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)

GATE_ARITY = {"H": 1, "X": 1, "CNOT": 2, "SWAP": 2, "U": 1}


def is_unitary(matrix: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    m = np.asarray(matrix, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    return bool(np.allclose(m.conj().T @ m, np.eye(m.shape[0]), atol=tol, rtol=0))


@dataclass(frozen=True)
class Gate:
    """A gate acting on ``targets``.

    ``kind`` is one of H, X, CNOT (targets = control, target), SWAP, U (an
    arbitrary single-qubit unitary) or LOAD (a multi-qubit unitary used to
    load coin amplitudes from ``|0...0>``).
    """

    kind: str
    targets: tuple[int, ...]
    matrix: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if len(set(self.targets)) != len(self.targets):
            raise QubitIndexError(f"{self.kind} targets must be distinct: {self.targets}")
        if any(t < 0 for t in self.targets):
            raise QubitIndexError(f"negative qubit index in {self.targets}")
        if self.kind in GATE_ARITY:
            if len(self.targets) != GATE_ARITY[self.kind]:
                raise ValueError(f"{self.kind} takes {GATE_ARITY[self.kind]} target(s)")
        elif self.kind != "LOAD":
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if self.kind in ("U", "LOAD"):
            if self.matrix is None:
                raise ValueError(f"{self.kind} gate needs a matrix")
            dim = 2 ** len(self.targets)
            if self.matrix.shape != (dim, dim):
                raise ValueError(f"{self.kind} matrix must be {dim}x{dim}")
            if not is_unitary(self.matrix):
                raise ValueError(f"{self.kind} matrix is not unitary")

    def unitary(self) -> np.ndarray:
        if self.kind == "H":
            return _H
        if self.kind == "X":
            return _X
        if self.kind == "CNOT":
            return _CNOT
        if self.kind == "SWAP":
            return _SWAP
        return self.matrix

    def inverse(self) -> "Gate":
        if self.kind in ("H", "X", "CNOT", "SWAP"):
            return self
        return Gate(self.kind, self.targets, self.matrix.conj().T)

    def __str__(self):
        return f"{self.kind} {','.join(str(t) for t in self.targets)}"


def hadamard(q: int) -> Gate:
    return Gate("H", (q,))


def pauli_x(q: int) -> Gate:
    return Gate("X", (q,))


def cnot(control: int, target: int) -> Gate:
    return Gate("CNOT", (control, target))


def swap(a: int, b: int) -> Gate:
    return Gate("SWAP", (a, b))


def single_qubit_unitary(matrix, q: int) -> Gate:
    return Gate("U", (q,), np.asarray(matrix, dtype=complex))


def loading_unitary(coeffs: np.ndarray) -> np.ndarray:
    """Unitary whose first column is ``coeffs`` (a phased Householder reflection)."""
    c = np.asarray(coeffs, dtype=complex)
    c = c / np.linalg.norm(c)
    dim = c.shape[0]
    phase = c[0] / abs(c[0]) if abs(c[0]) > 0 else 1.0
    y = c * np.conj(phase)  # y[0] is real and non-negative
    w = y.copy()
    w[0] -= 1.0
    wn = np.linalg.norm(w)
    if wn < 1e-15:
        return phase * np.eye(dim, dtype=complex)
    w /= wn
    return phase * (np.eye(dim, dtype=complex) - 2.0 * np.outer(w, w.conj()))


def load_amplitudes(coeffs, targets: Sequence[int]) -> Gate:
    return Gate("LOAD", tuple(targets), loading_unitary(np.asarray(coeffs).ravel()))


def _check_qubits(num_qubits: int, qubits: Sequence[int]):
    for q in qubits:
        if not 0 <= q < num_qubits:
            raise QubitIndexError(f"qubit {q} out of range for {num_qubits} qubits")


def new_zero_state(num_qubits: int) -> StateVector:
    if not 1 <= num_qubits <= MAX_QUBITS:
        raise SizeError(f"num_qubits must be in [1, {MAX_QUBITS}], got {num_qubits}")
    amps = np.zeros(2**num_qubits, dtype=complex)
    amps[0] = 1.0
    return StateVector(num_qubits, amps)


def prepare_from_amplitudes(coeffs, num_qubits: int) -> StateVector:
    if not 1 <= num_qubits <= MAX_QUBITS:
        raise SizeError(f"num_qubits must be in [1, {MAX_QUBITS}], got {num_qubits}")
    amps = np.array(coeffs, dtype=complex).ravel()
    if amps.shape[0] != 2**num_qubits:
        raise DimensionError(f"need {2**num_qubits} coefficients, got {amps.shape[0]}")
    norm_sq = float(np.vdot(amps, amps).real)
    if abs(norm_sq - 1.0) > PREP_TOL:
        raise NormalizationError(f"sum of |c|^2 is {norm_sq}, not 1")
    return StateVector(num_qubits, amps / np.sqrt(norm_sq))


def _apply_matrix(state: StateVector, matrix: np.ndarray, targets: Sequence[int]) -> StateVector:
    k = len(targets)
    n = state.num_qubits
    op = matrix.reshape((2,) * (2 * k))
    psi = np.tensordot(op, state.tensor(), axes=(list(range(k, 2 * k)), list(targets)))
    psi = np.moveaxis(psi, list(range(k)), list(targets))
    return StateVector(n, np.ascontiguousarray(psi).reshape(-1))


def apply_gate(state: StateVector, gate: Gate) -> StateVector:
    _check_qubits(state.num_qubits, gate.targets)
    return _apply_matrix(state, gate.unitary(), gate.targets)


def apply_gates(state: StateVector, gates: Sequence[Gate]) -> StateVector:
    for g in gates:
        state = apply_gate(state, g)
    return state


def _branch_weights(state: StateVector, qubit: int) -> tuple[float, float]:
    probs = np.moveaxis(np.abs(state.tensor()) ** 2, qubit, 0).reshape(2, -1)
    s0, s1 = probs.sum(axis=1)
    return float(s0), float(s1)


def marginal_probability(state: StateVector, qubit: int) -> tuple[float, float]:
    _check_qubits(state.num_qubits, [qubit])
    s0, s1 = _branch_weights(state, qubit)
    total = s0 + s1
    # Dividing by the total keeps deterministic qubits at exactly (1, 0) / (0, 1).
    return s0 / total, s1 / total


@dataclass(frozen=True)
class MeasurementOutcome:
    qubit: int
    bit: int
    probability: float


def project(state: StateVector, qubit: int, bit: int) -> tuple[float, StateVector]:
    """Project ``qubit`` onto ``bit``; returns the branch probability and the renormalized state."""
    _check_qubits(state.num_qubits, [qubit])
    p = marginal_probability(state, qubit)[bit]
    if p <= 0.0:
        raise ZeroProbabilityError(f"qubit {qubit} has zero probability of reading {bit}")
    psi = state.tensor().copy()
    idx = [slice(None)] * state.num_qubits
    idx[qubit] = 1 - bit
    psi[tuple(idx)] = 0.0
    amps = psi.reshape(-1)
    amps /= np.sqrt(float(np.vdot(amps, amps).real))
    return p, StateVector(state.num_qubits, amps)


def measure_qubit(
    state: StateVector, qubit: int, rng: np.random.Generator
) -> tuple[MeasurementOutcome, StateVector]:
    p0, _ = marginal_probability(state, qubit)
    bit = 0 if rng.random() < p0 else 1
    p, post = project(state, qubit, bit)
    return MeasurementOutcome(qubit, bit, p), post


def sample_bitstrings(
    state: StateVector, qubits: Sequence[int], size: int, rng: np.random.Generator
) -> np.ndarray:
    """Draw ``size`` joint readings of ``qubits`` at once; returns an (size, k) int array."""
    _check_qubits(state.num_qubits, qubits)
    probs = np.abs(state.tensor()) ** 2
    others = tuple(q for q in range(state.num_qubits) if q not in qubits)
    # remaining axes come out in ascending qubit order
    joint = probs.sum(axis=others) if others else probs
    flat = joint.reshape(-1)
    flat = flat / flat.sum()
    draws = rng.choice(flat.shape[0], size=size, p=flat)
    k = len(qubits)
    sorted_q = sorted(qubits)
    bits_sorted = (draws[:, None] >> np.arange(k - 1, -1, -1)) & 1
    pos = {q: i for i, q in enumerate(sorted_q)}
    return bits_sorted[:, [pos[q] for q in qubits]]


def branch_distribution(state: StateVector, qubits: Sequence[int]) -> dict[tuple[int, ...], float]:
    """Exact joint distribution of measuring ``qubits`` in sequence, by walking every branch."""
    out: dict[tuple[int, ...], float] = {}

    def walk(s: StateVector, i: int, prefix: tuple[int, ...], weight: float):
        if i == len(qubits):
            out[prefix] = out.get(prefix, 0.0) + weight
            return
        for bit, p in enumerate(marginal_probability(s, qubits[i])):
            if p > 0.0:
                _, post = project(s, qubits[i], bit)
                walk(post, i + 1, prefix + (bit,), weight * p)

    walk(state, 0, (), 1.0)
    return out


@dataclass(frozen=True)
class SupportState:
    """The same state stored as its nonzero entries only.

    Exact counterpart of :class:`StateVector` for sparse states (the game
    states here have 2^N nonzeros out of up to 2^(N^2+N)); measuring costs
    O(support) instead of O(2^n).
    """

    num_qubits: int
    indices: np.ndarray = field(repr=False)
    amplitudes: np.ndarray = field(repr=False)

    @classmethod
    def from_state(cls, state: StateVector) -> "SupportState":
        idx = np.flatnonzero(state.amplitudes)
        return cls(state.num_qubits, idx, state.amplitudes[idx])

    @classmethod
    def zero(cls, num_qubits: int) -> "SupportState":
        if not 1 <= num_qubits <= MAX_QUBITS:
            raise SizeError(f"num_qubits must be in [1, {MAX_QUBITS}], got {num_qubits}")
        return cls(num_qubits, np.zeros(1, dtype=np.int64), np.ones(1, dtype=complex))

    def apply_gate(self, gate: Gate, drop_tol: float = 1e-14) -> "SupportState":
        """Apply ``gate`` touching only the nonzero entries.

        Entries whose magnitude falls below ``drop_tol`` (exact cancellations
        up to rounding) are dropped.
        """
        _check_qubits(self.num_qubits, gate.targets)
        k = len(gate.targets)
        shifts = np.array([self.num_qubits - 1 - t for t in gate.targets], dtype=np.int64)
        local = np.zeros_like(self.indices)
        for s in shifts:
            local = (local << 1) | ((self.indices >> s) & 1)
        mask = int(np.bitwise_or.reduce(np.int64(1) << shifts))
        rest = self.indices & ~mask
        groups, inverse = np.unique(rest, return_inverse=True)
        block = np.zeros((groups.shape[0], 2**k), dtype=complex)
        block[inverse, local] = self.amplitudes
        out = block @ gate.unitary().T
        g, col = np.nonzero(np.abs(out) > drop_tol)
        spread = np.zeros(2**k, dtype=np.int64)
        for j in range(2**k):
            for i, s in enumerate(shifts):
                if (j >> (k - 1 - i)) & 1:
                    spread[j] |= np.int64(1) << s
        idx = groups[g] | spread[col]
        order = np.argsort(idx)
        return SupportState(self.num_qubits, idx[order], out[g, col][order])

    def apply_gates(self, gates: Sequence[Gate]) -> "SupportState":
        state = self
        for g in gates:
            state = state.apply_gate(g)
        return state

    def to_state(self) -> StateVector:
        amps = np.zeros(2**self.num_qubits, dtype=complex)
        amps[self.indices] = self.amplitudes
        return StateVector(self.num_qubits, amps)

    def _bits(self, qubit: int) -> np.ndarray:
        _check_qubits(self.num_qubits, [qubit])
        return (self.indices >> (self.num_qubits - 1 - qubit)) & 1

    def marginal(self, qubit: int) -> tuple[float, float]:
        if self.indices.shape[0] == 1:
            _check_qubits(self.num_qubits, [qubit])
            bit = (int(self.indices[0]) >> (self.num_qubits - 1 - qubit)) & 1
            return (0.0, 1.0) if bit else (1.0, 0.0)
        w = np.abs(self.amplitudes) ** 2
        ones = self._bits(qubit).astype(bool)
        s1 = float(w[ones].sum())
        s0 = float(w[~ones].sum())
        total = s0 + s1
        return s0 / total, s1 / total

    def project(self, qubit: int, bit: int) -> "SupportState":
        if self.indices.shape[0] == 1 and self.marginal(qubit)[bit] == 1.0:
            return self
        keep = self._bits(qubit) == bit
        amps = self.amplitudes[keep]
        norm = np.sqrt(float(np.sum(np.abs(amps) ** 2)))
        if norm == 0.0:
            raise ZeroProbabilityError(f"qubit {qubit} has zero probability of reading {bit}")
        return SupportState(self.num_qubits, self.indices[keep], amps / norm)
