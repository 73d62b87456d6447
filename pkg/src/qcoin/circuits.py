"""Circuit builders for each game design, plus qubit/depth accounting.

Register layouts (qubit indices, big-endian as in :mod:`qcoin.qstate`):

* two-party:          [A-coin, A-confirm, B-coin, B-confirm]
* two-party-witness:  two-party + [W_A, W_B]
* central:            [coin_1..coin_N, W_1..W_N]
* ring:               per player [coin_n, confirm_n]; confirm_n copies coin_{n+1}
* p2p:                per player [coin_n, slot_1..slot_{N-1}]; slot k reviews player n+k (mod N)
* hybrid:             p2p + [W_1..W_N]
* classical:          [coin_A, coin_B], no entanglement

Players are 0-based everywhere in the API.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .coins import CoinSpec, uniform_coin
from .qstate import (
    Gate,
    StateVector,
    apply_gates,
    cnot,
    hadamard,
    load_amplitudes,
    new_zero_state,
    swap,
)


class Design(str, Enum):
    TWO_PARTY = "two-party"
    TWO_PARTY_WITNESS = "two-party-witness"
    CENTRAL = "central"
    P2P = "p2p"
    RING = "ring"
    HYBRID = "hybrid"
    CLASSICAL = "classical"

    @property
    def has_witness(self) -> bool:
        return self in (Design.TWO_PARTY_WITNESS, Design.CENTRAL, Design.HYBRID)

    @property
    def is_two_party(self) -> bool:
        return self in (Design.TWO_PARTY, Design.TWO_PARTY_WITNESS, Design.CLASSICAL)


# inclusive player-count bounds per design
SIZE_LIMITS = {
    Design.TWO_PARTY: (2, 2),
    Design.TWO_PARTY_WITNESS: (2, 2),
    Design.CLASSICAL: (2, 2),
    Design.CENTRAL: (2, 12),
    Design.RING: (2, 12),
    Design.P2P: (2, 5),
    Design.HYBRID: (2, 4),
}


class CircuitSizeError(ValueError):
    pass


@dataclass(frozen=True)
class GameLayout:
    num_players: int
    design: Design
    coin_qubits: tuple[int, ...]
    # per player: ((reviewed_player, qubit), ...)
    confirmation_qubits: tuple[tuple[tuple[int, int], ...], ...]
    witness_qubits: tuple[int, ...] = ()

    @property
    def num_qubits(self) -> int:
        return (
            len(self.coin_qubits)
            + sum(len(c) for c in self.confirmation_qubits)
            + len(self.witness_qubits)
        )

    def all_qubits(self) -> list[int]:
        qs = list(self.coin_qubits) + list(self.witness_qubits)
        for conf in self.confirmation_qubits:
            qs.extend(q for _, q in conf)
        return qs

    def owner(self, qubit: int):
        """Player index owning ``qubit``, or ``"W"`` for witness qubits."""
        if qubit in self.witness_qubits:
            return "W"
        if qubit in self.coin_qubits:
            return self.coin_qubits.index(qubit)
        for n, conf in enumerate(self.confirmation_qubits):
            if any(q == qubit for _, q in conf):
                return n
        raise KeyError(qubit)

    def reviewers_of(self, player: int) -> list[tuple[int, int]]:
        """(reviewer, qubit) pairs holding a copy of ``player``'s coin."""
        return [
            (j, q)
            for j, conf in enumerate(self.confirmation_qubits)
            for m, q in conf
            if m == player
        ]


@dataclass(frozen=True)
class Circuit:
    num_qubits: int
    gates: tuple[Gate, ...]
    layout: GameLayout

    def __post_init__(self):
        for g in self.gates:
            if any(t >= self.num_qubits for t in g.targets):
                raise ValueError(f"gate {g} exceeds {self.num_qubits} qubits")

    def simulate(self) -> StateVector:
        return apply_gates(new_zero_state(self.num_qubits), self.gates)


def check_size(design: Design, num_players: int):
    lo, hi = SIZE_LIMITS[design]
    if not lo <= num_players <= hi:
        raise CircuitSizeError(
            f"design {design.value} supports {lo}..{hi} players, got {num_players}"
        )


def _coin_layer(coin_qubits, coin: CoinSpec | None) -> list[Gate]:
    n = len(coin_qubits)
    if coin is None or coin == uniform_coin(n):
        return [hadamard(q) for q in coin_qubits]
    if coin.num_players != n:
        raise ValueError(f"coin is for {coin.num_players} players, design has {n}")
    return [load_amplitudes(coin.flat(), coin_qubits)]


def build_two_party(coin: CoinSpec | None = None) -> Circuit:
    a_coin, a_conf, b_coin, b_conf = 0, 1, 2, 3
    layout = GameLayout(2, Design.TWO_PARTY, (a_coin, b_coin), (((1, a_conf),), ((0, b_conf),)))
    if coin is None or coin == uniform_coin(2):
        gates = [hadamard(a_coin), cnot(a_coin, a_conf), hadamard(b_coin), cnot(b_coin, b_conf)]
    else:
        gates = _coin_layer((a_coin, b_coin), coin) + [cnot(a_coin, a_conf), cnot(b_coin, b_conf)]
    gates.append(swap(a_conf, b_conf))
    return Circuit(4, tuple(gates), layout)


def build_two_party_with_witness(coin: CoinSpec | None = None) -> Circuit:
    base = build_two_party(coin)
    w_a, w_b = 4, 5
    layout = GameLayout(
        2,
        Design.TWO_PARTY_WITNESS,
        base.layout.coin_qubits,
        base.layout.confirmation_qubits,
        (w_a, w_b),
    )
    gates = base.gates + (cnot(0, w_a), cnot(2, w_b))
    return Circuit(6, gates, layout)


def build_central_review(num_players: int, coin: CoinSpec | None = None) -> Circuit:
    check_size(Design.CENTRAL, num_players)
    n = num_players
    coins = tuple(range(n))
    witness = tuple(range(n, 2 * n))
    layout = GameLayout(n, Design.CENTRAL, coins, tuple(() for _ in range(n)), witness)
    gates = _coin_layer(coins, coin) + [cnot(c, w) for c, w in zip(coins, witness)]
    return Circuit(2 * n, tuple(gates), layout)


def build_ring_review(num_players: int, coin: CoinSpec | None = None) -> Circuit:
    check_size(Design.RING, num_players)
    n = num_players
    coins = tuple(2 * p for p in range(n))
    conf = tuple((((p + 1) % n, 2 * p + 1),) for p in range(n))
    layout = GameLayout(n, Design.RING, coins, conf)
    gates = _coin_layer(coins, coin)
    gates += [cnot(coins[(p + 1) % n], 2 * p + 1) for p in range(n)]
    return Circuit(2 * n, tuple(gates), layout)


def _p2p_layout(n: int, design: Design = Design.P2P, witness=()) -> GameLayout:
    coins = tuple(p * n for p in range(n))
    conf = tuple(
        tuple(((p + k) % n, p * n + k) for k in range(1, n)) for p in range(n)
    )
    return GameLayout(n, design, coins, conf, tuple(witness))


def _slot_swaps(n: int, k: int) -> list[tuple[int, int]]:
    """Swap pairs (by player position) rotating slot k left by k places."""
    if k == 1:
        return [(p, p + 1) for p in range(n - 1)]
    if k == n - 1:
        return [(p, p + 1) for p in reversed(range(n - 1))]
    # rotate-left(k) = reverse(0..k-1), reverse(k..n-1), then reverse(0..n-1)
    def rev(lo, hi):
        return [(lo + i, hi - i) for i in range((hi - lo + 1) // 2)]

    return rev(0, k - 1) + rev(k, n - 1) + rev(0, n - 1)


def _p2p_swap_gates(n: int, coin: CoinSpec | None) -> list[Gate]:
    layout = _p2p_layout(n)
    gates = _coin_layer(layout.coin_qubits, coin)
    for k in range(1, n):
        gates += [cnot(p * n, p * n + k) for p in range(n)]
    for k in range(1, n):
        gates += [swap(a * n + k, b * n + k) for a, b in _slot_swaps(n, k)]
    return gates


def _p2p_direct_gates(n: int, coin: CoinSpec | None) -> list[Gate]:
    layout = _p2p_layout(n)
    gates = _coin_layer(layout.coin_qubits, coin)
    for m in range(n):
        gates += [cnot(layout.coin_qubits[m], q) for _, q in layout.reviewers_of(m)]
    return gates


def build_p2p(num_players: int, coin: CoinSpec | None = None, construction: str = "swap") -> Circuit:
    """Peer-to-peer review state.

    ``construction="swap"`` copies each coin into the owner's own ancillas and
    then distributes the copies with SWAPs (depth 2N-1 for uniform coins);
    ``"direct"`` CNOTs each coin straight into its reviewers' slots.
    """
    check_size(Design.P2P, num_players)
    if construction == "swap":
        gates = _p2p_swap_gates(num_players, coin)
    elif construction == "direct":
        gates = _p2p_direct_gates(num_players, coin)
    else:
        raise ValueError(f"unknown construction {construction!r}")
    return Circuit(num_players**2, tuple(gates), _p2p_layout(num_players))


def build_hybrid(num_players: int, coin: CoinSpec | None = None) -> Circuit:
    check_size(Design.HYBRID, num_players)
    n = num_players
    witness = tuple(range(n * n, n * n + n))
    layout = _p2p_layout(n, Design.HYBRID, witness)
    gates = _p2p_swap_gates(n, coin)
    gates += [cnot(c, w) for c, w in zip(layout.coin_qubits, witness)]
    return Circuit(n * n + n, tuple(gates), layout)


def build_classical_baseline() -> Circuit:
    layout = GameLayout(2, Design.CLASSICAL, (0, 1), ((), ()))
    return Circuit(2, (hadamard(0), hadamard(1)), layout)


def build(design: Design | str, num_players: int = 2, coin: CoinSpec | None = None, **kw) -> Circuit:
    design = Design(design)
    check_size(design, num_players)
    if coin is not None and coin.num_players != num_players:
        raise ValueError(f"coin is for {coin.num_players} players, expected {num_players}")
    if design is Design.TWO_PARTY:
        return build_two_party(coin)
    if design is Design.TWO_PARTY_WITNESS:
        return build_two_party_with_witness(coin)
    if design is Design.CENTRAL:
        return build_central_review(num_players, coin)
    if design is Design.RING:
        return build_ring_review(num_players, coin)
    if design is Design.P2P:
        return build_p2p(num_players, coin, **kw)
    if design is Design.HYBRID:
        return build_hybrid(num_players, coin)
    if coin is not None and coin != uniform_coin(2):
        raise ValueError("the classical baseline only uses fair independent coins")
    return build_classical_baseline()


def circuit_depth(gates, num_qubits: int) -> int:
    """ASAP layering: each gate sits one layer after the latest gate sharing a qubit."""
    frontier = [0] * num_qubits
    depth = 0
    for g in gates:
        layer = 1 + max(frontier[t] for t in g.targets)
        for t in g.targets:
            frontier[t] = layer
        depth = max(depth, layer)
    return depth


def resource_report(circuit: Circuit) -> tuple[int, int]:
    return circuit.num_qubits, circuit_depth(circuit.gates, circuit.num_qubits)


def to_gate_list(circuit: Circuit) -> str:
    lines = [f"# qubits {circuit.num_qubits} design {circuit.layout.design.value}"]
    lines += [str(g) for g in circuit.gates]
    return "\n".join(lines) + "\n"


def parse_gate_list(text: str) -> tuple[int | None, list[Gate]]:
    """Inverse of :func:`to_gate_list` for the fixed gates (LOAD/U carry no matrix in text)."""
    num_qubits = None
    gates = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) >= 2 and parts[0] == "qubits":
                num_qubits = int(parts[1])
            continue
        name, _, targets = line.partition(" ")
        if name in ("LOAD", "U"):
            raise ValueError(f"{name} gates cannot be rebuilt from a gate list")
        gates.append(Gate(name, tuple(int(t) for t in targets.split(","))))
    return num_qubits, gates


def closed_form_state(layout: GameLayout, coin: CoinSpec) -> np.ndarray:
    """Amplitudes written directly from the register definitions.

    Every coin tuple (i_1..i_N) puts c[i] on the basis state where coin
    qubits read i_n, each confirmation qubit reads its reviewed player's
    bit and witness qubit n reads i_n.
    """
    amps = np.zeros(2**layout.num_qubits, dtype=complex)
    nq = layout.num_qubits
    for bits in np.ndindex(*coin.coeffs.shape):
        index = 0
        for n, q in enumerate(layout.coin_qubits):
            index |= bits[n] << (nq - 1 - q)
        for conf in layout.confirmation_qubits:
            for m, q in conf:
                index |= bits[m] << (nq - 1 - q)
        for n, q in enumerate(layout.witness_qubits):
            index |= bits[n] << (nq - 1 - q)
        amps[index] += coin.coeffs[bits]
    return amps
