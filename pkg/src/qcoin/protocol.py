"""Staged game engine.

A game runs preparation, coin flips (in a chosen player order),
confirmation measurements and a decision, and records everything in a
:class:`Transcript`. All randomness flows through a measurement chooser,
so the same engine both samples games (seeded RNG) and enumerates every
measurement branch exactly (:func:`enumerate_games`).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import qstate
from .circuits import Circuit, Design, GameLayout, build, check_size
from .coins import HEADS, CoinSpec, uniform_coin
from .consensus import (
    ConsensusMode,
    ReviewReport,
    accept_result,
    build_report,
    hybrid_decide,
)
from .qstate import StateVector, SupportState, ZeroProbabilityError, is_unitary, project

SCHEMA = "qcoin.transcript/1"
WITNESS = "W"
GAME = "game"
RULES = ("unique-heads", "parity")


class GameConfigError(ValueError):
    pass


class TargetNotOwnedError(GameConfigError):
    pass


class NotMeasuredError(LookupError):
    pass


# --- behaviors -------------------------------------------------------------

LIAR_POLICIES = ("negate", "heads", "tails", "best-response")


@dataclass(frozen=True)
class PlayerBehavior:
    """What a player does besides measuring.

    kinds: ``honest``; ``liar`` (misreports its own coin per ``policy``);
    ``early`` (measures its confirmation qubits before anyone flips);
    ``manipulator`` (applies ``unitary`` to its own confirmation qubits after
    the flips, optionally only the copy of player ``target``); ``colluder``
    (lies about its coin and vouches for the lies of ``coalition``).
    """

    kind: str = "honest"
    policy: str = "negate"
    unitary: np.ndarray | None = field(default=None, compare=False, repr=False)
    target: int | None = None
    coalition: frozenset = frozenset()

    def __post_init__(self):
        if self.kind not in ("honest", "liar", "early", "manipulator", "colluder"):
            raise GameConfigError(f"unknown behavior {self.kind!r}")
        if self.kind == "liar" and self.policy not in LIAR_POLICIES:
            raise GameConfigError(f"unknown liar policy {self.policy!r}")
        if self.kind == "manipulator":
            if self.unitary is None or not is_unitary(self.unitary):
                raise GameConfigError("manipulator needs a 2x2 unitary")
            if np.asarray(self.unitary).shape != (2, 2):
                raise GameConfigError("manipulator unitary must be 2x2")

    def describe(self) -> str:
        if self.kind == "liar":
            return f"liar:{self.policy}"
        if self.kind == "colluder":
            return "colluder:" + ",".join(str(p) for p in sorted(self.coalition))
        return self.kind


HONEST = PlayerBehavior()


def classical_liar(policy: str = "negate") -> PlayerBehavior:
    return PlayerBehavior("liar", policy=policy)


def early_confirm_measurer() -> PlayerBehavior:
    return PlayerBehavior("early")


def unitary_manipulator(unitary, target: int | None = None) -> PlayerBehavior:
    return PlayerBehavior("manipulator", unitary=np.asarray(unitary, dtype=complex), target=target)


def colluder(coalition: Iterable[int]) -> PlayerBehavior:
    return PlayerBehavior("colluder", coalition=frozenset(coalition))


# --- outcomes and transcripts ---------------------------------------------


@dataclass(frozen=True)
class Outcome:
    kind: str  # winner | replay | rejected | disputed
    player: int | None = None
    rejected: tuple[int, ...] = ()

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind}
        if self.kind == "winner":
            d["player"] = self.player
        if self.kind == "rejected":
            d["players"] = list(self.rejected)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Outcome":
        return cls(d["kind"], d.get("player"), tuple(d.get("players", ())))

    def __str__(self):
        if self.kind == "winner":
            return f"winner:{self.player}"
        if self.kind == "rejected":
            return "rejected:" + ",".join(map(str, self.rejected))
        return self.kind


def WinnerIs(player: int) -> Outcome:  # noqa: N802
    return Outcome("winner", player)


TIE_REPLAY = Outcome("replay")
DISPUTED = Outcome("disputed")


def Rejected(players) -> Outcome:  # noqa: N802
    return Outcome("rejected", rejected=tuple(sorted(players)))


@dataclass(frozen=True)
class Event:
    t: int
    actor: int | str
    action: str
    qubit: int | None = None
    bit: int | None = None
    subject: int | None = None  # whose coin a confirmation/witness qubit copies

    def to_dict(self) -> dict:
        d = {"t": self.t, "actor": self.actor, "action": self.action}
        if self.qubit is not None:
            d["qubit"] = self.qubit
        if self.bit is not None:
            d["bit"] = self.bit
        if self.subject is not None:
            d["subject"] = self.subject
        return d


@dataclass
class Transcript:
    design: Design
    num_players: int
    seed: int | None
    order: tuple[int, ...]
    behaviors: tuple[str, ...]
    events: list[Event] = field(default_factory=list)
    announcements: dict[int, int] = field(default_factory=dict)
    verdict: Outcome | None = None
    results: tuple[int, ...] | None = None
    provenance: tuple[str, ...] | None = None
    review: ReviewReport | None = None

    def coin_results(self) -> dict[int, int]:
        return {e.actor: e.bit for e in self.events if e.action == "flip"}

    def witness_results(self) -> dict[int, int]:
        return {e.subject: e.bit for e in self.events if e.action == "witness"}

    def event_time(self, action: str) -> int | None:
        for e in self.events:
            if e.action == action:
                return e.t
        return None

    def confirmation_mismatches(self) -> int:
        """Confirmation readings that differ from the reviewed player's flip."""
        coins = self.coin_results()
        return sum(
            1
            for e in self.events
            if e.action in ("confirm", "witness") and e.subject in coins and e.bit != coins[e.subject]
        )

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "design": self.design.value,
            "players": self.num_players,
            "seed": self.seed,
            "order": list(self.order),
            "behaviors": list(self.behaviors),
            "events": [e.to_dict() for e in self.events],
            "announcements": {str(k): v for k, v in sorted(self.announcements.items())},
            "verdict": self.verdict.to_dict() if self.verdict else None,
            "results": list(self.results) if self.results is not None else None,
            "provenance": list(self.provenance) if self.provenance is not None else None,
            "review": self.review.to_dict() if self.review else None,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> "Transcript":
        if d.get("schema") != SCHEMA:
            raise ValueError(f"unsupported transcript schema {d.get('schema')!r}")
        return cls(
            design=Design(d["design"]),
            num_players=int(d["players"]),
            seed=d["seed"],
            order=tuple(d["order"]),
            behaviors=tuple(d["behaviors"]),
            events=[
                Event(e["t"], e["actor"], e["action"], e.get("qubit"), e.get("bit"), e.get("subject"))
                for e in d["events"]
            ],
            announcements={int(k): v for k, v in d["announcements"].items()},
            verdict=Outcome.from_dict(d["verdict"]) if d.get("verdict") else None,
            results=tuple(d["results"]) if d.get("results") is not None else None,
            provenance=tuple(d["provenance"]) if d.get("provenance") is not None else None,
            review=ReviewReport.from_dict(d["review"]) if d.get("review") else None,
        )

    @classmethod
    def from_json(cls, text: str) -> "Transcript":
        return cls.from_dict(json.loads(text))


# --- decision rules --------------------------------------------------------


def decide_two_party(a_result: int, b_result: int) -> Outcome:
    """Heads (0) beats tails (1); equal results are replayed."""
    if a_result == b_result:
        return TIE_REPLAY
    return WinnerIs(0 if a_result == HEADS else 1)


def decide(results: Sequence[int], rule: str = "unique-heads") -> Outcome:
    """N-party winner rule.

    ``unique-heads``: the only player who got heads wins, otherwise replay
    (for two players this is :func:`decide_two_party`). ``parity``: read the
    bits as an integer x; player ``x mod N`` wins unless x falls in the
    incomplete top block, which is replayed so every player is equally likely.
    """
    n = len(results)
    if rule == "unique-heads":
        heads = [p for p, b in enumerate(results) if b == HEADS]
        return WinnerIs(heads[0]) if len(heads) == 1 else TIE_REPLAY
    if rule == "parity":
        x = int("".join(str(int(b)) for b in results), 2)
        if x >= (2**n // n) * n:
            return TIE_REPLAY
        return WinnerIs(x % n)
    raise GameConfigError(f"unknown rule {rule!r}")


# --- engine ----------------------------------------------------------------

Chooser = Callable[[float, float], int]


def rng_chooser(rng: np.random.Generator) -> Chooser:
    def choose(p0: float, p1: float) -> int:
        return 0 if rng.random() < p0 else 1

    return choose


class GameState:
    """Mutable state of one game in progress: quantum state plus event log.

    The quantum state is kept as its nonzero support; ``state`` gives the
    dense vector whenever a gate has to be applied.
    """

    def __init__(self, layout: GameLayout, state, transcript: Transcript, chooser: Chooser):
        self.layout = layout
        self.support = state if isinstance(state, SupportState) else SupportState.from_state(state)
        self.transcript = transcript
        self.chooser = chooser
        self.clock = 0
        self.measured: dict[int, int] = {}

    @property
    def state(self) -> StateVector:
        return self.support.to_state()

    @state.setter
    def state(self, value: StateVector):
        self.support = SupportState.from_state(value)

    def log(self, actor, action, qubit=None, bit=None, subject=None):
        self.transcript.events.append(Event(self.clock, actor, action, qubit, bit, subject))
        self.clock += 1

    def measure(self, actor, action, qubit: int, subject=None) -> int:
        if qubit in self.measured:
            bit = self.measured[qubit]
        else:
            p0, p1 = self.support.marginal(qubit)
            bit = self.chooser(p0, p1)
            self.support = self.support.project(qubit, bit)
            self.measured[qubit] = bit
        self.log(actor, action, qubit, bit, subject)
        return bit


def own_confirmation_qubits(layout: GameLayout, player: int) -> list[tuple[int, int]]:
    if not 0 <= player < layout.num_players:
        raise GameConfigError(f"no player {player}")
    return list(layout.confirmation_qubits[player])


def apply_manipulation(game: GameState, player: int, unitary, qubit: int | None = None) -> GameState:
    """Apply a local unitary to ``player``'s own confirmation qubit(s).

    Touching any qubit the player does not own raises TargetNotOwnedError.
    """
    u = np.asarray(unitary, dtype=complex)
    owned = [q for _, q in own_confirmation_qubits(game.layout, player)]
    if qubit is not None and qubit not in owned:
        raise TargetNotOwnedError(f"player {player} does not own confirmation qubit {qubit}")
    targets = owned if qubit is None else [qubit]
    if not targets:
        raise TargetNotOwnedError(f"player {player} has no confirmation qubit in this design")
    for q in targets:
        if q in game.measured:
            raise GameConfigError(f"qubit {q} was already measured")
        game.state = qstate.apply_gate(game.state, qstate.single_qubit_unitary(u, q))
        game.log(player, "manipulate", q)
    return game


@lru_cache(maxsize=4)
def _prepared(design: Design, num_players: int, coin: CoinSpec, construction: str) -> tuple[Circuit, SupportState]:
    kw = {"construction": construction} if design is Design.P2P else {}
    circuit = build(design, num_players, coin, **kw)
    # sparse simulation: the support never exceeds 2^N entries
    return circuit, SupportState.zero(circuit.num_qubits).apply_gates(circuit.gates)


def prepare(design, coin: CoinSpec | None = None, num_players: int | None = None, construction: str = "swap"):
    """Built circuit and its initial state as a dense vector."""
    circuit, support = _prepare_all(design, coin, num_players, construction)
    return circuit, support.to_state()


def prepare_support(design, coin: CoinSpec | None = None, num_players: int | None = None, construction: str = "swap"):
    """Built circuit and its initial state as a sparse support (cached)."""
    return _prepare_all(design, coin, num_players, construction)


def _prepare_all(design, coin, num_players, construction):
    design = Design(design)
    if num_players is None:
        num_players = coin.num_players if coin is not None else 2
    if coin is None:
        coin = uniform_coin(num_players)
    if coin.num_players != num_players:
        raise GameConfigError(f"coin is for {coin.num_players} players, design asked for {num_players}")
    check_size(design, num_players)
    return _prepared(design, num_players, coin, construction)


def _check_order(order, n: int) -> tuple[int, ...]:
    order = tuple(int(p) for p in order)
    if sorted(order) != list(range(n)):
        raise GameConfigError(f"order {order} is not a permutation of 0..{n - 1}")
    return order


def _liar_claim(policy: str, truth: int, earlier: Mapping[int, int], player: int) -> int:
    if policy == "negate":
        return 1 - truth
    if policy == "heads":
        return HEADS
    if policy == "tails":
        return 1 - HEADS
    # best-response under unique-heads: with nothing heard yet, report truthfully
    others = [b for p, b in earlier.items() if p != player]
    if not others:
        return truth
    return HEADS


@dataclass(frozen=True)
class GameOptions:
    thresholds: tuple[float, float] = (1.0, 0.0)
    rule: str = "unique-heads"
    mode: ConsensusMode = ConsensusMode.WITNESS_PRIMARY
    announce_order: tuple[int, ...] | None = None


def _play(
    circuit: Circuit,
    prepared: SupportState,
    order: tuple[int, ...],
    behaviors: tuple[PlayerBehavior, ...],
    chooser: Chooser,
    seed,
    options: GameOptions,
) -> Transcript:
    layout = circuit.layout
    design = layout.design
    n = layout.num_players
    tr = Transcript(design, n, seed, order, tuple(b.describe() for b in behaviors))
    game = GameState(layout, prepared, tr, chooser)

    # 1. preparation
    game.log(GAME, "prepare")

    # early confirmation measurement, before any coin is flipped
    for p in order:
        if behaviors[p].kind == "early":
            for m, q in layout.confirmation_qubits[p]:
                game.measure(p, "confirm", q, subject=m)

    # 2. coin flipping
    for p in order:
        game.measure(p, "flip", layout.coin_qubits[p])

    # local tampering with own confirmation qubits after the flips
    for p in order:
        b = behaviors[p]
        if b.kind == "manipulator":
            qubits = [q for m, q in layout.confirmation_qubits[p] if b.target is None or m == b.target]
            if b.target is not None and not qubits:
                raise TargetNotOwnedError(f"player {p} holds no copy of player {b.target}")
            for q in qubits:
                apply_manipulation(game, p, b.unitary, q)

    # the witness record is fixed as soon as every coin is flipped
    witness_bits = None
    if layout.witness_qubits:
        witness_bits = tuple(
            game.measure(WITNESS, "witness", q, subject=k) for k, q in enumerate(layout.witness_qubits)
        )
        game.log(WITNESS, "witness-verdict")

    # 3. confirmation
    readings: dict[int, dict[int, int]] = {p: {} for p in range(n)}
    for p in order:
        for m, q in layout.confirmation_qubits[p]:
            if q in game.measured:  # measured early
                readings[p][m] = game.measured[q]
                continue
            readings[p][m] = game.measure(p, "confirm", q, subject=m)

    # 4. announcements and decision
    coins = tr.coin_results()
    announce_order = options.announce_order or order
    announce_order = _check_order(announce_order, n)
    for p in announce_order:
        b = behaviors[p]
        truth = coins[p]
        if b.kind == "liar":
            claim = _liar_claim(b.policy, truth, tr.announcements, p)
        elif b.kind == "colluder":
            claim = 1 - truth
        else:
            claim = truth
        tr.announcements[p] = claim
        game.log(p, "announce", bit=claim)

    claims: dict[int, dict[int, int]] = {}
    for j in range(n):
        b = behaviors[j]
        claims[j] = {
            m: (1 - bit if b.kind == "colluder" and m in b.coalition else bit)
            for m, bit in readings[j].items()
        }

    announced = tuple(tr.announcements[p] for p in range(n))
    if design is Design.CLASSICAL:
        tr.results = announced
        tr.verdict = decide(announced, options.rule)
    elif design is Design.TWO_PARTY:
        conflict = any(claims[j][m] != tr.announcements[m] for j in claims for m in claims[j])
        if conflict:
            tr.verdict = DISPUTED
        else:
            tr.results = announced
            tr.verdict = decide(announced, options.rule)
    elif design in (Design.TWO_PARTY_WITNESS, Design.CENTRAL):
        for p in range(n):
            if tr.announcements[p] != witness_bits[p]:
                game.log(p, "overruled", bit=witness_bits[p])
        tr.results = witness_bits
        tr.provenance = ("witness",) * n
        tr.verdict = decide(witness_bits, options.rule)
    elif design in (Design.P2P, Design.RING):
        report = build_report(n, tr.announcements, claims, options.thresholds)
        tr.review = report
        game.log(GAME, "p2p-verdict")
        rejected = [p for p in range(n) if not accept_result(report, p)]
        if rejected:
            tr.verdict = Rejected(rejected)
        else:
            tr.results = announced
            tr.provenance = ("p2p",) * n
            tr.verdict = decide(announced, options.rule)
    elif design is Design.HYBRID:
        report = build_report(n, tr.announcements, claims, options.thresholds)
        tr.review = report
        game.log(GAME, "p2p-verdict")
        if options.mode is ConsensusMode.WITNESS_PRIMARY:
            appeal = [p for p in range(n) if tr.announcements[p] != witness_bits[p]]
        else:
            appeal = [p for p in range(n) if not accept_result(report, p)]
        for p in appeal:
            game.log(p, "appeal")
        tr.results, tr.provenance = hybrid_decide(options.mode, witness_bits, report, appeal)
        tr.verdict = decide(tr.results, options.rule)
    else:  # pragma: no cover
        raise GameConfigError(f"unhandled design {design}")
    game.log(GAME, "verdict")
    return tr


def _normalize(design, coin, order, behaviors, num_players, options_kw):
    design = Design(design)
    if coin is None:
        n = num_players or 2
        coin = uniform_coin(n)
    n = coin.num_players
    if num_players is not None and num_players != n:
        raise GameConfigError(f"coin is for {n} players, got num_players={num_players}")
    order = _check_order(range(n) if order is None else order, n)
    if behaviors is None:
        behaviors = (HONEST,) * n
    elif isinstance(behaviors, Mapping):
        behaviors = tuple(behaviors.get(p, HONEST) for p in range(n))
    else:
        behaviors = tuple(behaviors)
    if len(behaviors) != n:
        raise GameConfigError(f"need {n} behaviors, got {len(behaviors)}")
    thresholds = tuple(options_kw.pop("thresholds", (1.0, 0.0)))
    mode = ConsensusMode(options_kw.pop("mode", ConsensusMode.WITNESS_PRIMARY))
    rule = options_kw.pop("rule", "unique-heads")
    if rule not in RULES:
        raise GameConfigError(f"unknown rule {rule!r}")
    ao = options_kw.pop("announce_order", None)
    construction = options_kw.pop("construction", "swap")
    if options_kw:
        raise TypeError(f"unexpected options {sorted(options_kw)}")
    options = GameOptions(thresholds, rule, mode, tuple(ao) if ao is not None else None)
    return design, coin, order, behaviors, options, construction


def run_game(
    design,
    coin: CoinSpec | None = None,
    order: Sequence[int] | None = None,
    behaviors=None,
    seed: int = 0,
    *,
    num_players: int | None = None,
    **options,
) -> Transcript:
    """Play one round and return its transcript.

    ``behaviors`` is a sequence or a {player: PlayerBehavior} mapping;
    missing players are honest. Extra keyword options: ``thresholds``
    (r, R), ``rule``, ``mode`` (hybrid consensus mode), ``announce_order``,
    ``construction`` (P2P builder).
    """
    design, coin, order, behaviors, opts, construction = _normalize(
        design, coin, order, behaviors, num_players, options
    )
    circuit, state = prepare_support(design, coin, coin.num_players, construction)
    rng = np.random.default_rng(seed)
    return _play(circuit, state, order, behaviors, rng_chooser(rng), seed, opts)


class _BranchChooser:
    def __init__(self, prefix: list[int]):
        self.prefix = prefix
        self.path: list[int] = []
        self.prob = 1.0
        self.pending: list[list[int]] = []

    def __call__(self, p0: float, p1: float) -> int:
        i = len(self.path)
        if i < len(self.prefix):
            bit = self.prefix[i]
        else:
            bit = 0 if p0 > 0 else 1
            if bit == 0 and p1 > 0:
                self.pending.append(self.path + [1])
        self.path.append(bit)
        self.prob *= (p0, p1)[bit]
        return bit


def enumerate_games(
    design,
    coin: CoinSpec | None = None,
    order: Sequence[int] | None = None,
    behaviors=None,
    *,
    num_players: int | None = None,
    **options,
) -> list[tuple[float, Transcript]]:
    """Every measurement branch of a game with its exact probability.

    Manipulator behaviors are supported; the probabilities sum to 1.
    """
    design, coin, order, behaviors, opts, construction = _normalize(
        design, coin, order, behaviors, num_players, options
    )
    circuit, state = prepare_support(design, coin, coin.num_players, construction)
    out = []
    stack: list[list[int]] = [[]]
    while stack:
        chooser = _BranchChooser(stack.pop())
        tr = _play(circuit, state, order, behaviors, chooser, None, opts)
        stack.extend(chooser.pending)
        out.append((chooser.prob, tr))
    return out


def outcome_distribution(branches, key) -> dict:
    dist: dict = {}
    for p, tr in branches:
        k = key(tr)
        dist[k] = dist.get(k, 0.0) + p
    return dist


def confirm_readings(transcript: Transcript, player) -> list[tuple[int, int]]:
    """(reviewed player, bit) pairs measured by ``player`` (or the witness, ``"W"``)."""
    action = "witness" if player == WITNESS else "confirm"
    out = [(e.subject, e.bit) for e in transcript.events if e.actor == player and e.action == action]
    if not out:
        raise NotMeasuredError(f"{player!r} has no confirmation readings in this transcript")
    return out


def partial_flip_state(design, coin: CoinSpec | None, flipped: Sequence[tuple[int, int]], num_players: int | None = None) -> StateVector:
    """Exact state after the listed players saw the listed coin bits."""
    design = Design(design)
    players = [p for p, _ in flipped]
    if len(set(players)) != len(players):
        raise GameConfigError("each player flips at most once")
    circuit, state = prepare(design, coin, num_players)
    for p, bit in flipped:
        if not 0 <= p < circuit.layout.num_players:
            raise GameConfigError(f"no player {p}")
        try:
            _, state = project(state, circuit.layout.coin_qubits[p], int(bit))
        except ZeroProbabilityError as exc:
            raise ZeroProbabilityError(f"flip outcomes {list(flipped)} have zero probability") from exc
    return state
