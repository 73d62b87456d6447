"""Experiment driver: classical baseline, seeded batches, fairness checks, sweeps."""

from __future__ import annotations

import csv
import io
import json
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy import stats

from .circuits import Design, build_classical_baseline
from .coins import HEADS, CoinSpec, coin_from_mapping, load_coin
from .consensus import ConsensusMode, accept_result
from .protocol import (
    GameConfigError,
    PlayerBehavior,
    Transcript,
    _normalize,
    _play,
    decide_two_party,
    enumerate_games,
    outcome_distribution,
    prepare,
    prepare_support,
    rng_chooser,
)
from .qstate import sample_bitstrings

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

DEFAULT_REPLAY_CAP = 64
SIGNIFICANCE = 0.01
MIN_FAIRNESS_TRIALS = 1000


class ScheduleError(ValueError):
    pass


class InsufficientSampleError(ValueError):
    pass


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Schedule:
    """Per-player announcement delays in abstract ticks."""

    delays: tuple[int, ...]

    def __post_init__(self):
        if any(d < 0 for d in self.delays):
            raise ScheduleError(f"delays must be non-negative: {self.delays}")

    def announcement_order(self) -> tuple[int, ...]:
        # ties broken by player index
        return tuple(sorted(range(len(self.delays)), key=lambda p: (self.delays[p], p)))


def round_seed(master: int, trial: int, rnd: int) -> int:
    """Per-round seed derived from the master seed; independent of execution order."""
    ss = np.random.SeedSequence([int(master), int(trial), int(rnd)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


# --- classical baseline ------------------------------------------------------


@dataclass
class BaselineStats:
    trials: int
    cheater: int | None
    rounds: int = 0
    decided: int = 0
    undecided: int = 0
    wins: list[int] = field(default_factory=lambda: [0, 0])

    def win_rate(self, player: int) -> float:
        return self.wins[player] / self.decided if self.decided else float("nan")

    @property
    def cheater_win_rate(self) -> float:
        return self.win_rate(self.cheater) if self.cheater is not None else float("nan")

    def rows(self) -> list[tuple[str, object]]:
        rows = [
            ("trials", self.trials),
            ("rounds", self.rounds),
            ("decided", self.decided),
            ("undecided", self.undecided),
            ("wins_A", self.wins[0]),
            ("wins_B", self.wins[1]),
        ]
        if self.cheater is not None:
            rows += [("cheater", "AB"[self.cheater]), ("cheater_win_rate", self.cheater_win_rate)]
        return rows


def run_classical_baseline(
    trials: int,
    cheater: int | None = None,
    schedule: Schedule | None = None,
    seed: int = 0,
    replay_cap: int = DEFAULT_REPLAY_CAP,
) -> BaselineStats:
    """Conventional game: independent coins, results reported over a classical line.

    The cheater hears the opponent's report first and answers with heads;
    that wins whenever the opponent reported tails and forces a replay
    otherwise, so every decided game goes to the cheater.
    """
    if trials < 1 or replay_cap < 1:
        raise ConfigError("trials and replay_cap must be >= 1")
    schedule = schedule or Schedule((0, 1) if cheater != 0 else (1, 0))
    if len(schedule.delays) != 2:
        raise ScheduleError("the classical game has two players")
    if cheater is not None:
        if cheater not in (0, 1):
            raise ScheduleError(f"cheater must be player 0 or 1, got {cheater}")
        other = 1 - cheater
        if not schedule.delays[cheater] > schedule.delays[other]:
            raise ScheduleError("the cheater must announce strictly after the opponent")

    state = build_classical_baseline().simulate()
    rng = np.random.default_rng(seed)
    out = BaselineStats(trials, cheater)
    pool = sample_bitstrings(state, [0, 1], 2 * trials + 64, rng)
    k = 0
    for _ in range(trials):
        for _rnd in range(replay_cap):
            if k == len(pool):
                pool = sample_bitstrings(state, [0, 1], 2 * trials + 64, rng)
                k = 0
            a, b = int(pool[k, 0]), int(pool[k, 1])
            k += 1
            out.rounds += 1
            reported = [a, b]
            if cheater is not None:
                # best response to the opponent's announcement
                reported[cheater] = HEADS
            verdict = decide_two_party(*reported)
            if verdict.kind == "winner":
                out.decided += 1
                out.wins[verdict.player] += 1
                break
        else:
            out.undecided += 1
    return out


# --- batches -----------------------------------------------------------------


@dataclass
class ExperimentConfig:
    design: Design = Design.TWO_PARTY
    num_players: int = 2
    coin: CoinSpec | None = None
    trials: int = 1000
    seed: int = 0
    behaviors: Mapping[int, PlayerBehavior] = field(default_factory=dict)
    thresholds: tuple[float, float] = (1.0, 0.0)
    schedule: Schedule | None = None
    replay_cap: int = DEFAULT_REPLAY_CAP
    order: tuple[int, ...] | None = None
    rule: str = "unique-heads"
    mode: ConsensusMode = ConsensusMode.WITNESS_PRIMARY
    construction: str = "swap"
    threads: int = 1

    def __post_init__(self):
        self.design = Design(self.design)
        self.mode = ConsensusMode(self.mode)
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.replay_cap < 1:
            raise ConfigError("replay_cap must be >= 1")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.coin is not None and self.coin.num_players != self.num_players:
            raise ConfigError(
                f"coin is for {self.coin.num_players} players, config says {self.num_players}"
            )
        if self.schedule is not None and len(self.schedule.delays) != self.num_players:
            raise ConfigError("schedule needs one delay per player")


@dataclass
class BatchStats:
    design: str
    num_players: int
    trials: int = 0
    rounds: int = 0
    heads: Counter = field(default_factory=Counter)
    flips: Counter = field(default_factory=Counter)
    winners: Counter = field(default_factory=Counter)
    verdicts: Counter = field(default_factory=Counter)
    accepted: Counter = field(default_factory=Counter)
    reviewed_rounds: int = 0
    undecided: int = 0
    confirmation_mismatches: int = 0

    def merge(self, other: "BatchStats") -> "BatchStats":
        for name in ("heads", "flips", "winners", "verdicts", "accepted"):
            getattr(self, name).update(getattr(other, name))
        for name in ("trials", "rounds", "reviewed_rounds", "undecided", "confirmation_mismatches"):
            setattr(self, name, getattr(self, name) + getattr(other, name))
        return self

    def heads_frequency(self, player: int) -> float:
        return self.heads[player] / self.flips[player]

    def acceptance_rate(self, player: int) -> float:
        return self.accepted[player] / self.reviewed_rounds if self.reviewed_rounds else float("nan")

    def winner_frequency(self, player: int) -> float:
        decided = sum(self.winners.values())
        return self.winners[player] / decided if decided else float("nan")

    def rows(self) -> list[tuple[str, object]]:
        rows: list[tuple[str, object]] = [
            ("design", self.design),
            ("players", self.num_players),
            ("trials", self.trials),
            ("rounds", self.rounds),
            ("undecided", self.undecided),
            ("confirmation_mismatches", self.confirmation_mismatches),
        ]
        for p in range(self.num_players):
            rows.append((f"heads_frequency_{p}", self.heads_frequency(p) if self.flips[p] else float("nan")))
        for p in range(self.num_players):
            rows.append((f"wins_{p}", self.winners[p]))
        if self.reviewed_rounds:
            for p in range(self.num_players):
                rows.append((f"acceptance_rate_{p}", self.acceptance_rate(p)))
        for kind in sorted(self.verdicts):
            rows.append((f"verdict_{kind}", self.verdicts[kind]))
        return rows


def _run_trials(config: ExperimentConfig, trial_ids: Sequence[int], keep: bool):
    behaviors = {p: b for p, b in config.behaviors.items()}
    options = {
        "thresholds": config.thresholds,
        "rule": config.rule,
        "mode": config.mode,
        "construction": config.construction,
    }
    if config.schedule is not None:
        options["announce_order"] = config.schedule.announcement_order()
    design, coin, order, behaviors, opts, construction = _normalize(
        config.design, config.coin, config.order, behaviors, config.num_players, options
    )
    circuit, state = prepare_support(design, coin, coin.num_players, construction)
    out = BatchStats(design.value, coin.num_players)
    kept: list[Transcript] = []
    for t in trial_ids:
        out.trials += 1
        for rnd in range(config.replay_cap):
            seed = round_seed(config.seed, t, rnd)
            tr = _play(circuit, state, order, behaviors, rng_chooser(np.random.default_rng(seed)), seed, opts)
            out.rounds += 1
            for p, bit in tr.coin_results().items():
                out.flips[p] += 1
                out.heads[p] += bit == HEADS
            out.confirmation_mismatches += tr.confirmation_mismatches()
            if tr.review is not None:
                out.reviewed_rounds += 1
                for p in range(coin.num_players):
                    out.accepted[p] += accept_result(tr.review, p)
            if keep:
                kept.append(tr)
            if tr.verdict.kind != "replay":
                break
        else:
            out.undecided += 1
        out.verdicts[tr.verdict.kind] += 1
        if tr.verdict.kind == "winner":
            out.winners[tr.verdict.player] += 1
    return out, kept


def run_batch(config: ExperimentConfig, sink: Callable[[Transcript], None] | None = None) -> BatchStats:
    """Run ``config.trials`` games (each replayed on ties up to the cap) and aggregate.

    The result depends only on the config: per-round seeds come from
    :func:`round_seed`, and thread chunks are merged with commutative counters.
    ``sink`` receives every round's transcript in trial order.
    """
    trial_ids = list(range(config.trials))
    keep = sink is not None
    if config.threads == 1:
        stats_, kept = _run_trials(config, trial_ids, keep)
        chunks = [(stats_, kept)]
    else:
        size = -(-len(trial_ids) // config.threads)
        parts = [trial_ids[i : i + size] for i in range(0, len(trial_ids), size)]
        with ThreadPoolExecutor(config.threads) as pool:
            chunks = list(pool.map(lambda ids: _run_trials(config, ids, keep), parts))
    total = BatchStats(Design(config.design).value, config.num_players)
    for part, kept in chunks:
        total.merge(part)
        if sink is not None:
            for tr in kept:
                sink(tr)
    return total


# --- statistics ----------------------------------------------------------------


def fairness_test(frequencies: Sequence[float], trials: int, significance: float = SIGNIFICANCE):
    """Chi-square goodness of fit of (heads, tails) frequencies against (1/2, 1/2).

    Returns ``(statistic, passed)``; passes when the statistic is below the
    critical value at ``significance`` (6.63 for 0.01, one degree of freedom).
    """
    if trials < MIN_FAIRNESS_TRIALS:
        raise InsufficientSampleError(f"need at least {MIN_FAIRNESS_TRIALS} trials, got {trials}")
    observed = np.asarray(frequencies, dtype=float) * trials
    if observed.shape != (2,):
        raise ValueError("expected (heads, tails) frequencies")
    expected = trials / 2.0
    statistic = float(np.sum((observed - expected) ** 2) / expected)
    critical = float(stats.chi2.ppf(1.0 - significance, df=1))
    return statistic, statistic < critical


def verify_coin(coin: CoinSpec, samples: int, seed: int = 0) -> dict[int, tuple[float, bool]]:
    """Pre-game check: sample many copies of the shared coin and test each player's marginal."""
    circuit, state = prepare(Design.CENTRAL, coin, coin.num_players)
    rng = np.random.default_rng(seed)
    bits = sample_bitstrings(state, list(circuit.layout.coin_qubits), samples, rng)
    out = {}
    for p in range(coin.num_players):
        heads = float(np.mean(bits[:, p] == HEADS))
        out[p] = fairness_test((heads, 1.0 - heads), samples)
    return out


def standard_error(p: float, n: int) -> float:
    return float(np.sqrt(p * (1.0 - p) / n))


def exact_distribution(design, coin=None, order=None, behaviors=None, key=None, **options) -> dict:
    """Exact distribution of ``key(transcript)`` (default: the verdict) over all branches."""
    key = key or (lambda tr: str(tr.verdict))
    return outcome_distribution(enumerate_games(design, coin, order, behaviors, **options), key)


def schedule_sweep(design, coin: CoinSpec | None, schedules: Iterable[Schedule], behaviors=None, **options) -> list[dict]:
    """Exact verdict distribution under each announcement schedule."""
    out = []
    for s in schedules:
        out.append(
            exact_distribution(design, coin, None, behaviors, announce_order=s.announcement_order(), **options)
        )
    return out


@dataclass(frozen=True)
class CollusionRow:
    num_players: int
    colluders: int
    r: float
    colluder_acceptance: float
    honest_acceptance: float


def collusion_sweep(
    num_players: int,
    ks: Iterable[int],
    rs: Iterable[float],
    trials: int,
    seed: int = 0,
    design=Design.P2P,
) -> list[CollusionRow]:
    """Acceptance of colluding liars (players 0..k-1) vs honest players, per (k, r)."""
    rs = list(rs)
    rows = []
    for k in ks:
        if not 0 <= k <= num_players:
            raise ConfigError(f"cannot have {k} colluders among {num_players}")
        coalition = frozenset(range(k))
        behaviors = {p: PlayerBehavior("colluder", coalition=coalition) for p in coalition}
        design_, coin, order, behaviors_, opts, construction = _normalize(
            design, None, None, behaviors, num_players, {}
        )
        circuit, state = prepare_support(design_, coin, num_players, construction)
        reports = []
        for t in range(trials):
            s = round_seed(seed, t, 0)
            tr = _play(circuit, state, order, behaviors_, rng_chooser(np.random.default_rng(s)), s, opts)
            reports.append(tr.review)
        for r in rs:
            c_acc = h_acc = 0
            for rep in reports:
                rep = rep.with_thresholds(r)
                c_acc += sum(accept_result(rep, p) for p in coalition)
                h_acc += sum(accept_result(rep, p) for p in range(num_players) if p not in coalition)
            rows.append(
                CollusionRow(
                    num_players,
                    k,
                    r,
                    c_acc / (k * trials) if k else float("nan"),
                    h_acc / ((num_players - k) * trials) if k < num_players else float("nan"),
                )
            )
    return rows


# --- files ---------------------------------------------------------------------


def format_value(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows: Iterable[tuple[str, object]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["metric", "value"])
    for name, value in rows:
        w.writerow([name, format_value(value)])
    return buf.getvalue()


def write_csv(rows, path: str | Path):
    Path(path).write_text(rows_to_csv(rows))


def write_jsonl(transcripts: Iterable[Transcript], path: str | Path):
    with open(path, "w") as fh:
        for tr in transcripts:
            fh.write(tr.to_json() + "\n")


def read_jsonl(path: str | Path) -> list[Transcript]:
    with open(path) as fh:
        return [Transcript.from_json(line) for line in fh if line.strip()]


_NAMED_UNITARIES = {
    "I": np.eye(2),
    "X": np.array([[0, 1], [1, 0]]),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.array([[1, 0], [0, -1]]),
    "H": np.array([[1, 1], [1, -1]]) / np.sqrt(2),
}


def behavior_from_mapping(data: Mapping) -> PlayerBehavior:
    kind = data.get("kind", "honest")
    u = data.get("unitary")
    if isinstance(u, str):
        if u not in _NAMED_UNITARIES:
            raise ConfigError(f"unknown unitary name {u!r}")
        u = _NAMED_UNITARIES[u]
    elif u is not None:
        u = np.array([[complex(*e) if isinstance(e, (list, tuple)) else e for e in row] for row in u])
    try:
        return PlayerBehavior(
            kind,
            policy=data.get("policy", "negate"),
            unitary=None if u is None else np.asarray(u, dtype=complex),
            target=data.get("target"),
            coalition=frozenset(data.get("coalition", ())),
        )
    except GameConfigError as exc:
        raise ConfigError(str(exc)) from exc


def config_from_mapping(data: Mapping, base_dir: Path | None = None) -> ExperimentConfig:
    known = {
        "design", "players", "coin", "trials", "seed", "behaviors", "thresholds", "schedule",
        "replay_cap", "order", "rule", "mode", "construction", "threads",
    }
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    n = int(data.get("players", 2))
    coin = None
    if "coin" in data:
        section = dict(data["coin"])
        if "file" in section:
            path = Path(section["file"])
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            coin = load_coin(path, n)
        else:
            section.setdefault("players", n)
            coin = coin_from_mapping(section, n)
    th = data.get("thresholds", {})
    schedule = data.get("schedule")
    try:
        return ExperimentConfig(
            design=Design(data.get("design", "two-party")),
            num_players=n,
            coin=coin,
            trials=int(data.get("trials", 1000)),
            seed=int(data.get("seed", 0)),
            behaviors={int(p): behavior_from_mapping(b) for p, b in data.get("behaviors", {}).items()},
            thresholds=(float(th.get("r", 1.0)), float(th.get("R", 0.0))),
            schedule=Schedule(tuple(schedule["delays"])) if schedule else None,
            replay_cap=int(data.get("replay_cap", DEFAULT_REPLAY_CAP)),
            order=tuple(data["order"]) if "order" in data else None,
            rule=data.get("rule", "unique-heads"),
            mode=ConsensusMode(data.get("mode", "witness-primary")),
            construction=data.get("construction", "swap"),
            threads=int(data.get("threads", 1)),
        )
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    text = path.read_text()
    data = json.loads(text) if path.suffix == ".json" else tomllib.loads(text)
    return config_from_mapping(data, path.parent)


def with_overrides(config: ExperimentConfig, **kw) -> ExperimentConfig:
    return replace(config, **{k: v for k, v in kw.items() if v is not None})
