"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import harness
from .circuits import Design, build, resource_report, to_gate_list
from .coins import CoinError, CoinSpec, FairCoinParams, fair_coin, load_coin
from .consensus import ConsensusMode, review_summary
from .protocol import (
    PlayerBehavior,
    Transcript,
    confirm_readings,
    run_game,
)
from .qstate import StateError, marginal_probability

DESIGNS = [d.value for d in Design]
PLAYER_NAMES = "AB"


class CliError(Exception):
    def __init__(self, message: str, code: int = 2):
        super().__init__(message)
        self.code = code


def fmt(x: float) -> str:
    return f"{x:.12g}"


def fmt_complex(z: complex) -> str:
    if z.imag == 0:
        return fmt(z.real)
    return f"{fmt(z.real)}{'+' if z.imag >= 0 else '-'}{fmt(abs(z.imag))}j"


def player_name(design: Design, p) -> str:
    if p == "W":
        return "W"
    if design.is_two_party:
        return PLAYER_NAMES[p]
    return f"P{p + 1}"


def parse_player(text: str) -> int:
    t = text.strip().upper()
    if t in ("A", "B"):
        return "AB".index(t)
    if t.startswith("P"):
        return int(t[1:]) - 1
    return int(t)


def parse_behavior(spec: str) -> tuple[int, PlayerBehavior]:
    """``PLAYER=KIND[:ARG]`` e.g. ``B=liar:negate``, ``1=early``, ``A=manip:X@1``, ``P1=colluder:0,1``."""
    who, sep, rest = spec.partition("=")
    if not sep:
        raise CliError(f"bad behavior {spec!r}; expected PLAYER=KIND[:ARG]")
    player = parse_player(who)
    kind, _, arg = rest.partition(":")
    data: dict = {}
    if kind in ("honest", "early"):
        data["kind"] = kind
    elif kind == "liar":
        data.update(kind="liar", policy=arg or "negate")
    elif kind in ("manip", "manipulator"):
        name, _, target = (arg or "X").partition("@")
        data.update(kind="manipulator", unitary=name)
        if target:
            data["target"] = parse_player(target)
    elif kind == "colluder":
        data.update(kind="colluder", coalition=[parse_player(x) for x in arg.split(",") if x])
    else:
        raise CliError(f"unknown behavior kind {kind!r}")
    return player, harness.behavior_from_mapping(data)


def coin_from_args(args, num_players: int) -> CoinSpec | None:
    if getattr(args, "coin_file", None):
        return load_coin(args.coin_file, num_players)
    if getattr(args, "a", None) is not None or getattr(args, "phases", None):
        if num_players != 2:
            raise CliError("--a/--phases describe a two-player coin")
        phases = tuple(float(x) for x in args.phases.split(",")) if args.phases else (0.0,) * 4
        return fair_coin(FairCoinParams(args.a if args.a is not None else 0.5, phases))
    return None


def add_design_args(p: argparse.ArgumentParser, default: str | None = "two-party"):
    p.add_argument("--design", choices=DESIGNS, default=default, help="protocol design")
    p.add_argument("--players", type=int, default=None, help="number of players (default 2)")
    p.add_argument("--coin-file", help="coin tensor file (TOML or JSON, bitstring/real/imag entries)")
    p.add_argument("--a", type=float, default=None, help="fair-coin parameter a in [0,1] (two players)")
    p.add_argument("--phases", help="fair-coin phases uu,ud,du,dd in radians")
    p.add_argument("--construction", choices=["swap", "direct"], default="swap", help="P2P builder")


def add_game_args(p: argparse.ArgumentParser):
    p.add_argument("--config", help="experiment config file (TOML or JSON); flags override it")
    p.add_argument("--seed", type=int, default=None, help="master seed")
    p.add_argument("--order", help="flip order, comma separated players (default 0..N-1)")
    p.add_argument("--behavior", action="append", default=[], metavar="PLAYER=KIND[:ARG]",
                   help="player behavior: honest, early, liar[:negate|heads|tails|best-response], "
                        "manip[:X|Y|Z|H[@REVIEWED]], colluder:P,Q (repeatable)")
    p.add_argument("--r", type=float, default=None, help="peer-review acceptance threshold r")
    p.add_argument("--R", dest="big_r", type=float, default=None, help="recorded disagreement threshold R")
    p.add_argument("--rule", choices=["unique-heads", "parity"], default=None, help="winner rule")
    p.add_argument("--mode", choices=[m.value for m in ConsensusMode], default=None, help="hybrid consensus mode")
    p.add_argument("--delays", help="announcement delays per player, comma separated ticks")


def config_from_args(args) -> harness.ExperimentConfig:
    base = harness.load_config(args.config) if args.config else harness.ExperimentConfig()
    design = Design(args.design) if args.design else base.design
    n = args.players if args.players is not None else (base.num_players if args.config else 2)
    if design.is_two_party and n != 2:
        raise CliError(f"design {design.value} has exactly two players")
    coin = coin_from_args(args, n)
    if coin is None and base.coin is not None and base.coin.num_players == n:
        coin = base.coin
    behaviors = dict(base.behaviors)
    for spec in args.behavior:
        p, b = parse_behavior(spec)
        behaviors[p] = b
    r = args.r if args.r is not None else base.thresholds[0]
    big_r = args.big_r if args.big_r is not None else base.thresholds[1]
    schedule = base.schedule
    if args.delays:
        schedule = harness.Schedule(tuple(int(x) for x in args.delays.split(",")))
    order = tuple(parse_player(x) for x in args.order.split(",")) if args.order else base.order
    if schedule is not None and len(schedule.delays) != n:
        raise CliError("--delays needs one value per player")
    kw = dict(
        design=design,
        num_players=n,
        coin=coin,
        seed=args.seed if args.seed is not None else base.seed,
        behaviors=behaviors,
        thresholds=(r, big_r),
        schedule=schedule,
        order=order,
        rule=args.rule or base.rule,
        mode=ConsensusMode(args.mode) if args.mode else base.mode,
        construction=args.construction if args.construction != "swap" else base.construction,
        replay_cap=getattr(args, "replay_cap", None) or base.replay_cap,
        trials=getattr(args, "trials", None) or base.trials,
        threads=getattr(args, "threads", None) or base.threads,
    )
    return harness.ExperimentConfig(**kw)


def _write(path: str | Path, text: str):
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", 3) from exc


# --- subcommands ---------------------------------------------------------------


def cmd_prepare(args) -> int:
    n = args.players or 2
    design = Design(args.design)
    if design.is_two_party and n != 2:
        raise CliError(f"design {design.value} has exactly two players")
    coin = coin_from_args(args, n)
    kw = {"construction": args.construction} if design is Design.P2P else {}
    circuit = build(design, n, coin, **kw)
    layout = circuit.layout
    state = circuit.simulate()
    print(f"design={design.value} players={n} qubits={circuit.num_qubits}")
    for p in range(n):
        conf = " ".join(f"{q}<-{player_name(design, m)}" for m, q in layout.confirmation_qubits[p])
        print(f"{player_name(design, p)}: coin={layout.coin_qubits[p]}" + (f" confirm={conf}" if conf else ""))
    if layout.witness_qubits:
        print("W: " + " ".join(f"{q}<-{player_name(design, k)}" for k, q in enumerate(layout.witness_qubits)))
    nz = np.flatnonzero(np.abs(state.amplitudes) > 1e-12)
    print(f"nonzero_amplitudes={len(nz)}")
    shown = nz if args.full else nz[: args.cap]
    for idx in shown:
        bits = format(int(idx), f"0{circuit.num_qubits}b")
        print(f"|{bits}> {fmt_complex(complex(state.amplitudes[idx]))}")
    if len(shown) < len(nz):
        print(f"... {len(nz) - len(shown)} more (use --full)")
    for q in range(circuit.num_qubits):
        p0, p1 = marginal_probability(state, q)
        print(f"marginal q{q} p0={fmt(p0)} p1={fmt(p1)}")
    if args.gates:
        _write(args.gates, to_gate_list(circuit))
    return 0


def cmd_resources(args) -> int:
    n = args.players or 2
    design = Design(args.design)
    kw = {"construction": args.construction} if design is Design.P2P else {}
    circuit = build(design, n, None, **kw)
    qubits, depth = resource_report(circuit)
    print(f"qubits={qubits} depth={depth}")
    if args.gates:
        _write(args.gates, to_gate_list(circuit))
    return 0


def print_transcript(tr: Transcript):
    d = tr.design
    coins = tr.coin_results()
    print(f"design={d.value} players={tr.num_players} seed={tr.seed}")
    print("coins " + " ".join(f"{player_name(d, p)}={coins[p]}" for p in sorted(coins)))
    print("announced " + " ".join(f"{player_name(d, p)}={b}" for p, b in sorted(tr.announcements.items())))
    for p in range(tr.num_players):
        try:
            readings = confirm_readings(tr, p)
        except LookupError:
            continue
        print(f"{player_name(d, p)} confirms " + " ".join(f"{player_name(d, m)}={b}" for m, b in readings))
    if tr.witness_results():
        print("W records " + " ".join(f"{player_name(d, m)}={b}" for m, b in sorted(tr.witness_results().items())))
    if tr.review is not None:
        print_review(tr)
    verdict = tr.verdict
    text = str(verdict)
    if verdict.kind == "winner":
        text = f"winner:{player_name(d, verdict.player)}"
    print(f"verdict={text}")


def print_review(tr: Transcript):
    d = tr.design
    for row in review_summary(tr.review):
        if row["r"] is None:
            print(f"review {player_name(d, row['player'])} incomplete")
            continue
        print(
            f"review {player_name(d, row['player'])} r={fmt(row['r'])} R={fmt(row['R'])} "
            f"accepted={'yes' if row['accepted'] else 'no'}"
        )


def cmd_run(args) -> int:
    cfg = config_from_args(args)
    options = {"thresholds": cfg.thresholds, "rule": cfg.rule, "mode": cfg.mode, "construction": cfg.construction}
    if cfg.schedule is not None:
        options["announce_order"] = cfg.schedule.announcement_order()
    tr = run_game(cfg.design, cfg.coin, cfg.order, cfg.behaviors, cfg.seed, num_players=cfg.num_players, **options)
    print_transcript(tr)
    if args.out:
        _write(args.out, tr.to_json() + "\n")
    return 0


def cmd_batch(args) -> int:
    cfg = config_from_args(args)
    out_dir = Path(args.out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        fh = None if args.no_transcripts else open(out_dir / "transcripts.jsonl", "w")
    except OSError as exc:
        raise CliError(f"cannot write to {out_dir}: {exc}", 3) from exc
    try:
        sink = (lambda tr: fh.write(tr.to_json() + "\n")) if fh else None
        stats = harness.run_batch(cfg, sink)
    finally:
        if fh:
            fh.close()
    rows = stats.rows()
    _write(out_dir / "aggregates.csv", harness.rows_to_csv(rows))
    for name, value in rows:
        print(f"{name}={harness.format_value(value)}")
    return 0


def cmd_review(args) -> int:
    if args.transcript:
        try:
            transcripts = harness.read_jsonl(args.transcript)
        except OSError as exc:
            raise CliError(f"cannot read {args.transcript}: {exc}", 3) from exc
        if not transcripts:
            raise CliError("transcript file is empty")
        if not 0 <= args.index < len(transcripts):
            raise CliError(f"--index {args.index} out of range ({len(transcripts)} transcripts)")
        tr = transcripts[args.index]
    else:
        cfg = config_from_args(args)
        if cfg.design not in (Design.P2P, Design.RING, Design.HYBRID):
            raise CliError("review needs a peer-review design (p2p, ring or hybrid)")
        options = {"thresholds": cfg.thresholds, "rule": cfg.rule, "mode": cfg.mode}
        tr = run_game(cfg.design, cfg.coin, cfg.order, cfg.behaviors, cfg.seed, num_players=cfg.num_players, **options)
    if tr.review is None:
        raise CliError(f"transcript of design {tr.design.value} has no peer review")
    if args.r is not None:
        tr.review = tr.review.with_thresholds(args.r)
    print_review(tr)
    if tr.witness_results():
        print("W records " + " ".join(f"{player_name(tr.design, m)}={b}" for m, b in sorted(tr.witness_results().items())))
    if tr.results is not None:
        src = tr.provenance or ("?",) * len(tr.results)
        print("results " + " ".join(f"{player_name(tr.design, p)}={b}({s})" for p, (b, s) in enumerate(zip(tr.results, src))))
    print(f"verdict={tr.verdict}")
    return 0


def cmd_baseline(args) -> int:
    cheater = None if args.cheater.lower() == "none" else parse_player(args.cheater)
    schedule = None
    if args.delays:
        schedule = harness.Schedule(tuple(int(x) for x in args.delays.split(",")))
    stats = harness.run_classical_baseline(args.trials, cheater, schedule, args.seed, args.replay_cap)
    rows = stats.rows()
    if cheater is None:
        rows += [("win_rate_A", stats.win_rate(0)), ("win_rate_B", stats.win_rate(1))]
    for name, value in rows:
        print(f"{name}={harness.format_value(value)}")
    if args.out:
        _write(args.out, harness.rows_to_csv(rows))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qcoin", description="Entangled coin-flipping game simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="build a design's circuit and show the prepared state")
    add_design_args(p)
    p.add_argument("--full", action="store_true", help="print every nonzero amplitude")
    p.add_argument("--cap", type=int, default=64, help="amplitude lines shown without --full")
    p.add_argument("--gates", help="write the gate list to this file")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("resources", help="qubit count and preparation depth")
    add_design_args(p)
    p.add_argument("--gates", help="write the gate list to this file")
    p.set_defaults(func=cmd_resources)

    p = sub.add_parser("run", help="play one game and print its transcript")
    add_design_args(p, default=None)
    add_game_args(p)
    p.add_argument("--out", help="write the transcript (one JSON line) here")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("batch", help="run many games and aggregate statistics")
    add_design_args(p, default=None)
    add_game_args(p)
    p.add_argument("--trials", type=int, default=None, help="number of games")
    p.add_argument("--replay-cap", type=int, default=None, help="max rounds per game (default 64)")
    p.add_argument("--threads", type=int, default=None, help="worker threads")
    p.add_argument("--out-dir", default="qcoin-out", help="directory for aggregates.csv and transcripts.jsonl")
    p.add_argument("--no-transcripts", action="store_true", help="skip transcripts.jsonl")
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("review", help="peer-review ratios and consensus verdict")
    add_design_args(p, default=None)
    add_game_args(p)
    p.add_argument("--transcript", help="read a transcript JSON-lines file instead of playing")
    p.add_argument("--index", type=int, default=0, help="which transcript line to review")
    p.set_defaults(func=cmd_review)

    p = sub.add_parser("baseline", help="classical game with a last-announcing cheater")
    p.add_argument("--cheater", default="B", help="A, B or none")
    p.add_argument("--trials", type=int, default=10000, help="number of games")
    p.add_argument("--seed", type=int, default=0, help="seed")
    p.add_argument("--delays", help="announcement delays A,B (default: cheater last)")
    p.add_argument("--replay-cap", type=int, default=harness.DEFAULT_REPLAY_CAP, help="max rounds per game")
    p.add_argument("--out", help="write statistics CSV here")
    p.set_defaults(func=cmd_baseline)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, CoinError, StateError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
