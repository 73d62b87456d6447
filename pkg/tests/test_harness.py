import numpy as np
import pytest

from qcoin.circuits import Design
from qcoin.coins import FairCoinParams, fair_coin, uniform_coin
from qcoin.protocol import classical_liar
from qcoin.harness import (
    ConfigError,
    ExperimentConfig,
    InsufficientSampleError,
    Schedule,
    ScheduleError,
    collusion_sweep,
    config_from_mapping,
    exact_distribution,
    fairness_test,
    load_config,
    read_jsonl,
    round_seed,
    rows_to_csv,
    run_batch,
    run_classical_baseline,
    schedule_sweep,
    standard_error,
    verify_coin,
    write_jsonl,
)


# --- schedules and seeds -------------------------------------------------------


def test_schedule_order_and_ties():
    assert Schedule((3, 1, 2)).announcement_order() == (1, 2, 0)
    assert Schedule((1, 1, 0)).announcement_order() == (2, 0, 1)
    with pytest.raises(ScheduleError):
        Schedule((0, -1))


def test_round_seed_is_a_pure_function():
    assert round_seed(5, 3, 1) == round_seed(5, 3, 1)
    assert len({round_seed(5, t, r) for t in range(20) for r in range(5)}) == 100


# --- classical baseline ------------------------------------------------------


def test_baseline_cheater_always_wins():
    stats = run_classical_baseline(10_000, cheater=1, schedule=Schedule((0, 1)), seed=1)
    assert stats.decided > 0
    assert stats.cheater_win_rate == 1.0
    assert stats.decided + stats.undecided == stats.trials


def test_baseline_symmetric_cheater():
    stats = run_classical_baseline(2000, cheater=0, schedule=Schedule((1, 0)), seed=2)
    assert stats.cheater_win_rate == 1.0


def test_baseline_honest_is_even():
    stats = run_classical_baseline(100_000, cheater=None, seed=3)
    p = stats.win_rate(0)
    assert abs(p - 0.5) < 4 * standard_error(0.5, stats.decided)


def test_baseline_requires_cheater_last():
    with pytest.raises(ScheduleError):
        run_classical_baseline(10, cheater=1, schedule=Schedule((1, 0)))
    with pytest.raises(ScheduleError):
        run_classical_baseline(10, cheater=1, schedule=Schedule((1, 1)))


# --- batches ----------------------------------------------------------------


def test_batch_two_party_no_mismatches():
    stats = run_batch(ExperimentConfig(trials=5000, seed=4))
    assert stats.confirmation_mismatches == 0
    assert stats.undecided == 0
    assert sum(stats.verdicts.values()) == 5000


def test_batch_fair_coin_heads_frequency():
    coin = fair_coin(FairCoinParams(0.3, (0, 0.5, 1, 1.5)))
    stats = run_batch(ExperimentConfig(coin=coin, trials=20_000, seed=5, replay_cap=1))
    for p in range(2):
        n = stats.flips[p]
        assert abs(stats.heads_frequency(p) - 0.5) < 4 * standard_error(0.5, n)


def test_batch_p2p_liar_never_accepted():
    cfg = ExperimentConfig(design=Design.P2P, num_players=3, trials=500, seed=6, behaviors={1: classical_liar()})
    stats = run_batch(cfg)
    assert stats.acceptance_rate(1) == 0.0
    assert stats.acceptance_rate(0) == 1.0 and stats.acceptance_rate(2) == 1.0


def test_batch_is_deterministic_and_thread_independent():
    cfg = ExperimentConfig(design=Design.HYBRID, num_players=3, trials=300, seed=9)
    seen_a, seen_b = [], []
    a = run_batch(cfg, seen_a.append)
    b = run_batch(ExperimentConfig(design=Design.HYBRID, num_players=3, trials=300, seed=9, threads=3), seen_b.append)
    assert a.rows() == b.rows()
    assert [t.to_json() for t in seen_a] == [t.to_json() for t in seen_b]


def test_replay_cap_counts_undecided():
    perfectly_correlated = fair_coin(FairCoinParams(1.0))
    stats = run_batch(ExperimentConfig(coin=perfectly_correlated, trials=20, replay_cap=5, seed=0))
    assert stats.undecided == 20
    assert stats.rounds == 100


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig(trials=0)
    with pytest.raises(ConfigError):
        ExperimentConfig(replay_cap=0)
    with pytest.raises(ConfigError):
        ExperimentConfig(num_players=3, coin=uniform_coin(2))


# --- fairness test -----------------------------------------------------------


def test_fairness_exact_half():
    stat, ok = fairness_test((0.5, 0.5), 100_000)
    assert stat == 0.0 and ok


def test_fairness_biased_fails():
    stat, ok = fairness_test((0.6, 0.4), 100_000)
    # (10000^2 + 10000^2) / 50000
    assert stat == pytest.approx(4000.0)
    assert not ok


def test_fairness_small_sample():
    with pytest.raises(InsufficientSampleError):
        fairness_test((0.5, 0.5), 999)


def test_fairness_calibration():
    passes = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        heads = rng.binomial(10_000, 0.5) / 10_000
        passes += fairness_test((heads, 1 - heads), 10_000)[1]
    # about 99 expected; 95 leaves a wide margin
    assert passes >= 95


def test_verify_coin():
    report = verify_coin(fair_coin(FairCoinParams(0.2, (1, 2, 3, 4))), 50_000, seed=1)
    assert all(ok for _, ok in report.values())


# --- exact sweeps --------------------------------------------------------------


def test_schedule_irrelevant_for_quantum_designs():
    for design, n in [("two-party", 2), ("central", 3), ("p2p", 3), ("hybrid", 3)]:
        schedules = [Schedule(d) for d in ([0] * n, list(range(n)), list(range(n))[::-1])]
        dists = schedule_sweep(design, uniform_coin(n), schedules)
        for d in dists[1:]:
            assert d.keys() == dists[0].keys()
            for k in d:
                assert d[k] == pytest.approx(dists[0][k], abs=1e-10)


def test_liar_schedule_cannot_shift_winner_distribution_with_witness():
    honest = exact_distribution("two-party-witness")
    for delays in ((0, 1), (1, 0)):
        lied = schedule_sweep(
            "two-party-witness", None, [Schedule(delays)], {1: classical_liar("best-response")}
        )[0]
        assert lied == pytest.approx(honest, abs=1e-12)


def test_collusion_sweep_shape():
    rows = collusion_sweep(4, ks=[0, 1, 2, 3], rs=[1.0, 0.5], trials=50, seed=0)
    by = {(r.colluders, r.r): r for r in rows}
    assert by[(0, 1.0)].honest_acceptance == 1.0
    assert by[(1, 1.0)].colluder_acceptance == 0.0
    # three colluders vouch for each other: each lie has 2 of 3 reviewers agreeing
    assert by[(3, 0.5)].colluder_acceptance == 1.0
    assert by[(3, 1.0)].colluder_acceptance == 0.0


# --- files --------------------------------------------------------------------


def test_csv_rows():
    text = rows_to_csv([("a", 1), ("b", 0.1)])
    assert text == "metric,value\na,1\nb,0.1\n"


def test_jsonl_round_trip(tmp_path):
    seen = []
    run_batch(ExperimentConfig(design=Design.P2P, num_players=3, trials=5, seed=1), seen.append)
    path = tmp_path / "t.jsonl"
    write_jsonl(seen, path)
    back = read_jsonl(path)
    assert [t.to_json() for t in back] == [t.to_json() for t in seen]


def test_load_config(tmp_path):
    (tmp_path / "coin.toml").write_text("a = 0.25\n")
    cfg_file = tmp_path / "exp.toml"
    cfg_file.write_text(
        'design = "hybrid"\nplayers = 2\ntrials = 10\nseed = 3\nmode = "p2p-primary"\n'
        '[coin]\nfile = "coin.toml"\n'
        '[thresholds]\nr = 0.5\n'
        '[schedule]\ndelays = [2, 0]\n'
        '[behaviors.1]\nkind = "manipulator"\nunitary = "X"\n'
    )
    cfg = load_config(cfg_file)
    assert cfg.design is Design.HYBRID and cfg.trials == 10 and cfg.seed == 3
    assert cfg.coin == fair_coin(FairCoinParams(0.25))
    assert cfg.thresholds == (0.5, 0.0)
    assert cfg.schedule.announcement_order() == (1, 0)
    assert cfg.behaviors[1].kind == "manipulator"
    with pytest.raises(ConfigError):
        config_from_mapping({"design": "p2p", "colour": "red"})
    with pytest.raises(ConfigError):
        config_from_mapping({"design": "nope"})
