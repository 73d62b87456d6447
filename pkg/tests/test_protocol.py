import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcoin.circuits import Design
from qcoin.coins import CoinSpec, FairCoinParams, fair_coin, player_marginal, uniform_coin
from qcoin.protocol import (
    DISPUTED,
    TIE_REPLAY,
    GameConfigError,
    GameState,
    NotMeasuredError,
    TargetNotOwnedError,
    Transcript,
    WinnerIs,
    apply_manipulation,
    classical_liar,
    colluder,
    confirm_readings,
    decide,
    decide_two_party,
    early_confirm_measurer,
    enumerate_games,
    outcome_distribution,
    partial_flip_state,
    prepare,
    rng_chooser,
    run_game,
    unitary_manipulator,
)
from qcoin.qstate import apply_gate, marginal_probability, single_qubit_unitary

X = np.array([[0, 1], [1, 0]])
A, B = 0, 1


def random_unitary(rng):
    z = (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_coin(rng, n):
    v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return CoinSpec(n, v / np.linalg.norm(v))


def find_run(design, coins, **kw):
    """First seeded run whose coin results equal ``coins``."""
    for seed in range(500):
        tr = run_game(design, seed=seed, **kw)
        if tuple(tr.coin_results()[p] for p in range(len(coins))) == tuple(coins):
            return tr
    raise AssertionError("no matching seed")


# --- decision rules ---------------------------------------------------------


def test_decide_two_party():
    assert decide_two_party(0, 1) == WinnerIs(A)
    assert decide_two_party(0, 0) == TIE_REPLAY
    assert decide_two_party(1, 0) == WinnerIs(B)
    assert decide_two_party(1, 1) == TIE_REPLAY


def test_unique_heads_rule():
    assert decide([1, 0, 1]) == WinnerIs(1)
    assert decide([0, 0, 1]) == TIE_REPLAY
    assert decide([1, 1, 1]) == TIE_REPLAY


def test_parity_rule_is_uniform_over_players():
    n = 3
    wins = {}
    for bits in itertools.product(range(2), repeat=n):
        out = decide(bits, "parity")
        wins[out] = wins.get(out, 0) + 1
    counts = [wins[WinnerIs(p)] for p in range(n)]
    assert len(set(counts)) == 1 and wins[TIE_REPLAY] == 2
    with pytest.raises(GameConfigError):
        decide([0, 1], "majority")


# --- honest games -------------------------------------------------------------


def test_two_party_confirmations_match_coins():
    for seed in range(200):
        tr = run_game("two-party", seed=seed)
        coins = tr.coin_results()
        assert confirm_readings(tr, A) == [(B, coins[B])]
        assert confirm_readings(tr, B) == [(A, coins[A])]
        assert tr.confirmation_mismatches() == 0
        assert tr.verdict == decide_two_party(coins[A], coins[B])


def test_confirm_readings_two_party_example():
    tr = find_run("two-party", (0, 1))
    assert confirm_readings(tr, A) == [(B, 1)]
    assert tr.verdict == WinnerIs(A)


def test_confirm_readings_p2p_example():
    tr = find_run("p2p", (0, 1, 1), num_players=3)
    assert confirm_readings(tr, 0) == [(1, 1), (2, 1)]


def test_central_witness_reads_everyone():
    tr = run_game("central", num_players=4, seed=3)
    coins = tr.coin_results()
    assert confirm_readings(tr, "W") == [(p, coins[p]) for p in range(4)]
    with pytest.raises(NotMeasuredError):
        confirm_readings(tr, 0)


@pytest.mark.parametrize(
    "design,n", [("two-party-witness", 2), ("central", 3), ("ring", 4), ("p2p", 4), ("hybrid", 3)]
)
def test_honest_runs_are_consistent(design, n):
    for seed in range(30):
        tr = run_game(design, num_players=n, seed=seed)
        assert tr.confirmation_mismatches() == 0
        assert tr.verdict.kind in ("winner", "replay")


def test_order_independence_two_party_sampled():
    trials = 20_000
    counts = {}
    for order in [(A, B), (B, A)]:
        c = np.zeros(4)
        for seed in range(trials):
            tr = run_game("two-party", order=order, seed=seed)
            r = tr.coin_results()
            c[2 * r[A] + r[B]] += 1
        counts[order] = c / trials
    se = np.sqrt(0.25 * 0.75 / trials) * np.sqrt(2)
    assert np.all(np.abs(counts[(A, B)] - counts[(B, A)]) < 4 * se)


@pytest.mark.parametrize("design,n", [("two-party", 2), ("central", 3), ("p2p", 3), ("ring", 3), ("hybrid", 3)])
def test_order_independence_exact(design, n):
    coin = random_coin(np.random.default_rng(n), n)
    dists = []
    for order in itertools.permutations(range(n)):
        branches = enumerate_games(design, coin, order)
        assert sum(p for p, _ in branches) == pytest.approx(1.0, abs=1e-12)
        dists.append(outcome_distribution(branches, lambda tr: tuple(sorted(tr.coin_results().items()))))
    for d in dists[1:]:
        assert d.keys() == dists[0].keys()
        for k in d:
            assert d[k] == pytest.approx(dists[0][k], abs=1e-10)
    # and the joint distribution is |c|^2
    for k, p in dists[0].items():
        assert p == pytest.approx(coin.probabilities()[tuple(b for _, b in k)], abs=1e-10)


# --- adversaries ----------------------------------------------------------------


def test_early_measurer_gains_nothing():
    coin = CoinSpec(2, np.array([[np.sqrt(0.4), np.sqrt(0.1)], [np.sqrt(0.2), np.sqrt(0.3)]]))
    prob_a = player_marginal(coin, A)
    branches = enumerate_games("two-party", coin, behaviors={B: early_confirm_measurer()})
    dist = outcome_distribution(branches, lambda tr: confirm_readings(tr, B)[0][1])
    assert dist[0] == pytest.approx(prob_a[0], abs=1e-12)
    assert dist[1] == pytest.approx(prob_a[1], abs=1e-12)
    # reading early still matches A's later flip
    for _, tr in branches:
        assert tr.confirmation_mismatches() == 0


def test_liar_disputed_without_witness():
    for seed in range(50):
        tr = run_game("two-party", seed=seed, behaviors={B: classical_liar()})
        assert tr.verdict == DISPUTED


def test_liar_overruled_by_witness():
    for seed in range(50):
        tr = run_game("two-party-witness", seed=seed, behaviors={B: classical_liar()})
        coins = tr.coin_results()
        assert tr.results == (coins[A], coins[B])
        assert any(e.action == "overruled" and e.actor == B for e in tr.events)


def test_manipulation_flips_own_reading_not_witness():
    for seed in range(40):
        tr = run_game("two-party-witness", seed=seed, behaviors={A: unitary_manipulator(X)})
        coins = tr.coin_results()
        assert confirm_readings(tr, A) == [(B, 1 - coins[B])]
        assert confirm_readings(tr, "W") == [(A, coins[A]), (B, coins[B])]
        assert tr.results == (coins[A], coins[B])


def test_manipulation_without_witness_is_disputed():
    for seed in range(40):
        tr = run_game("two-party", seed=seed, behaviors={A: unitary_manipulator(X)})
        assert tr.verdict == DISPUTED


def test_identity_manipulation_changes_nothing():
    for seed in range(20):
        a = run_game("two-party-witness", seed=seed)
        b = run_game("two-party-witness", seed=seed, behaviors={A: unitary_manipulator(np.eye(2))})
        assert b.coin_results() == a.coin_results()
        assert confirm_readings(b, A) == confirm_readings(a, A)
        assert b.verdict == a.verdict


def test_apply_manipulation_ownership():
    circuit, state = prepare("two-party-witness")
    tr = Transcript(Design.TWO_PARTY_WITNESS, 2, 0, (0, 1), ("honest", "honest"))
    game = GameState(circuit.layout, state, tr, rng_chooser(np.random.default_rng(0)))
    with pytest.raises(TargetNotOwnedError):
        apply_manipulation(game, A, X, qubit=4)  # a witness qubit
    with pytest.raises(TargetNotOwnedError):
        apply_manipulation(game, A, X, qubit=3)  # B's confirmation qubit
    apply_manipulation(game, A, np.eye(2))
    assert np.allclose(game.state.amplitudes, state.amplitudes)


def test_witness_marginals_immune_to_local_unitaries():
    rng = np.random.default_rng(17)
    for _ in range(10):
        u = random_unitary(rng)
        for i, j in itertools.product(range(2), repeat=2):
            after = partial_flip_state("two-party-witness", None, [(A, i), (B, j)])
            tampered = apply_gate(after, single_qubit_unitary(u, 1))
            for w in (4, 5):
                assert marginal_probability(tampered, w) == marginal_probability(after, w)


def test_witness_record_distribution_under_manipulation():
    rng = np.random.default_rng(18)
    key = lambda tr: tuple(b for _, b in confirm_readings(tr, "W"))  # noqa: E731
    base = outcome_distribution(enumerate_games("two-party-witness"), key)
    for _ in range(5):
        br = enumerate_games("two-party-witness", behaviors={A: unitary_manipulator(random_unitary(rng))})
        d = outcome_distribution(br, key)
        assert d.keys() == base.keys()
        for k in d:
            assert d[k] == pytest.approx(base[k], abs=1e-12)


def test_p2p_liar_rejected():
    for seed in range(30):
        tr = run_game("p2p", num_players=3, seed=seed, behaviors={2: classical_liar()})
        assert tr.verdict.kind == "rejected" and tr.verdict.rejected == (2,)


def test_colluders_cannot_fool_full_review():
    # two of three collude; the honest third contradicts both lies
    for seed in range(30):
        behaviors = {0: colluder({1}), 1: colluder({0})}
        tr = run_game("p2p", num_players=3, seed=seed, behaviors=behaviors)
        assert set(tr.verdict.rejected) == {0, 1}


def test_hybrid_liar_keeps_honest_verdicts():
    for mode in ("witness-primary", "p2p-primary"):
        honest = outcome_distribution(enumerate_games("hybrid", num_players=3, mode=mode), lambda tr: tr.verdict)
        lied = outcome_distribution(
            enumerate_games("hybrid", num_players=3, behaviors={1: classical_liar("heads")}, mode=mode),
            lambda tr: tr.verdict,
        )
        assert lied.keys() == honest.keys()
        for k in honest:
            assert lied[k] == pytest.approx(honest[k], abs=1e-12)


def test_hybrid_witness_verdict_precedes_peer_verdict():
    for seed in range(20):
        tr = run_game("hybrid", num_players=3, seed=seed)
        assert tr.event_time("witness-verdict") <= tr.event_time("p2p-verdict")


def test_classical_design_trusts_announcements():
    tr = run_game("classical", seed=1, behaviors={B: classical_liar("heads")})
    assert tr.announcements[B] == 0
    assert tr.results == (tr.announcements[A], 0)


# --- partial flips --------------------------------------------------------------


def test_partial_flip_central_first_player():
    coin = random_coin(np.random.default_rng(4), 3)
    for i1 in range(2):
        s = partial_flip_state("central", coin, [(0, i1)])
        t = s.tensor()
        expected = np.zeros((2,) * 6, dtype=complex)
        for j2, j3 in itertools.product(range(2), repeat=2):
            expected[i1, j2, j3, i1, j2, j3] = coin.coeffs[i1, j2, j3]
        expected /= np.linalg.norm(expected)
        assert np.allclose(t, expected, atol=1e-10)


def test_partial_flip_all_players_fixes_witness():
    for bits in itertools.product(range(2), repeat=3):
        s = partial_flip_state("central", None, list(enumerate(bits)), num_players=3)
        for p, b in enumerate(bits):
            assert marginal_probability(s, 3 + p)[b] == 1.0


def test_partial_flip_nothing_is_prepared_state():
    _, state = prepare("p2p", None, 3)
    assert np.array_equal(partial_flip_state("p2p", None, [], num_players=3).amplitudes, state.amplitudes)
    with pytest.raises(GameConfigError):
        partial_flip_state("p2p", None, [(0, 0), (0, 1)], num_players=3)


# --- transcripts ------------------------------------------------------------------


@pytest.mark.parametrize("design,n", [("two-party", 2), ("hybrid", 3), ("p2p", 3)])
def test_transcript_round_trip_and_determinism(design, n):
    a = run_game(design, num_players=n, seed=7, behaviors={1: classical_liar()})
    b = run_game(design, num_players=n, seed=7, behaviors={1: classical_liar()})
    assert a.to_json() == b.to_json()
    back = Transcript.from_json(a.to_json())
    assert back.to_json() == a.to_json()
    assert back.verdict == a.verdict


def test_transcript_schema_fields():
    d = run_game("two-party", seed=0).to_dict()
    for k in ("schema", "design", "seed", "events", "announcements", "verdict"):
        assert k in d
    with pytest.raises(ValueError):
        Transcript.from_dict({**d, "schema": "other/0"})


def test_bad_configuration():
    with pytest.raises(GameConfigError):
        run_game("two-party", order=(0, 0))
    with pytest.raises(GameConfigError):
        run_game("p2p", uniform_coin(3), num_players=4)
    with pytest.raises(GameConfigError):
        classical_liar("sometimes")
    with pytest.raises(GameConfigError):
        unitary_manipulator(np.array([[1, 1], [0, 1]]))


# --- properties -------------------------------------------------------------


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([("central", 3), ("p2p", 3), ("ring", 3), ("hybrid", 2)]))
def test_marginals_unaffected_by_others(seed, case):
    design, n = case
    rng = np.random.default_rng(seed)
    coin = random_coin(rng, n)
    order = tuple(rng.permutation(n))
    last = order[-1]
    dist = outcome_distribution(enumerate_games(design, coin, order), lambda tr: tr.coin_results()[last])
    expected = player_marginal(coin, last)
    for bit in range(2):
        assert dist.get(bit, 0.0) == pytest.approx(expected[bit], abs=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 1), st.integers(0, 10_000))
def test_fair_coins_keep_confirmations_exact(a, seed):
    coin = fair_coin(FairCoinParams(a, (0.3, 0.1, 2.0, 1.0)))
    tr = run_game("two-party-witness", coin, seed=seed)
    assert tr.confirmation_mismatches() == 0
