"""Simulated entangled coin-flipping games with confirmation qubits, witnesses and peer review."""

from .circuits import Circuit, Design, GameLayout, build, circuit_depth, closed_form_state, resource_report
from .coins import CoinSpec, FairCoinParams, fair_coin, is_fair, is_fair_n, uniform_coin
from .consensus import ConsensusMode, ReviewReport, agreement_ratio, disagreement_ratio, hybrid_decide
from .harness import ExperimentConfig, Schedule, run_batch, run_classical_baseline
from .protocol import PlayerBehavior, Transcript, enumerate_games, outcome_distribution, run_game
from .qstate import StateVector, apply_gate, measure_qubit, new_zero_state, prepare_from_amplitudes

__version__ = "0.1.0"

__all__ = [
    "Circuit", "Design", "GameLayout", "build", "circuit_depth", "closed_form_state", "resource_report",
    "CoinSpec", "FairCoinParams", "fair_coin", "is_fair", "is_fair_n", "uniform_coin",
    "ConsensusMode", "ReviewReport", "agreement_ratio", "disagreement_ratio", "hybrid_decide",
    "ExperimentConfig", "Schedule", "run_batch", "run_classical_baseline",
    "PlayerBehavior", "Transcript", "enumerate_games", "outcome_distribution", "run_game",
    "StateVector", "apply_gate", "measure_qubit", "new_zero_state", "prepare_from_amplitudes",
]
