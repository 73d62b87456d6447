"""Coin coefficient tensors and fairness predicates.

Heads is bit 0 (spin up), tails is bit 1 (spin down). A coin for N players
is a complex tensor of shape ``(2,) * N``; entry ``c[i_1, ..., i_N]`` is
the amplitude of the joint flip outcome.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

DEFAULT_TOL = 1e-9
NORM_TOL = 1e-10
HEADS, TAILS = 0, 1


class CoinError(ValueError):
    pass


class ArityError(CoinError):
    pass


@dataclass(frozen=True, eq=False)
class CoinSpec:
    num_players: int
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.num_players < 2:
            raise CoinError("a coin needs at least two players")
        c = np.array(self.coeffs, dtype=complex).reshape((2,) * self.num_players)
        norm_sq = float(np.sum(np.abs(c) ** 2))
        if abs(norm_sq - 1.0) > NORM_TOL:
            raise CoinError(f"coin coefficients have squared norm {norm_sq}, expected 1")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    def flat(self) -> np.ndarray:
        """Amplitudes in big-endian order of (i_1, ..., i_N)."""
        return self.coeffs.reshape(-1)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.coeffs) ** 2

    def key(self) -> tuple:
        return (self.num_players, self.coeffs.tobytes())

    def __eq__(self, other):
        return isinstance(other, CoinSpec) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())


@dataclass(frozen=True)
class FairCoinParams:
    a: float = 0.5
    phases: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        if not 0.0 <= self.a <= 1.0:
            raise CoinError(f"a must lie in [0, 1], got {self.a}")
        if len(self.phases) != 4:
            raise CoinError("need four phases (uu, ud, du, dd)")


def fair_coin(params: FairCoinParams) -> CoinSpec:
    a = params.a
    mags = np.array([[np.sqrt(a / 2), np.sqrt((1 - a) / 2)], [np.sqrt((1 - a) / 2), np.sqrt(a / 2)]])
    phases = np.exp(1j * np.asarray(params.phases, dtype=float)).reshape(2, 2)
    return CoinSpec(2, mags * phases)


def uniform_coin(num_players: int) -> CoinSpec:
    if num_players < 2:
        raise CoinError("a coin needs at least two players")
    return CoinSpec(num_players, np.full((2,) * num_players, 2.0 ** (-num_players / 2), dtype=complex))


def player_marginal(coin: CoinSpec, player: int) -> tuple[float, float]:
    if not 0 <= player < coin.num_players:
        raise IndexError(f"player {player} out of range for {coin.num_players} players")
    probs = np.moveaxis(coin.probabilities(), player, 0).reshape(2, -1).sum(axis=1)
    total = probs.sum()
    return float(probs[0] / total), float(probs[1] / total)


def _require_two(coin: CoinSpec):
    if coin.num_players != 2:
        raise ArityError(f"defined for two players only, got {coin.num_players}")


def is_symmetric(coin: CoinSpec, tol: float = DEFAULT_TOL) -> bool:
    """Both players see the same heads/tails odds: |c_ud| == |c_du|."""
    _require_two(coin)
    m = np.abs(coin.coeffs)
    return bool(abs(m[0, 1] - m[1, 0]) <= tol)


def is_fair(coin: CoinSpec, tol: float = DEFAULT_TOL) -> bool:
    _require_two(coin)
    m = np.abs(coin.coeffs)
    return is_symmetric(coin, tol) and bool(abs(m[0, 0] - m[1, 1]) <= tol)


def is_fair_n(coin: CoinSpec, tol: float = DEFAULT_TOL) -> bool:
    """N-party fairness: every player's heads marginal is 1/2."""
    return all(abs(player_marginal(coin, k)[0] - 0.5) <= tol for k in range(coin.num_players))


def coin_from_entries(num_players: int, entries) -> CoinSpec:
    """Build a coin from ``(bitstring, real, imag)`` triples; missing entries are 0."""
    c = np.zeros((2,) * num_players, dtype=complex)
    for bits, re, im in entries:
        bits = str(bits)
        if len(bits) != num_players or set(bits) - {"0", "1"}:
            raise CoinError(f"bad bitstring {bits!r} for {num_players} players")
        c[tuple(int(b) for b in bits)] = complex(float(re), float(im))
    return CoinSpec(num_players, c)


def coin_to_entries(coin: CoinSpec) -> list[list]:
    out = []
    for idx in np.ndindex(*coin.coeffs.shape):
        v = coin.coeffs[idx]
        if v != 0:
            out.append(["".join(map(str, idx)), float(v.real), float(v.imag)])
    return out


def coin_from_mapping(data: dict, num_players: int | None = None) -> CoinSpec:
    """Coin from a parsed config section.

    Accepts either ``entries`` (bitstring/real/imag triples, with
    ``players``), fair-coin parameters ``a``/``phases``, or ``uniform = true``.
    """
    n = int(data.get("players", num_players or 2))
    if "entries" in data:
        return coin_from_entries(n, data["entries"])
    if "a" in data or "phases" in data:
        if n != 2:
            raise CoinError("fair-coin parameters describe a two-player coin")
        return fair_coin(FairCoinParams(float(data.get("a", 0.5)), tuple(data.get("phases", (0, 0, 0, 0)))))
    return uniform_coin(n)


def load_coin(path: str | Path, num_players: int | None = None) -> CoinSpec:
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        data = json.loads(text)
    else:
        data = tomllib.loads(text)
    data = data.get("coin", data)
    return coin_from_mapping(data, num_players)
