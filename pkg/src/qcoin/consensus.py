"""Peer review aggregation and the witness/peer-review decision modes."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping


class ConsensusError(ValueError):
    pass


class IncompleteReportError(ConsensusError):
    pass


class UnresolvedError(ConsensusError):
    pass


class ConsensusMode(str, Enum):
    WITNESS_PRIMARY = "witness-primary"
    P2P_PRIMARY = "p2p-primary"


@dataclass(frozen=True)
class ReviewReport:
    """Peer review data for one game.

    ``reviews[n][j]`` is player n's result as reported by reviewer j
    (``None`` if j was due to review n but has not measured yet). Players
    never review themselves. ``thresholds`` is ``(r, R)``; only ``r``
    decides acceptance, ``R`` is carried for the record.
    """

    num_players: int
    self_results: tuple[int | None, ...]
    reviews: Mapping[int, Mapping[int, int | None]] = field(default_factory=dict)
    thresholds: tuple[float, float] = (1.0, 0.0)

    def __post_init__(self):
        r, big_r = self.thresholds
        if not (0.0 <= r <= 1.0 and 0.0 <= big_r <= 1.0):
            raise ConsensusError(f"thresholds must lie in [0, 1], got {self.thresholds}")
        for n, row in self.reviews.items():
            if n in row:
                raise ConsensusError(f"player {n} cannot review themselves")

    def with_thresholds(self, r: float, big_r: float | None = None) -> "ReviewReport":
        return ReviewReport(
            self.num_players,
            self.self_results,
            self.reviews,
            (r, self.thresholds[1] if big_r is None else big_r),
        )

    def to_dict(self) -> dict:
        return {
            "players": self.num_players,
            "self_results": list(self.self_results),
            "reviews": {
                str(n): {str(j): b for j, b in sorted(row.items())}
                for n, row in sorted(self.reviews.items())
            },
            "thresholds": list(self.thresholds),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ReviewReport":
        return cls(
            int(data["players"]),
            tuple(data["self_results"]),
            {int(n): {int(j): b for j, b in row.items()} for n, row in data["reviews"].items()},
            tuple(data.get("thresholds", (1.0, 0.0))),
        )


def _counts(report: ReviewReport, n: int) -> tuple[int, int]:
    row = report.reviews.get(n)
    mine = report.self_results[n] if n < len(report.self_results) else None
    if not row or mine is None or any(b is None for b in row.values()):
        raise IncompleteReportError(f"review data for player {n} is incomplete")
    agree = sum(1 for b in row.values() if b == mine)
    return agree, len(row) - agree


def agreement_ratio(report: ReviewReport, n: int) -> float:
    agree, disagree = _counts(report, n)
    return agree / (agree + disagree)


def disagreement_ratio(report: ReviewReport, n: int) -> float:
    agree, disagree = _counts(report, n)
    return disagree / (agree + disagree)


def accept_result(report: ReviewReport, n: int) -> bool:
    return agreement_ratio(report, n) >= report.thresholds[0]


def unanimous_review(report: ReviewReport, n: int) -> int | None:
    """The bit every reviewer of n reported, or None if they differ."""
    row = report.reviews.get(n) or {}
    bits = set(row.values())
    if len(bits) == 1 and None not in bits:
        return bits.pop()
    return None


def review_summary(report: ReviewReport) -> list[dict]:
    rows = []
    for n in range(report.num_players):
        try:
            r_n = agreement_ratio(report, n)
            big_r = disagreement_ratio(report, n)
            ok = r_n >= report.thresholds[0]
        except IncompleteReportError:
            r_n = big_r = None
            ok = None
        rows.append({"player": n, "r": r_n, "R": big_r, "accepted": ok})
    return rows


def build_report(
    num_players: int,
    announcements: Mapping[int, int],
    claims: Mapping[int, Mapping[int, int | None]],
    thresholds: tuple[float, float] = (1.0, 0.0),
) -> ReviewReport:
    """Assemble a report from announced results and reviewers' claims.

    ``claims[j][n]`` is what reviewer j says player n got.
    """
    reviews: dict[int, dict[int, int | None]] = {n: {} for n in range(num_players)}
    for j, row in claims.items():
        for n, bit in row.items():
            reviews[n][j] = bit
    self_results = tuple(announcements.get(n) for n in range(num_players))
    return ReviewReport(num_players, self_results, reviews, thresholds)


def hybrid_decide(
    mode: ConsensusMode | str,
    witness_bits,
    p2p_report: ReviewReport,
    appeal: Iterable[int] = (),
) -> tuple[tuple[int, ...], tuple[str, ...]]:
    """Combine witness readings and peer review into one result per player.

    Witness-primary: start from the witness; an appealing player is
    switched to the peer verdict only when every reviewer agrees on a bit
    that contradicts the witness.

    P2P-primary: start from peer review (the announced bit if accepted,
    otherwise a unanimous reviewer bit); appealing players take the
    witness bit instead. A non-appealing player with neither is unresolved.

    Returns ``(results, provenance)``; provenance is one of ``"witness"``,
    ``"p2p"``, ``"p2p-appeal"``, ``"witness-appeal"`` per player.
    """
    mode = ConsensusMode(mode)
    appeal = set(appeal)
    witness_bits = tuple(int(b) for b in witness_bits)
    n_players = p2p_report.num_players
    if len(witness_bits) != n_players:
        raise ConsensusError("witness vector length does not match the report")
    results, source = [], []
    for n in range(n_players):
        unanimous = unanimous_review(p2p_report, n)
        if mode is ConsensusMode.WITNESS_PRIMARY:
            if n in appeal and unanimous is not None and unanimous != witness_bits[n]:
                results.append(unanimous)
                source.append("p2p-appeal")
            else:
                results.append(witness_bits[n])
                source.append("witness")
            continue
        if n in appeal:
            results.append(witness_bits[n])
            source.append("witness-appeal")
            continue
        try:
            accepted = accept_result(p2p_report, n)
        except IncompleteReportError:
            accepted = False
        if accepted:
            results.append(int(p2p_report.self_results[n]))
        elif unanimous is not None:
            results.append(unanimous)
        else:
            raise UnresolvedError(
                f"player {n} has no accepted peer result and did not appeal to the witness"
            )
        source.append("p2p")
    return tuple(results), tuple(source)
