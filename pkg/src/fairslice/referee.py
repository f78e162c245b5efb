"""Query accounting for the eval/cut model.

Every protocol-to-valuation interaction goes through a :class:`QueryReferee`,
which counts queries per player, appends an ordered log record for each one,
and optionally enforces a total budget.  Complexity claims in tests and
reports always come from referee counters, never from protocol self-reports.

Counting rules:

* a ``cut`` that declares "no answer" still costs one query;
* repeated identical queries are re-counted (no memoization);
* a query that would exceed the budget is rejected *before* it reaches the
  valuation, so the log never exceeds the budget.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import IO, Optional, Sequence

from .errors import BudgetExhausted
from .geometry import ScalarLike
from .valuation import Real, Valuation, encode_real


@dataclass(frozen=True)
class QueryRecord:
    """One logged query; ``answer`` is ``None`` for a cut with no answer."""

    kind: str  # "eval" | "cut"
    player: int
    args: tuple
    answer: object

    def to_json_obj(self) -> dict:
        return {
            "kind": self.kind,
            "player": self.player,
            "args": [encode_real(a) for a in self.args],
            "answer": encode_real(self.answer),
        }


class PlayerView:
    """A single player's valuation as seen through the referee.

    Implements the eval/cut interface, so anything expecting a valuation
    (e.g. a dual wrapper) can be metered transparently.
    """

    __slots__ = ("_referee", "player")

    def __init__(self, referee: "QueryReferee", player: int):
        self._referee = referee
        self.player = player

    def eval(self, x: ScalarLike, y: ScalarLike) -> Real:
        return self._referee.eval(self.player, x, y)

    def cut(self, x: ScalarLike, r: Real) -> Optional[Real]:
        return self._referee.cut(self.player, x, r)

    @property
    def is_positive(self) -> bool:
        # Introspection, not a query: positivity is part of the instance
        # setup, not something a protocol learns through the oracle.
        return self._referee.valuation(self.player).is_positive


class QueryReferee:
    """Counts, logs and budgets every query against a set of valuations."""

    def __init__(self, valuations: Sequence[Valuation], budget: Optional[int] = None):
        if not valuations:
            raise ValueError("referee needs at least one valuation")
        if budget is not None and budget < 0:
            raise ValueError("budget must be non-negative")
        self._valuations = tuple(valuations)
        self.budget = budget
        self.counts = [0] * len(self._valuations)
        self.log: list[QueryRecord] = []

    @property
    def n_players(self) -> int:
        return len(self._valuations)

    @property
    def total(self) -> int:
        return len(self.log)

    def valuation(self, player: int) -> Valuation:
        return self._valuations[player]

    def view(self, player: int) -> PlayerView:
        self._check_player(player)
        return PlayerView(self, player)

    def _check_player(self, player: int) -> None:
        if not (0 <= player < len(self._valuations)):
            raise IndexError(f"player {player} out of range 0..{len(self._valuations) - 1}")

    def _admit(self) -> None:
        if self.budget is not None and self.total + 1 > self.budget:
            raise BudgetExhausted(
                f"query budget of {self.budget} exhausted after {self.total} queries"
            )

    def eval(self, player: int, x: ScalarLike, y: ScalarLike) -> Real:
        self._check_player(player)
        self._admit()
        answer = self._valuations[player].eval(x, y)
        self.counts[player] += 1
        self.log.append(QueryRecord("eval", player, (x, y), answer))
        return answer

    def cut(self, player: int, x: ScalarLike, r: Real) -> Optional[Real]:
        self._check_player(player)
        self._admit()
        answer = self._valuations[player].cut(x, r)
        self.counts[player] += 1
        self.log.append(QueryRecord("cut", player, (x, r), answer))
        return answer

    def log_lines(self) -> list[str]:
        """The query log as JSON-lines, one record per query in wall order."""
        return [json.dumps(rec.to_json_obj(), separators=(",", ":")) for rec in self.log]

    def export_log(self, fp: IO[str]) -> None:
        for line in self.log_lines():
            fp.write(line + "\n")


def replay_log(records: Sequence[QueryRecord], valuations: Sequence[Valuation]) -> bool:
    """Re-issue a logged query sequence and demand identical answers.

    Exact equality: replay is meaningful for deterministic valuations only.
    Returns True, or raises AssertionError naming the first divergence.
    """
    for i, rec in enumerate(records):
        val = valuations[rec.player]
        if rec.kind == "eval":
            answer = val.eval(*rec.args)
        elif rec.kind == "cut":
            answer = val.cut(*rec.args)
        else:
            raise ValueError(f"record {i}: unknown kind {rec.kind!r}")
        if answer != rec.answer:
            raise AssertionError(
                f"record {i} ({rec.kind} {rec.args}): logged {rec.answer!r}, replayed {answer!r}"
            )
    return True
