"""Proportional division protocols and allocation checkers.

All protocols interact with player valuations only through a
:class:`~fairslice.referee.QueryReferee`; the checkers, by contrast, read
valuations directly (verification is free in the query model).

``mode`` selects the objective:

* ``"cake"`` -- the resource is desirable; proportional means every player
  values their own piece at >= 1/n.
* ``"chore"`` -- the resource is a cost; proportional means <= 1/n.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .errors import PartitionViolation
from .geometry import ONE, ZERO, Interval, Piece, as_scalar, normalize_piece
from .referee import QueryReferee
from .valuation import Real, Valuation, encode_real

MODES = ("cake", "chore")


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")


@dataclass(frozen=True)
class Allocation:
    """One piece per player; a valid allocation partitions [0, 1]."""

    pieces: tuple[Piece, ...]

    @property
    def n(self) -> int:
        return len(self.pieces)

    def to_json(self) -> dict:
        return {"pieces": [piece.to_pairs() for piece in self.pieces]}

    @classmethod
    def from_json(cls, obj: dict) -> "Allocation":
        return cls(tuple(Piece.from_pairs(pairs) for pairs in obj["pieces"]))


def verify_partition(allocation: Allocation) -> None:
    """Raise :class:`PartitionViolation` unless the pieces tile [0, 1].

    Pieces must be pairwise disjoint (shared endpoints are fine) and cover
    the whole segment; the error lists every overlap and gap found.
    """
    marked = sorted(
        (iv.left, iv.right, player)
        for player, piece in enumerate(allocation.pieces)
        for iv in piece.intervals
    )
    overlaps = []
    gaps = []
    cursor = ZERO
    prev_player = None
    for left, right, player in marked:
        if left > cursor:
            gaps.append((cursor, left))
        elif left < cursor:
            overlaps.append((left, min(right, cursor), prev_player, player))
        cursor = max(cursor, right)
        prev_player = player
    if cursor < ONE:
        gaps.append((cursor, ONE))
    if overlaps or gaps:
        raise PartitionViolation(
            f"not a partition of [0,1]: {len(overlaps)} overlap(s), {len(gaps)} gap(s)",
            overlaps=overlaps,
            gaps=gaps,
        )


@dataclass(frozen=True)
class PlayerShare:
    player: int
    value: Real
    bound: Fraction
    ok: bool


@dataclass(frozen=True)
class ProportionalityReport:
    mode: str
    ok: bool
    shares: tuple[PlayerShare, ...]

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "proportional": self.ok,
            "shares": [
                {
                    "player": s.player,
                    "value": encode_real(s.value),
                    "bound": encode_real(s.bound),
                    "ok": s.ok,
                }
                for s in self.shares
            ],
        }


def check_proportional(
    allocation: Allocation,
    valuations: Sequence[Valuation],
    mode: str,
    tol: Real = 0,
) -> ProportionalityReport:
    """Exact per-player proportionality check (partition checked first).

    ``tol`` loosens the comparison for float-valued valuations; rational
    valuations should be checked with the default ``tol=0``.
    """
    _check_mode(mode)
    if len(valuations) != allocation.n:
        raise ValueError("one valuation per piece required")
    verify_partition(allocation)
    n = allocation.n
    bound = Fraction(1, n)
    shares = []
    for player, piece in enumerate(allocation.pieces):
        value = valuations[player].value_of_piece(piece)
        if mode == "chore":
            ok = value <= bound + tol
        else:
            ok = value + tol >= bound
        shares.append(PlayerShare(player, value, bound, ok))
    return ProportionalityReport(mode, all(s.ok for s in shares), tuple(shares))


def count_light_pieces(allocation: Allocation, valuations: Sequence[Valuation]) -> int:
    """Number of players whose piece is light for them.

    A piece is light when its width is at least 1/(2n) and its value to the
    owner is at most 1/n.  Comparisons are exact for rational valuations.
    """
    n = allocation.n
    count = 0
    for player, piece in enumerate(allocation.pieces):
        if piece.width >= Fraction(1, 2 * n) and valuations[player].value_of_piece(piece) <= Fraction(1, n):
            count += 1
    return count


def count_narrow_pieces(allocation: Allocation) -> int:
    """Number of pieces strictly narrower than 1/(2n)."""
    n = allocation.n
    return sum(1 for piece in allocation.pieces if piece.width < Fraction(1, 2 * n))


def _single(a: Fraction, b: Fraction) -> Piece:
    return normalize_piece([Interval(a, b)])


def cut_and_choose(referee: QueryReferee, mode: str) -> Allocation:
    """Two players: player 0 bisects by own value, player 1 picks a side.

    Costs exactly two queries (one cut, one eval).  Player 1 takes the
    weakly better side: the larger in cake mode, the smaller in chore mode.
    """
    _check_mode(mode)
    if referee.n_players != 2:
        raise ValueError("cut and choose is a two-player protocol")
    half = Fraction(1, 2)
    m = referee.cut(0, ZERO, half)
    assert m is not None, "a normalized valuation always has a half-value point"
    m = as_scalar(m)
    left_value = referee.eval(1, ZERO, m)
    if mode == "cake":
        chooser_takes_left = left_value >= half
    else:
        chooser_takes_left = left_value <= half
    left, right = _single(ZERO, m), _single(m, ONE)
    if chooser_takes_left:
        return Allocation((right, left))
    return Allocation((left, right))


def even_paz(referee: QueryReferee, mode: str) -> Allocation:
    """Divide-and-conquer proportional protocol, cake and chore variants.

    Each active player marks the point splitting off a (k/n)-fraction of
    their value of the current block (k = floor(n/2)); the block is split at
    the k-th mark and the two groups recurse.  In cake mode the k players
    with the smallest marks take the left block (their value of it is
    already >= k/n of the block); in chore mode the k players with the
    *largest* marks take the left block, with the split at the smallest of
    their marks, so each of them bears at most k/n of the block's cost.
    Ties are broken toward lower player indices.

    Every player's value of the current block is threaded through the
    recursion (one eval on entering a block of two or more players), so the
    total query count is at most 2 * n * ceil(log2 n).
    """
    _check_mode(mode)
    n = referee.n_players
    pieces: list[Piece] = [Piece()] * n
    values = {player: ONE for player in range(n)}  # eval(0,1)=1: no query needed

    def divide(players: list[int], a: Fraction, b: Fraction, values: dict[int, Fraction]) -> None:
        if len(players) == 1:
            pieces[players[0]] = _single(a, b)
            return
        size = len(players)
        k = size // 2
        marks = {}
        for player in players:
            target = values[player] * k / size
            mark = referee.cut(player, a, target)
            assert mark is not None, "mark target never exceeds the block value"
            marks[player] = as_scalar(mark)
        if mode == "cake":
            ordered = sorted(players, key=lambda p: (marks[p], p))
        else:
            ordered = sorted(players, key=lambda p: (-marks[p], p))
        left_group, right_group = ordered[:k], ordered[k:]
        x = marks[left_group[-1]]  # k-th smallest mark (cake) / k-th largest (chore)
        left_values = {}
        if len(left_group) > 1:
            for player in left_group:
                left_values[player] = as_scalar(referee.eval(player, a, x))
        right_values = {}
        if len(right_group) > 1:
            for player in right_group:
                right_values[player] = as_scalar(referee.eval(player, x, b))
        divide(left_group, a, x, left_values)
        divide(right_group, x, b, right_values)

    divide(list(range(n)), ZERO, ONE, values)
    return Allocation(tuple(pieces))


def last_diminisher(referee: QueryReferee, mode: str = "cake") -> Allocation:
    """Quadratic-query proportional cake protocol; the n log n foil.

    Round by round, the lowest-index active player slices a prospective
    piece worth exactly 1/n to them off the remaining cake; every other
    active player trims it back to their own 1/n-value point whenever they
    consider it worth more.  The last player to touch the piece takes it.
    """
    if mode != "cake":
        raise ValueError("last diminisher is implemented for cake mode only")
    n = referee.n_players
    share = Fraction(1, n)
    pieces: list[Piece] = [Piece()] * n
    active = list(range(n))
    start = ZERO
    while len(active) > 1:
        holder = active[0]
        edge = referee.cut(holder, start, share)
        assert edge is not None, "every remaining player values the rest at >= 1/n"
        edge = as_scalar(edge)
        for player in active[1:]:
            if referee.eval(player, start, edge) > share:
                trimmed = referee.cut(player, start, share)
                assert trimmed is not None
                edge = as_scalar(trimmed)
                holder = player
        pieces[holder] = _single(start, edge)
        active.remove(holder)
        start = edge
    pieces[active[0]] = _single(start, ONE)
    return Allocation(tuple(pieces))


PROTOCOLS = {
    "cut-and-choose": cut_and_choose,
    "even-paz": even_paz,
    "last-diminisher": last_diminisher,
}
