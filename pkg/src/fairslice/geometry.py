"""Exact interval and piece arithmetic on the unit segment.

Coordinates are ``fractions.Fraction`` throughout, so widths, unions and
comparisons are exact.  A *piece* is a finite union of disjoint closed
subintervals of [0, 1], kept in a canonical form: sorted, non-empty,
with touching neighbours merged.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence, Union

Scalar = Fraction
ScalarLike = Union[Fraction, int, str, float]

ZERO = Fraction(0)
ONE = Fraction(1)


def as_scalar(value: ScalarLike) -> Fraction:
    """Coerce a value to an exact rational.

    Strings use the ``"p/q"`` form (``Fraction`` accepts plain integers
    too).  Floats convert exactly via their binary expansion, which is the
    caller's responsibility to want.

    >>> as_scalar("3/4")
    Fraction(3, 4)
    """
    if isinstance(value, Fraction):
        return value
    return Fraction(value)


def scalar_str(value: Fraction) -> str:
    """Serialize a rational as ``"p/q"`` in lowest terms, or ``"p"`` when
    the denominator is 1 (matching the JSON wire format)."""
    return str(Fraction(value))


@dataclass(frozen=True, order=True)
class Interval:
    """A closed subinterval of [0, 1]; empty iff ``left == right``."""

    left: Fraction
    right: Fraction

    def __post_init__(self):
        if not (ZERO <= self.left <= self.right <= ONE):
            raise ValueError(
                f"invalid interval [{self.left}, {self.right}]: "
                "need 0 <= left <= right <= 1"
            )

    @property
    def width(self) -> Fraction:
        return self.right - self.left

    def __repr__(self) -> str:
        return f"Interval({self.left}, {self.right})"


def interval(left: ScalarLike, right: ScalarLike) -> Interval:
    """Shorthand constructor accepting any rational-like endpoints."""
    return Interval(as_scalar(left), as_scalar(right))


@dataclass(frozen=True)
class Piece:
    """A finite union of disjoint intervals in canonical form.

    Construct via :func:`normalize_piece` (or :meth:`Piece.of`) unless the
    intervals are already sorted, non-empty and non-touching.
    """

    intervals: tuple[Interval, ...] = ()

    def __post_init__(self):
        prev = None
        for iv in self.intervals:
            if iv.width == 0:
                raise ValueError("canonical pieces contain no empty intervals")
            if prev is not None and iv.left <= prev.right:
                raise ValueError(
                    "canonical pieces are sorted with strict gaps; "
                    f"got [{prev.left}, {prev.right}] then [{iv.left}, {iv.right}]"
                )
            prev = iv

    @classmethod
    def of(cls, *endpoints: tuple[ScalarLike, ScalarLike]) -> "Piece":
        """Build a normalized piece from (left, right) pairs.

        >>> Piece.of(("1/2", "3/4"), (0, "1/4")).intervals
        (Interval(0, 1/4), Interval(1/2, 3/4))
        """
        return normalize_piece(interval(a, b) for a, b in endpoints)

    @property
    def width(self) -> Fraction:
        return sum((iv.width for iv in self.intervals), ZERO)

    def is_empty(self) -> bool:
        return not self.intervals

    def to_pairs(self) -> list[list[str]]:
        """JSON form: a list of ["left", "right"] rational strings."""
        return [[scalar_str(iv.left), scalar_str(iv.right)] for iv in self.intervals]

    @classmethod
    def from_pairs(cls, pairs: Sequence[Sequence[ScalarLike]]) -> "Piece":
        return normalize_piece(interval(a, b) for a, b in pairs)

    def __repr__(self) -> str:
        body = ", ".join(f"[{iv.left}, {iv.right}]" for iv in self.intervals)
        return f"Piece({body})"


EMPTY_PIECE = Piece(())


def normalize_piece(raw: Iterable[Interval]) -> Piece:
    """Canonicalize a collection of intervals.

    Sorts by left endpoint, drops empty intervals, and merges overlapping
    or touching neighbours, so equal point sets compare equal.  Idempotent.
    """
    items = sorted((iv for iv in raw if iv.width > 0), key=lambda iv: (iv.left, iv.right))
    merged: list[Interval] = []
    for iv in items:
        if merged and iv.left <= merged[-1].right:
            if iv.right > merged[-1].right:
                merged[-1] = Interval(merged[-1].left, iv.right)
        else:
            merged.append(iv)
    return Piece(tuple(merged))


def piece_width(piece: Piece) -> Fraction:
    """Total width of a piece (0 for the empty piece)."""
    return piece.width


def piece_union(*pieces: Piece) -> Piece:
    """Union of pieces, normalized."""
    return normalize_piece(iv for p in pieces for iv in p.intervals)
