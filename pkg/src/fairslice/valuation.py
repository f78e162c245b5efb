"""Valuation functions over [0, 1] and the exact piecewise-constant family.

A valuation is non-negative, additive, divisible and normalized
(``eval(0, 1) == 1``).  Protocols interact with valuations through two
query types only:

* ``eval(x, y)`` -- the value of the interval [x, y];
* ``cut(x, r)`` -- the smallest ``y`` with ``eval(x, y) == r``, or ``None``
  when no such point exists (the mass remaining after ``x`` is below ``r``).

``PiecewiseConstantValuation`` answers both queries in exact rational
arithmetic.  Tree-backed valuations (see ``valuetree``) answer in floats.
"""

from __future__ import annotations

import random
from abc import ABC, abstractmethod
from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Union

from .geometry import ONE, ZERO, Piece, ScalarLike, as_scalar, scalar_str

Real = Union[Fraction, float]


def encode_real(value) -> object:
    """JSON encoding for query answers: rationals as "p/q" strings, floats
    as numbers, and None (no answer) as null."""
    if value is None:
        return None
    if isinstance(value, Fraction):
        return scalar_str(value)
    if isinstance(value, int):
        return scalar_str(Fraction(value))
    return float(value)


class Valuation(ABC):
    """Abstract eval/cut interface."""

    @abstractmethod
    def eval(self, x: ScalarLike, y: ScalarLike) -> Real:
        """Value of [x, y]; requires 0 <= x <= y <= 1."""

    @abstractmethod
    def cut(self, x: ScalarLike, r: Real) -> Optional[Real]:
        """Smallest y with eval(x, y) == r, or None if eval(x, 1) < r."""

    @property
    def is_positive(self) -> bool:
        """True when every non-empty subinterval has positive value."""
        return False

    def value_of_piece(self, piece: Piece) -> Real:
        total: Real = ZERO
        for iv in piece.intervals:
            total = total + self.eval(iv.left, iv.right)
        return total


def density_of_piece(valuation: Valuation, piece: Piece) -> Real:
    """Value-per-width of a non-empty piece."""
    width = piece.width
    if width == 0:
        raise ValueError("density of a zero-width piece is undefined")
    return valuation.value_of_piece(piece) / width


@dataclass(frozen=True)
class DensityBounds:
    """An admissible density band [alpha, beta]; ``beta=None`` means +inf."""

    alpha: Fraction
    beta: Optional[Fraction]

    def __post_init__(self):
        alpha = as_scalar(self.alpha)
        beta = None if self.beta is None else as_scalar(self.beta)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        if not (ZERO <= alpha <= ONE):
            raise ValueError("need 0 <= alpha <= 1")
        if beta is not None and beta < ONE:
            raise ValueError("need beta >= 1 (or None for unbounded)")

    def admits(self, density: Fraction) -> bool:
        if density < self.alpha:
            return False
        return self.beta is None or density <= self.beta


class PiecewiseConstantValuation(Valuation):
    """Step-density valuation with exact rational breakpoints and densities.

    ``breakpoints`` runs ``0 = b_0 < b_1 < ... < b_k = 1`` and segment ``i``
    carries constant density ``densities[i-1]``.  The densities must
    integrate to exactly 1; this is checked at construction.
    """

    __slots__ = ("breakpoints", "densities")

    def __init__(self, breakpoints: Sequence[ScalarLike], densities: Sequence[ScalarLike]):
        bps = tuple(as_scalar(b) for b in breakpoints)
        dens = tuple(as_scalar(d) for d in densities)
        if len(bps) != len(dens) + 1:
            raise ValueError("need exactly one more breakpoint than densities")
        if bps[0] != ZERO or bps[-1] != ONE:
            raise ValueError("breakpoints must start at 0 and end at 1")
        if any(a >= b for a, b in zip(bps, bps[1:])):
            raise ValueError("breakpoints must be strictly ascending")
        if any(d < 0 for d in dens):
            raise ValueError("densities must be non-negative")
        mass = sum((d * (b - a) for a, b, d in zip(bps, bps[1:], dens)), ZERO)
        if mass != ONE:
            raise ValueError(f"total mass must be exactly 1, got {mass}")
        self.breakpoints = bps
        self.densities = dens

    @classmethod
    def from_segments(cls, segments: Iterable[tuple[ScalarLike, ScalarLike]]) -> "PiecewiseConstantValuation":
        """Build from (end, density) pairs; the first segment starts at 0."""
        ends, dens = [], []
        for end, density in segments:
            ends.append(end)
            dens.append(density)
        return cls([ZERO, *ends], dens)

    @classmethod
    def uniform(cls) -> "PiecewiseConstantValuation":
        return cls((ZERO, ONE), (ONE,))

    @property
    def is_positive(self) -> bool:
        return all(d > 0 for d in self.densities)

    def segments(self) -> list[tuple[Fraction, Fraction, Fraction]]:
        """(left, right, density) triples."""
        return list(zip(self.breakpoints, self.breakpoints[1:], self.densities))

    def eval(self, x: ScalarLike, y: ScalarLike) -> Fraction:
        x, y = as_scalar(x), as_scalar(y)
        if not (ZERO <= x <= y <= ONE):
            raise ValueError(f"eval needs 0 <= x <= y <= 1, got ({x}, {y})")
        if x == y:
            return ZERO
        # First segment whose interior can intersect [x, y].
        i = bisect_right(self.breakpoints, x) - 1
        i = min(i, len(self.densities) - 1)
        total = ZERO
        while i < len(self.densities) and self.breakpoints[i] < y:
            lo = max(self.breakpoints[i], x)
            hi = min(self.breakpoints[i + 1], y)
            if hi > lo:
                total += self.densities[i] * (hi - lo)
            i += 1
        return total

    def cut(self, x: ScalarLike, r: Real) -> Optional[Fraction]:
        x = as_scalar(x)
        r = as_scalar(r)
        if not (ZERO <= x <= ONE):
            raise ValueError(f"cut needs 0 <= x <= 1, got {x}")
        if r < 0:
            raise ValueError(f"cut needs r >= 0, got {r}")
        acc = ZERO
        # Earliest position achieving the accumulated mass `acc`; zero-density
        # runs advance position without advancing mass, and the smallest
        # valid answer sits at the start of such a run.
        earliest = x
        i = bisect_right(self.breakpoints, x) - 1
        i = min(i, len(self.densities) - 1)
        while i < len(self.densities):
            lo = max(self.breakpoints[i], x)
            hi = self.breakpoints[i + 1]
            density = self.densities[i]
            if density > 0 and hi > lo:
                if acc == r:
                    return earliest
                gain = density * (hi - lo)
                if acc + gain >= r:
                    return lo + (r - acc) / density
                acc += gain
                earliest = hi
            i += 1
        if acc == r:
            return earliest
        return None

    def __eq__(self, other) -> bool:
        if not isinstance(other, PiecewiseConstantValuation):
            return NotImplemented
        return self.breakpoints == other.breakpoints and self.densities == other.densities

    def __hash__(self) -> int:
        return hash((self.breakpoints, self.densities))

    def __repr__(self) -> str:
        body = ", ".join(
            f"[{a},{b}]:{d}" for a, b, d in self.segments()
        )
        return f"PiecewiseConstantValuation({body})"

    def to_json(self) -> dict:
        return {
            "type": "piecewise_constant",
            "segments": [
                {"end": scalar_str(end), "density": scalar_str(d)}
                for end, d in zip(self.breakpoints[1:], self.densities)
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PiecewiseConstantValuation":
        if obj.get("type") != "piecewise_constant":
            raise ValueError(f"expected type 'piecewise_constant', got {obj.get('type')!r}")
        segments = obj.get("segments")
        if not isinstance(segments, list) or not segments:
            raise ValueError("'segments' must be a non-empty list")
        pairs = []
        for j, seg in enumerate(segments):
            try:
                end = as_scalar(seg["end"])
                density = as_scalar(seg["density"])
            except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
                raise ValueError(f"segments[{j}]: bad 'end'/'density': {exc}") from exc
            pairs.append((end, density))
        if pairs[-1][0] != ONE:
            raise ValueError("final segment end must be '1'")
        return cls.from_segments(pairs)


def verify_dense(valuation: PiecewiseConstantValuation, bounds: DensityBounds) -> bool:
    """Exact density-band check.

    For a step density the extremal subinterval density is attained inside a
    single segment, so checking each segment density is exhaustive.
    """
    return all(bounds.admits(d) for d in valuation.densities)


def random_dense_valuation(
    n_segments: int,
    bounds: DensityBounds,
    seed: int,
    positive: bool = True,
    _max_attempts: int = 10_000,
) -> PiecewiseConstantValuation:
    """Seeded generator of normalized step valuations inside a density band.

    Draws random rational densities on a random breakpoint grid, rescales
    exactly to total mass 1, and rejects draws that leave the band, so the
    result passes :func:`verify_dense` by construction.  Deterministic in
    ``seed``.
    """
    if n_segments < 1:
        raise ValueError("need at least one segment")
    rng = random.Random(seed)
    grid = max(8 * n_segments, 16)
    low = 0 if (not positive and bounds.alpha == 0) else 60
    for _ in range(_max_attempts):
        if n_segments == 1:
            bps = (ZERO, ONE)
        else:
            interior = sorted(rng.sample(range(1, grid), n_segments - 1))
            bps = (ZERO, *(Fraction(k, grid) for k in interior), ONE)
        raw = [Fraction(rng.randint(low, 140)) for _ in range(n_segments)]
        total = sum(r * (b - a) for a, b, r in zip(bps, bps[1:], raw))
        if total == 0:
            continue
        dens = [r / total for r in raw]
        if positive and any(d == 0 for d in dens):
            continue
        if all(bounds.admits(d) for d in dens):
            return PiecewiseConstantValuation(bps, dens)
    raise ValueError(
        f"could not draw a valuation inside {bounds} after {_max_attempts} attempts"
    )
