"""Balanced ternary value-tree valuations.

A tree of depth d partitions [0, 1] into 3^d equal leaf cells.  Each
internal node splits its interval into thirds and labels the three child
edges so the labels sum to 1; a node's value is the product of the edge
labels on its root path, and leaves are uniform inside their cell.  Two
labelings occur:

* an ordinary node carries one *heavy* edge (label beta/3) and two *light*
  edges (label 1/2 - beta/6), where ``beta = 2**(6/ln n)``;
* a *critical* node -- one whose density D satisfies ``D * beta > 2`` --
  labels all three edges 1/3, which freezes the density from there down.

This keeps every subinterval's density in (0, 2] while letting short heavy
runs build density quickly: a leaf can only reach density >= 1/2 (or
criticality) when its path carries more than ``ln(n)/6 - 1`` heavy edges.
That threshold is what the adversary module exploits.

Values here are irrational, so node arithmetic runs in floats with
comparisons done in log space; any classification within 1e-9 of a
threshold raises :class:`NumericalAmbiguity` instead of guessing.  At the
supported sizes the true margins are wider than 1e-3.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from fractions import Fraction
from hashlib import blake2b
from typing import Iterable, Iterator, Optional, Sequence, Union

from .errors import NumericalAmbiguity, PreconditionViolation
from .geometry import ONE, ZERO, Interval, Piece, as_scalar
from .valuation import Valuation

LN2 = math.log(2.0)
LN3 = math.log(3.0)

HEAVY = "H"
LIGHT = "L"
THIRD = "T"

#: side length of the comparison guard band in log space
AMBIGUITY_GUARD = 1e-9

#: minimum depth for the density guarantees to hold (gives beta/3 < 1/2)
STRICT_MIN_DEPTH = 11

#: permissive floor: below depth 4 the light label 1/2 - beta/6 goes negative
PERMISSIVE_MIN_DEPTH = 4

#: largest depth for which whole-tree enumeration is supported (3^11 leaves)
EAGER_MAX_DEPTH = 11

#: sup over n of the density reachable with at most ln(n)/6 heavy edges
LOW_HEAVY_DENSITY_LIMIT = 2.0 ** (1.5 - 3.0 / LN3)


@dataclass(frozen=True)
class TreeParams:
    """Size-derived constants of a balanced value tree."""

    n: int
    depth: int
    beta: float
    permissive: bool = False

    @classmethod
    def from_depth(cls, depth: int, permissive: bool = False) -> "TreeParams":
        if depth < PERMISSIVE_MIN_DEPTH:
            raise ValueError(
                f"depth {depth} < {PERMISSIVE_MIN_DEPTH}: edge labels would not be positive"
            )
        if depth < STRICT_MIN_DEPTH and not permissive:
            raise ValueError(
                f"depth {depth} < {STRICT_MIN_DEPTH}: density guarantees need "
                f"n >= 3^{STRICT_MIN_DEPTH} (pass permissive=True for unit-test sizes)"
            )
        n = 3**depth
        beta = 2.0 ** (6.0 / (depth * LN3))
        params = cls(n=n, depth=depth, beta=beta, permissive=permissive)
        if not permissive and not (1.0 / 3.0 <= beta / 3.0 < 0.5):
            raise ValueError(f"heavy label beta/3 = {beta/3} outside [1/3, 1/2)")
        return params

    @classmethod
    def from_leaf_count(cls, n: int, permissive: bool = False) -> "TreeParams":
        depth = round(math.log(n, 3))
        if 3**depth != n:
            raise ValueError(f"leaf count {n} is not a power of 3")
        return cls.from_depth(depth, permissive)

    @property
    def heavy_label(self) -> float:
        return self.beta / 3.0

    @property
    def light_label(self) -> float:
        return 0.5 - self.beta / 6.0

    @property
    def heavy_density(self) -> float:
        """Density multiplier of a heavy edge: beta."""
        return self.beta

    @property
    def light_density(self) -> float:
        """Density multiplier of a light edge: 3/2 - beta/2."""
        return 1.5 - self.beta / 2.0

    @property
    def ln_beta(self) -> float:
        return 6.0 * LN2 / (self.depth * LN3)

    @property
    def ln_light_density(self) -> float:
        # light_density = 1 - (beta - 1)/2 with beta = exp(ln_beta)
        return math.log1p(-math.expm1(self.ln_beta) / 2.0)

    def leaf_width(self) -> Fraction:
        return Fraction(1, self.n)


def leaf_digits(t: Fraction, depth: int) -> tuple[int, ...]:
    """Base-3 digit path of the leaf whose cell contains t (t=1 maps to the
    last leaf)."""
    n = 3**depth
    index = math.floor(t * n)
    if index >= n:
        index = n - 1
    return digits_of_index(index, depth)


def digits_of_index(index: int, depth: int) -> tuple[int, ...]:
    digits = []
    for _ in range(depth):
        index, digit = divmod(index, 3)
        digits.append(digit)
    digits.reverse()
    return tuple(digits)


@dataclass(frozen=True)
class NodePath:
    """A node address: the base-3 digit string from the root (empty=root)."""

    digits: tuple[int, ...] = ()

    def __post_init__(self):
        if any(d not in (0, 1, 2) for d in self.digits):
            raise ValueError("path digits must be 0, 1 or 2")

    @classmethod
    def from_index(cls, index: int, depth: int) -> "NodePath":
        if not (0 <= index < 3**depth):
            raise ValueError(f"leaf index {index} out of range for depth {depth}")
        return cls(digits_of_index(index, depth))

    @property
    def depth(self) -> int:
        return len(self.digits)

    def child(self, digit: int) -> "NodePath":
        return NodePath(self.digits + (digit,))

    def left(self) -> Fraction:
        acc = ZERO
        width = ONE
        for d in self.digits:
            width /= 3
            acc += d * width
        return acc

    def width(self) -> Fraction:
        return Fraction(1, 3**len(self.digits))

    def interval(self) -> Interval:
        left = self.left()
        return Interval(left, left + self.width())


PathLike = Union[NodePath, Sequence[int]]


def _digits(path: PathLike) -> tuple[int, ...]:
    if isinstance(path, NodePath):
        return path.digits
    return tuple(path)


@dataclass(frozen=True)
class NodeProfile:
    """Edge-type counts on a node's root path, plus its criticality."""

    h: int  # heavy edges
    q: int  # light edges
    z: int  # 1/3 edges below a critical ancestor
    critical: bool

    @property
    def depth(self) -> int:
        return self.h + self.q + self.z


@dataclass(frozen=True)
class NodeVisit:
    """One node seen during whole-tree enumeration."""

    depth: int
    h: int
    q: int
    z: int
    critical: bool
    value: float
    label_kinds: Optional[tuple[str, str, str]]  # None for leaves

    @property
    def is_leaf(self) -> bool:
        return self.label_kinds is None


class TernaryTreeValuation(Valuation, ABC):
    """Shared eval/cut and node bookkeeping over any edge-label source.

    Subclasses decide the label kinds of a node's child edges via
    :meth:`labels_for`; everything else (profiles, densities, prefix
    masses, query answering) is derived here.
    """

    def __init__(self, params: TreeParams):
        self.params = params
        self._crit_cache: dict[tuple[int, int], bool] = {}

    # -- labeling ----------------------------------------------------------

    @abstractmethod
    def labels_for(
        self, path: tuple[int, ...], h: int, q: int, critical: bool
    ) -> tuple[str, str, str]:
        """Edge-label kinds (HEAVY/LIGHT/THIRD) of a node's three children."""

    def label_value(self, kind: str) -> float:
        if kind == HEAVY:
            return self.params.heavy_label
        if kind == LIGHT:
            return self.params.light_label
        return 1.0 / 3.0

    # -- log-space classification -------------------------------------------

    def _log_density(self, h: int, q: int) -> float:
        return h * self.params.ln_beta + q * self.params.ln_light_density

    def critical_margin(self, h: int, q: int) -> float:
        """log(D * beta) - log 2; positive means critical."""
        return self._log_density(h + 1, q) - LN2

    def critical_counts(self, h: int, q: int) -> bool:
        cached = self._crit_cache.get((h, q))
        if cached is not None:
            return cached
        margin = self.critical_margin(h, q)
        if abs(margin) < AMBIGUITY_GUARD:
            raise NumericalAmbiguity(
                f"criticality test at h={h}, q={q} within {AMBIGUITY_GUARD} of the threshold"
            )
        result = margin > 0
        self._crit_cache[(h, q)] = result
        return result

    def rich_counts(self, h: int, q: int) -> bool:
        """Density >= 1/2 in log space, with the same ambiguity guard."""
        margin = self._log_density(h, q) + LN2
        if abs(margin) < AMBIGUITY_GUARD:
            raise NumericalAmbiguity(
                f"richness test at h={h}, q={q} within {AMBIGUITY_GUARD} of the threshold"
            )
        return margin > 0

    # -- node walks ----------------------------------------------------------

    def _walk(self, digits: tuple[int, ...]) -> tuple[int, int, int, bool, float]:
        """(h, q, z, node-critical, node-value) for the node at ``digits``."""
        h = q = z = 0
        critical = False
        value = 1.0
        prefix: tuple[int, ...] = ()
        for c in digits:
            critical = critical or self.critical_counts(h, q)
            kinds = self.labels_for(prefix, h, q, critical)
            kind = kinds[c]
            if kind == HEAVY:
                h += 1
            elif kind == LIGHT:
                q += 1
            else:
                z += 1
            value *= self.label_value(kind)
            prefix += (c,)
        critical = critical or self.critical_counts(h, q)
        return h, q, z, critical, value

    def node_profile(self, path: PathLike) -> NodeProfile:
        h, q, z, critical, _ = self._walk(_digits(path))
        return NodeProfile(h, q, z, critical)

    def node_value(self, path: PathLike) -> float:
        """Direct product of the edge labels on the node's root path."""
        return self._walk(_digits(path))[4]

    def node_density(self, path: PathLike) -> float:
        """Closed-form density beta^h * (3/2 - beta/2)^q of the node."""
        h, q, _, _, _ = self._walk(_digits(path))
        return math.exp(self._log_density(h, q))

    def is_critical(self, path: PathLike) -> bool:
        return self.node_profile(path).critical

    def classify_leaf(self, path: PathLike) -> str:
        """'critical', 'rich' (non-critical, density >= 1/2) or 'neither'."""
        digits = _digits(path)
        if len(digits) != self.params.depth:
            raise ValueError(f"not a leaf path: depth {len(digits)} != {self.params.depth}")
        h, q, _, critical, _ = self._walk(digits)
        if critical:
            return "critical"
        return "rich" if self.rich_counts(h, q) else "neither"

    # -- valuation interface ---------------------------------------------------

    @property
    def is_positive(self) -> bool:
        return True  # all edge labels are positive

    def _prefix(self, t: Fraction) -> float:
        """Mass of [0, t]."""
        if t <= 0:
            return 0.0
        if t >= 1:
            return 1.0
        digits = leaf_digits(t, self.params.depth)
        mass = 0.0
        value = 1.0
        h = q = 0
        critical = False
        prefix: tuple[int, ...] = ()
        index = 0
        for c in digits:
            critical = critical or self.critical_counts(h, q)
            kinds = self.labels_for(prefix, h, q, critical)
            for j in range(c):
                mass += value * self.label_value(kinds[j])
            kind = kinds[c]
            if kind == HEAVY:
                h += 1
            elif kind == LIGHT:
                q += 1
            value *= self.label_value(kind)
            prefix += (c,)
            index = index * 3 + c
        leaf_left = Fraction(index, self.params.n)
        within = (t - leaf_left) * self.params.n  # exact fraction of the cell
        return mass + value * float(within)

    def eval(self, x, y) -> float:
        x, y = as_scalar(x), as_scalar(y)
        if not (ZERO <= x <= y <= ONE):
            raise ValueError(f"eval needs 0 <= x <= y <= 1, got ({x}, {y})")
        return max(self._prefix(y) - self._prefix(x), 0.0)

    def cut(self, x, r) -> Optional[float]:
        x = as_scalar(x)
        if not (ZERO <= x <= ONE):
            raise ValueError(f"cut needs 0 <= x <= 1, got {x}")
        r = float(r)
        if r < 0:
            raise ValueError(f"cut needs r >= 0, got {r}")
        if r == 0:
            return float(x)
        target = self._prefix(x) + r
        if target > 1.0 + 1e-12:
            return None
        target = min(target, 1.0)
        return self._descend_to_mass(target)

    def _descend_to_mass(self, target: float) -> float:
        """Leftmost point whose prefix mass is ``target``.

        Tracks the remaining mass incrementally (same arithmetic as the
        adversary's revealing descent, so completions replay session
        answers bit-for-bit on shared labels).
        """
        remaining = target
        value = 1.0
        h = q = 0
        critical = False
        prefix: tuple[int, ...] = ()
        left = ZERO
        width = ONE
        for _ in range(self.params.depth):
            critical = critical or self.critical_counts(h, q)
            kinds = self.labels_for(prefix, h, q, critical)
            chosen = 2
            for c in (0, 1):
                child_mass = value * self.label_value(kinds[c])
                if child_mass >= remaining:
                    chosen = c
                    break
                remaining -= child_mass
            kind = kinds[chosen]
            if kind == HEAVY:
                h += 1
            elif kind == LIGHT:
                q += 1
            value *= self.label_value(kind)
            prefix += (chosen,)
            width /= 3
            left += chosen * width
        within = remaining / value if value > 0 else 0.0
        within = min(max(within, 0.0), 1.0)
        return float(left) + float(width) * within

    # -- whole-tree enumeration --------------------------------------------------

    def iter_nodes(self) -> Iterator[NodeVisit]:
        """Preorder walk over every node; depth capped at 3^11 leaves."""
        if self.params.depth > EAGER_MAX_DEPTH:
            raise ValueError(
                f"whole-tree enumeration supports depth <= {EAGER_MAX_DEPTH}; "
                f"use lazy node queries at depth {self.params.depth}"
            )
        depth_max = self.params.depth
        stack: list[tuple[tuple[int, ...], int, int, int, int, bool, float]] = [
            ((), 0, 0, 0, 0, False, 1.0)
        ]
        while stack:
            path, depth, h, q, z, sticky, value = stack.pop()
            critical = sticky or self.critical_counts(h, q)
            if depth == depth_max:
                yield NodeVisit(depth, h, q, z, critical, value, None)
                continue
            kinds = self.labels_for(path, h, q, critical)
            yield NodeVisit(depth, h, q, z, critical, value, kinds)
            for c in (2, 1, 0):
                kind = kinds[c]
                nh, nq, nz = h, q, z
                if kind == HEAVY:
                    nh += 1
                elif kind == LIGHT:
                    nq += 1
                else:
                    nz += 1
                stack.append(
                    (path + (c,), depth + 1, nh, nq, nz, critical, value * self.label_value(kind))
                )

    def max_leaf_density(self) -> float:
        """Maximum leaf density; for a tree of uniform leaves this bounds the
        density of every subinterval."""
        best = -math.inf
        for visit in self.iter_nodes():
            if visit.is_leaf:
                best = max(best, math.exp(self._log_density(visit.h, visit.q)))
        return best

    # -- heavy-piece post-processing ----------------------------------------------

    def extract_candidate_leaf(self, piece: Piece) -> NodePath:
        """From a heavy piece, locate a leaf of density >= 1/2.

        A heavy piece has average density >= 1/2, so its densest interval
        does too; that interval is narrower than a leaf cell, so it meets at
        most two leaves and the denser of those inherits the bound.  The
        returned leaf therefore classifies as rich or critical.
        """
        n = self.params.n
        if piece.width == 0 or piece.width > Fraction(1, n):
            raise PreconditionViolation(
                f"piece width {piece.width} outside (0, 1/{n}]: not a heavy piece"
            )
        total = self.value_of_piece(piece)
        if total < float(Fraction(1, 2 * n)) * (1.0 - 1e-9):
            raise PreconditionViolation(
                f"piece value {total} below 1/(2*{n}): not a heavy piece"
            )
        best = max(
            piece.intervals,
            key=lambda iv: self.eval(iv.left, iv.right) / float(iv.width),
        )
        lo = math.floor(best.left * n)
        hi = math.ceil(best.right * n) - 1
        candidates = range(max(lo, 0), min(hi, n - 1) + 1)
        chosen = max(candidates, key=lambda i: self._leaf_log_density(i))
        return NodePath.from_index(chosen, self.params.depth)

    def _leaf_log_density(self, index: int) -> float:
        h, q, _, _, _ = self._walk(digits_of_index(index, self.params.depth))
        return self._log_density(h, q)


class BalancedValueTree(TernaryTreeValuation):
    """Fully labeled tree: heavy-edge placement is a keyed hash of the node
    path, so trees are reproducible from (depth, seed) without storing any
    per-node state.
    """

    def __init__(self, params: TreeParams, seed: int):
        super().__init__(params)
        self.seed = seed
        self._seed_key = (seed & (2**64 - 1)).to_bytes(8, "little")

    def _heavy_position(self, path: tuple[int, ...]) -> int:
        digest = blake2b(bytes(path), key=self._seed_key, digest_size=8).digest()
        return int.from_bytes(digest, "big") % 3

    def labels_for(self, path, h, q, critical):
        if critical:
            return (THIRD, THIRD, THIRD)
        kinds = [LIGHT, LIGHT, LIGHT]
        kinds[self._heavy_position(path)] = HEAVY
        return tuple(kinds)

    def to_json(self) -> dict:
        return {
            "type": "balanced_value_tree",
            "k": self.params.depth,
            "seed": self.seed,
            "permissive": self.params.permissive,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "BalancedValueTree":
        if obj.get("type") != "balanced_value_tree":
            raise ValueError(f"expected type 'balanced_value_tree', got {obj.get('type')!r}")
        try:
            depth = int(obj["k"])
            seed = int(obj["seed"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"bad 'k'/'seed': {exc}") from exc
        params = TreeParams.from_depth(depth, permissive=bool(obj.get("permissive", False)))
        return cls(params, seed)


def build_tree(params: TreeParams, seed: int) -> BalancedValueTree:
    return BalancedValueTree(params, seed)


@dataclass(frozen=True)
class LeafProfileClass:
    """A realizable (h, q, z) leaf signature and its classification."""

    h: int
    q: int
    z: int
    classification: str  # "critical" | "rich" | "neither"


def leaf_profiles(params: TreeParams) -> list[LeafProfileClass]:
    """Every (h, q, z) leaf signature consistent with the labeling rules.

    A signature with z == 0 is realizable iff some root path places its
    heavy edges without an intermediate node turning critical; ordering the
    light edges first makes (h-1, q) the binding prefix.  A signature with
    z >= 1 needs criticality to trigger exactly when the last heavy edge is
    added: critical at (h, q) but not at (h-1, q).
    """
    probe = BalancedValueTree(params, seed=0)  # only for the guarded tests
    out = []
    d = params.depth
    for h in range(d + 1):
        q = d - h
        if h == 0 or not probe.critical_counts(h - 1, q):
            if probe.critical_counts(h, q):
                cls_name = "critical"
            elif probe.rich_counts(h, q):
                cls_name = "rich"
            else:
                cls_name = "neither"
            out.append(LeafProfileClass(h, q, 0, cls_name))
        for q2 in range(0, d - h):
            z = d - h - q2
            if h >= 1 and probe.critical_counts(h, q2) and not probe.critical_counts(h - 1, q2):
                out.append(LeafProfileClass(h, q2, z, "critical"))
    return out


def low_heavy_density_cap(depth: int) -> float:
    """Largest leaf density achievable with at most ln(n)/6 heavy edges on a
    depth-``depth`` tree; increasing in depth with limit
    :data:`LOW_HEAVY_DENSITY_LIMIT` (~0.426), hence always below 1/2.
    """
    ln_n = depth * LN3
    ln_beta = 6.0 * LN2 / ln_n
    ln_light_density = math.log1p(-math.expm1(ln_beta) / 2.0)
    exponent = depth - ln_n / 6.0
    # beta ** (ln_n / 6) == 2 exactly
    return 2.0 * math.exp(exponent * ln_light_density)


def verify_labeling(
    source: TernaryTreeValuation,
    paths: Iterable[PathLike] = (),
    sample_count: int = 50,
    sample_seed: int = 0,
) -> int:
    """Check labeling rules along given and randomly sampled root-leaf paths.

    Verifies, node by node: labels sum to 1 (within 1e-12), critical nodes
    label all edges 1/3, and non-critical nodes carry exactly one heavy and
    two light edges.  Raises ValueError on the first violation; returns the
    number of nodes checked.  (Exhaustive verification is impossible for
    astronomically large trees; callers choose the paths that matter.)
    """
    import random as _random

    params = source.params
    rng = _random.Random(sample_seed)
    all_paths = [_digits(p) for p in paths]
    for _ in range(sample_count):
        all_paths.append(digits_of_index(rng.randrange(params.n), params.depth))
    checked = 0
    for digits in all_paths:
        h = q = 0
        critical = False
        prefix: tuple[int, ...] = ()
        for c in digits:
            critical = critical or source.critical_counts(h, q)
            kinds = source.labels_for(prefix, h, q, critical)
            values = [source.label_value(k) for k in kinds]
            if abs(sum(values) - 1.0) > 1e-12:
                raise ValueError(f"labels at {prefix} sum to {sum(values)}, not 1")
            if critical:
                if kinds != (THIRD, THIRD, THIRD):
                    raise ValueError(f"critical node {prefix} not labeled (1/3,1/3,1/3): {kinds}")
            else:
                if sorted(kinds) != [HEAVY, LIGHT, LIGHT]:
                    raise ValueError(
                        f"non-critical node {prefix} needs one heavy and two light edges: {kinds}"
                    )
            kind = kinds[c]
            if kind == HEAVY:
                h += 1
            elif kind == LIGHT:
                q += 1
            prefix += (c,)
            checked += 1
    return checked
