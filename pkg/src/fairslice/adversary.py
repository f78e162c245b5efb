"""Interactive adversary over a lazily labeled balanced value tree.

The session answers eval/cut queries without ever committing to a full
tree.  Instead it reveals edge labels just-in-time, always keeping the
query's root paths *light*:

* for an eval endpoint, each newly revealed node labels the on-path edge
  light and hangs the single heavy edge on the leftmost off-path child;
* for a cut answer, the descent toward the answer point places the heavy
  edge left of the answer when the remaining mass fraction gamma exceeds
  beta/3, and right of it otherwise -- since beta/3 < 1/2, the edge the
  answer passes through is light either way.

Each query therefore adds heavy edges to at most two root chains, so after
m queries no root-to-leaf path holds more than 2m revealed heavy edges.
While ``m <= floor((ln(n)/6 - 1)/2)`` that is below the heavy-edge count a
rich or critical leaf needs, and *any* claimed heavy piece can be refuted
by completing the labeling with light edges along the claim's leaves and
exhibiting the resulting low value.

Coordinates stay exact rationals (denominators 3^depth), so sessions run
happily at n = 3^60 and beyond; only touched nodes are stored.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Union

from .errors import PreconditionViolation
from .geometry import ONE, ZERO, Piece, as_scalar, scalar_str
from .valuation import encode_real
from .valuetree import (
    HEAVY,
    LIGHT,
    THIRD,
    PathLike,
    TernaryTreeValuation,
    TreeParams,
    _digits,
    digits_of_index,
    leaf_digits,
)

Kinds = tuple[str, str, str]


@dataclass(frozen=True)
class Reveal:
    """One newly revealed node: its path and the three child-edge kinds."""

    path: tuple[int, ...]
    kinds: Kinds


@dataclass(frozen=True)
class SessionRecord:
    kind: str  # "eval" | "cut"
    args: tuple
    answer: Optional[float]
    reveals: tuple[Reveal, ...]

    def to_json_obj(self) -> dict:
        return {
            "kind": self.kind,
            "args": [encode_real(a) for a in self.args],
            "answer": encode_real(self.answer),
            "reveals": [
                {"path": list(r.path), "labels": list(r.kinds)} for r in self.reveals
            ],
        }


class AdversarySession:
    """Lazy adversarial valuation with partially revealed edge labels."""

    def __init__(self, params: TreeParams):
        self.params = params
        self.revealed: dict[tuple[int, ...], Kinds] = {}
        self.m = 0  # queries answered so far
        self.log: list[SessionRecord] = []

    # -- constants -------------------------------------------------------

    @property
    def threshold(self) -> int:
        """Number of queries the refutation guarantee covers:
        floor((ln(n)/6 - 1)/2), clamped at zero for small trees."""
        raw = math.floor((math.log(self.params.n) / 6.0 - 1.0) / 2.0)
        return max(raw, 0)

    def _label_value(self, kind: str) -> float:
        if kind == HEAVY:
            return self.params.heavy_label
        if kind == LIGHT:
            return self.params.light_label
        return 1.0 / 3.0

    # -- reveal bookkeeping ------------------------------------------------

    def _reveal(self, path: tuple[int, ...], kinds: Kinds, sink: list[Reveal]) -> None:
        self.revealed[path] = kinds
        sink.append(Reveal(path, kinds))

    def _reveal_point_path(self, t: Fraction, sink: list[Reveal]) -> None:
        """Reveal the root path of t's leaf, keeping every on-path edge light."""
        prefix: tuple[int, ...] = ()
        for c in leaf_digits(t, self.params.depth):
            if prefix not in self.revealed:
                kinds = [LIGHT, LIGHT, LIGHT]
                heavy_at = min(j for j in (0, 1, 2) if j != c)
                kinds[heavy_at] = HEAVY
                self._reveal(prefix, tuple(kinds), sink)
            prefix += (c,)

    def _revealed_prefix(self, t: Fraction) -> float:
        """Mass of [0, t], readable from revealed labels only."""
        if t <= 0:
            return 0.0
        if t >= 1:
            return 1.0
        mass = 0.0
        value = 1.0
        prefix: tuple[int, ...] = ()
        index = 0
        for c in leaf_digits(t, self.params.depth):
            kinds = self.revealed[prefix]  # guaranteed by prior reveals
            for j in range(c):
                mass += value * self._label_value(kinds[j])
            value *= self._label_value(kinds[c])
            prefix += (c,)
            index = index * 3 + c
        leaf_left = Fraction(index, self.params.n)
        within = (t - leaf_left) * self.params.n
        return mass + value * float(within)

    # -- queries ----------------------------------------------------------

    def answer_eval(self, x, y) -> float:
        x, y = as_scalar(x), as_scalar(y)
        if not (ZERO <= x <= y <= ONE):
            raise ValueError(f"eval needs 0 <= x <= y <= 1, got ({x}, {y})")
        reveals: list[Reveal] = []
        self._reveal_point_path(x, reveals)
        self._reveal_point_path(y, reveals)
        answer = max(self._revealed_prefix(y) - self._revealed_prefix(x), 0.0)
        self.m += 1
        self.log.append(SessionRecord("eval", (x, y), answer, tuple(reveals)))
        return answer

    def answer_cut(self, x, r) -> Optional[float]:
        x = as_scalar(x)
        if not (ZERO <= x <= ONE):
            raise ValueError(f"cut needs 0 <= x <= 1, got {x}")
        r = float(r)
        if r < 0:
            raise ValueError(f"cut needs r >= 0, got {r}")
        reveals: list[Reveal] = []
        self._reveal_point_path(x, reveals)
        if r == 0:
            answer: Optional[float] = float(x)
        else:
            target = self._revealed_prefix(x) + r
            if target > 1.0 + 1e-12:
                answer = None
            else:
                answer = self._descend_revealing(min(target, 1.0), reveals)
        self.m += 1
        self.log.append(SessionRecord("cut", (x, r), answer, tuple(reveals)))
        return answer

    def _descend_revealing(self, target: float, sink: list[Reveal]) -> float:
        """Walk down to the leftmost point with prefix mass ``target``,
        revealing labels by the gamma rule where none exist yet.

        The remaining mass is tracked incrementally so that the reveal
        decision (gamma vs. beta/3) and the child choice are one and the
        same float comparison; computing them differently lets ulp-level
        disagreement route the walk through a heavy edge.
        """
        remaining = target
        value = 1.0
        prefix: tuple[int, ...] = ()
        left = ZERO
        width = ONE
        for _ in range(self.params.depth):
            kinds = self.revealed.get(prefix)
            if kinds is None:
                # gamma > beta/3, phrased exactly like the child test below
                if value * self.params.heavy_label < remaining:
                    kinds = (HEAVY, LIGHT, LIGHT)
                else:
                    kinds = (LIGHT, LIGHT, HEAVY)
                self._reveal(prefix, kinds, sink)
            chosen = 2
            for c in (0, 1):
                child_mass = value * self._label_value(kinds[c])
                if child_mass >= remaining:
                    chosen = c
                    break
                remaining -= child_mass
            value *= self._label_value(kinds[chosen])
            prefix += (chosen,)
            width /= 3
            left += chosen * width
        within = remaining / value if value > 0 else 0.0
        within = min(max(within, 0.0), 1.0)
        return float(left) + float(width) * within

    # -- invariants (verification helpers) ------------------------------------

    def max_revealed_heavy(self) -> int:
        """Maximum number of revealed heavy edges on any root-to-leaf path
        (unrevealed subtrees contribute nothing)."""
        best = 0
        stack: list[tuple[tuple[int, ...], int]] = [((), 0)]
        while stack:
            path, heavies = stack.pop()
            kinds = self.revealed.get(path)
            if kinds is None:
                best = max(best, heavies)
                continue
            for c, kind in enumerate(kinds):
                stack.append((path + (c,), heavies + (1 if kind == HEAVY else 0)))
        return best

    def revealed_is_connected(self) -> bool:
        """Every revealed node's parent is revealed (or it is the root)."""
        return all(path == () or path[:-1] in self.revealed for path in self.revealed)

    def revealed_critical_nodes(self) -> list[tuple[int, ...]]:
        """Revealed nodes whose density test says critical.

        Empty while the heavy-edge budget holds; the reveal strategy never
        labels a node's edges as thirds, so a critical node here means the
        session was driven past its guarantee.
        """
        out = []
        stack: list[tuple[tuple[int, ...], int, int]] = [((), 0, 0)]
        probe = _SessionProbe(self.params)
        while stack:
            path, h, q = stack.pop()
            kinds = self.revealed.get(path)
            if kinds is None:
                continue
            if probe.critical_counts(h, q):
                out.append(path)
            for c, kind in enumerate(kinds):
                stack.append((path + (c,), h + (1 if kind == HEAVY else 0), q + (1 if kind == LIGHT else 0)))
        return out

    def transcript_lines(self) -> list[str]:
        return [json.dumps(rec.to_json_obj(), separators=(",", ":")) for rec in self.log]

    # -- completion and refutation ----------------------------------------------

    def complete_labeling(
        self, seed: int, light_leaves: Iterable[PathLike] = ()
    ) -> "CompletedTree":
        """A full labeling agreeing with everything revealed so far.

        Unrevealed critical nodes follow the 1/3 rule; other unrevealed
        nodes take a keyed-hash heavy placement, except that on root paths
        of ``light_leaves`` the heavy edge is steered away from those paths
        whenever possible.  The snapshot is immutable: later session queries
        do not affect an existing completion.
        """
        return CompletedTree(
            self.params,
            revealed=dict(self.revealed),
            seed=seed,
            light_leaves=light_leaves,
        )

    def refute_claim(self, piece: Piece) -> Union["Refutation", "CannotRefute"]:
        """Try to disprove that ``piece`` is heavy (width <= 1/n and value
        >= 1/(2n)).

        Width violations refute outright.  Otherwise the session looks for
        a consistent completion under which the piece's value falls short:
        first the targeted completion that keeps the claim's leaf paths
        light, then a handful of ordinary seeded completions.  Within the
        query threshold the targeted completion always works; past it this
        is best effort and ``CannotRefute`` is an honest "no witness found".
        """
        n = self.params.n
        width_bound = Fraction(1, n)
        value_bound = Fraction(1, 2 * n)
        if piece.width > width_bound:
            return Refutation(
                claim=piece,
                width=piece.width,
                width_bound=width_bound,
                value=None,
                value_bound=value_bound,
                violated="width",
                completion_seed=None,
                completion=None,
            )
        if piece.width == 0:
            raise PreconditionViolation("an empty piece cannot be a heavy-piece claim")
        leaves = claim_leaves(piece, self.params)
        attempts: list[tuple[int, Iterable[PathLike]]] = [(0, leaves)]
        attempts += [(s, ()) for s in range(1, 21)]
        tried = 0
        for seed, light in attempts:
            completion = self.complete_labeling(seed, light_leaves=light)
            value = completion.value_of_piece(piece)
            tried += 1
            if value < float(value_bound):
                return Refutation(
                    claim=piece,
                    width=piece.width,
                    width_bound=width_bound,
                    value=value,
                    value_bound=value_bound,
                    violated="value",
                    completion_seed=seed,
                    completion=completion,
                )
        return CannotRefute(
            reason=f"piece stayed heavy under {tried} completion(s)",
            attempts=tried,
        )


class _SessionProbe(TernaryTreeValuation):
    """Internal: gives the session access to the guarded density tests."""

    def labels_for(self, path, h, q, critical):  # pragma: no cover - never queried
        raise NotImplementedError


def claim_leaves(piece: Piece, params: TreeParams) -> list[tuple[int, ...]]:
    """Digit paths of every leaf the piece overlaps with positive width."""
    n = params.n
    leaves: set[int] = set()
    for iv in piece.intervals:
        lo = math.floor(iv.left * n)
        hi = math.ceil(iv.right * n) - 1
        for index in range(max(lo, 0), min(hi, n - 1) + 1):
            leaves.add(index)
    return [digits_of_index(i, params.depth) for i in sorted(leaves)]


class CompletedTree(TernaryTreeValuation):
    """A fully labeled tree extending a session's revealed state.

    Label precedence at each node: revealed labels are binding; otherwise a
    critical node takes thirds; otherwise, if the node sits on a preferred
    light path, the heavy edge moves to the leftmost child off every such
    path (when one exists); otherwise heavy placement is the keyed hash of
    the node path.
    """

    def __init__(
        self,
        params: TreeParams,
        revealed: dict[tuple[int, ...], Kinds],
        seed: int,
        light_leaves: Iterable[PathLike] = (),
    ):
        super().__init__(params)
        self.revealed = revealed
        self.seed = seed
        self._seed_key = (seed & (2**64 - 1)).to_bytes(8, "little")
        self._light_prefixes: set[tuple[int, ...]] = set()
        for leaf in light_leaves:
            digits = _digits(leaf)
            for i in range(1, len(digits) + 1):
                self._light_prefixes.add(digits[:i])

    def _hash_heavy_position(self, path: tuple[int, ...]) -> int:
        from hashlib import blake2b

        digest = blake2b(bytes(path), key=self._seed_key, digest_size=8).digest()
        return int.from_bytes(digest, "big") % 3

    def labels_for(self, path, h, q, critical):
        kinds = self.revealed.get(path)
        if kinds is not None:
            return kinds
        if critical:
            return (THIRD, THIRD, THIRD)
        if self._light_prefixes:
            protected = [c for c in (0, 1, 2) if path + (c,) in self._light_prefixes]
            if protected and len(protected) < 3:
                heavy_at = min(c for c in (0, 1, 2) if c not in protected)
                kinds = [LIGHT, LIGHT, LIGHT]
                kinds[heavy_at] = HEAVY
                return tuple(kinds)
        kinds = [LIGHT, LIGHT, LIGHT]
        kinds[self._hash_heavy_position(path)] = HEAVY
        return tuple(kinds)


@dataclass(frozen=True)
class Refutation:
    """Evidence that a claimed piece is not heavy: either its width exceeds
    1/n outright, or an explicit consistent completion gives it value below
    1/(2n)."""

    claim: Piece
    width: Fraction
    width_bound: Fraction
    value: Optional[float]
    value_bound: Fraction
    violated: str  # "width" | "value"
    completion_seed: Optional[int]
    completion: Optional[CompletedTree]

    def to_json(self) -> dict:
        return {
            "refuted": True,
            "claimed_piece": self.claim.to_pairs(),
            "width": scalar_str(self.width),
            "width_bound": scalar_str(self.width_bound),
            "value": self.value,
            "value_bound": float(self.value_bound),
            "violated": self.violated,
            "completion_seed": self.completion_seed,
        }


@dataclass(frozen=True)
class CannotRefute:
    """No refuting completion was found (truthful negative, not a proof of
    heaviness)."""

    reason: str
    attempts: int

    def to_json(self) -> dict:
        return {"refuted": False, "reason": self.reason, "attempts": self.attempts}


def replay_transcript(
    session_log: Sequence[SessionRecord], completion: CompletedTree, tol: float = 1e-9
) -> bool:
    """Check that a completion reproduces every logged answer within tol."""
    for i, rec in enumerate(session_log):
        if rec.kind == "eval":
            answer = completion.eval(*rec.args)
        else:
            answer = completion.cut(*rec.args)
        if rec.answer is None or answer is None:
            if rec.answer is not None or answer is not None:
                raise AssertionError(
                    f"record {i} ({rec.kind} {rec.args}): logged {rec.answer!r}, replay {answer!r}"
                )
        elif abs(answer - rec.answer) > tol:
            raise AssertionError(
                f"record {i} ({rec.kind} {rec.args}): logged {rec.answer!r}, "
                f"replay {answer!r} (diff {abs(answer - rec.answer):.3e})"
            )
    return True


# -- built-in heavy-piece finder strategies -------------------------------------
#
# A finder gets the session (as its only oracle), a query budget and a seed,
# and must return a claimed heavy piece.  These exist to drive the
# lower-bound demonstration: against the adversary none of them can do
# better than chance within the threshold.


def _clamped_cell(start: Fraction, params: TreeParams) -> Piece:
    width = Fraction(1, params.n)
    start = min(max(start, ZERO), ONE - width)
    return Piece.of((start, start + width))


def finder_blind(session: AdversarySession, budget: int, seed: int) -> Piece:
    """No queries: claims a seeded 1/n-wide cell."""
    rng = random.Random(seed)
    index = rng.randrange(session.params.n)
    return _clamped_cell(Fraction(index, session.params.n), session.params)


def finder_greedy_dense(session: AdversarySession, budget: int, seed: int) -> Piece:
    """Ternary descent into the densest-looking third, two evals per level;
    claims a 1/n-wide piece at the left edge of the final block."""
    left, right = ZERO, ONE
    block_mass = 1.0
    queries = 0
    while queries + 2 <= budget and (right - left) > Fraction(1, session.params.n):
        third = (right - left) / 3
        m0 = session.answer_eval(left, left + third)
        m1 = session.answer_eval(left + third, left + 2 * third)
        queries += 2
        masses = [m0, m1, max(block_mass - m0 - m1, 0.0)]
        best = max(range(3), key=lambda j: masses[j])
        left = left + best * third
        right = left + third
        block_mass = masses[best]
    return _clamped_cell(left, session.params)


def finder_mass_split(session: AdversarySession, budget: int, seed: int) -> Piece:
    """Cut queries at evenly spaced mass quantiles; claims a 1/n-wide piece
    inside the narrowest quantile gap (where mass is densest)."""
    if budget < 1:
        return finder_blind(session, budget, seed)
    points = [ZERO]
    for j in range(1, budget + 1):
        answer = session.answer_cut(ZERO, Fraction(j, budget + 1))
        points.append(as_scalar(answer))
    points.append(ONE)
    gaps = [(points[i + 1] - points[i], i) for i in range(len(points) - 1)]
    _, best = min(gaps)
    return _clamped_cell(points[best], session.params)


STRATEGIES = {
    "blind": finder_blind,
    "greedy-dense": finder_greedy_dense,
    "mass-split": finder_mass_split,
}


@dataclass(frozen=True)
class GameReport:
    """Outcome of one finder-vs-adversary game."""

    depth: int
    strategy: str
    budget: int
    threshold: int
    queries_used: int
    claim: Piece
    outcome: Union[Refutation, CannotRefute]
    max_revealed_heavy_trace: tuple[int, ...]

    @property
    def refuted(self) -> bool:
        return isinstance(self.outcome, Refutation)

    def to_json(self) -> dict:
        return {
            "k": self.depth,
            "n": f"3^{self.depth}",
            "strategy": self.strategy,
            "budget": self.budget,
            "threshold": self.threshold,
            "threshold_vacuous": self.threshold == 0,
            "within_threshold": self.queries_used <= self.threshold,
            "queries_used": self.queries_used,
            "claim": self.claim.to_pairs(),
            "max_revealed_heavy_trace": list(self.max_revealed_heavy_trace),
            "outcome": self.outcome.to_json(),
        }


def run_heavy_piece_game(
    params: TreeParams, strategy: str, budget: int, seed: int
) -> GameReport:
    """Play one game: the finder queries the adversary, claims a piece, and
    the adversary tries to refute the claim."""
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; have {sorted(STRATEGIES)}")
    session = AdversarySession(params)
    claim = STRATEGIES[strategy](session, budget, seed)
    if session.m > budget:
        raise RuntimeError(f"strategy {strategy} used {session.m} > {budget} queries")
    # Reconstruct max_revealed_heavy after each query from the reveal log.
    trace = []
    probe = AdversarySession(params)
    for rec in session.log:
        for r in rec.reveals:
            probe.revealed[r.path] = r.kinds
        trace.append(probe.max_revealed_heavy())
    outcome = session.refute_claim(claim)
    return GameReport(
        depth=params.depth,
        strategy=strategy,
        budget=budget,
        threshold=session.threshold,
        queries_used=session.m,
        claim=claim,
        outcome=outcome,
        max_revealed_heavy_trace=tuple(trace),
    )
