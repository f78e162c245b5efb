import math
import random
from fractions import Fraction

import pytest

from fairslice.adversary import (
    STRATEGIES,
    AdversarySession,
    CannotRefute,
    Refutation,
    claim_leaves,
    replay_transcript,
    run_heavy_piece_game,
)
from fairslice.geometry import Piece
from fairslice.valuetree import HEAVY, LIGHT, TreeParams, verify_labeling

P60 = TreeParams.from_depth(60)
P11 = TreeParams.from_depth(11)

GRID = 3**9  # query coordinates land on this lattice in the random drivers


def random_queries(session, count, rng):
    for _ in range(count):
        if rng.random() < 0.5:
            a, b = sorted(Fraction(rng.randrange(0, GRID + 1), GRID) for _ in range(2))
            session.answer_eval(a, b)
        else:
            x = Fraction(rng.randrange(0, GRID + 1), GRID)
            session.answer_cut(x, rng.random() * 1.2)


class TestThreshold:
    def test_values(self):
        assert AdversarySession(P60).threshold == 4
        assert AdversarySession(P11).threshold == 0
        # (ln 3^60)/6 ~ 10.986 -> (10.986 - 1)/2 -> floor 4
        assert math.floor((math.log(3**60) / 6 - 1) / 2) == 4


class TestAnswers:
    def test_full_interval_is_normalized(self):
        session = AdversarySession(P60)
        assert abs(session.answer_eval(0, 1) - 1.0) < 1e-9
        assert session.m == 1

    def test_repeat_query_same_answer_separate_billing(self):
        session = AdversarySession(P60)
        a = session.answer_eval(Fraction(1, 9), Fraction(5, 9))
        b = session.answer_eval(Fraction(1, 9), Fraction(5, 9))
        assert a == b
        assert session.m == 2

    def test_cut_zero_mass_returns_start(self):
        session = AdversarySession(P60)
        x = Fraction(7, 81)
        assert session.answer_cut(x, 0) == float(x)

    def test_cut_full_mass(self):
        session = AdversarySession(P60)
        assert abs(session.answer_cut(0, 1.0) - 1.0) < 1e-9

    def test_cut_beyond_mass_is_no_answer(self):
        session = AdversarySession(P60)
        assert session.answer_cut(Fraction(2, 3), 1.0) is None
        assert session.m == 1  # still billed

    def test_eval_cut_consistency(self):
        session = AdversarySession(P60)
        mass = session.answer_eval(0, Fraction(1, 3))
        y = session.answer_cut(0, mass)
        assert abs(y - 1 / 3) < 1e-9


class TestInvariants:
    def test_heavy_budget_connectivity_all_or_none(self):
        rng = random.Random(991)
        for trial in range(15):
            session = AdversarySession(P60)
            for _ in range(25):
                random_queries(session, 1, rng)
                assert session.max_revealed_heavy() <= 2 * session.m
                assert session.revealed_is_connected()
                # all-or-none is structural: reveals store complete triples
                assert all(len(kinds) == 3 for kinds in session.revealed.values())
            assert session.revealed_critical_nodes() == []

    def test_monotone_heavy_count(self):
        rng = random.Random(5)
        session = AdversarySession(P60)
        last = 0
        for _ in range(30):
            random_queries(session, 1, rng)
            now = session.max_revealed_heavy()
            assert now >= last
            last = now

    def test_fresh_session_has_nothing(self):
        session = AdversarySession(P60)
        assert session.max_revealed_heavy() == 0
        assert session.revealed == {}

    def test_ulp_boundary_cut_masses(self):
        # regression: cut targets within an ulp of a measured prefix mass
        # must answer near the exact point and never route the descent
        # through a heavy edge (reveal rule and child choice must share one
        # float comparison)
        rng = random.Random(8)
        for trial in range(25):
            session = AdversarySession(P60)
            x = Fraction(rng.randrange(1, 3**10), 3**10)
            mass = session.answer_eval(0, x)
            for eps in (0.0, 5e-17, -5e-17, 1e-15):
                r = mass + eps
                if r < 0:
                    continue
                y = session.answer_cut(0, r)
                if y is not None:
                    assert abs(y - float(x)) < 1e-9, (trial, eps)
                assert session.max_revealed_heavy() <= 2 * session.m
            for seed in range(2):
                replay_transcript(session.log, session.complete_labeling(seed=seed))

    def test_deep_tree_sessions(self):
        # exact rational coordinates keep sessions workable at depth 200
        params = TreeParams.from_depth(200)
        session = AdversarySession(params)
        assert session.threshold == 17
        rng = random.Random(12)
        grid = 3**12
        for _ in range(15):
            if rng.random() < 0.5:
                a, b = sorted(Fraction(rng.randrange(0, grid + 1), grid) for _ in range(2))
                session.answer_eval(a, b)
            else:
                session.answer_cut(Fraction(rng.randrange(0, grid + 1), grid), rng.random())
            assert session.max_revealed_heavy() <= 2 * session.m
            assert session.revealed_is_connected()
        assert session.revealed_critical_nodes() == []
        completion = session.complete_labeling(seed=1)
        assert replay_transcript(session.log, completion)
        verify_labeling(completion, sample_count=10, sample_seed=1)

    def test_eval_reveals_keep_on_path_edges_light(self):
        session = AdversarySession(P60)
        x = Fraction(11, 3**5)
        session.answer_eval(x, x)
        prefix = ()
        for digit, _ in zip(
            iter_path_digits(x, 60), range(60)
        ):
            kinds = session.revealed[prefix]
            assert kinds[digit] == LIGHT
            assert sorted(kinds) == [HEAVY, LIGHT, LIGHT]
            prefix += (digit,)


def iter_path_digits(t, depth):
    from fairslice.valuetree import leaf_digits

    return leaf_digits(Fraction(t), depth)


class TestCompletions:
    def test_empty_session_completion_is_seeded_tree(self):
        session = AdversarySession(P11)
        completion = session.complete_labeling(seed=3)
        verify_labeling(completion, sample_count=50, sample_seed=1)
        assert abs(completion.eval(0, 1) - 1.0) < 1e-12

    def test_replay_matches_for_many_completions(self):
        rng = random.Random(17)
        session = AdversarySession(P60)
        random_queries(session, 10, rng)
        for seed in range(20):
            completion = session.complete_labeling(seed=seed)
            assert replay_transcript(session.log, completion)

    def test_snapshot_isolated_from_later_queries(self):
        rng = random.Random(23)
        session = AdversarySession(P60)
        random_queries(session, 5, rng)
        completion = session.complete_labeling(seed=0)
        log_before = list(session.log)
        random_queries(session, 5, rng)
        assert replay_transcript(log_before, completion)

    def test_light_preference_suppresses_density(self):
        session = AdversarySession(P60)
        target = tuple([1] * 60)
        completion = session.complete_labeling(seed=0, light_leaves=[target])
        profile = completion.node_profile(target)
        assert profile.h == 0 and not profile.critical
        # density (3/2 - beta/2)^60 is far below 1/2
        assert completion.node_density(target) < 0.5

    def test_completion_agrees_with_reveals(self):
        rng = random.Random(29)
        session = AdversarySession(P60)
        random_queries(session, 8, rng)
        completion = session.complete_labeling(seed=9)
        for path, kinds in session.revealed.items():
            h = q = 0
            critical = False
            prefix = ()
            for c in path:
                critical = critical or completion.critical_counts(h, q)
                k = completion.labels_for(prefix, h, q, critical)[c]
                if k == HEAVY:
                    h += 1
                elif k == LIGHT:
                    q += 1
                prefix += (c,)
            critical = critical or completion.critical_counts(h, q)
            assert completion.labels_for(path, h, q, critical) == kinds


class TestRefutation:
    def test_wide_claim_refuted_by_width_alone(self):
        session = AdversarySession(P60)
        outcome = session.refute_claim(Piece.of((0, "1/3")))
        assert isinstance(outcome, Refutation)
        assert outcome.violated == "width"
        assert outcome.completion is None

    def test_blind_claim_refuted_by_value(self):
        session = AdversarySession(P60)
        cell = Fraction(1, P60.n)
        outcome = session.refute_claim(Piece.of((0, cell)))
        assert isinstance(outcome, Refutation)
        assert outcome.violated == "value"
        assert outcome.value < float(outcome.value_bound)
        verify_labeling(outcome.completion, paths=claim_leaves(outcome.claim, P60))

    def test_empty_claim_rejected(self):
        session = AdversarySession(P60)
        with pytest.raises(Exception):
            session.refute_claim(Piece())

    def test_refutation_consistent_with_transcript(self):
        rng = random.Random(31)
        session = AdversarySession(P60)
        random_queries(session, 4, rng)
        cell = Fraction(1, P60.n)
        outcome = session.refute_claim(Piece.of((Fraction(1, 2), Fraction(1, 2) + cell)))
        assert isinstance(outcome, Refutation)
        assert replay_transcript(session.log, outcome.completion)

    def test_multi_interval_claim(self):
        session = AdversarySession(P60)
        cell = Fraction(1, P60.n)
        piece = Piece.of((0, cell / 2), (Fraction(1, 2), Fraction(1, 2) + cell / 4))
        outcome = session.refute_claim(piece)
        assert isinstance(outcome, Refutation)

    def test_past_threshold_answers_stay_honest(self):
        # past the threshold refutation is best effort; whatever comes back
        # must be truthful: a Refutation really falsifies heaviness, a
        # CannotRefute reports the attempts made
        session = AdversarySession(P11)
        target = Fraction(1, 2)
        for _ in range(20):
            session.answer_eval(0, target)
            session.answer_cut(0, session.answer_eval(0, target) / 2)
        assert session.m > session.threshold
        index = math.floor(target * P11.n)
        claim = Piece.of((Fraction(index, P11.n), Fraction(index + 1, P11.n)))
        outcome = session.refute_claim(claim)
        if isinstance(outcome, Refutation):
            assert outcome.violated == "value"
            assert outcome.value < float(outcome.value_bound)
            assert replay_transcript(session.log, outcome.completion)
        else:
            assert isinstance(outcome, CannotRefute)
            assert outcome.attempts > 0


class TestSerialization:
    def test_transcript_jsonl(self):
        import json

        session = AdversarySession(P60)
        session.answer_eval(0, Fraction(1, 3))
        session.answer_cut(Fraction(1, 3), 0.25)
        session.answer_cut(Fraction(2, 3), 1.5)  # no answer
        lines = [json.loads(line) for line in session.transcript_lines()]
        assert len(lines) == 3
        assert lines[0]["kind"] == "eval" and lines[0]["args"] == ["0", "1/3"]
        assert lines[0]["reveals"] and all(
            set(r) == {"path", "labels"} for r in lines[0]["reveals"]
        )
        assert lines[2]["answer"] is None

    def test_refutation_json_fields(self):
        session = AdversarySession(P60)
        cell = Fraction(1, P60.n)
        outcome = session.refute_claim(Piece.of((0, cell)))
        obj = outcome.to_json()
        assert obj["refuted"] is True
        assert obj["violated"] == "value"
        assert obj["claimed_piece"] == [["0", str(cell)]]
        assert obj["completion_seed"] is not None
        assert obj["value"] < obj["value_bound"]


class TestClaimLeaves:
    def test_single_cell(self):
        cell = Fraction(1, P11.n)
        piece = Piece.of((cell * 5, cell * 6))
        assert claim_leaves(piece, P11) == [tuple_digits(5)]

    def test_straddle(self):
        cell = Fraction(1, P11.n)
        piece = Piece.of((cell * 5 + cell / 2, cell * 6 + cell / 2))
        assert claim_leaves(piece, P11) == [tuple_digits(5), tuple_digits(6)]


def tuple_digits(index):
    from fairslice.valuetree import digits_of_index

    return digits_of_index(index, 11)


class TestStrategiesAndGame:
    @pytest.mark.parametrize("name", sorted(STRATEGIES))
    def test_within_budget_and_refuted_at_threshold(self, name):
        for seed in range(6):
            report = run_heavy_piece_game(P60, name, budget=4, seed=seed)
            assert report.queries_used <= 4
            assert report.threshold == 4
            assert report.refuted
            assert all(
                h <= 2 * (i + 1) for i, h in enumerate(report.max_revealed_heavy_trace)
            )

    def test_zero_budget_blind_claim_refuted(self):
        report = run_heavy_piece_game(P60, "blind", budget=0, seed=1)
        assert report.queries_used == 0
        assert report.refuted

    def test_claim_width_is_legal(self):
        for name in STRATEGIES:
            report = run_heavy_piece_game(P60, name, budget=4, seed=2)
            assert report.claim.width <= Fraction(1, P60.n)

    def test_unknown_strategy(self):
        with pytest.raises(ValueError):
            run_heavy_piece_game(P60, "psychic", budget=4, seed=0)

    def test_report_json(self):
        report = run_heavy_piece_game(P60, "greedy-dense", budget=4, seed=3)
        obj = report.to_json()
        assert obj["k"] == 60 and obj["threshold"] == 4
        assert obj["outcome"]["refuted"] is True
        assert obj["within_threshold"] is True
