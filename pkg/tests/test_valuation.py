from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from fairslice.geometry import Piece
from fairslice.valuation import (
    DensityBounds,
    PiecewiseConstantValuation,
    density_of_piece,
    random_dense_valuation,
    verify_dense,
)

from oracles import bisect_cut, grid_integral

# The worked example used throughout: density 3/2 on [0, 1/2], 1/2 on [1/2, 1].
STEP = PiecewiseConstantValuation.from_segments(
    [(Fraction(1, 2), Fraction(3, 2)), (Fraction(1), Fraction(1, 2))]
)
STEP_SEGMENTS = STEP.segments()
UNIFORM = PiecewiseConstantValuation.uniform()

unit_fractions = st.fractions(min_value=0, max_value=1, max_denominator=48)


class TestConstruction:
    def test_rejects_unnormalized_mass(self):
        with pytest.raises(ValueError, match="mass"):
            PiecewiseConstantValuation.from_segments([(Fraction(1), Fraction(1, 2))])

    def test_rejects_bad_breakpoints(self):
        with pytest.raises(ValueError):
            PiecewiseConstantValuation([0, Fraction(1, 2), Fraction(1, 2), 1], [1, 1, 1])
        with pytest.raises(ValueError):
            PiecewiseConstantValuation([Fraction(1, 4), 1], [Fraction(4, 3)])

    def test_rejects_negative_density(self):
        with pytest.raises(ValueError):
            PiecewiseConstantValuation([0, Fraction(1, 2), 1], [Fraction(3), Fraction(-1)])

    def test_positivity_flag(self):
        assert STEP.is_positive
        with_zero = PiecewiseConstantValuation(
            [0, Fraction(1, 2), 1], [Fraction(2), Fraction(0)]
        )
        assert not with_zero.is_positive


class TestEval:
    def test_worked_example_against_grid_oracle(self):
        # expected value derived with the midpoint-grid oracle, then frozen
        oracle = grid_integral(STEP_SEGMENTS, 0, 0.75)
        assert abs(oracle - 7 / 8) < 1e-4
        assert STEP.eval(0, Fraction(3, 4)) == Fraction(7, 8)

    def test_uniform_is_width(self):
        assert UNIFORM.eval(Fraction(1, 7), Fraction(5, 7)) == Fraction(4, 7)

    def test_normalization(self):
        assert STEP.eval(0, 1) == 1
        assert UNIFORM.eval(0, 1) == 1

    def test_argument_errors(self):
        with pytest.raises(ValueError):
            STEP.eval(Fraction(3, 4), Fraction(1, 4))
        with pytest.raises(ValueError):
            STEP.eval(0, Fraction(5, 4))

    @given(x=unit_fractions, y=unit_fractions, z=unit_fractions)
    def test_additivity(self, x, y, z):
        x, y, z = sorted((x, y, z))
        assert STEP.eval(x, z) == STEP.eval(x, y) + STEP.eval(y, z)


class TestCut:
    def test_worked_example_against_bisection_oracle(self):
        oracle = bisect_cut(STEP_SEGMENTS, 0, 0.75)
        assert abs(oracle - 0.5) < 1e-6
        assert STEP.cut(0, Fraction(3, 4)) == Fraction(1, 2)

    def test_uniform_shifts(self):
        assert UNIFORM.cut(Fraction(1, 5), Fraction(1, 2)) == Fraction(7, 10)

    def test_no_answer_beyond_remaining_mass(self):
        assert UNIFORM.cut(Fraction(1, 2), Fraction(3, 4)) is None

    def test_zero_density_tail_answers_at_earliest_point(self):
        v = PiecewiseConstantValuation.from_segments(
            [(Fraction(1, 4), 2), (Fraction(1, 2), 0), (1, 1)]
        )
        assert v.cut(0, Fraction(1, 2)) == Fraction(1, 4)
        assert v.cut(0, 1) == 1
        assert v.cut(Fraction(1, 4), 0) == Fraction(1, 4)

    def test_full_mass_with_trailing_zeros(self):
        v = PiecewiseConstantValuation.from_segments([(Fraction(1, 2), 2), (1, 0)])
        assert v.cut(0, 1) == Fraction(1, 2)

    @given(x=unit_fractions, y=unit_fractions)
    def test_cut_inverts_eval_on_positive(self, x, y):
        x, y = sorted((x, y))
        assert STEP.cut(x, STEP.eval(x, y)) == y

    @given(x=unit_fractions, r=st.fractions(min_value=0, max_value=1, max_denominator=48))
    def test_eval_inverts_cut_when_answered(self, x, r):
        y = STEP.cut(x, r)
        if y is not None:
            assert STEP.eval(x, y) == r


class TestDensity:
    def test_uniform_density_one(self):
        assert density_of_piece(UNIFORM, Piece.of(("1/8", "3/8"), ("1/2", "5/8"))) == 1

    def test_worked_example_densities(self):
        # both values cross-checked against the grid oracle in oracles.py
        assert density_of_piece(STEP, Piece.of((0, "1/2"))) == Fraction(3, 2)
        assert density_of_piece(STEP, Piece.of(("1/2", "1"))) == Fraction(1, 2)

    def test_zero_width_rejected(self):
        with pytest.raises(ValueError):
            density_of_piece(STEP, Piece())


class TestDensityBounds:
    def test_validation(self):
        with pytest.raises(ValueError):
            DensityBounds(Fraction(3, 2), None)
        with pytest.raises(ValueError):
            DensityBounds(Fraction(1, 2), Fraction(1, 2))

    def test_verify_dense(self):
        assert verify_dense(UNIFORM, DensityBounds(1, 1))
        assert verify_dense(STEP, DensityBounds(0, 2))
        assert not verify_dense(STEP, DensityBounds(1, None))


class TestGenerator:
    def test_single_segment_is_uniform(self):
        got = random_dense_valuation(1, DensityBounds(0, 2), seed=9)
        assert got == UNIFORM

    def test_deterministic_in_seed(self):
        a = random_dense_valuation(8, DensityBounds(0, 2), seed=42)
        b = random_dense_valuation(8, DensityBounds(0, 2), seed=42)
        assert a == b
        assert a != random_dense_valuation(8, DensityBounds(0, 2), seed=43)

    def test_respects_band_and_positivity(self):
        for seed in range(25):
            v = random_dense_valuation(8, DensityBounds(0, 2), seed=seed)
            assert verify_dense(v, DensityBounds(0, 2))
            assert v.is_positive

    def test_half_to_infinity_band(self):
        for seed in range(10):
            v = random_dense_valuation(8, DensityBounds(Fraction(1, 2), None), seed=seed)
            assert all(d >= Fraction(1, 2) for d in v.densities)

    def test_segment_count(self):
        v = random_dense_valuation(5, DensityBounds(0, 2), seed=3)
        assert len(v.densities) == 5

    def test_non_positive_generation_allowed(self):
        # with the positivity requirement dropped, zero-density segments
        # eventually appear (deterministic given the seed scan)
        found = False
        for seed in range(200):
            v = random_dense_valuation(8, DensityBounds(0, None), seed=seed, positive=False)
            assert verify_dense(v, DensityBounds(0, None))
            if not v.is_positive:
                found = True
                break
        assert found


class TestJson:
    def test_roundtrip(self):
        obj = STEP.to_json()
        assert obj == {
            "type": "piecewise_constant",
            "segments": [
                {"end": "1/2", "density": "3/2"},
                {"end": "1", "density": "1/2"},
            ],
        }
        assert PiecewiseConstantValuation.from_json(obj) == STEP

    def test_rejects_non_normalized(self):
        with pytest.raises(ValueError):
            PiecewiseConstantValuation.from_json(
                {"type": "piecewise_constant", "segments": [{"end": "1", "density": "2"}]}
            )

    def test_rejects_bad_final_end(self):
        with pytest.raises(ValueError, match="final"):
            PiecewiseConstantValuation.from_json(
                {"type": "piecewise_constant", "segments": [{"end": "1/2", "density": "2"}]}
            )

    def test_field_diagnostics(self):
        with pytest.raises(ValueError, match=r"segments\[0\]"):
            PiecewiseConstantValuation.from_json(
                {"type": "piecewise_constant", "segments": [{"end": "x/y", "density": "1"}]}
            )


def test_subinterval_densities_stay_in_band():
    # every subinterval of a positive (0,2)-dense valuation has density in
    # (0, 2]: checked exactly on the segments themselves and on random
    # intervals (whose density is a convex mix of segment densities)
    rng = __import__("random").Random(77)
    for seed in range(20):
        v = random_dense_valuation(6, DensityBounds(0, 2), seed=seed)
        for left, right, _ in v.segments():
            d = density_of_piece(v, Piece.of((left, right)))
            assert 0 < d <= 2
        for _ in range(10):
            a, b = sorted(Fraction(rng.randrange(0, 121), 120) for _ in range(2))
            if a < b:
                d = density_of_piece(v, Piece.of((a, b)))
                assert 0 < d <= 2


@settings(max_examples=30)
@given(seed=st.integers(min_value=0, max_value=10_000))
def test_generated_valuations_agree_with_grid_oracle(seed):
    v = random_dense_valuation(4, DensityBounds(0, 2), seed=seed)
    got = v.eval(Fraction(1, 8), Fraction(7, 8))
    oracle = grid_integral(v.segments(), Fraction(1, 8), Fraction(7, 8), steps=40_000)
    assert abs(float(got) - oracle) < 2e-3
