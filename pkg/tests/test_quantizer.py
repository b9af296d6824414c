import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ifsq.quantizer import (
    IFSQ,
    TANH,
    BoundParams,
    LevelSpec,
    bound,
    bound_derivative,
    codebook_size,
    decode_index,
    dequantize,
    encode_index,
    quantize,
    quantize_ste,
    round_to_grid,
)

from oracles import central_difference, enumerate_codes

# 2*sigmoid(1.6) - 1 evaluated with mpmath at 40 digits
BOUND_AT_ONE_IFSQ = 0.66403677026784896368
# d/dz (2*sigmoid(1.6 z) - 1) at z=3, mpmath numerical derivative
DERIV_AT_THREE_IFSQ = 0.025907019473054390781


class TestBoundParams:
    def test_presets(self):
        assert (IFSQ.amplitude, IFSQ.slope, IFSQ.offset) == (2.0, 1.6, -1.0)
        assert TANH.output_range == (-1.0, 1.0)

    @pytest.mark.parametrize("kwargs", [
        {"amplitude": 0.0}, {"amplitude": -1.0}, {"slope": 0.0}, {"slope": -2.0},
        {"offset": float("nan")},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            BoundParams(**kwargs)

    def test_output_range_custom(self):
        assert BoundParams(3.0, 1.0, 0.5).output_range == (0.5, 3.5)


class TestBound:
    def test_center(self):
        assert bound(0.0, IFSQ) == 0.0

    def test_tanh_preset_at_one(self):
        assert bound(1.0, TANH) == pytest.approx(math.tanh(1.0), abs=1e-15)
        assert bound(1.0, TANH) == pytest.approx(0.761594, abs=1e-6)

    def test_ifsq_at_one_golden(self):
        assert bound(1.0, IFSQ) == pytest.approx(BOUND_AT_ONE_IFSQ, abs=1e-12)

    def test_tanh_identity_dense(self):
        z = np.linspace(-8, 8, 10_000)
        assert np.max(np.abs(bound(z, TANH) - np.tanh(z))) < 1e-12

    def test_strictly_increasing(self):
        z = np.linspace(-15, 15, 10_001)
        assert np.all(np.diff(bound(z, IFSQ)) > 0)

    def test_range(self):
        p = BoundParams(3.0, 0.7, 0.5)
        y = bound(np.linspace(-30, 30, 101), p)
        assert np.all((y >= 0.5) & (y <= 3.5))

    @pytest.mark.parametrize("bad", [float("nan"), float("inf"), -float("inf")])
    def test_rejects_non_finite(self, bad):
        with pytest.raises(ValueError):
            bound(bad)
        with pytest.raises(ValueError):
            bound([0.0, bad])


class TestBoundDerivative:
    def test_center_values(self):
        assert bound_derivative(0.0, IFSQ) == pytest.approx(0.8, abs=1e-15)
        assert bound_derivative(0.0, TANH) == pytest.approx(1.0, abs=1e-15)

    def test_golden_at_three(self):
        assert bound_derivative(3.0, IFSQ) == pytest.approx(DERIV_AT_THREE_IFSQ, rel=1e-12)

    def test_matches_central_difference(self):
        fd = central_difference(lambda t: bound(t, IFSQ), 3.0)
        assert bound_derivative(3.0, IFSQ) == pytest.approx(fd, rel=1e-6)

    @settings(max_examples=200, deadline=None)
    # |slope * z| <= 10 keeps the derivative well above the ~2e-11 round-off of the difference
    @given(z=st.floats(-4, 4), slope=st.floats(0.2, 2.5))
    def test_finite_difference_property(self, z, slope):
        p = BoundParams.with_slope(slope)
        fd = central_difference(lambda t: bound(t, p), z)
        assert bound_derivative(z, p) == pytest.approx(fd, rel=1e-6)


class TestQuantize:
    def test_center_maps_to_middle(self):
        q = quantize([0.0, 0.0, 0.0, 0.0], LevelSpec.uniform(9, 4))
        assert q.digits.tolist() == [4, 4, 4, 4]
        assert q.dequantized.tolist() == [0.0, 0.0, 0.0, 0.0]

    def test_saturates_top(self):
        assert quantize([10.0], LevelSpec([9])).digits.tolist() == [8]

    def test_hand_evaluated_tanh_l3(self):
        # (L-1)/2 * (tanh(-0.5) + 1) = 0.5379 -> 1 ;  (tanh(0.5) + 1) = 1.4621 -> 1
        q = quantize([-0.5, 0.5], LevelSpec([3, 3]), TANH)
        assert q.digits.tolist() == [1, 1]

    def test_hand_evaluated_tanh_l5(self):
        # 2 * (tanh(-1) + 1) = 0.4768 -> 0 ; 2 * (tanh(0.3) + 1) = 2.5826 -> 3
        q = quantize([-1.0, 0.3], LevelSpec([5, 5]), TANH)
        assert q.digits.tolist() == [0, 3]

    def test_ties_round_away_from_zero(self):
        levels = LevelSpec([3])
        # y = -0.5 scales to exactly 0.5, y = 0.5 to exactly 1.5
        assert round_to_grid([[-0.5], [0.5]], levels)[:, 0].tolist() == [1, 2]
        # scales to 0.49999999999999994, which floor(x + 0.5) would send to 1
        assert round_to_grid([-(2.0**-53)], LevelSpec([2])).tolist() == [0]

    def test_batched(self, rng):
        z = rng.standard_normal((50, 3))
        levels = LevelSpec([3, 5, 9])
        q = quantize(z, levels)
        assert q.digits.shape == (50, 3)
        for row, digits in zip(z, q.digits):
            assert quantize(row, levels).digits.tolist() == digits.tolist()

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            quantize([0.0, 0.0], LevelSpec([9]))

    def test_non_finite(self):
        with pytest.raises(ValueError):
            quantize([float("nan")], LevelSpec([9]))

    def test_rejects_bound_leaving_unit_interval(self):
        with pytest.raises(ValueError):
            quantize([0.0], LevelSpec([9]), BoundParams(3.0, 1.0, -1.0))

    @pytest.mark.parametrize("params", [IFSQ, TANH])
    @pytest.mark.parametrize("L", [2, 3, 9, 17, 256])
    def test_saturation_no_overflow(self, params, L):
        z = np.array([-1e6, -500.0, -41.0, 41.0, 500.0, 1e6])
        q = quantize(z[:, None], LevelSpec([L]), params)
        assert q.digits[:, 0].tolist() == [0, 0, 0, L - 1, L - 1, L - 1]
        assert np.all(np.isfinite(q.dequantized))

    @settings(max_examples=100, deadline=None)
    @given(data=st.lists(st.floats(-20, 20), min_size=2, max_size=50),
           L=st.integers(2, 64))
    def test_monotone_in_input(self, data, L):
        z = np.sort(np.array(data))[:, None]
        digits = quantize(z, LevelSpec([L])).digits[:, 0]
        assert np.all(np.diff(digits) >= 0)


class TestDequantize:
    def test_examples(self):
        assert dequantize([4], LevelSpec([9])).tolist() == [0.0]
        assert dequantize([0], LevelSpec([3])).tolist() == [-1.0]
        assert dequantize([2, 2, 1, 0], LevelSpec.uniform(3, 4)).tolist() == [1.0, 1.0, 0.0, -1.0]

    def test_formula_exact(self):
        levels = LevelSpec([2, 4, 9, 17])
        q = np.array([1, 3, 7, 5])
        expect = [(qj - (L - 1) / 2) * (2 / (L - 1)) for qj, L in zip(q, levels.levels)]
        assert dequantize(q, levels).tolist() == expect

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            dequantize([9], LevelSpec([9]))
        with pytest.raises(ValueError):
            dequantize([-1], LevelSpec([9]))

    @settings(max_examples=200, deadline=None)
    @given(levels=st.lists(st.integers(2, 40), min_size=1, max_size=6), data=st.data())
    def test_grid_fixed_point(self, levels, data):
        spec = LevelSpec(levels)
        q = [data.draw(st.integers(0, L - 1)) for L in levels]
        y = dequantize(q, spec)
        assert np.all((y >= -1) & (y <= 1))
        assert round_to_grid(y, spec).tolist() == q

    def test_zero_attainable_for_odd(self):
        for L in (3, 5, 9, 17, 33):
            assert 0.0 in dequantize(np.arange(L)[:, None], LevelSpec([L])).ravel()


class TestSTE:
    def test_center(self):
        value, deriv = quantize_ste([0.0], LevelSpec([9]), IFSQ)
        assert value.tolist() == [0.0]
        assert deriv.tolist() == [pytest.approx(0.8, abs=1e-15)]

    def test_value_matches_dequantize(self, rng):
        z = rng.normal(0, 2, (200, 4))
        levels = LevelSpec([3, 5, 9, 17])
        value, _ = quantize_ste(z, levels)
        q = quantize(z, levels)
        assert np.array_equal(value, dequantize(q.digits, levels))

    def test_derivative_is_bound_derivative(self, rng):
        z = rng.normal(0, 3, 1000)
        _, deriv = quantize_ste(z[:, None], LevelSpec([17]))
        assert np.array_equal(deriv[:, 0], bound_derivative(z))

    def test_unrounded_path_finite_difference(self):
        # bound -> scale by half width -> divide by half width, no rounding
        half = (5 - 1) / 2

        def unrounded(t):
            return bound(t, TANH) * half / half

        _, deriv = quantize_ste([0.7], LevelSpec([5]), TANH)
        assert deriv[0] == pytest.approx(central_difference(unrounded, 0.7), rel=1e-6)


class TestLevelSpec:
    def test_from_bits(self):
        assert LevelSpec.from_bits(1, 4).levels == (3, 3, 3, 3)
        assert LevelSpec.from_bits(4, 2).levels == (17, 17)

    def test_rejects_small_level(self):
        with pytest.raises(ValueError):
            LevelSpec([3, 1])

    def test_rejects_overflow(self):
        with pytest.raises(OverflowError):
            LevelSpec([2] * 63)
        assert codebook_size(LevelSpec([2] * 62)) == 2**62

    def test_even_levels_allowed(self):
        assert dequantize([0, 1], LevelSpec([2, 2])).tolist() == [-1.0, 1.0]


class TestCodebookSize:
    @pytest.mark.parametrize("levels, size", [
        ([3, 3, 3, 3], 81), ([], 1), ([2, 5, 17], 170),
    ])
    def test_examples(self, levels, size):
        assert codebook_size(LevelSpec(levels)) == size


class TestIndexCodec:
    def test_worked_example(self):
        assert encode_index([2, 2, 1, 0], LevelSpec.uniform(3, 4)) == 75

    def test_zero(self):
        assert encode_index([0, 0, 0], LevelSpec([7, 2, 5])) == 0
        assert decode_index(0, LevelSpec([7, 2, 5])).tolist() == [0, 0, 0]

    def test_mixed_radix_by_enumeration(self):
        codes = enumerate_codes([2, 5])
        assert codes.index((1, 2)) == 7
        assert encode_index([1, 2], LevelSpec([2, 5])) == 7

    def test_decode_worked_example(self):
        assert decode_index(75, LevelSpec.uniform(3, 4)).tolist() == [2, 2, 1, 0]

    def test_exhaustive_l3_d4(self):
        levels = LevelSpec.uniform(3, 4)
        codes = enumerate_codes(levels.levels)
        assert len(codes) == 81
        for i, code in enumerate(codes):
            assert encode_index(code, levels) == i
            assert tuple(decode_index(i, levels)) == code

    def test_batched_matches_scalar(self):
        levels = LevelSpec([4, 3, 5])
        idx = np.arange(codebook_size(levels))
        digits = decode_index(idx, levels)
        assert digits.shape == (60, 3)
        assert np.array_equal(encode_index(digits, levels), idx)

    def test_errors(self):
        levels = LevelSpec([3, 3])
        with pytest.raises(ValueError):
            encode_index([3, 0], levels)
        with pytest.raises(ValueError):
            encode_index([1, 1, 1], levels)
        with pytest.raises(ValueError):
            decode_index(9, levels)
        with pytest.raises(ValueError):
            decode_index(-1, levels)

    def test_large_codebook_near_int64(self):
        levels = LevelSpec([3, 2**61])
        top = [2, 2**61 - 1]
        idx = encode_index(top, levels)
        assert idx == codebook_size(levels) - 1 == 3 * 2**61 - 1
        assert decode_index(idx, levels).tolist() == top

    @settings(max_examples=150, deadline=None)
    @given(levels=st.lists(st.integers(2, 12), min_size=0, max_size=5))
    def test_bijection_property(self, levels):
        spec = LevelSpec(levels)
        size = codebook_size(spec)
        idx = np.arange(size)
        digits = decode_index(idx, spec)
        assert np.array_equal(encode_index(digits, spec), idx)
        # lexicographic order: decode(0..size-1) enumerates all codes once
        assert [tuple(d) for d in digits] == enumerate_codes(levels)
