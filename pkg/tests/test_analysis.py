# tests/test_analysis.py
import math
from unittest.mock import patch

import numpy as np
import pytest

from models.chain_complex import Chain, boundary, build_grid_complex, mass
from models.shapes import BinaryShape, DiskShape, PolygonShape
from services.analysis import (agreement, align_shapes, compare_methods, disk_flatnorm, euclidean_length,
                               flat_distance, input_digest, lambda_sweep, shape_flatnorm_lp,
                               square_flatnorm_euclid, square_flatnorm_l1, square_rounding_threshold)
from services.flatnorm_graphcut import flatnorm_graphcut
from services.flatnorm_lp import flatnorm_lp
from services.shape_io import (boundary_chain, complex_for_shape, rasterize, symmetric_difference_area,
                               to_2chain, union)
from utils.config import Config
from utils.errors import InvalidArgumentError, SolverResourceError


def _block(size, i0, j0, side):
    bits = np.zeros((size, size), dtype=bool)
    bits[j0:j0 + side, i0:i0 + side] = True
    return BinaryShape(bits)


class TestOracles:

    def test_disk_regimes(self):
        assert disk_flatnorm(1.0, 1.0) == pytest.approx(math.pi)
        assert disk_flatnorm(1.0, 3.0) == pytest.approx(2 * math.pi)
        assert disk_flatnorm(2.0, 1.0) == pytest.approx(4 * math.pi)

    def test_square_l1(self):
        assert square_flatnorm_l1(2.0, 0.5) == pytest.approx(2.0)
        assert square_flatnorm_l1(2.0, 8.0) == pytest.approx(8.0)

    def test_rounded_square(self):
        threshold = square_rounding_threshold(1.0)
        assert threshold == pytest.approx(2 + math.sqrt(math.pi))
        assert square_flatnorm_euclid(1.0, 8.0) == pytest.approx(4 + (math.pi - 4) / 8)
        with pytest.raises(InvalidArgumentError):
            square_flatnorm_euclid(1.0, threshold / 2)

    def test_invalid_arguments(self):
        with pytest.raises(InvalidArgumentError):
            disk_flatnorm(-1.0, 1.0)
        with pytest.raises(InvalidArgumentError):
            square_flatnorm_l1(1.0, 0.0)


class TestAlignShapes:

    def test_whole_pixel_offset(self):
        a = BinaryShape(np.ones((2, 2), dtype=bool), 0.5, (0.0, 0.0))
        b = BinaryShape(np.ones((2, 2), dtype=bool), 0.5, (1.0, 0.5))
        a2, b2 = align_shapes(a, b)
        assert a2.bits.shape == b2.bits.shape == (3, 4)
        assert a2.origin == b2.origin == (0.0, 0.0)
        assert a2.pixel_count == b2.pixel_count == 4
        assert not (a2.bits & b2.bits).any()

    def test_same_grid_is_unchanged(self, square_shape):
        a2, b2 = align_shapes(square_shape, square_shape)
        assert a2 is square_shape and b2 is square_shape

    def test_fractional_offset(self):
        a = BinaryShape(np.ones((2, 2), dtype=bool))
        b = BinaryShape(np.ones((2, 2), dtype=bool), 1.0, (0.5, 0.0))
        with pytest.raises(InvalidArgumentError):
            align_shapes(a, b)

    def test_spacing_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            align_shapes(BinaryShape(np.ones((2, 2), dtype=bool)),
                         BinaryShape(np.ones((2, 2), dtype=bool), 0.5))


class TestFlatDistance:

    @pytest.mark.parametrize('method', ['lp', 'graphcut'])
    def test_identical_shapes(self, square_shape, method):
        result = flat_distance(square_shape, square_shape, 1.0, method=method, stencil='N4')
        assert result.value == 0.0

    def test_symmetry_and_triangle_inequality(self, rng):
        for _ in range(6):
            a, b, c = (BinaryShape(rng.random((6, 6)) < 0.5) for _ in range(3))
            lam = float(rng.choice([0.5, 1.0, 2.0]))
            ab = flat_distance(a, b, lam).value
            assert flat_distance(b, a, lam).value == pytest.approx(ab, abs=1e-9)
            bc = flat_distance(b, c, lam).value
            assert flat_distance(a, c, lam).value <= ab + bc + 1e-9

    @pytest.mark.parametrize('lam', [0.25, 1.0, 3.0])
    def test_layered_cut_matches_lp(self, lam):
        """Overlapping squares: the two level cuts add up to the LP optimum"""
        a, b = _block(10, 1, 1, 5), _block(10, 3, 2, 5)
        lp = flat_distance(a, b, lam, method='lp')
        layered = flat_distance(a, b, lam, method='graphcut', stencil='N4')
        assert layered.layered
        assert set(layered.diagnostics) == {'upper', 'lower'}
        assert layered.value == pytest.approx(lp.value, abs=1e-6)

    def test_layered_decomposition(self):
        a, b = _block(10, 1, 1, 5), _block(10, 3, 2, 5)
        result = flat_distance(a, b, 1.0, method='graphcut', stencil='N4')
        assert result.residual_chain + boundary(result.s_chain) == result.input_chain

    def test_shifted_disk(self):
        a = rasterize(DiskShape((0.0, 0.0), 1.0), 64)
        b = rasterize(DiskShape((0.05, 0.0), 1.0), 64)
        result = flat_distance(a, b, 1.0, method='graphcut', stencil='N16')
        a2, b2 = align_shapes(a, b)
        assert result.value <= symmetric_difference_area(a2, b2) + 1e-9
        assert result.value <= 0.21

    def test_disjoint_disks_fill(self):
        a = rasterize(DiskShape((0.0, 0.0), 1.0), 32)
        b = rasterize(DiskShape((3.0, 0.0), 1.0), 32)
        result = flat_distance(a, b, 0.1, method='graphcut', stencil='N16')
        assert result.value == pytest.approx(0.2 * math.pi, rel=0.03)

    @pytest.mark.slow
    def test_fine_shifted_disk(self):
        a = rasterize(DiskShape((0.0, 0.0), 1.0), 256)
        b = rasterize(DiskShape((0.05, 0.0), 1.0), 256)
        result = flat_distance(a, b, 1.0, method='graphcut', stencil='N16')
        assert result.value <= 0.21
        assert result.value / mass(result.input_chain) < 0.02

    @pytest.mark.slow
    def test_metric_axioms_on_rectangle_unions(self, rng):
        def random_shape():
            bits = np.zeros((16, 16), dtype=bool)
            for _ in range(2):
                x0, y0 = rng.integers(0, 12, size=2)
                w, h = rng.integers(2, 6, size=2)
                bits[y0:y0 + h, x0:x0 + w] = True
            return BinaryShape(bits)

        for _ in range(50):
            a, b, c = random_shape(), random_shape(), random_shape()
            lam = float(rng.choice([0.25, 1.0, 4.0]))
            ab = flat_distance(a, b, lam, method='lp').value
            assert flat_distance(b, a, lam, method='lp').value == pytest.approx(ab, abs=1e-6)
            bc = flat_distance(b, c, lam, method='lp').value
            assert flat_distance(a, c, lam, method='lp').value <= ab + bc + 1e-6

    @pytest.mark.slow
    def test_layered_cut_matches_lp_on_random_pairs(self, rng):
        for _ in range(20):
            a, b = (BinaryShape(rng.random((16, 16)) < 0.4) for _ in range(2))
            lam = float(rng.choice([0.5, 1.0, 2.0]))
            lp = flat_distance(a, b, lam, method='lp')
            layered = flat_distance(a, b, lam, method='graphcut', stencil='N4')
            assert layered.value == pytest.approx(lp.value, abs=1e-6)

    def test_oversized_lp_goes_to_layered_cut(self):
        a, b = _block(10, 1, 1, 5), _block(10, 3, 2, 5)
        expected = flat_distance(a, b, 1.0, method='lp')
        with patch.object(Config, 'LP_MAX_CELLS', 50):
            routed = flat_distance(a, b, 1.0, method='lp')
        assert 'routed_from' not in expected.diagnostics
        assert routed.diagnostics['routed_from'] == 'lp'
        assert routed.method == 'graphcut' and routed.stencil == 'N4'
        assert routed.value == pytest.approx(expected.value, abs=1e-6)

    def test_oversized_triangulated_lp_is_refused(self):
        a, b = _block(10, 1, 1, 5), _block(10, 3, 2, 5)
        with patch.object(Config, 'LP_MAX_CELLS', 50):
            with pytest.raises(SolverResourceError):
                flat_distance(a, b, 1.0, method='lp', topology='right-triangulated')

    def test_unknown_method(self, square_shape):
        with pytest.raises(InvalidArgumentError):
            flat_distance(square_shape, square_shape, 1.0, method='both')


class TestLambdaSweep:

    def test_lp_sweep_matches_independent_solves(self, square_shape):
        lambdas = (0.25, 0.5, 1.0, 2.0)
        curve = lambda_sweep(square_shape, lambdas)
        k = complex_for_shape(square_shape)
        t = boundary_chain(square_shape, k)
        assert curve.values == pytest.approx([flatnorm_lp(k, t, lam).value for lam in lambdas], abs=1e-9)
        assert curve.values == pytest.approx([16.0, 32.0, 32.0, 32.0], abs=1e-9)
        assert curve.is_concave()
        assert curve.method == 'lp'
        assert curve.stencil is None

    def test_chain_input(self):
        k = build_grid_complex(2, 2, 1.0)
        t = boundary(Chain.from_coefficients(k, 2, {f: 1 for f in range(4)}))
        curve = lambda_sweep(t, [0.1, 1.0, 10.0])
        assert curve.values == pytest.approx([0.4, 4.0, 8.0], abs=1e-9)
        assert curve.input_digest == input_digest(t)

    @pytest.mark.parametrize('method', ['lp', 'graphcut'])
    def test_empty_input(self, method):
        curve = lambda_sweep(BinaryShape(np.zeros((4, 4), dtype=bool)), [0.5, 1.0], method=method)
        assert curve.values == (0.0, 0.0)

    def test_thread_count_does_not_change_values(self, rng):
        shape = BinaryShape(rng.random((24, 24)) < 0.5)
        lambdas = [0.25 * n for n in range(1, 13)]
        single = lambda_sweep(shape, lambdas, method='graphcut', stencil='N16', threads=1)
        pooled = lambda_sweep(shape, lambdas, method='graphcut', stencil='N16', threads=4)
        assert single == pooled

    def test_disk_kink_near_two(self):
        shape = rasterize(DiskShape((0.0, 0.0), 1.0), 32, padding=2)
        lambdas = [0.25 * n for n in range(2, 17)]
        curve = lambda_sweep(shape, lambdas, method='graphcut', stencil='N16')
        assert curve.stencil == 'N16'
        assert abs(curve.kink_location() - 2.0) <= 0.25

    @pytest.mark.parametrize('lambdas', [[], [1.0, 1.0], [2.0, 1.0], [-1.0, 1.0], [1.0, float('inf')]])
    def test_invalid_lambda_lists(self, square_shape, lambdas):
        with pytest.raises(InvalidArgumentError):
            lambda_sweep(square_shape, lambdas)

    def test_oversized_lp_sweep_uses_n4_cut(self, square_shape):
        with patch.object(Config, 'LP_MAX_CELLS', 100):
            curve = lambda_sweep(square_shape, [0.25, 1.0])
        assert curve.values == pytest.approx([16.0, 32.0], abs=1e-9)
        assert (curve.method, curve.stencil) == ('graphcut', 'N4')

    def test_graphcut_needs_shape(self):
        k = build_grid_complex(2, 2, 1.0)
        with pytest.raises(InvalidArgumentError):
            lambda_sweep(Chain.zero(k, 1), [1.0], method='graphcut')

    def test_digest_tracks_content(self, square_shape):
        assert input_digest(square_shape) == input_digest(square_shape.with_bits(square_shape.bits))
        flipped = square_shape.bits.copy()
        flipped[0, 0] = True
        assert input_digest(square_shape) != input_digest(square_shape.with_bits(flipped))


class TestEuclideanLength:

    def test_zero_chain(self):
        k = build_grid_complex(3, 3, 1.0)
        assert euclidean_length(Chain.zero(k, 1)) == 0.0

    @pytest.mark.parametrize('side', range(1, 9))
    def test_axis_aligned_square_is_exact(self, side):
        shape = _block(side + 4, 2, 2, side)
        k = complex_for_shape(shape)
        assert euclidean_length(boundary_chain(shape, k)) == pytest.approx(4 * side, abs=1e-9)

    def test_rectangle_is_exact(self):
        bits = np.zeros((7, 24), dtype=bool)
        bits[2:5, 2:22] = True
        shape = BinaryShape(bits, 0.5)
        k = complex_for_shape(shape)
        assert euclidean_length(boundary_chain(shape, k)) == pytest.approx(0.5 * 46, abs=1e-9)

    def test_disk(self):
        shape = rasterize(DiskShape((0.0, 0.0), 1.0), 256, padding=2)
        k = complex_for_shape(shape)
        assert euclidean_length(boundary_chain(shape, k)) == pytest.approx(2 * math.pi, rel=0.02)

    def test_shrinking_circle_family(self):
        """Circles of radius 1/2, 1/4, 1/8 side by side, sampled 32 pixels per smallest radius"""
        bounds = (-0.5, -0.5, 2.625, 0.5)
        disks = [rasterize(DiskShape(center, radius), 256, bounds=bounds, padding=2)
                 for center, radius in (((0.0, 0.0), 0.5), ((1.5, 0.0), 0.25), ((2.5, 0.0), 0.125))]
        family = disks[0]
        for disk in disks[1:]:
            family = union(family, disk)
        k = complex_for_shape(family)
        t = boundary_chain(family, k)
        assert euclidean_length(t) == pytest.approx(2 * math.pi * (1 - 2 ** -3), rel=0.02)
        assert mass(t) == pytest.approx(sum(mass(boundary_chain(d, k)) for d in disks), abs=1e-9)

    def test_disk_plus_upper_half_disk(self):
        """Adding the upper half disk doubles the coefficient on the upper half only"""
        bounds = (-1.0, -1.0, 1.0, 1.0)
        disk = rasterize(DiskShape((0.0, 0.0), 1.0), 64, bounds=bounds, padding=2)
        upper = disk.with_bits(disk.bits & rasterize(
            PolygonShape.rectangle(-2.0, 0.0, 2.0, 2.0), 64, bounds=bounds, padding=2).bits)
        k = complex_for_shape(disk)
        s = to_2chain(disk, k) + to_2chain(upper, k)
        assert np.count_nonzero(s.values == 2) == upper.pixel_count
        assert np.count_nonzero(s.values == 1) == disk.pixel_count - upper.pixel_count
        assert mass(s) == pytest.approx(1.5 * math.pi, rel=0.02)
        assert euclidean_length(boundary(s)) == pytest.approx(3 * math.pi + 2, rel=0.02)

    @pytest.mark.slow
    def test_fine_disk(self):
        shape = rasterize(DiskShape((0.0, 0.0), 1.0), 512, padding=2)
        k = complex_for_shape(shape)
        assert euclidean_length(boundary_chain(shape, k)) == pytest.approx(2 * math.pi, rel=0.01)

    def test_multiplicity_and_sign(self):
        """2 T1 + 3 T2 for unit disks at (0, 0) and (0, 3)"""
        a, b = align_shapes(rasterize(DiskShape((0.0, 0.0), 1.0), 256),
                            rasterize(DiskShape((0.0, 3.0), 1.0), 256))
        k = complex_for_shape(a)
        s = 2 * to_2chain(a, k) + 3 * to_2chain(b, k)
        assert mass(s) == pytest.approx(5 * math.pi, rel=0.01)
        assert euclidean_length(boundary(s)) == pytest.approx(10 * math.pi, rel=0.02)
        mixed = 2 * to_2chain(a, k) - 3 * to_2chain(b, k)
        assert euclidean_length(boundary(mixed)) == pytest.approx(10 * math.pi, rel=0.02)

    def test_open_chain(self):
        k = build_grid_complex(3, 3, 1.0)
        with pytest.raises(InvalidArgumentError, match="not closed"):
            euclidean_length(Chain.from_coefficients(k, 1, {0: 1}))

    def test_triangulated_complex(self):
        k = build_grid_complex(3, 3, 1.0, 'right-triangulated')
        with pytest.raises(InvalidArgumentError):
            euclidean_length(boundary(Chain.from_coefficients(k, 2, {0: 1})))


class TestComparison:

    def test_shape_lp_routing(self, square_shape):
        direct = shape_flatnorm_lp(square_shape, 1.0)
        assert direct.method == 'lp'
        with patch.object(Config, 'LP_MAX_CELLS', 100):
            routed = shape_flatnorm_lp(square_shape, 1.0)
        assert routed.diagnostics['routed_from'] == 'lp'
        assert routed.value == pytest.approx(direct.value, abs=1e-9)
        assert direct.value == pytest.approx(32.0)

    def test_n4_agreement(self, square_shape):
        report = compare_methods(square_shape, 1.0, 'N4')
        assert report.agree
        assert report.delta <= 1e-6

    def test_n16_within_five_percent(self):
        shape = rasterize(PolygonShape.rectangle(0.0, 0.0, 1.0, 1.0), 16, padding=2)
        report = compare_methods(shape, 8.0, 'N16')
        assert report.stencil == 'N16'
        assert report.agree

    def test_explicit_tolerance(self, square_shape):
        k = complex_for_shape(square_shape)
        lp = flatnorm_lp(k, boundary_chain(square_shape, k), 0.25)
        cut = flatnorm_graphcut(square_shape, 1.0, 'N4')
        report = agreement(lp, cut, tolerance=1.0)
        assert report.delta == pytest.approx(16.0)
        assert not report.agree
        assert report.to_dict()['agree'] is False
