# tests/test_flatnorm_graphcut.py
import math
from types import SimpleNamespace
from unittest.mock import patch

import numpy as np
import pytest

import services.flatnorm_graphcut as graphcut_module
from models.shapes import BinaryShape, DiskShape
from services.flatnorm_graphcut import (FlowNetwork, NeighborhoodStencil, corner_rounding_check,
                                        flatnorm_graphcut, l1tv_denoise, stencil_perimeter)
from services.flatnorm_lp import flatnorm_lp
from services.oracles import disk_flatnorm
from services.shape_io import rasterize
from utils.errors import FlatNormError, InvalidArgumentError


def _annulus():
    """10x10 square with a 2x2 hole in a 14x14 raster"""
    bits = np.zeros((14, 14), dtype=bool)
    bits[2:12, 2:12] = True
    bits[6:8, 6:8] = False
    return BinaryShape(bits)


class TestStencils:

    def test_n4_is_unit_l1(self):
        stencil = NeighborhoodStencil.from_tag('n4')
        assert stencil.tag == 'N4'
        assert stencil.unit_weights == (1.0, 1.0)
        assert np.allclose(stencil.weights(0.5), [0.5, 0.5])

    def test_n8_crofton_weights(self):
        stencil = NeighborhoodStencil.from_tag('N8')
        assert stencil.unit_weights[0] == pytest.approx(math.pi / 8)
        assert stencil.unit_weights[2] == pytest.approx(math.pi / (8 * math.sqrt(2)))
        assert stencil.reach == 1

    def test_n16_is_symmetric_under_axis_swap(self):
        stencil = NeighborhoodStencil.from_tag('N16')
        weights = dict(zip(stencil.offsets, stencil.unit_weights))
        assert weights[(1, 0)] == pytest.approx(weights[(0, 1)])
        assert weights[(2, 1)] == pytest.approx(weights[(1, 2)])
        assert weights[(-1, 2)] == pytest.approx(weights[(-2, 1)])
        assert stencil.reach == 2

    def test_unknown_stencil(self):
        with pytest.raises(InvalidArgumentError):
            NeighborhoodStencil.from_tag('N32')


class TestStencilPerimeter:

    def test_n4_square(self, square_shape):
        assert stencil_perimeter(square_shape.bottom_up(), 'N4', 1.0) == 32.0
        assert stencil_perimeter(square_shape.bottom_up(), 'N4', 0.5) == 16.0

    @pytest.mark.parametrize('tag,per_unit', [('N8', 0.948), ('N16', 0.986)])
    def test_straight_edges(self, tag, per_unit):
        """Ten extra columns add ten units of top and bottom edge"""
        stencil = NeighborhoodStencil.from_tag(tag)
        expected = sum(w * abs(dj) for (_, dj), w in zip(stencil.offsets, stencil.unit_weights))
        assert expected == pytest.approx(per_unit, abs=1e-3)
        short = stencil_perimeter(np.ones((6, 20), dtype=bool), stencil, 1.0)
        long = stencil_perimeter(np.ones((6, 30), dtype=bool), stencil, 1.0)
        assert long - short == pytest.approx(20 * expected, abs=1e-9)

    def test_empty_set(self):
        assert stencil_perimeter(np.zeros((4, 4), dtype=bool), 'N16', 1.0) == 0.0


class TestFlatNormGraphCut:

    def test_empty_shape(self):
        result = flatnorm_graphcut(BinaryShape(np.zeros((5, 5), dtype=bool)), 1.0, 'N16')
        assert result.value == 0.0
        assert result.method == 'graphcut'

    @pytest.mark.parametrize('lam,expected', [(0.25, 16.0), (1.0, 32.0), (4.0, 32.0)])
    def test_square_regimes_n4(self, square_shape, lam, expected):
        """8x8 square: fill below 4/a, keep above"""
        result = flatnorm_graphcut(square_shape, lam, 'N4')
        assert result.value == pytest.approx(expected, abs=1e-9)
        if lam < 0.5:
            assert result.sigma.is_empty()
        else:
            assert result.sigma == square_shape
            assert result.s_chain.is_zero()
            assert result.residual_chain == result.input_chain

    @pytest.mark.parametrize('lam,expected,kept', [(0.25, 24.0, 0), (1.0, 44.0, 100), (3.0, 48.0, 96)])
    def test_hole_filling(self, lam, expected, kept):
        result = flatnorm_graphcut(_annulus(), lam, 'N4')
        assert result.value == pytest.approx(expected, abs=1e-9)
        assert result.sigma.pixel_count == kept

    def test_value_splits_into_perimeter_and_area(self):
        result = flatnorm_graphcut(_annulus(), 1.0, 'N4')
        assert result.mass_residual == pytest.approx(40.0)
        assert result.mass_s == pytest.approx(4.0)
        assert result.value == pytest.approx(result.mass_residual + result.lam * result.mass_s)

    def test_flow_equals_cut(self):
        result = flatnorm_graphcut(_annulus(), 1.0, 'N4')
        diagnostics = result.diagnostics
        assert diagnostics['flow_value'] == pytest.approx(diagnostics['cut_capacity'])
        assert diagnostics['cut_capacity'] == pytest.approx(result.value, abs=1e-9)

    def test_flow_cut_mismatch_raises(self, square_shape):
        real_flow = graphcut_module.maximum_flow

        def skewed(*args, **kwargs):
            flow = real_flow(*args, **kwargs)
            return SimpleNamespace(flow=flow.flow, flow_value=flow.flow_value + 1)

        with patch('services.flatnorm_graphcut.maximum_flow', side_effect=skewed):
            with pytest.raises(FlatNormError, match="differs from flow value"):
                flatnorm_graphcut(square_shape, 1.0, 'N4')

    def test_deterministic(self, rng):
        shape = BinaryShape(rng.random((20, 20)) < 0.5)
        first = flatnorm_graphcut(shape, 0.7, 'N16')
        second = flatnorm_graphcut(shape, 0.7, 'N16')
        assert first.sigma == second.sigma
        assert first.value == second.value

    def test_nondecreasing_in_lambda(self, rng):
        shape = BinaryShape(rng.random((16, 16)) < 0.4)
        network = FlowNetwork(shape, 'N16')
        values = [network.solve(lam).value for lam in (0.1, 0.3, 1.0, 3.0, 10.0)]
        assert all(b >= a - 1e-9 for a, b in zip(values, values[1:]))

    def test_reused_network_matches_fresh_solve(self, rng):
        shape = BinaryShape(rng.random((10, 10)) < 0.5)
        network = FlowNetwork(shape, 'N8')
        for lam in (0.5, 2.0):
            assert network.result(lam).value == flatnorm_graphcut(shape, lam, 'N8').value

    def test_invalid_lambda(self, square_shape):
        for lam in (0.0, -2.0, float('nan')):
            with pytest.raises(InvalidArgumentError):
                flatnorm_graphcut(square_shape, lam)

    def test_denoise_removes_speck(self):
        bits = np.zeros((10, 10), dtype=bool)
        bits[2:8, 2:8] = True
        bits[0, 9] = True
        cleaned = l1tv_denoise(BinaryShape(bits), 1.0, 'N4')
        assert cleaned.pixel_count == 36
        assert not cleaned.bits[0, 9]


class TestAgainstLp:

    def _check(self, rng, cases, size):
        for n in range(cases):
            shape = BinaryShape(rng.random((size, size)) < 0.5)
            lam = (0.25, 0.5, 1.0, 2.0)[n % 4]
            cut = flatnorm_graphcut(shape, lam, 'N4')
            lp = flatnorm_lp(cut.input_chain.complex, cut.input_chain, lam)
            assert cut.value == pytest.approx(lp.value, abs=1e-6)

    def test_n4_cut_matches_lp(self, rng):
        self._check(rng, 8, 8)

    @pytest.mark.slow
    def test_n4_cut_matches_lp_fifty_shapes(self, rng):
        self._check(rng, 50, 16)


class TestDisks:

    @pytest.mark.parametrize('lam', [1.0, 3.0])
    def test_coarse_disk(self, lam):
        shape = rasterize(DiskShape((0.0, 0.0), 1.0), 64, padding=2)
        value = flatnorm_graphcut(shape, lam, 'N16').value
        assert value == pytest.approx(disk_flatnorm(1.0, lam), rel=0.05)

    @pytest.mark.slow
    @pytest.mark.parametrize('lam', [1.0, 2.0, 3.0])
    def test_fine_disk(self, lam):
        shape = rasterize(DiskShape((0.0, 0.0), 1.0), 512, padding=2)
        value = flatnorm_graphcut(shape, lam, 'N16').value
        assert value == pytest.approx(disk_flatnorm(1.0, lam), rel=0.03)

    @pytest.mark.slow
    def test_area_regime_error_shrinks_with_resolution(self):
        errors = []
        for resolution in (128, 512):
            shape = rasterize(DiskShape((0.0, 0.0), 1.0), resolution, padding=2)
            errors.append(abs(flatnorm_graphcut(shape, 1.0, 'N16').value - math.pi))
        assert errors[1] <= errors[0]


class TestCornerRounding:

    def test_regime_below_threshold(self):
        with pytest.raises(InvalidArgumentError, match="lambda"):
            corner_rounding_check(1.0, 1.0, 256)

    def test_resolution_too_coarse(self):
        with pytest.raises(InvalidArgumentError, match="resolution"):
            corner_rounding_check(1.0, 8.0, 128)

    @pytest.mark.slow
    def test_unit_square(self):
        report = corner_rounding_check(1.0, 8.0, 256)
        assert report.expected_value == pytest.approx(4.0 + (math.pi - 4.0) / 8.0)
        assert report.value_ok
        assert report.radius_ok
        assert len(report.corner_radii) == 4

    @pytest.mark.slow
    def test_larger_square(self):
        report = corner_rounding_check(2.0, 4.0, 512)
        assert report.passed
