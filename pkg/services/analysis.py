"""
Shape distances, lambda sweeps, length estimation and solver comparison.

The closed-form disk and square values live in :mod:`services.oracles` and
are re-exported here.
"""

import hashlib
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from models.chain_complex import Chain, GridComplex2, Topology, boundary
from models.results import AgreementReport, FlatNormResult, SweepCurve
from models.shapes import BinaryShape
from services.flatnorm_graphcut import FlowNetwork, NeighborhoodStencil
from services.flatnorm_lp import LpProblem, flatnorm_lp, lp_fits
from services.oracles import (disk_flatnorm, square_flatnorm_euclid, square_flatnorm_l1,  # noqa: F401
                              square_rounding_threshold)
from services.shape_io import boundary_chain, complex_for_shape, difference, to_2chain
from utils.config import Config
from utils.errors import InvalidArgumentError, SolverResourceError

logger = logging.getLogger(__name__)

SweepInput = Union[BinaryShape, Chain]


def _check_lambda(lam: float):
    if not (lam > 0 and math.isfinite(lam)):
        raise InvalidArgumentError(f"lambda must be positive and finite, got {lam}")


def _check_method(method: str, allowed=('lp', 'graphcut')) -> str:
    if method not in allowed:
        raise InvalidArgumentError(f"Unknown method {method!r}; expected one of {', '.join(allowed)}")
    return method


def align_shapes(a: BinaryShape, b: BinaryShape) -> Tuple[BinaryShape, BinaryShape]:
    """Pad both shapes with background onto their common bounding grid"""
    if not math.isclose(a.spacing, b.spacing, rel_tol=1e-12):
        raise InvalidArgumentError(f"Shapes have different spacing: {a.spacing} vs {b.spacing}")
    h = a.spacing
    offsets = []
    for axis in (0, 1):
        steps = (b.origin[axis] - a.origin[axis]) / h
        if abs(steps - round(steps)) > 1e-6:
            raise InvalidArgumentError(
                f"Shape origins differ by {steps:.6g} pixels along axis {axis}; only whole pixels align")
        offsets.append(int(round(steps)))
    di, dj = offsets

    # pixel boxes in a's lattice, bottom-up
    i0, j0 = min(0, di), min(0, dj)
    i1, j1 = max(a.width, di + b.width), max(a.height, dj + b.height)
    width, height = i1 - i0, j1 - j0
    origin = (a.origin[0] + i0 * h, a.origin[1] + j0 * h)

    def place(shape: BinaryShape, si: int, sj: int) -> BinaryShape:
        grid = np.zeros((height, width), dtype=bool)
        grid[sj - j0:sj - j0 + shape.height, si - i0:si - i0 + shape.width] = shape.bottom_up()
        return BinaryShape(grid[::-1], h, origin)

    if (di, dj) == (0, 0) and a.bits.shape == b.bits.shape:
        return a, b
    return place(a, 0, 0), place(b, di, dj)


def _route_to_cut(k: GridComplex2) -> bool:
    """True when ``k`` is over the LP cap and the N4 cut should solve it instead"""
    if lp_fits(k):
        return False
    if k.topology != Topology.CUBICAL:
        raise SolverResourceError(
            f"{k.width}x{k.height} right-triangulated grid exceeds the LP cap of {Config.LP_MAX_CELLS} cells "
            f"and has no exact graph-cut counterpart")
    logger.warning(f"{k.width}x{k.height} grid exceeds the LP cap of {Config.LP_MAX_CELLS} cells; "
                   f"solving the same cubical problem with the N4 graph cut")
    return True


def _routed(result: FlatNormResult) -> FlatNormResult:
    return replace(result, diagnostics={**result.diagnostics, 'routed_from': 'lp'})


def shape_flatnorm_lp(shape: BinaryShape, lam: float, topology='cubical') -> FlatNormResult:
    """LP flat norm of a shape's boundary on the shape's own grid complex.

    Cubical grids over ``Config.LP_MAX_CELLS`` cells are handed to the N4
    cut, which minimizes the same functional there; the result carries
    ``diagnostics['routed_from'] == 'lp'``.
    """
    _check_lambda(lam)
    k = complex_for_shape(shape, topology)
    if _route_to_cut(k):
        return _routed(FlowNetwork(shape, 'N4').result(lam))
    return flatnorm_lp(k, boundary_chain(shape, k), lam)


def flat_distance(a: BinaryShape, b: BinaryShape, lam: float, method: str = 'lp', stencil=None,
                  topology='cubical') -> FlatNormResult:
    """Flat norm of boundary(a) - boundary(b)"""
    _check_lambda(lam)
    _check_method(method)
    a, b = align_shapes(a, b)

    routed = False
    if method == 'lp':
        k = complex_for_shape(a, topology)
        if not _route_to_cut(k):
            t = boundary(to_2chain(a, k) - to_2chain(b, k))
            logger.info(f"LP flat distance on {k.width}x{k.height} grid, lambda={lam:g}")
            return flatnorm_lp(k, t, lam)
        routed, stencil = True, 'N4'

    # f = chi_a - chi_b takes values in {-1, 0, 1}; its two nontrivial levels cut independently
    stencil = NeighborhoodStencil.from_tag(stencil or Config.DEFAULT_STENCIL)
    upper = FlowNetwork(difference(a, b), stencil).result(lam)
    lower = FlowNetwork(difference(b, a), stencil).result(lam)

    k = complex_for_shape(a)
    s_chain = (to_2chain(a, k) - to_2chain(upper.sigma, k)) - (to_2chain(b, k) - to_2chain(lower.sigma, k))
    residual = boundary_chain(upper.sigma, k) - boundary_chain(lower.sigma, k)
    logger.info(f"Layered graph-cut distance at lambda={lam:g}: {upper.value:.6g} + {lower.value:.6g}")
    result = FlatNormResult(
        value=upper.value + lower.value, lam=float(lam),
        input_chain=boundary(to_2chain(a, k) - to_2chain(b, k)),
        s_chain=s_chain, residual_chain=residual,
        mass_residual=upper.mass_residual + lower.mass_residual,
        mass_s=upper.mass_s + lower.mass_s,
        method='graphcut', stencil=stencil.tag, layered=True,
        diagnostics={'upper': upper.diagnostics, 'lower': lower.diagnostics})
    return _routed(result) if routed else result


def input_digest(item: SweepInput) -> str:
    """Stable sha256 of a shape raster or chain"""
    digest = hashlib.sha256()
    if isinstance(item, BinaryShape):
        header = {'kind': 'shape', 'width': item.width, 'height': item.height,
                  'spacing': item.spacing, 'origin': list(item.origin)}
        digest.update(json.dumps(header, sort_keys=True).encode('utf-8'))
        digest.update(np.packbits(item.bits, axis=None).tobytes())
    elif isinstance(item, Chain):
        digest.update(json.dumps(item.to_dict(), sort_keys=True).encode('utf-8'))
    else:
        raise InvalidArgumentError(f"Cannot digest {type(item).__name__}")
    return digest.hexdigest()


def _check_lambdas(lambdas: Sequence[float]) -> Tuple[float, ...]:
    lambdas = tuple(float(lam) for lam in lambdas)
    if not lambdas:
        raise InvalidArgumentError("lambda list is empty")
    for lam in lambdas:
        _check_lambda(lam)
    if any(b <= a for a, b in zip(lambdas, lambdas[1:])):
        raise InvalidArgumentError("lambda list must be strictly increasing")
    return lambdas


def lambda_sweep(item: SweepInput, lambdas: Sequence[float], method: str = 'lp', stencil=None,
                 topology='cubical', threads: Optional[int] = None) -> SweepCurve:
    """F_lambda over a list of lambdas, one solve each, in lambda order.

    The complex and LP constraints (or the flow network's n-links) are built
    once and shared by every solve.
    """
    lambdas = _check_lambdas(lambdas)
    _check_method(method)
    threads = max(1, threads or Config.THREADS)

    routed = (method == 'lp' and isinstance(item, BinaryShape)
              and _route_to_cut(complex_for_shape(item, topology)))
    if routed:
        method, stencil = 'graphcut', 'N4'

    if method == 'graphcut':
        if not isinstance(item, BinaryShape):
            raise InvalidArgumentError("Graph-cut sweeps need a shape input, not a chain")
        stencil_tag = NeighborhoodStencil.from_tag(stencil or Config.DEFAULT_STENCIL).tag
        network = FlowNetwork(item, stencil_tag)

        def solve(lam):
            return network.solve(lam).value
    else:
        stencil_tag = None
        if isinstance(item, BinaryShape):
            k = complex_for_shape(item, topology)
            t = boundary_chain(item, k)
        elif isinstance(item, Chain):
            if item.dim != 1:
                raise InvalidArgumentError(f"Sweep input chain must be a 1-chain, got dim {item.dim}")
            k, t = item.complex, item
        else:
            raise InvalidArgumentError(f"Cannot sweep {type(item).__name__}")
        problem = None if t.is_zero() else LpProblem.build(k, t, lambdas[0])

        def solve(lam):
            return flatnorm_lp(k, t, lam, problem=problem).value

    logger.info(f"Sweeping {len(lambdas)} lambdas with {method} on {threads} thread(s)")
    if threads == 1 or len(lambdas) == 1:
        values = [solve(lam) for lam in lambdas]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(pool.map(solve, lambdas))

    curve = SweepCurve(lambdas, tuple(float(v) for v in values), method, stencil_tag, input_digest(item))
    if not curve.is_concave():
        logger.warning("Sweep curve is not concave within tolerance")
    return curve


# ---------------------------------------------------------------- length

# Line directions (dx, dy) of the Crofton count, one per undirected 16-neighbor
CROFTON_DIRECTIONS = ((1, 0), (0, 1), (1, 1), (1, -1), (2, 1), (1, 2), (2, -1), (1, -2))


def _direction_class(dx: int, dy: int) -> int:
    if dx == 0 or dy == 0:
        return 0
    return 1 if abs(dx) == abs(dy) else 2


def crofton_weights() -> np.ndarray:
    """Weights c_k of  L = sum_k c_k * crossings_k * line_spacing_k.

    Axis, diagonal and knight directions share one weight per class. The
    three weights make horizontal and 45 degree segments measure exactly
    and make the mean over all segment angles exact.
    """
    angles = np.array([math.atan2(dy, dx) for dx, dy in CROFTON_DIRECTIONS])
    classes = np.array([_direction_class(dx, dy) for dx, dy in CROFTON_DIRECTIONS])
    system = np.zeros((3, 3))
    for row, phi in enumerate((0.0, math.pi / 4)):
        system[row] = np.bincount(classes, weights=np.abs(np.sin(phi - angles)), minlength=3)
    system[2] = np.bincount(classes, minlength=3) * (2 / math.pi)
    return np.linalg.solve(system, np.ones(3))[classes]


_CROFTON_WEIGHTS = crofton_weights()
_DIRECTION_LENGTHS = np.array([math.hypot(dx, dy) for dx, dy in CROFTON_DIRECTIONS])


def _crossings(level: np.ndarray, dx: int, dy: int) -> int:
    """Pixel pairs (p, p + (dx, dy)) with exactly one pixel in the set"""
    padded = np.pad(level, 2)
    return int(np.count_nonzero(padded != np.roll(padded, (dy, dx), axis=(0, 1))))


def _boundary_cycles(level: np.ndarray) -> Iterator[np.ndarray]:
    """Vertex sequences of the boundary contours of a bottom-up pixel set.

    Contours run counterclockwise around the set. At a vertex where two
    pixels touch diagonally the walk turns left, so such pixels get
    separate contours.
    """
    padded = np.pad(level, 1)
    starts: List[np.ndarray] = []
    steps: List[Tuple[int, int]] = []

    def collect(mask, offset, step):
        rows, cols = np.nonzero(mask)
        starts.append(np.column_stack([cols + offset[0], rows + offset[1]]))
        steps.extend([step] * len(rows))

    below, above = padded[:-1, :], padded[1:, :]
    collect(above & ~below, (0, 1), (1, 0))
    collect(below & ~above, (1, 1), (-1, 0))
    left, right = padded[:, :-1], padded[:, 1:]
    collect(left & ~right, (1, 0), (0, 1))
    collect(right & ~left, (1, 1), (0, -1))

    points = np.concatenate(starts).tolist()
    outgoing: Dict[Tuple[int, int], List[int]] = {}
    for index, (x, y) in enumerate(points):
        outgoing.setdefault((x, y), []).append(index)

    used = np.zeros(len(points), dtype=bool)
    for first in range(len(points)):
        if used[first]:
            continue
        cycle = []
        edge = first
        while not used[edge]:
            used[edge] = True
            x, y = points[edge]
            dx, dy = steps[edge]
            cycle.append((x, y))
            options = outgoing[(x + dx, y + dy)]
            edge = options[0] if len(options) == 1 else next(o for o in options if steps[o] == (-dy, dx))
        yield np.array(cycle, dtype=np.int64)


def _prominent_maxima(values: np.ndarray, threshold: int) -> int:
    """Maxima of a cyclic sequence whose persistence is at least ``threshold``"""
    top = int(np.argmax(values))
    if values[top] - values.min() < threshold:
        return 0
    walk = np.concatenate([values[top:], values[:top + 1]]).tolist()
    count, descending = 1, True
    low = high = walk[0]
    for v in walk[1:]:
        if descending:
            if v < low:
                low = v
            elif v - low >= threshold:
                descending, high = False, v
        elif v > high:
            high = v
        elif high - v >= threshold:
            count, descending, low = count + 1, True, v
    return count


def _level_set_length(level: np.ndarray) -> float:
    """Crofton length of a bottom-up pixel set's boundary, in units of the spacing"""
    crossings = np.array([_crossings(level, dx, dy) for dx, dy in CROFTON_DIRECTIONS], dtype=float)
    for cycle in _boundary_cycles(level):
        xs, ys = cycle[:, 0], cycle[:, 1]
        for k, (dx, dy) in enumerate(CROFTON_DIRECTIONS):
            reach = abs(dx) + abs(dy)
            if reach > 1:
                # lines through pixel centers miss reach - 1 crossings at each prominent lattice extreme
                extremes = 2 * _prominent_maxima(dy * xs - dx * ys, reach)
                crossings[k] += (reach - 1) * extremes
    return float(np.sum(_CROFTON_WEIGHTS * crossings / _DIRECTION_LENGTHS))


def euclidean_length(c: Chain) -> float:
    """Euclidean length estimate of a closed 1-chain on a cubical complex.

    The chain is written as the boundary of an integer 2-chain, which is
    split into nested level sets. Each level set is measured by a
    Cauchy-Crofton count: pixel-center lines in the eight directions of
    ``CROFTON_DIRECTIONS`` record how often they cross the set, and the
    weighted crossings add up to the length. Corners of the pixel lattice
    that stick out in a direction get the crossings the center lines
    cannot see, which makes pixel-aligned rectangles exact.
    """
    if c.dim != 1:
        raise InvalidArgumentError(f"Length is defined for 1-chains, got dim {c.dim}")
    k = c.complex
    if k.topology != Topology.CUBICAL:
        raise InvalidArgumentError("Euclidean length needs a cubical complex")
    if c.is_zero():
        return 0.0
    ends = boundary(c)
    if not ends.is_zero():
        raise InvalidArgumentError(
            f"Chain is not closed: its boundary is nonzero at {len(ends)} vertices "
            f"(first vertex {int(ends.support()[0])})")

    dense = c.to_dense()
    horizontal = dense[:k.n_horizontal_edges].reshape(k.height + 1, k.width)
    filling = np.cumsum(horizontal[:-1], axis=0)

    total = 0.0
    top, bottom = int(filling.max()), int(filling.min())
    for level in range(1, top + 1):
        total += _level_set_length(filling >= level)
    for level in range(0, bottom, -1):
        total += _level_set_length(filling < level)
    logger.debug(f"Euclidean length over levels {bottom}..{top}: {total * k.spacing:.12g}")
    return total * k.spacing


# ---------------------------------------------------------------- comparison

def agreement(lp_result: FlatNormResult, graphcut_result: FlatNormResult,
              tolerance: Optional[float] = None) -> AgreementReport:
    """LP against graph cut; N4 should match to 1e-6, other stencils to 5%"""
    stencil = graphcut_result.stencil or 'N4'
    if tolerance is None:
        scale = max(1.0, abs(lp_result.value), abs(graphcut_result.value))
        tolerance = 1e-6 * scale if stencil == 'N4' else 0.05 * scale
    return AgreementReport(
        lp_value=lp_result.value, graphcut_value=graphcut_result.value, stencil=stencil,
        delta=abs(lp_result.value - graphcut_result.value), tolerance=tolerance)


def compare_methods(shape: BinaryShape, lam: float, stencil='N4',
                    tolerance: Optional[float] = None) -> AgreementReport:
    """Solve one shape both ways and report the difference"""
    _check_lambda(lam)
    lp_result = shape_flatnorm_lp(shape, lam)
    graphcut_result = FlowNetwork(shape, stencil).result(lam)
    report = agreement(lp_result, graphcut_result, tolerance)
    logger.info(f"LP {report.lp_value:.12g} vs graph cut {report.graphcut_value:.12g} ({report.stencil}), "
                f"delta {report.delta:.3g}")
    return report
