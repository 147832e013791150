"""
Flat norm of a shape boundary by s-t minimum cut.

For T = boundary(Omega) the flat norm becomes the L1TV problem

    min over Sigma of  Per(Sigma) + lambda * area(Sigma xor Omega)

which is a binary labelling energy. One node per pixel, t-links of
capacity lambda * h^2 tie Omega pixels to the source and the rest to the
sink, and stencil n-links discretize the perimeter. Pixels outside the grid
are background, so stencil links leaving the grid become sink capacity.

scipy's Dinic implementation needs integer capacities; they are quantized
onto a power-of-two grid and the reported value is recomputed in floating
point from the canonical cut.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import breadth_first_order, maximum_flow

from models.chain_complex import Chain, GridComplex2
from models.results import CornerRoundingReport, FlatNormResult
from models.shapes import BinaryShape, PolygonShape
from services.oracles import square_flatnorm_euclid, square_rounding_threshold
from services.shape_io import boundary_chain, complex_for_shape, rasterize, to_2chain
from utils.config import Config
from utils.errors import FlatNormError, InvalidArgumentError

logger = logging.getLogger(__name__)

_HALF_OFFSETS = {
    'N4': ((1, 0), (0, 1)),
    'N8': ((1, 0), (0, 1), (1, 1), (-1, 1)),
    'N16': ((1, 0), (0, 1), (1, 1), (-1, 1), (2, 1), (1, 2), (-1, 2), (-2, 1)),
}


def _crofton_weights(offsets: Tuple[Tuple[int, int], ...]) -> Tuple[float, ...]:
    """Per-unit-spacing weights dtheta / (2 |e|) over the symmetric direction set"""
    full = list(offsets) + [(-di, -dj) for di, dj in offsets]
    angles = np.array([math.atan2(dj, di) for di, dj in full])
    order = np.argsort(angles)
    sorted_angles = angles[order]
    n = len(full)
    cells = np.empty(n)
    for rank in range(n):
        after = sorted_angles[(rank + 1) % n] + (2 * math.pi if rank + 1 == n else 0.0)
        before = sorted_angles[rank - 1] - (2 * math.pi if rank == 0 else 0.0)
        cells[order[rank]] = (after - before) / 2.0
    return tuple(float(cells[k] / (2.0 * math.hypot(*offsets[k]))) for k in range(len(offsets)))


@dataclass(frozen=True)
class NeighborhoodStencil:
    """Pixel neighborhood with one weight per undirected offset.

    ``offsets`` holds one vector of each +/- pair as (di, dj) with j counted
    upward; ``unit_weights`` are the link weights at spacing 1.
    """
    tag: str
    offsets: Tuple[Tuple[int, int], ...]
    unit_weights: Tuple[float, ...]

    @classmethod
    def from_tag(cls, tag) -> 'NeighborhoodStencil':
        if isinstance(tag, NeighborhoodStencil):
            return tag
        key = str(tag).upper()
        if key not in _HALF_OFFSETS:
            raise InvalidArgumentError(f"Unknown stencil {tag!r}; expected one of {', '.join(_HALF_OFFSETS)}")
        offsets = _HALF_OFFSETS[key]
        if key == 'N4':
            # exact l1 perimeter, identical to edge mass on the cubical complex
            weights = (1.0, 1.0)
        else:
            weights = _crofton_weights(offsets)
        return cls(key, offsets, weights)

    @property
    def reach(self) -> int:
        return max(max(abs(di), abs(dj)) for di, dj in self.offsets)

    def weights(self, spacing: float) -> np.ndarray:
        return np.asarray(self.unit_weights) * spacing

    def __str__(self):
        return self.tag


def _shifted_pair(padded: np.ndarray, di: int, dj: int) -> Tuple[np.ndarray, np.ndarray]:
    """Views a, b of ``padded`` with b[j, i] == padded[j + dj, i + di]"""
    rows, cols = padded.shape
    j0, j1 = max(0, -dj), rows - max(0, dj)
    i0, i1 = max(0, -di), cols - max(0, di)
    return padded[j0:j1, i0:i1], padded[j0 + dj:j1 + dj, i0 + di:i1 + di]


def stencil_perimeter(bits: np.ndarray, stencil, spacing: float) -> float:
    """Cut perimeter of a bottom-up pixel set; everything off the grid is background"""
    stencil = NeighborhoodStencil.from_tag(stencil)
    padded = np.pad(np.asarray(bits, dtype=bool), stencil.reach)
    total = 0.0
    for (di, dj), weight in zip(stencil.offsets, stencil.weights(spacing)):
        a, b = _shifted_pair(padded, di, dj)
        total += weight * int(np.count_nonzero(a != b))
    return total


@dataclass
class CutSolution:
    sigma: np.ndarray           # bottom-up boolean pixel mask
    perimeter: float
    flipped_area: float
    value: float
    diagnostics: Dict = field(default_factory=dict)


class FlowNetwork:
    """Pixel graph for one shape and stencil.

    The n-links do not depend on lambda, so one network serves a whole sweep;
    :meth:`solve` adds the t-links for each lambda. Each solve works on its
    own capacity matrix, so concurrent solves are safe.
    """

    def __init__(self, shape: BinaryShape, stencil):
        self.shape = shape
        self.stencil = NeighborhoodStencil.from_tag(stencil)
        self.spacing = shape.spacing
        self.omega = np.ascontiguousarray(shape.bottom_up())
        h, w = self.omega.shape
        self.n_pixels = w * h
        self.source = self.n_pixels
        self.sink = self.n_pixels + 1

        jj, ii = np.divmod(np.arange(self.n_pixels), w)
        tails, heads, caps = [], [], []
        border = np.zeros(self.n_pixels)
        for (di, dj), weight in zip(self.stencil.offsets, self.stencil.weights(self.spacing)):
            for si, sj in ((di, dj), (-di, -dj)):
                ni, nj = ii + si, jj + sj
                inside = (ni >= 0) & (ni < w) & (nj >= 0) & (nj < h)
                tails.append(np.flatnonzero(inside))
                heads.append((nj * w + ni)[inside])
                caps.append(np.full(int(inside.sum()), weight))
                border[~inside] += weight
        self.link_tails = np.concatenate(tails)
        self.link_heads = np.concatenate(heads)
        self.link_caps = np.concatenate(caps)
        self.border = border
        self.max_link = float(self.stencil.weights(self.spacing).max())
        self.omega_perimeter = stencil_perimeter(self.omega, self.stencil, self.spacing)

        self.complex: GridComplex2 = complex_for_shape(shape)
        self.input_chain: Chain = boundary_chain(shape, self.complex)
        self._omega_chain: Chain = to_2chain(shape, self.complex)
        logger.debug(f"Flow network {w}x{h} with stencil {self.stencil.tag}: "
                     f"{len(self.link_caps)} n-link arcs, Per(Omega) = {self.omega_perimeter:.12g}")

    def _capacities(self, lam: float):
        area = lam * self.spacing ** 2
        omega = self.omega.reshape(-1)
        source_caps = np.where(omega, area, 0.0)
        sink_caps = np.where(omega, 0.0, area) + self.border

        # Sigma = Omega costs Per(Omega), so larger t-links never enter a minimum cut
        ceiling = self.omega_perimeter + self.max_link
        source_caps = np.minimum(source_caps, ceiling)
        sink_caps = np.minimum(sink_caps, ceiling)
        exponent = math.floor(math.log2(Config.FLOW_CAPACITY_SCALE / ceiling))
        return source_caps, sink_caps, math.ldexp(1.0, exponent)

    def solve(self, lam: float) -> CutSolution:
        if not (lam > 0 and math.isfinite(lam)):
            raise InvalidArgumentError(f"lambda must be positive and finite, got {lam}")
        n = self.n_pixels
        if not self.omega.any():
            sigma = np.zeros_like(self.omega)
            return CutSolution(sigma, 0.0, 0.0, 0.0, {'flow_value': 0.0, 'cut_capacity': 0.0})

        source_caps, sink_caps, quantum = self._capacities(lam)
        pixels = np.arange(n)
        rows = np.concatenate([self.link_tails, np.full(n, self.source), pixels])
        cols = np.concatenate([self.link_heads, pixels, np.full(n, self.sink)])
        caps = np.rint(np.concatenate([self.link_caps, source_caps, sink_caps]) * quantum).astype(np.int64)
        keep = caps > 0
        graph = sparse.coo_matrix(
            (caps[keep].astype(np.int32), (rows[keep], cols[keep])), shape=(n + 2, n + 2)).tocsr()
        graph.sum_duplicates()

        flow = maximum_flow(graph, self.source, self.sink, method='dinic')
        residual = (graph - flow.flow).tocsr()
        residual.data[residual.data < 0] = 0
        residual.eliminate_zeros()
        reached = breadth_first_order(residual, self.source, directed=True, return_predecessors=False)

        side = np.zeros(n + 2, dtype=bool)
        side[reached] = True
        if side[self.sink]:
            raise FlatNormError("Sink reachable in the residual graph after max-flow")
        crossing = graph.tocoo()
        cut_int = int(crossing.data[side[crossing.row] & ~side[crossing.col]].astype(np.int64).sum())
        if cut_int != int(flow.flow_value):
            raise FlatNormError(f"Cut capacity {cut_int} differs from flow value {flow.flow_value}")

        sigma = side[:n].reshape(self.omega.shape)
        perimeter = stencil_perimeter(sigma, self.stencil, self.spacing)
        flipped_area = int(np.count_nonzero(sigma ^ self.omega)) * self.spacing ** 2
        value = perimeter + lam * flipped_area
        diagnostics = {
            'flow_value': flow.flow_value / quantum,
            'cut_capacity': cut_int / quantum,
            'quantum': 1.0 / quantum,
            'arcs': int(graph.nnz),
            'sigma_pixels': int(sigma.sum()),
        }
        logger.debug(f"Cut at lambda={lam:.6g}: value {value:.12g}, |Sigma| = {diagnostics['sigma_pixels']}, "
                     f"{diagnostics['arcs']} arcs")
        return CutSolution(sigma, perimeter, flipped_area, value, diagnostics)

    def sigma_shape(self, sigma: np.ndarray) -> BinaryShape:
        return self.shape.with_bits(sigma[::-1])

    def result(self, lam: float) -> FlatNormResult:
        """FlatNormResult for this shape at ``lam``"""
        cut = self.solve(lam)
        sigma_shape = self.sigma_shape(cut.sigma)
        sigma_chain = to_2chain(sigma_shape, self.complex)
        return FlatNormResult(
            value=cut.value, lam=float(lam), input_chain=self.input_chain,
            s_chain=self._omega_chain - sigma_chain,
            residual_chain=boundary_chain(sigma_shape, self.complex),
            mass_residual=cut.perimeter, mass_s=cut.flipped_area,
            method='graphcut', stencil=self.stencil.tag,
            diagnostics=cut.diagnostics, sigma=sigma_shape)


def flatnorm_graphcut(shape: BinaryShape, lam: float, stencil=None) -> FlatNormResult:
    stencil = NeighborhoodStencil.from_tag(stencil or Config.DEFAULT_STENCIL)
    if not (lam > 0 and math.isfinite(lam)):
        raise InvalidArgumentError(f"lambda must be positive and finite, got {lam}")
    return FlowNetwork(shape, stencil).result(lam)


def l1tv_denoise(shape: BinaryShape, lam: float, stencil=None) -> BinaryShape:
    """The minimizing Sigma of the same cut"""
    stencil = NeighborhoodStencil.from_tag(stencil or Config.DEFAULT_STENCIL)
    network = FlowNetwork(shape, stencil)
    return network.sigma_shape(network.solve(lam).sigma)


def _fit_circle(x: np.ndarray, y: np.ndarray) -> Tuple[float, float, float]:
    """Algebraic least-squares circle x^2 + y^2 + D x + E y + F = 0"""
    design = np.column_stack([x, y, np.ones_like(x)])
    (d, e, f), *_ = np.linalg.lstsq(design, -(x ** 2 + y ** 2), rcond=None)
    cx, cy = -d / 2.0, -e / 2.0
    return float(cx), float(cy), float(math.sqrt(max(cx * cx + cy * cy - f, 0.0)))


def _corner_radii(sigma: np.ndarray, origin: Tuple[float, float], pitch: float,
                  side: float, radius: float) -> Tuple[float, ...]:
    padded = np.pad(sigma, 1)
    interior = (padded[1:-1, :-2] & padded[1:-1, 2:] & padded[:-2, 1:-1] & padded[2:, 1:-1])
    edge_j, edge_i = np.nonzero(sigma & ~interior)
    x = origin[0] + (edge_i + 0.5) * pitch
    y = origin[1] + (edge_j + 0.5) * pitch

    radii = []
    window = 0.95 * radius
    for cx, cy, sx, sy in ((0.0, 0.0, 1, 1), (side, 0.0, -1, 1), (side, side, -1, -1), (0.0, side, 1, -1)):
        u, v = sx * (x - cx), sy * (y - cy)
        near = (u >= 0) & (u < window) & (v >= 0) & (v < window)
        if np.count_nonzero(near) < 3:
            radii.append(float('nan'))
            continue
        # boundary pixel centers sit half a pixel inside the cut
        radii.append(_fit_circle(x[near], y[near])[2] + pitch / 2.0)
    return tuple(radii)


def corner_rounding_check(side: float, lam: float, resolution: float, stencil='N16') -> CornerRoundingReport:
    """Cut the square [0, side]^2 and compare against the rounded-corner optimum"""
    threshold = square_rounding_threshold(side)
    if lam < threshold * (1.0 - 1e-12):
        raise InvalidArgumentError(
            f"Corner rounding needs lambda >= (2 + sqrt(pi))/a = {threshold:.12g}, got {lam}")
    if resolution < 256:
        raise InvalidArgumentError(f"Corner rounding needs resolution >= 256, got {resolution}")

    shape = rasterize(PolygonShape.rectangle(0.0, 0.0, side, side), resolution, padding=2)
    network = FlowNetwork(shape, stencil)
    cut = network.solve(lam)
    expected = square_flatnorm_euclid(side, lam)
    radius = 1.0 / lam
    radii = _corner_radii(cut.sigma, shape.origin, shape.spacing, side, radius)
    errors = [abs(r - radius) / radius if math.isfinite(r) else math.inf for r in radii]

    report = CornerRoundingReport(
        side=float(side), lam=float(lam), resolution=float(resolution),
        value=cut.value, expected_value=expected, value_error=abs(cut.value - expected) / expected,
        corner_radii=radii, expected_radius=radius, radius_error=max(errors))
    logger.info(f"Corner rounding a={side:g} lambda={lam:g}: value {cut.value:.6g} vs {expected:.6g}, "
                f"radii {', '.join(f'{r:.4g}' for r in radii)} vs {radius:.4g}")
    return report
