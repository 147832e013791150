"""
Shape ingestion and result emitters.

PGM rasters and analytic shapes become BinaryShapes; BinaryShapes become
chains on a matching GridComplex2; FlatNormResults become deterministic
JSON and SVG files.
"""

import json
import logging
import math
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from models.chain_complex import (Chain, GridComplex2, Topology, boundary, build_grid_complex,
                                  chain_from_dict)
from models.results import FlatNormResult, SweepCurve
from models.shapes import BinaryShape, DiskShape, PolygonShape
from services.svg_builder import SVG
from utils.config import Config
from utils.errors import InvalidArgumentError, ParseError
from utils.fileio import atomic_write

logger = logging.getLogger(__name__)

_WHITESPACE = b' \t\r\n\x0b\x0c'


class _PgmReader:
    """Header tokenizer that remembers byte offsets for error messages"""

    def __init__(self, data: bytes, path: Optional[str]):
        self.data = data
        self.path = path
        self.pos = 0

    def fail(self, message: str, offset: Optional[int] = None):
        raise ParseError(message, self.pos if offset is None else offset, self.path)

    def skip_space(self):
        data = self.data
        while self.pos < len(data):
            byte = data[self.pos:self.pos + 1]
            if byte == b'#':
                end = data.find(b'\n', self.pos)
                self.pos = len(data) if end < 0 else end + 1
            elif byte in _WHITESPACE:
                self.pos += 1
            else:
                break

    def integer(self, what: str) -> int:
        self.skip_space()
        start = self.pos
        while self.pos < len(self.data) and self.data[self.pos:self.pos + 1].isdigit():
            self.pos += 1
        if start == self.pos:
            if self.pos >= len(self.data):
                self.fail(f"Unexpected end of file while reading {what}")
            self.fail(f"Expected a decimal integer for {what}")
        return int(self.data[start:self.pos])


def load_pgm(path: str, spacing: float = 1.0, threshold: Optional[int] = None,
             origin: Tuple[float, float] = (0.0, 0.0)) -> BinaryShape:
    """Read a plain (P2) or raw (P5) PGM; pixels >= threshold are foreground"""
    threshold = Config.PGM_THRESHOLD if threshold is None else threshold
    try:
        with open(path, 'rb') as f:
            data = f.read()
    except OSError as e:
        raise InvalidArgumentError(f"Cannot read {path}: {e}") from e

    reader = _PgmReader(data, path)
    magic = data[:2]
    if magic not in (b'P2', b'P5'):
        reader.fail("Not a PGM file (expected magic P2 or P5)", 0)
    reader.pos = 2
    if reader.pos < len(data) and data[reader.pos:reader.pos + 1] not in _WHITESPACE + b'#':
        reader.fail("Missing whitespace after magic number")

    width = reader.integer("width")
    height = reader.integer("height")
    maxval_offset = reader.pos
    maxval = reader.integer("maxval")
    if width < 1 or height < 1:
        reader.fail(f"Image dimensions must be positive, got {width}x{height}", maxval_offset)
    if not 1 <= maxval <= 255:
        reader.fail(f"maxval must lie in 1..255, got {maxval}", maxval_offset)

    count = width * height
    if magic == b'P5':
        if reader.pos >= len(data) or data[reader.pos:reader.pos + 1] not in _WHITESPACE:
            reader.fail("Missing single whitespace before raster data")
        start = reader.pos + 1
        payload = data[start:start + count]
        if len(payload) < count:
            reader.fail(f"Truncated payload: expected {count} bytes, found {len(payload)}", len(data))
        pixels = np.frombuffer(payload, dtype=np.uint8).astype(np.int64)
        too_big = np.flatnonzero(pixels > maxval)
        if len(too_big):
            reader.fail(f"Pixel value {pixels[too_big[0]]} exceeds maxval {maxval}", start + int(too_big[0]))
    else:
        pixels = np.empty(count, dtype=np.int64)
        for k in range(count):
            reader.skip_space()
            offset = reader.pos
            if offset >= len(data):
                reader.fail(f"Truncated payload: expected {count} samples, found {k}", len(data))
            value = reader.integer("sample")
            if value > maxval:
                reader.fail(f"Pixel value {value} exceeds maxval {maxval}", offset)
            pixels[k] = value

    bits = pixels.reshape(height, width) >= threshold
    logger.debug(f"Loaded {path}: {width}x{height} {magic.decode()} with {int(bits.sum())} foreground pixels")
    return BinaryShape(bits, spacing, origin)


def save_pgm(shape: BinaryShape, path: str):
    """Write a plain P2 PGM (255 foreground, 0 background)"""
    lines = ["P2", f"{shape.width} {shape.height}", "255"]
    for row in shape.bits:
        lines.append(" ".join("255" if b else "0" for b in row))
    atomic_write(path, "\n".join(lines) + "\n")


def _lattice_range(lo: float, hi: float, pitch: float) -> Tuple[int, int]:
    # round() guards against 0.9999999 style drift before flooring
    start = math.floor(round(lo / pitch, 9))
    stop = math.ceil(round(hi / pitch, 9))
    return start, max(stop, start + 1)


def rasterize(shape: Union[PolygonShape, DiskShape], resolution: float,
              bounds: Optional[Tuple[float, float, float, float]] = None,
              padding: int = 0) -> BinaryShape:
    """Point-sample ``shape`` at pixel centers on the global lattice of pitch 1/resolution"""
    if not (resolution > 0 and math.isfinite(resolution)):
        raise InvalidArgumentError(f"Resolution must be positive, got {resolution}")
    if not isinstance(shape, (PolygonShape, DiskShape)):
        raise InvalidArgumentError(f"Cannot rasterize {type(shape).__name__}")
    if padding < 0:
        raise InvalidArgumentError("Padding must be nonnegative")
    pitch = 1.0 / resolution
    xmin, ymin, xmax, ymax = shape.bounds() if bounds is None else bounds
    i0, i1 = _lattice_range(xmin, xmax, pitch)
    j0, j1 = _lattice_range(ymin, ymax, pitch)
    i0, i1, j0, j1 = i0 - padding, i1 + padding, j0 - padding, j1 + padding

    xs = (np.arange(i0, i1) + 0.5) * pitch
    ys = (np.arange(j0, j1) + 0.5) * pitch
    x, y = np.meshgrid(xs, ys)
    bottom_up = shape.contains(x, y)
    logger.debug(f"Rasterized {type(shape).__name__} onto {i1 - i0}x{j1 - j0} pixels at pitch {pitch:.6g}")
    return BinaryShape(bottom_up[::-1], pitch, (i0 * pitch, j0 * pitch))


def parse_shape_spec(spec: str, resolution: float, padding: int = 2) -> BinaryShape:
    """Rasterize ``disk:R[,cx,cy]``, ``square:a`` or ``rect:x0,y0,x1,y1``"""
    kind, _, args = spec.partition(':')
    try:
        numbers = [float(a) for a in args.split(',')] if args else []
    except ValueError:
        raise InvalidArgumentError(f"Invalid shape spec {spec!r}: arguments must be numbers") from None
    if kind == 'disk' and len(numbers) in (1, 3):
        center = tuple(numbers[1:]) if len(numbers) == 3 else (0.0, 0.0)
        shape = DiskShape(center, numbers[0])
    elif kind == 'square' and len(numbers) == 1:
        shape = PolygonShape.rectangle(0.0, 0.0, numbers[0], numbers[0])
    elif kind == 'rect' and len(numbers) == 4:
        shape = PolygonShape.rectangle(*numbers)
    else:
        raise InvalidArgumentError(
            f"Invalid shape spec {spec!r}; expected disk:R[,cx,cy], square:a or rect:x0,y0,x1,y1")
    return rasterize(shape, resolution, padding=padding)


def complex_for_shape(shape: BinaryShape, topology='cubical') -> GridComplex2:
    """The grid complex whose cells coincide with the shape's pixels"""
    return build_grid_complex(shape.width, shape.height, shape.spacing, topology, shape.origin)


def _check_match(shape: BinaryShape, k: GridComplex2):
    if (k.width, k.height) != (shape.width, shape.height):
        raise InvalidArgumentError(
            f"Complex is {k.width}x{k.height} but shape is {shape.width}x{shape.height}")
    if not math.isclose(k.spacing, shape.spacing, rel_tol=1e-12):
        raise InvalidArgumentError(f"Complex spacing {k.spacing} differs from shape spacing {shape.spacing}")


def to_2chain(shape: BinaryShape, k: GridComplex2) -> Chain:
    """Coefficient 1 on every face covering a foreground pixel"""
    _check_match(shape, k)
    pixels = np.flatnonzero(shape.bottom_up())
    faces = k.faces_of_pixels(pixels)
    return Chain(k, 2, faces, np.ones(len(faces), dtype=np.int64))


def boundary_chain(shape: BinaryShape, k: GridComplex2) -> Chain:
    return boundary(to_2chain(shape, k))


def shape_from_2chain(chain: Chain, spacing: Optional[float] = None) -> BinaryShape:
    """Inverse of to_2chain for {0,1}-valued chains covering whole pixels"""
    k = chain.complex
    if chain.dim != 2:
        raise InvalidArgumentError("Only 2-chains map back to shapes")
    if len(chain.values) and (chain.values.min() < 0 or chain.values.max() > 1):
        raise InvalidArgumentError("Only {0,1}-valued 2-chains map back to shapes")
    pixels = k.pixel_of_faces(chain.indices)
    counts = np.bincount(pixels, minlength=k.width * k.height)
    per_pixel = 1 if k.topology == Topology.CUBICAL else 2
    if np.any((counts != 0) & (counts != per_pixel)):
        raise InvalidArgumentError("Chain covers half of a pixel")
    bottom_up = (counts == per_pixel).reshape(k.height, k.width)
    return BinaryShape(bottom_up[::-1], spacing or k.spacing, k.origin)


def union(a: BinaryShape, b: BinaryShape) -> BinaryShape:
    _check_aligned(a, b)
    return a.with_bits(a.bits | b.bits)


def difference(a: BinaryShape, b: BinaryShape) -> BinaryShape:
    _check_aligned(a, b)
    return a.with_bits(a.bits & ~b.bits)


def symmetric_difference_area(a: BinaryShape, b: BinaryShape) -> float:
    _check_aligned(a, b)
    return int((a.bits ^ b.bits).sum()) * a.spacing ** 2


def _check_aligned(a: BinaryShape, b: BinaryShape):
    if a.bits.shape != b.bits.shape or a.spacing != b.spacing or a.origin != b.origin:
        raise InvalidArgumentError("Shapes are not on the same grid; align them first")


# ---------------------------------------------------------------- JSON

def _round_floats(value):
    """Floats to 12 significant digits; repr of the result never exceeds them"""
    if value is None:
        return value
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (float, np.floating)):
        return float(f"{float(value):.12g}")
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, dict):
        return {k: _round_floats(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_round_floats(v) for v in value]
    return value


def result_to_dict(result: FlatNormResult) -> Dict:
    """Shared result schema with fixed key order"""
    return _round_floats({
        'lambda': result.lam,
        'value': result.value,
        'mass_residual': result.mass_residual,
        'mass_s': result.mass_s,
        's_chain': result.s_chain.to_dict() if result.s_chain is not None else None,
        'residual_chain': result.residual_chain.to_dict() if result.residual_chain is not None else None,
        'method': result.method,
        'stencil': result.stencil,
        'layered': result.layered,
        'integral': result.integral,
        'iterations': result.iterations,
        'input_chain': result.input_chain.to_dict(),
        'diagnostics': dict(sorted(result.diagnostics.items())),
    })


def dumps(payload: Dict) -> str:
    return json.dumps(_round_floats(payload), indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def render_json(result: FlatNormResult, extra: Optional[Dict] = None) -> str:
    payload = result_to_dict(result)
    if extra:
        payload.update(_round_floats(extra))
    return dumps(payload)


def export_json(result: FlatNormResult, path: str, extra: Optional[Dict] = None):
    atomic_write(path, render_json(result, extra))
    logger.info(f"Wrote result JSON to {path}")


def save_chain_json(chain: Chain, path: str):
    atomic_write(path, dumps(chain.to_dict()))


def load_chain_json(path: str, complex_: Optional[GridComplex2] = None) -> Chain:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except OSError as e:
        raise InvalidArgumentError(f"Cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ParseError(f"Invalid JSON: {e.msg}", e.pos, path) from e
    return chain_from_dict(data, complex_)


def sweep_to_csv(curve: SweepCurve) -> str:
    lines = ["lambda,value,method,stencil"]
    for lam, value in curve.points():
        lines.append(f"{lam:.12g},{value:.12g},{curve.method},{curve.stencil or ''}")
    return "\n".join(lines) + "\n"


def sweep_to_dict(curve: SweepCurve) -> Dict:
    return {
        'method': curve.method,
        'stencil': curve.stencil,
        'input_digest': curve.input_digest,
        'points': [[lam, value] for lam, value in curve.points()],
    }


def sweep_to_json(curve: SweepCurve) -> str:
    return dumps(sweep_to_dict(curve))


# ---------------------------------------------------------------- SVG

SVG_STYLE = """.input { fill: none; stroke: #1a1a1a; stroke-linecap: round; }
.residual { fill: none; stroke: #d0342c; stroke-dasharray: 2 2; stroke-linecap: round; }
.s-positive { fill: #3b7dd8; stroke: none; }
.s-negative { fill: #e08a1e; stroke: none; }
.caption { font-family: monospace; font-size: 10px; fill: #333333; }
"""


def _edge_segments(chain: Chain, to_px) -> Dict[int, List[Tuple[float, float, float, float]]]:
    k = chain.complex
    coords = k.vertex_coords()
    by_multiplicity: Dict[int, List] = {}
    for edge, coeff in zip(chain.indices, chain.values):
        tail, head = k.edge_vertices[edge]
        x1, y1 = to_px(*coords[tail])
        x2, y2 = to_px(*coords[head])
        by_multiplicity.setdefault(int(abs(coeff)), []).append((x1, y1, x2, y2))
    return by_multiplicity


def render_svg(result: FlatNormResult) -> str:
    k = result.input_chain.complex
    cell = Config.SVG_CELL_SIZE
    margin = cell
    width = k.width * cell + 2 * margin
    height = k.height * cell + 2 * margin + 2 * cell
    ox, oy = k.origin

    def to_px(x, y):
        return (margin + (x - ox) / k.spacing * cell,
                margin + (k.height - (y - oy) / k.spacing) * cell)

    svg = SVG()
    svg.header(width, height, title=f"flat norm decomposition, lambda={result.lam:.12g}")
    svg.style(SVG_STYLE)
    svg.filled_rectangle(0, 0, width, height, "#ffffff", 'class="background"')

    svg.group_start({'id': 's-layer'})
    if result.s_chain is not None and not result.s_chain.is_zero():
        coords = k.vertex_coords()
        groups: Dict[Tuple[int, int], List] = {}
        for face, coeff in zip(result.s_chain.indices, result.s_chain.values):
            polygon = [to_px(*coords[v]) for v in k.face_vertices[face]]
            groups.setdefault((1 if coeff > 0 else -1, int(abs(coeff))), []).append(polygon)
        for (sign, magnitude) in sorted(groups):
            css = 's-positive' if sign > 0 else 's-negative'
            opacity = min(1.0, 0.3 * magnitude)
            svg.polygons_path(groups[(sign, magnitude)], f'class="{css}" fill-opacity="{opacity:.3f}"')
    svg.group_end()

    for layer, chain, css in (('input-layer', result.input_chain, 'input'),
                              ('residual-layer', result.residual_chain, 'residual')):
        svg.group_start({'id': layer})
        if chain is not None:
            segments = _edge_segments(chain, to_px)
            for multiplicity in sorted(segments):
                stroke = min(4.0, 1.0 + 0.5 * (multiplicity - 1))
                svg.segments_path(segments[multiplicity], f'class="{css}" stroke-width="{stroke:.3f}"')
        svg.group_end()

    caption = (f"lambda={result.lam:.6g} F={result.value:.6g} "
               f"M(T-dS)={result.mass_residual:.6g} M(S)={result.mass_s:.6g} {result.method}")
    if result.stencil:
        caption += f" {result.stencil}"
    svg.text(margin, height - cell, caption, 'class="caption"')
    return svg.get_svg()


def export_svg(result: FlatNormResult, path: str):
    atomic_write(path, render_svg(result))
    logger.info(f"Wrote decomposition SVG to {path}")
