"""
Oriented 2-D grid complexes and integer chains.

Orientation convention (fixed globally):
- vertices, edges and faces are indexed row-major from the lower-left corner;
- horizontal edges point toward +x, vertical edges toward +y, diagonal
  edges (right-triangulated topology) from lower-left to upper-right;
- faces are oriented counterclockwise, so the boundary of a face walks its
  edges counterclockwise.
"""

import logging
import math
import uuid
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, Mapping, Optional, Tuple

import numpy as np
from scipy import sparse

from utils.errors import InvalidArgumentError

logger = logging.getLogger(__name__)


class Topology(str, Enum):
    CUBICAL = 'cubical'
    TRIANGULATED = 'right-triangulated'

    @classmethod
    def parse(cls, value) -> 'Topology':
        if isinstance(value, Topology):
            return value
        for member in cls:
            if member.value == value:
                return member
        raise InvalidArgumentError(f"Unknown topology: {value!r}")


@dataclass(frozen=True, eq=False)
class GridComplex2:
    """A finite oriented 2-D cell complex over a width x height grid of cells.

    Build instances with :func:`build_grid_complex`; every complex gets an
    opaque ``complex_id`` and chains only combine with chains of the same id.
    """
    width: int
    height: int
    spacing: float
    topology: Topology
    origin: Tuple[float, float]
    complex_id: str
    edge_vertices: np.ndarray   # (E, 2) tail, head
    face_vertices: np.ndarray   # (F, 3 or 4) counterclockwise
    edge_weights: np.ndarray
    face_weights: np.ndarray
    d1: sparse.csr_matrix = field(repr=False)  # V x E signed incidence
    d2: sparse.csr_matrix = field(repr=False)  # E x F signed incidence
    # Mass is accumulated per weight class so integer sums stay exact.
    edge_classes: np.ndarray = field(repr=False)
    edge_class_weights: np.ndarray = field(repr=False)
    face_classes: np.ndarray = field(repr=False)
    face_class_weights: np.ndarray = field(repr=False)

    @property
    def n_vertices(self) -> int:
        return (self.width + 1) * (self.height + 1)

    @property
    def n_edges(self) -> int:
        return len(self.edge_weights)

    @property
    def n_faces(self) -> int:
        return len(self.face_weights)

    @property
    def n_horizontal_edges(self) -> int:
        return self.width * (self.height + 1)

    @property
    def n_vertical_edges(self) -> int:
        return (self.width + 1) * self.height

    def cell_count(self, dim: int) -> int:
        if dim == 0:
            return self.n_vertices
        if dim == 1:
            return self.n_edges
        if dim == 2:
            return self.n_faces
        raise InvalidArgumentError(f"Chain dimension must be 0, 1 or 2, got {dim}")

    def vertex_index(self, i, j):
        return np.asarray(j) * (self.width + 1) + np.asarray(i)

    def horizontal_edge(self, i, j):
        return np.asarray(j) * self.width + np.asarray(i)

    def vertical_edge(self, i, j):
        return self.n_horizontal_edges + np.asarray(j) * (self.width + 1) + np.asarray(i)

    def diagonal_edge(self, i, j):
        if self.topology != Topology.TRIANGULATED:
            raise InvalidArgumentError("Cubical complexes have no diagonal edges")
        return self.n_horizontal_edges + self.n_vertical_edges + np.asarray(j) * self.width + np.asarray(i)

    def vertex_coords(self, vertices=None) -> np.ndarray:
        """Physical (x, y) coordinates of vertices, shape (n, 2)"""
        if vertices is None:
            vertices = np.arange(self.n_vertices)
        vertices = np.asarray(vertices)
        i = vertices % (self.width + 1)
        j = vertices // (self.width + 1)
        return np.stack([self.origin[0] + i * self.spacing, self.origin[1] + j * self.spacing], axis=-1)

    def faces_of_pixels(self, pixels) -> np.ndarray:
        """Faces covering the given row-major pixel indices (one or two per pixel)"""
        pixels = np.asarray(pixels, dtype=np.int64)
        if self.topology == Topology.CUBICAL:
            return pixels
        return np.stack([2 * pixels, 2 * pixels + 1], axis=-1).reshape(-1)

    def pixel_of_faces(self, faces) -> np.ndarray:
        faces = np.asarray(faces, dtype=np.int64)
        if self.topology == Topology.CUBICAL:
            return faces
        return faces // 2

    def weights(self, dim: int) -> np.ndarray:
        if dim == 0:
            return np.ones(self.n_vertices)
        if dim == 1:
            return self.edge_weights
        if dim == 2:
            return self.face_weights
        raise InvalidArgumentError(f"Chain dimension must be 0, 1 or 2, got {dim}")

    def complex_params(self) -> Dict:
        """Parameter block of the JSON chain format"""
        return {
            'width': self.width,
            'height': self.height,
            'spacing': self.spacing,
            'topology': self.topology.value,
            'origin': [self.origin[0], self.origin[1]],
        }

    def __repr__(self):
        return (f"GridComplex2({self.width}x{self.height}, spacing={self.spacing}, "
                f"topology={self.topology.value}, id={self.complex_id[:8]})")


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def build_grid_complex(width: int, height: int, spacing: float, topology='cubical',
                       origin: Tuple[float, float] = (0.0, 0.0)) -> GridComplex2:
    """Build a cubical or right-triangulated grid complex"""
    topology = Topology.parse(topology)
    if isinstance(width, bool) or isinstance(height, bool) or int(width) != width or int(height) != height:
        raise InvalidArgumentError(f"Grid dimensions must be integers, got {width}x{height}")
    width, height = int(width), int(height)
    if width < 1 or height < 1:
        raise InvalidArgumentError(f"Grid dimensions must be at least 1x1, got {width}x{height}")
    if not (spacing > 0 and math.isfinite(spacing)):
        raise InvalidArgumentError(f"Spacing must be positive and finite, got {spacing}")
    spacing = float(spacing)

    w, h = width, height
    n_h = w * (h + 1)
    n_v = (w + 1) * h

    def vertex(i, j):
        return j * (w + 1) + i

    def h_edge(i, j):
        return j * w + i

    def v_edge(i, j):
        return n_h + j * (w + 1) + i

    # Edges: tail/head vertices
    hj, hi = np.divmod(np.arange(n_h), w)
    vj, vi = np.divmod(np.arange(n_v), w + 1)
    tails = [vertex(hi, hj), vertex(vi, vj)]
    heads = [vertex(hi + 1, hj), vertex(vi, vj + 1)]
    lengths = [np.full(n_h, spacing), np.full(n_v, spacing)]
    classes = [np.zeros(n_h, dtype=np.int64), np.zeros(n_v, dtype=np.int64)]

    pj, pi = np.divmod(np.arange(w * h), w)
    if topology == Topology.TRIANGULATED:
        d_base = n_h + n_v
        tails.append(vertex(pi, pj))
        heads.append(vertex(pi + 1, pj + 1))
        lengths.append(np.full(w * h, spacing * math.sqrt(2.0)))
        classes.append(np.ones(w * h, dtype=np.int64))
    edge_vertices = np.stack([np.concatenate(tails), np.concatenate(heads)], axis=1).astype(np.int64)
    edge_weights = np.concatenate(lengths)
    edge_classes = np.concatenate(classes)
    n_edges = len(edge_weights)
    edge_class_weights = np.array([spacing, spacing * math.sqrt(2.0)])

    v00 = vertex(pi, pj)
    v10 = vertex(pi + 1, pj)
    v11 = vertex(pi + 1, pj + 1)
    v01 = vertex(pi, pj + 1)
    bottom = h_edge(pi, pj)
    right = v_edge(pi + 1, pj)
    top = h_edge(pi, pj + 1)
    left = v_edge(pi, pj)

    if topology == Topology.CUBICAL:
        n_faces = w * h
        faces = np.arange(n_faces)
        rows = np.concatenate([bottom, right, top, left])
        cols = np.concatenate([faces] * 4)
        signs = np.concatenate([np.ones(n_faces), np.ones(n_faces), -np.ones(n_faces), -np.ones(n_faces)])
        face_vertices = np.stack([v00, v10, v11, v01], axis=1)
        face_weights = np.full(n_faces, spacing * spacing)
        face_class_weights = np.array([spacing * spacing])
    else:
        n_faces = 2 * w * h
        diag = d_base + pj * w + pi
        lower = 2 * np.arange(w * h)
        upper = lower + 1
        ones = np.ones(w * h)
        # lower-right triangle: bottom, right, then back down the diagonal
        # upper-left triangle: up the diagonal, top (toward -x), left (toward -y)
        rows = np.concatenate([bottom, right, diag, diag, top, left])
        cols = np.concatenate([lower, lower, lower, upper, upper, upper])
        signs = np.concatenate([ones, ones, -ones, ones, -ones, -ones])
        face_vertices = np.empty((n_faces, 3), dtype=np.int64)
        face_vertices[lower] = np.stack([v00, v10, v11], axis=1)
        face_vertices[upper] = np.stack([v00, v11, v01], axis=1)
        face_weights = np.full(n_faces, spacing * spacing / 2.0)
        face_class_weights = np.array([spacing * spacing / 2.0])

    d2 = sparse.csr_matrix((signs.astype(np.int64), (rows, cols)), shape=(n_edges, n_faces))
    n_vertices = (w + 1) * (h + 1)
    edge_ids = np.arange(n_edges)
    d1 = sparse.csr_matrix(
        (np.concatenate([-np.ones(n_edges, dtype=np.int64), np.ones(n_edges, dtype=np.int64)]),
         (np.concatenate([edge_vertices[:, 0], edge_vertices[:, 1]]), np.concatenate([edge_ids, edge_ids]))),
        shape=(n_vertices, n_edges))

    complex_ = GridComplex2(
        width=w,
        height=h,
        spacing=spacing,
        topology=topology,
        origin=(float(origin[0]), float(origin[1])),
        complex_id=uuid.uuid4().hex,
        edge_vertices=_frozen(edge_vertices),
        face_vertices=_frozen(face_vertices.astype(np.int64)),
        edge_weights=_frozen(edge_weights),
        face_weights=_frozen(face_weights),
        d1=d1,
        d2=d2,
        edge_classes=_frozen(edge_classes),
        edge_class_weights=_frozen(edge_class_weights),
        face_classes=_frozen(np.zeros(n_faces, dtype=np.int64)),
        face_class_weights=_frozen(face_class_weights),
    )
    logger.debug(f"Built {complex_!r}: {n_vertices} vertices, {n_edges} edges, {n_faces} faces")
    return complex_


@dataclass(frozen=True, eq=False)
class Chain:
    """Integer-coefficient chain of one dimension on a GridComplex2.

    ``indices`` is sorted ascending and ``values`` holds the matching
    nonzero integer coefficients.
    """
    complex: GridComplex2
    dim: int
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        count = self.complex.cell_count(self.dim)
        indices = np.asarray(self.indices, dtype=np.int64)
        values = np.asarray(self.values, dtype=np.int64)
        if indices.shape != values.shape or indices.ndim != 1:
            raise InvalidArgumentError("Chain indices and values must be matching 1-D arrays")
        if len(indices):
            if indices.min() < 0 or indices.max() >= count:
                raise InvalidArgumentError(f"Cell index out of range for dim {self.dim} (0..{count - 1})")
            if np.any(np.diff(indices) <= 0):
                raise InvalidArgumentError("Chain indices must be strictly increasing")
            if np.any(values == 0):
                raise InvalidArgumentError("Chain coefficients must be nonzero")
        object.__setattr__(self, 'indices', _frozen(indices))
        object.__setattr__(self, 'values', _frozen(values))

    @classmethod
    def zero(cls, complex_: GridComplex2, dim: int) -> 'Chain':
        return cls(complex_, dim, np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64))

    @classmethod
    def from_dense(cls, complex_: GridComplex2, dim: int, dense) -> 'Chain':
        dense = np.asarray(dense)
        if dense.shape != (complex_.cell_count(dim),):
            raise InvalidArgumentError(f"Dense vector has shape {dense.shape}, expected ({complex_.cell_count(dim)},)")
        if dense.dtype.kind == 'f':
            if not np.all(dense == np.round(dense)):
                raise InvalidArgumentError("Chain coefficients must be integers")
            dense = np.round(dense)
        dense = dense.astype(np.int64)
        indices = np.flatnonzero(dense)
        return cls(complex_, dim, indices, dense[indices])

    @classmethod
    def from_coefficients(cls, complex_: GridComplex2, dim: int, coefficients) -> 'Chain':
        """Build from a mapping or iterable of (index, coefficient) pairs; repeats accumulate"""
        items = coefficients.items() if isinstance(coefficients, Mapping) else coefficients
        count = complex_.cell_count(dim)
        dense = np.zeros(count, dtype=np.int64)
        for index, coeff in items:
            if int(coeff) != coeff:
                raise InvalidArgumentError(f"Chain coefficient must be an integer, got {coeff!r}")
            if not 0 <= int(index) < count:
                raise InvalidArgumentError(f"Cell index {index} out of range for dim {dim}")
            dense[int(index)] += int(coeff)
        return cls.from_dense(complex_, dim, dense)

    @property
    def coefficients(self) -> Dict[int, int]:
        return {int(i): int(v) for i, v in zip(self.indices, self.values)}

    @property
    def complex_id(self) -> str:
        return self.complex.complex_id

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.complex.cell_count(self.dim), dtype=np.int64)
        dense[self.indices] = self.values
        return dense

    def is_zero(self) -> bool:
        return len(self.indices) == 0

    def support(self) -> np.ndarray:
        """Sorted indices of the cells with a nonzero coefficient"""
        return self.indices

    def to_dict(self) -> Dict:
        """JSON chain format: complex parameters, dim, sorted [index, coeff] pairs"""
        return {
            'complex': self.complex.complex_params(),
            'dim': self.dim,
            'cells': [[int(i), int(v)] for i, v in zip(self.indices, self.values)],
        }

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, scale(other, -1))

    def __neg__(self):
        return scale(self, -1)

    def __mul__(self, k):
        return scale(self, k)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, Chain):
            return NotImplemented
        return (self.complex_id == other.complex_id and self.dim == other.dim
                and np.array_equal(self.indices, other.indices)
                and np.array_equal(self.values, other.values))

    __hash__ = None

    def __len__(self):
        return len(self.indices)

    def __repr__(self):
        return f"Chain(dim={self.dim}, cells={len(self.indices)}, complex={self.complex_id[:8]})"


def chain_from_dict(data: Dict, complex_: Optional[GridComplex2] = None) -> Chain:
    """Inverse of Chain.to_dict; reuses ``complex_`` when its parameters match"""
    try:
        params = data['complex']
        dim = int(data['dim'])
        cells = data['cells']
    except (KeyError, TypeError) as e:
        raise InvalidArgumentError(f"Malformed chain JSON: missing {e}") from e
    if complex_ is None:
        complex_ = build_grid_complex(
            params['width'], params['height'], params['spacing'],
            params.get('topology', 'cubical'), tuple(params.get('origin', (0.0, 0.0))))
    elif complex_.complex_params() != {**complex_.complex_params(), **params}:
        raise InvalidArgumentError("Chain JSON complex parameters do not match the given complex")
    indices = [int(c[0]) for c in cells]
    if indices != sorted(set(indices)):
        raise InvalidArgumentError("Chain JSON cells must have strictly ascending indices")
    return Chain(complex_, dim,
                 np.array(indices, dtype=np.int64),
                 np.array([int(c[1]) for c in cells], dtype=np.int64))


def _require_compatible(a: Chain, b: Chain):
    if a.complex_id != b.complex_id:
        raise InvalidArgumentError("Chains live on different complexes")
    if a.dim != b.dim:
        raise InvalidArgumentError(f"Chain dimensions differ: {a.dim} vs {b.dim}")


def boundary(c: Chain) -> Chain:
    """Signed boundary: 2-chain -> 1-chain, 1-chain -> 0-chain"""
    if c.dim == 2:
        matrix = c.complex.d2
    elif c.dim == 1:
        matrix = c.complex.d1
    else:
        raise InvalidArgumentError("The boundary of a 0-chain is not defined")
    if c.is_zero():
        return Chain.zero(c.complex, c.dim - 1)
    # Restrict to the chain's columns so huge sparse chains stay cheap.
    result = matrix[:, c.indices] @ c.values
    return Chain.from_dense(c.complex, c.dim - 1, np.asarray(result).reshape(-1))


def mass(c: Chain) -> float:
    """Sum of |coefficient| x cell weight (vertices weigh 1)"""
    if c.is_zero():
        return 0.0
    magnitudes = np.abs(c.values)
    if c.dim == 0:
        return float(magnitudes.sum())
    if c.dim == 1:
        classes, class_weights = c.complex.edge_classes, c.complex.edge_class_weights
    else:
        classes, class_weights = c.complex.face_classes, c.complex.face_class_weights
    counts = np.bincount(classes[c.indices], weights=magnitudes, minlength=len(class_weights))
    return float(sum(w * int(n) for w, n in zip(class_weights, counts)))


def add(a: Chain, b: Chain) -> Chain:
    _require_compatible(a, b)
    if a.is_zero():
        return b
    if b.is_zero():
        return a
    indices = np.concatenate([a.indices, b.indices])
    values = np.concatenate([a.values, b.values])
    unique, inverse = np.unique(indices, return_inverse=True)
    sums = np.zeros(len(unique), dtype=np.int64)
    np.add.at(sums, inverse, values)
    keep = sums != 0
    return Chain(a.complex, a.dim, unique[keep], sums[keep])


def scale(a: Chain, k: int) -> Chain:
    if isinstance(k, bool) or int(k) != k:
        raise InvalidArgumentError(f"Chains scale by integers only, got {k!r}")
    k = int(k)
    if k == 0:
        return Chain.zero(a.complex, a.dim)
    return Chain(a.complex, a.dim, a.indices, a.values * k)


def sum_chains(chains: Iterable[Chain]) -> Chain:
    chains = list(chains)
    if not chains:
        raise InvalidArgumentError("sum_chains needs at least one chain")
    total = chains[0]
    for c in chains[1:]:
        total = add(total, c)
    return total
