import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from models.chain_complex import Chain
from models.shapes import BinaryShape
from utils.errors import InvalidArgumentError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class FlatNormResult:
    """F_lambda(T) together with the decomposition T = (T - dS) + dS.

    For graph-cut results ``mass_residual`` is the stencil perimeter of the
    kept set and ``mass_s`` the area of the flipped pixels, so
    ``value == mass_residual + lam * mass_s`` holds for every method.
    """
    value: float
    lam: float
    input_chain: Chain
    s_chain: Optional[Chain]
    residual_chain: Optional[Chain]
    mass_residual: float
    mass_s: float
    method: str
    stencil: Optional[str] = None
    layered: bool = False
    integral: bool = True
    iterations: int = 0
    diagnostics: Dict = field(default_factory=dict)
    s_relaxed: Optional[np.ndarray] = None
    sigma: Optional[BinaryShape] = None

    @property
    def boundary_of_s(self) -> Optional[Chain]:
        """The dS piece of the decomposition"""
        if self.residual_chain is None:
            return None
        return self.input_chain - self.residual_chain


@dataclass(frozen=True)
class SweepCurve:
    lambdas: Tuple[float, ...]
    values: Tuple[float, ...]
    method: str
    stencil: Optional[str]
    input_digest: str

    def __post_init__(self):
        if len(self.lambdas) != len(self.values):
            raise InvalidArgumentError("Sweep lambdas and values differ in length")
        lambdas = np.asarray(self.lambdas, dtype=float)
        if len(lambdas) > 1 and np.any(np.diff(lambdas) <= 0):
            raise InvalidArgumentError("Sweep lambdas must be strictly increasing")
        values = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise InvalidArgumentError("Sweep values must be finite and nonnegative")

    def points(self) -> List[Tuple[float, float]]:
        return list(zip(self.lambdas, self.values))

    def is_nondecreasing(self, tol: float = 1e-7) -> bool:
        return bool(np.all(np.diff(self.values) >= -tol))

    def second_differences(self) -> np.ndarray:
        """Slope changes scaled by the local step; plain second differences on uniform grids"""
        lambdas = np.asarray(self.lambdas, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if len(lambdas) < 3:
            return np.empty(0)
        steps = np.diff(lambdas)
        slopes = np.diff(values) / steps
        return np.diff(slopes) * np.minimum(steps[:-1], steps[1:])

    def is_concave(self, tol: float = 1e-7) -> bool:
        return bool(np.all(self.second_differences() <= tol))

    def kink_location(self) -> Optional[float]:
        """Lambda where the slope drops the most"""
        drops = self.second_differences()
        if not len(drops):
            return None
        return float(self.lambdas[int(np.argmin(drops)) + 1])


@dataclass(frozen=True)
class AgreementReport:
    lp_value: float
    graphcut_value: float
    stencil: str
    delta: float
    tolerance: float

    @property
    def agree(self) -> bool:
        return bool(self.delta <= self.tolerance)

    def to_dict(self) -> Dict:
        return {
            'lp': self.lp_value,
            'graphcut': self.graphcut_value,
            'stencil': self.stencil,
            'delta': self.delta,
            'agree': self.agree,
        }


@dataclass(frozen=True)
class CornerRoundingReport:
    side: float
    lam: float
    resolution: float
    value: float
    expected_value: float
    value_error: float
    corner_radii: Tuple[float, ...]
    expected_radius: float
    radius_error: float
    value_tolerance: float = 0.03
    radius_tolerance: float = 0.15

    @property
    def value_ok(self) -> bool:
        return self.value_error <= self.value_tolerance

    @property
    def radius_ok(self) -> bool:
        return self.radius_error <= self.radius_tolerance

    @property
    def passed(self) -> bool:
        return self.value_ok and self.radius_ok
