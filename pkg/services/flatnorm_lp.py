"""
Exact flat norm on a grid complex by linear programming.

    F_lambda(T) = min_S  M(T - dS) + lambda * M(S)

is written in split-variable form over the edges (x) and faces (y):

    minimize   w.(x+ + x-) + lambda * v.(y+ + y-)
    subject to x+ - x- + B (y+ - y-) = t,   all variables >= 0

with B the signed face-to-edge incidence matrix. The constraint matrix has
entries in {-1, 0, +1} and is totally unimodular on these complexes, so the
relaxation optimum is expected to be integral; that is checked, not assumed.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from models.chain_complex import Chain, GridComplex2, boundary, mass
from models.results import FlatNormResult
from utils.config import Config
from utils.errors import InvalidArgumentError, SolverResourceError

logger = logging.getLogger(__name__)


def _check_lambda(lam: float):
    if not (lam > 0 and np.isfinite(lam)):
        raise InvalidArgumentError(f"lambda must be positive and finite, got {lam}")


def _check_input(k: GridComplex2, t: Chain):
    if t.dim != 1:
        raise InvalidArgumentError(f"The flat norm input must be a 1-chain, got dim {t.dim}")
    if t.complex_id != k.complex_id:
        raise InvalidArgumentError("Input chain does not live on the given complex")


def lp_fits(k: GridComplex2) -> bool:
    return k.width * k.height <= Config.LP_MAX_CELLS


def check_lp_size(k: GridComplex2):
    """The dense tableau grows with edges x (edges + faces); refuse grids over the cap"""
    if not lp_fits(k):
        raise SolverResourceError(
            f"LP solver is capped at {Config.LP_MAX_CELLS} grid cells (LP_MAX_CELLS); "
            f"the complex is {k.width}x{k.height}")


@dataclass(frozen=True)
class LpProblem:
    """Split-variable LP for one complex and right-hand side.

    Column layout: [x+ (E) | x- (E) | y+ (F) | y- (F)].
    """
    complex: GridComplex2
    rhs: np.ndarray         # t as a dense integer vector over edges
    costs: np.ndarray
    lam: float

    @classmethod
    def build(cls, k: GridComplex2, t: Chain, lam: float) -> 'LpProblem':
        _check_input(k, t)
        _check_lambda(lam)
        check_lp_size(k)
        return cls(k, t.to_dense(), cls._costs(k, lam), float(lam))

    @staticmethod
    def _costs(k: GridComplex2, lam: float) -> np.ndarray:
        w = k.edge_weights
        v = lam * k.face_weights
        return np.concatenate([w, w, v, v])

    def with_lambda(self, lam: float) -> 'LpProblem':
        """Same constraints, new objective"""
        _check_lambda(lam)
        return LpProblem(self.complex, self.rhs, self._costs(self.complex, lam), float(lam))

    @property
    def n_rows(self) -> int:
        return self.complex.n_edges

    @property
    def n_columns(self) -> int:
        return 2 * self.complex.n_edges + 2 * self.complex.n_faces

    def constraint_matrix(self) -> np.ndarray:
        """[I | -I | B | -B], scattered straight into one dense tableau"""
        k = self.complex
        n_e, n_f = k.n_edges, k.n_faces
        matrix = np.zeros((n_e, self.n_columns))
        rows = np.arange(n_e)
        matrix[rows, rows] = 1.0
        matrix[rows, n_e + rows] = -1.0
        d2 = k.d2.tocoo()
        matrix[d2.row, 2 * n_e + d2.col] = d2.data
        matrix[d2.row, 2 * n_e + n_f + d2.col] = -d2.data
        return matrix


@dataclass
class SimplexOutcome:
    x: np.ndarray
    objective: float
    iterations: int


class SimplexSolver:
    """Primal tableau simplex with Bland's rule.

    The starting basis takes x+ (or x- where t is negative) for every row,
    which is the feasible point S = 0, so no phase one is needed.
    """

    def __init__(self, max_iterations: Optional[int] = None, tolerance: Optional[float] = None):
        self.max_iterations = Config.SIMPLEX_MAX_ITERATIONS if max_iterations is None else max_iterations
        self.tolerance = Config.SIMPLEX_TOLERANCE if tolerance is None else tolerance

    def solve(self, problem: LpProblem) -> SimplexOutcome:
        tol = self.tolerance
        m = problem.n_rows
        costs = problem.costs
        signs = np.where(problem.rhs < 0, -1.0, 1.0)

        tableau = problem.constraint_matrix() * signs[:, None]
        rhs = np.abs(problem.rhs).astype(float)
        basis = np.where(signs > 0, np.arange(m), m + np.arange(m))

        reduced = costs - costs[basis] @ tableau
        objective = float(costs[basis] @ rhs)

        iterations = 0
        while True:
            candidates = np.flatnonzero(reduced < -tol)
            if not len(candidates):
                break
            if iterations >= self.max_iterations:
                raise SolverResourceError(
                    f"Simplex iteration cap {self.max_iterations} exceeded",
                    best_bound=objective, iterations=iterations)
            entering = candidates[0]
            column = tableau[:, entering]
            rows = np.flatnonzero(column > tol)
            if not len(rows):
                # The objective is bounded below by zero, so this is numerical breakdown.
                raise SolverResourceError("Simplex found an unbounded direction", best_bound=objective,
                                          iterations=iterations)
            ratios = rhs[rows] / column[rows]
            best = ratios.min()
            tied = rows[ratios <= best + tol]
            leaving = tied[np.argmin(basis[tied])]

            pivot_row = tableau[leaving] / tableau[leaving, entering]
            pivot_rhs = rhs[leaving] / tableau[leaving, entering]
            factors = tableau[:, entering].copy()
            factors[leaving] = 0.0
            tableau -= np.outer(factors, pivot_row)
            rhs -= factors * pivot_rhs
            tableau[leaving] = pivot_row
            rhs[leaving] = pivot_rhs
            np.maximum(rhs, 0.0, out=rhs)

            step = reduced[entering]
            reduced -= step * pivot_row
            objective += step * pivot_rhs
            basis[leaving] = entering
            iterations += 1

        x = np.zeros(problem.n_columns)
        x[basis] = rhs
        logger.debug(f"Simplex finished: {m} rows, {problem.n_columns} columns, "
                     f"{iterations} pivots, objective {objective:.12g}")
        return SimplexOutcome(x=x, objective=float(costs @ x), iterations=iterations)


def _zero_result(k: GridComplex2, t: Chain, lam: float, method: str) -> FlatNormResult:
    return FlatNormResult(
        value=0.0, lam=float(lam), input_chain=t,
        s_chain=Chain.zero(k, 2), residual_chain=Chain.zero(k, 1),
        mass_residual=0.0, mass_s=0.0, method=method,
        diagnostics={'max_abs_s': 0, 'exceeds_oracle_range': False})


def _result_from_s(k: GridComplex2, t: Chain, s: Chain, lam: float, method: str, **kwargs) -> FlatNormResult:
    residual = t - boundary(s)
    mass_residual = mass(residual)
    mass_s = mass(s)
    return FlatNormResult(
        value=mass_residual + lam * mass_s, lam=float(lam), input_chain=t,
        s_chain=s, residual_chain=residual, mass_residual=mass_residual, mass_s=mass_s,
        method=method, **kwargs)


def flatnorm_lp(k: GridComplex2, t: Chain, lam: float, solver: Optional[SimplexSolver] = None,
                problem: Optional[LpProblem] = None) -> FlatNormResult:
    """Flat norm of a 1-chain by the split-variable LP.

    ``problem`` may carry a prebuilt LpProblem for the same input (sweeps
    rebuild only its objective).
    """
    _check_input(k, t)
    _check_lambda(lam)
    if t.is_zero():
        return _zero_result(k, t, lam, 'lp')

    problem = LpProblem.build(k, t, lam) if problem is None else problem.with_lambda(lam)
    outcome = (solver or SimplexSolver()).solve(problem)

    n_e, n_f = k.n_edges, k.n_faces
    y = outcome.x[2 * n_e:2 * n_e + n_f] - outcome.x[2 * n_e + n_f:]
    rounded = np.round(y)
    gap = float(np.abs(y - rounded).max()) if n_f else 0.0
    integral = gap <= Config.INTEGRALITY_TOLERANCE
    max_abs_s = float(np.abs(y).max()) if n_f else 0.0
    diagnostics = {
        'objective': outcome.objective,
        'integrality_gap': gap,
        'max_abs_s': max_abs_s,
        'exceeds_oracle_range': max_abs_s > Config.ORACLE_COEFF_RANGE + Config.INTEGRALITY_TOLERANCE,
    }

    if not integral:
        logger.warning(f"LP optimum is not integral (gap {gap:.3g}); returning the relaxed solution")
        x = outcome.x[:n_e] - outcome.x[n_e:2 * n_e]
        return FlatNormResult(
            value=outcome.objective, lam=float(lam), input_chain=t, s_chain=None, residual_chain=None,
            mass_residual=float(k.edge_weights @ np.abs(x)),
            mass_s=float(k.face_weights @ np.abs(y)),
            method='lp', integral=False, iterations=outcome.iterations,
            diagnostics=diagnostics, s_relaxed=y)

    s = Chain.from_dense(k, 2, rounded.astype(np.int64))
    return _result_from_s(k, t, s, lam, 'lp', iterations=outcome.iterations, diagnostics=diagnostics)


def exhaustive_oracle(k: GridComplex2, t: Chain, lam: float, coeff_range: Optional[int] = None,
                      max_faces: Optional[int] = None, chunk_size: int = 1 << 15) -> FlatNormResult:
    """Brute-force minimum over every 2-chain with coefficients in [-range, range].

    Candidates are enumerated in base (2r+1) order; the first minimum wins.
    """
    _check_input(k, t)
    _check_lambda(lam)
    coeff_range = Config.ORACLE_COEFF_RANGE if coeff_range is None else int(coeff_range)
    max_faces = Config.ORACLE_MAX_FACES if max_faces is None else max_faces
    if coeff_range < 0:
        raise InvalidArgumentError("Oracle coefficient range must be nonnegative")
    n_f = k.n_faces
    if n_f > max_faces:
        raise SolverResourceError(f"Exhaustive oracle is capped at {max_faces} faces, complex has {n_f}")

    base = 2 * coeff_range + 1
    total = base ** n_f
    b = k.d2.toarray().astype(float)
    t_dense = t.to_dense().astype(float)
    powers = base ** np.arange(n_f, dtype=np.int64)

    best_cost = np.inf
    best_y = np.zeros(n_f, dtype=np.int64)
    for start in range(0, total, chunk_size):
        codes = np.arange(start, min(start + chunk_size, total), dtype=np.int64)
        y = (codes[:, None] // powers[None, :]) % base - coeff_range
        residual = t_dense[None, :] - y @ b.T
        cost = np.abs(residual) @ k.edge_weights + lam * (np.abs(y) @ k.face_weights)
        winner = int(np.argmin(cost))
        if cost[winner] < best_cost - 1e-12:
            best_cost = float(cost[winner])
            best_y = y[winner].copy()

    logger.debug(f"Oracle enumerated {total} candidates over {n_f} faces, best {best_cost:.12g}")
    s = Chain.from_dense(k, 2, best_y)
    return _result_from_s(k, t, s, lam, 'oracle', iterations=total,
                          diagnostics={'coeff_range': coeff_range, 'candidates': total})
