"""Solution sets of under-determined linear identification systems.

The observable law pins the unknown sub-probability vector v down to the
affine set {v : S v = q} intersected with the non-negative orthant.  Because
S is column-stochastic the total mass of any solution equals sum(q), so the
feasible set is a polytope; its vertices are the basic solutions of the
null-space parametrization, enumerated from square sub-matrices of the
null-space basis.
"""

import itertools
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg
from scipy.optimize import linprog, nnls

from .errors import (
    CombinatorialLimitError,
    InconsistentSystemError,
    InfeasibleSystemError,
    InputError,
)
from .spaces import ConditionalTable, NORM_TOL, VariableSpace

FEAS_TOL = 1e-8        # vertex residual / vertex dedup tolerance
DET_TOL = 1e-10        # singularity threshold for sub-matrices
NONNEG_SLACK = 1e-10   # allowed negativity before clamping to zero
RANK_RTOL = 1e-10      # singular values below RANK_RTOL * sigma_max are zero
COMB_LIMIT = 1_000_000


@dataclass(frozen=True, eq=False)
class IdentificationSystem:
    """Matrix equation ``matrix @ v = rhs`` for an unknown non-negative v.

    ``reduced`` marks systems whose rows were pruned to a linearly
    independent subset; only unreduced systems are required to be
    column-stochastic.  ``input_space`` optionally names the coordinates of v.
    """

    matrix: np.ndarray
    rhs: np.ndarray
    input_space: VariableSpace | None = None
    reduced: bool = False

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=float)
        rhs = np.array(self.rhs, dtype=float).ravel()
        if mat.ndim != 2:
            raise InputError("system matrix must be two-dimensional")
        if mat.shape[0] != rhs.shape[0]:
            raise InputError(f"matrix has {mat.shape[0]} rows but rhs has {rhs.shape[0]} entries")
        if not (np.all(np.isfinite(mat)) and np.all(np.isfinite(rhs))):
            raise InputError("system contains non-finite entries")
        if rhs.size and rhs.min() < -NONNEG_SLACK:
            raise InputError(f"rhs has negative entries (min {rhs.min():.3e})")
        np.clip(rhs, 0.0, None, out=rhs)
        if not self.reduced:
            if mat.size and mat.min() < -NONNEG_SLACK:
                raise InputError("sensor matrix has negative entries")
            colsums = mat.sum(axis=0)
            if np.any(np.abs(colsums - 1.0) > NORM_TOL):
                j = int(np.argmax(np.abs(colsums - 1.0)))
                raise InputError(f"sensor column {j} sums to {colsums[j]!r}, not 1")
            if rhs.sum() > 1.0 + NORM_TOL:
                raise InputError(f"rhs mass {rhs.sum()!r} exceeds 1")
        if self.input_space is not None and self.input_space.size != mat.shape[1]:
            raise InputError("input_space size does not match number of columns")
        mat.setflags(write=False)
        rhs.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "rhs", rhs)

    @classmethod
    def from_channel(cls, channel: ConditionalTable, rhs) -> "IdentificationSystem":
        return cls(channel.matrix, rhs, input_space=channel.space_in)

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def residual(self, v: np.ndarray) -> float:
        return float(np.max(np.abs(self.matrix @ np.asarray(v, dtype=float) - self.rhs)))


@dataclass(frozen=True, eq=False)
class SolutionPolytope:
    """Vertex representation of the feasible set of a system.

    Every vertex satisfies the system within ``FEAS_TOL`` in infinity norm,
    is non-negative, and carries the same total mass as the rhs.  Vertices
    are lexicographically sorted and pairwise distinct at ``FEAS_TOL``.
    """

    dimension: int
    vertices: np.ndarray
    system: IdentificationSystem
    residual_max: float = 0.0

    def __post_init__(self):
        arr = np.array(self.vertices, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != self.dimension:
            raise InputError(f"vertices must be (k, {self.dimension}), got {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "vertices", arr)

    def __len__(self) -> int:
        return self.vertices.shape[0]

    def to_json(self) -> str:
        return json.dumps(
            {
                "dimension": self.dimension,
                "vertices": self.vertices.tolist(),
                "residual_max": self.residual_max,
            }
        )


@dataclass(frozen=True, eq=False)
class LinearConstraint:
    """Row ``coeffs . x  (sense)  rhs`` with sense one of <=, >=, ==."""

    coeffs: np.ndarray
    sense: str
    rhs: float

    def __post_init__(self):
        arr = np.array(self.coeffs, dtype=float).ravel()
        arr.setflags(write=False)
        object.__setattr__(self, "coeffs", arr)
        if self.sense not in ("<=", ">=", "=="):
            raise InputError(f"unknown sense {self.sense!r}")


def _rank(matrix: np.ndarray) -> int:
    if matrix.size == 0:
        return 0
    s = np.linalg.svd(matrix, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > RANK_RTOL * s[0]))


def row_reduce_to_full_rank(sys: IdentificationSystem) -> IdentificationSystem:
    """Keep a maximal linearly independent row subset.

    A removed row must be explained by the retained ones: if its rhs entry
    deviates from the implied value by more than ``FEAS_TOL`` the system has
    no solution and :class:`InconsistentSystemError` is raised.
    """
    a, q = sys.matrix, sys.rhs
    r = _rank(a)
    if r == 0:
        raise InputError("system matrix is identically zero")
    if r == a.shape[0]:
        return sys if sys.reduced else IdentificationSystem(
            a, q, input_space=sys.input_space, reduced=True
        )
    _, _, piv = scipy.linalg.qr(a.T, pivoting=True)
    keep = np.sort(piv[:r])
    drop = np.sort(piv[r:])
    coeff, *_ = np.linalg.lstsq(a[keep].T, a[drop].T, rcond=None)
    predicted = coeff.T @ q[keep]
    gaps = np.abs(predicted - q[drop])
    if np.any(gaps > FEAS_TOL):
        i = int(np.argmax(gaps))
        raise InconsistentSystemError(
            f"row {drop[i]} is linearly dependent but its rhs {q[drop[i]]!r} "
            f"contradicts the retained rows (expected {predicted[i]!r})"
        )
    return IdentificationSystem(a[keep], q[keep], input_space=sys.input_space, reduced=True)


def project_rhs_feasible(sys: IdentificationSystem) -> IdentificationSystem:
    """Replace the rhs by its closest point inside the sensor's cone.

    Empirical rhs vectors generically fall outside the column space of the
    sensor; the non-negative least squares witness guarantees the projected
    system is consistent and feasible.
    """
    witness, _ = nnls(sys.matrix, sys.rhs)
    projected = sys.matrix @ witness
    total = projected.sum()
    if total > 1.0:  # the fit may overshoot the probability mass cap slightly
        projected = projected / total
    return IdentificationSystem(
        sys.matrix, projected, input_space=sys.input_space, reduced=sys.reduced
    )


def _pivot_column_order(matrix: np.ndarray) -> np.ndarray:
    _, _, piv = scipy.linalg.qr(matrix, pivoting=True)
    return piv


def _lexsort_rows(rows: np.ndarray) -> np.ndarray:
    keys = tuple(rows[:, i] for i in reversed(range(rows.shape[1])))
    return rows[np.lexsort(keys)]


def _dedup_rows(rows: np.ndarray, tol: float) -> np.ndarray:
    kept: list[np.ndarray] = []
    for row in rows:
        if not any(np.max(np.abs(row - k)) <= tol for k in kept):
            kept.append(row)
    return np.asarray(kept)


def enumerate_solution_vertices(
    sys: IdentificationSystem, *, comb_limit: int = COMB_LIMIT
) -> SolutionPolytope:
    """Enumerate the corner vectors whose convex hull is the solution set.

    Square systems reduce to a direct solve.  Otherwise a particular solution
    is built from a non-singular column block (largest-pivot columns first),
    the null-space basis M comes from the SVD, and every non-singular
    (l-m)x(l-m) row block R of M contributes the candidate  b - M R^-1 b_R,
    kept when non-negative.
    """
    red = row_reduce_to_full_rank(sys)
    a, q = red.matrix, red.rhs
    m, dim = a.shape

    if m == dim:
        v = np.linalg.solve(a, q)
        if v.min() < -NONNEG_SLACK:
            raise InfeasibleSystemError(
                f"unique solution has negative entry {v.min():.3e}; no feasible point"
            )
        candidates = [np.clip(v, 0.0, None)]
    else:
        n_free = dim - m
        if math.comb(dim, n_free) > comb_limit:
            raise CombinatorialLimitError(
                f"C({dim},{n_free}) sub-matrices exceed the limit {comb_limit}; "
                "use coarser variable ranges"
            )
        perm = _pivot_column_order(a)
        ap = a[:, perm]
        b = np.concatenate([np.linalg.solve(ap[:, :m], q), np.zeros(n_free)])
        _, _, vt = np.linalg.svd(ap)
        null_basis = vt[m:].T  # (dim, n_free)

        inv_perm = np.empty(dim, dtype=int)
        inv_perm[perm] = np.arange(dim)
        candidates = []
        for rows in itertools.combinations(range(dim), n_free):
            r_block = null_basis[list(rows)]
            if abs(np.linalg.det(r_block)) <= DET_TOL:
                continue
            t = np.linalg.solve(r_block, b[list(rows)])
            z = b - null_basis @ t
            if z.min() < -NONNEG_SLACK:
                continue
            z = np.clip(z, 0.0, None)
            if float(np.max(np.abs(ap @ z - q))) > FEAS_TOL:
                continue
            candidates.append(z[inv_perm])
        if not candidates:
            raise InfeasibleSystemError("no non-negative basic solution; system infeasible")

    verts = _dedup_rows(_lexsort_rows(np.asarray(candidates)), FEAS_TOL)
    residual = max(sys.residual(v) for v in verts)
    return SolutionPolytope(dimension=dim, vertices=verts, system=sys, residual_max=residual)


def polytope_contains(p: SolutionPolytope, point, tol: float) -> bool:
    """Feasibility LP: is ``point`` within ``tol`` (inf-norm) of the hull?"""
    point = np.asarray(point, dtype=float).ravel()
    if point.shape[0] != p.dimension:
        raise InputError(f"point has length {point.shape[0]}, polytope dimension {p.dimension}")
    k = len(p)
    if k == 0:
        return False
    vt = p.vertices.T  # (dim, k)
    a_ub = np.vstack([vt, -vt])
    b_ub = np.concatenate([point + tol, tol - point])
    res = linprog(
        c=np.zeros(k),
        A_ub=a_ub,
        b_ub=b_ub,
        A_eq=np.ones((1, k)),
        b_eq=np.array([1.0]),
        bounds=(0.0, None),
        method="highs",
    )
    return bool(res.status == 0)


def _weight_lp(
    p: SolutionPolytope,
    cost: np.ndarray,
    extra_ub: list[tuple[np.ndarray, float]],
    extra_eq: list[tuple[np.ndarray, float]],
):
    k = len(p)
    a_ub = np.asarray([row for row, _ in extra_ub]) if extra_ub else None
    b_ub = np.asarray([val for _, val in extra_ub]) if extra_ub else None
    a_eq = [np.ones(k)] + [row for row, _ in extra_eq]
    b_eq = [1.0] + [val for _, val in extra_eq]
    return linprog(
        c=cost,
        A_ub=a_ub,
        b_ub=b_ub,
        A_eq=np.asarray(a_eq),
        b_eq=np.asarray(b_eq),
        bounds=(0.0, None),
        method="highs",
    )


def select_point_lp(
    p: SolutionPolytope,
    objective,
    extra: Sequence[LinearConstraint] = (),
) -> np.ndarray:
    """argmin of a linear functional over the polytope, plus extra constraints.

    Works in vertex-weight coordinates.  Ties are broken deterministically by
    greedily maximizing the weight of the earliest vertices, so a flat
    objective returns the first (lexicographically smallest) vertex.
    """
    if len(p) == 0:
        raise InfeasibleSystemError("empty polytope")
    objective = np.asarray(objective, dtype=float).ravel()
    if objective.shape[0] != p.dimension:
        raise InputError("objective length does not match polytope dimension")
    cost = p.vertices @ objective  # (k,)

    ub_rows: list[tuple[np.ndarray, float]] = []
    eq_rows: list[tuple[np.ndarray, float]] = []
    for con in extra:
        if con.coeffs.shape[0] != p.dimension:
            raise InputError("constraint length does not match polytope dimension")
        row = p.vertices @ con.coeffs
        if con.sense == "<=":
            ub_rows.append((row, con.rhs))
        elif con.sense == ">=":
            ub_rows.append((-row, -con.rhs))
        else:
            eq_rows.append((row, con.rhs))

    res = _weight_lp(p, cost, ub_rows, eq_rows)
    if res.status != 0:
        raise InfeasibleSystemError(f"constraints infeasible over the polytope ({res.message})")
    optimum = float(res.fun)

    k = len(p)
    tie_ub = ub_rows + [(cost, optimum + 1e-9)]
    fixed_eq = list(eq_rows)
    weights = np.zeros(k)
    for i in range(k):
        unit = np.zeros(k)
        unit[i] = -1.0  # maximize weight i
        res = _weight_lp(p, unit, tie_ub, fixed_eq)
        if res.status != 0:
            raise InfeasibleSystemError(f"tie-break LP failed ({res.message})")
        row = np.zeros(k)
        row[i] = 1.0
        weights[i] = float(np.clip(res.x[i], 0.0, 1.0))
        fixed_eq.append((row, weights[i]))
    weights[weights < 1e-7] = 0.0  # strip solver feasibility-slack dust
    weights /= weights.sum()
    return p.vertices.T @ weights
