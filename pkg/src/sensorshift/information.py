"""Information measures over discrete tables.

Natural logarithm throughout.  0*log(0/q) is 0; p > 0 against q = 0 is a
:class:`SupportViolationError`, never a silent infinity.
"""

from itertools import combinations, product
from typing import Iterable

import numpy as np

from .errors import DimensionLimitError, InputError, NumericalError, SupportViolationError
from .spaces import ConditionalTable, JointTable, marginalize

_CMI_NEG_CLAMP = 1e-12


def relative_entropy(p, q, *, cells=None) -> float:
    """KL divergence sum(p * log(p/q)) between two non-negative arrays.

    ``cells``, when given, supplies a label for the offending index of a
    support violation.
    """
    p = np.asarray(p, dtype=float).ravel()
    q = np.asarray(q, dtype=float).ravel()
    if p.shape != q.shape:
        raise InputError(f"shape mismatch {p.shape} vs {q.shape}")
    bad = (p > 0.0) & (q <= 0.0)
    if np.any(bad):
        flat = int(np.argmax(bad))
        cell = cells[flat] if cells is not None else flat
        raise SupportViolationError(cell)
    mask = p > 0.0
    return float(np.sum(p[mask] * (np.log(p[mask]) - np.log(q[mask]))))


def kl_divergence(p: JointTable, q: JointTable) -> float:
    """D(p || q) for two joint tables over the same space."""
    if p.space != q.space:
        raise InputError("KL divergence requires identical spaces")
    return relative_entropy(p.probs, q.probs, cells=list(p.space.cells()))


def entropy(j: JointTable, names: Iterable[str] | None = None) -> float:
    """Shannon entropy of the (marginal) distribution over ``names``."""
    if names is not None:
        j = marginalize(j, names)
    arr = j.probs.ravel()
    mask = arr > 0.0
    return float(-np.sum(arr[mask] * np.log(arr[mask])))


def conditional_entropy(j: JointTable, target: Iterable[str], given: Iterable[str]) -> float:
    """H(target | given) = H(target, given) - H(given)."""
    target, given = set(target), set(given)
    if target & given:
        raise InputError("target and conditioning sets overlap")
    return entropy(j, target | given) - entropy(j, given)


def conditional_mutual_information(
    j: JointTable, a: Iterable[str], b: Iterable[str], c: Iterable[str] = ()
) -> float:
    """I(a; b | c) = H(a,c) + H(b,c) - H(a,b,c) - H(c), clamped at zero."""
    a, b, c = set(a), set(b), set(c)
    for left, right in combinations((a, b, c), 2):
        if left & right:
            raise InputError(f"variable sets overlap: {sorted(left & right)}")
    value = entropy(j, a | c) + entropy(j, b | c) - entropy(j, a | b | c) - entropy(j, c)
    if value < 0.0:
        if value < -_CMI_NEG_CLAMP:
            raise NumericalError(f"conditional mutual information {value!r} below -{_CMI_NEG_CLAMP}")
        value = 0.0
    return value


def _cond_entropy_given_output(matrix: np.ndarray, p_in: np.ndarray) -> float:
    """H(X | Y) for the channel ``matrix`` = P(Y|X) under input law ``p_in``."""
    w = matrix * p_in  # joint over (y, x)
    py = w.sum(axis=1)
    mask = w > 0.0
    logs = np.zeros_like(w)
    logs[mask] = np.log(w[mask]) - np.log(np.broadcast_to(py[:, None], w.shape)[mask])
    return float(-np.sum(w * logs))


def _cond_entropy_batch(matrix: np.ndarray, p_batch: np.ndarray) -> np.ndarray:
    w = matrix[None, :, :] * p_batch[:, None, :]  # (batch, y, x)
    py = w.sum(axis=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.log(w) - np.log(py)[:, :, None]
    logs[~(w > 0.0)] = 0.0
    return -np.sum(w * logs, axis=(1, 2))


def _simplex_grid(dim: int, resolution: int) -> np.ndarray:
    pts = []
    for cuts in product(range(resolution + 1), repeat=dim - 1):
        if sum(cuts) <= resolution:
            pts.append(cuts + (resolution - sum(cuts),))
    return np.asarray(pts, dtype=float) / resolution


def _project_simplex(v: np.ndarray) -> np.ndarray:
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    rho = np.nonzero(u * np.arange(1, len(v) + 1) > css)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.clip(v - theta, 0.0, None)


def max_conditional_entropy(
    sensor: ConditionalTable,
    *,
    grid_limit: int = 4,
    grid_resolution: int = 50,
    approximate: bool = False,
    n_starts: int = 8,
    n_iters: int = 400,
    seed: int = 0,
) -> tuple[float, np.ndarray]:
    """max over input laws P'(X) of H(X | Y_S) for a known sensor channel.

    Solved by multi-start projected gradient ascent, cross-checked against a
    simplex grid search at ``1/grid_resolution`` when the input dimension is
    within ``grid_limit``; the larger value wins.  The objective is not
    assumed concave.  Returns ``(value, achieving distribution)``.

    Inputs wider than ``grid_limit`` require ``approximate=True`` (gradient
    ascent only).
    """
    matrix = sensor.matrix
    dim = matrix.shape[1]
    use_grid = dim <= grid_limit
    if not use_grid and not approximate:
        raise DimensionLimitError(
            f"input dimension {dim} exceeds grid limit {grid_limit}; pass approximate=True"
        )

    best_val = -np.inf
    best_p = np.full(dim, 1.0 / dim)

    if use_grid:
        grid = _simplex_grid(dim, grid_resolution)
        vals = _cond_entropy_batch(matrix, grid)
        i = int(np.argmax(vals))
        best_val, best_p = float(vals[i]), grid[i]

    rng = np.random.default_rng(seed)
    starts = [np.full(dim, 1.0 / dim), best_p.copy()]
    starts += [rng.dirichlet(np.ones(dim)) for _ in range(n_starts)]
    floor = 1e-12
    for p0 in starts:
        p = p0.copy()
        for k in range(n_iters):
            w = matrix * np.clip(p, floor, None)
            py = w.sum(axis=1)
            post = w / np.clip(py[:, None], floor, None)
            grad = -np.sum(matrix * np.log(np.clip(post, floor, None)), axis=0)
            p = _project_simplex(p + (0.5 / np.sqrt(1.0 + k)) * grad)
        val = _cond_entropy_given_output(matrix, p)
        if val > best_val:
            best_val, best_p = float(val), p
    return max(best_val, 0.0), best_p
