"""Inferring the action-effect P(Z | X, A) from spectator data.

Three routes, matching the settings they apply to:

- exact solution sets in the discrete case (per-(z, a) polytopes plus
  linear-fractional bounds on conditional cells);
- the exact linear-Gaussian transfer estimator, which corrects the sensor
  noise through Schur complements given F and Sigma_NN;
- the average-based proxy, with its KL gap bound against the exact effect.
"""

from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.optimize import linprog

from .errors import InfeasibleSystemError, InputError, NumericalError, UndefinedConditionalError
from .identify import IdentificationSystem, SolutionPolytope, enumerate_solution_vertices
from .information import conditional_mutual_information, max_conditional_entropy, relative_entropy
from .samples import SampleSet
from .spaces import ConditionalTable, JointTable, VariableSpace, condition, marginalize

_EINSUM_LETTERS = "abcdefghijklmnopqrstuvw"
COND_LIMIT = 1e12


def _check_psd(mat: np.ndarray, name: str) -> np.ndarray:
    mat = np.array(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise InputError(f"{name} must be square")
    if np.max(np.abs(mat - mat.T)) > 1e-9:
        raise InputError(f"{name} is not symmetric")
    eigs = np.linalg.eigvalsh(mat)
    if eigs.min() < -1e-8 * max(1.0, abs(eigs.max())):
        raise InputError(f"{name} is not positive semi-definite (min eig {eigs.min():.3e})")
    return mat


def _as_matrix(value, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(value, dtype=float))
    if rows is not None and arr.shape[0] != rows:
        raise InputError(f"expected {rows} rows, got {arr.shape[0]}")
    if cols is not None and arr.shape[1] != cols:
        raise InputError(f"expected {cols} columns, got {arr.shape[1]}")
    return arr


@dataclass(frozen=True, eq=False)
class LinearGaussianModel:
    """Y_S = F X + N and Z = D A + E X + O with Gaussian noise."""

    f: np.ndarray
    sigma_nn: np.ndarray
    d: np.ndarray
    e: np.ndarray
    sigma_oo: np.ndarray

    def __post_init__(self):
        f = _as_matrix(self.f)
        d = _as_matrix(self.d)
        e = _as_matrix(self.e, rows=d.shape[0], cols=f.shape[1])
        sigma_nn = _check_psd(self.sigma_nn, "sigma_NN")
        sigma_oo = _check_psd(self.sigma_oo, "sigma_OO")
        if sigma_nn.shape[0] != f.shape[0]:
            raise InputError("sigma_NN dimension does not match F rows")
        if sigma_oo.shape[0] != d.shape[0]:
            raise InputError("sigma_OO dimension does not match D rows")
        for key, val in (("f", f), ("d", d), ("e", e), ("sigma_nn", sigma_nn), ("sigma_oo", sigma_oo)):
            object.__setattr__(self, key, val)

    @property
    def dim_a(self) -> int:
        return self.d.shape[1]

    @property
    def dim_x(self) -> int:
        return self.f.shape[1]

    @property
    def dim_ys(self) -> int:
        return self.f.shape[0]

    @property
    def dim_z(self) -> int:
        return self.d.shape[0]


@dataclass(frozen=True, eq=False)
class CovarianceBlocks:
    """The covariance blocks the linear transfer estimator consumes."""

    za: np.ndarray
    zy: np.ndarray
    ay: np.ndarray
    yy: np.ndarray
    aa: np.ndarray


@dataclass(frozen=True, eq=False)
class EffectEstimate:
    """Estimated effect matrices for Z = D A + E X."""

    d_hat: np.ndarray
    e_hat: np.ndarray
    sample_size: int
    lam: float
    column_means: np.ndarray | None = None

    def __post_init__(self):
        d = _as_matrix(self.d_hat)
        e = _as_matrix(self.e_hat, rows=d.shape[0])
        object.__setattr__(self, "d_hat", d)
        object.__setattr__(self, "e_hat", e)

    def predict(self, a, x) -> np.ndarray:
        a = _as_matrix(a) if np.ndim(a) < 2 else np.asarray(a, dtype=float)
        x = _as_matrix(x) if np.ndim(x) < 2 else np.asarray(x, dtype=float)
        return a @ self.d_hat.T + x @ self.e_hat.T

    def to_jsonable(self) -> dict:
        return {
            "D": self.d_hat.tolist(),
            "E": self.e_hat.tolist(),
            "lambda": self.lam,
            "n": self.sample_size,
        }


def population_covariances(model: LinearGaussianModel, policy_cov) -> CovarianceBlocks:
    """Exact covariance blocks implied by the model and a covariance of (A, X)."""
    policy_cov = _check_psd(policy_cov, "policy covariance")
    da, dx = model.dim_a, model.dim_x
    if policy_cov.shape[0] != da + dx:
        raise InputError(f"policy covariance must be {(da + dx)}-dimensional")
    aa = policy_cov[:da, :da]
    ax = policy_cov[:da, da:]
    xx = policy_cov[da:, da:]
    f, d, e = model.f, model.d, model.e
    return CovarianceBlocks(
        za=d @ aa + e @ ax.T,
        zy=(d @ ax + e @ xx) @ f.T,
        ay=ax @ f.T,
        yy=f @ xx @ f.T + model.sigma_nn,
        aa=aa,
    )


def _checked_inverse(mat: np.ndarray, name: str) -> np.ndarray:
    cond = np.linalg.cond(mat)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise NumericalError(f"{name} is numerically singular (cond {cond:.2e}); increase lambda")
    return np.linalg.inv(mat)


def transfer_from_covariances(
    blocks: CovarianceBlocks, f, sigma_nn, lam: float = 0.0, *, sample_size: int = 0
) -> EffectEstimate:
    """Schur-complement solve for D, E from covariance blocks.

    With population blocks, invertible F and lam = 0 this returns the true
    effect matrices.
    """
    f = _as_matrix(f)
    sigma_nn = _check_psd(sigma_nn, "sigma_NN")
    if f.shape[0] != f.shape[1]:
        raise InputError("F must be square for the exact linear transfer")
    aa = blocks.aa + lam * np.eye(blocks.aa.shape[0])
    yy = blocks.yy + lam * np.eye(blocks.yy.shape[0])
    ay, za, zy = blocks.ay, blocks.za, blocks.zy

    g_inv = _checked_inverse(yy - sigma_nn, "Sigma_YsYs - Sigma_NN")
    s1 = aa - ay @ g_inv @ ay.T
    s2 = (yy - sigma_nn) - ay.T @ _checked_inverse(aa, "Sigma_AA") @ ay
    s1_inv = _checked_inverse(s1, "Schur complement S1")
    s2_inv = _checked_inverse(s2, "Schur complement S2")

    d_hat = za @ s1_inv - zy @ g_inv @ ay.T @ s1_inv
    e_hat = (-za @ s1_inv @ ay @ g_inv + zy @ s2_inv) @ f
    return EffectEstimate(d_hat, e_hat, sample_size=sample_size, lam=lam)


def _empirical_blocks(z: np.ndarray, a: np.ndarray, y: np.ndarray) -> CovarianceBlocks:
    n = z.shape[0]
    return CovarianceBlocks(
        za=z.T @ a / n, zy=z.T @ y / n, ay=a.T @ y / n, yy=y.T @ y / n, aa=a.T @ a / n
    )


def linear_transfer_estimate(
    sample: SampleSet,
    f,
    sigma_nn,
    lam: float | None = None,
    *,
    z_prefix: str = "z",
    a_prefix: str = "a",
    y_prefix: str = "y_s",
) -> EffectEstimate:
    """Sample-level exact linear transfer from (z, a, y_S) rows.

    Columns are centered internally.  The default regularization is a tiny
    trace-scaled ridge added to Sigma_AA and Sigma_YsYs.
    """
    z = sample.block(z_prefix)
    a = sample.block(a_prefix)
    y = sample.block(y_prefix)
    if sample.n_rows < 2:
        raise InputError("need at least two rows to estimate covariances")
    means = np.concatenate([z.mean(axis=0), a.mean(axis=0), y.mean(axis=0)])
    z = z - z.mean(axis=0)
    a = a - a.mean(axis=0)
    y = y - y.mean(axis=0)
    blocks = _empirical_blocks(z, a, y)
    if lam is None:
        lam = 1e-6 * 0.5 * (
            np.trace(blocks.aa) / blocks.aa.shape[0] + np.trace(blocks.yy) / blocks.yy.shape[0]
        )
    est = transfer_from_covariances(blocks, f, sigma_nn, lam, sample_size=sample.n_rows)
    return EffectEstimate(
        est.d_hat, est.e_hat, sample_size=sample.n_rows, lam=lam, column_means=means
    )


def linear_average_proxy_estimate(
    sample: SampleSet,
    f,
    *,
    z_prefix: str = "z",
    a_prefix: str = "a",
    y_prefix: str = "y_s",
) -> EffectEstimate:
    """Sample-level linear version of the averaging proxy.

    Regress Z on (A, Y_S) by least squares, then read the state coefficient
    through the mean sensor response: predictions use y_S = F x.  Ignores the
    sensor noise, hence inherits the confounding bias the exact method
    removes.
    """
    f = _as_matrix(f)
    z = sample.block(z_prefix)
    a = sample.block(a_prefix)
    y = sample.block(y_prefix)
    z = z - z.mean(axis=0)
    a = a - a.mean(axis=0)
    y = y - y.mean(axis=0)
    w = np.hstack([a, y])
    coef, *_ = np.linalg.lstsq(w, z, rcond=None)  # (dA+dY, dZ)
    alpha = coef[: a.shape[1]].T
    beta = coef[a.shape[1]:].T
    return EffectEstimate(alpha, beta @ f, sample_size=sample.n_rows, lam=0.0)


def full_observation_estimate(
    sample: SampleSet, *, z_prefix: str = "z", a_prefix: str = "a", x_prefix: str = "x"
) -> EffectEstimate:
    """Least squares of Z on (A, X): the reference if X were observed."""
    z = sample.block(z_prefix)
    a = sample.block(a_prefix)
    x = sample.block(x_prefix)
    z = z - z.mean(axis=0)
    a = a - a.mean(axis=0)
    x = x - x.mean(axis=0)
    w = np.hstack([a, x])
    coef, *_ = np.linalg.lstsq(w, z, rcond=None)
    return EffectEstimate(coef[: a.shape[1]].T, coef[a.shape[1]:].T, sample_size=sample.n_rows, lam=0.0)


def mean_squared_error(estimate: EffectEstimate, sample: SampleSet, *, z_prefix="z", a_prefix="a", x_prefix="x") -> float:
    """Mean squared prediction error on (z, a, x) rows."""
    z = sample.block(z_prefix)
    pred = estimate.predict(sample.block(a_prefix), sample.block(x_prefix))
    return float(np.mean(np.sum((z - pred) ** 2, axis=1)))


def discrete_effect_solution_set(
    joint: JointTable,
    sensor: ConditionalTable,
    *,
    z_var: str | None = None,
    a_var: str | None = None,
) -> dict[tuple, SolutionPolytope]:
    """Per-(z, a) solution polytopes for P(z, a, X) from P(z, a, Y_S).

    The observation variable is the sensor's output; the outcome and action
    default to the variables named "z" and "a" (falling back to the joint's
    own order), overridable via ``z_var``/``a_var``.
    """
    if len(sensor.space_out.names) != 1 or len(sensor.space_in.names) != 1:
        raise InputError("sensor must be a single-variable channel P(Y_S | X)")
    ys_var = sensor.space_out.names[0]
    if ys_var not in joint.space.names:
        raise InputError(f"joint lacks the sensor output variable {ys_var!r}")
    if joint.space.range_of(ys_var) != sensor.space_out.range_of(ys_var):
        raise InputError(f"range of {ys_var!r} differs between joint and sensor")
    rest = [n for n in joint.space.names if n != ys_var]
    if len(rest) != 2:
        raise InputError(f"joint must hold exactly (Z, A, {ys_var}); has {joint.space.names}")
    if z_var is None:
        z_var = "z" if "z" in rest else rest[0]
    if a_var is None:
        a_var = "a" if "a" in rest else (rest[1] if rest[1] != z_var else rest[0])
    if {z_var, a_var} != set(rest):
        raise InputError(f"z_var/a_var must name {rest}")

    tensor = np.transpose(
        joint.probs,
        (joint.space.axis(z_var), joint.space.axis(a_var), joint.space.axis(ys_var)),
    )
    sets: dict[tuple, SolutionPolytope] = {}
    for iz, z_label in enumerate(joint.space.range_of(z_var)):
        for ia, a_label in enumerate(joint.space.range_of(a_var)):
            system = IdentificationSystem.from_channel(sensor, tensor[iz, ia])
            try:
                sets[(z_label, a_label)] = enumerate_solution_vertices(system)
            except InfeasibleSystemError as err:
                raise InfeasibleSystemError(
                    f"sub-system for (z={z_label!r}, a={a_label!r}) infeasible; "
                    f"sensor and joint are mutually inconsistent ({err})"
                ) from err
    return sets


def _bounds_lp(polys: list[SolutionPolytope], num_block: int, x_idx: int, maximize: bool) -> float:
    sizes = [len(p) for p in polys]
    total = sum(sizes) + 1  # plus the Charnes-Cooper scale t
    cost = np.zeros(total)
    denom = np.zeros(total)
    offset = 0
    eqs = []
    for bi, poly in enumerate(polys):
        col = poly.vertices[:, x_idx]
        denom[offset : offset + sizes[bi]] = col
        if bi == num_block:
            cost[offset : offset + sizes[bi]] = col
        row = np.zeros(total)
        row[offset : offset + sizes[bi]] = 1.0
        row[-1] = -1.0
        eqs.append((row, 0.0))
        offset += sizes[bi]
    eqs.append((denom, 1.0))
    a_eq = np.asarray([row for row, _ in eqs])
    b_eq = np.asarray([val for _, val in eqs])
    res = linprog(
        c=-cost if maximize else cost,
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=(0.0, None),
        method="highs",
    )
    if res.status != 0:
        raise UndefinedConditionalError(f"linear-fractional program failed ({res.message})")
    value = -res.fun if maximize else res.fun
    return float(np.clip(value, 0.0, 1.0))


def effect_bounds(sets: Mapping[tuple, SolutionPolytope], z, x, a) -> tuple[float, float]:
    """Min and max of P(z | x, a) over the identified set.

    The conditional is a ratio of linear functions of the per-(z', a)
    polytope choices, so the bounds come from a Charnes-Cooper transformed
    linear program over the product of polytopes.
    """
    z_labels = [zl for (zl, al) in sets if al == a]
    if not z_labels:
        raise InputError(f"no polytopes for action {a!r}")
    if z not in z_labels:
        raise InputError(f"no polytope for outcome {z!r} under action {a!r}")
    polys = [sets[(zl, a)] for zl in z_labels]
    space = polys[0].system.input_space
    if space is not None:
        x_idx = space.index(space.names[0], x)
    else:
        x_idx = int(x)
        if not 0 <= x_idx < polys[0].dimension:
            raise InputError(f"x index {x_idx} out of range")

    denom_max = sum(float(p.vertices[:, x_idx].max()) for p in polys)
    if denom_max <= 1e-12:
        raise UndefinedConditionalError(
            f"P(x={x!r}, a={a!r}) is zero over the whole identified set"
        )
    num_block = z_labels.index(z)
    lower = _bounds_lp(polys, num_block, x_idx, maximize=False)
    upper = _bounds_lp(polys, num_block, x_idx, maximize=True)
    return lower, upper


def average_proxy(cond: ConditionalTable, sensor: ConditionalTable) -> ConditionalTable:
    """Average-based proxy: p~(z | x, a) = sum_y p_S(z | y, a) p(y | x)."""
    if len(sensor.space_out.names) != 1 or len(sensor.space_in.names) != 1:
        raise InputError("sensor must be a single-variable channel P(Y_S | X)")
    ys_var = sensor.space_out.names[0]
    x_var = sensor.space_in.names[0]
    if ys_var not in cond.space_in.names:
        raise InputError(f"conditional lacks input variable {ys_var!r}")
    if cond.space_in.range_of(ys_var) != sensor.space_out.range_of(ys_var):
        raise InputError(f"range of {ys_var!r} differs between conditional and sensor")
    if x_var in cond.space_in.names or x_var in cond.space_out.names:
        raise InputError(f"sensor input {x_var!r} collides with conditional variables")

    out_names = cond.space_out.names
    in_names = cond.space_in.names
    letters = {}
    for name in out_names + in_names + (x_var,):
        letters[name] = _EINSUM_LETTERS[len(letters)]
    c_sub = "".join(letters[n] for n in out_names + in_names)
    s_sub = letters[ys_var] + letters[x_var]
    other_in = tuple(n for n in in_names if n != ys_var)
    out_sub = "".join(letters[n] for n in out_names) + letters[x_var] + "".join(
        letters[n] for n in other_in
    )
    arr = np.einsum(f"{c_sub},{s_sub}->{out_sub}", cond.tensor(), sensor.tensor())
    space_in = VariableSpace(
        sensor.space_in.variables + tuple(v for v in cond.space_in.variables if v[0] != ys_var)
    )
    return ConditionalTable(space_in, cond.space_out, arr.reshape(cond.space_out.size, space_in.size))


def proxy_gap_bound(
    joint: JointTable,
    *,
    z_var: str = "z",
    a_var: str = "a",
    x_var: str = "x",
    ys_var: str = "y_s",
    entropy_approximate: bool = False,
) -> tuple[float, float, float]:
    """KL gap of the averaging proxy and its information-theoretic caps.

    Returns ``(gap, mi_bound, entropy_bound)`` where gap is the expected KL
    (under the source law of (X, A)) of the true effect from the proxy,
    mi_bound is I_S(X; Z | A, Y_S) and entropy_bound is the sensor-only cap
    max over P'(X) of H(X | Y_S).  Callers may assert
    gap <= mi_bound <= entropy_bound.
    """
    for name in (z_var, a_var, x_var, ys_var):
        if name not in joint.space.names:
            raise InputError(f"joint lacks variable {name!r}")
    p_xa = marginalize(joint, {x_var, a_var})
    exact = condition(marginalize(joint, {z_var, x_var, a_var}), {x_var, a_var})
    sensor = condition(marginalize(joint, {ys_var, x_var}), {x_var})
    source_cond = condition(marginalize(joint, {z_var, ys_var, a_var}), {ys_var, a_var})
    proxy = average_proxy(source_cond, sensor)

    gap = 0.0
    z_cells = list(exact.space_out.cells())
    for x_label in joint.space.range_of(x_var):
        for a_label in joint.space.range_of(a_var):
            weight = p_xa.prob({x_var: x_label, a_var: a_label})
            if weight <= 0.0:
                continue
            cell = {x_var: x_label, a_var: a_label}
            gap += weight * relative_entropy(
                exact.column_at(cell), proxy.column_at(cell), cells=z_cells
            )
    mi = conditional_mutual_information(joint, {x_var}, {z_var}, {a_var, ys_var})
    ent, _ = max_conditional_entropy(sensor, approximate=entropy_approximate)
    return gap, mi, ent
