"""Recovering and approximating demonstrator policies under sensor-shift.

The exact route solves the per-action identification systems linking
P_S(A, Y_S) to P_S(A, Y_D) through the known channel P_S(Y_S | Y_D) and picks
a point from the solution polytopes by linear programming.  The proxy routes
cover the three sensor-shift cases: linear averaging through the channel,
geometric pooling through a back-channel, and the two-stage general case.
Bound evaluators report the KL quantities each guarantee compares.
"""

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import linprog

from .errors import (
    InfeasibleSystemError,
    InputError,
    SupportViolationError,
    ZeroProbabilityError,
)
from .identify import (
    IdentificationSystem,
    SolutionPolytope,
    enumerate_solution_vertices,
    project_rhs_feasible,
)
from .information import conditional_entropy, conditional_mutual_information, relative_entropy
from .spaces import ConditionalTable, JointTable, VariableSpace, condition, marginalize

_CLAMP = 1e-10


@dataclass(frozen=True, eq=False)
class Policy:
    """Column-stochastic action table over one observation variable."""

    table: ConditionalTable

    def __post_init__(self):
        if len(self.table.space_out.names) != 1:
            raise InputError("policy must have a single action variable")
        if len(self.table.space_in.names) != 1:
            raise InputError("policy must condition on a single observation variable")

    @property
    def action_space(self) -> VariableSpace:
        return self.table.space_out

    @property
    def obs_space(self) -> VariableSpace:
        return self.table.space_in

    @property
    def matrix(self) -> np.ndarray:
        return self.table.matrix

    def prob(self, action, obs) -> float:
        return self.table.prob(action, obs)

    def to_jsonable(self) -> dict:
        return {
            "observation_space": self.obs_space.to_jsonable(),
            "action_space": self.action_space.to_jsonable(),
            "matrix": self.matrix.tolist(),
        }


@dataclass(frozen=True, eq=False)
class WorldModel:
    """State prior, the three sensors, and the invariant action-effect."""

    p_x: JointTable
    sensor_s: ConditionalTable
    sensor_d: ConditionalTable
    sensor_t: ConditionalTable
    effect: ConditionalTable  # P(Z | A, X)

    def __post_init__(self):
        if len(self.p_x.space.names) != 1:
            raise InputError("state prior must cover a single variable")
        x_space = self.p_x.space
        for name, sensor in (("sensor_s", self.sensor_s), ("sensor_d", self.sensor_d), ("sensor_t", self.sensor_t)):
            if sensor.space_in != x_space:
                raise InputError(f"{name} input space does not match the state space")
        if len(self.effect.space_out.names) != 1:
            raise InputError("effect must have a single outcome variable")
        if x_space.names[0] not in self.effect.space_in.names:
            raise InputError("effect must condition on the state variable")
        if len(self.effect.space_in.names) != 2:
            raise InputError("effect must condition on exactly (A, X)")

    @property
    def x_var(self) -> str:
        return self.p_x.space.names[0]


def exact_policy_solution_set(
    p_ays: JointTable,
    channel: ConditionalTable,
    *,
    action_var: str | None = None,
    project: bool = False,
) -> dict[object, SolutionPolytope]:
    """Per-action polytopes of feasible P_S(a, Y_D) joints.

    ``project=True`` first projects each empirical right-hand side onto the
    channel's cone (sample estimates are generically inconsistent).
    """
    if len(channel.space_out.names) != 1 or len(channel.space_in.names) != 1:
        raise InputError("channel must be a single-variable P_S(Y_S | Y_D)")
    ys_var = channel.space_out.names[0]
    if ys_var not in p_ays.space.names:
        raise InputError(f"joint lacks the channel output variable {ys_var!r}")
    if p_ays.space.range_of(ys_var) != channel.space_out.range_of(ys_var):
        raise InputError(f"range of {ys_var!r} differs between joint and channel")
    rest = [n for n in p_ays.space.names if n != ys_var]
    if len(rest) != 1:
        raise InputError(f"joint must hold exactly (A, {ys_var}); has {p_ays.space.names}")
    action_var = action_var or rest[0]
    if action_var != rest[0]:
        raise InputError(f"action variable {action_var!r} not found in joint")

    tensor = np.transpose(
        p_ays.probs, (p_ays.space.axis(action_var), p_ays.space.axis(ys_var))
    )
    sets: dict[object, SolutionPolytope] = {}
    for ia, a_label in enumerate(p_ays.space.range_of(action_var)):
        system = IdentificationSystem.from_channel(channel, tensor[ia])
        if project:
            system = project_rhs_feasible(system)
        sets[a_label] = enumerate_solution_vertices(system)
    return sets


def policy_from_joint(
    selection: Mapping[object, np.ndarray],
    action_space: VariableSpace,
    obs_space: VariableSpace,
) -> Policy:
    """Normalize selected joint vectors P_S(a, Y_D) into a policy."""
    if len(action_space.names) != 1 or len(obs_space.names) != 1:
        raise InputError("action and observation spaces must be single-variable")
    actions = action_space.range_of(action_space.names[0])
    missing = [a for a in actions if a not in selection]
    if missing:
        raise InputError(f"selection lacks actions {missing}")
    mat = np.vstack([np.asarray(selection[a], dtype=float).ravel() for a in actions])
    if mat.shape[1] != obs_space.size:
        raise InputError(f"joint vectors have length {mat.shape[1]}, expected {obs_space.size}")
    if mat.min() < -_CLAMP:
        raise InputError("selected joint vectors must be non-negative")
    mat = np.clip(mat, 0.0, None)
    colsums = mat.sum(axis=0)
    if np.any(colsums <= 0.0):
        y_idx = int(np.argmax(colsums <= 0.0))
        label = obs_space.range_of(obs_space.names[0])[y_idx]
        raise ZeroProbabilityError({obs_space.names[0]: label}, f"no action mass at {label!r}")
    return Policy(ConditionalTable(obs_space, action_space, mat / colsums))


@dataclass(frozen=True)
class PolicyConstraint:
    """Linear row over stacked P_S(a, y_D) entries, keyed by (action, obs)."""

    coeffs: Mapping[tuple, float]
    sense: str
    rhs: float

    def __post_init__(self):
        if self.sense not in ("<=", ">=", "=="):
            raise InputError(f"unknown sense {self.sense!r}")
        object.__setattr__(self, "coeffs", dict(self.coeffs))


def _proxy_target_from_sets(
    sets: Mapping[object, SolutionPolytope], actions: Sequence
) -> np.ndarray:
    """Case-1 proxy policy implied by the stored systems: rows actions, cols y_D."""
    channel_matrix = sets[actions[0]].system.matrix
    for a in actions[1:]:
        if not np.array_equal(sets[a].system.matrix, channel_matrix):
            raise InputError("per-action polytopes come from different channels")
    rhs = np.vstack([sets[a].system.rhs for a in actions])  # (n_a, n_ys)
    colsums = rhs.sum(axis=0)
    cond = np.where(colsums > 0.0, rhs / np.where(colsums > 0.0, colsums, 1.0), 1.0 / len(actions))
    return cond @ channel_matrix  # (n_a, n_yd)


def select_policy_lp(
    sets: Mapping[object, SolutionPolytope],
    constraints: Sequence[PolicyConstraint] = (),
    *,
    action_space: VariableSpace,
    obs_space: VariableSpace | None = None,
) -> Policy:
    """Pick one point per action polytope under joint linear constraints.

    The default objective minimizes the total entry-wise deviation between
    the selected joint and the joint the case-1 proxy policy would imply on
    the selected observation marginal, which makes the selection
    deterministic; constraint rows are honored exactly.
    """
    actions = list(action_space.range_of(action_space.names[0]))
    missing = [a for a in actions if a not in sets]
    if missing:
        raise InputError(f"sets lack polytopes for actions {missing}")
    first = sets[actions[0]]
    if obs_space is None:
        obs_space = first.system.input_space
    if obs_space is None:
        raise InputError("observation space unknown; pass obs_space")
    n_obs = obs_space.size
    obs_labels = list(obs_space.cells()) if len(obs_space.names) > 1 else list(
        obs_space.range_of(obs_space.names[0])
    )
    for a in actions:
        if sets[a].dimension != n_obs:
            raise InputError("polytope dimension does not match observation space")

    proxy = _proxy_target_from_sets(sets, actions)  # (n_a, n_obs)
    sizes = [len(sets[a]) for a in actions]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    n_lambda = int(offsets[-1])
    n_aux = len(actions) * n_obs
    n_var = n_lambda + n_aux

    def u_row(ai: int, y: int) -> np.ndarray:
        row = np.zeros(n_var)
        verts = sets[actions[ai]].vertices
        row[offsets[ai] : offsets[ai + 1]] = verts[:, y]
        return row

    a_ub, b_ub = [], []
    for ai in range(len(actions)):
        for y in range(n_obs):
            dev = np.zeros(n_var)
            for aj in range(len(actions)):
                weight = (1.0 if aj == ai else 0.0) - proxy[ai, y]
                dev[offsets[aj] : offsets[aj + 1]] += weight * sets[actions[aj]].vertices[:, y]
            aux = n_lambda + ai * n_obs + y
            up = dev.copy()
            up[aux] = -1.0
            down = -dev
            down[aux] = -1.0
            a_ub.append(up)
            b_ub.append(0.0)
            a_ub.append(down)
            b_ub.append(0.0)

    a_eq, b_eq = [], []
    for ai in range(len(actions)):
        row = np.zeros(n_var)
        row[offsets[ai] : offsets[ai + 1]] = 1.0
        a_eq.append(row)
        b_eq.append(1.0)

    label_index = {lab: i for i, lab in enumerate(obs_labels)}
    for con in constraints:
        row = np.zeros(n_var)
        for (a_label, y_label), coef in con.coeffs.items():
            if a_label not in actions:
                raise InputError(f"constraint names unknown action {a_label!r}")
            if y_label not in label_index:
                raise InputError(f"constraint names unknown observation {y_label!r}")
            row += coef * u_row(actions.index(a_label), label_index[y_label])
        if con.sense == "<=":
            a_ub.append(row)
            b_ub.append(con.rhs)
        elif con.sense == ">=":
            a_ub.append(-row)
            b_ub.append(-con.rhs)
        else:
            a_eq.append(row)
            b_eq.append(con.rhs)

    cost = np.zeros(n_var)
    cost[n_lambda:] = 1.0
    res = linprog(
        c=cost,
        A_ub=np.asarray(a_ub),
        b_ub=np.asarray(b_ub),
        A_eq=np.asarray(a_eq),
        b_eq=np.asarray(b_eq),
        bounds=(0.0, None),
        method="highs",
    )
    if res.status != 0:
        raise InfeasibleSystemError(f"policy selection LP infeasible ({res.message})")

    selection = {}
    for ai, a in enumerate(actions):
        lam = res.x[offsets[ai] : offsets[ai + 1]]
        u = sets[a].vertices.T @ lam
        u[np.abs(u) <= _CLAMP] = 0.0
        selection[a] = u
    return policy_from_joint(selection, action_space, obs_space)


def _single_var_channel(table: ConditionalTable, what: str) -> None:
    if len(table.space_out.names) != 1 or len(table.space_in.names) != 1:
        raise InputError(f"{what} must map one variable to one variable")


def _check_shared_range(left: ConditionalTable, right: ConditionalTable, what: str) -> None:
    if left.space_in.variables != right.space_out.variables:
        raise InputError(f"{what}: observation ranges do not line up")


def proxy_case1(p_a_given_ys: ConditionalTable, channel: ConditionalTable) -> Policy:
    """Case 1 (matched demonstrator/imitator sensors): average through the channel."""
    _single_var_channel(p_a_given_ys, "p_S(A | Y_S)")
    _single_var_channel(channel, "P_S(Y_S | Y_D)")
    _check_shared_range(p_a_given_ys, channel, "proxy_case1")
    matrix = p_a_given_ys.matrix @ channel.matrix
    return Policy(ConditionalTable(channel.space_in, p_a_given_ys.space_out, matrix))


def proxy_case2(p_a_given_ys: ConditionalTable, back_channel: ConditionalTable) -> Policy:
    """Case 2 (matched source sensors): geometric pooling through P(Y_S | Y_T)."""
    _single_var_channel(p_a_given_ys, "p_S(A | Y_S)")
    _single_var_channel(back_channel, "P(Y_S | Y_T)")
    _check_shared_range(p_a_given_ys, back_channel, "proxy_case2")
    probs = p_a_given_ys.matrix
    if np.any(probs <= 0.0):
        a_idx, y_idx = np.unravel_index(int(np.argmax(probs <= 0.0)), probs.shape)
        action = p_a_given_ys.space_out.variables[0][1][a_idx]
        obs = p_a_given_ys.space_in.variables[0][1][y_idx]
        raise SupportViolationError(
            {"action": action, "observation": obs},
            f"p_S(a|y_S) must be strictly positive; zero at a={action!r}, y_S={obs!r}",
        )
    pooled = np.exp(np.log(probs) @ back_channel.matrix)
    pooled /= pooled.sum(axis=0)
    return Policy(ConditionalTable(back_channel.space_in, p_a_given_ys.space_out, pooled))


def proxy_case3(
    p_a_given_ys: ConditionalTable,
    sensor_s: ConditionalTable,
    posterior: ConditionalTable,
) -> Policy:
    """Case 3 (all sensors differ): average to p~(A | X), then pool over X."""
    _single_var_channel(p_a_given_ys, "p_S(A | Y_S)")
    _single_var_channel(sensor_s, "P_S(Y_S | X)")
    _single_var_channel(posterior, "P(X | Y_T)")
    _check_shared_range(p_a_given_ys, sensor_s, "proxy_case3")
    if sensor_s.space_in.variables != posterior.space_out.variables:
        raise InputError("proxy_case3: state ranges of sensor and posterior do not line up")

    ptilde = p_a_given_ys.matrix @ sensor_s.matrix  # (n_a, n_x)
    weights = posterior.matrix  # (n_x, n_yt)
    used = (weights > 0.0).any(axis=1)
    if np.any(ptilde[:, used] <= 0.0):
        a_idx, x_pos = np.unravel_index(int(np.argmax(ptilde[:, used] <= 0.0)), ptilde[:, used].shape)
        x_idx = int(np.flatnonzero(used)[x_pos])
        raise SupportViolationError(
            {
                "action": p_a_given_ys.space_out.variables[0][1][a_idx],
                "state": sensor_s.space_in.variables[0][1][x_idx],
            },
            "intermediate p~(a|x) has a zero cell with positive posterior weight",
        )
    logs = np.where(ptilde > 0.0, np.log(np.clip(ptilde, 1e-300, None)), 0.0)
    pooled = np.exp(logs @ weights)
    pooled /= pooled.sum(axis=0)
    return Policy(ConditionalTable(posterior.space_in, p_a_given_ys.space_out, pooled))


def policy_divergence(p: Policy, q: Policy, weight: JointTable) -> float:
    """Expected KL of p from q over observations, weighted by ``weight``."""
    if p.obs_space != q.obs_space or p.action_space != q.action_space:
        raise InputError("policies live on different spaces")
    if weight.space != p.obs_space:
        raise InputError("weight space does not match the policies' observation space")
    w = weight.probs.ravel()
    cells = list(p.action_space.cells())
    total = 0.0
    for y in range(p.obs_space.size):
        if w[y] <= 0.0:
            continue
        total += w[y] * relative_entropy(p.matrix[:, y], q.matrix[:, y], cells=cells)
    return total


def bound_case1(
    joint: JointTable,
    *,
    a_var: str = "a",
    yd_var: str = "y_d",
    ys_var: str = "y_s",
) -> tuple[float, float, float]:
    """Case-1 bound chain from a source joint over (A, Y_D, Y_S).

    Returns ``(kl, mi, entropy)``: the expected KL of the demonstrator policy
    from the case-1 proxy, I_S(A; Y_D | Y_S), and H(Y_D | Y_S); callers may
    assert kl <= mi <= entropy.
    """
    for name in (a_var, yd_var, ys_var):
        if name not in joint.space.names:
            raise InputError(f"joint lacks variable {name!r}")
    pi_d = Policy(condition(marginalize(joint, {a_var, yd_var}), {yd_var}))
    p_a_given_ys = condition(marginalize(joint, {a_var, ys_var}), {ys_var})
    channel = condition(marginalize(joint, {ys_var, yd_var}), {yd_var})
    proxy = proxy_case1(p_a_given_ys, channel)
    p_yd = marginalize(joint, {yd_var})
    kl = policy_divergence(pi_d, proxy, p_yd)
    mi = conditional_mutual_information(joint, {a_var}, {yd_var}, {ys_var})
    ent = conditional_entropy(joint, {yd_var}, {ys_var})
    return kl, mi, ent


def bound_case2(
    p_a_given_ys: ConditionalTable,
    back_channel: ConditionalTable,
    p_yt: JointTable,
) -> float:
    """Behavioral-objective upper bound for the case-2 proxy.

    Evaluates sum over (a, y_T, y_S) of
    p(y_S|y_T) p_T(y_T) pi2(a|y_T) log(pi2(a|y_T) / p_S(a|y_S)).
    The summand is signed, so no sign is asserted.
    """
    if p_yt.space != back_channel.space_in:
        raise InputError("p_yt space does not match the back-channel input")
    pi2 = proxy_case2(p_a_given_ys, back_channel)  # raises on zero p_S(a | y_S)
    probs = p_a_given_ys.matrix  # (n_a, n_ys)
    w = back_channel.matrix  # (n_ys, n_yt)
    pt = p_yt.probs.ravel()  # (n_yt,)
    pol = pi2.matrix  # (n_a, n_yt)
    log_ratio = np.log(pol)[:, None, :] - np.log(probs)[:, :, None]  # (a, ys, yt)
    return float(np.einsum("st,t,at,ast->", w, pt, pol, log_ratio))


def induced_behavior(world: WorldModel, policy: Policy, domain: str) -> ConditionalTable:
    """Behavior P(A, Z | X) induced by a policy through the domain's sensor."""
    if domain == "source":
        sensor = world.sensor_d
    elif domain == "target":
        sensor = world.sensor_t
    else:
        raise InputError(f"domain must be 'source' or 'target', got {domain!r}")
    if policy.obs_space != sensor.space_out:
        raise InputError("policy observation space does not match the domain sensor output")
    a_var = policy.action_space.names[0]
    if a_var not in world.effect.space_in.names:
        raise InputError(f"effect does not condition on action variable {a_var!r}")
    if world.effect.space_in.subspace({a_var}).variables != policy.action_space.variables:
        raise InputError("action ranges differ between policy and effect")

    x_var = world.x_var
    ef = world.effect.tensor()  # (z, effect in-axes)
    in_names = world.effect.space_in.names
    ef = np.moveaxis(ef, 1 + in_names.index(a_var), 1)  # (z, a, x)
    s = sensor.matrix  # (o, x)
    pi = policy.matrix  # (a, o)
    behavior = np.einsum("ox,ao,zax->azx", s, pi, ef)
    out_space = VariableSpace(policy.action_space.variables + world.effect.space_out.variables)
    return ConditionalTable(world.p_x.space, out_space, behavior.reshape(out_space.size, -1))


def behavior_kl(world: WorldModel, pi_t: Policy, pi_d: Policy, weight: JointTable) -> float:
    """Expected KL between target and source behavior given the state."""
    if weight.space != world.p_x.space:
        raise InputError("weight space does not match the world's state space")
    target = induced_behavior(world, pi_t, "target")
    source = induced_behavior(world, pi_d, "source")
    w = weight.probs.ravel()
    cells = list(target.space_out.cells())
    total = 0.0
    for x in range(weight.space.size):
        if w[x] <= 0.0:
            continue
        total += w[x] * relative_entropy(target.matrix[:, x], source.matrix[:, x], cells=cells)
    return total
