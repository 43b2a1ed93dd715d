"""Synthetic data generators and empirical estimators.

Two desk-scale experiment generators: a linear car-following source domain
(state = distance, two velocities and follower acceleration; the demonstrator
acts on a noisy state view, which confounds action and state), and a discrete
driving scene where the demonstrator reacts to a lead vehicle's speed and
indicator light while the spectator only sees a noisy, binned speed.

Also hosts the randomized model generators used by the bound audits.
Everything is a pure function of (config, seed).
"""

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import norm

from .action_effect import LinearGaussianModel
from .errors import InputError
from .imitation import Policy, WorldModel
from .samples import SampleSet
from .spaces import ConditionalTable, JointTable, VariableSpace, extend

_SIGMA_X_DEFAULT = (
    (9.0, 1.5, 1.0, 0.3),
    (1.5, 4.0, 1.2, 0.2),
    (1.0, 1.2, 4.0, 0.3),
    (0.3, 0.2, 0.3, 1.0),
)


@dataclass(frozen=True)
class CarFollowConfig:
    """Linear car-following source domain (dims: X=4, A=1, Z=1).

    X columns: gap distance [m], lead speed [m/s], follower speed [m/s],
    follower acceleration [m/s^2]; A: demonstrator acceleration [m/s^2];
    Z: follower acceleration 1.5 s later [m/s^2].  All centered.
    """

    d_true: float = -0.8
    e_true: tuple[float, ...] = (0.3, 0.5, -0.5, 0.6)
    sigma_x: tuple = _SIGMA_X_DEFAULT
    policy_gain: tuple[float, ...] = (0.2, 0.3, -0.3, 0.5)
    policy_obs_noise_std: float = 0.3
    action_noise_std: float = 0.2
    outcome_noise_std: float = 0.4
    sensor_noise_std: float = 1.5
    f_seed: int = 101
    sensor_matrix: tuple | None = None  # explicit F; otherwise drawn from f_seed
    max_sensor_condition: float = 100.0
    train_sizes: tuple[int, ...] = (500, 2000, 8000, 20000)
    test_size: int = 1000
    repetitions: int = 20

    def __post_init__(self):
        if list(self.train_sizes) != sorted(self.train_sizes):
            raise InputError("train sizes must be ascending")
        if self.repetitions < 1:
            raise InputError("repetitions must be >= 1")
        if len(self.e_true) != 4 or len(self.policy_gain) != 4:
            raise InputError("state dimension is fixed at 4")

    @property
    def dim_x(self) -> int:
        return 4


def carfollow_sensor_matrix(config: CarFollowConfig) -> np.ndarray:
    """Random square sensor F, redrawn until its condition number is tame."""
    if config.sensor_matrix is not None:
        f = np.asarray(config.sensor_matrix, dtype=float)
        if f.shape != (config.dim_x, config.dim_x):
            raise InputError(f"sensor_matrix must be {config.dim_x}x{config.dim_x}")
        return f
    rng = np.random.default_rng(config.f_seed)
    while True:
        f = rng.standard_normal((config.dim_x, config.dim_x))
        if np.linalg.cond(f) <= config.max_sensor_condition:
            return f


def carfollow_model(config: CarFollowConfig) -> LinearGaussianModel:
    dim = config.dim_x
    return LinearGaussianModel(
        f=carfollow_sensor_matrix(config),
        sigma_nn=config.sensor_noise_std**2 * np.eye(dim),
        d=np.array([[config.d_true]]),
        e=np.asarray(config.e_true, dtype=float).reshape(1, dim),
        sigma_oo=np.array([[config.outcome_noise_std**2]]),
    )


def carfollow_policy_cov(config: CarFollowConfig) -> np.ndarray:
    """Population covariance of (A, X) under the linear demonstrator."""
    sx = np.asarray(config.sigma_x, dtype=float)
    g = np.asarray(config.policy_gain, dtype=float)
    var_a = g @ (sx + config.policy_obs_noise_std**2 * np.eye(config.dim_x)) @ g
    var_a += config.action_noise_std**2
    cov_ax = g @ sx  # (4,)
    out = np.empty((5, 5))
    out[0, 0] = var_a
    out[0, 1:] = cov_ax
    out[1:, 0] = cov_ax
    out[1:, 1:] = sx
    return out


def _carfollow_draw(config: CarFollowConfig, rng: np.random.Generator, n: int):
    sx = np.asarray(config.sigma_x, dtype=float)
    chol = np.linalg.cholesky(sx)
    f = carfollow_sensor_matrix(config)
    g = np.asarray(config.policy_gain, dtype=float)
    e = np.asarray(config.e_true, dtype=float)

    x = rng.standard_normal((n, config.dim_x)) @ chol.T
    obs = x + rng.normal(0.0, config.policy_obs_noise_std, size=x.shape)
    a = obs @ g + rng.normal(0.0, config.action_noise_std, size=n)
    z = config.d_true * a + x @ e + rng.normal(0.0, config.outcome_noise_std, size=n)
    y = x @ f.T + rng.normal(0.0, config.sensor_noise_std, size=x.shape)
    return z, a, x, y


_CF_UNITS = {"z": "m/s^2", "a": "m/s^2", "x_1": "m", "x_2": "m/s", "x_3": "m/s", "x_4": "m/s^2"}


def generate_carfollow(config: CarFollowConfig, seed: int) -> tuple[SampleSet, SampleSet]:
    """Training rows (z, a, y_S) and test rows (z, a, x), deterministic per seed."""
    rng = np.random.default_rng(seed)
    n_train = max(config.train_sizes)
    z, a, _, y = _carfollow_draw(config, rng, n_train)
    train = SampleSet(
        ("z", "a", "y_s_1", "y_s_2", "y_s_3", "y_s_4"),
        np.column_stack([z, a, y]),
        units={"z": "m/s^2", "a": "m/s^2"},
    )
    zt, at, xt, _ = _carfollow_draw(config, rng, config.test_size)
    test = SampleSet(
        ("z", "a", "x_1", "x_2", "x_3", "x_4"),
        np.column_stack([zt, at, xt]),
        units=_CF_UNITS,
    )
    return train, test


def generate_carfollow_with_state(config: CarFollowConfig, seed: int) -> SampleSet:
    """Training draw of :func:`generate_carfollow` with the hidden state exposed.

    Only for reference curves (what full observation of X would achieve).
    """
    rng = np.random.default_rng(seed)
    z, a, x, y = _carfollow_draw(config, rng, max(config.train_sizes))
    return SampleSet(
        ("z", "a", "x_1", "x_2", "x_3", "x_4", "y_s_1", "y_s_2", "y_s_3", "y_s_4"),
        np.column_stack([z, a, x, y]),
        units=_CF_UNITS,
    )


@dataclass(frozen=True)
class DrivingSceneConfig:
    """Discrete lead-vehicle scene: speed and indicator drive the demonstrator.

    The demonstrator always brakes when the indicator is on; otherwise it
    accelerates with probability ``increase_prob`` and keeps speed otherwise.
    The spectator sees the lead speed plus Gaussian noise, discretized into
    bins of width 2.5 km/h spanning [37.5, 62.5] plus two absorbing tails.
    """

    speeds: tuple[float, ...] = (40.0, 45.0, 50.0, 55.0, 60.0)
    indicators: tuple[int, ...] = (0, 1)
    actions: tuple[int, ...] = (-1, 0, 1)
    noise_std: float = 0.5
    bin_edges: tuple[float, ...] = tuple(37.5 + 2.5 * k for k in range(11))
    increase_prob: float = 0.5
    cell_weights: tuple[float, ...] | None = None
    sample_sizes: tuple[int, ...] = (100, 1000, 10_000, 100_000)

    def __post_init__(self):
        edges = np.asarray(self.bin_edges, dtype=float)
        if edges.size and np.any(np.diff(edges) <= 0.0):
            raise InputError("bin edges must be strictly ascending")
        if self.noise_std <= 0.0:
            raise InputError("noise std must be positive")
        if not 0.0 <= self.increase_prob <= 1.0:
            raise InputError("increase_prob must be a probability")
        if self.cell_weights is not None:
            w = np.asarray(self.cell_weights, dtype=float)
            if w.shape != (len(self.speeds) * len(self.indicators),) or w.min() < 0:
                raise InputError("cell_weights must be non-negative, one per (speed, indicator)")

    @property
    def n_bins(self) -> int:
        return len(self.bin_edges) + 1


def driving_scene_spaces(config: DrivingSceneConfig):
    """(action, demonstrator observation, binned spectator observation) spaces."""
    y_d_cells = tuple((v, b) for v in config.speeds for b in config.indicators)
    action_space = VariableSpace.from_pairs([("a", config.actions)])
    y_d_space = VariableSpace.from_pairs([("y_d", y_d_cells)])
    y_s_space = VariableSpace.from_pairs([("y_s", tuple(range(config.n_bins)))])
    return action_space, y_d_space, y_s_space


def gaussian_bin_channel(
    means: Sequence[float],
    std: float,
    bin_edges: Sequence[float],
    *,
    input_space: VariableSpace | None = None,
    output_var: str = "y_s",
) -> ConditionalTable:
    """Channel from inputs with Gaussian read-out noise into bins.

    Entry (i, j) is the mass the Gaussian around ``means[j]`` puts into bin i;
    the outer bins absorb the tails, so columns sum to one exactly.
    """
    if std <= 0.0:
        raise InputError("std must be positive")
    means = np.asarray(means, dtype=float)
    edges = np.asarray(bin_edges, dtype=float)
    if edges.size and np.any(np.diff(edges) <= 0.0):
        raise InputError("bin edges must be strictly ascending")
    cdf = norm.cdf((edges[None, :] - means[:, None]) / std) if edges.size else np.empty((means.size, 0))
    ones = np.ones((means.size, 1))
    matrix = np.diff(np.hstack([np.zeros((means.size, 1)), cdf, ones]), axis=1).T
    if input_space is None:
        input_space = VariableSpace.from_pairs([("input", tuple(range(means.size)))])
    if input_space.size != means.size:
        raise InputError("input space size does not match number of means")
    out_space = VariableSpace.from_pairs([(output_var, tuple(range(edges.size + 1)))])
    return ConditionalTable(input_space, out_space, matrix)


def driving_scene_channel(config: DrivingSceneConfig) -> ConditionalTable:
    """Closed-form P_S(Y_S | Y_D): the indicator never reaches the spectator."""
    _, y_d_space, _ = driving_scene_spaces(config)
    means = [v for (v, _) in y_d_space.range_of("y_d")]
    return gaussian_bin_channel(means, config.noise_std, config.bin_edges, input_space=y_d_space)


def true_driving_policy(config: DrivingSceneConfig) -> Policy:
    action_space, y_d_space, _ = driving_scene_spaces(config)
    q = config.increase_prob
    cols = []
    for (_, b) in y_d_space.range_of("y_d"):
        if b == 1:
            probs = {-1: 1.0, 0: 0.0, 1: 0.0}
        else:
            probs = {-1: 0.0, 0: 1.0 - q, 1: q}
        cols.append([probs[a] for a in config.actions])
    return Policy(ConditionalTable(y_d_space, action_space, np.asarray(cols).T))


def driving_scene_cell_weights(config: DrivingSceneConfig) -> np.ndarray:
    n_cells = len(config.speeds) * len(config.indicators)
    if config.cell_weights is None:
        return np.full(n_cells, 1.0 / n_cells)
    w = np.asarray(config.cell_weights, dtype=float)
    return w / w.sum()


def generate_driving_scene(config: DrivingSceneConfig, seed: int) -> SampleSet:
    """Rows (a, y_s_bin, v_o, b_o); the largest configured size is drawn."""
    rng = np.random.default_rng(seed)
    n = max(config.sample_sizes)
    _, y_d_space, _ = driving_scene_spaces(config)
    cells = y_d_space.range_of("y_d")
    weights = driving_scene_cell_weights(config)

    cell_idx = rng.choice(len(cells), size=n, p=weights)
    v = np.asarray([cells[i][0] for i in range(len(cells))])[cell_idx]
    b = np.asarray([cells[i][1] for i in range(len(cells))])[cell_idx]
    u = rng.random(n)
    a = np.where(b == 1, -1, np.where(u < config.increase_prob, 1, 0))
    y_s = v + rng.normal(0.0, config.noise_std, size=n)
    y_bin = np.searchsorted(np.asarray(config.bin_edges), y_s)
    return SampleSet(
        ("a", "y_s_bin", "v_o", "b_o"),
        np.column_stack([a, y_bin, v, b]).astype(float),
        units={"v_o": "km/h"},
    )


def estimate_joint(
    sample: SampleSet,
    space: VariableSpace,
    smoothing: float = 0.0,
    *,
    column_map: Mapping[str, str] | None = None,
) -> JointTable:
    """Relative frequencies over ``space`` with optional add-lambda smoothing.

    Space variables map onto sample columns of the same name unless
    ``column_map`` says otherwise; labels must be numeric.
    """
    if smoothing < 0.0:
        raise InputError("smoothing must be >= 0")
    column_map = dict(column_map or {})
    indices = []
    for name, labels in space.variables:
        column = sample.column(column_map.get(name, name))
        labels = np.asarray(labels, dtype=float)
        idx = np.argmin(np.abs(column[:, None] - labels[None, :]), axis=1)
        if np.any(np.abs(column - labels[idx]) > 1e-9):
            bad = int(np.argmax(np.abs(column - labels[idx]) > 1e-9))
            raise InputError(f"value {column[bad]!r} in column for {name!r} is out of range")
        indices.append(idx)
    counts = np.zeros(space.shape)
    np.add.at(counts, tuple(indices), 1.0)
    counts += smoothing
    total = counts.sum()
    if total <= 0.0:
        raise InputError("cannot normalize an empty, unsmoothed sample")
    return JointTable(space, counts / total)


def _mixed_dirichlet(rng: np.random.Generator, size: int, floor: float = 0.1) -> np.ndarray:
    return (1.0 - floor) * rng.dirichlet(np.ones(size)) + floor / size


def random_channel(
    rng: np.random.Generator, space_in: VariableSpace, space_out: VariableSpace, floor: float = 0.1
) -> ConditionalTable:
    cols = np.column_stack([_mixed_dirichlet(rng, space_out.size, floor) for _ in range(space_in.size)])
    return ConditionalTable(space_in, space_out, cols)


def random_discrete_effect_model(
    rng: np.random.Generator, *, n_x: int = 2, n_ys: int = 2, n_a: int = 2, n_z: int = 2
) -> JointTable:
    """Full-support joint over (z, a, x, y_s) consistent with the source DAG.

    Factorizes as p(x) p(y_s|x) p(a|x) p(z|a,x): the sensor reads the state
    only, and the action influences the outcome only alongside the state.
    """
    x_space = VariableSpace.from_pairs([("x", tuple(range(n_x)))])
    ys_space = VariableSpace.from_pairs([("y_s", tuple(range(n_ys)))])
    a_space = VariableSpace.from_pairs([("a", tuple(range(n_a)))])
    z_space = VariableSpace.from_pairs([("z", tuple(range(n_z)))])
    ax_space = VariableSpace(a_space.variables + x_space.variables)

    p_x = JointTable(x_space, _mixed_dirichlet(rng, n_x))
    sensor = random_channel(rng, x_space, ys_space)
    policy = random_channel(rng, x_space, a_space)
    effect = random_channel(rng, ax_space, z_space)

    joint = extend(extend(extend(p_x, sensor), policy), effect)  # (x, y_s, a, z)
    return joint


def random_case1_world(
    rng: np.random.Generator, *, n_x: int = 3, n_yd: int = 3, n_ys: int = 2, n_a: int = 2, n_z: int = 2
) -> tuple[WorldModel, Policy, JointTable]:
    """World with matched demonstrator/imitator sensors, plus the source joint.

    Returns ``(world, pi_d, joint over (x, y_d, y_s, a))``.
    """
    x_space = VariableSpace.from_pairs([("x", tuple(range(n_x)))])
    yd_space = VariableSpace.from_pairs([("y_d", tuple(range(n_yd)))])
    ys_space = VariableSpace.from_pairs([("y_s", tuple(range(n_ys)))])
    a_space = VariableSpace.from_pairs([("a", tuple(range(n_a)))])
    z_space = VariableSpace.from_pairs([("z", tuple(range(n_z)))])
    ax_space = VariableSpace(a_space.variables + x_space.variables)

    p_x = JointTable(x_space, _mixed_dirichlet(rng, n_x))
    sensor_d = random_channel(rng, x_space, yd_space)
    sensor_s = random_channel(rng, x_space, ys_space)
    effect = random_channel(rng, ax_space, z_space)
    pi_d = Policy(random_channel(rng, yd_space, a_space))

    world = WorldModel(p_x=p_x, sensor_s=sensor_s, sensor_d=sensor_d, sensor_t=sensor_d, effect=effect)
    joint = extend(extend(extend(p_x, sensor_d), sensor_s), pi_d.table)  # (x, y_d, y_s, a)
    return world, pi_d, joint
