"""Action-effect identification from spectator data, exact and approximate.

A hidden confounder story: the demonstrator reacts to state the spectator
cannot see, so the naive conditional P(Z | A) is not the action-effect.  With
a known sensor channel the effect P(Z | X, A) is bounded cell by cell; an
informative sensor collapses the bounds to a point, a blind one widens them
to [0, 1].  The averaging proxy is compared against its information bound.
"""

import numpy as np

from sensorshift import (
    ConditionalTable,
    JointTable,
    VariableSpace,
    discrete_effect_solution_set,
    effect_bounds,
    extend,
    marginalize,
    proxy_gap_bound,
    random_discrete_effect_model,
)

rng = np.random.default_rng(42)

x_space = VariableSpace.from_pairs([("x", (0, 1))])
ys_space = VariableSpace.from_pairs([("y_s", (0, 1))])


def build_joint(sensor_matrix):
    """p(x) p(y_s|x) p(a|x) p(z|a,x) with a strongly state-driven policy."""
    a_space = VariableSpace.from_pairs([("a", (0, 1))])
    z_space = VariableSpace.from_pairs([("z", (0, 1))])
    ax_space = VariableSpace(a_space.variables + x_space.variables)
    p_x = JointTable(x_space, np.array([0.5, 0.5]))
    sensor = ConditionalTable(x_space, ys_space, np.asarray(sensor_matrix, dtype=float))
    policy = ConditionalTable(x_space, a_space, np.array([[0.9, 0.2], [0.1, 0.8]]))
    effect = ConditionalTable(
        ax_space, z_space, np.array([[0.8, 0.3, 0.6, 0.1], [0.2, 0.7, 0.4, 0.9]])
    )
    return extend(extend(extend(p_x, sensor), policy), effect), sensor


for label, matrix in (
    ("identity sensor (X observed through Y_S)", np.eye(2)),
    ("noisy sensor", np.array([[0.8, 0.25], [0.2, 0.75]])),
    ("blind sensor (Y_S constant)", np.array([[0.5, 0.5], [0.5, 0.5]])),
):
    joint, sensor = build_joint(matrix)
    p_zays = marginalize(joint, {"z", "a", "y_s"})
    sets = discrete_effect_solution_set(p_zays, sensor)
    lo, hi = effect_bounds(sets, z=1, x=0, a=1)
    truth = joint.prob({"z": 1, "a": 1, "x": 0, "y_s": 0}) + joint.prob(
        {"z": 1, "a": 1, "x": 0, "y_s": 1}
    )
    denom = sum(
        joint.prob({"z": z, "a": 1, "x": 0, "y_s": y}) for z in (0, 1) for y in (0, 1)
    )
    print(f"{label}:")
    print(f"   P(z=1 | x=0, a=1) truth {truth / denom:.4f}, identified interval [{lo:.4f}, {hi:.4f}]")

print("\nAveraging proxy against its information bound (random binary model):")
joint = random_discrete_effect_model(rng)
gap, mi, ent = proxy_gap_bound(joint)
print(f"   expected KL(exact || proxy) = {gap:.6f}")
print(f"   <= I_S(X; Z | A, Y_S)      = {mi:.6f}")
print(f"   <= max_P' H(X | Y_S)       = {ent:.6f}")
