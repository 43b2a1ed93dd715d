import math

import numpy as np
import pytest

from sensorshift import (
    ConditionalTable,
    JointTable,
    Policy,
    PolicyConstraint,
    SupportViolationError,
    VariableSpace,
    ZeroProbabilityError,
    behavior_kl,
    bound_case1,
    bound_case2,
    condition,
    exact_policy_solution_set,
    induced_behavior,
    marginalize,
    policy_divergence,
    policy_from_joint,
    proxy_case1,
    proxy_case2,
    proxy_case3,
    random_case1_world,
    select_policy_lp,
)


def chan(matrix, in_name, in_range, out_name, out_range):
    return ConditionalTable(
        VariableSpace.from_pairs([(in_name, in_range)]),
        VariableSpace.from_pairs([(out_name, out_range)]),
        np.asarray(matrix, dtype=float),
    )


def a_space(k=2):
    return VariableSpace.from_pairs([("a", tuple(range(k)))])


def joint_ays(probs):
    probs = np.asarray(probs, dtype=float)
    sp = VariableSpace.from_pairs(
        [("a", tuple(range(probs.shape[0]))), ("y_s", tuple(range(probs.shape[1])))]
    )
    return JointTable(sp, probs)


class TestExactPolicySolutionSet:
    def test_identity_channel_unique_vertex(self):
        p = joint_ays([[0.3, 0.1], [0.2, 0.4]])
        sets = exact_policy_solution_set(p, chan(np.eye(2), "y_d", (0, 1), "y_s", (0, 1)))
        np.testing.assert_allclose(sets[0].vertices, [[0.3, 0.1]], atol=1e-12)
        np.testing.assert_allclose(sets[1].vertices, [[0.2, 0.4]], atol=1e-12)

    def test_constant_observation_segment(self):
        p = joint_ays([[0.5], [0.5]])
        sets = exact_policy_solution_set(p, chan(np.ones((1, 2)), "y_d", (0, 1), "y_s", (0,)))
        np.testing.assert_allclose(sets[0].vertices, [[0.0, 0.5], [0.5, 0.0]], atol=1e-12)

    def test_random_channel_vertices_satisfy_equations(self):
        rng = np.random.default_rng(9)
        channel = chan(rng.dirichlet(np.ones(3), size=4).T, "y_d", (0, 1, 2, 3), "y_s", (0, 1, 2))
        truth = rng.dirichlet(np.ones(8)).reshape(2, 4)  # joint over (a, y_d)
        p_ays = JointTable(
            VariableSpace.from_pairs([("a", (0, 1)), ("y_s", (0, 1, 2))]),
            truth @ channel.matrix.T,
        )
        sets = exact_policy_solution_set(p_ays, channel)
        for ia, a in enumerate((0, 1)):
            for v in sets[a].vertices:
                resid = np.max(np.abs(channel.matrix @ v - truth[ia] @ channel.matrix.T))
                assert resid <= 1e-8


class TestPolicyFromJoint:
    def test_uniform_joint_gives_uniform_policy(self):
        sel = {0: np.array([0.25, 0.25]), 1: np.array([0.25, 0.25])}
        pol = policy_from_joint(sel, a_space(), VariableSpace.from_pairs([("y_d", (0, 1))]))
        np.testing.assert_allclose(pol.matrix, 0.5)

    def test_direct_normalization(self):
        sel = {0: np.array([0.4]), 1: np.array([0.1])}
        pol = policy_from_joint(sel, a_space(), VariableSpace.from_pairs([("y_d", (0,))]))
        assert pol.prob(0, 0) == pytest.approx(0.8)

    def test_singleton_polytope_matches_conditioning(self):
        p = joint_ays([[0.3, 0.1], [0.2, 0.4]])
        sets = exact_policy_solution_set(p, chan(np.eye(2), "y_d", (0, 1), "y_s", (0, 1)))
        pol = policy_from_joint(
            {a: s.vertices[0] for a, s in sets.items()},
            a_space(),
            VariableSpace.from_pairs([("y_d", (0, 1))]),
        )
        want = condition(p, {"y_s"})
        np.testing.assert_allclose(pol.matrix, want.matrix, atol=1e-12)

    def test_zero_column_rejected(self):
        sel = {0: np.array([0.5, 0.0]), 1: np.array([0.5, 0.0])}
        with pytest.raises(ZeroProbabilityError):
            policy_from_joint(sel, a_space(), VariableSpace.from_pairs([("y_d", (0, 1))]))


class TestSelectPolicyLP:
    def test_singletons_ignore_objective(self):
        p = joint_ays([[0.3, 0.1], [0.2, 0.4]])
        sets = exact_policy_solution_set(p, chan(np.eye(2), "y_d", (0, 1), "y_s", (0, 1)))
        pol = select_policy_lp(sets, action_space=a_space())
        want = condition(p, {"y_s"})
        np.testing.assert_allclose(pol.matrix, want.matrix, atol=1e-9)

    def test_pinning_constraint_selects_unique_point(self):
        p = joint_ays([[0.5], [0.5]])
        sets = exact_policy_solution_set(p, chan(np.ones((1, 2)), "y_d", (0, 1), "y_s", (0,)))
        cons = [
            PolicyConstraint({(0, 0): 1.0}, "==", 0.5),  # all of action 0 mass at y_d = 0
            PolicyConstraint({(1, 0): 1.0}, "==", 0.0),
        ]
        pol = select_policy_lp(sets, cons, action_space=a_space())
        assert pol.prob(0, 0) == pytest.approx(1.0, abs=1e-9)
        assert pol.prob(1, 1) == pytest.approx(1.0, abs=1e-9)

    def test_zero_rows_hold_exactly(self):
        p = joint_ays([[0.3, 0.2], [0.3, 0.2]])  # consistent with the rank-1 channel
        channel = chan([[0.6, 0.6], [0.4, 0.4]], "y_d", (0, 1), "y_s", (0, 1))
        sets = exact_policy_solution_set(p, channel)
        cons = [
            PolicyConstraint({(1, 0): 1.0}, "==", 0.0),
            PolicyConstraint({(0, 1): 1.0}, "==", 0.0),
        ]
        pol = select_policy_lp(sets, cons, action_space=a_space())
        assert pol.prob(1, 0) == 0.0
        assert pol.prob(0, 1) == 0.0
        assert pol.prob(0, 0) == pytest.approx(1.0, abs=1e-9)


class TestProxyCase1:
    def test_identity_channel_degenerates(self):
        p = chan([[0.8, 0.3], [0.2, 0.7]], "y_s", (0, 1), "a", (0, 1))
        channel = chan(np.eye(2), "y_d", (0, 1), "y_s", (0, 1))
        np.testing.assert_allclose(proxy_case1(p, channel).matrix, p.matrix)

    def test_uninformative_channel_collapses_to_marginal(self):
        p = chan([[0.8, 0.3], [0.2, 0.7]], "y_s", (0, 1), "a", (0, 1))
        channel = chan([[0.5, 0.5], [0.5, 0.5]], "y_d", (0, 1), "y_s", (0, 1))
        proxy = proxy_case1(p, channel)
        np.testing.assert_allclose(proxy.matrix[:, 0], proxy.matrix[:, 1])

    def test_matches_brute_force_average(self):
        rng = np.random.default_rng(2)
        p = chan(rng.dirichlet(np.ones(2), size=3).T, "y_s", (0, 1, 2), "a", (0, 1))
        channel = chan(rng.dirichlet(np.ones(3), size=2).T, "y_d", (0, 1), "y_s", (0, 1, 2))
        proxy = proxy_case1(p, channel)
        for a in (0, 1):
            for y in (0, 1):
                oracle = sum(p.matrix[a, s] * channel.matrix[s, y] for s in range(3))
                assert proxy.prob(a, y) == pytest.approx(oracle, abs=1e-12)


class TestProxyCase2:
    def test_identity_back_channel(self):
        p = chan([[0.8, 0.3], [0.2, 0.7]], "y_s", (0, 1), "a", (0, 1))
        back = chan(np.eye(2), "y_t", (0, 1), "y_s", (0, 1))
        np.testing.assert_allclose(proxy_case2(p, back).matrix, p.matrix, atol=1e-12)

    def test_geometric_pooling_hand_value(self):
        p = chan([[0.9, 0.5], [0.1, 0.5]], "y_s", (0, 1), "a", (0, 1))
        back = chan([[0.5], [0.5]], "y_t", (0,), "y_s", (0, 1))
        pol = proxy_case2(p, back)
        root = math.sqrt(0.45), math.sqrt(0.05)
        np.testing.assert_allclose(
            pol.matrix[:, 0], [root[0] / sum(root), root[1] / sum(root)], atol=1e-12
        )
        assert pol.prob(0, 0) == pytest.approx(0.75)

    def test_zero_probability_rejected(self):
        p = chan([[1.0, 0.5], [0.0, 0.5]], "y_s", (0, 1), "a", (0, 1))
        back = chan(np.eye(2), "y_t", (0, 1), "y_s", (0, 1))
        with pytest.raises(SupportViolationError):
            proxy_case2(p, back)


class TestProxyCase3:
    def test_all_identity_collapses(self):
        p = chan([[0.8, 0.3], [0.2, 0.7]], "y_s", (0, 1), "a", (0, 1))
        sensor = chan(np.eye(2), "x", (0, 1), "y_s", (0, 1))
        posterior = chan(np.eye(2), "y_t", (0, 1), "x", (0, 1))
        np.testing.assert_allclose(proxy_case3(p, sensor, posterior).matrix, p.matrix, atol=1e-12)

    def test_concentrated_posterior_returns_intermediate_column(self):
        rng = np.random.default_rng(4)
        p = chan(rng.dirichlet(np.ones(2), size=2).T, "y_s", (0, 1), "a", (0, 1))
        sensor = chan(rng.dirichlet(np.ones(2), size=2).T, "x", (0, 1), "y_s", (0, 1))
        posterior = chan([[1.0], [0.0]], "y_t", (0,), "x", (0, 1))
        pol = proxy_case3(p, sensor, posterior)
        ptilde = p.matrix @ sensor.matrix
        np.testing.assert_allclose(pol.matrix[:, 0], ptilde[:, 0] / ptilde[:, 0].sum(), atol=1e-12)

    def test_matches_composed_formula(self):
        rng = np.random.default_rng(6)
        p = chan(rng.dirichlet(np.ones(2), size=2).T, "y_s", (0, 1), "a", (0, 1))
        sensor = chan(rng.dirichlet(np.ones(2), size=2).T, "x", (0, 1), "y_s", (0, 1))
        posterior = chan(rng.dirichlet(np.ones(2), size=2).T, "y_t", (0, 1), "x", (0, 1))
        pol = proxy_case3(p, sensor, posterior)
        ptilde = p.matrix @ sensor.matrix
        for yt in (0, 1):
            un = [
                math.exp(sum(posterior.matrix[x, yt] * math.log(ptilde[a, x]) for x in (0, 1)))
                for a in (0, 1)
            ]
            np.testing.assert_allclose(pol.matrix[:, yt], np.array(un) / sum(un), atol=1e-12)

    def test_proxies_are_column_stochastic(self):
        rng = np.random.default_rng(8)
        p = chan(rng.dirichlet(np.ones(3), size=2).T, "y_s", (0, 1), "a", (0, 1, 2))
        channel = chan(rng.dirichlet(np.ones(2), size=3).T, "y_d", (0, 1, 2), "y_s", (0, 1))
        sensor = chan(rng.dirichlet(np.ones(2), size=2).T, "x", (0, 1), "y_s", (0, 1))
        posterior = chan(rng.dirichlet(np.ones(2), size=2).T, "y_t", (0, 1), "x", (0, 1))
        for pol in (
            proxy_case1(p, channel),
            proxy_case2(p, channel),
            proxy_case3(p, sensor, posterior),
        ):
            np.testing.assert_allclose(pol.matrix.sum(axis=0), 1.0, atol=1e-12)


def deterministic_relation_joint():
    """Joint over (a, y_d, y_s) where y_d is a deterministic copy of y_s."""
    probs = np.zeros((2, 2, 2))
    probs[:, 0, 0] = [0.3, 0.2]
    probs[:, 1, 1] = [0.1, 0.4]
    sp = VariableSpace.from_pairs([("a", (0, 1)), ("y_d", (0, 1)), ("y_s", (0, 1))])
    return JointTable(sp, probs)


class TestBoundCase1:
    def test_deterministic_relation_zero_kl(self):
        kl, mi, ent = bound_case1(deterministic_relation_joint())
        assert kl == pytest.approx(0.0, abs=1e-12)

    def test_conditional_independence_zero_mi(self):
        # p(a, y_d, y_s) = p(y_s) p(y_d | y_s) p(a | y_s)
        rng = np.random.default_rng(10)
        p_ys = rng.dirichlet(np.ones(2))
        p_yd_ys = rng.dirichlet(np.ones(2), size=2).T
        p_a_ys = rng.dirichlet(np.ones(2), size=2).T
        probs = np.einsum("s,ds,as->ads", p_ys, p_yd_ys, p_a_ys)
        sp = VariableSpace.from_pairs([("a", (0, 1)), ("y_d", (0, 1)), ("y_s", (0, 1))])
        kl, mi, ent = bound_case1(JointTable(sp, probs))
        assert mi == pytest.approx(0.0, abs=1e-10)
        assert kl <= 1e-10

    def test_randomized_chain_audit(self):
        rng = np.random.default_rng(12)
        for _ in range(200):
            _, _, joint = random_case1_world(rng)
            kl, mi, ent = bound_case1(joint)
            assert kl <= mi + 1e-9
            assert mi <= ent + 1e-9


class TestBoundCase2:
    def test_deterministic_back_channel_zero(self):
        p = chan([[0.8, 0.3], [0.2, 0.7]], "y_s", (0, 1), "a", (0, 1))
        back = chan([[1.0, 0.0, 1.0], [0.0, 1.0, 0.0]], "y_t", (0, 1, 2), "y_s", (0, 1))
        p_yt = JointTable(VariableSpace.from_pairs([("y_t", (0, 1, 2))]), np.array([0.5, 0.3, 0.2]))
        bound = bound_case2(p, back, p_yt)
        assert bound == pytest.approx(0.0, abs=1e-12)
        pol = proxy_case2(p, back)
        np.testing.assert_allclose(pol.matrix, p.matrix[:, [0, 1, 0]], atol=1e-12)

    def test_constant_conditional_zero(self):
        p = chan([[0.6, 0.6], [0.4, 0.4]], "y_s", (0, 1), "a", (0, 1))
        back = chan([[0.3, 0.7], [0.7, 0.3]], "y_t", (0, 1), "y_s", (0, 1))
        p_yt = JointTable(VariableSpace.from_pairs([("y_t", (0, 1))]), np.array([0.5, 0.5]))
        assert bound_case2(p, back, p_yt) == pytest.approx(0.0, abs=1e-12)

    def test_matches_termwise_oracle(self):
        rng = np.random.default_rng(14)
        p = chan(rng.dirichlet(np.ones(2), size=2).T, "y_s", (0, 1), "a", (0, 1))
        back = chan(rng.dirichlet(np.ones(2), size=2).T, "y_t", (0, 1), "y_s", (0, 1))
        weights = rng.dirichlet(np.ones(2))
        p_yt = JointTable(VariableSpace.from_pairs([("y_t", (0, 1))]), weights)
        pol = proxy_case2(p, back)
        oracle = 0.0
        for a in (0, 1):
            for yt in (0, 1):
                for ys in (0, 1):
                    oracle += (
                        back.matrix[ys, yt]
                        * weights[yt]
                        * pol.matrix[a, yt]
                        * math.log(pol.matrix[a, yt] / p.matrix[a, ys])
                    )
        assert bound_case2(p, back, p_yt) == pytest.approx(oracle, abs=1e-12)


class TestBehavior:
    def test_deterministic_sensor_and_policy(self):
        rng = np.random.default_rng(16)
        world, _, _ = random_case1_world(rng, n_x=2, n_yd=2, n_ys=2, n_a=2, n_z=2)
        det_sensor = chan(np.eye(2), "x", (0, 1), "y_d", (0, 1))
        det_policy = Policy(chan([[1.0, 0.0], [0.0, 1.0]], "y_d", (0, 1), "a", (0, 1)))
        from sensorshift import WorldModel

        w = WorldModel(world.p_x, world.sensor_s, det_sensor, det_sensor, world.effect)
        beh = induced_behavior(w, det_policy, "source")
        for x in (0, 1):
            col = beh.column_at({"x": x})
            # action is dictated by x; outcome follows the effect table
            dictated = x
            for a in (0, 1):
                for z in (0, 1):
                    want = w.effect.prob(z, (a, x)) if a == dictated else 0.0
                    assert beh.prob((a, z), x) == pytest.approx(want, abs=1e-12)

    def test_uniform_policy_factorizes(self):
        rng = np.random.default_rng(18)
        world, _, _ = random_case1_world(rng, n_x=2, n_yd=2, n_ys=2, n_a=2, n_z=2)
        uniform = Policy(chan(np.full((2, 2), 0.5), "y_d", (0, 1), "a", (0, 1)))
        beh = induced_behavior(world, uniform, "source")
        for x in (0, 1):
            for a in (0, 1):
                for z in (0, 1):
                    want = 0.5 * world.effect.prob(z, (a, x))
                    assert beh.prob((a, z), x) == pytest.approx(want, abs=1e-12)

    def test_matches_triple_sum_oracle(self):
        rng = np.random.default_rng(20)
        world, pi_d, _ = random_case1_world(rng, n_x=2, n_yd=3, n_ys=2, n_a=2, n_z=2)
        beh = induced_behavior(world, pi_d, "source")
        for x in (0, 1):
            for a in (0, 1):
                for z in (0, 1):
                    oracle = sum(
                        world.sensor_d.matrix[o, x]
                        * pi_d.matrix[a, o]
                        * world.effect.prob(z, (a, x))
                        for o in range(3)
                    )
                    assert beh.prob((a, z), x) == pytest.approx(oracle, abs=1e-12)

    def test_matched_transfer_is_exact(self):
        rng = np.random.default_rng(22)
        for _ in range(50):
            world, pi_d, _ = random_case1_world(rng)
            assert behavior_kl(world, pi_d, pi_d, world.p_x) <= 1e-12

    def test_behavior_bounded_by_policy_divergence(self):
        rng = np.random.default_rng(24)
        for _ in range(200):
            world, pi_d, joint = random_case1_world(rng)
            p_a_ys = condition(marginalize(joint, {"a", "y_s"}), {"y_s"})
            channel = condition(marginalize(joint, {"y_s", "y_d"}), {"y_d"})
            proxy = proxy_case1(p_a_ys, channel)
            lhs = behavior_kl(world, proxy, pi_d, world.p_x)
            rhs = policy_divergence(proxy, pi_d, marginalize(joint, {"y_d"}))
            assert lhs <= rhs + 1e-9


class TestExactRecovery:
    def test_invertible_channel_recovers_policy(self):
        # population tables generated by a known policy; invertible channel
        rng = np.random.default_rng(26)
        world, pi_d, joint = random_case1_world(rng, n_yd=3, n_ys=3)
        channel = condition(marginalize(joint, {"y_s", "y_d"}), {"y_d"})
        if abs(np.linalg.det(channel.matrix)) < 1e-6:
            pytest.skip("random channel nearly singular")
        p_ays = marginalize(joint, {"a", "y_s"})
        sets = exact_policy_solution_set(p_ays, channel)
        pol = select_policy_lp(sets, action_space=pi_d.action_space)
        np.testing.assert_allclose(pol.matrix, pi_d.matrix, atol=1e-6)
