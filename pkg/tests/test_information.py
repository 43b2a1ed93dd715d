import math

import numpy as np
import pytest

from sensorshift import (
    ConditionalTable,
    DimensionLimitError,
    InputError,
    JointTable,
    SupportViolationError,
    VariableSpace,
    conditional_entropy,
    conditional_mutual_information,
    entropy,
    kl_divergence,
    max_conditional_entropy,
    relative_entropy,
)


def joint(probs, names=None):
    probs = np.asarray(probs, dtype=float)
    names = names or [chr(ord("a") + i) for i in range(probs.ndim)]
    sp = VariableSpace.from_pairs([(n, tuple(range(k))) for n, k in zip(names, probs.shape)])
    return JointTable(sp, probs)


class TestKL:
    def test_identical_is_zero(self):
        p = joint([[0.1, 0.2], [0.3, 0.4]])
        assert kl_divergence(p, p) == 0.0

    def test_point_mass_against_uniform(self):
        sp = VariableSpace.from_pairs([("a", (0, 1))])
        p = JointTable(sp, np.array([1.0, 0.0]))
        q = JointTable(sp, np.array([0.5, 0.5]))
        assert kl_divergence(p, q) == pytest.approx(math.log(2), abs=1e-12)

    def test_matches_termwise_oracle_on_random_pair(self):
        rng = np.random.default_rng(5)
        p = rng.dirichlet(np.ones(4))
        q = rng.dirichlet(np.ones(4))
        oracle = sum(pi * math.log(pi / qi) for pi, qi in zip(p, q) if pi > 0)
        assert relative_entropy(p, q) == pytest.approx(oracle, abs=1e-12)

    def test_support_violation_carries_cell(self):
        sp = VariableSpace.from_pairs([("a", ("u", "v"))])
        p = JointTable(sp, np.array([0.5, 0.5]))
        q = JointTable(sp, np.array([1.0, 0.0]))
        with pytest.raises(SupportViolationError) as err:
            kl_divergence(p, q)
        assert err.value.cell == ("v",)

    def test_space_mismatch_rejected(self):
        p = joint([[0.5, 0.5]])
        q = joint([0.5, 0.5])
        with pytest.raises(InputError):
            kl_divergence(p, q)

    def test_nonnegative_and_zero_iff_equal(self):
        rng = np.random.default_rng(17)
        for _ in range(100):
            p = rng.dirichlet(np.ones(5))
            q = rng.dirichlet(np.ones(5))
            d = relative_entropy(p, q)
            assert d >= 0.0
            if np.max(np.abs(p - q)) > 1e-6:
                assert d > 0.0
            assert relative_entropy(p, p) == 0.0


class TestConditionalMutualInformation:
    def test_conditional_independence_gives_zero(self):
        # p(a, b, c) = p(c) p(a|c) p(b|c): a and b independent given c
        rng = np.random.default_rng(3)
        pc = rng.dirichlet(np.ones(2))
        pa_c = rng.dirichlet(np.ones(2), size=2).T  # (a, c)
        pb_c = rng.dirichlet(np.ones(2), size=2).T
        probs = np.einsum("c,ac,bc->abc", pc, pa_c, pb_c)
        j = joint(probs)
        assert conditional_mutual_information(j, {"a"}, {"b"}, {"c"}) <= 1e-10

    def test_copy_variable_gives_log2(self):
        j = joint(np.array([[0.5, 0.0], [0.0, 0.5]]))
        mi = conditional_mutual_information(j, {"a"}, {"b"}, set())
        assert mi == pytest.approx(math.log(2), abs=1e-12)

    def test_matches_entropy_oracle_on_random_2x2x2(self):
        rng = np.random.default_rng(11)
        probs = rng.dirichlet(np.ones(8)).reshape(2, 2, 2)
        j = joint(probs)

        def h(marg_axes):
            arr = probs.sum(axis=marg_axes) if marg_axes else probs
            arr = arr.ravel()
            return -sum(v * math.log(v) for v in arr if v > 0)

        oracle = h((1,)) + h((0,)) - h(()) - h((0, 1))  # H(a,c)+H(b,c)-H(a,b,c)-H(c)
        mi = conditional_mutual_information(j, {"a"}, {"b"}, {"c"})
        assert mi == pytest.approx(oracle, abs=1e-12)

    def test_symmetric_in_first_two_arguments(self):
        rng = np.random.default_rng(23)
        for _ in range(20):
            probs = rng.dirichlet(np.ones(8)).reshape(2, 2, 2)
            j = joint(probs)
            ab = conditional_mutual_information(j, {"a"}, {"b"}, {"c"})
            ba = conditional_mutual_information(j, {"b"}, {"a"}, {"c"})
            assert ab == pytest.approx(ba, abs=1e-12)

    def test_overlapping_sets_rejected(self):
        j = joint(np.full((2, 2), 0.25))
        with pytest.raises(InputError):
            conditional_mutual_information(j, {"a"}, {"a"}, set())


class TestEntropy:
    def test_uniform(self):
        j = joint(np.full(4, 0.25))
        assert entropy(j) == pytest.approx(math.log(4))

    def test_conditional_entropy_of_copy_is_zero(self):
        j = joint(np.array([[0.5, 0.0], [0.0, 0.5]]))
        assert conditional_entropy(j, {"a"}, {"b"}) == pytest.approx(0.0, abs=1e-12)


def channel(matrix, n_in=None):
    matrix = np.asarray(matrix, dtype=float)
    sp_in = VariableSpace.from_pairs([("x", tuple(range(matrix.shape[1])))])
    sp_out = VariableSpace.from_pairs([("y", tuple(range(matrix.shape[0])))])
    return ConditionalTable(sp_in, sp_out, matrix)


class TestMaxConditionalEntropy:
    def test_identity_sensor_is_zero(self):
        value, _ = max_conditional_entropy(channel(np.eye(3)))
        assert value == pytest.approx(0.0, abs=1e-9)

    def test_constant_sensor_achieves_log3_at_uniform(self):
        value, argmax = max_conditional_entropy(channel(np.ones((1, 3))))
        assert value == pytest.approx(math.log(3), abs=1e-9)
        np.testing.assert_allclose(argmax, np.full(3, 1 / 3), atol=1e-6)

    def test_binary_sensor_matches_grid_oracle(self):
        sensor = channel(np.array([[0.9, 0.2], [0.1, 0.8]]))
        value, _ = max_conditional_entropy(sensor)

        best = -1.0
        for k in range(51):
            p = np.array([k / 50, 1 - k / 50])
            w = sensor.matrix * p
            py = w.sum(axis=1)
            h = -sum(
                w[i, j] * math.log(w[i, j] / py[i])
                for i in range(2)
                for j in range(2)
                if w[i, j] > 0
            )
            best = max(best, h)
        assert abs(value - best) <= 1e-3
        assert value >= best - 1e-12  # the grid is included in the search

    def test_is_an_upper_bound_over_random_input_laws(self):
        rng = np.random.default_rng(31)
        sensor = channel(np.array([[0.7, 0.1, 0.3], [0.2, 0.6, 0.3], [0.1, 0.3, 0.4]]))
        value, _ = max_conditional_entropy(sensor)
        for _ in range(100):
            p = rng.dirichlet(np.ones(3))
            w = sensor.matrix * p
            py = w.sum(axis=1)
            mask = w > 0
            h = -np.sum(w[mask] * (np.log(w[mask]) - np.log((py[:, None] * np.ones((1, 3)))[mask])))
            assert value >= h - 1e-9

    def test_dimension_guard(self):
        rng = np.random.default_rng(0)
        mat = rng.dirichlet(np.ones(3), size=5).T
        with pytest.raises(DimensionLimitError):
            max_conditional_entropy(channel(mat))
        value, _ = max_conditional_entropy(channel(mat), approximate=True)
        assert value >= 0.0
