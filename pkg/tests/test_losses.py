import math

import numpy as np
import pytest

from infoclip.errors import DimensionError, InputError
from infoclip.gradcheck import check_loss_instance, loss_instance
from infoclip.losses import (
    LossWeights,
    compression_grads,
    compression_loss,
    distillation_grads,
    distillation_loss,
    finite_diff_oracle,
    gram_backward,
    l2_normalize_rows,
    l2_normalize_rows_backward,
    loss_gradients,
    max_relative_error,
    total_loss,
)
from infoclip.measures import EntropySpec, gram_from_features, joint_entropy, mutual_information, renyi_entropy
from infoclip.tensorfile import read_tensor

import golden

EIGEN = EntropySpec(2.0, "eigen")
E4 = np.eye(4)
SAME4 = np.tile([[0.6, 0.8]], (4, 1))


class TestCompressionLoss:
    def test_constant_r(self):
        assert compression_loss(E4, E4, SAME4) == pytest.approx(-2.0, abs=1e-12)

    def test_all_identical_diagonal(self):
        assert compression_loss(E4, E4, E4) == pytest.approx(0.0, abs=1e-12)

    def test_eigen_oracle(self, rng):
        dv, dl, r = (rng.normal(size=(8, 4)) for _ in range(3))
        gv, gl, gr = (gram_from_features(x) for x in (dv, dl, r))
        expected = renyi_entropy(gr, EIGEN) - joint_entropy([gv, gl, gr], EIGEN)
        assert compression_loss(dv, dl, r) == pytest.approx(expected, abs=1e-9)

    def test_teacher_entropy_term(self, rng):
        dv, dl, r = (rng.normal(size=(8, 4)) for _ in range(3))
        gv, gl = gram_from_features(dv), gram_from_features(dl)
        extra = joint_entropy([gv, gl], EIGEN)
        assert compression_loss(dv, dl, r, include_teacher_entropy=True) == pytest.approx(
            compression_loss(dv, dl, r) + extra, abs=1e-9)

    def test_row_mismatch(self):
        with pytest.raises(DimensionError):
            compression_loss(np.eye(4), np.eye(4), np.eye(3))


class TestDistillationLoss:
    def test_self_mi_identity(self):
        assert distillation_loss(E4, E4) == pytest.approx(-2.0, abs=1e-12)

    def test_constant_teacher(self, rng):
        assert distillation_loss(SAME4, rng.normal(size=(4, 3))) == pytest.approx(0.0, abs=1e-12)

    def test_eigen_oracle(self, rng):
        t, s = rng.normal(size=(8, 5)), rng.normal(size=(8, 5))
        expected = -mutual_information(gram_from_features(t), gram_from_features(s), EIGEN)
        assert distillation_loss(t, s) == pytest.approx(expected, abs=1e-9)


class TestTotalLoss:
    def test_unit_weights(self):
        assert total_loss(1, 2, 3, LossWeights(1, 1)).total == 6.0

    def test_ablation(self):
        assert total_loss(1, 2, 3, LossWeights(0, 0)).total == 1.0

    def test_arithmetic(self):
        out = total_loss(0.5, -2, -1.5, LossWeights(1, 2))
        assert out.total == pytest.approx(-4.5, abs=1e-15)
        assert (out.task, out.compression, out.distillation) == (0.5, -2, -1.5)

    def test_non_finite(self):
        with pytest.raises(InputError):
            total_loss(float("nan"), 0, 0)

    def test_negative_weight(self):
        with pytest.raises(InputError):
            LossWeights(-1, 1)


class TestGradients:
    def test_zero_weights(self, rng):
        xs = [rng.normal(size=(6, 3)) for _ in range(4)]
        for g in loss_gradients(*xs, LossWeights(0, 0)).values():
            np.testing.assert_array_equal(g, 0.0)

    def test_constant_teacher_gives_zero_student_grad(self, rng):
        g = distillation_grads(SAME4, rng.normal(size=(4, 3)))
        np.testing.assert_allclose(g["r_student"], 0.0, atol=1e-12)

    def test_seeded_n8_d4(self):
        batches, w = loss_instance(np.random.default_rng(84), 8, 4)
        err, radial = check_loss_instance(batches, w)
        assert err <= 1e-4 and radial <= 1e-7

    @pytest.mark.parametrize("seed", range(20))
    def test_many_instances(self, seed):
        rng = np.random.default_rng(1000 + seed)
        n, d = ((4, 3), (8, 8), (16, 3), (5, 2), (12, 6))[seed % 5]
        batches, w = loss_instance(rng, n, d)
        err, radial = check_loss_instance(batches, w)
        assert err <= 1e-4
        assert radial <= 1e-7

    def test_teacher_entropy_grads(self, rng):
        dv, dl, r = (rng.normal(size=(7, 3)) for _ in range(3))
        g = compression_grads(dv, dl, r, include_teacher_entropy=True)
        args = {"dv": dv, "dl_expanded": dl, "r": r}
        for key in args:
            def f(x, key=key):
                return compression_loss(**{**args, key: x}, include_teacher_entropy=True)
            assert max_relative_error(g[key], finite_diff_oracle(f, args[key])) <= 1e-6

    def test_gram_backward_scale_free(self, rng):
        x, up = rng.normal(size=(5, 3)), rng.normal(size=(5, 5))
        up = up + up.T
        np.testing.assert_allclose(gram_backward(3 * x, up), gram_backward(x, up) / 3, rtol=1e-12)
        assert abs(np.sum(gram_backward(x, up) * x)) <= 1e-12

    def test_l2_normalize_backward(self, rng):
        x, u = rng.normal(size=(4, 3)), rng.normal(size=(4, 3))
        fd = finite_diff_oracle(lambda z: float(np.sum(u * l2_normalize_rows(z))), x)
        assert max_relative_error(l2_normalize_rows_backward(x, u), fd) <= 1e-8


class TestFiniteDiffOracle:
    def test_constant(self, rng):
        np.testing.assert_array_equal(finite_diff_oracle(lambda x: 3.0, rng.normal(size=(2, 3))), 0.0)

    def test_quadratic(self):
        out = finite_diff_oracle(lambda x: float(np.sum(x ** 2)), np.array([[1.0, 2.0]]), h=1e-5)
        np.testing.assert_allclose(out, [[2.0, 4.0]], atol=1e-6)

    def test_does_not_mutate(self, rng):
        x = rng.normal(size=(3, 2))
        before = x.copy()
        finite_diff_oracle(lambda z: float(np.sum(np.sin(z))), x)
        np.testing.assert_array_equal(x, before)

    def test_golden_lc_gradient(self):
        pinned = read_tensor(golden.LC_GRAD)
        np.testing.assert_array_equal(golden.lc_fd_gradient(), pinned)
        dv, dl, r = golden.lc_inputs()
        g = compression_grads(dv, dl, r)
        analytic = np.vstack([g["dv"], g["dl_expanded"], g["r"]])
        assert max_relative_error(analytic, pinned) <= 1e-6


def test_max_relative_error_definition():
    assert max_relative_error([0.0], [0.0]) == 0.0
    assert max_relative_error([1.0, 2.0], [1.0, 1.0]) == pytest.approx(0.5)
    assert math.isclose(max_relative_error([[1e-9]], [[2e-9]]), 0.5)
