"""Closed-form values, gradient checks, and properties of every objective."""

import math

import numpy as np
import pytest
import torch

from emoshift import losses as L
from emoshift.errors import DataError


def finite_diff(fn, x: torch.Tensor, h: float = 1e-5) -> torch.Tensor:
    """Central finite differences of a scalar function of a 1-D tensor."""
    grad = torch.zeros_like(x)
    for i in range(x.numel()):
        e = torch.zeros_like(x)
        e.view(-1)[i] = h
        grad.view(-1)[i] = (fn(x + e) - fn(x - e)) / (2 * h)
    return grad


def check_gradient(fn, x: torch.Tensor, rel_tol: float = 1e-3):
    x = x.detach().double().requires_grad_(True)
    fn(x).backward()
    num = finite_diff(lambda t: fn(t.double()).detach(), x.detach())
    denom = max(float(num.norm()), 1e-12)
    assert float((x.grad - num).norm()) / denom < rel_tol


class TestL1Reconstruction:
    def test_identity_is_zero(self):
        x = torch.rand(3, 2, 4, 4, 3)
        assert float(L.l1_reconstruction(x, x)) == 0.0

    def test_single_pixel_window(self):
        g = torch.full((1, 1, 1, 1, 1), 0.25)
        t = torch.full((1, 1, 1, 1, 1), 0.75)
        assert abs(float(L.l1_reconstruction(g, t)) - 0.5) < 1e-6

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(0)
        g = rng.random((4, 2, 3, 3, 2))
        t = rng.random((4, 2, 3, 3, 2))
        expected = sum(np.abs(g[i] - t[i]).sum() for i in range(4)) / 4
        got = float(L.l1_reconstruction(torch.as_tensor(g), torch.as_tensor(t)))
        assert abs(got - expected) < 1e-6

    def test_shape_mismatch_rejected(self):
        with pytest.raises(DataError):
            L.l1_reconstruction(torch.rand(2, 3), torch.rand(2, 4))

    def test_gradient(self):
        target = torch.rand(20, dtype=torch.float64)
        check_gradient(
            lambda x: L.l1_reconstruction((x.reshape(4, 5) + 0.3).unsqueeze(-1), target.reshape(4, 5, 1)),
            torch.rand(20),
        )


class TestSyncProb:
    def test_identical_unit_vectors(self):
        v = torch.tensor([0.6, 0.8])
        assert abs(float(L.sync_prob(v, v)) - 1.0) < 1e-6

    def test_orthogonal_hits_floor(self):
        v = torch.tensor([1.0, 0.0])
        s = torch.tensor([0.0, 1.0])
        assert float(L.sync_prob(v, s)) == pytest.approx(L.P_FLOOR)

    def test_zero_vector_eps_guard(self):
        v = torch.tensor([1.0, 0.0])
        s = torch.zeros(2)
        p = float(L.sync_prob(v, s, eps=1e-8))
        assert math.isfinite(p)

    def test_non_positive_eps_rejected(self):
        v = torch.ones(2)
        with pytest.raises(DataError):
            L.sync_prob(v, v, eps=0.0)

    def test_gradient_through_cosine_bce(self):
        s = torch.tensor([0.3, -0.2, 0.9, 0.1, 0.5], dtype=torch.float64)

        def loss(x):
            v1, v2 = x[:5], x[5:10] + 1.0
            probs = torch.stack([L.sync_prob(v1, s)[0], L.sync_prob(v2, s)[0]])
            return L.sync_loss(probs)

        check_gradient(loss, torch.rand(10) + 0.5)


class TestSyncLoss:
    def test_all_one_is_zero(self):
        assert float(L.sync_loss(torch.ones(5))) == 0.0

    def test_exp_minus_one(self):
        assert abs(float(L.sync_loss(torch.tensor([math.exp(-1)]))) - 1.0) < 1e-6

    def test_mean_of_zero_and_two(self):
        probs = torch.tensor([1.0, math.exp(-2)])
        assert abs(float(L.sync_loss(probs)) - 1.0) < 1e-6

    def test_rejects_non_positive(self):
        with pytest.raises(DataError):
            L.sync_loss(torch.tensor([0.5, 0.0]))


class TestGanLosses:
    def test_half_scores(self):
        l_g, l_d = L.gan_losses(torch.tensor([0.5]), torch.tensor([0.5]))
        assert abs(float(l_g) - math.log(0.5)) < 1e-6
        assert abs(float(l_d) - 2 * math.log(0.5)) < 1e-6

    def test_confident_discriminator_bounded_by_clamp(self):
        hi = 1.0 - 1e-7
        lo = 1e-7
        l_g, l_d = L.gan_losses(
            torch.tensor([hi], dtype=torch.float64), torch.tensor([lo], dtype=torch.float64)
        )
        # evaluate the same expression with the configured clamps
        expected_lg = math.log(max(1.0 - lo, L.P_FLOOR))
        expected_ld = math.log(max(hi, L.P_FLOOR)) + expected_lg
        assert abs(float(l_g) - expected_lg) < 1e-9
        assert abs(float(l_d) - expected_ld) < 1e-9
        assert math.isfinite(float(l_d))

    def test_rejects_out_of_range(self):
        with pytest.raises(DataError):
            L.gan_losses(torch.tensor([1.0]), torch.tensor([0.5]))
        with pytest.raises(DataError):
            L.gan_losses(torch.tensor([0.5]), torch.tensor([0.0]))

    def test_gradient(self):
        def loss(x):
            scores = torch.sigmoid(x)
            l_g, l_d = L.gan_losses(scores[:10], scores[10:])
            return l_g + 0.5 * l_d

        check_gradient(loss, torch.randn(20))


class TestEmotionSoftmax:
    def test_uniform(self):
        g = L.emotion_softmax(torch.zeros(3))
        assert torch.allclose(g, torch.full((3,), 1 / 3), atol=1e-9)

    def test_closed_form(self):
        g = L.emotion_softmax(torch.tensor([1.0, 0.0, 0.0]))
        expected = math.e / (math.e + 2)
        assert int(torch.argmax(g)) == 0
        assert abs(float(g[0]) - expected) < 1e-4
        assert abs(float(g[0]) - 0.5761) < 1e-3

    def test_shift_invariance(self):
        z = torch.tensor([0.3, -1.2, 2.0], dtype=torch.float64)
        g1 = L.emotion_softmax(z)
        g2 = L.emotion_softmax(z + 100.0)
        assert torch.allclose(g1, g2, atol=1e-9)

    def test_sums_to_one(self):
        z = torch.randn(7, 3, dtype=torch.float64)
        assert torch.allclose(L.emotion_softmax(z).sum(dim=-1), torch.ones(7, dtype=torch.float64), atol=1e-12)


class TestEmotionLoss:
    def test_perfect(self):
        probs = torch.tensor([[0.0, 1.0, 0.0]] * 3)
        assert float(L.emotion_loss(probs, 1)) == 0.0

    def test_uniform(self):
        probs = torch.full((2, 3), 1 / 3)
        assert abs(float(L.emotion_loss(probs, 0)) - 2 / 3) < 1e-6

    def test_mean_of_extremes(self):
        probs = torch.tensor([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        assert abs(float(L.emotion_loss(probs, 0)) - 0.5) < 1e-6

    def test_bound_holds(self):
        rng = np.random.default_rng(3)
        z = torch.as_tensor(rng.normal(size=(50, 3)))
        probs = L.emotion_softmax(z)
        for d in range(3):
            val = float(L.emotion_loss(probs, d))
            assert 0.0 <= val <= 1.0

    def test_invalid_class_rejected(self):
        with pytest.raises(DataError):
            L.emotion_loss(torch.full((2, 3), 1 / 3), 3)

    def test_gradient_through_softmax(self):
        check_gradient(
            lambda x: L.emotion_loss(L.emotion_softmax(x.reshape(5, 4)), 2),
            torch.randn(20),
        )


class TestTotalLoss:
    def test_all_zero(self):
        b = L.LossBreakdown()
        assert float(L.total_loss(b, L.DEFAULT_WEIGHTS)) == 0.0

    def test_reconstruction_weight(self):
        b = L.LossBreakdown(L_r=1.0)
        assert abs(float(L.total_loss(b, L.DEFAULT_WEIGHTS)) - 0.8) < 1e-9

    def test_emotion_weight_emo_variant(self):
        b = L.LossBreakdown(L_e=1.0)
        assert abs(float(L.total_loss(b, L.EMO_ONLY_WEIGHTS)) - 0.3) < 1e-9

    def test_default_weights_sum_to_one(self):
        assert abs(sum(L.DEFAULT_WEIGHTS.as_tuple()) - 1.0) < 1e-12
        assert abs(sum(L.EMO_ONLY_WEIGHTS.as_tuple()) - 1.0) < 1e-12

    def test_linear_in_each_component(self):
        rng = np.random.default_rng(5)
        w = L.LossWeights(*rng.random(4))
        base = rng.normal(size=4)
        for i in range(4):
            for scale in (0.0, 1.0, 2.5, -3.0):
                comps = list(base)
                comps[i] = base[i] * scale
                a = float(L.total_loss(tuple(torch.tensor(c) for c in comps), w))
                # linearity: f(scaled) - f(base) == w_i * (scale-1) * base_i
                b = float(L.total_loss(tuple(torch.tensor(c) for c in base), w))
                expected = w.as_tuple()[i] * (scale - 1.0) * base[i]
                assert abs((a - b) - expected) < 1e-9

    def test_negative_weight_rejected(self):
        with pytest.raises(DataError):
            L.LossWeights(-0.1, 0, 0, 0)


class TestClampGradNorm:
    def test_in_range_unchanged(self):
        g = torch.tensor([0.6, 0.8])  # norm 1.0
        out = L.clamp_grad_norm([g])[0]
        assert torch.equal(out, g)

    def test_lower_clamp(self):
        g = torch.tensor([1e-4, 0.0])
        out = L.clamp_grad_norm([g])[0]
        assert abs(float(torch.norm(out)) - 1e-2) < 1e-9

    def test_upper_clamp(self):
        g = torch.tensor([2e10, 0.0])
        out = L.clamp_grad_norm([g])[0]
        assert abs(float(torch.norm(out)) - 1e10) < 1.0

    def test_direction_preserved(self):
        rng = np.random.default_rng(7)
        g = torch.as_tensor(rng.normal(size=20)) * 1e-5
        out = L.clamp_grad_norm([g])[0]
        cos = float((g * out).sum() / (g.norm() * out.norm()))
        assert abs(cos - 1.0) < 1e-9

    def test_zero_gradient_unchanged(self):
        g = torch.zeros(5)
        out = L.clamp_grad_norm([g])[0]
        assert torch.equal(out, g)

    def test_invalid_bounds_rejected(self):
        with pytest.raises(DataError):
            L.clamp_grad_norm([torch.ones(2)], lo=1.0, hi=0.5)
        with pytest.raises(DataError):
            L.clamp_grad_norm([torch.ones(2)], lo=0.0, hi=1.0)

    def test_inplace_variant_matches(self):
        rng = np.random.default_rng(9)
        vals = rng.normal(size=8) * 1e-6
        p = torch.nn.Parameter(torch.as_tensor(vals))
        p.grad = torch.as_tensor(vals).clone()
        L.clamp_grad_norm_([p])
        expected = L.clamp_grad_norm([torch.as_tensor(vals)])[0]
        assert torch.allclose(p.grad, expected, atol=1e-12)
