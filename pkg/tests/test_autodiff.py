"""Gradient checks: every differentiable op against central finite
differences in float64, plus composed blocks."""

import numpy as np
import pytest

from inkline.nn import ops
from inkline.nn.autodiff import Parameter, Tensor
from inkline.nn.layers import GRCLBlock, GateSummarizer

RNG = np.random.default_rng(20240811)
EPS = 1e-5
TOL = 1e-4


def fd_max_rel_err(build, params, eps=EPS):
    """Central finite differences on a scalar build() vs tape gradients."""
    loss = build()
    loss.backward()
    worst = 0.0
    grads = []
    for p in params:
        grads.append(p.grad.copy())
        p.grad = None
    for p, g in zip(params, grads):
        flat = p.data.reshape(-1)
        gf = g.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + eps
            up = float(build().data)
            flat[i] = keep - eps
            down = float(build().data)
            flat[i] = keep
            numeric = (up - down) / (2 * eps)
            denom = max(abs(numeric), abs(gf[i]), 1e-6)
            worst = max(worst, abs(numeric - gf[i]) / denom)
    return worst


def scalarize(build_y):
    """Wrap an op builder into a scalar loss with weights fixed across
    rebuilds, so finite differences probe the same function."""
    probe = build_y()
    w = Tensor(RNG.normal(size=probe.data.shape))

    def build():
        return ops.reduce_sum(ops.mul(build_y(), w))

    return build


def away_from_kinks(x, kinks=(0.0, 6.0), margin=0.15):
    for k in kinks:
        near = np.abs(x - k) < margin
        x = np.where(near, k + margin * np.sign(x - k + 1e-9), x)
    return x


class TestElementwiseOps:
    def test_add_broadcast(self):
        a = Parameter(RNG.normal(size=(3, 4)))
        b = Parameter(RNG.normal(size=(4,)))
        assert fd_max_rel_err(scalarize(lambda: ops.add(a, b)), [a, b]) < TOL

    def test_mul(self):
        a = Parameter(RNG.normal(size=(2, 5)))
        b = Parameter(RNG.normal(size=(2, 5)))
        assert fd_max_rel_err(scalarize(lambda: ops.mul(a, b)), [a, b]) < TOL

    def test_matmul_batched(self):
        a = Parameter(RNG.normal(size=(2, 3, 4)))
        b = Parameter(RNG.normal(size=(4, 5)))
        assert fd_max_rel_err(scalarize(lambda: ops.matmul(a, b)), [a, b]) < TOL

    def test_linear(self):
        x = Parameter(RNG.normal(size=(3, 4)))
        w = Parameter(RNG.normal(size=(4, 2)))
        b = Parameter(RNG.normal(size=(2,)))
        assert fd_max_rel_err(scalarize(lambda: ops.linear(x, w, b)), [x, w, b]) < TOL

    def test_relu6_away_from_kinks(self):
        data = away_from_kinks(RNG.uniform(-2, 8, size=(4, 5)))
        x = Parameter(data)
        assert fd_max_rel_err(scalarize(lambda: ops.relu6(x)), [x]) < TOL

    def test_relu6_range(self):
        y = ops.relu6(Tensor(RNG.normal(size=(100,)) * 10)).data
        assert y.min() >= 0.0 and y.max() <= 6.0

    def test_sigmoid(self):
        x = Parameter(RNG.normal(size=(3, 3)) * 2)
        assert fd_max_rel_err(scalarize(lambda: ops.sigmoid(x)), [x]) < TOL
        y = ops.sigmoid(Tensor(RNG.normal(size=(50,)) * 20)).data
        assert (y > 0).all() and (y < 1).all()

    def test_tanh(self):
        x = Parameter(RNG.normal(size=(3, 3)))
        assert fd_max_rel_err(scalarize(lambda: ops.tanh(x)), [x]) < TOL

    def test_softmax(self):
        x = Parameter(RNG.normal(size=(2, 6)))
        assert fd_max_rel_err(scalarize(lambda: ops.softmax(x)), [x]) < TOL
        assert np.allclose(ops.softmax(x).data.sum(-1), 1.0, atol=1e-6)

    def test_log_softmax(self):
        x = Parameter(RNG.normal(size=(2, 6)))
        assert fd_max_rel_err(scalarize(lambda: ops.log_softmax(x)), [x]) < TOL


class TestShapeOps:
    def test_concat(self):
        a = Parameter(RNG.normal(size=(2, 3)))
        b = Parameter(RNG.normal(size=(2, 2)))
        assert fd_max_rel_err(scalarize(lambda: ops.concat([a, b], axis=1)), [a, b]) < TOL

    def test_reshape_transpose_narrow(self):
        x = Parameter(RNG.normal(size=(2, 3, 4)))

        def chain():
            y = ops.transpose(x, (0, 2, 1))
            y = ops.reshape(y, (2, 12))
            return ops.narrow(y, 1, 2, 7)

        assert fd_max_rel_err(scalarize(chain), [x]) < TOL

    def test_reduce_mean(self):
        x = Parameter(RNG.normal(size=(3, 4)))
        assert fd_max_rel_err(scalarize(lambda: ops.reduce_mean(x, axis=1)), [x]) < TOL


class TestConvPool:
    def test_conv2d_same_strided(self):
        x = Parameter(RNG.normal(size=(2, 6, 7, 3)))
        w = Parameter(RNG.normal(size=(3, 3, 3, 4)))
        b = Parameter(RNG.normal(size=(4,)))

        build = scalarize(lambda: ops.conv2d(x, w, b, stride=(2, 2), padding="same"))
        assert fd_max_rel_err(build, [x, w, b]) < TOL

    def test_conv2d_valid(self):
        x = Parameter(RNG.normal(size=(1, 5, 6, 2)))
        w = Parameter(RNG.normal(size=(5, 3, 2, 3)))

        build = scalarize(lambda: ops.conv2d(x, w, None, stride=(1, 1), padding="valid"))
        assert fd_max_rel_err(build, [x, w]) < TOL

    def test_conv1d(self):
        x = Parameter(RNG.normal(size=(2, 9, 3)))
        w = Parameter(RNG.normal(size=(3, 3, 4)))
        b = Parameter(RNG.normal(size=(4,)))

        build = scalarize(lambda: ops.conv1d(x, w, b, stride=2))
        assert fd_max_rel_err(build, [x, w, b]) < TOL

    def test_maxpool(self):
        # distinct values keep the argmax stable under the probe epsilon
        base = RNG.permutation(2 * 6 * 6 * 2).astype(np.float64).reshape(2, 6, 6, 2)
        x = Parameter(base)

        build = scalarize(lambda: ops.maxpool2d(x, (3, 3), (2, 2), "same"))
        assert fd_max_rel_err(build, [x], eps=1e-3) < TOL

    def test_avgpool(self):
        x = Parameter(RNG.normal(size=(2, 5, 6, 3)))

        build = scalarize(lambda: ops.avgpool2d(x, (3, 3), (1, 2), "same"))
        assert fd_max_rel_err(build, [x]) < TOL


class TestComposites:
    def test_lstm_cell(self):
        x = Parameter(RNG.normal(size=(2, 3)))
        h = Parameter(RNG.normal(size=(2, 4)))
        c = Parameter(RNG.normal(size=(2, 4)))
        wx = Parameter(RNG.normal(size=(3, 16)) * 0.5)
        wh = Parameter(RNG.normal(size=(4, 16)) * 0.5)
        b = Parameter(RNG.normal(size=(16,)) * 0.1)

        build = scalarize(lambda: ops.concat(list(ops.lstm_cell(x, h, c, wx, wh, b)), axis=1))
        assert fd_max_rel_err(build, [x, h, c, wx, wh, b]) < TOL

    def test_grcl_block_composed(self):
        rng = np.random.default_rng(3)
        block = GRCLBlock(rng, in_c=3, out_c=4, kernel=3, iterations=2, dtype=np.float64)
        x = Parameter(away_from_kinks(RNG.normal(size=(1, 6, 3)) * 1.5))
        params = [x] + list(block.named_params("g").values())

        assert fd_max_rel_err(scalarize(lambda: block.forward(x)), params) < TOL

    def test_gate_summarizer_composed(self):
        rng = np.random.default_rng(4)
        head = GateSummarizer(rng, in_c=3, summary_dim=4, n_classes=2, dtype=np.float64)
        x = Parameter(RNG.normal(size=(1, 5, 3)))
        params = [x] + list(head.named_params("s").values())

        assert fd_max_rel_err(scalarize(lambda: head.forward(x)), params) < TOL

    def test_ctc_loss_gradient(self):
        from inkline.nn.ctc import ctc_loss

        logits = Parameter(RNG.normal(size=(6, 4)) * 1.5)

        def build():
            return ctc_loss(logits, [0, 1, 1])

        assert fd_max_rel_err(build, [logits]) < TOL


class TestBackwardContract:
    def test_nonfinite_gradient_names_op(self):
        x = Parameter(np.array([1.0, np.inf]))
        y = ops.mul(x, x)
        loss = ops.reduce_sum(y)
        with pytest.raises(FloatingPointError, match="mul"):
            loss.backward()

    def test_backward_needs_scalar(self):
        x = Parameter(RNG.normal(size=(3,)))
        with pytest.raises(ValueError):
            ops.mul(x, 2.0).backward()

    def test_grad_accumulates_across_uses(self):
        x = Parameter(np.array([2.0]))
        y = ops.add(ops.mul(x, 3.0), ops.mul(x, 4.0))
        ops.reduce_sum(y).backward()
        assert x.grad[0] == pytest.approx(7.0)
