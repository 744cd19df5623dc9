"""Autodiff, layer, optimizer and checkpoint tests with independent oracles."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from microdrive import nn
from microdrive.nn import autodiff as ad
from microdrive.nn import checkpoint as ckpt


def _naive_conv2d(x, w, b, stride, pad):
    """Reference convolution via explicit loops."""
    bsz, cin, h, wd = x.shape
    cout, _, kh, kw = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (wd + 2 * pad - kw) // stride + 1
    out = np.zeros((bsz, cout, ho, wo), dtype=np.float64)
    for n in range(bsz):
        for co in range(cout):
            for i in range(ho):
                for j in range(wo):
                    patch = xp[n, :, i * stride : i * stride + kh, j * stride : j * stride + kw]
                    out[n, co, i, j] = np.sum(patch * w[co]) + b[co]
    return out


class TestScalarBasics:
    def test_square_gradient(self):
        x = ad.parameter(np.array(3.0))
        y = ad.square(x)
        ad.backward(y)
        assert y.item() == 9.0
        assert x.grad == pytest.approx(6.0)

    def test_chain_and_accumulation(self):
        x = ad.parameter(np.array(2.0))
        y = ad.add(ad.mul(x, x), ad.mul(x, ad._wrap(3.0)))  # x^2 + 3x
        ad.backward(y)
        assert x.grad == pytest.approx(7.0)

    def test_backward_rejects_nonscalar(self):
        x = ad.parameter(np.zeros(3))
        with pytest.raises(ValueError):
            ad.backward(ad.mul(x, x))


class TestElementwiseGradients:
    @pytest.mark.parametrize("op,domain", [
        (ad.exp, (-2.0, 2.0)),
        (ad.log, (0.1, 5.0)),
        (ad.relu, (-2.0, 2.0)),
        (ad.softplus, (-4.0, 4.0)),
        (ad.tanh, (-2.0, 2.0)),
        (ad.square, (-2.0, 2.0)),
        (ad.abs_, (0.2, 2.0)),
        (ad.lgamma, (0.3, 6.0)),
        (ad.digamma, (0.3, 6.0)),
    ])
    def test_unary_ops(self, op, domain):
        rng = np.random.default_rng(1)
        x = ad.parameter(rng.uniform(*domain, size=(4, 3)))
        ad.grad_check(lambda: ad.sum_(op(x)), [x], rng=rng)

    def test_binary_ops_with_broadcast(self):
        rng = np.random.default_rng(2)
        a = ad.parameter(rng.normal(size=(4, 3)))
        b = ad.parameter(rng.normal(size=(3,)))
        for op in (ad.add, ad.sub, ad.mul, ad.minimum):
            ad.grad_check(lambda: ad.sum_(op(a, b)), [a, b], rng=rng)

    def test_clip_masks_gradient(self):
        x = ad.parameter(np.array([0.5, 2.0, -3.0]))
        y = ad.sum_(ad.clip(x, -1.0, 1.0))
        ad.backward(y)
        assert np.allclose(x.grad, [1.0, 0.0, 0.0])

    def test_reductions_and_shapes(self):
        rng = np.random.default_rng(3)
        x = ad.parameter(rng.normal(size=(5, 4)))
        ad.grad_check(lambda: ad.mean_(ad.square(x)), [x], rng=rng)
        ad.grad_check(lambda: ad.sum_(ad.mean_(x, axis=1)), [x], rng=rng)
        ad.grad_check(lambda: ad.sum_(ad.square(ad.reshape(x, (2, 10)))), [x], rng=rng)
        ad.grad_check(lambda: ad.sum_(ad.square(ad.slice_cols(x, 1, 3))), [x], rng=rng)

    def test_concat_gradients(self):
        rng = np.random.default_rng(4)
        a = ad.parameter(rng.normal(size=(3, 2)))
        b = ad.parameter(rng.normal(size=(3, 4)))
        ad.grad_check(lambda: ad.sum_(ad.square(ad.concat([a, b], axis=1))), [a, b], rng=rng)

    def test_matmul_gradients(self):
        rng = np.random.default_rng(5)
        a = ad.parameter(rng.normal(size=(3, 4)))
        b = ad.parameter(rng.normal(size=(4, 2)))
        ad.grad_check(lambda: ad.sum_(ad.square(ad.matmul(a, b))), [a, b], rng=rng)

    def test_lgamma_backward_is_digamma(self):
        from microdrive import betadist as bd
        x = ad.parameter(np.array([0.7, 2.3, 8.0]))
        ad.backward(ad.sum_(ad.lgamma(x)))
        assert np.allclose(x.grad, bd.digamma(x.data), rtol=1e-10)

    def test_digamma_backward_is_trigamma(self):
        from microdrive import betadist as bd
        x = ad.parameter(np.array([0.7, 2.3, 8.0]))
        ad.backward(ad.sum_(ad.digamma(x)))
        assert np.allclose(x.grad, bd.trigamma(x.data), rtol=1e-9)


class TestConv2d:
    @pytest.mark.parametrize("stride,pad,kernel", [(1, 0, 3), (2, 1, 3), (2, 2, 5), (1, 1, 3)])
    def test_forward_matches_naive(self, stride, pad, kernel):
        rng = np.random.default_rng(6)
        x = rng.normal(size=(2, 3, 8, 8))
        w = rng.normal(size=(4, 3, kernel, kernel))
        b = rng.normal(size=4)
        out = ad.conv2d(ad.Var(x), ad.Var(w), ad.Var(b), stride=stride, pad=pad)
        want = _naive_conv2d(x, w, b, stride, pad)
        assert np.allclose(out.data, want, atol=1e-10)

    def test_identity_1x1_conv(self):
        x = np.random.default_rng(7).normal(size=(1, 2, 5, 5))
        w = np.stack([np.eye(2)[i].reshape(2, 1, 1) for i in range(2)])
        out = ad.conv2d(ad.Var(x), ad.Var(w), ad.Var(np.zeros(2)), stride=1, pad=0)
        assert np.allclose(out.data, x)

    def test_gradients(self):
        rng = np.random.default_rng(8)
        x = ad.parameter(rng.normal(size=(2, 2, 6, 6)))
        w = ad.parameter(rng.normal(size=(3, 2, 3, 3)) * 0.5)
        b = ad.parameter(rng.normal(size=3) * 0.1)
        ad.grad_check(
            lambda: ad.sum_(ad.square(ad.conv2d(x, w, b, stride=2, pad=1))),
            [x, w, b], rng=rng,
        )

    def test_chunking_invariant(self):
        # Forcing tiny chunks must not change forward or backward results.
        rng = np.random.default_rng(9)
        x = ad.parameter(rng.normal(size=(5, 3, 8, 8)))
        w = ad.parameter(rng.normal(size=(4, 3, 3, 3)))
        b = ad.parameter(rng.normal(size=4))

        def run():
            ad.zero_grads([x, w, b])
            out = ad.conv2d(x, w, b, stride=2, pad=1)
            ad.backward(ad.sum_(ad.square(out)))
            return out.data.copy(), x.grad.copy(), w.grad.copy(), b.grad.copy()

        big = run()
        old = ad._CONV_CHUNK_BYTES
        ad._CONV_CHUNK_BYTES = 1
        try:
            small = run()
        finally:
            ad._CONV_CHUNK_BYTES = old
        for got, want in zip(small, big):
            assert np.allclose(got, want, atol=1e-9)

    def test_channel_mismatch_raises(self):
        with pytest.raises(ValueError):
            ad.conv2d(ad.Var(np.zeros((1, 3, 4, 4))), ad.Var(np.zeros((2, 4, 3, 3))),
                      ad.Var(np.zeros(2)))


class TestLayers:
    def test_zero_weight_dense_outputs_bias(self):
        layer = nn.Dense(4, 3, activation="linear", rng=np.random.default_rng(0))
        layer.w.data[:] = 0.0
        layer.b.data[:] = np.array([1.0, -2.0, 0.5], dtype=np.float32)
        out = layer(ad.Var(np.ones((2, 4), dtype=np.float32)))
        assert np.allclose(out.data, [[1.0, -2.0, 0.5]] * 2)

    def test_mlp_grad_check_f64(self):
        rng = np.random.default_rng(10)
        mlp = nn.MLP([5, 8, 8, 1], final_activation="linear", rng=rng, dtype=np.float64)
        x = ad.Var(rng.normal(size=(3, 5)))
        ad.grad_check(lambda: ad.sum_(ad.square(mlp(x))), mlp.parameters(), rng=rng)

    def test_softplus_head_through_beta_log_pdf(self):
        # Full chain: dense -> softplus -> Beta log-density of a fixed action.
        rng = np.random.default_rng(11)
        head = nn.Dense(6, 2, activation="softplus", rng=rng, dtype=np.float64, bias_init=0.5413)
        x = ad.Var(rng.normal(size=(4, 6)))
        act = rng.uniform(0.05, 0.95, size=(4, 1))

        def loss():
            p = head(x)
            one = ad._wrap(1.0)
            alpha = ad.add(ad.slice_cols(p, 0, 1), ad._wrap(1e-6))
            beta = ad.add(ad.slice_cols(p, 1, 2), ad._wrap(1e-6))
            ln_b = ad.sub(ad.add(ad.lgamma(alpha), ad.lgamma(beta)), ad.lgamma(ad.add(alpha, beta)))
            logpdf = ad.sub(
                ad.add(
                    ad.mul(ad.sub(alpha, one), ad._wrap(np.log(act))),
                    ad.mul(ad.sub(beta, one), ad._wrap(np.log1p(-act))),
                ),
                ln_b,
            )
            return ad.mean_(logpdf)

        ad.grad_check(loss, head.parameters(), rng=rng)

    def test_dropout_modes(self):
        x = ad.Var(np.ones((100, 10)))
        assert ad.dropout(x, 0.5, None) is x  # eval mode: identity
        rng = np.random.default_rng(12)
        out = ad.dropout(x, 0.5, rng)
        kept = out.data[out.data > 0]
        assert np.allclose(kept, 2.0)  # inverted scaling
        assert 0.35 < (out.data > 0).mean() < 0.65

    def test_conv_stack_out_features(self):
        stack = nn.ConvStack(15, [4, 8], [5, 5], [2, 2], rng=np.random.default_rng(0))
        x = ad.Var(np.zeros((1, 15, 64, 64), dtype=np.float32))
        assert stack(x).shape == (1, stack.out_features(64, 64))


class TestAdam:
    def test_zero_gradient_no_change(self):
        p = ad.parameter(np.array([1.0, 2.0], dtype=np.float32))
        opt = nn.Adam([p], lr=0.1)
        p.grad = np.zeros(2, dtype=np.float32)
        before = p.data.copy()
        opt.step()
        assert np.allclose(p.data, before)

    def test_first_step_magnitude(self):
        p = ad.parameter(np.array(5.0))
        opt = nn.Adam([p], lr=0.01)
        p.grad = np.array(1.0)
        opt.step()
        # First Adam step moves by ~lr regardless of gradient scale.
        assert float(p.data) == pytest.approx(5.0 - 0.01, abs=1e-6)

    def test_quadratic_bowl_converges(self):
        rng = np.random.default_rng(13)
        p = ad.parameter(rng.normal(size=6))
        opt = nn.Adam([p], lr=0.05)
        losses = []
        for _ in range(100):
            ad.zero_grads([p])
            loss = ad.sum_(ad.square(p))
            ad.backward(loss)
            opt.step()
            losses.append(loss.item())
        assert losses[-1] < 1e-2 * losses[0]
        # Monotone decreasing after warmup.
        tail = losses[20:]
        assert all(b <= a + 1e-9 for a, b in zip(tail, tail[1:]))

    def test_nonfinite_gradient_aborts(self):
        p = ad.parameter(np.array(1.0))
        opt = nn.Adam([p], lr=0.1)
        p.grad = np.array(np.nan)
        with pytest.raises(FloatingPointError):
            opt.step()


class TestClipGradNorm:
    def test_small_norm_unchanged(self):
        p = ad.parameter(np.zeros(4))
        p.grad = np.full(4, 0.1)
        norm = nn.clip_grad_norm([p], 0.5)
        assert norm == pytest.approx(0.2)
        assert np.allclose(p.grad, 0.1)

    def test_large_norm_scaled(self):
        p = ad.parameter(np.zeros(1))
        p.grad = np.array([5.0])
        norm = nn.clip_grad_norm([p], 0.5)
        assert norm == pytest.approx(5.0)
        assert p.grad[0] == pytest.approx(0.5)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(min_value=-100, max_value=100), min_size=1, max_size=16))
    def test_postnorm_bounded(self, values):
        p = ad.parameter(np.zeros(len(values)))
        p.grad = np.array(values, dtype=np.float64)
        before = np.linalg.norm(p.grad)
        nn.clip_grad_norm([p], 0.5)
        after = np.linalg.norm(p.grad)
        assert after <= 0.5 + 1e-12
        if before > 1e-12:
            # Direction preserved.
            assert np.allclose(p.grad / max(after, 1e-300), np.array(values) / before, atol=1e-6)


class TestCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(14)
        net = nn.MLP([4, 8, 2], rng=rng)
        spec = net.spec()
        params = {k: v.data for k, v in net.named_parameters()}
        opt = nn.Adam(net.parameters(), lr=1e-3)
        # Take one step so optimizer state is non-trivial.
        for p in net.parameters():
            p.grad = np.ones_like(p.data)
        opt.step()
        path = tmp_path / "net.ckpt"
        ckpt.save_checkpoint(path, spec, params, opt.state_dict(), {"step": 7})
        loaded, opt_state, meta = ckpt.load_checkpoint(path, spec)
        assert meta == {"step": 7}
        for k, v in params.items():
            assert loaded[k].tobytes() == v.tobytes()
        assert opt_state["t"] == 1
        for a, b in zip(opt_state["m"], opt.m):
            assert np.asarray(a).tobytes() == b.tobytes()

    def test_digest_mismatch_refused(self, tmp_path):
        net = nn.MLP([4, 8, 2], rng=np.random.default_rng(0))
        path = tmp_path / "net.ckpt"
        ckpt.save_checkpoint(path, net.spec(), {k: v.data for k, v in net.named_parameters()})
        other = nn.MLP([4, 9, 2], rng=np.random.default_rng(0))
        with pytest.raises(ValueError, match="digest"):
            ckpt.load_checkpoint(path, other.spec())

    def test_bad_magic_refused(self, tmp_path):
        path = tmp_path / "junk.ckpt"
        path.write_bytes(b"NOTACKPTxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx")
        with pytest.raises(ValueError, match="magic"):
            ckpt.load_checkpoint(path, {"kind": "mlp"})

    def test_assign_params_roundtrip_outputs(self, tmp_path):
        rng = np.random.default_rng(15)
        net = nn.MLP([6, 12, 3], rng=rng)
        x = ad.Var(rng.normal(size=(2, 6)).astype(np.float32))
        before = net(x).data.copy()
        path = tmp_path / "net.ckpt"
        ckpt.save_checkpoint(path, net.spec(), {k: v.data for k, v in net.named_parameters()})
        fresh = nn.MLP([6, 12, 3], rng=np.random.default_rng(999))
        loaded, _, _ = ckpt.load_checkpoint(path, fresh.spec())
        ckpt.assign_params(fresh, loaded)
        after = fresh(x).data
        assert after.tobytes() == before.tobytes()
