"""Static KAN semantics, weight generators, and the adaptive operators."""

import numpy as np
import pytest

from pakan.kan import (AdaptiveKanOperator, KanLayerConfig, StaticKanWeights,
                       adaptive_kan1d_forward, adaptive_kan2d_forward,
                       adaptive_param_count, gen1d_weights, gen2d_weights,
                       static_kan_forward, static_param_count)
from pakan.errors import ConfigError, ShapeError
from pakan.splines import SplineBasisSpec, basis_eval
from pakan.tensorgraph import ParamStore, Tensor, backward, mean_all

CUBIC = SplineBasisSpec("cubic_bspline", 5)


def make_op(kind, c_in=3, c_out=3, mode="one_to_one", seed=0, **kw):
    rng = np.random.default_rng(seed)
    cfg = KanLayerConfig(c_in, c_out, CUBIC, mode)
    store = ParamStore()
    op = AdaptiveKanOperator(store, "op", cfg, kind, rng, **kw)
    return op, store, rng


class TestConfig:
    def test_mode_constraints(self):
        KanLayerConfig(4, 4, CUBIC, "one_to_one")
        KanLayerConfig(8, 4, CUBIC, "two_to_one")
        with pytest.raises(ConfigError):
            KanLayerConfig(4, 3, CUBIC, "one_to_one")
        with pytest.raises(ConfigError):
            KanLayerConfig(7, 4, CUBIC, "two_to_one")


class TestStaticKan:
    def test_zero_weights_annihilate(self):
        rng = np.random.default_rng(0)
        cfg = KanLayerConfig(2, 2, CUBIC)
        store = ParamStore()
        w = StaticKanWeights(store, "s", cfg, rng)
        w.w.data[:] = 0.0
        out = static_kan_forward(Tensor(rng.normal(size=(1, 2, 4, 4))), w, cfg)
        assert np.array_equal(out.data, np.zeros((1, 2, 4, 4)))

    def test_constant_input_constant_output(self):
        rng = np.random.default_rng(1)
        cfg = KanLayerConfig(3, 3, CUBIC)
        store = ParamStore()
        w = StaticKanWeights(store, "s", cfg, rng)
        out = static_kan_forward(Tensor(np.full((1, 3, 5, 6), 0.4)), w, cfg).data
        assert np.abs(out - out[:, :, :1, :1]).max() < 1e-12

    def test_least_squares_fit_recovers_identity(self):
        # fit phi(u) ~ u on [-1, 1]; the spline must track tanh-then-linear
        cfg = KanLayerConfig(1, 1, CUBIC)
        store = ParamStore()
        rng = np.random.default_rng(2)
        w = StaticKanWeights(store, "s", cfg, rng)
        grid = np.linspace(-1.0, 1.0, 1000)
        design = np.stack([basis_eval(np.tanh(u), CUBIC) for u in grid])
        coeffs, *_ = np.linalg.lstsq(design, grid, rcond=None)
        w.w.data[0, 0, :] = coeffs
        out = static_kan_forward(
            Tensor(grid.reshape(1, 1, 40, 25)), w, cfg).data.reshape(-1)
        assert np.abs(out - grid).max() < 1e-3

    def test_parameter_count(self):
        cfg = KanLayerConfig(4, 6, CUBIC, "one_to_one") if False else \
            KanLayerConfig(4, 4, CUBIC)
        assert static_param_count(cfg) == 4 * 4 * 8


class TestGenerators:
    def test_gen2d_zero_weights_and_bias_emit_half(self):
        op, _, rng = make_op("2d")
        op.gen.bias.data[:] = 0.0  # weights are zero-initialized already
        F = Tensor(rng.normal(size=(2, 3, 4, 5)))
        w = gen2d_weights(F, op.gen)
        assert w.shape == (2, 8, 4, 5)
        assert np.allclose(w.data, 0.5, atol=0)

    def test_gen2d_default_init_is_input_independent(self):
        op, _, rng = make_op("2d")
        a = gen2d_weights(Tensor(rng.normal(size=(1, 3, 4, 4))), op.gen).data
        b = gen2d_weights(Tensor(rng.normal(size=(1, 3, 4, 4))), op.gen).data
        assert np.array_equal(a, b)  # constants until the weights train

    def test_gen2d_locality(self):
        op, _, rng = make_op("2d", seed=3)
        op.gen.weight.data[:] = rng.normal(size=op.gen.weight.shape)
        F1 = rng.normal(size=(1, 3, 4, 4))
        F2 = F1.copy()
        F2[0, :, 2, 1] += 0.7
        w1 = gen2d_weights(Tensor(F1), op.gen).data
        w2 = gen2d_weights(Tensor(F2), op.gen).data
        diff = np.abs(w1 - w2).sum(axis=(0, 1))
        assert diff[2, 1] > 0
        diff[2, 1] = 0
        assert np.abs(diff).max() == 0.0

    def test_gen1d_zero_weights_and_bias_emit_half(self):
        op, _, rng = make_op("1d")
        op.gen.bias.data[:] = 0.0
        F = Tensor(rng.normal(size=(2, 3, 4, 5)))
        w = gen1d_weights(F, op.gen)
        assert w.shape == (2, 3, 8)
        assert np.allclose(w.data, 0.5, atol=0)

    def test_gen1d_spatial_permutation_invariance(self):
        op, _, rng = make_op("1d", seed=4)
        op.gen.weight.data[:] = rng.normal(size=op.gen.weight.shape)
        op.gen.bias.data[:] = rng.normal(size=op.gen.bias.shape)
        F = rng.normal(size=(1, 3, 4, 4))
        perm = rng.permutation(16)
        Fp = F.reshape(1, 3, 16)[:, :, perm].reshape(1, 3, 4, 4)
        w1 = gen1d_weights(Tensor(F), op.gen).data
        w2 = gen1d_weights(Tensor(np.ascontiguousarray(Fp)), op.gen).data
        assert np.allclose(w1, w2, atol=1e-15)

    def test_gen1d_distinguishes_channel_means(self):
        op, _, rng = make_op("1d", c_in=2, c_out=2, seed=5)
        op.gen.weight.data[:] = 1.0
        a = np.zeros((2, 2, 4, 4))
        a[0, 0] = 0.2
        a[1, 0] = 0.9  # second batch item has a different channel-0 mean
        w = gen1d_weights(Tensor(a), op.gen).data
        assert not np.allclose(w[0, 0], w[1, 0])

    def test_generated_weights_strictly_in_unit_interval(self):
        for kind in ("2d", "1d"):
            op, _, rng = make_op(kind, seed=6)
            op.gen.weight.data[:] = rng.normal(size=op.gen.weight.shape) * 5
            F = Tensor(rng.normal(size=(2, 3, 6, 6)) * 5)
            w = op.gen.forward(F).data
            assert (w > 0).all() and (w < 1).all()


class TestAdaptiveOperators:
    def test_zero_edge_scales_annihilate(self):
        for kind in ("2d", "1d"):
            op, _, rng = make_op(kind, seed=7)
            op.edge.data[:] = 0.0
            F = Tensor(rng.normal(size=(1, 3, 4, 4)))
            assert np.array_equal(op.forward(F).data, np.zeros((1, 3, 4, 4)))

    def test_two_to_one_shape(self):
        op, _, rng = make_op("2d", c_in=8, c_out=4, mode="two_to_one", seed=8)
        F = Tensor(rng.normal(size=(2, 8, 5, 5)))
        assert adaptive_kan2d_forward(F, op).shape == (2, 4, 5, 5)

    def test_one_to_one_preserves_shape(self):
        op, _, rng = make_op("1d", seed=9)
        F = Tensor(rng.normal(size=(2, 3, 6, 4)))
        assert adaptive_kan1d_forward(F, op).shape == (2, 3, 6, 4)

    def test_spatially_constant_input_gives_constant_output_1d(self):
        op, _, rng = make_op("1d", seed=10)
        op.gen.weight.data[:] = rng.normal(size=op.gen.weight.shape)
        F = Tensor(np.broadcast_to(rng.normal(size=(1, 3, 1, 1)),
                                   (1, 3, 4, 4)).copy())
        out = op.forward(F).data
        assert np.abs(out - out[:, :, :1, :1]).max() < 1e-12

    def test_static_equivalence_2d(self):
        op, _, rng = make_op("2d", seed=11)
        consts = rng.uniform(0.2, 0.8, 8)
        op.gen.freeze_to_constants(consts)
        cfg = op.cfg
        store2 = ParamStore()
        static = StaticKanWeights(store2, "ref", cfg, rng)
        static.w.data[:] = op.edge.data[:, :, None] * consts[None, None, :]
        for _ in range(5):
            F = Tensor(rng.normal(size=(1, 3, 4, 4)))
            got = op.forward(F).data
            want = static_kan_forward(F, static, cfg).data
            assert np.abs(got - want).max() < 1e-6

    def test_static_equivalence_1d(self):
        op, _, rng = make_op("1d", seed=12)
        consts = rng.uniform(0.2, 0.8, (3, 8))
        op.gen.freeze_to_constants(consts)
        cfg = op.cfg
        store2 = ParamStore()
        static = StaticKanWeights(store2, "ref", cfg, rng)
        static.w.data[:] = op.edge.data[:, :, None] * consts[None, :, :]
        for _ in range(5):
            F = Tensor(rng.normal(size=(2, 3, 4, 4)))
            got = op.forward(F).data
            want = static_kan_forward(F, static, cfg).data
            assert np.abs(got - want).max() < 1e-6

    def test_locality_of_2d_operator(self):
        op, _, rng = make_op("2d", seed=13)
        op.gen.weight.data[:] = rng.normal(size=op.gen.weight.shape)
        F1 = rng.normal(size=(1, 3, 5, 5))
        F2 = F1.copy()
        F2[0, :, 3, 4] += 0.5
        o1 = op.forward(Tensor(F1)).data
        o2 = op.forward(Tensor(F2)).data
        diff = np.abs(o1 - o2).sum(axis=(0, 1))
        assert diff[3, 4] > 0
        diff[3, 4] = 0
        assert np.abs(diff).max() == 0.0

    def test_shift_equivariance_1d_path(self):
        op, _, rng = make_op("1d", seed=14)
        op.gen.weight.data[:] = rng.normal(size=op.gen.weight.shape)
        F = rng.normal(size=(1, 3, 6, 6))
        out = op.forward(Tensor(F)).data
        rolled = np.roll(F, (2, 3), axis=(2, 3))
        out_rolled = op.forward(Tensor(np.ascontiguousarray(rolled))).data
        assert np.allclose(np.roll(out, (2, 3), axis=(2, 3)), out_rolled,
                           atol=1e-12)

    def test_adaptive_params_fewer_than_static(self):
        cfg = KanLayerConfig(4, 4, CUBIC)
        static = static_param_count(cfg)
        assert adaptive_param_count(cfg, "2d") == 4 * 4 + (8 * 4 + 8)
        assert adaptive_param_count(cfg, "1d") == 4 * 4 + 2 * 4 * 8
        assert adaptive_param_count(cfg, "2d") < static
        assert adaptive_param_count(cfg, "1d") < static

    def test_operator_registers_exact_counts(self):
        op, store, _ = make_op("2d", c_in=4, c_out=4)
        assert store.num_values() == adaptive_param_count(op.cfg, "2d")
        op, store, _ = make_op("1d", c_in=4, c_out=4)
        assert store.num_values() == adaptive_param_count(op.cfg, "1d")

    def test_gradients_reach_generator_and_edges(self):
        for kind in ("2d", "1d"):
            op, store, rng = make_op(kind, seed=15)
            op.gen.weight.data[:] = rng.normal(size=op.gen.weight.shape) * 0.3
            F = Tensor(rng.normal(size=(1, 3, 4, 4)))
            store.zero_grad()
            backward(mean_all(op.forward(F)))
            for name, p in store.items():
                assert np.abs(p.grad).max() > 0, f"zero gradient for {name}"

    def test_wrong_channel_count_raises(self):
        op, _, rng = make_op("2d")
        with pytest.raises(ShapeError):
            op.forward(Tensor(np.zeros((1, 5, 4, 4))))
