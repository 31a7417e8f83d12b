import numpy as np
import pytest

from sknakit.nn import ArchSpec, ModelParams, adam_step, init_adam, init_model


def scalar_adam_reference(grad_fn, x0, lr, steps):
    """Textbook scalar Adam, independent of the vectorized implementation."""
    m = v = 0.0
    x = x0
    b1, b2, eps = 0.9, 0.999, 1e-8
    for t in range(1, steps + 1):
        g = grad_fn(x)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mhat = m / (1 - b1**t)
        vhat = v / (1 - b2**t)
        x -= lr * mhat / (np.sqrt(vhat) + eps)
    return x


def tiny_params(value=1.0):
    arch = ArchSpec(input_shape=(1, 8, 8), conv_channels=(2,), dense_units=2)
    return ModelParams(arch, {"w": np.array([value], dtype=np.float64)})


class TestAdamStep:
    def test_first_step_magnitude_is_lr(self):
        params = tiny_params(0.0)
        state = init_adam(params)
        grads = {"w": np.array([3.7])}
        adam_step(params, grads, state, lr=0.001)
        # bias-corrected first step: lr * g / (|g| + eps) ~ lr
        assert params.tensors["w"][0] == pytest.approx(-0.001, rel=1e-6)

    def test_zero_gradient_leaves_params_unchanged(self):
        params = tiny_params(2.5)
        state = init_adam(params)
        for _ in range(50):
            adam_step(params, {"w": np.zeros(1)}, state)
        assert params.tensors["w"][0] == 2.5

    def test_quadratic_descent_matches_scalar_reference(self):
        params = tiny_params(1.0)
        state = init_adam(params)
        trajectory = []
        for _ in range(100):
            g = {"w": 2.0 * params.tensors["w"]}
            adam_step(params, g, state, lr=0.1)
            trajectory.append(float(params.tensors["w"][0]))
        expected = scalar_adam_reference(lambda x: 2.0 * x, 1.0, 0.1, 100)
        assert trajectory[-1] == pytest.approx(expected, rel=1e-9)
        assert abs(trajectory[-1]) < 0.5
        # |x| trends down: late-phase mean below early-phase mean
        assert np.mean(np.abs(trajectory[-20:])) < np.mean(np.abs(trajectory[:20]))

    def test_step_counter_and_moments_track(self):
        params = tiny_params(0.0)
        state = init_adam(params)
        adam_step(params, {"w": np.ones(1)}, state)
        adam_step(params, {"w": np.ones(1)}, state)
        assert state.t == 2
        assert state.m["w"][0] == pytest.approx(0.19)  # 0.1 + 0.9*0.1

    def test_moments_mirror_param_shapes(self):
        params = init_model(ArchSpec(), seed=0)
        state = init_adam(params)
        for name, tensor in params.tensors.items():
            assert state.m[name].shape == tensor.shape
            assert state.v[name].shape == tensor.shape
            assert not state.m[name].any()
