import numpy as np
import pytest

from scriptorium.nn import AdamW, PlateauScheduler


class TestAdamW:
    def test_single_step_matches_hand_derivation(self):
        # quadratic f(theta) = theta^2 / 2 at theta = 1: g = 1
        theta = np.array([1.0], dtype=np.float32)
        opt = AdamW({"t": theta}, lr=0.1, weight_decay=0.01)
        opt.step({"t": np.array([1.0], dtype=np.float32)})
        # m = 0.1, v = 0.001; m_hat = 1, v_hat = 1
        # theta <- 1 - 0.1*0.01*1 - 0.1*1/(sqrt(1)+1e-8)
        expected = 1.0 - 0.001 - 0.1 / (1.0 + 1e-8)
        assert theta[0] == pytest.approx(expected, abs=1e-7)

    def test_two_steps_hand_derivation(self):
        theta = np.array([1.0], dtype=np.float64)
        opt = AdamW({"t": theta}, lr=0.1, weight_decay=0.0)
        t = 1.0
        m = v = 0.0
        for step in (1, 2):
            g = t  # gradient of t^2/2 evaluated by hand alongside
            m = 0.9 * m + 0.1 * g
            v = 0.999 * v + 0.001 * g * g
            m_hat = m / (1 - 0.9 ** step)
            v_hat = v / (1 - 0.999 ** step)
            t = t - 0.1 * m_hat / (np.sqrt(v_hat) + 1e-8)
            opt.step({"t": np.array([theta[0]], dtype=np.float64)})
            assert theta[0] == pytest.approx(t, abs=1e-12)

    def test_decay_is_decoupled(self):
        # with zero gradient only the decay term moves the parameter
        theta = np.array([2.0], dtype=np.float32)
        opt = AdamW({"t": theta}, lr=0.5, weight_decay=0.1)
        opt.step({"t": np.array([0.0], dtype=np.float32)})
        assert theta[0] == pytest.approx(2.0 * (1 - 0.5 * 0.1))

    def test_converges_on_quadratic(self):
        theta = np.array([5.0], dtype=np.float32)
        opt = AdamW({"t": theta}, lr=0.1, weight_decay=0.0)
        for _ in range(500):
            opt.step({"t": theta.copy()})
        assert abs(theta[0]) < 1e-2


class TestPlateauScheduler:
    def test_constant_metric_drops_at_11_21(self):
        sched = PlateauScheduler(lr=1e-3, patience=10)
        lrs = [sched.step(50.0) for _ in range(1, 35)]
        # epochs are 1-based positions in this list
        assert lrs[9] == pytest.approx(1e-3)       # epoch 10: still initial
        assert lrs[10] == pytest.approx(1e-3 / 3)  # epoch 11: first drop
        assert lrs[19] == pytest.approx(1e-3 / 3)
        assert lrs[20] == pytest.approx(1e-3 / 9)  # epoch 21: second drop
        assert lrs[30] == pytest.approx(1e-3 / 27)

    def test_floor(self):
        sched = PlateauScheduler(lr=1e-3, patience=1, min_lr=1e-5)
        for _ in range(40):
            lr = sched.step(1.0)
        assert lr == pytest.approx(1e-5)

    def test_improvement_resets_counter(self):
        sched = PlateauScheduler(lr=9.0, factor=1 / 3, patience=2)
        assert sched.step(10.0) == 9.0
        assert sched.step(10.0) == 9.0   # stagnant 1
        assert sched.step(5.0) == 9.0    # improvement resets
        assert sched.step(6.0) == 9.0    # stagnant 1
        assert sched.step(6.0) == 3.0    # stagnant 2 -> drop

    def test_patience_validation(self):
        with pytest.raises(ValueError):
            PlateauScheduler(lr=1.0, patience=0)
