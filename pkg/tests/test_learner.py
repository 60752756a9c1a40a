"""Loss, sample bookkeeping, slope selection, and training."""

import numpy as np
import pytest

from lyasynth.dynamics import BALL, ORTHANT_BALL, DomainSpec, load_system
from lyasynth.learner import (
    AUTO,
    COUNTEREXAMPLE,
    INITIAL,
    LearnerConfig,
    SampleSet,
    TrainingOverflowError,
    auto_slope,
    classify_samples,
    leaky_relu,
    loss_and_gradients,
    sample_loss,
    train,
)
from lyasynth.network import MODE_FREE, MODE_ONES, Lnn, NetworkShape, init_network
from oracles import fd_weight_gradients

PLANAR = load_system("vars: x, y\nx' = -x + x*y\ny' = -y\n")
LINEAR = load_system("vars: x, y\nx' = -x\ny' = -y\n")

SHAPE_2 = NetworkShape(2, (2,), (2,))
IDENTITY_NET = Lnn(SHAPE_2, [np.eye(2)], np.ones(2), MODE_ONES)
CFG = LearnerConfig(epsilon=0.01, slope_a=0.1)


def ball_samples(domain: DomainSpec, count: int, seed: int, dim: int = 2) -> SampleSet:
    rng = np.random.default_rng(seed)
    samples = SampleSet(domain)
    lo, hi = domain.bounding_box(dim)
    while len(samples) < count:
        p = rng.uniform(lo, hi)
        if np.linalg.norm(p) <= float(domain.gamma) and np.any(p != 0.0):
            samples.add(p)
    return samples


# -- leaky relu ---------------------------------------------------------------

def test_leaky_relu_cases():
    assert leaky_relu(3.0, 0.1) == 3.0
    assert leaky_relu(-2.0, 0.1) == 0.1 * -2.0
    assert leaky_relu(0.0, 0.1) == 0.0


def test_leaky_relu_monotone_and_below_identity():
    grid = np.linspace(-5, 5, 201)
    values = [leaky_relu(p, 0.3) for p in grid]
    assert all(b >= a for a, b in zip(values, values[1:]))
    for p, v in zip(grid, values):
        if p < 0:
            assert v == pytest.approx(0.3 * p)
            assert v <= p * 0.3 + 1e-15
    # Continuity across the kink.
    assert leaky_relu(-1e-12, 0.3) == pytest.approx(0.0, abs=1e-12)


# -- sample loss ----------------------------------------------------------------

def test_sample_loss_satisfied_point():
    # V = 2, Vdot = -2 at (1, 1); both margins land on the negative branch.
    expected_half = 0.1 * (-2.0 + 0.01)
    total, l1, l2 = sample_loss(IDENTITY_NET, PLANAR, (1.0, 1.0), CFG)
    assert l1 == expected_half
    assert l2 == expected_half
    assert total == expected_half + expected_half


def test_sample_loss_violating_point():
    # Vdot = 192 at (10, 2): the violation is penalized at full slope.
    total, l1, l2 = sample_loss(IDENTITY_NET, PLANAR, (10.0, 2.0), CFG)
    assert l1 == 192.0 + 0.01
    assert l2 == 0.1 * (-104.0 + 0.01)


def test_sample_loss_degenerate_net():
    net = Lnn(SHAPE_2, [np.zeros((2, 2))], np.ones(2), MODE_ONES)
    total, l1, l2 = sample_loss(net, PLANAR, (3.0, -1.0), CFG)
    assert l1 == 0.01
    assert l2 == 0.01
    assert total == 0.01 + 0.01


def test_sample_loss_requires_concrete_slope():
    with pytest.raises(ValueError, match="auto"):
        sample_loss(IDENTITY_NET, PLANAR, (1.0, 1.0), LearnerConfig(slope_a=AUTO))


# -- classification ---------------------------------------------------------------

def test_classify_splits_on_conditions():
    minus, plus = classify_samples(IDENTITY_NET, PLANAR, [(1.0, 1.0), (10.0, 2.0)])
    assert minus == [(1.0, 1.0)]
    assert plus == [(10.0, 2.0)]


def test_classify_zero_network_puts_everything_in_plus():
    net = Lnn(SHAPE_2, [np.zeros((2, 2))], np.ones(2), MODE_ONES)
    minus, plus = classify_samples(net, PLANAR, [(1.0, 1.0), (2.0, 0.5)])
    assert minus == []
    assert len(plus) == 2


def test_classify_empty():
    assert classify_samples(IDENTITY_NET, PLANAR, []) == ([], [])


# -- sample set --------------------------------------------------------------------

def test_sample_set_rejects_origin_and_outside_points():
    samples = SampleSet(DomainSpec(BALL, 1))
    samples.add((0.5, 0.5), INITIAL)
    with pytest.raises(ValueError):
        samples.add((0.0, 0.0))
    with pytest.raises(ValueError):
        samples.add((2.0, 0.0), COUNTEREXAMPLE)
    assert len(samples) == 1
    assert samples.provenance == [INITIAL]


def test_sample_set_orthant_check():
    samples = SampleSet(DomainSpec(ORTHANT_BALL, 1))
    with pytest.raises(ValueError):
        samples.add((-0.5, 0.5))


# -- slope selection ------------------------------------------------------------------

def test_auto_slope_matches_hand_computation():
    # Largest sample (60, 80): f = (-60 + 4800, -80), |f| ~ 4740.7,
    # -log10 ~ -3.68, rounding to the nearest power of ten gives 1e-4.
    samples = SampleSet(DomainSpec(BALL, 100))
    for p in [(60.0, 80.0), (1.0, 1.0), (-3.0, 2.0)]:
        samples.add(p)
    assert auto_slope(samples, PLANAR) == pytest.approx(1e-4)


def test_auto_slope_unit_magnitude():
    samples = SampleSet(DomainSpec(BALL, 2))
    samples.add((1.0, 0.0))
    assert auto_slope(samples, LINEAR) == 1.0


def test_auto_slope_zero_magnitude_falls_back_with_warning():
    degenerate = load_system("vars: x, y\nx' = x*y\ny' = x*y\n")
    samples = SampleSet(DomainSpec(BALL, 2))
    samples.add((1.0, 0.0))
    with pytest.warns(UserWarning):
        assert auto_slope(samples, degenerate) == 1.0


# -- loss gradients vs finite differences ----------------------------------------------

@pytest.mark.parametrize("mode", [MODE_FREE, MODE_ONES])
def test_loss_gradient_matches_finite_differences(mode):
    rng = np.random.default_rng(11)
    net = init_network(NetworkShape(2, (3,), (2,)), mode, seed=4)
    points = rng.uniform(-2, 2, size=(12, 2))
    eps, a = 0.01, 0.1
    cfg = LearnerConfig(epsilon=eps, slope_a=a)

    batch = loss_and_gradients(net, PLANAR, points, eps, a)
    # Stay clear of the Leaky ReLU kink so finite differences are valid.
    assert np.min(np.abs(batch.margins_vdot)) > 1e-8
    assert np.min(np.abs(batch.margins_v)) > 1e-8

    def mean_loss(_matrices):
        return float(
            np.mean([sample_loss(net, PLANAR, p, cfg)[0] for p in points])
        )

    fd_hidden = fd_weight_gradients(mean_loss, net.hidden_weights)
    for analytic, numeric in zip(batch.hidden_grads, fd_hidden):
        scale = np.maximum(np.abs(numeric), 1e-6)
        assert np.max(np.abs(analytic - numeric) / scale) < 1e-4
    if mode == MODE_FREE:
        fd_out = fd_weight_gradients(mean_loss, [net.out_raw])[0]
        scale = np.maximum(np.abs(fd_out), 1e-6)
        assert np.max(np.abs(batch.out_grad - fd_out) / scale) < 1e-4
    else:
        assert (batch.out_grad == 0).all()


def test_loss_gradient_positive_mode_chains_through_softplus():
    net = init_network(NetworkShape(2, (3,), (2,)), "positive", seed=8)
    points = np.random.default_rng(2).uniform(-2, 2, size=(8, 2))
    cfg = LearnerConfig(epsilon=0.01, slope_a=0.1)
    batch = loss_and_gradients(net, PLANAR, points, 0.01, 0.1)

    def mean_loss(_matrices):
        return float(np.mean([sample_loss(net, PLANAR, p, cfg)[0] for p in points]))

    fd_out = fd_weight_gradients(mean_loss, [net.out_raw])[0]
    scale = np.maximum(np.abs(fd_out), 1e-6)
    assert np.max(np.abs(batch.out_grad - fd_out) / scale) < 1e-4


# -- training ----------------------------------------------------------------------------

def test_train_single_point_converges():
    net = init_network(SHAPE_2, MODE_ONES, seed=0)
    samples = SampleSet(DomainSpec(BALL, 10))
    samples.add((1.0, 1.0))
    train(net, PLANAR, samples, LearnerConfig(slope_a=0.1, max_epochs=500))
    minus, plus = classify_samples(net, PLANAR, samples.points)
    assert plus == []


def test_train_planar_ball_converges_and_logs():
    net = init_network(SHAPE_2, MODE_ONES, seed=7)
    samples = ball_samples(DomainSpec(BALL, 10), 500, seed=1)
    records = []
    train(net, PLANAR, samples, LearnerConfig(slope_a=AUTO), log_sink=records.append)
    _, plus = classify_samples(net, PLANAR, samples.points)
    assert plus == []
    assert records  # one record per epoch
    assert {"epoch", "mean_loss", "violations"} <= set(records[0])
    assert records[-1]["violations"] == 0


def test_train_zero_epochs_leaves_net_unchanged():
    net = init_network(SHAPE_2, MODE_FREE, seed=3)
    before = [w.copy() for w in net.hidden_weights]
    samples = SampleSet(DomainSpec(BALL, 10))
    samples.add((1.0, 2.0))
    train(net, PLANAR, samples, LearnerConfig(slope_a=0.1, max_epochs=0))
    assert all((a == b).all() for a, b in zip(before, net.hidden_weights))


def test_train_empty_sample_set_rejected():
    net = init_network(SHAPE_2, MODE_ONES, seed=0)
    with pytest.raises(ValueError):
        train(net, PLANAR, SampleSet(DomainSpec(BALL, 10)), CFG)


def test_train_is_deterministic():
    def run():
        net = init_network(SHAPE_2, MODE_FREE, seed=21)
        samples = ball_samples(DomainSpec(BALL, 10), 100, seed=5)
        train(net, PLANAR, samples, LearnerConfig(slope_a=0.1, max_epochs=50))
        return [w.copy() for w in net.hidden_weights] + [net.out_raw.copy()]

    first, second = run(), run()
    for a, b in zip(first, second):
        assert (a == b).all()


def test_train_overflow_reports_epoch_and_sample():
    # Degree-4 two-layer net with huge weights overflows immediately.
    shape = NetworkShape(2, (2, 2), (4, 4))
    net = Lnn(shape, [np.full((2, 2), 1e80), np.full((2, 2), 1e80)], np.ones(2), MODE_ONES)
    samples = SampleSet(DomainSpec(BALL, 10))
    samples.add((5.0, 5.0))
    with pytest.raises(TrainingOverflowError) as err:
        train(net, PLANAR, samples, LearnerConfig(slope_a=0.1, max_epochs=3))
    assert err.value.epoch == 0
    assert err.value.point == (5.0, 5.0)
