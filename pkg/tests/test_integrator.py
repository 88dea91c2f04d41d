import numpy as np
import pytest

from pylats.integrator import (CurriculumSchedule, RolloutLossConfig, EncodedSample, TimeIntegratorModel,
                               cl_probability, fuse_spatial, predict_next, step_all, encode_dataset, window_loss,
                               train_windows, train_ti)
from pylats.autoencoder import AutoencoderModel
from pylats.decomp import compute_stats
from pylats.optim import grad_check
from pylats.shared import ShapeError


def _zero(seq):
    for layer in seq.layers:
        if layer.spec.kind == 'dense':
            layer.W.value = np.zeros_like(layer.W.value)
            layer.b.value = np.zeros_like(layer.b.value)


def _sample(rng, lattice=(2, 2), n_t=8, l=2, cond=0):
    n = int(np.prod(lattice))
    return EncodedSample(lattice, rng.standard_normal((n_t, n, l)),
                         rng.standard_normal((n_t, n, cond)) if cond else None)


# curriculum

def test_cl_schedule():
    s = CurriculumSchedule(warmup=10, eps_min=0.0, epochs=110)
    assert cl_probability(s, 0) == 1.0
    assert cl_probability(s, 9) == 1.0
    assert cl_probability(s, 60) == 0.5
    assert cl_probability(s, 110) == 0.0
    assert cl_probability(CurriculumSchedule(10, 0.2, 110), 110) == pytest.approx(0.2)


def test_pure_teacher_forcing_schedule():
    s = CurriculumSchedule(warmup=0, eps_min=1.0, epochs=5)
    assert all(cl_probability(s, e) == 1.0 for e in range(6))


def test_schedule_validation():
    with pytest.raises(ValueError):
        CurriculumSchedule(eps_min=1.5)
    with pytest.raises(ValueError):
        RolloutLossConfig(K=0)


# fusion and stepping

def test_fusion_width():
    model = TimeIntegratorModel(2, [('u', 16)])
    assert model.fusion_width == 80
    assert model.spatial.in_shape == (80,)


def test_zero_spatial_gives_bias(rng):
    model = TimeIntegratorModel(2, [('u', 3)], d_gamma=4, hidden=(5,))
    _zero(model.spatial)
    model.spatial.layers[-1].b.value = np.arange(4.)
    g = fuse_spatial(model, rng.standard_normal((7, 5, 3)))
    np.testing.assert_array_equal(g, np.tile(np.arange(4.), (7, 1)))


def test_neighbor_order_matters(rng):
    model = TimeIntegratorModel(2, [('u', 3)], d_gamma=4, hidden=(8,), activation='tanh', seed=2)
    x = rng.standard_normal((5, 3))
    swapped = x.copy()
    swapped[[1, 2]] = x[[2, 1]]
    assert not np.allclose(fuse_spatial(model, x), fuse_spatial(model, swapped))


def test_fusion_shape_error(rng):
    model = TimeIntegratorModel(2, [('u', 16)])
    with pytest.raises(ShapeError, match='80'):
        fuse_spatial(model, rng.standard_normal((4, 16)))


def test_zero_temporal_gives_zero(rng):
    model = TimeIntegratorModel(2, [('u', 3)], th=5, d_gamma=4, hidden=(6,))
    _zero(model.temporal)
    out = predict_next(model, rng.standard_normal((2, 5, 4)))
    np.testing.assert_array_equal(out, 0.)
    with pytest.raises(ShapeError):
        predict_next(model, rng.standard_normal((4, 4)))


@pytest.mark.parametrize('th', [5, 10, 20])
def test_history_lengths(rng, th):
    model = TimeIntegratorModel(2, [('u', 2)], th=th, d_gamma=3, hidden=(4,))
    assert predict_next(model, rng.standard_normal((th, 3))).shape == (2,)


def test_step_all_order_invariance(rng):
    model = TimeIntegratorModel(2, [('u', 3), ('v', 2)], [('q', 2)], th=3, d_gamma=6, hidden=(8, 8),
                                activation='tanh', seed=4)
    history = rng.standard_normal((3, 16, 7))
    a = step_all(model, history, (4, 4), order=range(16))
    b = step_all(model, history, (4, 4), order=rng.permutation(16))
    np.testing.assert_array_equal(a, b)
    assert a.shape == (16, 5)


def test_step_all_locality(rng):
    model = TimeIntegratorModel(2, [('u', 3)], [('q', 1)], th=2, d_gamma=4, hidden=(6,), activation='tanh',
                                seed=2)
    history = rng.standard_normal((2, 25, 4))
    moved = history.copy()
    moved[:, 24] += 5.
    a = step_all(model, history, (5, 5))
    b = step_all(model, moved, (5, 5))
    # (4, 4) only reaches itself, (3, 4) and (4, 3)
    outside = [i for i in range(25) if i not in (24, 19, 23)]
    np.testing.assert_array_equal(a[outside], b[outside])
    assert not np.array_equal(a[24], b[24])


def test_step_all_lattice_count(rng):
    model = TimeIntegratorModel(2, [('u', 2)], th=2, d_gamma=3, hidden=(4,))
    out = step_all(model, rng.standard_normal((2, 256, 2)), (16, 16))
    assert out.shape == (256, 2)


def test_single_subdomain_reduces_to_center(rng):
    model = TimeIntegratorModel(2, [('u', 3)], th=2, d_gamma=4, hidden=(5,), activation='tanh', seed=1)
    history = rng.standard_normal((2, 1, 3))
    inputs = np.zeros((2, 5, 3))
    inputs[:, 0] = history[:, 0]
    want = predict_next(model, fuse_spatial(model, inputs))
    np.testing.assert_allclose(step_all(model, history, (1, 1))[0], want, rtol=1e-12)


def test_residual_adds_last_frame(rng):
    model = TimeIntegratorModel(2, [('u', 3)], [('q', 1)], th=2, d_gamma=4, hidden=(5,), residual=True)
    _zero(model.temporal)
    history = rng.standard_normal((2, 4, 4))
    np.testing.assert_array_equal(step_all(model, history, (2, 2)), history[-1][:, :3])


# multi-step loss and training

@pytest.mark.parametrize('coin', [True, False])
def test_unrolled_loss_gradients(rng, coin):
    model = TimeIntegratorModel(2, [('u', 2)], th=2, d_gamma=3, hidden=(4,), activation='tanh', seed=0)
    sample = _sample(rng, (2, 2), n_t=5, l=2)
    coins = np.array([[coin]])
    f = lambda _: window_loss(model, [(sample, 0)], coins, 2)
    assert grad_check(model.params(), f, None, n_samples=200) < 1e-4


def test_unrolled_loss_with_conditions_gradients(rng):
    model = TimeIntegratorModel(2, [('u', 2)], [('q', 1)], th=2, d_gamma=3, hidden=(4,), activation='tanh',
                                residual=True, seed=0)
    sample = _sample(rng, (2, 2), n_t=6, l=2, cond=1)
    coins = np.array([[False, True], [True, False]])
    f = lambda _: window_loss(model, [(sample, 0), (sample, 1)], coins, 3)
    assert grad_check(model.params(), f, None, n_samples=100) < 1e-4


def test_teacher_forced_loss_ignores_prediction(rng):
    # with every coin on ground truth, step k only depends on ground truth inputs
    model = TimeIntegratorModel(2, [('u', 2)], th=2, d_gamma=3, hidden=(4,), seed=0)
    sample = _sample(rng, (2, 2), n_t=6)
    full = window_loss(model, [(sample, 0)], np.ones((2, 1), bool), 3).value[0]
    parts = sum(window_loss(model, [(sample, k)], np.ones((0, 1), bool), 1).value[0] for k in range(3))
    assert full == pytest.approx(parts, rel=1e-12)


def test_coin_is_shared_by_all_subdomains_of_a_window(rng):
    model = TimeIntegratorModel(2, [('u', 2)], th=2, d_gamma=3, hidden=(4,), activation='tanh', seed=3)
    sample = _sample(rng, (2, 2), n_t=8)
    u = sample.solution

    def unrolled(start, teacher):
        p1 = step_all(model, u[start:start + 2], (2, 2))
        nxt = u[start + 2] if teacher else p1
        p2 = step_all(model, np.stack([u[start + 1], nxt]), (2, 2))
        return [np.mean((p1 - u[start + 2]) ** 2), np.mean((p2 - u[start + 3]) ** 2)]

    # window 0 is fed ground truth, window 1 its own prediction on every subdomain
    got = window_loss(model, [(sample, 0), (sample, 3)], np.array([[True, False]]), 2).value[0]
    want = sum((a + b) / 2 for a, b in zip(unrolled(0, True), unrolled(3, False)))
    assert got == pytest.approx(want, rel=1e-10)


def test_train_windows():
    rng = np.random.default_rng(0)
    samples = [_sample(rng, n_t=12), _sample(rng, n_t=12)]
    windows, k = train_windows(samples, th=3, K=4)
    assert k == 4
    assert len(windows) == 2 * (12 - 3 - 4 + 1)
    windows, k = train_windows(samples, th=3, K=4, train_window=5)
    assert k == 2
    assert windows == [(0, 0), (1, 0)]
    with pytest.raises(ValueError):
        train_windows(samples, th=3, K=4, train_window=3)


def _train(seed, log):
    rng = np.random.default_rng(0)
    samples = [_sample(rng, n_t=10), _sample(rng, n_t=10)]
    model = TimeIntegratorModel(2, [('u', 2)], th=2, d_gamma=4, hidden=(6,), seed=1)
    model, curve, _ = train_ti(model, samples, CurriculumSchedule(1, 0.0, 4), RolloutLossConfig(K=3), lr=1e-2,
                               seed=seed, window_stride=2, batch_windows=2, coin_log=log)
    return model, curve


def test_training_replay_bit_exact():
    log_a, log_b = [], []
    a, curve_a = _train(5, log_a)
    b, curve_b = _train(5, log_b)
    assert len(log_a) == len(log_b) > 0
    for x, y in zip(log_a, log_b):
        np.testing.assert_array_equal(x, y)
    for pa, pb in zip(a.params(), b.params()):
        np.testing.assert_array_equal(pa.value, pb.value)
    assert list(curve_a.epoch) == [0, 1, 2, 3]
    np.testing.assert_allclose(curve_a.eps, [1.0, 1.0, 2 / 3, 1 / 3])
    # warmup epochs are all teacher forced
    assert all(c.all() for c in log_a[:curve_a.updates.iloc[0]])


def test_training_seed_changes_coins():
    log_a, log_b = [], []
    _train(5, log_a)
    _train(6, log_b)
    assert any(not np.array_equal(x, y) for x, y in zip(log_a, log_b))


def test_training_reduces_loss():
    rng = np.random.default_rng(3)
    base = rng.standard_normal((1, 4, 2))
    sample = EncodedSample((2, 2), np.repeat(base, 12, axis=0))
    model = TimeIntegratorModel(2, [('u', 2)], th=2, d_gamma=4, hidden=(8,), residual=True, seed=0)
    model, curve, _ = train_ti(model, [sample], CurriculumSchedule(2, 0.0, 30), RolloutLossConfig(K=2), lr=1e-2)
    assert curve.loss.iloc[-1] < curve.loss.iloc[0]


def test_resume_continues_epochs():
    rng = np.random.default_rng(0)
    samples = [_sample(rng, n_t=8)]
    model = TimeIntegratorModel(2, [('u', 2)], th=2, d_gamma=3, hidden=(4,))
    schedule = CurriculumSchedule(0, 0.0, 2)
    model, first, opt = train_ti(model, samples, schedule, RolloutLossConfig(K=2))
    more = CurriculumSchedule(0, 0.0, 4)
    model, second, opt2 = train_ti(model, samples, more, RolloutLossConfig(K=2), start_epoch=2, optimizer=opt)
    assert list(first.epoch) == [0, 1]
    assert list(second.epoch) == [2, 3]
    assert opt2 is opt


def test_width_mismatch_rejected():
    rng = np.random.default_rng(0)
    model = TimeIntegratorModel(2, [('u', 3)], th=2)
    with pytest.raises(ShapeError):
        train_ti(model, [_sample(rng, l=2)], CurriculumSchedule(0, 0.0, 1))


def test_decoded_space_loss(dr_sample):
    aes = {}
    for name in ('u', 'v'):
        values = dr_sample.series[name].values
        aes[name] = AutoencoderModel(name, p=8, latent=3, channels=(2,), stats=compute_stats(values, name), seed=0)
    model = TimeIntegratorModel(2, [('u', 3), ('v', 3)], th=2, d_gamma=4, hidden=(6,), seed=0)
    sample = encode_dataset(aes, dr_sample, model, with_patches=True)
    assert sample.solution.shape == (12, 4, 6)
    assert sample.patches['u'].shape == (12, 4, 8, 8)
    before = [p.value.copy() for p in aes['u'].params()]
    model, curve, _ = train_ti(model, [sample], CurriculumSchedule(0, 0.5, 1), RolloutLossConfig(K=2, space='decoded'),
                               window_stride=4, autoencoders=aes)
    assert np.isfinite(curve.loss).all()
    for p, b in zip(aes['u'].params(), before):
        np.testing.assert_array_equal(p.value, b)
