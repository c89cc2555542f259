import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from singsep.exceptions import DataError, DependencyError, UsageError
from singsep.training import (
    EarlyStopping,
    StageReport,
    TrainConfig,
    autovc_loss,
    decoder_loss,
    encoder_distill_loss,
    f0_losses,
    run_training_stage,
)

from . import oracles
from .conftest import TINY_NET


def _toy(rng, shape):
    return rng.normal(size=shape)


def test_losses_match_brute_force_oracle():
    rng = np.random.default_rng(11)
    for _ in range(20):
        shape = (int(rng.integers(1, 5)), int(rng.integers(1, 9)))
        x, xh, c, ch = (_toy(rng, shape) for _ in range(4))
        lam = float(rng.uniform(0, 2))
        assert abs(float(decoder_loss(xh, x)) - oracles.mse(xh.tolist(), x.tolist())) <= 1e-6
        assert abs(float(encoder_distill_loss(ch, c)) - oracles.mae(ch.tolist(), c.tolist())) <= 1e-6
        got = float(autovc_loss(x, xh, c, ch, lam))
        assert abs(got - oracles.autovc(x.tolist(), xh.tolist(), c.tolist(), ch.tolist(), lam)) <= 1e-6


def test_autovc_loss_two_by_three_hand_values():
    x = np.array([[0.0, 1.0, 2.0], [3.0, 4.0, 5.0]])
    xh = x + np.array([[1.0, 0, 0], [0, 0, -2.0]])  # squared errors 1 and 4
    c = np.zeros((2, 3))
    ch = np.full((2, 3), 0.5)
    assert float(autovc_loss(x, xh, c, ch)) == pytest.approx(5 / 6 + 0.5, abs=1e-12)
    assert float(autovc_loss(x, xh, c, ch, lam=0.0)) == pytest.approx(5 / 6, abs=1e-12)


def test_constant_offset_identities():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(3, 8, 64))
    c = rng.normal(size=(3, 8, 64))
    assert float(decoder_loss(x + 2.0, x)) == pytest.approx(4.0, abs=1e-12)
    assert float(encoder_distill_loss(c + 0.3, c)) == pytest.approx(0.3, abs=1e-12)


def test_trivial_fixed_points_are_zero():
    x = np.ones((2, 4))
    assert float(decoder_loss(x, x)) == 0.0
    assert float(encoder_distill_loss(x, x)) == 0.0
    assert float(autovc_loss(x, x, x, x)) == 0.0


@pytest.mark.parametrize("fn", [decoder_loss, encoder_distill_loss])
def test_shape_mismatch_raises(fn):
    with pytest.raises(DataError):
        fn(np.zeros((2, 3)), np.zeros((3, 2)))


def test_autovc_shape_mismatch_raises():
    with pytest.raises(DataError):
        autovc_loss(np.zeros((2, 3)), np.zeros((2, 3)), np.zeros((1, 4)), np.zeros((1, 3)))


finite = st.floats(-1e3, 1e3, allow_nan=False)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (3, 4), elements=finite), arrays(np.float64, (3, 4), elements=finite))
def test_losses_non_negative_and_symmetric(a, b):
    for fn in (decoder_loss, encoder_distill_loss):
        v = float(fn(a, b))
        assert v >= 0.0
        assert v == pytest.approx(float(fn(b, a)))


def _grad_check(loss_fn, seed=0, eps=1e-6):
    """Relative errors between autograd and central differences, one per parameter element."""
    torch.manual_seed(seed)
    net = torch.nn.Sequential(torch.nn.Linear(5, 7), torch.nn.Tanh(), torch.nn.Linear(7, 4)).double()
    enc = torch.nn.Linear(4, 3).double()
    x = torch.randn(6, 5, dtype=torch.float64)
    target = torch.randn(6, 4, dtype=torch.float64)
    codes = torch.randn(6, 3, dtype=torch.float64)
    params = list(net.parameters()) + list(enc.parameters())

    def total():
        out = net(x)
        return loss_fn(out, target, enc(out), codes)

    grads = torch.autograd.grad(total(), params, allow_unused=True)
    errors = []
    with torch.no_grad():
        for p, g in zip(params, grads):
            g = torch.zeros_like(p) if g is None else g
            flat, gflat = p.view(-1), g.reshape(-1)
            for i in range(flat.numel()):
                old = flat[i].item()
                flat[i] = old + eps
                up = total().item()
                flat[i] = old - eps
                down = total().item()
                flat[i] = old
                numeric = (up - down) / (2 * eps)
                analytic = gflat[i].item()
                scale = max(abs(numeric), abs(analytic))
                errors.append(0.0 if scale < 1e-10 else abs(numeric - analytic) / scale)
    return np.array(errors)


LOSS_CASES = {
    "decoder_loss": lambda out, target, c_hat, codes: decoder_loss(out, target),
    "encoder_distill_loss": lambda out, target, c_hat, codes: encoder_distill_loss(c_hat, codes),
    "autovc_loss": lambda out, target, c_hat, codes: autovc_loss(target, out, codes, c_hat, 1.0),
}


@pytest.mark.parametrize("name", sorted(LOSS_CASES))
def test_gradients_match_finite_differences(name):
    errors = _grad_check(LOSS_CASES[name])
    assert np.mean(errors <= 1e-4) >= 0.95, f"{name}: max rel error {errors.max():.2e}"


def test_f0_losses_zero_voicing_mask_and_shapes():
    value = torch.full((2, 5), 0.5)
    logits = torch.zeros(2, 5, 4)
    cont, disc = f0_losses(value, torch.zeros(2, 5), logits, torch.full((2, 5), 0.5),
                           torch.zeros(2, 5, dtype=torch.bool), torch.zeros(2, 5, dtype=torch.long))
    # no voiced frames: only the voicing BCE at logit 0 remains
    assert float(cont) == pytest.approx(np.log(2.0), abs=1e-6)
    assert float(disc) == pytest.approx(np.log(4.0), abs=1e-6)


def test_early_stopping_definition():
    for k in range(0, 4):
        for patience in (1, 2, 5):
            stopper = EarlyStopping(patience)
            values = [10.0 - i for i in range(k + 1)] + [100.0] * (patience + 3)
            stopped_at = None
            for check, v in enumerate(values):
                stopper.update(v)
                if stopper.should_stop:
                    stopped_at = check
                    break
            assert stopped_at == k + patience


def test_train_config_invariants():
    with pytest.raises(UsageError):
        TrainConfig(lambda_content=-1)
    with pytest.raises(UsageError):
        TrainConfig(batch_size=0)
    with pytest.raises(UsageError):
        TrainConfig(patience=0)
    assert TrainConfig().lambda_content == 1.0
    assert TrainConfig().batch_size == 30
    assert TrainConfig().excerpt_frames == 128


@pytest.mark.parametrize("stage,need", [("student_encoder", "teacher"), ("sdn", "student_encoder"),
                                        ("sin", "student_encoder")])
def test_missing_dependency_names_the_stage(stage, need, tiny_data):
    with pytest.raises(DependencyError, match=need):
        run_training_stage(stage, tiny_data, TINY_NET, TrainConfig(max_steps=1), {}, n_singers=2)


def test_unknown_stage_rejected(tiny_data):
    with pytest.raises(UsageError):
        run_training_stage("vocoder", tiny_data, TINY_NET, TrainConfig(max_steps=1))


def _state(net):
    return {k: v.clone() for k, v in net.state_dict().items()}


def test_dependencies_stay_frozen(tiny_data, tiny_checkpoints):
    cfg = TrainConfig(batch_size=4, max_steps=3, val_every=1, learning_rate=1e-2)
    teacher = tiny_checkpoints.checkpoints["teacher"]
    before = {k: v.clone() for k, v in teacher.weights["teacher"].items()}
    student, _ = run_training_stage("student_encoder", tiny_data, TINY_NET, cfg, {"teacher": teacher}, 2)
    for k, v in teacher.weights["teacher"].items():
        assert torch.equal(v, before[k])
    s_before = {k: v.clone() for k, v in student.weights["student_encoder"].items()}
    for stage in ("sdn", "sin"):
        run_training_stage(stage, tiny_data, TINY_NET, cfg, {"student_encoder": student}, 2)
    for k, v in student.weights["student_encoder"].items():
        assert torch.equal(v, s_before[k])


def test_same_seed_same_curves(tiny_data):
    cfg = TrainConfig(batch_size=4, max_steps=3, val_every=1, learning_rate=1e-3, seed=5)
    _, a = run_training_stage("teacher", tiny_data, TINY_NET, cfg, n_singers=2)
    _, b = run_training_stage("teacher", tiny_data, TINY_NET, cfg, n_singers=2)
    assert a.train_losses == b.train_losses
    assert a.val_checks == b.val_checks


def test_report_best_is_min_of_checks(tiny_data):
    cfg = TrainConfig(batch_size=4, max_steps=4, val_every=1, learning_rate=1e-3)
    ckpt, report = run_training_stage("f0", tiny_data, TINY_NET, cfg, n_singers=2)
    assert report.best_val == min(v for _, v in report.val_checks)
    assert report.stop_reason in ("early", "max_steps")
    assert ckpt.extra["best_step"] == report.best_step
    lines = report.to_jsonl().splitlines()
    assert len(lines) == len(report.train_losses) + len(report.val_checks) + 1


def test_stage_report_initial_val():
    r = StageReport("teacher", val_checks=[(0, 3.0), (10, 1.0)], best_val=1.0)
    assert r.initial_val == 3.0 and r.final_val == 1.0
