"""Training objectives. All reduce by the mean over every element."""

import torch
import torch.nn.functional as F

from ..exceptions import DataError


def _check(a, b, what):
    if a.shape != b.shape:
        raise DataError(f"{what}: shape mismatch {tuple(a.shape)} vs {tuple(b.shape)}")


def _t(x):
    return x if isinstance(x, torch.Tensor) else torch.as_tensor(x, dtype=torch.float64)


def decoder_loss(x_hat, x):
    """Mean squared error between predicted and target features."""
    x_hat, x = _t(x_hat), _t(x)
    _check(x_hat, x, "decoder_loss")
    return F.mse_loss(x_hat, x)


def encoder_distill_loss(c_spec, c_avc):
    """Mean absolute error between student and teacher content codes."""
    c_spec, c_avc = _t(c_spec), _t(c_avc)
    _check(c_spec, c_avc, "encoder_distill_loss")
    return F.l1_loss(c_spec, c_avc)


def autovc_loss(x, x_hat, c, c_hat, lam=1.0):
    """Reconstruction MSE plus ``lam`` times the content-consistency L1.

    ``c_hat`` is the teacher encoder re-applied to ``x_hat``.
    """
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    x, x_hat, c, c_hat = _t(x), _t(x_hat), _t(c), _t(c_hat)
    _check(x_hat, x, "autovc_loss reconstruction")
    _check(c_hat, c, "autovc_loss content")
    return F.mse_loss(x_hat, x) + lam * F.l1_loss(c_hat, c)


def f0_losses(value, voicing_logit, class_logits, target_value, target_voiced, target_class, value_scale=1.0):
    """Return ``(continuous, discrete)`` F0 losses.

    Continuous: MSE of the normalized value on voiced frames plus voicing BCE.
    ``value_scale`` multiplies the value error before squaring; the training
    stage passes the range width in semitones so a one-semitone miss costs 1.
    Discrete: per-frame cross-entropy over ``n_bins + 1`` classes.
    """
    voiced = target_voiced.float()
    n_voiced = voiced.sum().clamp_min(1.0)
    reg = ((((value - target_value) * value_scale) ** 2) * voiced).sum() / n_voiced
    bce = F.binary_cross_entropy_with_logits(voicing_logit, voiced)
    ce = F.cross_entropy(class_logits.reshape(-1, class_logits.shape[-1]), target_class.reshape(-1))
    return reg + bce, ce
