"""Regularization losses over ID/OOD logit batches and their gradients.

Three variants share one total objective:

  OE             cross-entropy + lam * mean CE(uniform, softmax(logits_out))
  EnergyOE       cross-entropy + lam * (in-hinge + out-hinge)
  BalancedEnergy cross-entropy + lam * (in-hinge + balanced out term)

The hinges are squared, one-sided penalties on the energy: an ID sample
pays (max(0, E - m_in))^2 and an OOD sample (max(0, E - m_out))^2. The
balanced out term shifts the OOD threshold by alpha * Z per sample and
multiplies the hinge by Z, where Z is the prior-weighted posterior; samples
resembling majority OOD classes therefore carry the larger regularization.

Every loss returns (value, grad) with grad taken w.r.t. the logits batch,
batch-mean included, so gradients compose by plain addition.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .core_math import _as_batch, _check_temperature, logsumexp_rows, softmax_rows
from .errors import InvalidArgument
from .prior import OodPrior

VARIANTS = ("OE", "EnergyOE", "BalancedEnergy")


@dataclass
class LossConfig:
    """Hyperparameters of the total objective.

    detach_z keeps Z out of the gradient path (the weight/margin are then
    literal per-sample constants); z_source picks whether Z is computed from
    the live model's logits or a frozen pretrained model's.
    """

    variant: str = "BalancedEnergy"
    T: float = 1.0
    lam: float = 0.1
    alpha: float = 0.0
    gamma: float = 0.0
    m_in: float = None
    m_out: float = None
    detach_z: bool = True
    margin_on: bool = True
    weight_on: bool = True
    z_source: str = "live"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise InvalidArgument(f"unknown loss variant {self.variant!r}")
        if self.lam < 0:
            raise InvalidArgument("lam must be nonnegative")
        if not np.isfinite(self.alpha):
            raise InvalidArgument(f"alpha must be finite, got {self.alpha}")
        if self.z_source not in ("live", "pretrained"):
            raise InvalidArgument(f"unknown z_source {self.z_source!r}")
        _check_temperature(self.T)
        if self.variant != "OE":
            if self.m_in is None or self.m_out is None:
                raise InvalidArgument(f"variant {self.variant} requires m_in and m_out")
            if not self.m_in < self.m_out:
                warnings.warn(
                    f"m_in={self.m_in} is not below m_out={self.m_out}; "
                    "the hinges will fight over the overlap", stacklevel=3)


@dataclass
class BatchLoss:
    """Total objective value with per-logit gradients and a term breakdown."""

    value: float
    grad_logits_in: np.ndarray
    grad_logits_out: np.ndarray
    terms: dict = field(default_factory=dict)


def oe_regularizer(logits_out):
    """Mean cross-entropy between the uniform label and softmax(logits)."""
    x = _as_batch(logits_out)
    n, k = x.shape
    value = float(np.mean(logsumexp_rows(x, 1.0) - x.mean(axis=1)))
    grad = (softmax_rows(x) - 1.0 / k) / n
    return value, grad


def _energy_and_grad(x, T):
    """Per-sample energies and dE/dlogits rows (no batch mean)."""
    e = -logsumexp_rows(x, T)
    dedl = -softmax_rows(x / T)
    return e, dedl


def _hinge_sq(logits, T, margin):
    x = _as_batch(logits)
    T = _check_temperature(T)
    e, dedl = _energy_and_grad(x, T)
    h = np.maximum(0.0, e - margin)
    value = float(np.mean(h * h))
    grad = (2.0 * h)[:, None] * dedl / x.shape[0]
    return value, grad


def hinge_sq_in(logits_in, T, m_in):
    """Mean squared hinge on ID energies above m_in."""
    return _hinge_sq(logits_in, T, float(m_in))


def hinge_sq_out(logits_out, T, m_out):
    """Mean squared hinge on OOD energies above m_out."""
    return _hinge_sq(logits_out, T, float(m_out))


def balanced_out_loss(logits_out, prior, cfg, z_logits=None):
    """Adaptive-margin, adaptive-weight OOD hinge: mean (max(0, E-m-a*Z))^2 * Z.

    Z is computed from softmax(z_logits) when given (frozen-posterior mode,
    never differentiated), otherwise from the batch's own logits.
    """
    if cfg.variant != "BalancedEnergy":
        raise InvalidArgument(f"balanced_out_loss requires BalancedEnergy, got {cfg.variant}")
    if not isinstance(prior, OodPrior):
        raise InvalidArgument("prior must be an OodPrior")
    if prior.gamma != cfg.gamma:
        raise InvalidArgument(
            f"prior gamma {prior.gamma} does not match config gamma {cfg.gamma}")
    x = _as_batch(logits_out)
    n, k = x.shape
    if k != prior.K:
        raise InvalidArgument(f"logits have K={k}, prior has K={prior.K}")

    if z_logits is not None:
        zx = _as_batch(z_logits)
        if zx.shape != x.shape:
            raise InvalidArgument("z_logits shape does not match logits_out")
        posts = softmax_rows(zx)
        z_is_live = False
    else:
        posts = softmax_rows(x)
        z_is_live = True

    z = posts @ prior.p_gamma
    e, dedl = _energy_and_grad(x, cfg.T)
    alpha_eff = cfg.alpha if cfg.margin_on else 0.0
    w = z if cfg.weight_on else np.ones(n)
    h = np.maximum(0.0, e - cfg.m_out - alpha_eff * z)
    value = float(np.mean(h * h * w))

    grad = (2.0 * h * w)[:, None] * dedl
    if z_is_live and not cfg.detach_z:
        # dZ/dl_j = F_j * (p_gamma_j - Z) with F the temperature-1 softmax
        dzdl = posts * (prior.p_gamma[None, :] - z[:, None])
        if cfg.margin_on:
            grad -= (2.0 * h * w * alpha_eff)[:, None] * dzdl
        if cfg.weight_on:
            grad += (h * h)[:, None] * dzdl
    grad /= n
    return value, grad


def cross_entropy_loss(logits_in, labels):
    """Mean softmax cross-entropy and its gradient (softmax - onehot)/N."""
    x = _as_batch(logits_in)
    n, k = x.shape
    labels = np.asarray(labels)
    if labels.shape != (n,):
        raise InvalidArgument(f"labels shape {labels.shape} does not match batch size {n}")
    if labels.min() < 0 or labels.max() >= k:
        raise InvalidArgument("label out of range")
    value = float(np.mean(logsumexp_rows(x, 1.0) - x[np.arange(n), labels]))
    grad = softmax_rows(x)
    grad[np.arange(n), labels] -= 1.0
    return value, grad / n


def total_objective(logits_in, labels, logits_out, prior, cfg, z_logits_out=None):
    """Cross-entropy plus lam times the variant's regularizer, with gradients."""
    ce, grad_in = cross_entropy_loss(logits_in, labels)

    if cfg.variant == "OE":
        l_in = 0.0
        l_out, grad_out = oe_regularizer(logits_out)
        grad_in_reg = 0.0
    elif cfg.variant == "EnergyOE":
        l_in, grad_in_reg = hinge_sq_in(logits_in, cfg.T, cfg.m_in)
        l_out, grad_out = hinge_sq_out(logits_out, cfg.T, cfg.m_out)
    else:
        l_in, grad_in_reg = hinge_sq_in(logits_in, cfg.T, cfg.m_in)
        l_out, grad_out = balanced_out_loss(logits_out, prior, cfg, z_logits=z_logits_out)

    value = ce + cfg.lam * (l_in + l_out)
    grad_logits_in = grad_in + cfg.lam * grad_in_reg
    grad_logits_out = cfg.lam * grad_out
    return BatchLoss(
        value=value,
        grad_logits_in=grad_logits_in,
        grad_logits_out=grad_logits_out,
        terms={"ce": ce, "l_in_hinge": l_in, "l_out": l_out},
    )


def alpha_from_beta(beta, K, m_in, m_out):
    """Margin scale from the relative offset beta: alpha = beta * K * (m_out - m_in)."""
    K = int(K)
    if K < 2:
        raise InvalidArgument(f"K must be at least 2, got {K}")
    return float(beta) * K * (float(m_out) - float(m_in))
