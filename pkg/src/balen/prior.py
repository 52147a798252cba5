"""Class-prior estimation for auxiliary OOD data.

The prior is obtained by counting which class a pretrained model assigns to
each auxiliary sample, then normalizing. Its gamma-generalized form raises
the prior elementwise to a power and L1-normalizes; gamma=0 gives the
uniform prior, negative gamma inverts majority and minority classes.
"""

from dataclasses import dataclass

import numpy as np

from . import jsonio
from .errors import EmptyInput, InvalidArgument, SingularPrior


@dataclass(frozen=True)
class OodPrior:
    """Estimated OOD class distribution and its gamma-generalized form."""

    p: np.ndarray
    gamma: float
    epsilon: float
    p_gamma: np.ndarray

    @property
    def K(self):
        return self.p.shape[0]


def count_predictions(model, ood_samples, batch_size=4096):
    """Count argmax predictions of `model` over a stream of feature vectors.

    Ties break toward the lowest class index. Returns an int64 vector of
    length K whose sum equals the number of samples.
    """
    from .mlp import forward

    if hasattr(ood_samples, "features"):
        ood_samples = ood_samples.features
    x = np.asarray(ood_samples, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[0] == 0:
        raise EmptyInput("no OOD samples to count")
    if x.shape[1] != model.feature_dim:
        raise InvalidArgument(
            f"samples have dim {x.shape[1]}, model expects {model.feature_dim}")
    counts = np.zeros(model.class_count, dtype=np.int64)
    for start in range(0, x.shape[0], batch_size):
        logits = forward(model, x[start:start + batch_size])
        pred = np.argmax(logits, axis=1)
        counts += np.bincount(pred, minlength=model.class_count)
    return counts


def estimate_prior(counts):
    """Normalize per-class counts N_i into the prior P(y=i|o)."""
    c = np.asarray(counts)
    if c.ndim != 1 or c.size == 0:
        raise InvalidArgument(f"counts must be a nonempty vector, got shape {c.shape}")
    if np.any(c < 0):
        raise InvalidArgument("counts must be nonnegative")
    total = int(c.sum())
    if total < 1:
        raise EmptyInput("all class counts are zero")
    return c.astype(np.float64) / total


def generalize_prior(p, gamma, epsilon=0.0):
    """Build the gamma-generalized prior P_gamma = L1norm((p + eps)^gamma).

    Powers are taken in log space so exponents far beyond the practical
    range stay finite. A negative gamma with a zero entry and no smoothing
    is a genuine singularity and raises instead of clamping.
    """
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size < 2:
        raise InvalidArgument(f"prior must be a vector of length >= 2, got shape {p.shape}")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise InvalidArgument("prior entries must be finite and nonnegative")
    if abs(p.sum() - 1.0) > 1e-9:
        raise InvalidArgument(f"prior must sum to 1, got {p.sum()!r}")
    gamma = float(gamma)
    epsilon = float(epsilon)
    if epsilon < 0:
        raise InvalidArgument("epsilon must be nonnegative")

    k = p.size
    if gamma == 0.0:
        p_gamma = np.full(k, 1.0 / k)
    else:
        q = p + epsilon
        zero = q == 0.0
        if np.any(zero) and gamma < 0:
            raise SingularPrior(
                "negative gamma with zero-mass classes; supply epsilon > 0")
        p_gamma = np.zeros(k)
        logq = np.log(q[~zero]) * gamma
        w = np.exp(logq - logq.max())
        p_gamma[~zero] = w / w.sum()
    return OodPrior(p=p, gamma=gamma, epsilon=epsilon, p_gamma=p_gamma)


def z_gamma(posterior, prior):
    """Prior-weighted posterior sum: how majority-class-like a sample looks."""
    post = np.asarray(posterior, dtype=np.float64)
    if post.shape != prior.p_gamma.shape:
        raise InvalidArgument(
            f"posterior has shape {post.shape}, prior expects {prior.p_gamma.shape}")
    if prior.gamma == 0.0:
        # uniform generalized prior: Z collapses to the constant 1/K
        return 1.0 / prior.K
    return float(post @ prior.p_gamma)


def z_gamma_batch(posteriors, prior):
    post = np.asarray(posteriors, dtype=np.float64)
    if post.ndim != 2 or post.shape[1] != prior.K:
        raise InvalidArgument(
            f"posterior batch has shape {post.shape}, prior expects K={prior.K}")
    if prior.gamma == 0.0:
        return np.full(post.shape[0], 1.0 / prior.K)
    return post @ prior.p_gamma


def save_prior(path, counts, prior):
    """Write the prior document: counts, p, gamma, epsilon, p_gamma."""
    counts = np.asarray(counts)
    if counts.shape != prior.p.shape:
        raise InvalidArgument("counts length does not match prior K")
    doc = {
        "K": int(prior.K),
        "counts": [int(c) for c in counts],
        "p": [float(v) for v in prior.p],
        "gamma": float(prior.gamma),
        "epsilon": float(prior.epsilon),
        "p_gamma": [float(v) for v in prior.p_gamma],
    }
    jsonio.dump(doc, path)


def load_prior(path):
    """Read a prior document back as (counts, OodPrior)."""
    doc = jsonio.load(path)
    counts = np.asarray(doc["counts"], dtype=np.int64)
    prior = OodPrior(
        p=np.asarray(doc["p"], dtype=np.float64),
        gamma=float(doc["gamma"]),
        epsilon=float(doc["epsilon"]),
        p_gamma=np.asarray(doc["p_gamma"], dtype=np.float64),
    )
    if counts.shape[0] != doc["K"] or prior.p.shape[0] != doc["K"]:
        raise InvalidArgument(f"prior file {path} is inconsistent with K={doc['K']}")
    return counts, prior
