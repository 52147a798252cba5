"""Experiment configuration: defaults, validation, and content hashing.

A config is a nested JSON document. resolve_config() deep-merges the user
document over the defaults, rejects unknown keys, and enforces the two
either-or rules: alpha is given directly or derived from beta, and margins
are given explicitly or derived from energy percentiles. Every artifact
embeds the resolved document, and run directories are named by its hash.
"""

import copy
import hashlib

from .errors import ConfigError
from .jsonio import dumps, load

DEFAULTS = {
    "dataset": {
        "D": 2,
        "K": 5,
        "n_head": 1000,
        "rho": 100.0,
        "mean_radius": 4.0,
        "class_scale": 0.6,
        "n_test_per_class": 200,
        "n_aux": 2000,
        "n_val_ood": 1000,
        "offset_scale": 1.5,
        "affinity": "proportional",
        "test_ood": {"regime": "ring", "radius": 9.0, "center": None,
                     "low": None, "high": None, "n": 1000},
    },
    "model": {"hidden": [64, 64], "activation": "tanh"},
    "pretrain": {"epochs": 40, "lr": 0.01, "batch_size": 128},
    "prior": {"epsilon": None},
    "loss": {
        "variant": "BalancedEnergy",
        "T": 1.0,
        "lam": 0.1,
        "alpha": None,
        "beta": 0.05,
        "gamma": 0.5,
        "m_in": None,
        "m_out": None,
        "margin_percentiles": [80.0, 20.0],
        "detach_z": True,
        "margin_on": True,
        "weight_on": True,
        "z_source": "live",
    },
    "finetune": {"epochs": 10, "lr": 0.001, "batch_in": 128, "batch_out": 256,
                 "freeze": "all_but_last"},
    "eval": {"score": "energy"},
    "sweep": {"gammas": [0.25, 0.5, 0.75, 1.0]},
    "seeds": [0, 1, 2, 3, 4, 5],
}


def _merge(base, user, path):
    out = copy.deepcopy(base)
    for key, val in user.items():
        if key not in base:
            raise ConfigError(f"unknown config key {'.'.join(path + [key])!r}")
        if isinstance(base[key], dict) and not isinstance(val, dict):
            raise ConfigError(f"{'.'.join(path + [key])} must be an object")
        if isinstance(base[key], dict):
            out[key] = _merge(base[key], val, path + [key])
        else:
            out[key] = copy.deepcopy(val)
    return out


def resolve_config(user_doc=None):
    """Materialize every default and check cross-field rules."""
    doc = _merge(DEFAULTS, user_doc or {}, [])

    loss = doc["loss"]
    if (loss["alpha"] is None) == (loss["beta"] is None):
        raise ConfigError("set exactly one of loss.alpha and loss.beta")
    margins_set = loss["m_in"] is not None and loss["m_out"] is not None
    if (loss["m_in"] is not None) != (loss["m_out"] is not None):
        raise ConfigError("loss.m_in and loss.m_out must be set together")
    if margins_set == (loss["margin_percentiles"] is not None):
        raise ConfigError(
            "set exactly one of explicit loss margins and loss.margin_percentiles")
    if loss["margin_percentiles"] is not None:
        pcts = loss["margin_percentiles"]
        if (not isinstance(pcts, (list, tuple)) or len(pcts) != 2
                or not all(0 <= float(p) <= 100 for p in pcts)):
            raise ConfigError("loss.margin_percentiles must be two values in [0, 100]")

    seeds = doc["seeds"]
    if not isinstance(seeds, list) or not seeds:
        raise ConfigError("seeds must be a nonempty list")
    if len(set(int(s) for s in seeds)) != len(seeds):
        raise ConfigError("seeds must be distinct")

    if doc["finetune"]["freeze"] not in ("all_but_last", "none"):
        raise ConfigError(f"unknown freeze spec {doc['finetune']['freeze']!r}")
    if doc["eval"]["score"] not in ("energy", "msp"):
        raise ConfigError(f"unknown eval score {doc['eval']['score']!r}")
    if not isinstance(doc["sweep"]["gammas"], list) or not doc["sweep"]["gammas"]:
        raise ConfigError("sweep.gammas must be a nonempty list")

    aff = doc["dataset"]["affinity"]
    if not (aff == "proportional" or isinstance(aff, list)):
        raise ConfigError("dataset.affinity must be 'proportional' or a list")

    tod = doc["dataset"]["test_ood"]
    if tod["regime"] == "far_uniform" and (tod["low"] is None or tod["high"] is None):
        raise ConfigError("far_uniform test OOD needs dataset.test_ood.low and .high")
    return doc


def load_config(path):
    doc = load(path)
    if not isinstance(doc, dict):
        raise ConfigError("config file must hold a JSON object")
    return resolve_config(doc)


def config_hash(doc):
    """Stable short id of a resolved config document."""
    return hashlib.sha256(dumps(doc).encode("utf-8")).hexdigest()[:12]
