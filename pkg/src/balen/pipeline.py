"""End-to-end experiment steps shared by the CLI and the test suite.

One experiment seed fans out into independent RNG streams (data splits,
init, shuffles, validation draw) so that re-running any stage alone
reproduces its artifact byte for byte.
"""

from dataclasses import dataclass

import numpy as np

from .core_math import energy_score_batch
from .datasets import (Dataset, DatasetSpec, circle_means, default_affinity,
                       gen_auxiliary_ood, gen_longtail_id, gen_test_ood)
from .errors import InvalidArgument
from .losses import LossConfig, alpha_from_beta
from .metrics import energy_gap_table, evaluate
from .mlp import (clone_model, finetune_balanced, forward, freeze_all_but_last,
                  mlp_init, pretrain_standard)
from .prior import count_predictions, estimate_prior, generalize_prior

# fixed positions in the per-seed stream table
_S_ID, _S_AUX, _S_TEST, _S_INIT, _S_PRE, _S_FT, _S_VAL = range(7)


def subseeds(seed):
    """Eight derived integer seeds, one per pipeline stage."""
    return [int(s) for s in np.random.SeedSequence(int(seed)).generate_state(8)]


def dataset_spec(cfg, seed):
    d = cfg["dataset"]
    if d["D"] == 2:
        means = circle_means(d["K"], radius=d["mean_radius"])
    else:
        # seed-independent directions so the geometry is a config property
        rng = np.random.default_rng(0xC0FFEE)
        means = rng.normal(size=(d["K"], d["D"]))
        means *= d["mean_radius"] / np.linalg.norm(means, axis=1, keepdims=True)
    return DatasetSpec(D=d["D"], K=d["K"], n_head=d["n_head"], rho=d["rho"],
                       class_means=means, class_scale=d["class_scale"],
                       n_test_per_class=d["n_test_per_class"],
                       seed=subseeds(seed)[_S_ID])


def resolve_affinity(cfg, spec):
    aff = cfg["dataset"]["affinity"]
    if aff == "proportional":
        return default_affinity(spec)
    return np.asarray(aff, dtype=np.float64)


def build_datasets(cfg, seed, include_val=False):
    """All splits for one seed: id_train, id_test, ood_aux, ood_test (+ ood_val)."""
    d = cfg["dataset"]
    ss = subseeds(seed)
    spec = dataset_spec(cfg, seed)
    affinity = resolve_affinity(cfg, spec)
    id_train, id_test = gen_longtail_id(spec)
    out = {
        "id_train": id_train,
        "id_test": id_test,
        "ood_aux": gen_auxiliary_ood(spec, affinity, d["n_aux"], d["offset_scale"],
                                     ss[_S_AUX]),
        "ood_test": _gen_test_ood(cfg, ss[_S_TEST]),
    }
    if include_val:
        val = gen_auxiliary_ood(spec, affinity, d["n_val_ood"], d["offset_scale"],
                                ss[_S_VAL])
        out["ood_val"] = Dataset(val.features, val.labels, "ood_test")
    return out


def _gen_test_ood(cfg, seed):
    d = cfg["dataset"]
    tod = d["test_ood"]
    if tod["regime"] == "ring":
        params = {"radius": tod["radius"]}
        if tod["center"] is not None:
            params["center"] = tod["center"]
    else:
        params = {"low": tod["low"], "high": tod["high"]}
    return gen_test_ood(d["D"], tod["n"], tod["regime"], params, seed)


def model_dims(cfg):
    return [cfg["dataset"]["D"]] + list(cfg["model"]["hidden"]) + [cfg["dataset"]["K"]]


def pretrain_model(cfg, seed, id_train):
    """Fresh init plus standard training on the long-tailed ID split."""
    ss = subseeds(seed)
    model = mlp_init(model_dims(cfg), seed=ss[_S_INIT],
                     activation=cfg["model"]["activation"])
    p = cfg["pretrain"]
    history = pretrain_standard(model, id_train.features, id_train.labels,
                                epochs=p["epochs"], lr=p["lr"],
                                batch_size=p["batch_size"], seed=ss[_S_PRE])
    return model, history


def percentile_margins(cfg, model, id_train, ood_aux):
    """Explicit margins if configured, else the energy-percentile rule."""
    loss = cfg["loss"]
    if loss["m_in"] is not None:
        return float(loss["m_in"]), float(loss["m_out"])
    p_in, p_out = loss["margin_percentiles"]
    e_id = energy_score_batch(forward(model, id_train.features), loss["T"])
    e_aux = energy_score_batch(forward(model, ood_aux.features), loss["T"])
    return float(np.percentile(e_id, p_in)), float(np.percentile(e_aux, p_out))


def resolve_alpha(cfg, m_in, m_out):
    loss = cfg["loss"]
    if loss["alpha"] is not None:
        return float(loss["alpha"])
    return alpha_from_beta(loss["beta"], cfg["dataset"]["K"], m_in, m_out)


def resolve_epsilon(cfg, gamma, counts):
    """Smoothing floor; negative gamma defaults to 1/(2 * total count)."""
    eps = cfg["prior"]["epsilon"]
    if eps is not None:
        return float(eps)
    if gamma < 0:
        return 1.0 / (2.0 * int(np.sum(counts)))
    return 0.0


def build_prior(cfg, gamma, counts):
    return generalize_prior(estimate_prior(counts), gamma,
                            resolve_epsilon(cfg, gamma, counts))


def build_loss_config(cfg, variant, gamma, m_in, m_out,
                      margin_on=None, weight_on=None):
    loss = cfg["loss"]
    alpha = resolve_alpha(cfg, m_in, m_out) if variant == "BalancedEnergy" else 0.0
    return LossConfig(
        variant=variant, T=loss["T"], lam=loss["lam"], alpha=alpha, gamma=gamma,
        m_in=m_in, m_out=m_out, detach_z=loss["detach_z"],
        margin_on=loss["margin_on"] if margin_on is None else margin_on,
        weight_on=loss["weight_on"] if weight_on is None else weight_on,
        z_source=loss["z_source"])


@dataclass
class SeedRun:
    """Everything one seed shares across fine-tuning cells."""

    seed: int
    data: dict
    pretrained: object
    pretrain_history: list
    counts: np.ndarray
    m_in: float
    m_out: float


def prepare_seed(cfg, seed, include_val=False):
    data = build_datasets(cfg, seed, include_val=include_val)
    model, history = pretrain_model(cfg, seed, data["id_train"])
    counts = count_predictions(model, data["ood_aux"])
    m_in, m_out = percentile_margins(cfg, model, data["id_train"], data["ood_aux"])
    return SeedRun(seed=seed, data=data, pretrained=model, pretrain_history=history,
                   counts=counts, m_in=m_in, m_out=m_out)


def finetune_cell(cfg, run, variant, gamma=0.0, margin_on=None, weight_on=None):
    """Clone the pretrained model and fine-tune one objective variant."""
    ft = cfg["finetune"]
    model = clone_model(run.pretrained)
    if ft["freeze"] == "all_but_last":
        freeze_all_but_last(model)
    lcfg = build_loss_config(cfg, variant, gamma, run.m_in, run.m_out,
                             margin_on=margin_on, weight_on=weight_on)
    prior = build_prior(cfg, gamma, run.counts) if variant == "BalancedEnergy" else None
    history = finetune_balanced(
        model, run.data["id_train"].features, run.data["id_train"].labels,
        run.data["ood_aux"].features, prior, lcfg,
        epochs=ft["epochs"], lr=ft["lr"], batch_in=ft["batch_in"],
        batch_out=ft["batch_out"], seed=subseeds(run.seed)[_S_FT])
    return model, prior, lcfg, history


def eval_model(cfg, run, model, ood_key="ood_test", config_echo=None):
    return evaluate(model, run.data["id_test"], run.data[ood_key],
                    score=cfg["eval"]["score"], T=cfg["loss"]["T"],
                    seed=run.seed, config=config_echo or {})


def select_gamma(cfg, run):
    """Pick the sweep gamma with the best validation AUROC for this seed."""
    if "ood_val" not in run.data:
        raise InvalidArgument("gamma selection needs a validation OOD split")
    best = None
    for gamma in cfg["sweep"]["gammas"]:
        model, _, _, _ = finetune_cell(cfg, run, "BalancedEnergy", gamma=float(gamma))
        rep = eval_model(cfg, run, model, ood_key="ood_val")
        if best is None or rep.auroc > best[1]:
            best = (float(gamma), rep.auroc, model)
    return best


def gap_comparison(baseline_model, ours_model, id_test, ood_test, T=1.0):
    """Class-wise total-gap rows for two models plus the improvements sum.

    diff = baseline total_gap - ours total_gap per class; positive sums mean
    the second model separates OOD energies further from ID.
    """
    if baseline_model.class_count != ours_model.class_count:
        raise InvalidArgument("models disagree on the number of classes")
    tb = energy_gap_table(baseline_model, id_test, ood_test, T)
    to = energy_gap_table(ours_model, id_test, ood_test, T)
    rows = []
    for rb, ro in zip(tb.rows, to.rows):
        rows.append({
            "class": rb.class_index,
            "baseline_gap": rb.gap, "baseline_n_out": rb.n_out,
            "baseline_total_gap": rb.total_gap,
            "ours_gap": ro.gap, "ours_n_out": ro.n_out,
            "ours_total_gap": ro.total_gap,
            "diff_total_gap": rb.total_gap - ro.total_gap,
        })
    return rows, tb.sum_total_gap - to.sum_total_gap
