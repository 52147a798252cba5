"""Command-line front end for the detection pipeline.

Subcommands: gen-data, pretrain, estimate-prior, train, eval, sweep,
gap-analysis. Logs go to stderr, data to files under --out. Exit codes:
0 success, 2 config or input validation, 1 runtime failure.
"""

import argparse
import hashlib
import logging
import os
import sys

import numpy as np

from . import pipeline
from .config import config_hash, load_config, resolve_config
from .datasets import load_csv, save_csv
from .errors import BalenError, ConfigError, InvalidArgument
from .jsonio import dump
from .losses import VARIANTS
from .metrics import evaluate, report_csv_row, report_to_doc
from .mlp import (clone_model, finetune_balanced, freeze_all_but_last, load_model,
                  save_model)
from .pipeline import build_prior, gap_comparison, percentile_margins
from .prior import count_predictions, load_prior, save_prior

log = logging.getLogger("balen")


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _load_cfg(args):
    cfg = load_config(args.config) if args.config else resolve_config({})
    if getattr(args, "seed", None) is not None:
        cfg["seeds"] = [int(args.seed)]
    return cfg


def _one_seed(cfg):
    return int(cfg["seeds"][0])


def _data_paths(data_dir):
    return {name: os.path.join(data_dir, f"{name}.csv")
            for name in ("id_train", "id_test", "ood_aux", "ood_test")}


def _load_split(data_dir, name, role):
    path = os.path.join(data_dir, f"{name}.csv")
    if not os.path.isfile(path):
        raise FileNotFoundError(
            f"{path} not found; run `balen gen-data --out {data_dir}` first")
    return load_csv(path, role=role)


def _dataset_hash(data_dir, names=("id_test", "ood_test")):
    h = hashlib.sha256()
    for name in names:
        with open(os.path.join(data_dir, f"{name}.csv"), "rb") as fh:
            h.update(fh.read())
    return h.hexdigest()[:12]


def cmd_gen_data(args):
    cfg = _load_cfg(args)
    seed = _one_seed(cfg)
    data = pipeline.build_datasets(cfg, seed)
    os.makedirs(args.out, exist_ok=True)
    files = {}
    for name, ds in data.items():
        path = os.path.join(args.out, f"{name}.csv")
        save_csv(ds, path)
        files[name] = {"path": f"{name}.csv", "rows": ds.n}
    dump({"config": cfg, "config_hash": config_hash(cfg), "seed": seed,
          "files": files}, os.path.join(args.out, "manifest.json"))
    log.info("wrote %d splits to %s", len(files), args.out)
    return 0


def cmd_pretrain(args):
    cfg = _load_cfg(args)
    seed = _one_seed(cfg)
    id_train = _load_split(args.data, "id_train", "id_train")
    model, history = pipeline.pretrain_model(cfg, seed, id_train)
    os.makedirs(args.out, exist_ok=True)
    save_model(os.path.join(args.out, "model.json"), model)
    _write_csv(os.path.join(args.out, "pretrain_trace.csv"), ["step", "loss"],
               [[i, v] for i, v in enumerate(history)])
    dump({"config": cfg, "config_hash": config_hash(cfg), "seed": seed,
          "stage": "pretrain"}, os.path.join(args.out, "run_manifest.json"))
    log.info("pretrained %s model for %d steps", "x".join(map(str, model.dims)),
             len(history))
    return 0


def cmd_estimate_prior(args):
    cfg = _load_cfg(args)
    model = load_model(args.model)
    aux = load_csv(args.aux)
    if aux.role != "ood_aux" or not np.all(aux.labels == -1):
        raise InvalidArgument(f"{args.aux} is not an auxiliary OOD file (labels must be -1)")
    gamma = cfg["loss"]["gamma"] if args.gamma is None else float(args.gamma)
    counts = count_predictions(model, aux)
    if args.epsilon is not None:
        cfg = dict(cfg)
        cfg["prior"] = {"epsilon": float(args.epsilon)}
    prior = build_prior(cfg, gamma, counts)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "prior.json")
    save_prior(path, counts, prior)
    log.info("estimated prior from %d samples, gamma=%g, argmax class %d",
             aux.n, gamma, int(np.argmax(prior.p)))
    return 0


def cmd_train(args):
    cfg = _load_cfg(args)
    seed = _one_seed(cfg)
    variant = cfg["loss"]["variant"]
    if variant not in VARIANTS:
        raise ConfigError(f"unknown loss variant {variant!r}")
    pretrained = load_model(args.model)
    id_train = _load_split(args.data, "id_train", "id_train")
    ood_aux = _load_split(args.data, "ood_aux", "ood_aux")

    prior = None
    if variant == "BalancedEnergy":
        if args.prior is None:
            raise InvalidArgument("BalancedEnergy training needs --prior")
        _, prior = load_prior(args.prior)
        if prior.gamma != cfg["loss"]["gamma"]:
            raise InvalidArgument(
                f"prior gamma {prior.gamma} does not match config gamma "
                f"{cfg['loss']['gamma']}")
    elif args.prior is not None:
        log.warning("variant %s ignores the prior file %s", variant, args.prior)

    m_in, m_out = percentile_margins(cfg, pretrained, id_train, ood_aux)
    lcfg = pipeline.build_loss_config(cfg, variant, cfg["loss"]["gamma"], m_in, m_out)
    model = clone_model(pretrained)
    if cfg["finetune"]["freeze"] == "all_but_last":
        freeze_all_but_last(model)
    ft = cfg["finetune"]
    history = finetune_balanced(model, id_train.features, id_train.labels,
                                ood_aux.features, prior, lcfg,
                                epochs=ft["epochs"], lr=ft["lr"],
                                batch_in=ft["batch_in"], batch_out=ft["batch_out"],
                                seed=pipeline.subseeds(seed)[pipeline._S_FT])
    os.makedirs(args.out, exist_ok=True)
    save_model(os.path.join(args.out, "model.json"), model)
    keys = ["step", "value", "ce", "l_in_hinge", "l_out"]
    _write_csv(os.path.join(args.out, "finetune_trace.csv"), keys,
               [[i] + [row[k] for k in keys[1:]] for i, row in enumerate(history)])
    dump({"config": cfg, "config_hash": config_hash(cfg), "seed": seed,
          "stage": "train", "variant": variant, "m_in": m_in, "m_out": m_out,
          "alpha": lcfg.alpha}, os.path.join(args.out, "run_manifest.json"))
    log.info("fine-tuned variant %s for %d steps (m_in=%.4g m_out=%.4g)",
             variant, len(history), m_in, m_out)
    return 0


def cmd_eval(args):
    cfg = _load_cfg(args)
    seed = _one_seed(cfg)
    model = load_model(args.model)
    id_test = _load_split(args.data, "id_test", "id_test")
    ood_test = _load_split(args.data, "ood_test", "ood_test")
    score = args.score or cfg["eval"]["score"]
    if score not in ("energy", "msp"):
        raise InvalidArgument(f"unknown score type {score!r}")
    echo = {"config_hash": config_hash(cfg), "dataset_hash": _dataset_hash(args.data),
            "model_file": os.path.basename(args.model)}
    report = evaluate(model, id_test, ood_test, score=score, T=cfg["loss"]["T"],
                      seed=seed, config=echo)
    os.makedirs(args.out, exist_ok=True)
    dump(report_to_doc(report), os.path.join(args.out, f"report_{score}.json"))
    header, row = report_csv_row(report, extra={"score": score, "seed": seed})
    _write_csv(os.path.join(args.out, f"report_{score}.csv"), header, [row])
    log.info("auroc=%.4f ap=%.4f fpr95=%.4f acc=%.4f", report.auroc, report.ap,
             report.fpr95, report.acc)
    return 0


def _sweep_seed_task(cfg, seed):
    """All gamma cells for one seed; per-cell errors recorded, not raised."""
    run = pipeline.prepare_seed(cfg, seed)
    rows = []
    for gamma in cfg["sweep"]["gammas"]:
        gamma = float(gamma)
        try:
            model, _, _, _ = pipeline.finetune_cell(cfg, run, "BalancedEnergy",
                                                    gamma=gamma)
            rep = pipeline.eval_model(cfg, run, model)
            rows.append({"gamma": gamma, "seed": seed, "auroc": rep.auroc,
                         "ap": rep.ap, "fpr95": rep.fpr95, "acc": rep.acc,
                         "error": "", "model": model})
        except BalenError as exc:
            rows.append({"gamma": gamma, "seed": seed, "auroc": None, "ap": None,
                         "fpr95": None, "acc": None,
                         "error": f"{type(exc).__name__}: {exc}", "model": None})
    return rows


def cmd_sweep(args):
    cfg = _load_cfg(args)
    seeds = [int(s) for s in cfg["seeds"]]
    os.makedirs(args.out, exist_ok=True)

    all_rows = []
    if args.jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            for rows in pool.map(_sweep_seed_task, [cfg] * len(seeds), seeds):
                all_rows.extend(rows)
    else:
        for seed in seeds:
            all_rows.extend(_sweep_seed_task(cfg, seed))

    all_rows.sort(key=lambda r: (r["gamma"], r["seed"]))
    for row in all_rows:
        if row["error"]:
            log.error("cell gamma=%g seed=%d failed: %s", row["gamma"], row["seed"],
                      row["error"])
            continue
        cell_cfg = dict(cfg)
        cell_cfg["loss"] = dict(cfg["loss"], gamma=row["gamma"])
        cell_cfg["seeds"] = [row["seed"]]
        run_dir = os.path.join(args.out, f"run-{config_hash(cell_cfg)}")
        os.makedirs(run_dir, exist_ok=True)
        save_model(os.path.join(run_dir, "model.json"), row["model"])

    header = ["gamma", "seed", "auroc", "ap", "fpr95", "acc", "error"]
    _write_csv(os.path.join(args.out, "runs.csv"), header,
               [[r[k] for k in header] for r in all_rows])

    agg_rows = []
    for gamma in sorted({r["gamma"] for r in all_rows}):
        vals = [r for r in all_rows if r["gamma"] == gamma and not r["error"]]
        row = [gamma, len(vals)]
        for key in ("auroc", "ap", "fpr95", "acc"):
            xs = np.array([v[key] for v in vals])
            if xs.size == 0:
                row += [None, None]
            else:
                row += [float(xs.mean()), float(xs.std(ddof=1)) if xs.size > 1 else 0.0]
        agg_rows.append(row)
    _write_csv(os.path.join(args.out, "aggregate.csv"),
               ["gamma", "n", "auroc_mean", "auroc_std", "ap_mean", "ap_std",
                "fpr95_mean", "fpr95_std", "acc_mean", "acc_std"], agg_rows)
    log.info("sweep finished: %d cells, %d failed", len(all_rows),
             sum(1 for r in all_rows if r["error"]))
    return 0


def cmd_gap_analysis(args):
    cfg = _load_cfg(args)
    baseline = load_model(args.baseline)
    ours = load_model(args.ours)
    id_test = _load_split(args.data, "id_test", "id_test")
    ood_test = _load_split(args.data, "ood_test", "ood_test")
    rows, total = gap_comparison(baseline, ours, id_test, ood_test,
                                 T=cfg["loss"]["T"])
    os.makedirs(args.out, exist_ok=True)
    header = ["class", "baseline_gap", "baseline_n_out", "baseline_total_gap",
              "ours_gap", "ours_n_out", "ours_total_gap", "diff_total_gap"]
    out_rows = [[r[k] for k in header] for r in rows]
    out_rows.append(["sum", None, None, None, None, None, None, total])
    _write_csv(os.path.join(args.out, "gap_comparison.csv"), header, out_rows)
    log.info("sum of total-gap differences: %.6g", total)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="balen",
        description="Balanced energy regularization for OOD detection, desk scale.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, **kw):
        p = sub.add_parser(name, **kw)
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, help="override the config seed list")
        p.add_argument("--jobs", type=int, default=1, help="parallel workers")
        p.set_defaults(func=func)
        return p

    add("gen-data", cmd_gen_data, help="write the synthetic dataset splits")

    p = add("pretrain", cmd_pretrain, help="train the base classifier")
    p.add_argument("--data", required=True, help="directory from gen-data")

    p = add("estimate-prior", cmd_estimate_prior,
            help="count predictions on auxiliary OOD and build the prior")
    p.add_argument("--model", required=True, help="model JSON file")
    p.add_argument("--aux", required=True, help="auxiliary OOD CSV")
    p.add_argument("--gamma", type=float, help="prior exponent (default: config)")
    p.add_argument("--epsilon", type=float,
                   help="smoothing floor (default: auto for negative gamma)")

    p = add("train", cmd_train, help="fine-tune with the configured variant")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True, help="pretrained model JSON")
    p.add_argument("--prior", help="prior JSON (required for BalancedEnergy)")

    p = add("eval", cmd_eval, help="score a model and write the report")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--score", choices=["energy", "msp"])

    add("sweep", cmd_sweep, help="gamma x seed grid with aggregate stats")

    p = add("gap-analysis", cmd_gap_analysis,
            help="class-wise total-energy-gap comparison of two models")
    p.add_argument("--baseline", required=True, help="baseline model JSON")
    p.add_argument("--ours", required=True, help="comparison model JSON")
    p.add_argument("--data", required=True)
    return parser


def main(argv=None):
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InvalidArgument) as exc:
        log.error("%s", exc)
        return 2
    except BalenError as exc:
        log.error("%s", exc)
        return 1
    except OSError as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
