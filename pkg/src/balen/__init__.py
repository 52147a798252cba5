"""Balanced energy regularization for OOD detection at desk scale."""

from .config import DEFAULTS, config_hash, load_config, resolve_config
from .core_math import (cross_entropy, cross_entropy_batch, energy_score,
                        energy_score_batch, log_sum_exp, log_sum_exp_batch,
                        msp_score, msp_score_batch, softmax, softmax_batch)
from .datasets import (Dataset, DatasetSpec, circle_means, class_sizes,
                       default_affinity, gen_auxiliary_ood, gen_longtail_id,
                       gen_test_ood, load_csv, save_csv)
from .errors import (BalenError, ConfigError, EmptyInput, InvalidArgument,
                     ParseError, SingularPrior)
from .kernels import BACKEND
from .losses import (BatchLoss, LossConfig, alpha_from_beta, balanced_out_loss,
                     cross_entropy_loss, hinge_sq_in, hinge_sq_out, oe_regularizer,
                     total_objective)
from .metrics import (EnergyGapTable, EvalReport, GapRow, ScoreSet, accuracy,
                      auroc, average_precision, energy_gap_table, evaluate,
                      fpr_at_tpr, report_csv_row, report_to_doc, score_dataset)
from .mlp import (Mlp, adam_step, backprop, clone_model, cosine_lr,
                  finetune_balanced, forward, forward_trace, freeze_all_but_last,
                  init_optimizer, load_model, mlp_init, pretrain_standard,
                  save_model)
from .prior import (OodPrior, count_predictions, estimate_prior, generalize_prior,
                    load_prior, save_prior, z_gamma, z_gamma_batch)

__version__ = "0.1.0"
