"""Autoencoder-based fuzzy rule classification.

Pipeline: ramp or expert membership preprocessing, stacked sparse
denoising autoencoder pretraining, one of four fine-tuning strategies,
then fuzzy rule generation and inference on the deepest code layer.
Includes a stratified cross-validation harness and the rank-based
statistics used to compare classifiers across datasets.
"""

from .dataset import CsvSchema, Dataset, FoldPlan, export_folds, import_folds, load_csv, \
    make_dataset, save_csv, split, stratified_kfold
from .errors import AefrcError, ConfigError, DataError, NumericalError
from .evaluation import ExperimentReport, FoldResult, PipelineConfig, RankTable, \
    bonferroni_dunn_cd, friedman, load_rank_table, load_report, rank, run_cv, save_report, \
    sign_test_cutoff, sweep_rho, train_pipeline, wilcoxon_sign
from .finetune import FtIvConfig, ft1, ft2, ft3, ft4, frc_fitness, separation_cost_grad
from .frc import FeatureMFBank, Rule, RuleBase, classify, classify_batch, fit_mf_bank, \
    generate_rules, load_rulebase, rules_to_text, save_rulebase
from .mf import ConstantMF, ExpertRule, GaussianMF, PreprocSpec, RampMF, append_expert, \
    expand_expert_samples, fit_ramp_spec, load_expert_file, make_expert_samples, preprocess, \
    preprocess_array, save_expert_file
from .network import AEConfig, Network, ae_cost_grad, corrupt, forward, init_network, \
    load_network, save_network, stack, train_ae
from .optim import CmaesConfig, CmaesResult, MinimizeResult, OptimizerConfig, cmaes, minimize
from .seeding import rng_for, spawn_seed

__version__ = "0.1.0"

__all__ = [
    "AEConfig", "AefrcError", "CmaesConfig", "CmaesResult", "ConfigError", "ConstantMF",
    "CsvSchema", "DataError", "Dataset", "ExperimentReport", "ExpertRule", "FeatureMFBank",
    "FoldPlan", "FoldResult", "FtIvConfig", "GaussianMF", "MinimizeResult", "Network",
    "NumericalError", "OptimizerConfig", "PipelineConfig", "PreprocSpec", "RampMF", "Rule",
    "RuleBase", "RankTable", "ae_cost_grad", "append_expert", "bonferroni_dunn_cd",
    "classify", "classify_batch", "cmaes", "corrupt", "expand_expert_samples",
    "export_folds", "fit_mf_bank", "fit_ramp_spec", "forward", "frc_fitness", "friedman",
    "ft1", "ft2", "ft3", "ft4", "generate_rules", "import_folds", "init_network",
    "load_csv", "load_expert_file", "load_network", "load_rank_table", "load_report",
    "load_rulebase", "make_dataset", "make_expert_samples", "minimize", "preprocess",
    "preprocess_array", "rank", "rng_for", "rules_to_text", "run_cv", "save_csv",
    "save_expert_file", "save_network", "save_report", "save_rulebase",
    "separation_cost_grad", "sign_test_cutoff", "spawn_seed", "split", "stratified_kfold",
    "sweep_rho", "train_ae", "train_pipeline", "wilcoxon_sign", "__version__",
]
