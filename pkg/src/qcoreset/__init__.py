"""Bayesian coresets feeding weighted kernel SVMs solved classically or as a QUBO."""

from .coreset import BayesianCoreset, CoresetConfig, CoresetSelection, build_coreset, coreset_kl
from .dataset import (
    BinaryDataset,
    JacobiPCA,
    PcaTransform,
    RawDataset,
    fit_pca,
    load_csv,
    select_pair,
    split,
    write_csv,
)
from .evalrep import PairResult, accuracy, run_experiment
from .posterior import GaussianApprox, GaussianPrior, gaussian_kl, laplace_fit
from .qubo import (
    AnnealSchedule,
    BinarySolution,
    EncodingSpec,
    QuboProblem,
    QuboSVC,
    build_qubo,
    decode_model,
    energy,
    solve_anneal,
    solve_exhaustive,
)
from .svm import KernelSpec, SvmModel, WeightedKernelSVC, decide, train_weighted_svm

__version__ = "0.1.0"

__all__ = [
    "AnnealSchedule",
    "BayesianCoreset",
    "BinaryDataset",
    "BinarySolution",
    "CoresetConfig",
    "CoresetSelection",
    "EncodingSpec",
    "GaussianApprox",
    "GaussianPrior",
    "JacobiPCA",
    "KernelSpec",
    "PairResult",
    "PcaTransform",
    "QuboProblem",
    "QuboSVC",
    "RawDataset",
    "SvmModel",
    "WeightedKernelSVC",
    "accuracy",
    "build_coreset",
    "build_qubo",
    "coreset_kl",
    "decide",
    "decode_model",
    "energy",
    "fit_pca",
    "gaussian_kl",
    "laplace_fit",
    "load_csv",
    "run_experiment",
    "select_pair",
    "solve_anneal",
    "solve_exhaustive",
    "split",
    "train_weighted_svm",
    "write_csv",
]
