"""Scoring, the per-pair experiment pipeline, and report output."""

from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np

from ._io import dumps
from .config import ExperimentConfig
from .coreset import build_coreset
from .dataset import fit_pca, load_csv, select_pair, split
from .exceptions import ClassLookupError, InsufficientDataError, SingleClassError, StageError
from .posterior import GaussianPrior
from .qubo import build_qubo, decode_model, solve_anneal, solve_exhaustive
from .svm import KernelSpec, dual_objective, median_heuristic_gamma, train_weighted_svm
from .synthetic import make_blobs

log = logging.getLogger(__name__)


def accuracy(model, test):
    """Fraction of test points whose three-way decision equals the label.

    A point exactly on the boundary (decision 0) counts as wrong.
    """
    if test.n_samples == 0:
        raise InsufficientDataError("accuracy needs a non-empty test set")
    values = model.decision_function(test.features)
    pred = np.sign(values)
    return float(np.mean(pred == test.labels))


@dataclass(frozen=True)
class PairResult:
    """One row of the report.

    ``data_size`` counts the two classes before splitting; ``kl`` is measured
    against the training split the coreset was drawn from; accuracies are
    on the held-out test split.
    """

    pair: tuple
    data_size: int
    train_size: int
    test_size: int
    coreset_size: int
    active_size: int
    kl: float
    qacc: float
    cacc: float
    qubo_residual: float
    gamma: float
    classical_dual: float
    quantum_dual: float
    quantum_energy: float

    def __post_init__(self):
        if not (0.0 <= self.qacc <= 1.0 and 0.0 <= self.cacc <= 1.0):
            raise ValueError("accuracies must lie in [0, 1]")
        if self.coreset_size > self.data_size:
            raise ValueError("coreset_size exceeds data_size")
        if self.kl < 0:
            raise ValueError("kl must be non-negative")

    def to_json(self):
        doc = asdict(self)
        doc["pair"] = [int(c) for c in self.pair]
        return doc

    @classmethod
    def from_json(cls, doc):
        kwargs = {f.name: doc[f.name] for f in fields(cls)}
        kwargs["pair"] = tuple(int(c) for c in doc["pair"])
        return cls(**kwargs)


_NUM = {"type": "number"}
_INT = {"type": "integer", "minimum": 0}
_UNIT = {"type": "number", "minimum": 0, "maximum": 1}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "array",
    "items": {
        "type": "object",
        "additionalProperties": False,
        "required": [f.name for f in fields(PairResult)],
        "properties": {
            "pair": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2},
            "data_size": _INT,
            "train_size": _INT,
            "test_size": _INT,
            "coreset_size": _INT,
            "active_size": _INT,
            "kl": {"type": "number", "minimum": 0},
            "qacc": _UNIT,
            "cacc": _UNIT,
            "qubo_residual": {"type": "number", "minimum": 0},
            "gamma": _NUM,
            "classical_dual": _NUM,
            "quantum_dual": _NUM,
            "quantum_energy": _NUM,
        },
    },
}


@dataclass(frozen=True)
class PreparedPair:
    """Everything upstream of the two trainers, for one class pair."""

    pair: tuple
    data_size: int
    train: object
    test: object
    transform: object
    selection: object
    kernel: KernelSpec
    anneal_seed: int

    @property
    def active(self):
        """Coreset points with positive weight, in selection order."""
        keep = self.selection.weights > 0
        idx = self.selection.indices[keep]
        return self.train.features[idx], self.train.labels[idx], self.selection.weights[keep]


def load_dataset(cfg):
    if cfg.dataset_path:
        return load_csv(cfg.dataset_path)
    return make_blobs(**cfg.synthetic)


def pair_seeds(master, pair):
    """Independent (split, coreset, anneal) seeds for one pair."""
    ss = np.random.SeedSequence([int(master), int(pair[0]), int(pair[1])])
    return [int(s) for s in ss.generate_state(3)]


def _stage(pair, name, fn, *args, **kwargs):
    log.info("pair %s: %s", tuple(pair), name)
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(pair, name, exc) from exc


def _check_coreset_labels(labels):
    if not ((labels == 1).any() and (labels == -1).any()):
        raise SingleClassError("coreset holds positive-weight points of only one class")


def prepare_pair(raw, pair, cfg):
    """select_pair, standardise + PCA, split, coreset on the train split."""
    split_seed, coreset_seed, anneal_seed = pair_seeds(cfg.seed, pair)
    ds = _stage(pair, "select_pair", select_pair, raw, *pair)
    reduced, tf = _stage(pair, "pca", fit_pca, ds, cfg.pca_components)
    train, test = _stage(pair, "split", split, reduced, cfg.test_fraction, split_seed)
    ccfg = cfg.coreset_config(train.n_samples, coreset_seed)
    sel = _stage(pair, "coreset", build_coreset, train, GaussianPrior(cfg.prior_variance), ccfg)
    if cfg.gamma == "median":
        gamma = median_heuristic_gamma(train.features)
    else:
        gamma = float(cfg.gamma)
    spec = KernelSpec(cfg.kernel, gamma)
    prepared = PreparedPair(tuple(pair), ds.n_samples, train, test, tf, sel, spec, anneal_seed)
    _stage(pair, "coreset_labels", _check_coreset_labels, prepared.active[1])
    return prepared


def train_classical(prep, cfg):
    X, y, w = prep.active
    return _stage(prep.pair, "train_csvm", train_weighted_svm, X, y, w, cfg.C, prep.kernel,
                  cfg.svm_tol)


def train_quantum(prep, cfg, n_jobs=1):
    """Returns ``(qubo, solution, model)``."""
    X, y, w = prep.active
    q = _stage(prep.pair, "build_qubo", build_qubo, X, y, w, prep.kernel, cfg.encoding)
    if cfg.solver == "exhaustive":
        sol = _stage(prep.pair, "solve_qubo", solve_exhaustive, q)
    else:
        sol = _stage(prep.pair, "solve_qubo", solve_anneal, q, cfg.schedule(prep.anneal_seed),
                     n_jobs)
    model = _stage(prep.pair, "decode", decode_model, q, sol, X, y, w, prep.kernel, cfg.encoding)
    return q, sol, model


def run_pair(raw, pair, cfg, n_jobs=1):
    prep = prepare_pair(raw, pair, cfg)
    cmodel = train_classical(prep, cfg)
    _, sol, qmodel = train_quantum(prep, cfg, n_jobs)
    cacc = _stage(pair, "evaluate", accuracy, cmodel, prep.test)
    qacc = _stage(pair, "evaluate", accuracy, qmodel, prep.test)
    X, y, w = prep.active
    # both duals are scored on the weighted classical objective
    return PairResult(
        pair=tuple(int(c) for c in pair),
        data_size=prep.data_size,
        train_size=prep.train.n_samples,
        test_size=prep.test.n_samples,
        coreset_size=prep.selection.size,
        active_size=int(X.shape[0]),
        kl=float(prep.selection.achieved_kl),
        qacc=qacc,
        cacc=cacc,
        qubo_residual=qmodel.equality_residual,
        gamma=float(prep.kernel.gamma),
        classical_dual=dual_objective(cmodel.alphas, y, w, X, prep.kernel),
        quantum_dual=dual_objective(qmodel.alphas, y, w, X, prep.kernel),
        quantum_energy=float(sol.energy),
    )


def run_experiment(cfg, dataset=None, threads=1):
    """Run every configured pair; results come back in config order.

    Every pair's class ids are checked against the dataset before any work
    starts.  Pairs run on up to ``threads`` workers; annealing restarts use
    the remaining parallelism only when there is a single pair.
    """
    if not isinstance(cfg, ExperimentConfig):
        cfg = ExperimentConfig.from_dict(cfg)
    raw = dataset if dataset is not None else load_dataset(cfg)
    present = set(int(c) for c in np.unique(raw.labels))
    for pair in cfg.pairs:
        missing = [c for c in pair if c not in present]
        if missing:
            raise StageError(pair, "select_pair", ClassLookupError(
                f"class id {missing[0]} does not occur in the dataset "
                f"(available: {sorted(present)})"))
    threads = max(1, int(threads or 1))
    if threads > 1 and len(cfg.pairs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(lambda p: run_pair(raw, p, cfg), cfg.pairs))
    return [run_pair(raw, p, cfg, n_jobs=threads) for p in cfg.pairs]


# -- report formats -----------------------------------------------------------------


def report_json(results):
    return dumps([r.to_json() for r in results])


def parse_report(text):
    return [PairResult.from_json(d) for d in json.loads(text)]


_TABLE_COLUMNS = [
    ("Pair", lambda r: "{%d,%d}" % r.pair),
    ("Data size", lambda r: str(r.data_size)),
    ("Coreset size", lambda r: str(r.coreset_size)),
    ("KL divergence", lambda r: f"{r.kl:.4f}"),
    ("qacc (test)", lambda r: f"{r.qacc:.2f}"),
    ("cacc (test)", lambda r: f"{r.cacc:.2f}"),
    ("|sum a*y|", lambda r: f"{r.qubo_residual:.3g}"),
]


def report_table(results):
    """Aligned plain-text table: pair, sizes, KL, then the two test accuracies."""
    rows = [[h for h, _ in _TABLE_COLUMNS]] + [[f(r) for _, f in _TABLE_COLUMNS] for r in results]
    widths = [max(len(row[i]) for row in rows) for i in range(len(_TABLE_COLUMNS))]
    lines = []
    for j, row in enumerate(rows):
        lines.append("  ".join(c.rjust(wd) if i else c.ljust(wd)
                               for i, (c, wd) in enumerate(zip(row, widths))).rstrip())
        if j == 0:
            lines.append("  ".join("-" * wd for wd in widths))
    return "\n".join(lines) + "\n"


def report_csv(results):
    names = [f.name for f in fields(PairResult)]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["class_a", "class_b"] + names[1:])
    for r in results:
        doc = r.to_json()
        writer.writerow(doc["pair"] + [repr(doc[n]) if isinstance(doc[n], float) else doc[n]
                                       for n in names[1:]])
    return buf.getvalue()
