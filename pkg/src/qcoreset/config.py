"""Experiment configuration: JSON documents merged over defaults, plus dotted overrides."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path

from .coreset import CoresetConfig
from .exceptions import QcoresetError
from .qubo import AnnealSchedule, EncodingSpec

DEFAULTS = {
    "dataset": {"path": None, "synthetic": None},
    "pairs": [[1, 2]],
    "pca": {"components": 2},
    "split": {"test_fraction": 0.2},
    "coreset": {
        "size": 20,
        "prior_variance": 1.0,
        "weight_opt_steps": 200,
        "tol": 1e-7,
        "candidate_pool": "all",
    },
    "svm": {"C": 7.0, "kernel": "rbf", "gamma": "median", "tol": 1e-6},
    "qubo": {"base": 2, "bits": 3, "lambda": 1.0, "weighting": "none", "solver": "anneal"},
    "anneal": {"sweeps": 200, "restarts": 32, "t_start": None, "t_end": None},
    "seed": 0,
}

SYNTHETIC_KEYS = {"n_classes", "n_per_class", "n_features", "separation", "noise", "seed"}


class ConfigError(QcoresetError, ValueError):
    """Malformed configuration; the CLI maps it to exit code 2."""


def _merge(base, update, where=""):
    for key, value in update.items():
        path = f"{where}.{key}" if where else key
        if key not in base:
            raise ConfigError(f"unknown config key '{path}'")
        if isinstance(base[key], dict) and key != "synthetic":
            if not isinstance(value, dict):
                raise ConfigError(f"config key '{path}' must be an object")
            _merge(base[key], value, path)
        else:
            base[key] = value
    return base


def parse_override(text):
    """``"section.key=value"`` -> ``(["section", "key"], value)``; JSON values, else string."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    parts = [p for p in key.strip().split(".") if p]
    if not parts:
        raise ConfigError(f"override {text!r} has an empty key")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return parts, value


def apply_overrides(doc, overrides):
    doc = copy.deepcopy(doc)
    for text in overrides or ():
        parts, value = parse_override(text)
        node = doc
        for i, part in enumerate(parts[:-1]):
            if part not in node or not isinstance(node[part], dict):
                inside_synthetic = i > 0 and parts[i - 1] == "synthetic"
                if part == "synthetic" and node.get(part) is None:
                    node[part] = {}
                elif not inside_synthetic:
                    raise ConfigError(f"unknown config key '{'.'.join(parts[:i + 1])}'")
            node = node[part]
        leaf = parts[-1]
        in_synthetic = len(parts) >= 2 and parts[-2] == "synthetic"
        if leaf not in node and not in_synthetic:
            raise ConfigError(f"unknown config key '{'.'.join(parts)}'")
        node[leaf] = value
    return doc


def load_config(path=None, overrides=()):
    """Defaults, then the JSON file at ``path`` (if any), then ``overrides``.

    A relative ``dataset.path`` is resolved against the config file's
    directory.
    """
    doc = copy.deepcopy(DEFAULTS)
    base_dir = Path.cwd()
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        try:
            user = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
        if not isinstance(user, dict):
            raise ConfigError("config root must be a JSON object")
        _merge(doc, user)
        base_dir = path.resolve().parent
    doc = apply_overrides(doc, overrides)
    ds = doc["dataset"]
    if ds.get("path") and not Path(ds["path"]).is_absolute():
        ds["path"] = str(base_dir / ds["path"])
    return doc


@dataclass(frozen=True)
class ExperimentConfig:
    dataset_path: str | None
    synthetic: dict | None
    pairs: tuple
    pca_components: int
    test_fraction: float
    coreset_size: float
    prior_variance: float
    weight_opt_steps: int
    coreset_tol: float
    candidate_pool: object
    C: float
    kernel: str
    gamma: object
    svm_tol: float
    encoding: EncodingSpec
    solver: str
    sweeps: int
    restarts: int
    t_start: float | None
    t_end: float | None
    seed: int

    @classmethod
    def from_dict(cls, doc):
        try:
            ds = doc["dataset"]
            synthetic = ds.get("synthetic")
            if synthetic is not None:
                unknown = set(synthetic) - SYNTHETIC_KEYS
                if unknown:
                    raise ConfigError(f"unknown dataset.synthetic keys: {sorted(unknown)}")
            if not ds.get("path") and synthetic is None:
                raise ConfigError("config needs dataset.path or dataset.synthetic")
            pairs = tuple((int(a), int(b)) for a, b in doc["pairs"])
            if not pairs:
                raise ConfigError("at least one class pair is required")
            cs, svm, qb, an = doc["coreset"], doc["svm"], doc["qubo"], doc["anneal"]
            size = cs["size"]
            if isinstance(size, bool) or not isinstance(size, (int, float)) or size <= 0:
                raise ConfigError("coreset.size must be a positive count or a fraction in (0, 1)")
            if isinstance(size, float) and size >= 1 and not size.is_integer():
                raise ConfigError("fractional coreset.size must lie in (0, 1)")
            gamma = svm["gamma"]
            if gamma != "median":
                gamma = float(gamma)
            if qb["solver"] not in ("anneal", "exhaustive"):
                raise ConfigError("qubo.solver must be 'anneal' or 'exhaustive', "
                                  f"got {qb['solver']!r}")
            pool = cs["candidate_pool"]
            cfg = cls(
                dataset_path=ds.get("path"),
                synthetic=dict(synthetic) if synthetic is not None else None,
                pairs=pairs,
                pca_components=int(doc["pca"]["components"]),
                test_fraction=float(doc["split"]["test_fraction"]),
                coreset_size=size,
                prior_variance=float(cs["prior_variance"]),
                weight_opt_steps=int(cs["weight_opt_steps"]),
                coreset_tol=float(cs["tol"]),
                candidate_pool=pool if pool == "all" else int(pool),
                C=float(svm["C"]),
                kernel=str(svm["kernel"]),
                gamma=gamma,
                svm_tol=float(svm["tol"]),
                encoding=EncodingSpec(qb["base"], qb["bits"], qb["lambda"], qb["weighting"]),
                solver=qb["solver"],
                sweeps=int(an["sweeps"]),
                restarts=int(an["restarts"]),
                t_start=None if an["t_start"] is None else float(an["t_start"]),
                t_end=None if an["t_end"] is None else float(an["t_end"]),
                seed=int(doc["seed"]),
            )
            # constructing these validates ranges up front
            cfg.schedule(0)
            CoresetConfig(1, cfg.weight_opt_steps, cfg.coreset_tol, cfg.candidate_pool)
            if not 0.0 < cfg.test_fraction < 1.0:
                raise ConfigError("split.test_fraction must lie in (0, 1)")
            if cfg.pca_components < 1:
                raise ConfigError("pca.components must be >= 1")
            if cfg.kernel not in ("rbf", "linear"):
                raise ConfigError(f"svm.kernel must be 'rbf' or 'linear', got {cfg.kernel!r}")
            if not cfg.C > 0:
                raise ConfigError("svm.C must be positive")
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid config: {exc}") from None
        return cfg

    def schedule(self, seed):
        return AnnealSchedule(self.sweeps, self.restarts, self.t_start, self.t_end, int(seed))

    def coreset_config(self, n_train, seed):
        size = self.coreset_size
        if isinstance(size, float) and size < 1.0:
            m = max(1, int(round(size * n_train)))
        else:
            m = int(size)
        return CoresetConfig(min(m, n_train), self.weight_opt_steps, self.coreset_tol,
                             self.candidate_pool, int(seed))
