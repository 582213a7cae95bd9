"""Datasets, model files, and path tables.

All on-disk formats are deterministic: JSON is written with sorted keys and
floats round-trip bit-exactly through their shortest repr.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

SCHEMA_VERSION = 1

PATH_CSV_COLUMNS = [
    "lambda",
    "K_effective",
    "num_rules",
    "sum_depth",
    "num_features",
    "train_obj",
    "valid_r2",
]

_MISSING_TOKENS = {"", "na", "nan", "null", "none"}


class SchemaVersionError(ValueError):
    """File declares a schema version this build does not read."""


@dataclass
class Dataset:
    feature_matrix: np.ndarray
    response: np.ndarray
    feature_names: list[str]
    row_ids: np.ndarray
    skipped_rows: int = 0

    @property
    def n(self) -> int:
        return self.feature_matrix.shape[0]

    @property
    def p(self) -> int:
        return self.feature_matrix.shape[1]

    @classmethod
    def from_arrays(cls, X, y, feature_names=None) -> "Dataset":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise ValueError("feature matrix and response shapes do not line up")
        names = list(feature_names) if feature_names is not None else [
            f"x{j + 1}" for j in range(X.shape[1])
        ]
        return cls(X, y, names, np.arange(X.shape[0]))


@dataclass
class Condition:
    feature: int
    op: str  # "le" (<=) or "gt" (>)
    threshold: float


@dataclass
class Rule:
    conditions: list[Condition]
    node_mean: float
    weight: float

    @property
    def contribution(self) -> float:
        return self.weight * self.node_mean


@dataclass
class RuleModel:
    rules: list[Rule]
    intercept: float = 0.0  # 0 unless a root node was selected
    metadata: dict = field(default_factory=dict)

    @property
    def num_rules(self) -> int:
        return len(self.rules)


def load_csv(path, target: str) -> Dataset:
    """Read a numeric CSV with a header row.

    `target` names the response column; every other column becomes a feature.
    Rows with a missing cell (empty, na, nan, null) are dropped and counted in
    `Dataset.skipped_rows`. A non-numeric cell that is not a missing token is
    an error.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, expected a header row")
        header = [h.strip() for h in header]
        if target not in header:
            raise ValueError(f"{path}: target column {target!r} not in header {header}")
        t_col = header.index(target)
        feature_names = [h for j, h in enumerate(header) if j != t_col]

        rows, ys, ids = [], [], []
        skipped = 0
        for r_idx, rec in enumerate(reader):
            if len(rec) != len(header):
                raise ValueError(
                    f"{path}: row {r_idx + 2} has {len(rec)} cells, expected {len(header)}"
                )
            vals = []
            missing = False
            for cell in rec:
                token = cell.strip()
                if token.lower() in _MISSING_TOKENS:
                    missing = True
                    break
                try:
                    v = float(token)
                except ValueError:
                    raise ValueError(
                        f"{path}: non-numeric cell {cell!r} in row {r_idx + 2}"
                    ) from None
                if math.isnan(v):
                    missing = True
                    break
                vals.append(v)
            if missing:
                skipped += 1
                continue
            ys.append(vals.pop(t_col))
            rows.append(vals)
            ids.append(r_idx)

        if not rows:
            raise ValueError(f"{path}: no complete data rows")
        X = np.array(rows, dtype=np.float64)
        y = np.array(ys, dtype=np.float64)
        return Dataset(X, y, feature_names, np.array(ids, dtype=np.int64), skipped)


def split(ds: Dataset, fractions, seed: int):
    """Shuffle rows and split into (train, valid, test) Datasets.

    `fractions` is (train, valid, test) summing to 1. Validation and test get
    floor(n * f) rows each; train takes the remainder, so every row lands in
    exactly one part.
    """
    f_train, f_valid, f_test = fractions
    if abs(f_train + f_valid + f_test - 1.0) > 1e-9:
        raise ValueError("split fractions must sum to 1")
    n = ds.n
    n_valid = int(math.floor(n * f_valid))
    n_test = int(math.floor(n * f_test))
    n_train = n - n_valid - n_test
    if min(n_train, n_valid, n_test) <= 0:
        raise ValueError(f"split of {n} rows leaves an empty part: "
                         f"({n_train}, {n_valid}, {n_test})")
    perm = np.random.default_rng(seed).permutation(n)
    parts = (
        perm[:n_train],
        perm[n_train:n_train + n_valid],
        perm[n_train + n_valid:],
    )

    def take(idx):
        idx = np.sort(idx)
        return Dataset(
            ds.feature_matrix[idx],
            ds.response[idx],
            list(ds.feature_names),
            ds.row_ids[idx],
            0,
        )

    return tuple(take(ix) for ix in parts)


def write_csv(ds: Dataset, path, target: str = "y") -> None:
    """Inverse of load_csv: header, then feature columns plus the target."""
    if target in ds.feature_names:
        raise ValueError(f"target name {target!r} collides with a feature")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(ds.feature_names) + [target])
        for i in range(ds.n):
            row = [_fmt(v) for v in ds.feature_matrix[i]]
            row.append(_fmt(ds.response[i]))
            writer.writerow(row)


# --- ensemble JSON -----------------------------------------------------------

def ensemble_to_dict(ens) -> dict:
    trees = []
    for tree in ens.trees:
        nodes = []
        for nd in tree.nodes:
            nodes.append({
                "id": nd.id,
                "parent": nd.parent,
                "left": nd.left,
                "right": nd.right,
                "feature": nd.feature,
                "threshold": nd.threshold,
                "n_samples": nd.n_samples,
                "mu": nd.mu,
                "depth": nd.depth,
            })
        trees.append({"nodes": nodes})
    out = {
        "schema_version": SCHEMA_VERSION,
        "kind": "ensemble",
        "learning_rate": ens.learning_rate,
        "base_score": ens.base_score,
        "max_depth": ens.max_depth,
        "trees": trees,
    }
    if ens.feature_names is not None:
        out["feature_names"] = list(ens.feature_names)
    return out


def save_ensemble(ens, path) -> None:
    with open(path, "w") as fh:
        json.dump(ensemble_to_dict(ens), fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_ensemble(path):
    from .ensemble import Tree, TreeEnsemble, TreeNode

    with open(path) as fh:
        doc = json.load(fh)
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaVersionError(f"{path}: schema_version {version!r}, "
                                 f"this build reads {SCHEMA_VERSION}")
    trees = []
    for t_doc in doc["trees"]:
        nodes = []
        for nd in t_doc["nodes"]:
            nodes.append(TreeNode(
                id=nd["id"],
                parent=nd["parent"],
                left=nd["left"],
                right=nd["right"],
                feature=nd["feature"],
                threshold=nd["threshold"],
                n_samples=nd["n_samples"],
                mu=nd["mu"],
                depth=nd["depth"],
            ))
        trees.append(Tree(nodes))
    return TreeEnsemble(
        trees=trees,
        learning_rate=doc["learning_rate"],
        base_score=doc["base_score"],
        max_depth=doc.get("max_depth", 0),
        feature_names=doc.get("feature_names"),
    )


# --- rule model JSON ---------------------------------------------------------

def rule_model_to_dict(model: RuleModel) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "rule_model",
        "intercept": model.intercept,
        "metadata": model.metadata,
        "rules": [
            {
                "conditions": [
                    {"feature": c.feature, "op": c.op, "threshold": c.threshold}
                    for c in rule.conditions
                ],
                "node_mean": rule.node_mean,
                "weight": rule.weight,
            }
            for rule in model.rules
        ],
    }


def save_rule_model(model: RuleModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(rule_model_to_dict(model), fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_rule_model(path) -> RuleModel:
    with open(path) as fh:
        doc = json.load(fh)
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaVersionError(f"{path}: schema_version {version!r}, "
                                 f"this build reads {SCHEMA_VERSION}")
    rules = [
        Rule(
            conditions=[
                Condition(c["feature"], c["op"], c["threshold"])
                for c in r["conditions"]
            ],
            node_mean=r["node_mean"],
            weight=r["weight"],
        )
        for r in doc["rules"]
    ]
    return RuleModel(rules, doc["intercept"], doc.get("metadata", {}))


# --- path table --------------------------------------------------------------

def write_path_csv(path_result, path) -> None:
    """One row per regularization-path point, fixed column order."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PATH_CSV_COLUMNS)
        for pt in path_result.points:
            writer.writerow([
                _fmt(pt.lam),
                pt.attribute_sum,
                pt.num_rules,
                pt.sum_depth,
                pt.num_features,
                _fmt(pt.train_obj),
                "" if pt.valid_r2 is None else _fmt(pt.valid_r2),
            ])


def _fmt(x: float) -> str:
    return repr(float(x))
