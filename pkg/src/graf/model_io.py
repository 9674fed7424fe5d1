"""Versioned forest persistence as canonical JSON.

Canonical means: sorted keys, two-space indent, shortest round-trip float
repr, trailing newline. Loading and re-saving a model reproduces the file
byte for byte, and a loaded forest predicts exactly like the original
(posteriors and hyperplanes round-trip losslessly through repr).
"""

from __future__ import annotations

import json

import numpy as np

from .dataset import load_csv  # re-exported: CSV ingestion lives with models
from .engine import LeafRecord, TreeInstance, leaf_codes
from .errors import DataError, UsageError
from .forest import Forest, ForestConfig

__all__ = ["FORMAT_NAME", "FORMAT_VERSION", "save_model", "load_model",
           "forest_to_doc", "doc_to_forest", "load_csv"]

FORMAT_NAME = "graf-forest"
FORMAT_VERSION = 1


def _floats(arr) -> list:
    return [float(v) for v in arr]


def forest_to_doc(forest: Forest) -> dict:
    trees = []
    for tree in forest.trees:
        nodes = []
        for i in range(tree.n_nodes):
            leaf = int(tree.node_leaf[i])
            if leaf >= 0:
                nodes.append({"leaf": leaf})
            else:
                nodes.append({
                    "step": int(tree.node_step[i]),
                    "children": [int(tree.node_child0[i]),
                                 int(tree.node_child1[i])],
                })
        trees.append({
            "subspace": [int(c) for c in tree.subspace],
            "hyperplanes": [
                {"weights": _floats(tree.weights[t]),
                 "bias": float(tree.biases[t])}
                for t in range(tree.n_hyperplanes)
            ],
            "nodes": nodes,
            "leaves": [
                {"posterior": _floats(lf.posterior),
                 "weight_count": int(lf.weight_count)}
                for lf in tree.leaves
            ],
        })
    config = forest.config
    return {
        "format": FORMAT_NAME,
        "format_version": FORMAT_VERSION,
        "config": {
            "n_trees": config.n_trees,
            "subspace": config.subspace,
            "min_samples_split": config.min_samples_split,
            "master_seed": config.master_seed,
        },
        "n_features": forest.n_features,
        "n_classes": forest.n_classes,
        "class_totals": [int(t) for t in forest.class_totals],
        "class_names": (None if forest.class_names is None
                        else list(forest.class_names)),
        "feature_names": (None if forest.feature_names is None
                          else list(forest.feature_names)),
        "label_column": forest.label_column,
        "trees": trees,
    }


def dump_canonical(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"


def save_model(forest: Forest, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dump_canonical(forest_to_doc(forest)))


def _reject_constant(text):
    raise DataError(f"non-finite JSON constant {text!r} is not allowed")


class _Check:
    """Validation helper that tracks a JSON-path-ish location for errors."""

    def __init__(self, where: str):
        self.where = where

    def fail(self, msg: str):
        raise DataError(f"{self.where}: {msg}")

    def sub(self, key) -> "_Check":
        return _Check(f"{self.where}.{key}" if isinstance(key, str)
                      else f"{self.where}[{key}]")

    def get(self, doc: dict, key: str, types, allow_none: bool = False):
        if not isinstance(doc, dict):
            self.fail("expected an object")
        if key not in doc:
            self.fail(f"missing key {key!r}")
        val = doc[key]
        if val is None and allow_none:
            return None
        if not isinstance(val, types) or isinstance(val, bool):
            self.fail(f"key {key!r} has wrong type")
        return val

    def intval(self, doc, key, minimum=None):
        v = self.get(doc, key, int)
        if minimum is not None and v < minimum:
            self.fail(f"key {key!r} must be >= {minimum}")
        return v

    def float_list(self, doc, key, length=None):
        v = self.get(doc, key, list)
        if length is not None and len(v) != length:
            self.fail(f"key {key!r} must have {length} entries")
        out = []
        for i, item in enumerate(v):
            if isinstance(item, bool) or not isinstance(item, (int, float)):
                self.sub(key).sub(i).fail("expected a number")
            f = float(item)
            if not np.isfinite(f):
                self.sub(key).sub(i).fail("non-finite value")
            out.append(f)
        return out


def _tree_from_doc(tdoc: dict, at: _Check, n_features: int,
                   n_classes: int) -> TreeInstance:
    subspace = at.get(tdoc, "subspace", list)
    cols = []
    for i, c in enumerate(subspace):
        if isinstance(c, bool) or not isinstance(c, int) or not 0 <= c < n_features:
            at.sub("subspace").sub(i).fail("bad feature index")
        cols.append(c)
    if sorted(set(cols)) != cols or not cols:
        at.fail("subspace must be non-empty, sorted, distinct")
    m = len(cols)

    hdocs = at.get(tdoc, "hyperplanes", list)
    n_steps = len(hdocs)
    weights = np.zeros((n_steps, m), dtype=np.float64)
    biases = np.zeros(n_steps, dtype=np.float64)
    for t, h in enumerate(hdocs):
        hc = at.sub("hyperplanes").sub(t)
        weights[t] = hc.float_list(h, "weights", m)
        b = hc.get(h, "bias", (int, float))
        if not np.isfinite(float(b)):
            hc.fail("non-finite bias")
        biases[t] = float(b)

    ldocs = at.get(tdoc, "leaves", list)
    n_leaves = len(ldocs)
    if n_leaves < 1:
        at.fail("tree needs at least one leaf")

    ndocs = at.get(tdoc, "nodes", list)
    n_nodes = len(ndocs)
    if n_nodes != 2 * n_leaves - 1:
        at.fail(f"{n_leaves} leaves need {2 * n_leaves - 1} nodes, "
                f"got {n_nodes}")
    node_step = np.zeros(n_nodes, dtype=np.int32)
    node_child0 = np.full(n_nodes, -1, dtype=np.int32)
    node_child1 = np.full(n_nodes, -1, dtype=np.int32)
    node_leaf = np.full(n_nodes, -1, dtype=np.int32)
    seen_leaf = set()
    referenced = np.zeros(n_nodes, dtype=np.int64)
    for i, nd in enumerate(ndocs):
        nc = at.sub("nodes").sub(i)
        if not isinstance(nd, dict):
            nc.fail("expected an object")
        if "leaf" in nd:
            q = nc.intval(nd, "leaf", 0)
            if q >= n_leaves or q in seen_leaf:
                nc.fail("leaf ordinal out of range or duplicated")
            seen_leaf.add(q)
            node_leaf[i] = q
        else:
            step = nc.intval(nd, "step", 1)
            if step > n_steps:
                nc.fail(f"step {step} exceeds {n_steps} hyperplanes")
            kids = nc.get(nd, "children", list)
            if len(kids) != 2:
                nc.fail("children must be a pair")
            for kid in kids:
                if isinstance(kid, bool) or not isinstance(kid, int) \
                        or not 0 < kid < n_nodes:
                    nc.fail("child id out of range")
                referenced[kid] += 1
            node_step[i] = step
            node_child0[i] = kids[0]
            node_child1[i] = kids[1]
    if len(seen_leaf) != n_leaves:
        at.fail("every leaf ordinal must appear exactly once")
    if referenced[0] != 0 or (referenced[1:] != 1).any():
        at.fail("nodes must form a tree rooted at node 0")

    leaves = []
    for q, ld in enumerate(ldocs):
        lc = at.sub("leaves").sub(q)
        post = np.array(lc.float_list(ld, "posterior", n_classes))
        if (post < 0).any() or abs(float(post.sum()) - 1.0) > 1e-9:
            lc.fail("posterior must be non-negative and sum to 1")
        leaves.append(LeafRecord(
            code="", weight_count=lc.intval(ld, "weight_count", 0),
            state="unknown", node_id=-1, posterior=post))

    tree = TreeInstance(
        n_features=n_features, n_classes=n_classes, n_samples=0,
        subspace=np.array(cols, dtype=np.int64), weights=weights,
        biases=biases, node_step=node_step, node_child0=node_child0,
        node_child1=node_child1, node_leaf=node_leaf, leaves=leaves)

    # re-derive codes and per-leaf node ids from the structure
    for node in range(n_nodes):
        if node_leaf[node] >= 0:
            leaves[int(node_leaf[node])].node_id = node
    for q, code in enumerate(leaf_codes(tree)):
        leaves[q].code = code
    tree.refresh_posterior_matrix()
    return tree


def doc_to_forest(doc) -> Forest:
    at = _Check("$")
    if not isinstance(doc, dict):
        at.fail("model document must be a JSON object")
    fmt = at.get(doc, "format", str)
    if fmt != FORMAT_NAME:
        at.fail(f"not a {FORMAT_NAME} document (format={fmt!r})")
    version = at.intval(doc, "format_version")
    if version != FORMAT_VERSION:
        at.fail(f"unsupported format_version {version}; "
                f"this build reads version {FORMAT_VERSION}")

    n_features = at.intval(doc, "n_features", 1)
    n_classes = at.intval(doc, "n_classes", 1)

    cdoc = at.get(doc, "config", dict)
    cc = at.sub("config")
    subspace = cdoc.get("subspace")
    if not isinstance(subspace, (int, str)) or isinstance(subspace, bool):
        cc.fail("key 'subspace' has wrong type")
    if isinstance(subspace, int) and not 1 <= subspace <= n_features:
        cc.fail(f"subspace size {subspace} not in 1..{n_features}")
    try:
        config = ForestConfig(
            n_trees=cc.intval(cdoc, "n_trees", 1),
            subspace=subspace,
            min_samples_split=cc.intval(cdoc, "min_samples_split", 2),
            master_seed=cc.intval(cdoc, "master_seed", 0),
        )
    except UsageError as exc:
        cc.fail(str(exc))
    totals = at.get(doc, "class_totals", list)
    if len(totals) != n_classes or any(
            isinstance(t, bool) or not isinstance(t, int) or t < 0
            for t in totals):
        at.fail("class_totals must list one non-negative count per class")
    class_names = at.get(doc, "class_names", list, allow_none=True)
    if class_names is not None and len(class_names) != n_classes:
        at.fail("class_names length must equal n_classes")
    feature_names = at.get(doc, "feature_names", list, allow_none=True)
    if feature_names is not None and len(feature_names) != n_features:
        at.fail("feature_names length must equal n_features")
    label_column = at.get(doc, "label_column", str, allow_none=True)

    tdocs = at.get(doc, "trees", list)
    if len(tdocs) != config.n_trees:
        at.fail(f"config says {config.n_trees} trees, found {len(tdocs)}")
    trees = [
        _tree_from_doc(td, at.sub("trees").sub(i), n_features, n_classes)
        for i, td in enumerate(tdocs)
    ]

    return Forest(
        trees=trees, config=config, n_features=n_features,
        n_classes=n_classes,
        class_totals=np.array(totals, dtype=np.int64),
        class_names=None if class_names is None else tuple(class_names),
        feature_names=None if feature_names is None else tuple(feature_names),
        label_column=label_column,
    )


def load_model(path) -> Forest:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read model file: {exc}") from None
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise DataError(
            f"{path}: malformed JSON at line {exc.lineno}, "
            f"column {exc.colno}: {exc.msg}") from None
    return doc_to_forest(doc)
