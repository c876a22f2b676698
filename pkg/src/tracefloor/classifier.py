"""Area-of-interest classification: gain-ratio decision trees, bagged.

Trees split on one feature against a threshold (midpoints between
consecutive distinct values), choosing the split that maximizes
information gain normalized by the split information, restricted to
splits with positive gain.  The ensemble trains each tree on an
n-with-replacement bootstrap drawn from a per-tree seeded stream and
predicts by equal-weight majority vote.  Every tie anywhere (vote ties,
leaf majorities, equal-ratio splits) breaks by fixed ordering, so
training and prediction are bit-reproducible, including when trees are
trained in parallel.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .areas import AreaClass
from .errors import (
    DegenerateSplit,
    EmptyCounts,
    EmptyTestSet,
    EmptyTrainingSet,
)
from .grid import (
    FEATURE_NAMES as _FEATURE_ATTRS,
    FeatureVector,
    GridMap,
    GridSpec,
    features,
    merge_grids,
    rasterize,
    spec_for_extent,
)

N_CLASSES = len(AreaClass)
N_FEATURES = 13


@dataclass(frozen=True, slots=True)
class LabeledExample:
    fv: FeatureVector
    label: AreaClass


@dataclass(frozen=True)
class Leaf:
    label: AreaClass
    class_counts: tuple[int, ...]


@dataclass(frozen=True)
class Split:
    feature_index: int
    threshold: float
    left: "TreeNode"  # feature value <= threshold
    right: "TreeNode"


TreeNode = Leaf | Split


@dataclass(frozen=True)
class Ensemble:
    trees: tuple[TreeNode, ...]
    seed: int
    n_trees: int


@dataclass(frozen=True, slots=True)
class TrainParams:
    max_depth: int = 12
    min_leaf: int = 3
    n_trees: int = 15
    seed: int = 0

    def __post_init__(self):
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")


def entropy(class_counts) -> float:
    """Shannon entropy in bits of a class-count vector."""
    total = sum(class_counts)
    if total < 1:
        raise EmptyCounts("entropy needs at least one example")
    h = 0.0
    for count in class_counts:
        if count > 0:
            p = count / total
            h -= p * math.log2(p)
    return h


def gain_ratio(examples, feature_index: int, threshold: float) -> float:
    """Information gain of the binary split divided by its split information."""
    left = [ex for ex in examples if getattr(ex.fv, _FEATURE_ATTRS[feature_index]) <= threshold]
    right = [ex for ex in examples if getattr(ex.fv, _FEATURE_ATTRS[feature_index]) > threshold]
    if not left or not right:
        raise DegenerateSplit(f"split on feature {feature_index} at {threshold} leaves one side empty")
    n = len(examples)

    def counts(part):
        c = [0] * N_CLASSES
        for ex in part:
            c[int(ex.label)] += 1
        return c

    h = entropy(counts(examples))
    h_left = entropy(counts(left))
    h_right = entropy(counts(right))
    gain = h - (len(left) * h_left + len(right) * h_right) / n
    p_left = len(left) / n
    p_right = len(right) / n
    split_info = -(p_left * math.log2(p_left) + p_right * math.log2(p_right))
    return gain / split_info


def _as_matrix(examples) -> tuple[np.ndarray, np.ndarray]:
    X = np.stack([ex.fv.as_array() for ex in examples])
    y = np.asarray([int(ex.label) for ex in examples], dtype=np.int64)
    return X, y


def _entropy_rows(counts: np.ndarray, totals: np.ndarray) -> np.ndarray:
    p = counts / totals[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, -p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return terms.sum(axis=1)


def _best_split(X: np.ndarray, y: np.ndarray, min_leaf: int):
    """Highest gain-ratio (feature, threshold) among positive-gain midpoints.

    Ties break toward the lowest feature index, then the lowest threshold.
    Returns None when no candidate split has positive information gain.
    """
    n = len(y)
    total_counts = np.bincount(y, minlength=N_CLASSES).astype(np.float64)
    h_total = float(_entropy_rows(total_counts[None, :], np.array([float(n)]))[0])
    best = None  # (ratio, feature, threshold)
    onehot = np.zeros((n, N_CLASSES), dtype=np.float64)
    onehot[np.arange(n), y] = 1.0
    for f in range(X.shape[1]):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        prefix = np.cumsum(onehot[order], axis=0)
        cut = np.nonzero(xs[:-1] < xs[1:])[0]  # split between cut and cut+1
        if len(cut) == 0:
            continue
        n_left = (cut + 1).astype(np.float64)
        n_right = n - n_left
        ok = (n_left >= min_leaf) & (n_right >= min_leaf)
        if not ok.any():
            continue
        cut = cut[ok]
        n_left = n_left[ok]
        n_right = n_right[ok]
        left_counts = prefix[cut]
        right_counts = total_counts[None, :] - left_counts
        h_left = _entropy_rows(left_counts, n_left)
        h_right = _entropy_rows(right_counts, n_right)
        gain = h_total - (n_left * h_left + n_right * h_right) / n
        p_left = n_left / n
        p_right = n_right / n
        split_info = -(p_left * np.log2(p_left) + p_right * np.log2(p_right))
        ratio = np.where(gain > 0.0, gain / split_info, -np.inf)
        i = int(np.argmax(ratio))  # first max: lowest threshold wins ties
        if ratio[i] == -np.inf:
            continue
        if best is None or ratio[i] > best[0]:
            threshold = (xs[cut[i]] + xs[cut[i] + 1]) / 2.0
            best = (float(ratio[i]), f, float(threshold))
    return best


def _majority(counts: np.ndarray) -> AreaClass:
    return AreaClass(int(np.argmax(counts)))  # first max: lowest ordinal wins


def _grow(X: np.ndarray, y: np.ndarray, depth: int, params: TrainParams) -> TreeNode:
    counts = np.bincount(y, minlength=N_CLASSES)
    if depth >= params.max_depth or len(y) < 2 * params.min_leaf or np.count_nonzero(counts) <= 1:
        return Leaf(_majority(counts), tuple(int(c) for c in counts))
    best = _best_split(X, y, params.min_leaf)
    if best is None:
        return Leaf(_majority(counts), tuple(int(c) for c in counts))
    _, f, threshold = best
    mask = X[:, f] <= threshold
    return Split(
        f,
        threshold,
        _grow(X[mask], y[mask], depth + 1, params),
        _grow(X[~mask], y[~mask], depth + 1, params),
    )


def train_tree(examples, params: TrainParams | None = None, rng=None) -> TreeNode:
    """Grow one tree; deterministic in the example order and params (rng unused)."""
    if not examples:
        raise EmptyTrainingSet("cannot train on zero examples")
    params = params or TrainParams()
    X, y = _as_matrix(examples)
    return _grow(X, y, 0, params)


def _bootstrap_tree(examples, params: TrainParams, index: int) -> TreeNode:
    rng = np.random.default_rng(np.random.SeedSequence((params.seed, index)))
    idx = rng.integers(0, len(examples), size=len(examples))
    return train_tree([examples[i] for i in idx], params)


def train_bagged(examples, params: TrainParams | None = None, jobs: int = 1) -> Ensemble:
    """Train n_trees bootstrap trees; per-tree seeding makes parallel == serial."""
    if not examples:
        raise EmptyTrainingSet("cannot train on zero examples")
    params = params or TrainParams()
    examples = list(examples)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            trees = list(pool.map(lambda i: _bootstrap_tree(examples, params, i), range(params.n_trees)))
    else:
        trees = [_bootstrap_tree(examples, params, i) for i in range(params.n_trees)]
    return Ensemble(tuple(trees), params.seed, params.n_trees)


def predict_tree(node: TreeNode, fv: FeatureVector) -> AreaClass:
    arr = fv.as_array()
    while isinstance(node, Split):
        node = node.left if arr[node.feature_index] <= node.threshold else node.right
    return node.label


def predict(ensemble: Ensemble, fv: FeatureVector) -> AreaClass:
    """Equal-weight majority vote; ties break to the lowest class ordinal."""
    votes = np.zeros(N_CLASSES, dtype=np.int64)
    for tree in ensemble.trees:
        votes[int(predict_tree(tree, fv))] += 1
    return AreaClass(int(np.argmax(votes)))


def evaluate(ensemble: Ensemble, labeled_blocks) -> tuple[float, list[list[int]]]:
    """Accuracy and the 4x4 confusion matrix (rows true, columns predicted)."""
    labeled_blocks = list(labeled_blocks)
    if not labeled_blocks:
        raise EmptyTestSet("evaluation needs at least one labeled block")
    confusion = [[0] * N_CLASSES for _ in range(N_CLASSES)]
    correct = 0
    for ex in labeled_blocks:
        got = predict(ensemble, ex.fv)
        confusion[int(ex.label)][int(got)] += 1
        if got == ex.label:
            correct += 1
    return correct / len(labeled_blocks), confusion


# -- dataset assembly and the block-size sweep --------------------------------


def dataset_from_grid(grid: GridMap, labels: dict[tuple[int, int], AreaClass]):
    """Labeled feature vectors for every visited block with accel data."""
    examples: list[LabeledExample] = []
    keys: list[tuple[int, int]] = []
    for key in sorted(grid.blocks, key=lambda k: (k[1], k[0])):
        acc = grid.blocks[key]
        if acc.trace_count < 1 or acc.n_accel < 2:
            continue
        label = labels.get(key)
        if label is None:
            continue
        examples.append(LabeledExample(features(acc), label))
        keys.append(key)
    return examples, keys


def split_train_test(examples, test_frac: float = 0.2, seed: int = 0):
    """Stratified by-block split; tiny classes keep at least one test block."""
    rng = np.random.default_rng(np.random.SeedSequence((seed, 17)))
    by_class: dict[int, list[int]] = {}
    for i, ex in enumerate(examples):
        by_class.setdefault(int(ex.label), []).append(i)
    train_idx: list[int] = []
    test_idx: list[int] = []
    for ordinal in sorted(by_class):
        idx = by_class[ordinal]
        perm = rng.permutation(len(idx))
        n_test = round(len(idx) * test_frac)
        if len(idx) >= 2:
            n_test = max(1, n_test)
        chosen = [idx[p] for p in perm]
        test_idx.extend(chosen[:n_test])
        train_idx.extend(chosen[n_test:])
    train_idx.sort()
    test_idx.sort()
    return [examples[i] for i in train_idx], [examples[i] for i in test_idx]


@dataclass(frozen=True)
class SweepPoint:
    block_size: float
    accuracy: float
    confusion: list[list[int]]
    n_blocks: int


def build_grid(corpus, spec: GridSpec, jobs: int = 1) -> GridMap:
    """Rasterize (trace, track) pairs into a fresh grid, optionally in parallel.

    Parallel rasterization goes through private per-worker grids merged in
    a fixed order, so the result is identical to the serial one.
    """
    corpus = list(corpus)
    if jobs > 1 and len(corpus) > 1:
        chunks = [corpus[i::jobs] for i in range(jobs)]

        def work(chunk):
            g = GridMap(spec)
            for trace, track in chunk:
                rasterize(track, trace, g)
            return g

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            grids = list(pool.map(work, chunks))
        out = grids[0]
        for g in grids[1:]:
            out = merge_grids(out, g)
        return out
    out = GridMap(spec)
    for trace, track in corpus:
        rasterize(track, trace, out)
    return out


def block_size_sweep(world, corpus, sizes, train_params: TrainParams | None = None, split_seed: int = 0):
    """Full pipeline accuracy per block size over one corpus.

    `world` supplies the extent and ground-truth labels per grid spec;
    `corpus` is a sequence of (trace, track) pairs.
    """
    if not sizes:
        raise ValueError("sizes must be non-empty")
    train_params = train_params or TrainParams()
    corpus = list(corpus)
    points = []
    for size in sizes:
        spec = spec_for_extent(world.extent, size, margin_blocks=3)
        grid = build_grid(corpus, spec)
        labels = world.labels_for(spec)
        examples, _ = dataset_from_grid(grid, labels)
        train_ex, test_ex = split_train_test(examples, seed=split_seed)
        ensemble = train_bagged(train_ex, train_params)
        accuracy, confusion = evaluate(ensemble, test_ex)
        points.append(SweepPoint(size, accuracy, confusion, len(examples)))
    return points


# -- model serialization ------------------------------------------------------


def _node_to_doc(node: TreeNode):
    if isinstance(node, Leaf):
        return {"leaf": {"label": node.label.label, "counts": list(node.class_counts)}}
    return {
        "split": {
            "feature": node.feature_index,
            "threshold": node.threshold,
            "left": _node_to_doc(node.left),
            "right": _node_to_doc(node.right),
        }
    }


def _node_from_doc(doc) -> TreeNode:
    if "leaf" in doc:
        leaf = doc["leaf"]
        return Leaf(AreaClass.from_label(leaf["label"]), tuple(leaf["counts"]))
    split = doc["split"]
    return Split(
        split["feature"],
        split["threshold"],
        _node_from_doc(split["left"]),
        _node_from_doc(split["right"]),
    )


def ensemble_to_json(ensemble: Ensemble) -> str:
    doc = {
        "seed": ensemble.seed,
        "n_trees": ensemble.n_trees,
        "trees": [_node_to_doc(t) for t in ensemble.trees],
    }
    return json.dumps(doc, indent=2) + "\n"


def ensemble_from_json(text: str) -> Ensemble:
    doc = json.loads(text)
    return Ensemble(tuple(_node_from_doc(t) for t in doc["trees"]), doc["seed"], doc["n_trees"])
