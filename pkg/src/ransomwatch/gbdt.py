"""Gradient-boosted regression trees built from scratch.

Split finding minimizes the squared-error objective over candidate
(feature, threshold) pairs, evaluated through its sum-of-squares
decomposition with one sorted sweep per feature. Boosting fits each tree to
the negative gradient of the logistic loss; leaf weights take the
regularized Newton optimum -G/(H+lambda), and split gains at or below gamma
are pruned to leaves.
"""
from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .graph import DEFAULT_EMBEDDING_DIMS, DEFAULT_HASH_SEED

MODEL_MAGIC = b"RWF1"
MODEL_VERSION = 1


class NoValidSplit(ValueError):
    """All rows identical on every candidate feature."""


class SingleClass(ValueError):
    """Training needs both classes present."""


class WidthMismatch(ValueError):
    """Feature row width differs from the training width."""


class CorruptModel(ValueError):
    """Model file failed magic, version, or checksum validation."""


def split_sse_direct(values: np.ndarray, response: np.ndarray, threshold: float) -> float:
    """Squared error of a split evaluated literally: both sides' deviation sums."""
    mask = values <= threshold
    left, right = response[mask], response[~mask]
    if len(left) == 0 or len(right) == 0:
        return math.inf
    return float(((left - left.mean()) ** 2).sum() + ((right - right.mean()) ** 2).sum())


def split_sse_decomposed(values: np.ndarray, response: np.ndarray, threshold: float) -> float:
    """The same objective via sum(y^2) - (sum_L y)^2/m_L - (sum_R y)^2/m_R."""
    mask = values <= threshold
    m_left = int(mask.sum())
    m_right = len(values) - m_left
    if m_left == 0 or m_right == 0:
        return math.inf
    s_left = float(response[mask].sum())
    s_right = float(response.sum()) - s_left
    return float((response**2).sum()) - s_left * s_left / m_left - s_right * s_right / m_right


@dataclass(frozen=True, slots=True)
class BestSplit:
    feature: int
    threshold: float
    gain: float


def best_split(
    X: np.ndarray,
    response: np.ndarray,
    min_leaf: int = 1,
    feature_indices: Optional[Sequence[int]] = None,
) -> BestSplit:
    """Best (feature, threshold) by squared-error reduction, one sweep per feature.

    Thresholds are midpoints of adjacent sorted values; ties break toward the
    lower feature index, then the lower threshold. The gain is the parent SSE
    minus the children SSE (non-negative; zero for e.g. constant responses).
    Raises NoValidSplit when no feature separates the rows.
    """
    m = X.shape[0]
    feats = np.arange(X.shape[1]) if feature_indices is None else np.asarray(feature_indices)
    if m < 2 or len(feats) == 0 or m < 2 * min_leaf:
        raise NoValidSplit("not enough rows or features")
    cols = X[:, feats]
    order = np.argsort(cols, axis=0, kind="stable")
    xs = np.take_along_axis(cols, order, axis=0)
    ys = response[order]
    csum = np.cumsum(ys, axis=0)
    total = float(response.sum())
    left_counts = np.arange(1, m, dtype=np.float64)[:, None]
    right_counts = m - left_counts
    left_sums = csum[:-1, :]
    right_sums = total - left_sums
    term = left_sums**2 / left_counts + right_sums**2 / right_counts
    valid = xs[1:, :] > xs[:-1, :]
    if min_leaf > 1:
        ok = (left_counts >= min_leaf) & (right_counts >= min_leaf)
        valid = valid & ok
    term = np.where(valid, term, -np.inf)
    flat = np.ascontiguousarray(term.T).reshape(-1)
    best = int(np.argmax(flat))
    if flat[best] == -np.inf:
        raise NoValidSplit("rows are identical on all candidate features")
    col, pos = divmod(best, m - 1)
    lo, hi = float(xs[pos, col]), float(xs[pos + 1, col])
    threshold = lo + (hi - lo) / 2.0
    if not (lo <= threshold < hi):
        threshold = lo
    gain = float(flat[best]) - total * total / m
    return BestSplit(int(feats[col]), threshold, gain)


@dataclass(frozen=True)
class TreeNode:
    """Internal node (feature, threshold, children) or leaf (weight).

    Internal nodes route a row left when x[feature] <= threshold.
    """

    feature: int = -1
    threshold: float = 0.0
    weight: float = 0.0
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def node_count(self) -> int:
        if self.is_leaf:
            return 1
        return 1 + self.left.node_count() + self.right.node_count()


@dataclass(frozen=True, slots=True)
class TreeParams:
    max_depth: int = 4
    min_leaf: int = 1
    gamma: float = 0.0
    lambda_: float = 1.0


def grow_tree(
    X: np.ndarray,
    grad: np.ndarray,
    hess: np.ndarray,
    params: TreeParams = TreeParams(),
    feature_indices: Optional[Sequence[int]] = None,
) -> TreeNode:
    """Recursive tree generation on gradient statistics.

    Stopping rules: identical responses (pure node), no usable feature or
    identical rows, depth/min-leaf limits, and split gain <= gamma. Leaf
    weight is the regularized optimum -G/(H+lambda); with unit hessians and
    lambda=0 that reduces to the mean residual.
    """
    feats = tuple(range(X.shape[1])) if feature_indices is None else tuple(feature_indices)

    def leaf(idx: np.ndarray) -> TreeNode:
        g, h = float(grad[idx].sum()), float(hess[idx].sum())
        return TreeNode(weight=-g / (h + params.lambda_))

    def build(idx: np.ndarray, depth: int) -> TreeNode:
        response = -grad[idx]
        if float(response.max()) == float(response.min()):
            return leaf(idx)
        if depth >= params.max_depth or not feats:
            return leaf(idx)
        try:
            split = best_split(X[idx], response, params.min_leaf, feats)
        except NoValidSplit:
            return leaf(idx)
        if split.gain <= params.gamma:
            return leaf(idx)
        mask = X[idx, split.feature] <= split.threshold
        return TreeNode(
            feature=split.feature,
            threshold=split.threshold,
            left=build(idx[mask], depth + 1),
            right=build(idx[~mask], depth + 1),
        )

    return build(np.arange(X.shape[0]), 0)


def _flatten(tree: TreeNode) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    features: list[int] = []
    values: list[float] = []
    lefts: list[int] = []
    rights: list[int] = []

    def visit(node: TreeNode) -> int:
        slot = len(features)
        features.append(-1 if node.is_leaf else node.feature)
        values.append(node.weight if node.is_leaf else node.threshold)
        lefts.append(-1)
        rights.append(-1)
        if not node.is_leaf:
            lefts[slot] = visit(node.left)
            rights[slot] = visit(node.right)
        return slot

    visit(tree)
    return (
        np.asarray(features, dtype=np.int32),
        np.asarray(values, dtype=np.float64),
        np.asarray(lefts, dtype=np.int32),
        np.asarray(rights, dtype=np.int32),
    )


def _apply_flat(flat, X: np.ndarray) -> np.ndarray:
    features, values, lefts, rights = flat
    pos = np.zeros(X.shape[0], dtype=np.int64)
    rows = np.arange(X.shape[0])
    while True:
        feat = features[pos]
        internal = feat >= 0
        if not internal.any():
            break
        safe_feat = np.where(internal, feat, 0)
        go_left = X[rows, safe_feat] <= values[pos]
        nxt = np.where(go_left, lefts[pos], rights[pos])
        pos = np.where(internal, nxt, pos)
    return values[pos]


def apply_tree(tree: TreeNode, X: np.ndarray) -> np.ndarray:
    """Leaf weights reached by each row."""
    return _apply_flat(_flatten(tree), X)


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def log_loss(y: np.ndarray, prob: np.ndarray) -> float:
    p = np.clip(prob, 1e-12, 1.0 - 1e-12)
    return float(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)).mean())


@dataclass(frozen=True, slots=True)
class BoostParams:
    n_trees: int = 100
    eta: float = 0.1
    max_depth: int = 4
    min_leaf: int = 5  # keeps trees off single-window hash-noise splits
    gamma: float = 0.0
    lambda_: float = 1.0


@dataclass
class BoostedForest:
    """Trained ensemble plus the embedding contract it was fitted against.

    Prediction is sigmoid(base_score + eta * sum of tree outputs). The hash
    seed and embedding width travel with the model so feature rows built at
    inference time match the training layout.
    """

    trees: tuple[TreeNode, ...]
    eta: float
    gamma: float
    lambda_: float
    base_score: float
    n_features: int
    dims: int = DEFAULT_EMBEDDING_DIMS
    hash_seed: int = DEFAULT_HASH_SEED
    training_loss: tuple[float, ...] = field(default=(), repr=False, compare=False)

    @cached_property
    def _flat_trees(self):
        return [_flatten(t) for t in self.trees]

    def _check_width(self, width: int) -> None:
        if width != self.n_features:
            raise WidthMismatch(f"expected {self.n_features} features, got {width}")

    def margin(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        self._check_width(X.shape[1])
        z = np.full(X.shape[0], self.base_score, dtype=np.float64)
        for flat in self._flat_trees:
            z += self.eta * _apply_flat(flat, X)
        return z

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Probabilities for a batch of rows."""
        return _sigmoid(self.margin(X))

    def predict_row(self, row: Union[np.ndarray, Sequence[float]]) -> float:
        """Probability for a single row; the low-latency path."""
        row = np.asarray(row, dtype=np.float64)
        self._check_width(row.shape[-1])
        z = self.base_score
        for tree in self.trees:
            node = tree
            while not node.is_leaf:
                node = node.left if row[node.feature] <= node.threshold else node.right
            z += self.eta * node.weight
        return float(_sigmoid(z))

    # -- serialization ------------------------------------------------------

    def to_bytes(self) -> bytes:
        out = bytearray()
        out += MODEL_MAGIC
        out += struct.pack("<B", MODEL_VERSION)
        out += struct.pack(
            "<HHQH4d",
            self.n_features,
            self.dims,
            self.hash_seed,
            len(self.trees),
            self.eta,
            self.base_score,
            self.gamma,
            self.lambda_,
        )
        for flat in (_flatten(t) for t in self.trees):
            features, values, lefts, rights = flat
            out += struct.pack("<H", len(features))
            for i in range(len(features)):
                kind = 1 if features[i] < 0 else 0
                out += struct.pack(
                    "<BHdhh",
                    kind,
                    max(int(features[i]), 0),
                    float(values[i]),
                    int(lefts[i]),
                    int(rights[i]),
                )
        out += hashlib.sha256(bytes(out)).digest()
        return bytes(out)

    @classmethod
    def from_bytes(cls, blob: bytes) -> "BoostedForest":
        if len(blob) < 4 + 1 + 32:
            raise CorruptModel("model file truncated")
        body, digest = blob[:-32], blob[-32:]
        if body[:4] != MODEL_MAGIC:
            raise CorruptModel("not a ransomwatch model file")
        version = body[4]
        if version != MODEL_VERSION:
            raise CorruptModel(f"unsupported model version {version}; this build reads version {MODEL_VERSION}")
        if hashlib.sha256(body).digest() != digest:
            raise CorruptModel("checksum mismatch; file corrupt or truncated")
        offset = 5
        n_features, dims, hash_seed, n_trees, eta, base, gamma, lambda_ = struct.unpack_from(
            "<HHQH4d", body, offset
        )
        offset += struct.calcsize("<HHQH4d")
        trees = []
        node_size = struct.calcsize("<BHdhh")
        for _ in range(n_trees):
            (n_nodes,) = struct.unpack_from("<H", body, offset)
            offset += 2
            rows = []
            for _ in range(n_nodes):
                rows.append(struct.unpack_from("<BHdhh", body, offset))
                offset += node_size

            def rebuild(slot: int) -> TreeNode:
                kind, feature, value, left, right = rows[slot]
                if kind == 1:
                    return TreeNode(weight=value)
                return TreeNode(feature=feature, threshold=value, left=rebuild(left), right=rebuild(right))

            trees.append(rebuild(0))
        if offset != len(body):
            raise CorruptModel("trailing bytes after tree data")
        return cls(tuple(trees), eta, gamma, lambda_, base, n_features, dims, hash_seed)

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path: Union[str, Path]) -> "BoostedForest":
        return cls.from_bytes(Path(path).read_bytes())


def fit(
    X: np.ndarray,
    y: np.ndarray,
    params: BoostParams = BoostParams(),
    dims: int = DEFAULT_EMBEDDING_DIMS,
    hash_seed: int = DEFAULT_HASH_SEED,
) -> BoostedForest:
    """Boost n_trees regression trees on logistic-loss gradient statistics.

    Deterministic given data and parameters. Raises SingleClass unless both
    labels occur.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be 2-D with one label per row")
    pos = float(y.mean())
    if pos == 0.0 or pos == 1.0:
        raise SingleClass("training labels contain a single class")
    base = math.log(pos / (1.0 - pos))
    tree_params = TreeParams(params.max_depth, params.min_leaf, params.gamma, params.lambda_)
    margin = np.full(X.shape[0], base, dtype=np.float64)
    trees: list[TreeNode] = []
    losses: list[float] = []
    for _ in range(params.n_trees):
        prob = _sigmoid(margin)
        grad = prob - y
        hess = np.maximum(prob * (1.0 - prob), 1e-16)
        tree = grow_tree(X, grad, hess, tree_params)
        trees.append(tree)
        margin += params.eta * apply_tree(tree, X)
        losses.append(log_loss(y, _sigmoid(margin)))
    return BoostedForest(
        trees=tuple(trees),
        eta=params.eta,
        gamma=params.gamma,
        lambda_=params.lambda_,
        base_score=base,
        n_features=X.shape[1],
        dims=dims,
        hash_seed=hash_seed,
        training_loss=tuple(losses),
    )
