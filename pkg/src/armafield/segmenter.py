"""Block-wise ARMA features and k-means texture segmentation."""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from armafield.core import ModelOrder, as_field, zero_mean
from armafield.errors import ArmaFieldError, DegenerateFieldError
from armafield.ywls import ArmaFit, estimate

DEFAULT_BLOCK = 16
DEFAULT_CLASSES = 3
DEGENERATE_RATIO = 1e-10


def default_block_order() -> ModelOrder:
    """AR(2, 2) with K1 = K2 = 3: 144 regression rows for 8 unknowns in a 16x16 block.

    Orders with both AR and MA terms are not identifiable on white-noise
    blocks (any A = B fits), which scatters their features along the a = b
    direction and breaks the clustering.
    """
    return ModelOrder(2, 2, 0, 0, 3, 3)


@dataclass
class BlockFeatures:
    grid_h: int
    grid_w: int
    block_size: int
    stride: int
    features: np.ndarray  # (grid_h * grid_w, dim), row-major over the block grid
    valid: np.ndarray  # (grid_h * grid_w,) bool
    fits: List[Optional[ArmaFit]] = field(default_factory=list, repr=False)
    order: Optional[ModelOrder] = None

    @property
    def n_valid(self) -> int:
        return int(self.valid.sum())


@dataclass
class SegmentationMap:
    """k-means output. Invalid blocks carry the reserved label ``n_classes``."""

    block_labels: np.ndarray
    pixel_labels: np.ndarray
    centroids: np.ndarray
    inertia: float
    iterations: int
    n_classes: int
    inertia_history: List[float] = field(default_factory=list)

    def counts(self) -> List[int]:
        return [int(np.sum(self.block_labels == c)) for c in range(self.n_classes)]


def block_origins(size: int, block_size: int, stride: int) -> List[int]:
    if size < block_size:
        return []
    return list(range(0, size - block_size + 1, stride))


def _fit_block(block, order, floor, include_sigma):
    centred, _ = zero_mean(block)
    if np.var(centred) < floor:
        return None
    try:
        fit = estimate(centred, order)
    except ArmaFieldError:
        return None
    feat = fit.theta
    if include_sigma:
        feat = np.append(feat, np.log(fit.sigma2_hat))
    return fit, feat


def extract_features(
    field,
    order: Optional[ModelOrder] = None,
    block_size: int = DEFAULT_BLOCK,
    *,
    stride: Optional[int] = None,
    include_sigma: bool = True,
    workers: int = 1,
) -> BlockFeatures:
    """Fit an ARMA model to every block and collect the packed parameter vectors.

    Blocks tile the field from the top-left corner with step ``stride``
    (default: ``block_size``, i.e. no overlap); trailing partial blocks are
    dropped. Each block is centred before fitting. A block is marked invalid,
    with an all-zero feature vector, when its variance is below ``1e-10``
    times the global variance or when its fit fails.
    """
    x = as_field(field)
    order = order or default_block_order()
    stride = stride or block_size
    need = order.min_size
    if block_size < need[0] or block_size < need[1]:
        raise ValueError(
            f"block size {block_size} is below the {need[0]}x{need[1]} minimum of {order}"
        )
    if stride < 1:
        raise ValueError("stride must be positive")
    rows = block_origins(x.shape[0], block_size, stride)
    cols = block_origins(x.shape[1], block_size, stride)
    floor = DEGENERATE_RATIO * float(np.var(x))
    blocks = [x[r:r + block_size, c:c + block_size] for r in rows for c in cols]

    def job(block):
        return _fit_block(block, order, floor, include_sigma)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, blocks))
    else:
        results = [job(b) for b in blocks]

    dim = order.n_theta + (1 if include_sigma else 0)
    features = np.zeros((len(blocks), dim))
    valid = np.zeros(len(blocks), dtype=bool)
    fits: List[Optional[ArmaFit]] = []
    for idx, res in enumerate(results):
        if res is None:
            fits.append(None)
            continue
        fits.append(res[0])
        features[idx] = res[1]
        valid[idx] = True
    return BlockFeatures(len(rows), len(cols), block_size, stride, features, valid, fits, order)


def standardize(X: np.ndarray):
    """Per-column ``(X - mean) / std``; constant columns keep unit scale."""
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    return (X - mean) / std, mean, std


def _sq_dists(X, C):
    return ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)


def kmeans_plusplus(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = ((X - X[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            # every point coincides with a chosen centre
            idx = next(i for i in range(n) if i not in chosen)
        chosen.append(idx)
        d2 = np.minimum(d2, ((X - X[idx]) ** 2).sum(axis=1))
    return X[chosen].copy()


def lloyd(X: np.ndarray, centroids: np.ndarray, max_iter: int = 100, tol: float = 1e-6):
    """Lloyd iterations from the given centres.

    Returns ``(labels, centroids, inertia_history)``. The inertia is recorded
    after each assignment step and must never increase.
    """
    C = centroids.copy()
    k = C.shape[0]
    history: List[float] = []
    labels = None
    for _ in range(max_iter):
        d = _sq_dists(X, C)
        labels = np.argmin(d, axis=1)  # first minimum, i.e. lowest cluster index on ties
        cost = d[np.arange(len(X)), labels]
        for j in range(k):
            if np.any(labels == j):
                continue
            sizes = np.bincount(labels, minlength=k)
            movable = np.flatnonzero(sizes[labels] > 1)
            far = movable[np.argmax(cost[movable])]
            labels[far] = j
            cost[far] = 0.0
        inertia = float(cost.sum())
        if history and inertia > history[-1] * (1 + 1e-12) + 1e-300:
            raise AssertionError(f"k-means inertia increased: {history[-1]!r} -> {inertia!r}")
        history.append(inertia)
        for j in range(k):
            C[j] = X[labels == j].mean(axis=0)
        if len(history) > 1:
            prev = history[-2]
            if prev == 0 or abs(prev - inertia) / prev < tol:
                break
    return labels, C, history


def kmeans(
    features: BlockFeatures,
    n_classes: int = DEFAULT_CLASSES,
    seed: int = 0,
    *,
    max_iter: int = 100,
    tol: float = 1e-6,
) -> SegmentationMap:
    """Cluster the valid block features into ``n_classes`` groups.

    Features are standardized per dimension over the valid blocks, seeded by
    k-means++ from ``numpy.random.default_rng(seed)`` and refined by Lloyd
    iterations until the relative inertia change drops below ``tol``.
    Centroids are reported in the original feature units.
    """
    X = features.features[features.valid]
    if n_classes < 1:
        raise ValueError("need at least one class")
    if X.shape[0] < n_classes:
        raise DegenerateFieldError(f"only {X.shape[0]} valid blocks for {n_classes} classes")
    Z, mean, std = standardize(X)
    rng = np.random.default_rng(seed)
    labels, C, history = lloyd(Z, kmeans_plusplus(Z, n_classes, rng), max_iter, tol)
    block_labels = np.full(features.valid.shape, n_classes, dtype=np.int64)
    block_labels[features.valid] = labels
    grid = block_labels.reshape(features.grid_h, features.grid_w)
    return SegmentationMap(
        block_labels=grid,
        pixel_labels=np.empty((0, 0), dtype=np.int64),
        centroids=C * std + mean,
        inertia=history[-1],
        iterations=len(history),
        n_classes=n_classes,
        inertia_history=history,
    )


def pixel_map(block_labels: np.ndarray, shape, block_size: int, stride: int) -> np.ndarray:
    """Give every pixel the label of the block whose centre is nearest per axis."""
    def axis_index(size, count):
        pos = np.arange(size) + 0.5 - block_size / 2
        return np.clip(np.floor(pos / stride + 0.5).astype(int), 0, count - 1)

    gh, gw = block_labels.shape
    return block_labels[np.ix_(axis_index(shape[0], gh), axis_index(shape[1], gw))]


def segment(
    field,
    order: Optional[ModelOrder] = None,
    block_size: int = DEFAULT_BLOCK,
    n_classes: int = DEFAULT_CLASSES,
    seed: int = 0,
    *,
    stride: Optional[int] = None,
    include_sigma: bool = True,
    workers: int = 1,
):
    """Feature extraction plus k-means; returns ``(SegmentationMap, BlockFeatures)``."""
    x = as_field(field)
    feats = extract_features(x, order, block_size, stride=stride,
                             include_sigma=include_sigma, workers=workers)
    seg = kmeans(feats, n_classes, seed)
    seg.pixel_labels = pixel_map(seg.block_labels, x.shape, block_size, feats.stride)
    return seg, feats


def match_labels(pred, truth, n_classes: Optional[int] = None, invalid: Optional[int] = None):
    """Best agreement over relabelings of ``pred``.

    Returns ``(accuracy, permutation, confusion)`` where ``permutation[p]`` is
    the truth label assigned to predicted label ``p`` and ``confusion[t, p]``
    counts blocks. Entries equal to ``invalid`` in ``pred`` are skipped.
    """
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch: prediction {pred.shape}, truth {truth.shape}")
    keep = np.ones(pred.shape, dtype=bool) if invalid is None else pred != invalid
    p = pred[keep].astype(int)
    t = truth[keep].astype(int)
    if p.size == 0:
        raise ValueError("no valid blocks to compare")
    if (p < 0).any() or (t < 0).any():
        raise ValueError("labels must be non-negative")
    k = max(int(p.max()) + 1, int(t.max()) + 1, n_classes or 0)
    if k > 8:
        raise ValueError(f"exhaustive matching over {k}! relabelings is not supported")
    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (t, p), 1)
    best, best_perm = -1, None
    for perm in itertools.permutations(range(k)):
        hits = sum(confusion[perm[c], c] for c in range(k))
        if hits > best:
            best, best_perm = hits, perm
    return best / p.size, list(best_perm), confusion


def label_accuracy(pred: SegmentationMap, truth) -> float:
    """Fraction of valid blocks labelled correctly under the best relabeling."""
    acc, _, _ = match_labels(pred.block_labels, truth, pred.n_classes, invalid=pred.n_classes)
    return acc
