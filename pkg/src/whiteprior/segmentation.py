"""Graph-based segmentation and the piecewise-constant target image."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ._validation import check_image, check_same_shape


@dataclass(frozen=True)
class SegmentationParams:
    """Merge threshold scale ``k`` (tau = k / |C|), minimum cluster size and
    Gaussian pre-smoothing std; defaults rescale the usual 8-bit settings to
    unit-range intensities."""

    k_threshold: float = 1.2
    min_size: int = 20
    presmooth_sigma: float = 0.8

    def __post_init__(self):
        if not (math.isfinite(self.k_threshold) and self.k_threshold > 0):
            raise ValueError(f"k_threshold must be positive, got {self.k_threshold}")
        if int(self.min_size) < 1:
            raise ValueError(f"min_size must be >= 1, got {self.min_size}")
        if not (math.isfinite(self.presmooth_sigma) and self.presmooth_sigma >= 0):
            raise ValueError(f"presmooth_sigma must be >= 0, got {self.presmooth_sigma}")


@dataclass(frozen=True)
class SegmentationLabels:
    labels: np.ndarray
    cluster_count: int


class _DisjointSet:
    def __init__(self, n):
        self.parent = list(range(n))
        self.size = [1] * n
        self.internal = [0.0] * n

    def find(self, x):
        parent = self.parent
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def union(self, a, b, weight):
        # caller passes roots; larger component absorbs the smaller one
        if self.size[a] < self.size[b]:
            a, b = b, a
        self.parent[b] = a
        self.size[a] += self.size[b]
        self.internal[a] = weight
        return a


def _grid_edges(image):
    """4-connected edges sorted by (weight, source, target)."""
    h, w = image.shape
    idx = np.arange(h * w).reshape(h, w)
    src = np.concatenate([idx[:, :-1].ravel(), idx[:-1, :].ravel()])
    dst = np.concatenate([idx[:, 1:].ravel(), idx[1:, :].ravel()])
    flat = image.ravel()
    weight = np.abs(flat[src] - flat[dst])
    order = np.lexsort((dst, src, weight))
    return src[order], dst[order], weight[order]


def felzenszwalb_segment(noisy, params=None):
    """Segment ``noisy`` with Felzenszwalb-Huttenlocher merging on a 4-connected grid.

    Edges are processed in ascending weight; two components merge when the
    edge weight does not exceed ``min(Int(C) + k/|C|)`` over both sides.
    A second pass over the same ordering absorbs components smaller than
    ``min_size``. Labels are numbered by first appearance in raster order.
    """
    params = params or SegmentationParams()
    x = check_image(noisy, name="noisy")
    if params.presmooth_sigma > 0:
        x = ndimage.gaussian_filter(x, params.presmooth_sigma, mode="nearest")
    h, w = x.shape
    src, dst, weight = _grid_edges(x)
    src_l, dst_l, weight_l = src.tolist(), dst.tolist(), weight.tolist()
    k = float(params.k_threshold)
    ds = _DisjointSet(h * w)
    find, size, internal = ds.find, ds.size, ds.internal

    for a, b, wt in zip(src_l, dst_l, weight_l):
        ra, rb = find(a), find(b)
        if ra == rb:
            continue
        if wt <= min(internal[ra] + k / size[ra], internal[rb] + k / size[rb]):
            ds.union(ra, rb, wt)

    min_size = int(params.min_size)
    if min_size > 1:
        for a, b, wt in zip(src_l, dst_l, weight_l):
            ra, rb = find(a), find(b)
            if ra != rb and (size[ra] < min_size or size[rb] < min_size):
                ds.union(ra, rb, max(wt, internal[ra], internal[rb]))

    roots = np.fromiter((find(i) for i in range(h * w)), dtype=np.int64, count=h * w)
    _, first, inverse = np.unique(roots, return_index=True, return_inverse=True)
    # renumber so cluster ids follow raster order of first appearance
    rank = np.empty(first.size, dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(first.size)
    labels = rank[inverse.ravel()].reshape(h, w)
    return SegmentationLabels(labels=labels, cluster_count=int(first.size))


def piecewise_target(noisy, labels):
    """Replace every pixel by the mean of ``noisy`` over its cluster."""
    x = check_image(noisy, name="noisy")
    lab = labels.labels if isinstance(labels, SegmentationLabels) else np.asarray(labels)
    check_same_shape(x, lab, ("noisy", "labels"))
    lab = lab.astype(np.int64)
    count = int(lab.max()) + 1
    sums = np.bincount(lab.ravel(), weights=x.ravel(), minlength=count)
    sizes = np.bincount(lab.ravel(), minlength=count)
    means = np.divide(sums, sizes, out=np.zeros(count), where=sizes > 0)
    return means[lab]
