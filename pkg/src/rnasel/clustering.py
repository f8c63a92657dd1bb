"""Correlation dissimilarity and average-linkage agglomeration.

Samples are compared through d(x, y) = (1 - corr(x, y)) / 2, which maps
Pearson correlation onto [0, 1]. Clusters are merged bottom-up at the
minimal unweighted mean pairwise dissimilarity across all cross-cluster
sample pairs; equal minima are broken by the lexicographically smallest
pair of cluster member labels so results are deterministic.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ._kernels import REL_VAR_EPS
from .errors import ParameterError, ValidationError
from .model import Dendrogram
from .objective import _snap_unit


class ZeroVarianceProfileWarning(UserWarning):
    """A sample profile was constant; its dissimilarities default to 0.5."""


@dataclass(frozen=True)
class DissimilarityMatrix:
    """Symmetric sample-by-sample dissimilarity with zero diagonal."""

    labels: tuple[str, ...]
    d: np.ndarray

    def __post_init__(self):
        labels = tuple(self.labels)
        arr = np.ascontiguousarray(np.asarray(self.d, dtype=np.float64))
        object.__setattr__(self, "labels", labels)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValidationError(f"dissimilarity must be square, got shape {arr.shape}")
        if arr.shape[0] != len(labels):
            raise ValidationError("labels length must match matrix size")
        if len(set(labels)) != len(labels):
            raise ValidationError("duplicate sample labels")
        if len(labels) < 2:
            raise ValidationError("need at least 2 samples")
        if not np.array_equal(arr, arr.T):
            raise ValidationError("dissimilarity matrix must be symmetric")
        if np.any(np.diag(arr) != 0.0):
            raise ValidationError("dissimilarity diagonal must be zero")
        if np.any(arr < 0.0) or np.any(arr > 1.0) or not np.all(np.isfinite(arr)):
            raise ValidationError("dissimilarities must lie in [0, 1]")
        arr.setflags(write=False)
        object.__setattr__(self, "d", arr)

    @property
    def n_samples(self) -> int:
        return len(self.labels)


def dissimilarity(labels, profiles) -> DissimilarityMatrix:
    """(1 - Pearson correlation) / 2 between every pair of sample profiles.

    ``profiles`` is one row per sample over a common feature axis. A
    constant profile has no defined correlation; it is scored 0.5 against
    everything (correlation treated as 0) and a warning is issued.
    """
    labels = tuple(labels)
    try:
        x = np.asarray(profiles, dtype=np.float64)
    except ValueError as exc:
        raise ValidationError(f"profiles must form a rectangular array: {exc}") from None
    if x.ndim != 2 or x.shape[0] != len(labels):
        raise ValidationError(f"profiles must be one row per label, got shape {x.shape}")
    s, length = x.shape
    if s < 2:
        raise ValidationError("need at least 2 samples")
    if length < 2:
        raise ValidationError("profiles need at least 2 entries")
    if not np.all(np.isfinite(x)):
        raise ValidationError("profiles must be finite")

    xc = x - x.mean(axis=1, keepdims=True)
    ss = np.einsum("ij,ij->i", xc, xc)
    msq = np.einsum("ij,ij->i", x, x)
    degenerate = ss <= REL_VAR_EPS * msq
    if np.any(degenerate):
        bad = [labels[i] for i in np.nonzero(degenerate)[0]]
        warnings.warn(
            f"constant profile for {bad}; dissimilarity to other samples set to 0.5",
            ZeroVarianceProfileWarning,
        )
    d = np.zeros((s, s))
    for i in range(s):
        for j in range(i + 1, s):
            if degenerate[i] or degenerate[j]:
                r = 0.0
            else:
                r = float(np.dot(xc[i], xc[j])) / np.sqrt(ss[i] * ss[j])
                r = _snap_unit(min(1.0, max(-1.0, r)))
            d[i, j] = d[j, i] = min(1.0, max(0.0, (1.0 - r) / 2.0))
    return DissimilarityMatrix(labels, d)


def _tie_key(minlab_a: str, minlab_b: str) -> tuple[str, str]:
    return (minlab_a, minlab_b) if minlab_a <= minlab_b else (minlab_b, minlab_a)


def average_linkage(d: DissimilarityMatrix) -> Dendrogram:
    """UPGMA-style agglomeration; merge height = mean cross-cluster distance.

    Cluster-to-cluster distances are maintained with the size-weighted
    update d(A+B, C) = (|A| d(A,C) + |B| d(B,C)) / (|A| + |B|), which equals
    the unweighted mean over all cross pairs.
    """
    labels = d.labels
    s = len(labels)
    size = {i: 1 for i in range(s)}
    minlab = {i: labels[i] for i in range(s)}
    dist: dict[tuple[int, int], float] = {}
    for i in range(s):
        for j in range(i + 1, s):
            dist[(i, j)] = float(d.d[i, j])
    active = list(range(s))
    merges = []
    prev_height = 0.0
    for m in range(s - 1):
        best_val = None
        best_key = None
        best_pair = None
        for xi in range(len(active)):
            for yi in range(xi + 1, len(active)):
                a, b = active[xi], active[yi]
                val = dist[(a, b)]
                key = _tie_key(minlab[a], minlab[b])
                if best_val is None or val < best_val or (val == best_val and key < best_key):
                    best_val, best_key, best_pair = val, key, (a, b)
        a, b = best_pair
        height = best_val
        if height < prev_height - 1e-12:
            raise RuntimeError(
                f"average linkage produced a height inversion: {height} after {prev_height}"
            )
        prev_height = height
        node = s + m
        for c in active:
            if c == a or c == b:
                continue
            dac = dist.pop((min(a, c), max(a, c)))
            dbc = dist.pop((min(b, c), max(b, c)))
            dist[(c, node)] = (size[a] * dac + size[b] * dbc) / (size[a] + size[b])
        dist.pop((a, b))
        size[node] = size[a] + size[b]
        minlab[node] = min(minlab[a], minlab[b])
        left, right = (a, b) if minlab[a] <= minlab[b] else (b, a)
        merges.append((left, right, height))
        active = [c for c in active if c != a and c != b]
        active.append(node)
    return Dendrogram(labels, tuple(merges))


def cut(dend: Dendrogram, k: int) -> list[list[str]]:
    """Partition of the leaf labels obtained by removing the k-1 highest merges.

    Groups are sorted internally and by their first label.
    """
    s = dend.n_leaves
    if not isinstance(k, int) or not 1 <= k <= s:
        raise ParameterError(f"k must be in [1, {s}], got {k!r}")
    groups: dict[int, list[int]] = {i: [i] for i in range(s)}
    for m in range(s - k):
        left, right, _ = dend.merges[m]
        groups[s + m] = groups.pop(left) + groups.pop(right)
    out = [sorted(dend.leaves[i] for i in members) for members in groups.values()]
    out.sort(key=lambda g: g[0])
    return out


def node_heights(dend: Dendrogram) -> list[float]:
    """Merge height per node id (0.0 for leaves)."""
    heights = [0.0] * (2 * dend.n_leaves - 1)
    for m, (_, _, h) in enumerate(dend.merges):
        heights[dend.n_leaves + m] = h
    return heights


def leaf_order(dend: Dendrogram) -> list[int]:
    """Left-to-right leaf indices of the drawn tree (no crossings)."""
    s = dend.n_leaves
    order = []
    stack = [2 * s - 2]
    while stack:
        node = stack.pop()
        if node < s:
            order.append(node)
        else:
            left, right, _ = dend.merges[node - s]
            stack.append(right)
            stack.append(left)
    return order


def _newick_label(label: str) -> str:
    out = label
    for ch in "(),:;'\"[] \t\n":
        out = out.replace(ch, "_")
    return out


def to_newick(dend: Dendrogram) -> str:
    """Newick serialization with branch lengths = height differences."""
    s = dend.n_leaves
    heights = node_heights(dend)

    def render(node: int) -> str:
        if node < s:
            return _newick_label(dend.leaves[node])
        left, right, h = dend.merges[node - s]
        lb = max(h - heights[left], 0.0)
        rb = max(h - heights[right], 0.0)
        return f"({render(left)}:{lb:.12g},{render(right)}:{rb:.12g})"

    return render(2 * s - 2) + ";"


def to_merge_dict(dend: Dendrogram) -> dict:
    """JSON-ready form: leaf labels plus (left, right, height) merge triples."""
    return {
        "leaves": list(dend.leaves),
        "merges": [[left, right, height] for left, right, height in dend.merges],
    }
