"""Greedy binary decision trees on numeric feature matrices.

Two growth engines share one flat ``Tree`` representation:

* ``grow_tree`` builds classification trees with exact splits (Gini
  criterion, thresholds at midpoints between consecutive distinct sorted
  values), optionally sampling candidate features per split.  Used by the
  bagged forest.
* ``grow_tree_hist`` builds regression trees for Newton boosting on
  quantile-binned columns (at most 256 bins; exact whenever a column has no
  more distinct values than bins), split on a second-order gain with an L2
  leaf penalty.

Both engines route with ``x <= threshold`` goes left, evaluate candidate
features in ascending index order and resolve gain ties to the first
(feature, boundary) found, so identical inputs always yield identical trees.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GAIN_TOL = 1e-12
MAX_BINS = 256


@dataclass
class Tree:
    """Flat array representation; feature[i] == -1 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # (n_nodes, n_outputs)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row."""
        node = np.zeros(len(X), dtype=np.int32)
        while True:
            at_internal = self.feature[node] >= 0
            if not at_internal.any():
                return node
            rows = np.flatnonzero(at_internal)
            nid = node[rows]
            go_left = X[rows, self.feature[nid]] <= self.threshold[nid]
            node[rows] = np.where(go_left, self.left[nid], self.right[nid])

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]


# ---------------------------------------------------------------------------
# exact-split classification engine

def _split_gini(Xsub: np.ndarray, onehot: np.ndarray, min_samples_leaf: int):
    """Best (feature, threshold, impurity decrease) under the Gini criterion,
    or None when no admissible split improves the node."""
    n = Xsub.shape[0]
    if n < 2 * min_samples_leaf:
        return None
    order = np.argsort(Xsub, axis=0, kind="stable")
    Xs = np.take_along_axis(Xsub, order, axis=0)
    cum = np.cumsum(onehot[order], axis=0)           # (n, k, C)
    totals = cum[-1]                                 # (k, C), equal across k
    n_left = np.arange(1, n, dtype=float)[:, None]
    n_right = n - n_left
    sumsq_left = np.sum(cum[:-1] ** 2, axis=2)
    sumsq_right = np.sum((totals[None, :, :] - cum[:-1]) ** 2, axis=2)
    score = sumsq_left / n_left + sumsq_right / n_right
    valid = ((Xs[1:] > Xs[:-1])
             & (n_left >= min_samples_leaf)
             & (n_right >= min_samples_leaf))
    score = np.where(valid, score, -np.inf)
    flat = score.T.ravel()  # feature-major: argmax favors lower feature index
    best = int(np.argmax(flat))
    if not np.isfinite(flat[best]):
        return None
    feat = best // (n - 1)
    boundary = best % (n - 1)
    parent = float(np.sum(totals[0] ** 2)) / n
    gain = (flat[best] - parent) / n  # Gini impurity decrease
    if gain <= GAIN_TOL:
        return None
    lo = Xs[boundary, feat]
    hi = Xs[boundary + 1, feat]
    threshold = lo + 0.5 * (hi - lo)
    if threshold >= hi:  # adjacent floats: keep the threshold strictly below hi
        threshold = lo
    return feat, float(threshold), gain


def grow_tree(
    X: np.ndarray,
    y_codes: np.ndarray,
    n_classes: int,
    *,
    max_depth: int | None = None,
    min_samples_leaf: int = 1,
    max_features: int | None = None,
    rng: np.random.Generator | None = None,
) -> Tree:
    """Grow one classification tree depth-first (left child first).

    Leaves store the class distribution of their rows.  max_features, if set,
    samples that many candidate features per split from rng.
    """
    n, n_features = X.shape
    onehot = np.equal(y_codes[:, None], np.arange(n_classes)[None, :]).astype(float)
    features: list[int] = []
    thresholds: list[float] = []
    lefts: list[int] = []
    rights: list[int] = []
    values: list[np.ndarray] = []

    # stack holds (row indices, depth, parent node, is left child)
    stack: list[tuple[np.ndarray, int, int, bool]] = [
        (np.arange(n, dtype=np.intp), 0, -1, False)]
    while stack:
        rows, depth, parent, is_left = stack.pop()
        node_id = len(features)
        if parent >= 0:
            if is_left:
                lefts[parent] = node_id
            else:
                rights[parent] = node_id
        features.append(-1)
        thresholds.append(0.0)
        lefts.append(-1)
        rights.append(-1)

        counts = onehot[rows].sum(axis=0)
        values.append(counts / rows.size)
        pure = counts.max() == rows.size
        if pure or (max_depth is not None and depth >= max_depth) \
                or rows.size < 2 * min_samples_leaf:
            continue

        if max_features is not None and max_features < n_features:
            cand = np.sort(rng.choice(n_features, size=max_features,
                                      replace=False))
        else:
            cand = np.arange(n_features)
        split = _split_gini(X[np.ix_(rows, cand)], onehot[rows],
                            min_samples_leaf)
        if split is None:
            continue
        feat_local, threshold, _ = split
        feat = int(cand[feat_local])
        go_left = X[rows, feat] <= threshold
        features[node_id] = feat
        thresholds[node_id] = threshold
        # push right first so the left child is processed (and numbered) next
        stack.append((rows[~go_left], depth + 1, node_id, False))
        stack.append((rows[go_left], depth + 1, node_id, True))

    return Tree(
        feature=np.array(features, dtype=np.int32),
        threshold=np.array(thresholds, dtype=np.float64),
        left=np.array(lefts, dtype=np.int32),
        right=np.array(rights, dtype=np.int32),
        value=np.vstack(values),
    )


# ---------------------------------------------------------------------------
# binned Newton engine

@dataclass
class BinnedColumns:
    """Per-column quantile bin codes plus the float thresholds that separate
    bin k from k+1 (midpoint between the bin's upper value and the next
    distinct training value, so float routing reproduces the bin routing)."""

    codes: np.ndarray            # (n, f) int32 bin index per value
    thresholds: list[np.ndarray]  # per column, length n_bins (last entry inf)

    @property
    def n_bins(self) -> np.ndarray:
        return np.array([len(t) for t in self.thresholds])


def bin_columns(X: np.ndarray, max_bins: int = MAX_BINS) -> BinnedColumns:
    """Quantile binning; columns with at most max_bins distinct values keep
    one bin per distinct value, making the binned splits exact."""
    n, f = X.shape
    codes = np.empty((n, f), dtype=np.int32)
    thresholds: list[np.ndarray] = []
    for j in range(f):
        col = X[:, j]
        uniq = np.unique(col)
        if len(uniq) > max_bins:
            qs = np.quantile(col, np.linspace(0.0, 1.0, max_bins + 1)[1:],
                             method="lower")
            uppers = np.unique(qs)
            if uppers[-1] != uniq[-1]:
                uppers = np.append(uppers, uniq[-1])
        else:
            uppers = uniq
        codes[:, j] = np.searchsorted(uppers, col, side="left")
        nxt_idx = np.minimum(np.searchsorted(uniq, uppers, side="right"),
                             len(uniq) - 1)
        nxt = uniq[nxt_idx]
        thr = uppers + 0.5 * (nxt - uppers)
        thr = np.where(thr >= nxt, uppers, thr)
        thr[-1] = np.inf
        thresholds.append(thr.astype(np.float64))
    return BinnedColumns(codes=codes, thresholds=thresholds)


def _segmented_cumsum(values: np.ndarray, starts: np.ndarray,
                      nb: np.ndarray) -> np.ndarray:
    """Cumulative sums along the last axis, restarting at each segment."""
    total = np.cumsum(values, axis=-1)
    base = np.zeros(values.shape[:-1] + (len(starts),))
    base[..., 1:] = total[..., starts[1:] - 1]
    return total - np.repeat(base, nb, axis=-1)


def grow_tree_hist(
    binned: BinnedColumns,
    gradients: np.ndarray,
    hessians: np.ndarray,
    *,
    l2: float = 1.0,
    max_depth: int | None = 6,
    min_samples_leaf: int = 1,
) -> Tree:
    """Grow one Newton regression tree level-wise on binned columns.

    Per level, one histogram accumulation covers every open node; splits
    maximize GL^2/(HL+l2) + GR^2/(HR+l2) - G^2/(H+l2) and leaves store
    -G/(H+l2).
    """
    codes = binned.codes
    n, f = codes.shape
    nb = binned.n_bins
    col_starts = np.concatenate([[0], np.cumsum(nb)])[:-1].astype(np.int64)
    seg_ends = np.cumsum(nb) - 1
    total_bins = int(nb.sum())
    offset_codes = codes + col_starts[None, :]
    rep_g = np.repeat(gradients, f)
    rep_h = np.repeat(hessians, f)

    # boundary bookkeeping over the concatenated per-column bin axis
    last_bin = np.zeros(total_bins, dtype=bool)
    last_bin[seg_ends] = True
    col_of_bin = np.repeat(np.arange(f), nb)
    bin_within = np.arange(total_bins) - col_starts[col_of_bin]

    features = [-1]
    thresholds = [0.0]
    lefts = [-1]
    rights = [-1]
    values: list[float] = [0.0]

    node_of_row = np.zeros(n, dtype=np.int64)   # frontier slot per row
    frontier = [0]                              # node ids of the open level
    depth = 0
    while frontier and (max_depth is None or depth <= max_depth):
        n_slots = len(frontier)
        node_n = np.bincount(node_of_row, minlength=n_slots).astype(float)
        node_g = np.bincount(node_of_row, weights=gradients, minlength=n_slots)
        node_h = np.bincount(node_of_row, weights=hessians, minlength=n_slots)
        for slot, nid in enumerate(frontier):
            values[nid] = -node_g[slot] / (node_h[slot] + l2)
        if max_depth is not None and depth == max_depth:
            break

        flat = (node_of_row * total_bins)[:, None] + offset_codes
        flat = flat.ravel()
        size = n_slots * total_bins
        shape = (n_slots, total_bins)
        g_hist = np.bincount(flat, weights=rep_g, minlength=size).reshape(shape)
        h_hist = np.bincount(flat, weights=rep_h, minlength=size).reshape(shape)
        c_hist = np.bincount(flat, minlength=size).astype(float).reshape(shape)

        GL = _segmented_cumsum(g_hist, col_starts, nb)
        HL = _segmented_cumsum(h_hist, col_starts, nb)
        CL = _segmented_cumsum(c_hist, col_starts, nb)
        G = GL[:, seg_ends][:, col_of_bin]  # per-column node totals
        H = HL[:, seg_ends][:, col_of_bin]
        gain = (GL ** 2 / (HL + l2) + (G - GL) ** 2 / (H - HL + l2)
                - G ** 2 / (H + l2))
        CR = node_n[:, None] - CL
        valid = ((~last_bin)[None, :]
                 & (CL >= min_samples_leaf) & (CR >= min_samples_leaf)
                 & (node_n[:, None] >= 2 * min_samples_leaf))
        gain = np.where(valid, gain, -np.inf)
        best = np.argmax(gain, axis=1)
        best_gain = gain[np.arange(n_slots), best]
        can_split = np.isfinite(best_gain) & (best_gain > GAIN_TOL)
        split_feat = np.where(can_split, col_of_bin[best], -1)
        split_bound = np.where(can_split, bin_within[best], 0)

        splitting = split_feat >= 0
        if not splitting.any():
            break
        # allocate children and patch the tree arrays
        next_frontier: list[int] = []
        child_slot = np.full(n_slots, -1, dtype=np.int64)
        for slot, nid in enumerate(frontier):
            if not splitting[slot]:
                continue
            feat = int(split_feat[slot])
            bound = int(split_bound[slot])
            features[nid] = feat
            thresholds[nid] = float(binned.thresholds[feat][bound])
            child_slot[slot] = len(next_frontier)
            for side in ("left", "right"):
                child_id = len(features)
                features.append(-1)
                thresholds.append(0.0)
                lefts.append(-1)
                rights.append(-1)
                values.append(0.0)
                if side == "left":
                    lefts[nid] = child_id
                else:
                    rights[nid] = child_id
                next_frontier.append(child_id)

        # reroute rows of splitting nodes to their children's slots
        slot_of_row = node_of_row
        row_splits = splitting[slot_of_row]
        rows = np.flatnonzero(row_splits)
        feat_r = split_feat[slot_of_row[rows]]
        bound_r = split_bound[slot_of_row[rows]]
        go_left = codes[rows, feat_r] <= bound_r
        new_slots = child_slot[slot_of_row[rows]] + np.where(go_left, 0, 1)
        node_of_row = np.full(n, -1, dtype=np.int64)
        node_of_row[rows] = new_slots
        keep = node_of_row >= 0
        node_of_row = node_of_row[keep]
        gradients = gradients[keep]
        hessians = hessians[keep]
        offset_codes = offset_codes[keep]
        codes = codes[keep]
        rep_g = np.repeat(gradients, f)
        rep_h = np.repeat(hessians, f)
        n = len(node_of_row)
        frontier = next_frontier
        depth += 1

    return Tree(
        feature=np.array(features, dtype=np.int32),
        threshold=np.array(thresholds, dtype=np.float64),
        left=np.array(lefts, dtype=np.int32),
        right=np.array(rights, dtype=np.int32),
        value=np.array(values, dtype=np.float64)[:, None],
    )
