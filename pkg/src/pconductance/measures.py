"""Label measures on graph nodes: one-vs-all signed measures, heat-kernel
diffusion, and corrupted / partial label scenarios."""

import weakref

import numpy as np

from . import graphs
from .graphs import GraphFormatError

DENSE_HEAT_LIMIT = 2000
TAYLOR_ORDER = 12

_spectrum_cache = weakref.WeakKeyDictionary()


class NodeMeasure:
    """Nonnegative measure on the nodes; probability measures have mass 1."""

    def __init__(self, values, require_probability=False):
        v = np.ascontiguousarray(values, dtype=np.float64)
        if v.ndim != 1:
            raise ValueError("measure values must be a vector")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("measure values must be finite and nonnegative")
        self.values = v
        self.mass = float(v.sum())
        if require_probability and abs(self.mass - 1.0) > 1e-10:
            raise ValueError(f"not a probability measure (mass {self.mass})")

    @classmethod
    def dirac(cls, n, i):
        v = np.zeros(n)
        v[i] = 1.0
        return cls(v)

    @classmethod
    def uniform_on(cls, n, nodes):
        nodes = np.asarray(nodes, dtype=np.int64)
        v = np.zeros(n)
        v[nodes] = 1.0 / nodes.shape[0]
        return cls(v)


def measure_values(m):
    """Accept a NodeMeasure or a plain array and return the value vector."""
    if isinstance(m, NodeMeasure):
        return m.values
    return np.ascontiguousarray(m, dtype=np.float64)


class LabelMatrix:
    """n x k matrix of per-class label measures plus the labeled index set.

    Rows of unlabeled nodes are zero before diffusion; columns are
    normalized to unit mass on demand (see :func:`one_vs_all`).
    """

    def __init__(self, Y, labeled, k=None):
        Y = np.ascontiguousarray(Y, dtype=np.float64)
        if Y.ndim != 2:
            raise ValueError("Y must be 2-d")
        if np.any(Y < -1e-12) or not np.all(np.isfinite(Y)):
            raise ValueError("Y must be finite and nonnegative")
        self.Y = np.maximum(Y, 0.0)
        self.labeled = np.asarray(sorted(set(int(i) for i in labeled)), dtype=np.int64)
        if self.labeled.size and (self.labeled[0] < 0 or self.labeled[-1] >= Y.shape[0]):
            raise ValueError("labeled index out of range")
        self.k = Y.shape[1] if k is None else int(k)
        if self.k != Y.shape[1]:
            raise ValueError("k does not match Y")

    @property
    def n(self):
        return self.Y.shape[0]

    @property
    def m(self):
        return self.labeled.shape[0]

    @classmethod
    def from_labels(cls, n, k, nodes, classes):
        """One-hot rows at the labeled nodes."""
        nodes = np.asarray(nodes, dtype=np.int64)
        classes = np.asarray(classes, dtype=np.int64)
        if nodes.shape != classes.shape:
            raise ValueError("nodes and classes must align")
        if len(set(nodes.tolist())) != nodes.shape[0]:
            raise ValueError("duplicate labeled node")
        if np.any(classes < 0) or np.any(classes >= k):
            raise ValueError("class id out of range")
        Y = np.zeros((n, k))
        Y[nodes, classes] = 1.0
        return cls(Y, nodes, k)

    def row_classes(self):
        """Argmax class per labeled row (ties resolve to the lowest index)."""
        return np.argmax(self.Y[self.labeled], axis=1)


class SignedMeasureMatrix:
    """Columns R_l = mu_l - (k-1)^{-1} sum_{j != l} mu_j; each sums to zero."""

    def __init__(self, R):
        R = np.ascontiguousarray(R, dtype=np.float64)
        sums = R.sum(axis=0)
        if np.any(np.abs(sums) > 1e-10 * max(1.0, float(np.abs(R).sum()))):
            raise ValueError("signed measure columns must sum to zero")
        self.R = R

    @property
    def k(self):
        return self.R.shape[1]


def normalized_columns(label_matrix):
    """Column-normalized copy of Y; raises naming any empty class."""
    Y = label_matrix.Y
    sums = Y.sum(axis=0)
    empty = np.flatnonzero(sums <= 0)
    if empty.size:
        raise ValueError(f"class {int(empty[0])} has no label mass")
    return Y / sums


def one_vs_all(label_matrix):
    """Signed one-vs-all measures from the normalized class measures."""
    if label_matrix.k < 2:
        raise ValueError("one-vs-all needs at least two classes")
    M = normalized_columns(label_matrix)
    total = M.sum(axis=1, keepdims=True)
    R = M - (total - M) / (label_matrix.k - 1)
    return SignedMeasureMatrix(R)


def _graph_spectrum(g):
    cached = _spectrum_cache.get(g)
    if cached is None:
        L = np.zeros((g.n, g.n))
        idx = np.arange(g.n)
        L[idx, idx] = g.degrees
        L[g.src, g.dst] -= g.w
        L[g.dst, g.src] -= g.w
        vals, vecs = np.linalg.eigh(L)
        cached = (vals, vecs)
        _spectrum_cache[g] = cached
    return cached


def _heat_dense(g, Y, t):
    vals, vecs = _graph_spectrum(g)
    return vecs @ (np.exp(-t * vals)[:, None] * (vecs.T @ Y))


def _heat_taylor(g, Y, t):
    # scaling-and-squaring: substep t/2^s with ||tL/2^s||_1 <= 1, order-12 Taylor
    norm1 = 2.0 * float(g.degrees.max()) if g.n else 0.0
    s = max(0, int(np.ceil(np.log2(max(t * norm1, 1.0)))))
    tau = t / (2.0**s)
    Z = Y.copy()
    for _ in range(2**s):
        term = Z.copy()
        acc = Z.copy()
        for j in range(1, TAYLOR_ORDER + 1):
            term = np.column_stack(
                [graphs.laplacian_apply(g, term[:, c]) for c in range(term.shape[1])]
            ) * (-tau / j)
            acc += term
        Z = acc
    return Z


def heat_diffuse(g, label_matrix, t, method="auto"):
    """Diffuse label measures through the heat kernel exp(-t L).

    Column masses are preserved; tiny negative entries produced by floating
    point are clamped to zero and the column is renormalized to its original
    mass. ``t = 0`` returns the labels unchanged.
    """
    if not np.isfinite(t) or t < 0:
        raise ValueError(f"diffusion time must be finite and >= 0, got {t}")
    if label_matrix.n != g.n:
        raise ValueError("label matrix does not match the graph")
    if t == 0:
        return LabelMatrix(label_matrix.Y.copy(), label_matrix.labeled, label_matrix.k)
    if method == "auto":
        method = "dense" if g.n <= DENSE_HEAT_LIMIT else "taylor"
    if method == "dense":
        Z = _heat_dense(g, label_matrix.Y, t)
    elif method == "taylor":
        Z = _heat_taylor(g, label_matrix.Y, t)
    else:
        raise ValueError(f"unknown method {method!r}")
    masses = label_matrix.Y.sum(axis=0)
    Z = np.maximum(Z, 0.0)
    out_masses = Z.sum(axis=0)
    scale = np.where(out_masses > 0, masses / np.where(out_masses > 0, out_masses, 1.0), 1.0)
    Z *= scale
    return LabelMatrix(Z, label_matrix.labeled, label_matrix.k)


def corrupt_labels(label_matrix, fraction, seed):
    """Flip a fixed fraction of the labeled nodes to random incorrect classes.

    Exactly ``round(fraction * m)`` labeled rows are reassigned, each to a
    class drawn uniformly from the other k-1 classes. Deterministic in the
    seed. The output rows are one-hot.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must lie in [0, 1]")
    k = label_matrix.k
    if k < 2:
        raise ValueError("corruption needs at least two classes")
    labeled = label_matrix.labeled
    count = int(round(fraction * labeled.shape[0]))
    if count == 0:
        return LabelMatrix(label_matrix.Y.copy(), labeled, k)
    rng = np.random.default_rng(seed)
    classes = label_matrix.row_classes().copy()
    hit = rng.choice(labeled.shape[0], size=count, replace=False)
    offsets = rng.integers(1, k, size=count)
    classes[hit] = (classes[hit] + offsets) % k
    return LabelMatrix.from_labels(label_matrix.n, k, labeled, classes)


def partial_labels(label_matrix, superclass_map, set_size, seed):
    """Replace each labeled row with a uniform candidate set of classes.

    The candidate set has ``set_size`` classes: the true class plus distinct
    distractors sampled from the same superclass. Each candidate receives
    mass 1/set_size.
    """
    k = label_matrix.k
    sc = np.asarray([superclass_map[c] for c in range(k)])
    groups = {s: np.flatnonzero(sc == s) for s in np.unique(sc)}
    if set_size < 1:
        raise ValueError("set_size must be >= 1")
    rng = np.random.default_rng(seed)
    labeled = label_matrix.labeled
    classes = label_matrix.row_classes()
    Y = np.zeros((label_matrix.n, k))
    for row, c in zip(labeled, classes):
        pool = groups[sc[c]]
        if set_size > pool.shape[0]:
            raise ValueError(
                f"set_size {set_size} exceeds superclass size {pool.shape[0]}"
                f" for class {int(c)}"
            )
        others = pool[pool != c]
        extra = rng.choice(others, size=set_size - 1, replace=False) if set_size > 1 else []
        cand = np.concatenate([[c], extra]).astype(np.int64)
        Y[row, cand] = 1.0 / set_size
    return LabelMatrix(Y, labeled, k)


def read_labels_csv(path):
    """Read ``node_id,class_id`` lines; a leading header row is tolerated."""
    nodes, classes = [], []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = [tok.strip() for tok in line.split(",")]
            if len(parts) != 2:
                raise GraphFormatError(
                    f"{path}:{lineno}: expected 'node_id,class_id', got {line!r}"
                )
            try:
                nodes.append(int(parts[0]))
                classes.append(int(parts[1]))
            except ValueError:
                if lineno == 1:
                    continue
                raise GraphFormatError(
                    f"{path}:{lineno}: non-integer label line {line!r}"
                ) from None
    return np.asarray(nodes, dtype=np.int64), np.asarray(classes, dtype=np.int64)


def read_superclass_csv(path):
    """Read ``class_id,superclass_id`` lines into a dict."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = [tok.strip() for tok in line.split(",")]
            if len(parts) != 2:
                raise GraphFormatError(
                    f"{path}:{lineno}: expected 'class_id,superclass_id', got {line!r}"
                )
            try:
                out[int(parts[0])] = int(parts[1])
            except ValueError:
                if lineno == 1:
                    continue
                raise GraphFormatError(
                    f"{path}:{lineno}: non-integer line {line!r}"
                ) from None
    return out
