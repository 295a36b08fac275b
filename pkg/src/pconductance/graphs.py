"""Weighted undirected graphs: k-NN construction, incidence and Laplacian
operators, connectivity, and the plain-text graph format.

Graphs are immutable after construction and safe to share across worker
threads. Edges are stored once as a lexicographically sorted coordinate list
(i < j) together with a CSR-style neighbor index, which keeps every matvec at
O(|E|).
"""

import numpy as np

from . import _kernels as kernels

BRUTE_FORCE_KNN_LIMIT = 20000


class GraphFormatError(ValueError):
    """Malformed graph/feature file; the message carries the line number."""


class WeightedGraph:
    """Undirected graph with positive edge weights.

    Parameters
    ----------
    n : int
        Number of nodes.
    edges : iterable of (i, j, w)
        Undirected edges; endpoints are normalized to i < j. Self loops,
        duplicate edges, and nonpositive weights are rejected.
    """

    def __init__(self, n, edges):
        n = int(n)
        if n < 1:
            raise ValueError("graph needs at least one node")
        edges = list(edges)
        m = len(edges)
        src = np.empty(m, dtype=np.int64)
        dst = np.empty(m, dtype=np.int64)
        w = np.empty(m, dtype=np.float64)
        for e, (i, j, wij) in enumerate(edges):
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"edge ({i}, {j}) out of range for n={n}")
            if i > j:
                i, j = j, i
            if not (wij > 0) or not np.isfinite(wij):
                raise ValueError(f"edge ({i}, {j}) has nonpositive weight {wij}")
            src[e], dst[e], w[e] = i, j, wij
        order = np.lexsort((dst, src))
        self.src = np.ascontiguousarray(src[order])
        self.dst = np.ascontiguousarray(dst[order])
        self.w = np.ascontiguousarray(w[order])
        if m > 1:
            dup = (self.src[1:] == self.src[:-1]) & (self.dst[1:] == self.dst[:-1])
            if np.any(dup):
                k = int(np.flatnonzero(dup)[0])
                raise ValueError(
                    f"duplicate edge ({self.src[k]}, {self.dst[k]})"
                )
        self.n = n
        self.degrees = np.bincount(self.src, weights=self.w, minlength=n)
        self.degrees += np.bincount(self.dst, weights=self.w, minlength=n)
        self._build_neighbor_index()
        self._components = None

    def _build_neighbor_index(self):
        # CSR over incident edges: for node i, edges self.nbr_edge[ptr[i]:ptr[i+1]]
        ends = np.concatenate([self.src, self.dst])
        eid = np.concatenate([np.arange(self.N), np.arange(self.N)])
        order = np.argsort(ends, kind="stable")
        self.nbr_edge = eid[order].astype(np.int64)
        counts = np.bincount(ends, minlength=self.n)
        self.nbr_ptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(counts, out=self.nbr_ptr[1:])

    @property
    def N(self):
        return self.src.shape[0]

    @property
    def edge_count(self):
        return self.src.shape[0]

    def edge_list(self):
        return [(int(i), int(j), float(wij)) for i, j, wij in zip(self.src, self.dst, self.w)]

    def other_end(self, edge, node):
        i, j = self.src[edge], self.dst[edge]
        return j if i == node else i

    def is_connected(self):
        return len(connected_components(self)) == 1


def laplacian_apply(g, x):
    """Apply L = D - W to a length-n vector in O(|E|)."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.shape != (g.n,):
        raise ValueError(f"expected vector of length {g.n}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("input vector has non-finite entries")
    return kernels.laplacian_apply(g.src, g.dst, g.w, g.degrees, x)


def incidence_apply_t(g, phi):
    """B^T phi: per-edge differences phi_i - phi_j for edges (i, j), i < j."""
    phi = np.ascontiguousarray(phi, dtype=np.float64)
    if phi.shape != (g.n,):
        raise ValueError(f"expected vector of length {g.n}, got shape {phi.shape}")
    return kernels.edge_grad(g.src, g.dst, phi)


def incidence_apply(g, J):
    """B J: adjoint of incidence_apply_t, maps edge values to nodes."""
    J = np.ascontiguousarray(J, dtype=np.float64)
    if J.shape != (g.N,):
        raise ValueError(f"expected vector of length {g.N}, got shape {J.shape}")
    return kernels.edge_div(g.src, g.dst, J, g.n)


def connected_components(g):
    """Partition the nodes into connected components (list of index arrays)."""
    if g._components is not None:
        return g._components
    labels = np.full(g.n, -1, dtype=np.int64)
    comp = 0
    for start in range(g.n):
        if labels[start] >= 0:
            continue
        stack = [start]
        labels[start] = comp
        while stack:
            u = stack.pop()
            for k in range(g.nbr_ptr[u], g.nbr_ptr[u + 1]):
                e = g.nbr_edge[k]
                v = g.dst[e] if g.src[e] == u else g.src[e]
                if labels[v] < 0:
                    labels[v] = comp
                    stack.append(v)
        comp += 1
    g._components = [np.flatnonzero(labels == c) for c in range(comp)]
    return g._components


def induced_subgraph(g, nodes):
    """Subgraph on the given nodes.

    Returns (subgraph, node_map) where node_map[old] = new index or -1.
    """
    nodes = np.asarray(sorted(int(v) for v in nodes), dtype=np.int64)
    node_map = np.full(g.n, -1, dtype=np.int64)
    node_map[nodes] = np.arange(nodes.shape[0])
    keep = (node_map[g.src] >= 0) & (node_map[g.dst] >= 0)
    edges = zip(node_map[g.src[keep]], node_map[g.dst[keep]], g.w[keep])
    return WeightedGraph(nodes.shape[0], edges), node_map


def largest_component(g):
    """Nodes of the largest connected component (ties: the one containing the
    smallest node index, which is the first found)."""
    comps = connected_components(g)
    sizes = [c.shape[0] for c in comps]
    return comps[int(np.argmax(sizes))]


def build_knn_graph(features, k):
    """Symmetrized k-NN graph with Gaussian weights.

    The directed weight from x_i to neighbor x_j is
    ``exp(-4 ||x_i - x_j||^2 / d_k(x_i)^2)`` where d_k(x_i) is the distance
    from x_i to its k-th nearest neighbor (self excluded). Directed edges are
    merged by union; when both directions select an edge the larger weight is
    kept.
    """
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("features must be a 2-d array, one row per node")
    n = X.shape[0]
    if n < 2:
        raise ValueError("need at least two nodes")
    if not np.all(np.isfinite(X)):
        raise ValueError("features contain non-finite values")
    if not 1 <= k < n:
        raise ValueError(f"k must satisfy 1 <= k < n, got k={k}, n={n}")
    if n > BRUTE_FORCE_KNN_LIMIT:
        raise ValueError(
            f"exact neighbor search is limited to n <= {BRUTE_FORCE_KNN_LIMIT}"
        )

    sq = np.einsum("ij,ij->i", X, X)
    weights = {}
    block = max(1, min(n, int(2e7) // max(n, 1)))
    for lo in range(0, n, block):
        hi = min(n, lo + block)
        d2 = sq[lo:hi, None] + sq[None, :] - 2.0 * (X[lo:hi] @ X.T)
        np.maximum(d2, 0.0, out=d2)
        d2[np.arange(hi - lo), np.arange(lo, hi)] = np.inf
        part = np.argpartition(d2, k - 1, axis=1)[:, :k]
        rows = np.arange(hi - lo)
        dk2 = d2[rows[:, None], part].max(axis=1)
        for r in range(hi - lo):
            i = lo + r
            if dk2[r] <= 0.0:
                raise ValueError(
                    f"node {i} has a duplicate point at its k-th neighbor "
                    "(d_k = 0, Gaussian weight undefined)"
                )
            for j in part[r]:
                j = int(j)
                wij = float(np.exp(-4.0 * d2[r, j] / dk2[r]))
                key = (i, j) if i < j else (j, i)
                prev = weights.get(key)
                if prev is None or wij > prev:
                    weights[key] = wij
    edges = [(i, j, wij) for (i, j), wij in weights.items()]
    return WeightedGraph(n, edges)


def grid_graph(rows, cols, weight=1.0):
    """Unit-weight lattice on rows x cols nodes (row-major numbering)."""
    edges = []
    for r in range(rows):
        for c in range(cols):
            i = r * cols + c
            if c + 1 < cols:
                edges.append((i, i + 1, weight))
            if r + 1 < rows:
                edges.append((i, i + cols, weight))
    return WeightedGraph(rows * cols, edges)


def write_graph_file(g, path):
    """Write the plain-text edge format: one ``i j w`` line per edge."""
    with open(path, "w") as fh:
        fh.write(f"# nodes: {g.n}\n")
        for i, j, wij in zip(g.src, g.dst, g.w):
            fh.write(f"{i} {j} {float(wij)!r}\n")


def read_graph_file(path, n=None):
    """Read the ``i j w`` edge format (0-indexed, i < j, ``#`` comments).

    The node count is taken from an optional ``# nodes: n`` comment, from the
    explicit ``n`` argument, or inferred as max index + 1.
    """
    edges = []
    max_idx = -1
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("nodes:") and n is None:
                    try:
                        n = int(body.split(":", 1)[1])
                    except ValueError:
                        pass
                continue
            parts = line.split()
            if len(parts) != 3:
                raise GraphFormatError(
                    f"{path}:{lineno}: expected 'i j w', got {line!r}"
                )
            try:
                i, j, wij = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError as exc:
                raise GraphFormatError(f"{path}:{lineno}: {exc}") from None
            if i >= j:
                raise GraphFormatError(
                    f"{path}:{lineno}: edges must satisfy i < j, got ({i}, {j})"
                )
            edges.append((i, j, wij))
            max_idx = max(max_idx, j)
    if n is None:
        n = max_idx + 1
    try:
        return WeightedGraph(n, edges)
    except ValueError as exc:
        raise GraphFormatError(f"{path}: {exc}") from None


def read_features_csv(path):
    """Read a headerless CSV of node features, one row per node."""
    rows = []
    width = None
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                row = [float(tok) for tok in line.split(",")]
            except ValueError as exc:
                raise GraphFormatError(f"{path}:{lineno}: {exc}") from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise GraphFormatError(
                    f"{path}:{lineno}: expected {width} columns, got {len(row)}"
                )
            rows.append(row)
    if not rows:
        raise GraphFormatError(f"{path}: no feature rows")
    return np.asarray(rows, dtype=np.float64)
