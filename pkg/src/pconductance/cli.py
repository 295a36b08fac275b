"""Command-line experiment harness.

Subcommands: build-graph, solve, assign, evaluate, validate, bench-lattice,
and run (the full trial loop). Exit codes: 0 success, 1 usage error, 2 data
error, 3 non-convergence or failed validation.
"""

import argparse
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from . import assignment, graphs, measures, solvers, validators
from .graphs import GraphFormatError
from .solvers import ConvergenceError, SolverConfig


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# experiment configuration (plain key = value text, no nesting)


@dataclass
class ExperimentConfig:
    p: float = 2.0
    t: float = 0.0
    labels_per_class: int = 1
    trials: int = 10
    seed: int = 0
    epsilon: object = None     # None (argmax), "n", or a float >= 0
    corrupt: float = 0.0
    partial_size: int = 1
    alpha_mbo: float = 0.0
    tol: float = 1e-4
    max_outer: int = 200
    knn_k: int = 10
    workers: int = 1
    graph: object = None
    features: object = None
    labels: object = None
    superclass: object = None

    def validate(self):
        if not (self.p >= 1.0):
            raise ValueError(f"p must be >= 1, got {self.p}")
        if not (self.t >= 0.0) or not math.isfinite(self.t):
            raise ValueError(f"t must be finite and >= 0, got {self.t}")
        for name in ("labels_per_class", "trials", "knn_k", "workers",
                     "partial_size", "max_outer"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if not 0.0 <= self.corrupt <= 1.0:
            raise ValueError("corrupt must lie in [0, 1]")
        if self.alpha_mbo < 0:
            raise ValueError("alpha_mbo must be nonnegative")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if isinstance(self.epsilon, float) and self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if self.labels is None:
            raise ValueError("a labels file is required")
        if self.graph is None and self.features is None:
            raise ValueError("either a graph file or a features file is required")
        return self


_FLOAT_KEYS = {"t", "corrupt", "alpha_mbo", "tol"}
_INT_KEYS = {"labels_per_class", "trials", "seed", "partial_size", "max_outer",
             "knn_k", "workers"}
_PATH_KEYS = {"graph", "features", "labels", "superclass"}


def _parse_value(key, raw):
    raw = raw.strip()
    if key in _PATH_KEYS:
        return None if raw.lower() == "none" else raw
    if key == "epsilon":
        low = raw.lower()
        if low == "none":
            return None
        if low == "n":
            return "n"
        return float(raw)
    if key == "p":
        return math.inf if raw.lower() in ("inf", "infinity") else float(raw)
    if key in _FLOAT_KEYS:
        return float(raw)
    if key in _INT_KEYS:
        return int(raw)
    raise KeyError(key)


def parse_config(text, path="<config>"):
    """Parse ``key = value`` lines; ``#`` starts a comment; unknown keys are
    rejected."""
    known = {f.name for f in fields(ExperimentConfig)}
    cfg = ExperimentConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise GraphFormatError(f"{path}:{lineno}: expected 'key = value'")
        key, val = (tok.strip() for tok in line.split("=", 1))
        if key not in known:
            raise GraphFormatError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            setattr(cfg, key, _parse_value(key, val))
        except (ValueError, KeyError) as exc:
            raise GraphFormatError(f"{path}:{lineno}: bad value for {key}: {exc}")
    return cfg


def serialize_config(cfg):
    lines = []
    for f in fields(ExperimentConfig):
        v = getattr(cfg, f.name)
        if v is None:
            out = "none"
        elif f.name == "p" and math.isinf(v):
            out = "inf"
        elif isinstance(v, float):
            out = f"{v:.12g}"
        else:
            out = str(v)
        lines.append(f"{f.name} = {out}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# experiment pipeline


@dataclass
class ExperimentReport:
    accuracy_mean: float
    accuracy_std: float
    accuracies: list
    trials: int
    nodes: int
    nodes_total: int
    k: int
    labeled_per_trial: int

    def metrics_rows(self):
        return [
            ("accuracy_mean", f"{self.accuracy_mean:.12g}"),
            ("accuracy_std", f"{self.accuracy_std:.12g}"),
            ("trials", str(self.trials)),
            ("nodes", str(self.nodes)),
            ("nodes_total", str(self.nodes_total)),
            ("classes", str(self.k)),
            ("labeled_per_trial", str(self.labeled_per_trial)),
        ]


def _load_graph(cfg):
    if cfg.graph is not None:
        return graphs.read_graph_file(cfg.graph)
    X = graphs.read_features_csv(cfg.features)
    return graphs.build_knn_graph(X, cfg.knn_k)


def _resolve_epsilon(epsilon, n):
    if epsilon is None:
        return None
    if epsilon == "n":
        return float(n)
    return float(epsilon)


def run_experiment(cfg, log=None):
    """Run the trial loop: sample labels per class, apply corruption or
    partial-label augmentation, diffuse, solve, assign, and score accuracy on
    the unlabeled nodes. Deterministic given cfg.seed."""
    cfg.validate()
    g_full = _load_graph(cfg)
    nodes_all, classes_all = measures.read_labels_csv(cfg.labels)
    if nodes_all.size == 0:
        raise GraphFormatError(f"{cfg.labels}: no labels")
    if np.any(nodes_all < 0) or np.any(nodes_all >= g_full.n):
        raise GraphFormatError(f"{cfg.labels}: node id out of range")
    k = int(classes_all.max()) + 1

    comp = graphs.largest_component(g_full)
    g, node_map = graphs.induced_subgraph(g_full, comp)
    if log:
        log(f"largest connected component: {g.n} of {g_full.n} nodes")
    keep = node_map[nodes_all] >= 0
    truth_nodes = node_map[nodes_all[keep]]
    truth_classes = classes_all[keep]
    truth = np.full(g.n, -1, dtype=np.int64)
    truth[truth_nodes] = truth_classes

    class_nodes = [truth_nodes[truth_classes == c] for c in range(k)]
    for c, idx in enumerate(class_nodes):
        if idx.shape[0] < cfg.labels_per_class:
            raise ValueError(
                f"class {c} has {idx.shape[0]} nodes, fewer than "
                f"labels_per_class={cfg.labels_per_class}"
            )
    super_map = None
    if cfg.partial_size > 1:
        if cfg.superclass is None:
            raise ValueError("partial_size > 1 needs a superclass file")
        super_map = measures.read_superclass_csv(cfg.superclass)

    eps = _resolve_epsilon(cfg.epsilon, g.n)
    m_true = np.array([int(np.sum(truth == c)) for c in range(k)], dtype=np.int64)
    use_cardinalities = eps is not None and eps < g.n
    if use_cardinalities and int(m_true.sum()) != g.n:
        raise ValueError(
            "cardinality-constrained assignment needs ground-truth labels "
            "for every node of the component"
        )
    solver_cfg = SolverConfig(tol=cfg.tol, max_outer=cfg.max_outer)
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.trials)

    def one_trial(idx):
        rng = np.random.default_rng(seeds[idx])
        picked = np.concatenate([
            np.sort(rng.choice(idx_c, size=cfg.labels_per_class, replace=False))
            for idx_c in class_nodes
        ])
        picked_classes = truth[picked]
        Y = measures.LabelMatrix.from_labels(g.n, k, picked, picked_classes)
        if cfg.corrupt > 0:
            Y = measures.corrupt_labels(Y, cfg.corrupt,
                                        int(rng.integers(2**31)))
        if cfg.partial_size > 1:
            Y = measures.partial_labels(Y, super_map, cfg.partial_size,
                                        int(rng.integers(2**31)))
        if cfg.t > 0:
            Y = measures.heat_diffuse(g, Y, cfg.t)
        R = measures.one_vs_all(Y)
        pot = solvers.solve_multiclass(g, R, cfg.p, solver_cfg)
        if not use_cardinalities:
            pred = assignment.argmax_assign(pot)
        elif cfg.alpha_mbo > 0 and eps == 0:
            pred = assignment.mbo_refine(g, pot, m_true, cfg.alpha_mbo).labels()
        else:
            pred = assignment.transport_assign(pot.Phi, m_true, eps).labels()
        mask = truth >= 0
        mask[picked] = False
        acc = float(np.mean(pred[mask] == truth[mask])) if mask.any() else 1.0
        return acc, pot.converged

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(one_trial, range(cfg.trials)))
    else:
        results = [one_trial(i) for i in range(cfg.trials)]
    accs = [a for a, _ in results]
    if not all(ok for _, ok in results):
        bad = [i for i, (_, ok) in enumerate(results) if not ok]
        raise ConvergenceError(f"solver did not converge in trials {bad}")
    mean = float(np.mean(accs))
    std = float(np.std(accs, ddof=1)) if len(accs) > 1 else 0.0
    return ExperimentReport(
        accuracy_mean=mean, accuracy_std=std, accuracies=accs,
        trials=cfg.trials, nodes=g.n, nodes_total=g_full.n, k=k,
        labeled_per_trial=cfg.labels_per_class * k,
    )


# ---------------------------------------------------------------------------
# file helpers shared by the subcommands


def write_potentials_csv(path, node_ids, Phi, values):
    k = Phi.shape[1]
    with open(path, "w") as fh:
        fh.write("node_id," + ",".join(f"phi_{j}" for j in range(k)) + "\n")
        for row, node in enumerate(node_ids):
            vals = ",".join(f"{Phi[row, j]:.12e}" for j in range(k))
            fh.write(f"{node},{vals}\n")


def read_potentials_csv(path):
    node_ids = []
    rows = []
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if not header or header[0] != "node_id":
            raise GraphFormatError(f"{path}:1: expected a node_id header")
        k = len(header) - 1
        for lineno, raw in enumerate(fh, start=2):
            line = raw.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != k + 1:
                raise GraphFormatError(f"{path}:{lineno}: expected {k + 1} columns")
            try:
                node_ids.append(int(parts[0]))
                rows.append([float(tok) for tok in parts[1:]])
            except ValueError as exc:
                raise GraphFormatError(f"{path}:{lineno}: {exc}") from None
    return np.asarray(node_ids, dtype=np.int64), np.asarray(rows, dtype=np.float64)


def write_predictions_csv(path, node_ids, labels):
    with open(path, "w") as fh:
        fh.write("node_id,predicted_class\n")
        for node, lab in zip(node_ids, labels):
            fh.write(f"{node},{int(lab)}\n")


def read_predictions_csv(path):
    nodes, labels = measures.read_labels_csv(path)
    return nodes, labels


# ---------------------------------------------------------------------------
# subcommand implementations


def _cmd_build_graph(args):
    X = graphs.read_features_csv(args.features)
    g = graphs.build_knn_graph(X, args.k)
    graphs.write_graph_file(g, args.out)
    print(f"wrote {g.n} nodes, {g.N} edges to {args.out}")
    return 0


def _solver_config_from(args):
    return SolverConfig(tol=args.tol, max_outer=args.max_outer)


def _cmd_solve(args):
    g_full = graphs.read_graph_file(args.graph)
    nodes, classes = measures.read_labels_csv(args.labels)
    if np.any(nodes < 0) or np.any(nodes >= g_full.n):
        raise GraphFormatError(f"{args.labels}: node id out of range")
    k = int(classes.max()) + 1
    comp = graphs.largest_component(g_full)
    g, node_map = graphs.induced_subgraph(g_full, comp)
    if g.n < g_full.n:
        print(f"restricted to the largest component: {g.n} of {g_full.n} nodes",
              file=sys.stderr)
    keep = node_map[nodes] >= 0
    Y = measures.LabelMatrix.from_labels(g.n, k, node_map[nodes[keep]],
                                         classes[keep])
    if args.t > 0:
        Y = measures.heat_diffuse(g, Y, args.t)
    R = measures.one_vs_all(Y)
    pot = solvers.solve_multiclass(g, R, args.p, _solver_config_from(args),
                                   method=args.method)
    original_ids = comp
    write_potentials_csv(args.out, original_ids, pot.Phi, pot.values)
    if args.trace:
        state = solvers.ssnal_solve(g, measures.one_vs_all(Y).R[:, 0], args.p,
                                    _solver_config_from(args))
        solvers.write_trace_csv(state, args.trace)
    if not pot.converged:
        raise ConvergenceError("one or more columns did not converge")
    print(f"solved {k} classes on {g.n} nodes; conductances: "
          + ",".join(f"{v:.6g}" for v in pot.values))
    return 0


def _cmd_assign(args):
    if args.epsilon is not None and args.epsilon.lower() != "n":
        if float(args.epsilon) < 0:
            raise UsageError("--epsilon must be nonnegative or 'n'")
    node_ids, Phi = read_potentials_csv(args.potentials)
    n = Phi.shape[0]
    eps = None
    if args.epsilon is not None:
        eps = float(n) if args.epsilon.lower() == "n" else float(args.epsilon)
    if args.cardinalities is not None:
        m = np.asarray([int(tok) for tok in args.cardinalities.split(",")],
                       dtype=np.int64)
        if eps is None:
            eps = 0.0
    else:
        m = None
    if m is None or eps is None or eps >= n:
        labels = assignment.argmax_assign(Phi)
    elif args.alpha_mbo > 0 and eps == 0:
        g = graphs.read_graph_file(args.graph) if args.graph else None
        if g is None:
            raise UsageError("--alpha-mbo needs --graph")
        if g.n != n:
            raise GraphFormatError("graph size does not match the potentials")
        labels = assignment.mbo_refine(g, Phi, m, args.alpha_mbo).labels()
    else:
        labels = assignment.transport_assign(Phi, m, eps).labels()
    write_predictions_csv(args.out, node_ids, labels)
    print(f"assigned {n} nodes")
    return 0


def _cmd_evaluate(args):
    pred_nodes, pred = read_predictions_csv(args.pred)
    true_nodes, true = measures.read_labels_csv(args.truth)
    truth = dict(zip(true_nodes.tolist(), true.tolist()))
    exclude = set()
    if args.exclude:
        ex_nodes, _ = measures.read_labels_csv(args.exclude)
        exclude = set(ex_nodes.tolist())
    hits = total = 0
    for node, lab in zip(pred_nodes.tolist(), pred.tolist()):
        if node in exclude or node not in truth:
            continue
        total += 1
        hits += int(truth[node] == lab)
    if total == 0:
        raise GraphFormatError("no overlapping nodes between predictions and truth")
    acc = hits / total
    lines = [("accuracy", f"{acc:.12g}"), ("evaluated", str(total))]
    _emit_metrics(lines, args.out)
    return 0


def _emit_metrics(rows, out):
    text = "metric,value\n" + "".join(f"{k},{v}\n" for k, v in rows)
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_validate(args):
    rows = validators.run_validation_suite(seed=args.seed, fast=not args.full)
    if args.out:
        validators.write_validation_csv(rows, args.out)
    failed = 0
    for row in rows:
        status = "PASS" if row.passed else "FAIL"
        print(f"{status} {row.check}[{row.instance}] deviation={row.deviation:.3e}"
              f" tolerance={row.tolerance:.3e}")
        failed += not row.passed
    print(f"{len(rows) - failed}/{len(rows)} checks passed")
    return 0 if failed == 0 else 3


def _cmd_bench_lattice(args):
    res = validators.lattice_benchmark(p=args.p, eps=args.tol)
    solvers.write_trace_csv(res.ssnal_state, args.out)
    if args.admm_out:
        solvers.write_trace_csv(res.admm_state, args.admm_out)
    print(f"ssnal outer iterations: {res.ssnal_iterations}")
    print(f"admm iterations: {res.admm_iterations}")
    print(f"reached tolerance: {res.reached_tolerance}")
    return 0 if res.reached_tolerance else 3


def _cmd_run(args):
    if args.config:
        with open(args.config) as fh:
            cfg = parse_config(fh.read(), path=args.config)
    else:
        cfg = ExperimentConfig()
    for key in ("p", "t", "labels_per_class", "trials", "seed", "epsilon",
                "corrupt", "partial_size", "alpha_mbo", "tol", "graph",
                "features", "labels", "superclass", "workers"):
        val = getattr(args, key, None)
        if val is not None:
            setattr(cfg, key, _parse_value(key, str(val)))
    report = run_experiment(cfg, log=lambda msg: print(msg, file=sys.stderr))
    _emit_metrics(report.metrics_rows(), args.out)
    return 0


# ---------------------------------------------------------------------------
# parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser():
    p = _Parser(prog="pconductance",
                description="p-conductance learning toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build-graph", help="build a k-NN graph from features")
    b.add_argument("--features", required=True)
    b.add_argument("--k", type=int, default=10)
    b.add_argument("--out", required=True)
    b.set_defaults(func=_cmd_build_graph)

    s = sub.add_parser("solve", help="solve potentials from a graph and labels")
    s.add_argument("--graph", required=True)
    s.add_argument("--labels", required=True)
    s.add_argument("--p", type=lambda v: math.inf if v == "inf" else float(v),
                   default=2.0)
    s.add_argument("--t", type=float, default=0.0)
    s.add_argument("--tol", type=float, default=1e-4)
    s.add_argument("--max-outer", dest="max_outer", type=int, default=200)
    s.add_argument("--method", choices=["auto", "ssnal", "admm", "closed_form"],
                   default="auto")
    s.add_argument("--out", required=True)
    s.add_argument("--trace", default=None)
    s.set_defaults(func=_cmd_solve)

    a = sub.add_parser("assign", help="potentials to class predictions")
    a.add_argument("--potentials", required=True)
    a.add_argument("--epsilon", default=None,
                   help="cardinality slack (number or 'n')")
    a.add_argument("--cardinalities", default=None,
                   help="comma-separated class sizes")
    a.add_argument("--alpha-mbo", dest="alpha_mbo", type=float, default=0.0)
    a.add_argument("--graph", default=None)
    a.add_argument("--out", required=True)
    a.set_defaults(func=_cmd_assign)

    e = sub.add_parser("evaluate", help="score predictions against the truth")
    e.add_argument("--pred", required=True)
    e.add_argument("--truth", required=True)
    e.add_argument("--exclude", default=None,
                   help="labels CSV whose nodes are excluded from scoring")
    e.add_argument("--out", default=None)
    e.set_defaults(func=_cmd_evaluate)

    v = sub.add_parser("validate", help="run the numeric validation suite")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--full", action="store_true")
    v.add_argument("--out", default=None)
    v.set_defaults(func=_cmd_validate)

    lb = sub.add_parser("bench-lattice", help="lattice convergence benchmark")
    lb.add_argument("--p", type=float, default=5.0)
    lb.add_argument("--tol", type=float, default=1e-4)
    lb.add_argument("--out", required=True)
    lb.add_argument("--admm-out", dest="admm_out", default=None)
    lb.set_defaults(func=_cmd_bench_lattice)

    r = sub.add_parser("run", help="run a full experiment from a config")
    r.add_argument("--config", default=None)
    r.add_argument("--p", default=None)
    r.add_argument("--t", default=None)
    r.add_argument("--labels-per-class", dest="labels_per_class", default=None)
    r.add_argument("--trials", default=None)
    r.add_argument("--seed", default=None)
    r.add_argument("--epsilon", default=None)
    r.add_argument("--corrupt", default=None)
    r.add_argument("--partial-size", dest="partial_size", default=None)
    r.add_argument("--alpha-mbo", dest="alpha_mbo", default=None)
    r.add_argument("--tol", default=None)
    r.add_argument("--graph", default=None)
    r.add_argument("--features", default=None)
    r.add_argument("--labels", default=None)
    r.add_argument("--superclass", default=None)
    r.add_argument("--workers", default=None)
    r.add_argument("--out", default=None)
    r.set_defaults(func=_cmd_run)
    return p


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (GraphFormatError, OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
