"""Comparison models sharing the same network core.

Static topologies sized by empirical formulas, a grid search over node
counts, the fixed-threshold variant of the level loop, and the
discretizer-free variant that groups identical raw rows.
"""

from __future__ import annotations

import math
from dataclasses import replace

from .data import Dataset, Split
from .network import LayeredNetwork, NodeParams, TrainHyper, assemble, init_node, train_network
from .numerics import RngStream, derive_stream
from .threeway import CostMatrix, sample_cost_matrix
from .trainer import FixedPolicy, TrainConfig, _run_core
from .metrics import accuracy

BASELINE_KINDS = ("m1", "m2", "m3", "grid-search", "twd-fixed", "stwd-nk")


def empirical_nodes(kind: str, m: int, n: int = 2, a: float = 4.0) -> int:
    """Hidden-node count from the classic sizing formulas (half-up rounding).

    m1: sqrt(m + n) + a with a in (1, 10); m2: log2(m); m3: sqrt(m * n).
    """
    if kind not in ("m1", "m2", "m3"):
        raise ValueError(f"empirical formula kind must be m1/m2/m3, got {kind!r}")
    if m < 1 or n < 1:
        raise ValueError("m and n must be positive")
    if kind == "m1":
        if not 1.0 < a < 10.0:
            raise ValueError(f"m1 requires a in (1, 10), got {a}")
        value = math.sqrt(m + n) + a
    elif kind == "m2":
        value = math.log2(m)
    else:
        value = math.sqrt(m * n)
    return max(1, int(math.floor(value + 0.5)))


def train_fixed_topology(ds: Dataset, split: Split, nodes: int, hyper: TrainHyper,
                         activation: str, init_dist: str, stream: RngStream,
                         history=None) -> LayeredNetwork:
    """Initialize ``nodes`` hidden nodes together and train them jointly."""
    if nodes < 1:
        raise ValueError("need at least one hidden node")
    drawn = [init_node(ds.n_features, init_dist, stream) for _ in range(nodes)]
    W1, b1, W2, b2 = assemble(drawn)
    X, y = ds.features, ds.labels
    tr = list(split.train)
    va = list(split.validation)
    X_val = X[va] if va else None
    y_val = y[va] if va else None
    W1, b1, W2, b2 = train_network(X[tr], y[tr], W1, b1, W2, b2, activation,
                                   hyper, X_val, y_val, stream,
                                   trainable="all", history=history)
    trained = [NodeParams(W1[i], float(b1[i]), W2[:, i], b2) for i in range(nodes)]
    return LayeredNetwork(trained, activation)


def grid_search(ds: Dataset, split: Split, max_nodes: int, hyper: TrainHyper,
                activation: str, init_dist: str, master_seed: int):
    """Best validation-accuracy topology over 1..max_nodes (ties: fewest)."""
    if max_nodes < 1:
        raise ValueError("max_nodes must be >= 1")
    from .network import predict_batch

    va = list(split.validation) or list(split.train)
    best = None
    for nodes in range(1, max_nodes + 1):
        stream = derive_stream(master_seed, f"grid-{nodes}")
        net = train_fixed_topology(ds, split, nodes, hyper, activation, init_dist, stream)
        labels, _ = predict_batch(net, ds.features[va])
        acc = accuracy(ds.labels[va], labels)
        if best is None or acc > best[0]:
            best = (acc, nodes, net)
    return best[1], best[2]


def run_twd_fixed(ds: Dataset, split: Split, cfg: TrainConfig,
                  matrix: CostMatrix | None = None,
                  triple: tuple | None = None):
    """Level loop with one constant threshold triple at every level.

    The three-way pair applies while some equivalence class still holds
    more than one misclassified instance; otherwise (and always at the
    level cap) the two-way threshold settles the remainder. ``triple``
    optionally replays recorded (alpha, beta, gamma) values in place of the
    ones the matrix derives to.
    """
    if matrix is None:
        matrix = sample_cost_matrix(derive_stream(cfg.master_seed, "cost-matrix-level-1"))
    cfg = replace(cfg, schedule=None)
    return _run_core(ds, split, cfg, FixedPolicy(matrix, cfg.t, triple))


def run_stwd_nk(ds: Dataset, split: Split, cfg: TrainConfig):
    """Sequential run without the discretizer: classes are identical rows."""
    from .trainer import run

    return run(ds, split, replace(cfg, grouping="identity"))
