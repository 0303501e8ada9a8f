"""Acceptance suite: one test per criterion, one printed PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines. Criterion 1 is expected to stay red: the recorded level-2 threshold
pair (0.5389, 0.5016) is arithmetically inconsistent with the cost matrix
it is documented to derive from (the beta ratio of that matrix evaluates
to 0.49981...), so the faithful assertion cannot pass. The value is
asserted as recorded rather than patched; see the repository notes.
"""

import itertools
import json
import os
import time

import numpy as np
import pytest

from trisect import (
    Dataset,
    RngStream,
    TrainConfig,
    TrainHyper,
    build_schedule,
    derive_stream,
    empirical_nodes,
    gamma_from,
    run,
    run_twd_fixed,
    split_811,
    thresholds_from,
)
from trisect.cli import main as cli_main
from trisect.discretize import kmeans_cluster, within_sse
from trisect.network import AdamState, TrainHyper as Hyper, adam_step, cost_and_grads
from trisect.metrics import roc_auc, weighted_f1
from trisect.numerics import ACTIVATION_KINDS
from trisect.threeway import (
    ProcessCostLedger,
    ThresholdSchedule,
    accrue_process_costs,
    decision_risk_three_way,
    partition_three_way,
    sample_cost_matrix,
)

from conftest import (
    MATRIX_1,
    MATRIX_2,
    MATRIX_3,
    NODE_1,
    NODE_2,
    RECORDED_GAMMA,
    RECORDED_PAIRS,
    TOY_FEATURES,
    TOY_LABELS,
    TOY_SEED,
    TOY_SPLIT,
    synthetic_dataset,
    write_health_survey_csv,
)
from test_metrics import _oracle_auc, _oracle_weighted_f1
from test_discretize import _lloyd_fixed_point


def report(criterion: int, ok: bool, detail: str) -> None:
    print(f"[ACCEPTANCE {criterion:>2}] {'PASS' if ok else 'FAIL'} {detail}")


def _toy_dataset():
    return Dataset(TOY_FEATURES.copy(), TOY_LABELS.copy(), ("a1", "a2", "a3", "a4"))


def _toy_config():
    schedule = ThresholdSchedule(RECORDED_PAIRS, RECORDED_GAMMA,
                                 (MATRIX_1, MATRIX_2, MATRIX_3))
    return TrainConfig(t=3, activation="selu", master_seed=TOY_SEED,
                       unit_test_costs=(1.0, 2.0, 3.0),
                       unit_delay_costs=(1.0, 2.0, 3.0),
                       epsilon=2.0, clusters=2, schedule=schedule,
                       fixture_nodes=(NODE_1, NODE_2))


def test_c01_threshold_values():
    """Recorded three-level threshold values, each within 1e-4, in < 1 ms."""
    t0 = time.perf_counter()
    (a1, b1) = thresholds_from(MATRIX_1)
    (a2, b2) = thresholds_from(MATRIX_2)
    gamma = gamma_from(MATRIX_3)
    elapsed = time.perf_counter() - t0

    expected = {"alpha_1": (a1, 0.6894), "beta_1": (b1, 0.1425),
                "alpha_2": (a2, 0.5389), "beta_2": (b2, 0.5016),
                "gamma": (gamma, 0.5204)}
    failures = [f"{name}: derived {got:.6f} vs recorded {want} (|diff|={abs(got - want):.2e})"
                for name, (got, want) in expected.items() if abs(got - want) > 1e-4]
    ok = not failures and elapsed < 1e-3
    report(1, ok, f"threshold oracle ({elapsed * 1e6:.0f} us)"
           + ("" if not failures else " — " + "; ".join(failures)))
    assert elapsed < 1e-3
    assert not failures, (
        "recorded threshold values not reproduced from their matrices: "
        + "; ".join(failures)
        + " — the recorded level-2 beta is inconsistent with its source matrix"
    )


def test_c02_risk_values():
    """Level-1/level-2 decision risks 0.5510 and 0.5962 within 1e-4."""
    from trisect.discretize import EquivalenceClass

    classes1 = [EquivalenceClass((0,), 0), EquivalenceClass((3, 4), 1)]
    regions1 = partition_three_way(classes1, *RECORDED_PAIRS[0])
    risk1 = decision_risk_three_way(regions1, MATRIX_1, epsilon=2.0)

    classes2 = [EquivalenceClass((3, 4), 1)]
    regions2 = partition_three_way(classes2, *RECORDED_PAIRS[1])
    risk2 = decision_risk_three_way(regions2, MATRIX_2, epsilon=2.0)

    ok = abs(risk1 - 0.5510) <= 1e-4 and abs(risk2 - 0.5962) <= 1e-4
    report(2, ok, f"risks {risk1:.4f}/{risk2:.4f} vs 0.5510/0.5962")
    assert abs(risk1 - 0.5510) <= 1e-4
    assert abs(risk2 - 0.5962) <= 1e-4


def test_c03_process_costs():
    """Unit vectors (1,2,3) with m = (3,2) give (3,3) then (7,4) exactly."""
    ledger = ProcessCostLedger((1.0, 2.0, 3.0), (1.0, 2.0, 3.0))
    ledger = accrue_process_costs(ledger, 1, 3)
    first = ledger.totals()
    ledger = accrue_process_costs(ledger, 2, 2)
    second = ledger.totals()
    ok = first == (3.0, 3.0) and second == (7.0, 4.0)
    report(3, ok, f"costs {first} then {second}")
    assert first == (3.0, 3.0)
    assert second == (7.0, 4.0)


def test_c04_worked_example_end_to_end():
    """Fixture-mode replay of the documented two-level run, in < 1 s."""
    t0 = time.perf_counter()
    ds = _toy_dataset()
    net, ledger = run(ds, TOY_SPLIT, _toy_config())
    elapsed = time.perf_counter() - t0

    from trisect.network import predict_batch

    one_node = type(net)([NODE_1], "selu")
    labels, _ = predict_batch(one_node, TOY_FEATURES[:6])
    checks = {
        "level-1 predictions": labels.tolist() == [1, 1, 1, -1, 1, 1],
        "level-1 split": (ledger.levels[0].pn, ledger.levels[0].mn,
                          ledger.levels[0].nn) == (3, 3, 0),
        "level-1 regions": (ledger.levels[0].bl, ledger.levels[0].nl) == (2, 1),
        "level-2 regions": (ledger.levels[1].bl, ledger.levels[1].nl) == (0, 2),
        "final POS": ledger.pos == (1, 2, 5),
        "final NEG": ledger.neg == (0, 3, 4),
        "final BND empty": ledger.bnd == (),
        "two hidden nodes": net.n_nodes == 2,
        "runtime < 1 s": elapsed < 1.0,
    }
    W1, b1, W2, b2 = net.assembled()
    checks["assembled W1"] = np.abs(W1 - np.array(
        [[0.8115, -1.0612, 0.3465, 0.1514], [-0.2338, -0.1741, 0.9333, 0.2477]])).max() <= 1e-4
    checks["assembled b1"] = np.abs(b1 - np.array([0.1139, 0.0818])).max() <= 1e-4
    checks["assembled W2"] = np.abs(W2 - np.array(
        [[0.2019, 0.1343], [0.0860, 0.0133]])).max() <= 1e-4
    checks["assembled b2"] = np.abs(b2 - np.array([0.0768, 0.0821])).max() <= 1e-4

    failures = [name for name, good in checks.items() if not good]
    report(4, not failures, f"worked example ({elapsed:.3f} s)"
           + ("" if not failures else f" — failed: {failures}"))
    assert not failures


def test_c05_empirical_node_formulas():
    """Static sizing: m=61 gives m2=6 and m3=11; m=1024 gives m2=10."""
    values = (empirical_nodes("m2", 61), empirical_nodes("m3", 61, 2),
              empirical_nodes("m2", 1024))
    ok = values == (6, 11, 10)
    report(5, ok, f"node counts {values} vs (6, 11, 10)")
    assert values == (6, 11, 10)


def test_c06_schedule_validity():
    """200 seeded ten-level schedules, full chain valid, in < 5 s."""
    t0 = time.perf_counter()
    for seed in range(200):
        sched = build_schedule(
            10, stream_factory=lambda lvl, s=seed: derive_stream(s, f"cost-matrix-level-{lvl}"))
        alphas = [a for a, _ in sched.pairs]
        betas = [b for _, b in sched.pairs]
        assert len(sched.matrices) == 10
        assert 0.0 < betas[0]
        assert all(x <= y for x, y in zip(betas, betas[1:]))
        assert betas[-1] < sched.gamma < alphas[-1]
        assert all(x >= y for x, y in zip(alphas, alphas[1:]))
        assert alphas[0] < 1.0
        for mx in sched.matrices:
            assert 0.0 <= mx.lpp < mx.lbp < mx.lnp < 1.0
            assert 0.0 <= mx.lnn < mx.lbn < mx.lpn < 1.0
            assert (mx.lbn - mx.lnn) * (mx.lbp - mx.lpp) < \
                (mx.lpn - mx.lbn) * (mx.lnp - mx.lbp)
    elapsed = time.perf_counter() - t0
    ok = elapsed < 5.0
    report(6, ok, f"200 schedules, t=10, all chains valid ({elapsed:.2f} s)")
    assert elapsed < 5.0


def _synthetic_suite_specs():
    stream = RngStream(2026, "acceptance-suite")
    specs = []
    for i in range(50):
        rows = 30 + stream.randrange(171)  # 30..200
        features = 2 + stream.randrange(7)  # 2..8
        duplicates = (0, 3, 5)[stream.randrange(3)]
        specs.append((1000 + i, rows, features, duplicates))
    return specs


def _run_suite():
    results = []
    for seed, rows, features, duplicates in _synthetic_suite_specs():
        ds = synthetic_dataset(seed, rows, features, duplicate_levels=duplicates)
        split = split_811(ds, derive_stream(seed, "split"))
        cfg = TrainConfig(master_seed=seed)
        net, ledger = run(ds, split, cfg)
        results.append((seed, split, net, ledger))
    return results


@pytest.fixture(scope="module")
def synthetic_runs():
    t0 = time.perf_counter()
    results = _run_suite()
    return results, time.perf_counter() - t0


def test_c07_convergence(synthetic_runs):
    """50 random synthetic datasets terminate within 10 levels, BND empty."""
    results, elapsed = synthetic_runs
    failures = []
    for seed, split, net, ledger in results:
        if not (net.n_nodes <= 10 and len(ledger.levels) <= 10):
            failures.append(f"seed {seed}: {net.n_nodes} nodes")
        if ledger.bnd != ():
            failures.append(f"seed {seed}: BND not empty")
        if set(ledger.pos) | set(ledger.neg) != set(split.train) \
                or set(ledger.pos) & set(ledger.neg):
            failures.append(f"seed {seed}: regions do not partition the training set")
    ok = not failures and elapsed < 120.0
    report(7, ok, f"50 runs converged ({elapsed:.1f} s)"
           + ("" if not failures else f" — {failures[:3]}"))
    assert not failures
    assert elapsed < 120.0


def test_c08_cost_monotonicity(synthetic_runs):
    """Per level: test cost strictly increases, delay cost never decreases."""
    results, _ = synthetic_runs
    failures = []
    for seed, _, _, ledger in results:
        accrued = [r for r in ledger.levels if r.m > 0]
        for prev, cur in zip(accrued, accrued[1:]):
            if not cur.cost_test > prev.cost_test:
                failures.append(f"seed {seed}: test cost not strictly increasing")
            if not cur.cost_delay >= prev.cost_delay:
                failures.append(f"seed {seed}: delay cost decreased")
    multi = sum(1 for _, _, _, ledger in results
                if len([r for r in ledger.levels if r.m > 0]) > 1)
    report(8, not failures, f"cost monotonicity on all runs ({multi} multi-level runs)")
    assert not failures


def test_c09_gradient_check():
    """Analytic cost gradients vs central differences, 100 points per kind."""
    from test_network import _random_setup

    worst = 0.0
    for kind in ACTIVATION_KINDS:
        stream = RngStream(515, f"acc-grad-{kind}")
        for _ in range(100):
            X, y, W1, b1, W2, b2 = _random_setup(stream, kind)
            _, grads = cost_and_grads(X, y, W1, b1, W2, b2, kind, 0.4, 2.0, 0.1)
            tensors = [W1, b1, W2, b2]
            h = 1e-6
            for ti, tensor in enumerate(tensors):
                for idx in np.ndindex(tensor.shape):
                    orig = tensor[idx]
                    tensor[idx] = orig + h
                    up, _ = cost_and_grads(X, y, W1, b1, W2, b2, kind, 0.4, 2.0, 0.1)
                    tensor[idx] = orig - h
                    dn, _ = cost_and_grads(X, y, W1, b1, W2, b2, kind, 0.4, 2.0, 0.1)
                    tensor[idx] = orig
                    fd = (up - dn) / (2 * h)
                    rel = abs(grads[ti][idx] - fd) / max(1.0, abs(grads[ti][idx]), abs(fd))
                    worst = max(worst, rel)
                    assert rel <= 1e-5, (kind, ti, idx, rel)
    report(9, True, f"gradients match finite differences (worst rel err {worst:.2e})")


def test_c10_adam_oracle():
    """Hand-computed single step to 1e-12; zero gradient is a no-op."""
    hyper = Hyper(learning_rate=0.1, rho1=0.9, rho2=0.999, tau=1e-8)
    state = AdamState([np.array([0.5])])
    new_state, (updated,) = adam_step(state, [np.array([0.5])], [np.array([1.0])], hyper)
    expected = 0.5 - 0.1 / (1.0 + 1e-8)
    delta_ok = abs(updated[0] - expected) <= 1e-12
    moments_ok = (abs(new_state.V[0][0] - 0.1) <= 1e-15
                  and abs(new_state.S[0][0] - 0.001) <= 1e-15)

    params = [np.array([1.0, -2.0])]
    _, (unchanged,) = adam_step(AdamState(params), params, [np.zeros(2)], hyper)
    zero_ok = np.array_equal(unchanged, params[0])

    ok = delta_ok and moments_ok and zero_ok
    report(10, ok, "single-step oracle and zero-gradient no-op")
    assert delta_ok and moments_ok and zero_ok


def test_c11_metric_oracles():
    """Weighted F1 exact vs counting oracle (1000); AUC vs rank oracle (500)."""
    stream = RngStream(616, "acc-metrics")
    for _ in range(1000):
        n = 1 + stream.randrange(20)
        truth = [1 if stream.uniform() < 0.5 else -1 for _ in range(n)]
        predicted = [1 if stream.uniform() < 0.5 else -1 for _ in range(n)]
        assert weighted_f1(truth, predicted) == _oracle_weighted_f1(truth, predicted)

    worst = 0.0
    for _ in range(500):
        n = 2 + stream.randrange(14)
        truth = [1 if stream.uniform() < 0.5 else -1 for _ in range(n)]
        if all(t == 1 for t in truth):
            truth[0] = -1
        if all(t == -1 for t in truth):
            truth[0] = 1
        scores = [round(stream.uniform(), 1) for _ in range(n)]
        _, auc = roc_auc(truth, scores)
        worst = max(worst, abs(auc - _oracle_auc(truth, scores)))
        assert abs(auc - _oracle_auc(truth, scores)) <= 1e-9
    report(11, True, f"metric oracles exact (worst AUC diff {worst:.1e})")


def test_c12_discretizer_invariants():
    """Nearest-center outputs, monotone SSE, brute-force fixed-point SSE."""
    stream = RngStream(717, "acc-disc")
    for trial in range(20):
        n = 4 + stream.randrange(16)
        k = 2 + stream.randrange(3)
        pts = np.array([[stream.uniform() for _ in range(3)] for _ in range(n)])
        if np.unique(pts, axis=0).shape[0] < k:
            continue
        trace: list = []
        cl = kmeans_cluster(pts, k, RngStream(trial, "acc-k"), sse_trace=trace)
        d2 = ((pts[:, None, :] - cl.centers[None, :, :]) ** 2).sum(axis=2)
        assert np.array_equal(np.argmin(d2, axis=1), cl.assignments)
        assert all(b <= a + 1e-9 for a, b in zip(trace, trace[1:]))

    for trial in range(8):
        n = 5 + trial % 4
        pts = np.array([[stream.uniform() for _ in range(2)] for _ in range(n)])
        fixed = {round(_lloyd_fixed_point(pts, pts[list(pair)].copy()), 9)
                 for pair in itertools.combinations(range(n), 2)}
        cl = kmeans_cluster(pts, 2, RngStream(trial, "acc-bf"))
        got = within_sse(pts, cl.centers, cl.assignments)
        assert any(abs(got - s) <= 1e-9 for s in fixed)
    report(12, True, "nearest-center, monotone SSE, fixed-point SSE membership")


def test_c13_degenerate_schedule_equivalence():
    """One shared matrix: sequential and fixed-threshold ledgers identical."""
    saw_multi_level = False
    for seed in (0, 3, 7, 9):
        ds = synthetic_dataset(seed, 90, 3, duplicate_levels=3)
        split = split_811(ds, derive_stream(seed, "split"))
        matrix = sample_cost_matrix(RngStream(seed, "one-matrix"))
        hyper = TrainHyper(max_epochs=2, batch_size=32)
        degenerate = ThresholdSchedule.from_matrices([matrix] * 6)
        _, led_seq = run(ds, split, TrainConfig(t=6, master_seed=seed, hyper=hyper,
                                                schedule=degenerate))
        _, led_fix = run_twd_fixed(ds, split,
                                   TrainConfig(t=6, master_seed=seed, hyper=hyper), matrix)
        assert json.dumps(led_seq.to_dict(), sort_keys=True) == \
            json.dumps(led_fix.to_dict(), sort_keys=True), f"seed {seed}"
        saw_multi_level |= len(led_seq.levels) > 1
    report(13, saw_multi_level, "degenerate-schedule ledgers byte-identical "
                                "(incl. a multi-level run)")
    assert saw_multi_level


def test_c14_desk_scale_crossval(tmp_path):
    """Seeded 10-fold crossval on a 2000-row survey-shaped table, < 5 min.

    Uses l2 = 0.01 in the run config: the literature-default 0.1 on a
    mean-reduced loss pins the weights near zero on data of this scale
    (documented in the repository notes). Exact benchmark percentages are
    explicitly not a target; the gate is compactness plus learning beyond
    the majority class.
    """
    data = write_health_survey_csv(tmp_path / "survey.csv", seed=0)
    cfg = tmp_path / "desk.cfg"
    cfg.write_text("l2 = 0.01\n")
    out = str(tmp_path / "cv")
    t0 = time.perf_counter()
    code = cli_main(["crossval", "--data", data, "--label-col", "risk",
                     "--positive", "high", "--seed", "0", "--folds", "10",
                     "--out", out, "--config", str(cfg)])
    elapsed = time.perf_counter() - t0
    assert code == 0
    summary = json.loads(open(os.path.join(out, "summary.json")).read())
    nodes_ok = all(r["nodes"] <= 10 for r in summary["folds"])
    learned = all(r["train_accuracy"] > r["majority_fraction"] for r in summary["folds"])
    ok = nodes_ok and learned and elapsed < 300.0
    mean_acc = summary["aggregate"]["train_accuracy"]["mean"]
    report(14, ok, f"10-fold crossval: mean train accuracy {mean_acc:.3f}, "
                   f"<= {max(r['nodes'] for r in summary['folds'])} nodes/fold "
                   f"({elapsed:.1f} s)")
    assert nodes_ok
    assert learned
    assert elapsed < 300.0


def test_c15_determinism(synthetic_runs):
    """Re-running the convergence suite reproduces byte-identical ledgers."""
    results, _ = synthetic_runs
    again = _run_suite()
    for (seed, _, _, first), (_, _, _, second) in zip(results, again):
        a = json.dumps(first.to_dict(), sort_keys=True).encode()
        b = json.dumps(second.to_dict(), sort_keys=True).encode()
        assert a == b, f"seed {seed} ledger differs between runs"
    report(15, True, "50 ledgers byte-identical across reruns")
