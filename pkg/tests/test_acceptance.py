"""Acceptance gate: one test per shipped guarantee, one printed line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the PASS/FAIL lines.
Every tolerance is fixed here; nothing is calibrated at runtime.
"""

import json
import time

import numpy as np
import pytest

from multivaw import linalg
from multivaw.cli import main
from multivaw.datasets import synth_generate
from multivaw.evaluation import (
    best_competitor,
    regret,
    regret_bound_general,
    regret_bound_ridge,
)
from multivaw.hierarchy import build_summing_matrix, metavaw_equivalence_audit, ohf_feature_matrix
from multivaw.learners import (
    VAW,
    ConstantMatrix,
    ExplicitSequence,
    KroneckerConstant,
    MultiVAW,
    ScaledIdentity,
)
from multivaw.experiments import (
    kronecker_path_audit,
    run_algorithm,
    woodbury_path_audit,
    woodbury_speedup_ratio,
)
from tests.helpers import TWO_LEVEL_S, two_level_tree


def report_line(number, ok, detail):
    line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}: {detail}"
    print(line)
    assert ok, line


def random_spd(rng, d, shift=0.5):
    M = rng.standard_normal((d, d))
    return M.T @ M + shift * np.eye(d)


def make_schedule(rng, kind, T):
    """Random monotone schedule of the requested kind; returns (schedule, dim)."""
    if kind == "scaled":
        d = int(rng.integers(1, 9))
        return ScaledIdentity(float(rng.uniform(0.05, 5.0))), d
    if kind == "constant":
        d = int(rng.integers(1, 9))
        return ConstantMatrix(random_spd(rng, d)), d
    if kind == "kron":
        left_dim, gram_dim = [(2, 2), (2, 3), (3, 2), (2, 4), (4, 2), (1, 5), (3, 1)][
            int(rng.integers(0, 7))
        ]
        return (
            KroneckerConstant(random_spd(rng, left_dim), random_spd(rng, gram_dim)),
            left_dim * gram_dim,
        )
    if kind == "explicit":
        d = int(rng.integers(1, 9))
        mats = [random_spd(rng, d)]
        for _ in range(T - 1):
            g = rng.standard_normal(d)
            mats.append(mats[-1] + float(rng.uniform(0.0, 0.1)) * np.outer(g, g))
        return ExplicitSequence(mats), d
    raise ValueError(kind)


def random_stream(rng, d, T, allow_empty=True):
    steps = []
    for _ in range(T):
        n = int(rng.integers(0, 5)) if allow_empty and rng.uniform() < 0.1 else int(rng.integers(1, 5))
        steps.append((rng.standard_normal((n, d)), rng.standard_normal(n)))
    return steps


def play(learner, steps):
    records = []
    for X, y in steps:
        theta = learner.receive_features(X)
        records.append((X, y, X @ theta))
        learner.receive_response(y)
    return records


@pytest.fixture(scope="module")
def bound_instances():
    """200 random streams cycling through all four schedule kinds."""
    rng = np.random.default_rng(20250809)
    instances = []
    kinds = ("scaled", "constant", "kron", "explicit")
    for i in range(200):
        T = int(rng.integers(10, 301))
        schedule, d = make_schedule(rng, kinds[i % 4], T)
        steps = random_stream(rng, d, T)
        competitors = [np.zeros(d), best_competitor(steps)]
        competitors += [rng.standard_normal(d) for _ in range(20)]
        lam = float(rng.uniform(0.05, 5.0))
        instances.append((schedule, d, steps, competitors, lam))
    return instances


@pytest.fixture(scope="module")
def realizable_bundle():
    """Seeded noiseless realizable stream on the two-level tree, bounded features."""
    return synth_generate(seed=97, spec=two_level_tree(), T=800, m=5, sigma=0.0)


def test_criterion_01_general_bound_satisfaction(bound_instances):
    start = time.perf_counter()
    worst_gap = -np.inf
    for schedule, d, steps, competitors, _lam in bound_instances:
        records = play(MultiVAW(d, schedule), steps)
        for theta in competitors:
            realized = regret(records, theta).regret
            bound = regret_bound_general(schedule, steps, theta)
            worst_gap = max(worst_gap, realized - bound)
            assert realized <= bound + 1e-6
    elapsed = time.perf_counter() - start
    report_line(
        1,
        worst_gap <= 1e-6 and elapsed < 60.0,
        f"general bound holds on 200 streams x 22 competitors "
        f"(worst regret-bound gap {worst_gap:.3e}, {elapsed:.1f}s)",
    )


def test_criterion_02_ridge_bound_dominance(bound_instances):
    worst_jensen = np.inf
    worst_gap = -np.inf
    for _schedule, d, steps, competitors, lam in bound_instances:
        schedule = ScaledIdentity(lam)
        records = play(MultiVAW(d, schedule), steps)
        for theta in competitors:
            general = regret_bound_general(schedule, steps, theta)
            ridge = regret_bound_ridge(lam, steps, theta)
            realized = regret(records, theta).regret
            worst_jensen = min(worst_jensen, ridge - general)
            worst_gap = max(worst_gap, realized - ridge)
            assert ridge >= general - 1e-9
            assert realized <= ridge + 1e-6
    report_line(
        2,
        worst_jensen >= -1e-9 and worst_gap <= 1e-6,
        f"closed-form bound dominates the eigenvalue bound "
        f"(min difference {worst_jensen:.3e}) and the realized regret "
        f"(worst gap {worst_gap:.3e})",
    )


def test_criterion_03_reconciliation_equivalence():
    start = time.perf_counter()
    rng = np.random.default_rng(31)
    summing = build_summing_matrix(two_level_tree())
    worst = 0.0
    lams = (0.1, 1.0, 10.0)
    for k in range(50):
        m = int(rng.integers(1, 7))
        T = int(rng.integers(10, 101))
        stream = [(rng.standard_normal(m), rng.standard_normal(summing.n)) for _ in range(T)]
        max_y = max(np.linalg.norm(y) for _x, y in stream)
        deviation = metavaw_equivalence_audit(summing, lams[k % 3], stream)
        worst = max(worst, deviation / (1.0 + max_y))
        assert deviation <= 1e-7 * (1.0 + max_y)
    elapsed = time.perf_counter() - start
    report_line(
        3,
        worst <= 1e-7 and elapsed < 30.0,
        f"projection learner matches its vectorized equivalent on 50 streams "
        f"(worst normalized deviation {worst:.3e}, {elapsed:.1f}s)",
    )


def test_criterion_04_kronecker_path_equivalence():
    worst = kronecker_path_audit(seed=41, instances=50)
    report_line(
        4,
        worst <= 1e-8,
        f"Kronecker closed form matches the vectorized learner on 50 instances "
        f"(worst normalized deviation {worst:.3e})",
    )


def test_criterion_05_woodbury_path_equivalence_and_speed():
    worst = woodbury_path_audit(seed=43, instances=50)
    assert worst <= 1e-8
    ratio = woodbury_speedup_ratio(dim=200, rows=2, steps=500, seed=43)
    report_line(
        5,
        worst <= 1e-8 and ratio < 0.5,
        f"incremental-inverse path matches fresh factorization "
        f"(worst deviation {worst:.3e}) and is faster (wall-clock ratio {ratio:.2f})",
    )


def test_criterion_06_univariate_reduction():
    rng = np.random.default_rng(47)
    worst = 0.0
    for _ in range(50):
        d = int(rng.integers(1, 6))
        T = int(rng.integers(10, 101))
        lam = float(rng.uniform(0.1, 5.0))
        vaw = VAW(d, lam)
        multi = MultiVAW(d, ScaledIdentity(lam))
        for _ in range(T):
            x = rng.standard_normal(d)
            y = float(rng.standard_normal())
            pv = vaw.receive_features(x)
            pm = float(x @ multi.receive_features(x[None, :]))
            worst = max(worst, abs(pv - pm) / (1.0 + abs(pm)))
            assert abs(pv - pm) <= 1e-10 * (1.0 + abs(pm))
            vaw.receive_response(y)
            multi.receive_response(np.array([y]))
    # the hand-checkable instance: unit feature and response, unit ridge
    vaw = VAW(1, 1.0)
    vaw.receive_features([1.0])
    vaw.receive_response(1.0)
    hand_vaw = vaw.receive_features([1.0])
    multi = MultiVAW(1, ScaledIdentity(1.0))
    multi.receive_features(np.array([[1.0]]))
    multi.receive_response(np.array([1.0]))
    hand_multi = float(multi.receive_features(np.array([[1.0]]))[0])
    assert hand_vaw == pytest.approx(1.0 / 3.0, rel=1e-12)
    assert hand_multi == pytest.approx(1.0 / 3.0, rel=1e-12)
    report_line(
        6,
        worst <= 1e-10,
        f"scalar-response learner reduces to the matrix learner "
        f"(worst normalized deviation {worst:.3e}; hand value 1/3 reproduced)",
    )


def test_criterion_07_logarithmic_regret_growth(realizable_bundle):
    bundle = realizable_bundle
    records = run_algorithm(
        "multivaw", bundle.summing, bundle.features, bundle.responses, lam=1.0
    )
    theta_star = best_competitor([(X, y) for X, y, _ in records])
    prefix = regret(records, theta_star).regret_prefix
    checkpoints = [100, 200, 400, 800]
    values = {T: float(prefix[T - 1]) for T in checkpoints}
    concave = all(
        values[2 * T] - values[T] <= values[T] - values[T // 2] + 1e-6
        for T in (200, 400)
    )
    averages = [values[T] / T for T in checkpoints]
    decreasing = all(b < a for a, b in zip(averages, averages[1:]))
    report_line(
        7,
        concave and decreasing,
        "regret increments shrink across doublings "
        f"(R@{checkpoints} = {[f'{values[T]:.4g}' for T in checkpoints]}) "
        f"and average regret strictly decreases ({[f'{a:.3g}' for a in averages]})",
    )


def test_criterion_08_baseline_ranking(realizable_bundle):
    bundle = realizable_bundle
    grid = np.logspace(-2.0, 2.0, 9)
    vec_steps = [
        (ohf_feature_matrix(bundle.summing, x), y)
        for x, y in zip(bundle.features, bundle.responses)
    ]
    theta_star = best_competitor(vec_steps)
    best = {}
    for algorithm in ("multivaw", "metavaw", "ftrl", "ogd"):
        finals = []
        for lam in grid:
            records = run_algorithm(
                algorithm,
                bundle.summing,
                bundle.features,
                bundle.responses,
                float(lam),
            )
            finals.append(regret(records, theta_star).regret)
        best[algorithm] = min(finals)
    ok = all(best["ogd"] > best[a] for a in ("multivaw", "metavaw", "ftrl"))
    report_line(
        8,
        ok,
        "slowest baseline ranks last at its best grid point "
        f"(best regrets: " + ", ".join(f"{k}={v:.4g}" for k, v in best.items()) + ")",
    )


def test_criterion_09_summing_matrix_fidelity():
    got = build_summing_matrix(two_level_tree())
    exact = (got.n, got.d) == (8, 5) and np.array_equal(got.S, TWO_LEVEL_S)
    report_line(9, exact, "two-level tree reproduces the expected 8x5 summing matrix exactly")


def test_criterion_10_trace_logdet_inequality():
    rng = np.random.default_rng(53)
    worst = np.inf
    for _ in range(500):
        d = int(rng.integers(1, 11))
        B = random_spd(rng, d)
        X = rng.standard_normal((int(rng.integers(1, 5)), d))
        gap = linalg.trace_logdet_gap(B + X.T @ X, B)
        worst = min(worst, gap)
        assert gap >= -1e-9
    report_line(
        10,
        worst >= -1e-9,
        f"trace/log-det inequality holds on 500 nested SPD pairs (min gap {worst:.3e})",
    )


def test_criterion_11_end_to_end_determinism(tmp_path, capsys):
    def pipeline(root):
        base = tmp_path / root
        base.mkdir()
        tree = base / "tree.json"
        tree.write_text(json.dumps(two_level_tree().to_dict()), encoding="utf-8")
        assert main(
            [
                "synth",
                "--hierarchy", str(tree),
                "--steps", "60",
                "--num-features", "4",
                "--sigma", "0.2",
                "--seed", "17",
                "--out", str(base / "data"),
            ]
        ) == 0
        cfg = base / "exp.toml"
        cfg.write_text(
            "\n".join(
                [
                    "[experiment]",
                    'algorithm = "multivaw"',
                    "lam = 1.0",
                    "seed = 17",
                    "lam_grid = [0.1, 1.0, 10.0]",
                    'out = "out"',
                    "[data]",
                    'hierarchy = "tree.json"',
                    'responses = "data/responses.csv"',
                    'features = "data/features.csv"',
                ]
            ),
            encoding="utf-8",
        )
        assert main(["run", "--config", str(cfg)]) == 0
        assert main(["sweep", "--config", str(cfg)]) == 0
        return base

    a = pipeline("a")
    b = pipeline("b")
    capsys.readouterr()
    outputs_a = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    outputs_b = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    identical = outputs_a == outputs_b and all(
        (a / rel).read_bytes() == (b / rel).read_bytes() for rel in outputs_a
    )
    report_line(
        11,
        identical,
        f"synth + run + sweep produce byte-identical outputs across invocations "
        f"({len(outputs_a)} files compared)",
    )
