"""Experiment orchestration: configs, single runs, lambda sweeps, and audits.

A run loads a dataset against a hierarchy, plays the configured learner
through the two-phase protocol over the coherent-forecasting stream, fits the
best fixed competitor in hindsight, and emits plot-ready CSV plus a JSON
summary. Sweeps repeat this with an independent fresh learner per lambda.
All outputs are deterministic functions of (config, seed): no timestamps, no
absolute paths.
"""

from __future__ import annotations

import csv
import json
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import linalg
from .datasets import (
    SEASONAL_PERIODS,
    DatasetBundle,
    FeatureRecipe,
    ingest_csv,
    synth_generate,
    write_dataset_csv,
    write_features_csv,
)
from .errors import ConfigError
from .evaluation import (
    best_competitor,
    regret,
    regret_bound_general,
    regret_bound_ohf,
    regret_bound_ridge,
    write_report_csv,
    write_summary_json,
)
from .hierarchy import (
    HierarchySpec,
    MetaVAW,
    SummingMatrix,
    build_summing_matrix,
    metavaw_equivalence_audit,
    ohf_feature_matrix,
)
from .learners import (
    FTRL,
    OGD,
    ConstantMatrix,
    KroneckerConstant,
    KroneckerMultiVAW,
    MultiVAW,
    ScaledIdentity,
)

ALGORITHMS = ("multivaw", "metavaw", "ftrl", "ogd")

#: Defaults mirroring the benchmark protocol; configurable, not canonical.
DEFAULT_OGD_CLIP = 1e6
DEFAULT_SWEEP_GRID = tuple(np.logspace(-4.0, 4.0, 17))

SWEEP_CSV_HEADER = ["algorithm", "lam", "regret", "bound_general", "bound_ohf", "curve_file"]
PREDICTIONS_CSV_HEADER = ["t", "response_total", "prediction_total", "optimal_total"]


def demo_hierarchy() -> HierarchySpec:
    """A small two-level tree (8 nodes, 5 leaves) used by audits and demos."""
    return HierarchySpec(
        nodes=["total", "left", "right", "l1", "l2", "l3", "r1", "r2"],
        edges=[
            ["total", "left"],
            ["total", "right"],
            ["left", "l1"],
            ["left", "l2"],
            ["left", "l3"],
            ["right", "r1"],
            ["right", "r2"],
        ],
    )


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    """One experiment: dataset + hierarchy + algorithm + regularization."""

    algorithm: str = "multivaw"
    lam: float = 1.0
    lam_grid: tuple[float, ...] | None = None
    seed: int = 0
    out_dir: str = "runs"
    hierarchy_path: str | None = None
    responses_path: str | None = None
    features_path: str | None = None
    recipe: FeatureRecipe = field(default_factory=FeatureRecipe)
    regularization: str = "ridge"  # "ridge" (lam I) or "gram" (lam I x S^T S)
    ogd_eta: float | None = None  # default 1e-9 / lam
    ogd_clip: float = DEFAULT_OGD_CLIP

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; choose from {ALGORITHMS}")
        if not self.lam > 0.0:
            raise ConfigError(f"lam must be positive, got {self.lam}")
        if self.regularization not in ("ridge", "gram"):
            raise ConfigError(f"unknown regularization {self.regularization!r}")
        if self.lam_grid is not None:
            grid = tuple(float(v) for v in self.lam_grid)
            if any(v <= 0.0 for v in grid):
                raise ConfigError("lambda grid entries must be strictly positive")
            if any(b <= a for a, b in zip(grid, grid[1:])):
                raise ConfigError("lambda grid must be strictly increasing")
        if self.hierarchy_path is None:
            raise ConfigError("config lacks a hierarchy spec path")
        if self.responses_path is None:
            raise ConfigError("config lacks a dataset path")


def _parse_seasonal(value) -> int | None:
    if value in (None, "none", ""):
        return None
    if isinstance(value, str):
        if value in SEASONAL_PERIODS:
            return SEASONAL_PERIODS[value]
        try:
            return int(value)
        except ValueError:
            raise ConfigError(f"unknown seasonal encoding {value!r}") from None
    return int(value)


def _recipe_from_table(table: dict) -> FeatureRecipe:
    return FeatureRecipe(
        time_index=bool(table.get("time_index", True)),
        seasonal_period=_parse_seasonal(table.get("seasonal")),
        phase=int(table.get("phase", 0)),
    )


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    """Load a TOML or JSON experiment file; relative paths resolve beside it."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except FileNotFoundError:
        raise ConfigError(f"config file {path} does not exist") from None
    if path.suffix == ".toml":
        if sys.version_info >= (3, 11):
            import tomllib as toml_loader
        else:
            import tomli as toml_loader
        try:
            doc = toml_loader.loads(raw.decode("utf-8"))
        except Exception as exc:
            raise ConfigError(f"invalid TOML in {path}: {exc}") from None
    elif path.suffix == ".json":
        try:
            doc = json.loads(raw.decode("utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from None
    else:
        raise ConfigError(f"config file must end in .toml or .json, got {path.name}")

    exp = doc.get("experiment", {})
    data = doc.get("data", {})
    ogd = doc.get("ogd", {})
    base = path.parent

    def resolve(name):
        value = data.get(name)
        return str(base / value) if value is not None else None

    grid = exp.get("lam_grid")
    config = ExperimentConfig(
        algorithm=str(exp.get("algorithm", "multivaw")),
        lam=float(exp.get("lam", 1.0)),
        lam_grid=tuple(float(v) for v in grid) if grid is not None else None,
        seed=int(exp.get("seed", 0)),
        out_dir=str(base / exp["out"]) if "out" in exp else "runs",
        hierarchy_path=resolve("hierarchy"),
        responses_path=resolve("responses"),
        features_path=resolve("features"),
        recipe=_recipe_from_table(doc.get("features", {})),
        regularization=str(exp.get("regularization", "ridge")),
        ogd_eta=float(ogd["eta"]) if "eta" in ogd else None,
        ogd_clip=float(ogd.get("clip", DEFAULT_OGD_CLIP)),
    )
    for key, value in (overrides or {}).items():
        if value is not None:
            config = replace(config, **{key: value})
    config.validate()
    return config


def load_bundle(config: ExperimentConfig) -> DatasetBundle:
    spec = HierarchySpec.from_json(config.hierarchy_path)
    return ingest_csv(
        config.responses_path,
        spec,
        recipe=config.recipe,
        features_path=config.features_path,
    )


# ---------------------------------------------------------------------------
# Running learners over a coherent-forecasting stream
# ---------------------------------------------------------------------------


def _gram_schedule(summing: SummingMatrix, lam: float, m: int) -> KroneckerConstant:
    gram = summing.S.T @ summing.S
    return KroneckerConstant(lam * np.eye(m), 0.5 * (gram + gram.T))


def run_algorithm(
    algorithm: str,
    summing: SummingMatrix,
    features: np.ndarray,
    responses: np.ndarray,
    lam: float,
    *,
    regularization: str = "ridge",
    ogd_eta: float | None = None,
    ogd_clip: float = DEFAULT_OGD_CLIP,
):
    """Play one learner over the stream; returns ``(X_t, y_t, yhat_t)`` records."""
    m = features.shape[1]
    dim = summing.d * m
    records = []
    if algorithm == "metavaw":
        learner = MetaVAW(summing, m, lam)
        for x, y in zip(features, responses):
            prediction = learner.receive_features(x)
            records.append((ohf_feature_matrix(summing, x), y, prediction))
            learner.receive_response(y)
        return records

    if algorithm == "multivaw":
        if regularization == "gram":
            learner = MultiVAW(dim, _gram_schedule(summing, lam, m))
        else:
            learner = MultiVAW(dim, ScaledIdentity(lam))
    elif algorithm == "ftrl":
        learner = FTRL(dim, lam)
    elif algorithm == "ogd":
        eta = ogd_eta if ogd_eta is not None else 1e-9 / lam
        learner = OGD(dim, eta=eta, clip=ogd_clip)
    else:
        raise ConfigError(f"unknown algorithm {algorithm!r}")

    for x, y in zip(features, responses):
        X = ohf_feature_matrix(summing, x)
        out = learner.receive_features(X)
        prediction = X @ out if algorithm == "multivaw" else out
        records.append((X, y, prediction))
        learner.receive_response(y)
    return records


def compute_bounds(
    algorithm: str,
    regularization: str,
    summing: SummingMatrix,
    features: np.ndarray,
    responses: np.ndarray,
    lam: float,
    theta_star: np.ndarray,
) -> dict[str, float]:
    """Bound values applicable to the configured learner, at the competitor."""
    m = features.shape[1]
    vec_steps = [
        (ohf_feature_matrix(summing, x), y) for x, y in zip(features, responses)
    ]
    ohf_steps = [(summing.S, x, y) for x, y in zip(features, responses)]
    Theta_star = theta_star.reshape((summing.d, m), order="F")
    bounds: dict[str, float] = {}
    if algorithm == "multivaw" and regularization == "ridge":
        bounds["general"] = regret_bound_general(ScaledIdentity(lam), vec_steps, theta_star)
        bounds["ridge"] = regret_bound_ridge(lam, vec_steps, theta_star)
        bounds["ohf_standard"] = regret_bound_ohf(lam, ohf_steps, Theta_star, "standard")
    elif algorithm == "metavaw" or (algorithm == "multivaw" and regularization == "gram"):
        schedule = _gram_schedule(summing, lam, m)
        bounds["general"] = regret_bound_general(schedule, vec_steps, theta_star)
        bounds["ohf_metavaw"] = regret_bound_ohf(lam, ohf_steps, Theta_star, "metavaw")
    return bounds


def _write_predictions_csv(bundle: DatasetBundle, records, theta_star, path) -> None:
    m = bundle.m
    Theta_star = theta_star.reshape((bundle.summing.d, m), order="F")
    optimal = bundle.features @ Theta_star.T @ bundle.summing.S.T
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PREDICTIONS_CSV_HEADER)
        for t, (record, optimal_row) in enumerate(zip(records, optimal), start=1):
            _X, y, yhat = record
            writer.writerow(
                [
                    t,
                    repr(float(y[0])),
                    repr(float(yhat[0])),
                    repr(float(optimal_row[0])),
                ]
            )


def run_experiment(config: ExperimentConfig, bundle: DatasetBundle | None = None):
    """Run one experiment and emit regret curve, prediction panel, and summary.

    Returns the :class:`RegretReport` against the best fixed competitor fit
    once over the full stream.
    """
    config.validate()
    if bundle is None:
        bundle = load_bundle(config)
    records = run_algorithm(
        config.algorithm,
        bundle.summing,
        bundle.features,
        bundle.responses,
        config.lam,
        regularization=config.regularization,
        ogd_eta=config.ogd_eta,
        ogd_clip=config.ogd_clip,
    )
    theta_star = best_competitor([(X, y) for X, y, _ in records])
    report = regret(records, theta_star)
    report.bound_values = compute_bounds(
        config.algorithm,
        config.regularization,
        bundle.summing,
        bundle.features,
        bundle.responses,
        config.lam,
        theta_star,
    )

    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_report_csv(report, out / "regret_curve.csv")
    _write_predictions_csv(bundle, records, theta_star, out / "predictions.csv")
    summary = {
        "algorithm": config.algorithm,
        "regularization": config.regularization,
        "lam": config.lam,
        "seed": config.seed,
        "steps": bundle.T,
        "series": bundle.n,
        "bottom_series": bundle.summing.d,
        "feature_dim": bundle.m,
        "cumulative_loss": report.cumulative_loss,
        "competitor_loss": report.competitor_loss,
        "regret": report.regret,
        "bounds": report.bound_values,
        "aggregation_residual": bundle.aggregation_residual,
    }
    write_summary_json(summary, out / "summary.json")
    return report


def run_sweep(config: ExperimentConfig, bundle: DatasetBundle | None = None):
    """Independent fresh runs over the lambda grid; emits sweep.csv + curves.

    Returns the list of ``(lam, report)`` pairs in grid order.
    """
    config.validate()
    if bundle is None:
        bundle = load_bundle(config)
    grid = config.lam_grid if config.lam_grid is not None else DEFAULT_SWEEP_GRID
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    results = []
    rows = []
    for i, lam in enumerate(grid):
        per_lam = replace(config, lam=float(lam), lam_grid=None, out_dir=str(out))
        records = run_algorithm(
            per_lam.algorithm,
            bundle.summing,
            bundle.features,
            bundle.responses,
            per_lam.lam,
            regularization=per_lam.regularization,
            ogd_eta=per_lam.ogd_eta,
            ogd_clip=per_lam.ogd_clip,
        )
        theta_star = best_competitor([(X, y) for X, y, _ in records])
        report = regret(records, theta_star)
        report.bound_values = compute_bounds(
            per_lam.algorithm,
            per_lam.regularization,
            bundle.summing,
            bundle.features,
            bundle.responses,
            per_lam.lam,
            theta_star,
        )
        curve_file = f"curve_{i:02d}.csv"
        write_report_csv(report, out / curve_file)
        bound_general = report.bound_values.get("general")
        bound_ohf = report.bound_values.get("ohf_standard", report.bound_values.get("ohf_metavaw"))
        rows.append(
            [
                config.algorithm,
                repr(float(lam)),
                repr(float(report.regret)),
                "" if bound_general is None else repr(float(bound_general)),
                "" if bound_ohf is None else repr(float(bound_ohf)),
                curve_file,
            ]
        )
        results.append((float(lam), report))
    with open(out / "sweep.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_CSV_HEADER)
        writer.writerows(rows)
    return results


def run_synth(
    hierarchy_path,
    out_dir,
    *,
    steps: int,
    num_features: int,
    sigma: float,
    seed: int,
    recipe: FeatureRecipe | None = None,
) -> DatasetBundle:
    """Generate a synthetic dataset and write responses.csv / features.csv."""
    spec = HierarchySpec.from_json(hierarchy_path)
    bundle = synth_generate(
        seed=seed, spec=spec, T=steps, m=num_features, sigma=sigma, recipe=recipe
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_dataset_csv(bundle, out / "responses.csv")
    write_features_csv(bundle.features, out / "features.csv")
    return bundle


def evaluate_bounds(config: ExperimentConfig) -> dict[str, float]:
    """Fit the competitor for a recorded dataset and evaluate applicable bounds."""
    config.validate()
    bundle = load_bundle(config)
    vec_steps = [
        (ohf_feature_matrix(bundle.summing, x), y)
        for x, y in zip(bundle.features, bundle.responses)
    ]
    theta_star = best_competitor(vec_steps)
    return compute_bounds(
        config.algorithm,
        config.regularization,
        bundle.summing,
        bundle.features,
        bundle.responses,
        config.lam,
        theta_star,
    )


# ---------------------------------------------------------------------------
# Equivalence audits
# ---------------------------------------------------------------------------


def woodbury_path_audit(seed: int = 0, instances: int = 50) -> float:
    """Worst per-step parameter gap between the fast and fresh update paths."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for k in range(instances):
        d = int(rng.integers(2, 9))
        T = int(rng.integers(10, 61))
        if k % 2 == 0:
            schedule_fast = ScaledIdentity(float(rng.uniform(0.1, 2.0)))
            schedule_slow = schedule_fast
        else:
            M = rng.standard_normal((d, d))
            lam_mat = M.T @ M + 0.5 * np.eye(d)
            schedule_fast = ConstantMatrix(lam_mat)
            schedule_slow = schedule_fast
        fast = MultiVAW(d, schedule_fast)
        slow = MultiVAW(d, schedule_slow, force_fresh=True)
        for _ in range(T):
            n = int(rng.integers(1, 4))
            X = rng.standard_normal((n, d))
            y = rng.standard_normal(n)
            tf = fast.receive_features(X)
            ts = slow.receive_features(X)
            worst = max(worst, float(np.linalg.norm(tf - ts) / (1.0 + np.linalg.norm(ts))))
            fast.receive_response(y)
            slow.receive_response(y)
    return worst


def woodbury_speedup_ratio(
    dim: int = 200, rows: int = 2, steps: int = 500, seed: int = 0, repeats: int = 2
) -> float:
    """Wall-clock ratio fast/fresh for a tall constant-regularization stream.

    Each path is timed ``repeats`` times and the minimum kept, which damps
    scheduler and BLAS thread-pool noise.
    """
    rng = np.random.default_rng(seed)
    stream = [
        (rng.standard_normal((rows, dim)), rng.standard_normal(rows))
        for _ in range(steps)
    ]

    def timed(force_fresh):
        learner = MultiVAW(dim, ScaledIdentity(1.0), force_fresh=force_fresh)
        start = time.perf_counter()
        for X, y in stream:
            learner.receive_features(X)
            learner.receive_response(y)
        return time.perf_counter() - start

    # interleave the two paths so machine noise hits both alike; keep minima
    fresh_times, fast_times = [], []
    for _ in range(repeats):
        fresh_times.append(timed(True))
        fast_times.append(timed(False))
    return min(fast_times) / min(fresh_times)


def kronecker_path_audit(seed: int = 0, instances: int = 50) -> float:
    """Worst prediction gap between the Kronecker closed form and the vectorized path."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        d = int(rng.integers(1, 6))
        n = int(rng.integers(d, 9))
        m = int(rng.integers(1, 5))
        T = int(rng.integers(10, 101))
        V = rng.standard_normal((n, d))
        M = rng.standard_normal((m, m))
        left = M.T @ M + 0.5 * np.eye(m)
        kron_lr = KroneckerMultiVAW(V, left)
        gram = V.T @ V
        vec_lr = MultiVAW(d * m, KroneckerConstant(left, 0.5 * (gram + gram.T)))
        for _ in range(T):
            w = rng.standard_normal(m)
            Y = rng.standard_normal(n)
            pred_kron = kron_lr.receive_features(w)
            X = linalg.kronecker(w[None, :], V)
            theta = vec_lr.receive_features(X)
            pred_vec = X @ theta
            worst = max(
                worst,
                float(np.linalg.norm(pred_kron - pred_vec) / (1.0 + np.linalg.norm(pred_vec))),
            )
            kron_lr.receive_response(Y)
            vec_lr.receive_response(Y)
    return worst


def reconciliation_audit(
    seed: int = 0, instances: int = 50, lams=(0.1, 1.0, 10.0)
) -> float:
    """Worst normalized gap between MetaVAW and its vectorized equivalent."""
    rng = np.random.default_rng(seed)
    summing = build_summing_matrix(demo_hierarchy())
    worst = 0.0
    for k in range(instances):
        m = int(rng.integers(1, 7))
        T = int(rng.integers(10, 101))
        stream = [
            (rng.standard_normal(m), rng.standard_normal(summing.n)) for _ in range(T)
        ]
        max_y = max(float(np.linalg.norm(y)) for _x, y in stream)
        lam = lams[k % len(lams)]
        deviation = metavaw_equivalence_audit(summing, lam, stream)
        worst = max(worst, deviation / (1.0 + max_y))
    return worst


AUDIT_TOLERANCES = {
    "woodbury_path": 1e-8,
    "kronecker_path": 1e-8,
    "reconciliation_equivalence": 1e-7,
}


def run_audits(seed: int = 0, tol: float | None = None) -> dict[str, dict]:
    """Run all equivalence audits; returns per-audit deviation and verdict."""
    deviations = {
        "woodbury_path": woodbury_path_audit(seed=seed),
        "kronecker_path": kronecker_path_audit(seed=seed),
        "reconciliation_equivalence": reconciliation_audit(seed=seed),
    }
    out = {}
    for name, deviation in deviations.items():
        tolerance = tol if tol is not None else AUDIT_TOLERANCES[name]
        out[name] = {
            "deviation": deviation,
            "tolerance": tolerance,
            "passed": bool(deviation <= tolerance),
        }
    return out
