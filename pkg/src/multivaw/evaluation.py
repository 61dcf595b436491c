"""Regret computation, competitor fitting, and executable regret bounds.

All evaluators are pure functions over recorded streams: losses come from the
predictions a learner actually committed, never from re-derived state, so the
same machinery serves every algorithm. The supremum constants (max response
norm, max feature norm) are measured retrospectively on the realized stream,
which makes every bound exactly evaluable.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import DimensionMismatch, RankDeficient, ScheduleViolation
from .learners import RegularizationSchedule


@dataclass
class RegretReport:
    """Cumulative losses, regret against a fixed competitor, and bound values."""

    per_step_losses: np.ndarray
    per_step_competitor_losses: np.ndarray
    cumulative_loss: float
    competitor_loss: float
    regret: float
    average_regret_curve: np.ndarray
    bound_values: dict[str, float] = field(default_factory=dict)

    @property
    def regret_prefix(self) -> np.ndarray:
        """Running regret R_t after each step."""
        return np.cumsum(self.per_step_losses) - np.cumsum(self.per_step_competitor_losses)


def regret(stream, theta: np.ndarray) -> RegretReport:
    """Evaluate regret of recorded predictions against the competitor ``theta``.

    ``stream`` is a sequence of ``(X, y, yhat)`` triples; losses are squared
    Euclidean errors of the recorded ``yhat``, competitor losses those of
    ``X @ theta``.
    """
    theta = np.asarray(theta, dtype=float).reshape(-1)
    losses, comp_losses = [], []
    for X, y, yhat in stream:
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float).reshape(-1)
        yhat = np.asarray(yhat, dtype=float).reshape(-1)
        if X.ndim != 2 or X.shape[1] != theta.size:
            raise DimensionMismatch(
                f"features of shape {X.shape} incompatible with competitor of length {theta.size}"
            )
        if y.shape != (X.shape[0],) or yhat.shape != (X.shape[0],):
            raise DimensionMismatch("response/prediction length does not match feature rows")
        losses.append(float(np.sum((yhat - y) ** 2)))
        comp_losses.append(float(np.sum((X @ theta - y) ** 2)))
    losses = np.asarray(losses)
    comp_losses = np.asarray(comp_losses)
    cumulative = float(np.sum(losses))
    competitor = float(np.sum(comp_losses))
    prefix = np.cumsum(losses) - np.cumsum(comp_losses)
    steps = np.arange(1, losses.size + 1)
    return RegretReport(
        per_step_losses=losses,
        per_step_competitor_losses=comp_losses,
        cumulative_loss=cumulative,
        competitor_loss=competitor,
        regret=cumulative - competitor,
        average_regret_curve=prefix / steps if losses.size else np.zeros(0),
    )


def best_competitor(stream) -> np.ndarray:
    """Minimum-norm least-squares competitor over the whole stream.

    Solves the stacked system with LAPACK's SVD-based solver, which resolves
    rank deficiency by the minimum-norm convention.
    """
    blocks, targets = [], []
    d = None
    for X, y in stream:
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float).reshape(-1)
        if d is None:
            d = X.shape[1]
        elif X.shape[1] != d:
            raise DimensionMismatch("inconsistent feature dimension across the stream")
        if X.shape[0]:
            blocks.append(X)
            targets.append(y)
    if d is None:
        raise ValueError("best_competitor requires a nonempty stream")
    if not blocks:
        return np.zeros(d)
    design = np.vstack(blocks)
    rhs = np.concatenate(targets)
    theta, *_ = np.linalg.lstsq(design, rhs, rcond=None)
    return theta


def _max_response_norm(ys) -> float:
    norms = [float(np.linalg.norm(np.asarray(y, dtype=float))) for y in ys]
    return max(norms, default=0.0)


def _validate_monotone(schedule: RegularizationSchedule, T: int, dim: int) -> None:
    if schedule.constant or T <= 1:
        return
    previous = schedule.matrix(1, dim)
    for t in range(2, T + 1):
        nxt = schedule.matrix(t, dim)
        if nxt is not previous and not linalg.is_loewner_nondecreasing(previous, nxt):
            raise ScheduleViolation(f"regularization decreases entering step {t}")
        previous = nxt


def regret_bound_general(
    schedule: RegularizationSchedule, stream, theta: np.ndarray
) -> float:
    """Eigenvalue log-ratio regret bound for a monotone regularization schedule.

    Evaluates ``||theta||^2_{Lambda_T} + ybar^2 sum_i log(lam_i(A_T) / lam_i(Lambda_1))``
    with ``A_T`` the final regularized Gram matrix and ``ybar`` the largest
    response norm seen in the stream.
    """
    theta = np.asarray(theta, dtype=float).reshape(-1)
    d = theta.size
    stream = list(stream)
    T = len(stream)
    _validate_monotone(schedule, T, d)
    lam_first = np.asarray(schedule.matrix(1, d), dtype=float)
    lam_last = np.asarray(schedule.matrix(max(T, 1), d), dtype=float)
    gram = np.zeros((d, d))
    for X, _y in stream:
        X = np.asarray(X, dtype=float)
        if X.shape[1] != d:
            raise DimensionMismatch("feature dimension does not match competitor")
        gram += X.T @ X
    A_final = lam_last + gram
    w_final = linalg.symmetric_eigenvalues(0.5 * (A_final + A_final.T))
    w_first = linalg.symmetric_eigenvalues(lam_first)
    ybar = _max_response_norm(y for _X, y in stream)
    quad = float(theta @ lam_last @ theta)
    return quad + ybar**2 * float(np.sum(np.log(w_final / w_first)))


def regret_bound_ridge(lam: float, stream, theta: np.ndarray) -> float:
    """Closed-form regret bound for the constant ``lam * I`` schedule.

    ``lam ||theta||^2 + d ybar^2 log(1 + T Xbar^2 / (d lam))`` with ``Xbar``
    the largest Frobenius norm of a feature block.
    """
    if not lam > 0.0:
        raise ValueError(f"lam must be positive, got {lam}")
    theta = np.asarray(theta, dtype=float).reshape(-1)
    d = theta.size
    stream = list(stream)
    T = len(stream)
    ybar = _max_response_norm(y for _X, y in stream)
    xbar_sq = max(
        (float(np.sum(np.asarray(X, dtype=float) ** 2)) for X, _y in stream),
        default=0.0,
    )
    return lam * float(theta @ theta) + d * ybar**2 * float(
        np.log1p(T * xbar_sq / (d * lam))
    )


def regret_bound_ohf(lam: float, stream, Theta: np.ndarray, variant: str = "standard") -> float:
    """Regret bounds for coherent forecasting streams of ``(S_t, x_t, y_t)``.

    ``variant="standard"`` evaluates the bound of the vectorized learner under
    ``lam * I`` regularization; ``variant="metavaw"`` evaluates the bound of
    the projection-based learner, which requires a time-invariant injective
    summing matrix.
    """
    if not lam > 0.0:
        raise ValueError(f"lam must be positive, got {lam}")
    Theta = np.asarray(Theta, dtype=float)
    if Theta.ndim != 2:
        raise DimensionMismatch(f"Theta must be 2-D, got shape {Theta.shape}")
    d, m = Theta.shape
    stream = list(stream)
    T = len(stream)
    ybar = _max_response_norm(y for _S, _x, y in stream)
    xbar_sq = max(
        (float(np.sum(np.asarray(x, dtype=float) ** 2)) for _S, x, _y in stream),
        default=0.0,
    )
    if variant == "standard":
        sbar_sq = max(
            (float(np.sum(np.asarray(S, dtype=float) ** 2)) for S, _x, _y in stream),
            default=0.0,
        )
        return lam * float(np.sum(Theta**2)) + d * m * ybar**2 * float(
            np.log1p(T * xbar_sq * sbar_sq / (d * m * lam))
        )
    if variant == "metavaw":
        if not stream:
            raise ValueError("the metavaw variant needs at least one step to fix S")
        S0 = np.asarray(stream[0][0], dtype=float)
        for S, _x, _y in stream[1:]:
            if not np.array_equal(np.asarray(S, dtype=float), S0):
                raise ValueError("the metavaw variant requires a time-invariant summing matrix")
        gram = S0.T @ S0
        eigs = linalg.symmetric_eigenvalues(0.5 * (gram + gram.T))
        if eigs[-1] <= 0.0:
            raise RankDeficient("summing matrix lacks full column rank")
        s_fro_sq = float(np.sum(S0**2))
        inner = (1.0 + T * xbar_sq / (m * lam)) * s_fro_sq / (d * float(eigs[-1]))
        return lam * float(np.sum((S0 @ Theta) ** 2)) + d * m * ybar**2 * float(
            np.log(inner)
        )
    raise ValueError(f"unknown variant {variant!r}")


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

REPORT_CSV_HEADER = ["t", "loss", "cumulative_loss", "regret_prefix", "average_regret"]


def write_report_csv(report: RegretReport, path) -> None:
    """One row per step: t, loss, cumulative loss, running regret, average regret."""
    prefix = report.regret_prefix
    cumulative = np.cumsum(report.per_step_losses)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_CSV_HEADER)
        for i in range(report.per_step_losses.size):
            writer.writerow(
                [
                    i + 1,
                    repr(float(report.per_step_losses[i])),
                    repr(float(cumulative[i])),
                    repr(float(prefix[i])),
                    repr(float(report.average_regret_curve[i])),
                ]
            )


def write_summary_json(payload: dict, path) -> None:
    """Deterministic JSON sidecar (sorted keys, fixed layout)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
