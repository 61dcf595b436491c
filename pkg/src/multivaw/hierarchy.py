"""Hierarchical aggregation structures and coherent online forecasting.

A hierarchy is a forest of named nodes; each parent series equals the sum of
its children. The aggregation constraints are encoded by a summing matrix
``S`` whose image is the set of coherent signal vectors. This module builds
``S`` from tree specs, checks coherence, adapts the coherent-forecasting
protocol to the vectorized learner via ``kron(x^T, S)`` features, and
implements the projection-based MetaVAW learner with its closed form.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import linalg
from .errors import (
    CyclicHierarchy,
    DimensionMismatch,
    DuplicateNode,
    ProtocolViolation,
    RankDeficient,
    ScheduleViolation,
)
from .learners import KroneckerConstant, MultiVAW, StepOutcome


class HierarchySpec:
    """A forest of node ids with parent-sums-children aggregation semantics.

    Parameters
    ----------
    nodes : ordered iterable of node ids.
    edges : iterable of ``(parent, child)`` pairs. Each node may have at most
        one parent; the relation must be acyclic.

    Bottom nodes are the childless ones, ordered as declared in ``nodes``;
    aggregated nodes are ordered breadth-first from the roots.
    """

    def __init__(self, nodes, edges=()):
        nodes = [str(n) for n in nodes]
        if not nodes:
            raise DuplicateNode("hierarchy has no nodes")
        if len(set(nodes)) != len(nodes):
            seen, dup = set(), None
            for n in nodes:
                if n in seen:
                    dup = n
                    break
                seen.add(n)
            raise DuplicateNode(f"node {dup!r} declared twice")
        known = set(nodes)
        children: dict[str, list[str]] = {n: [] for n in nodes}
        parent: dict[str, str] = {}
        for p, c in edges:
            p, c = str(p), str(c)
            if p not in known or c not in known:
                raise ValueError(f"edge ({p!r}, {c!r}) references an undeclared node")
            if c in parent:
                raise DuplicateNode(f"node {c!r} has two parents: {parent[c]!r} and {p!r}")
            if p == c:
                raise CyclicHierarchy(f"node {p!r} is its own child")
            parent[c] = p
            children[p].append(c)

        roots = [n for n in nodes if n not in parent]
        order: list[str] = []
        queue = deque(roots)
        while queue:
            n = queue.popleft()
            order.append(n)
            queue.extend(children[n])
        if len(order) != len(nodes):
            raise CyclicHierarchy("children relation contains a cycle")

        self.nodes: tuple[str, ...] = tuple(nodes)
        self.children: dict[str, tuple[str, ...]] = {
            n: tuple(children[n]) for n in nodes
        }
        self.bottom: tuple[str, ...] = tuple(n for n in nodes if not children[n])
        self.aggregated: tuple[str, ...] = tuple(n for n in order if children[n])

    @property
    def node_order(self) -> tuple[str, ...]:
        """Aggregated nodes (breadth-first) followed by bottom nodes (declared order)."""
        return self.aggregated + self.bottom

    def leaf_set(self, node: str) -> tuple[str, ...]:
        """Bottom nodes that are descendants-or-self of ``node``."""
        if node not in self.children:
            raise ValueError(f"unknown node {node!r}")
        out: list[str] = []
        stack = [node]
        while stack:
            n = stack.pop()
            kids = self.children[n]
            if kids:
                stack.extend(reversed(kids))
            else:
                out.append(n)
        return tuple(out)

    @classmethod
    def from_dict(cls, payload: dict) -> "HierarchySpec":
        """Build from the JSON schema ``{"nodes": [...], "edges": [[p, c], ...]}``."""
        try:
            nodes = payload["nodes"]
        except KeyError:
            raise ValueError("hierarchy document lacks a 'nodes' key") from None
        edges = payload.get("edges", [])
        return cls(nodes, edges)

    @classmethod
    def from_json(cls, path) -> "HierarchySpec":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        edges = [[p, c] for p in self.nodes for c in self.children[p]]
        return {"nodes": list(self.nodes), "edges": edges}


@dataclass(frozen=True)
class SummingMatrix:
    """Aggregation constraints as a matrix: coherent vectors lie in image(S)."""

    n: int
    d: int
    S: np.ndarray
    labels: tuple[str, ...] | None = None

    @classmethod
    def from_matrix(cls, S: np.ndarray, labels=None) -> "SummingMatrix":
        """Wrap an explicit matrix (e.g. a grouped/crossed structure)."""
        S = np.asarray(S, dtype=float)
        if S.ndim != 2:
            raise DimensionMismatch(f"summing matrix must be 2-D, got shape {S.shape}")
        if not np.all(np.isfinite(S)):
            raise ValueError("summing matrix has non-finite entries")
        if labels is not None:
            labels = tuple(labels)
            if len(labels) != S.shape[0]:
                raise DimensionMismatch("label count does not match row count")
        return cls(n=S.shape[0], d=S.shape[1], S=S.copy(), labels=labels)


def build_summing_matrix(spec: HierarchySpec) -> SummingMatrix:
    """Summing matrix of a tree spec: aggregated rows first, then an identity block.

    Row ``i`` has a one in column ``j`` exactly when bottom node ``j`` is a
    descendant-or-self of node ``i``.
    """
    bottom_index = {n: j for j, n in enumerate(spec.bottom)}
    d = len(spec.bottom)
    order = spec.node_order
    S = np.zeros((len(order), d))
    for i, node in enumerate(order):
        for leaf in spec.leaf_set(node):
            S[i, bottom_index[leaf]] = 1.0
    return SummingMatrix(n=len(order), d=d, S=S, labels=order)


def _matrix_of(S) -> np.ndarray:
    return S.S if isinstance(S, SummingMatrix) else np.asarray(S, dtype=float)


class CoherenceResult(NamedTuple):
    coherent: bool
    residual: float


def coherence_check(S, y, tol: float | None = None) -> CoherenceResult:
    """Distance from ``y`` to the coherent subspace, and whether it is within ``tol``.

    The residual is the orthogonal-projection distance ``||y - P y||`` with
    ``P`` the projector onto image(S). Default tolerance is scale-aware:
    ``1e-8 * (1 + ||y||)``.
    """
    M = _matrix_of(S)
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.shape != (M.shape[0],):
        raise DimensionMismatch(f"signal has length {y.size}, expected {M.shape[0]}")
    if tol is None:
        tol = 1e-8 * (1.0 + float(np.linalg.norm(y)))
    gram = M.T @ M
    gram = 0.5 * (gram + gram.T)
    coeffs = linalg.spd_solve(gram, M.T @ y)
    residual = float(np.linalg.norm(y - M @ coeffs))
    return CoherenceResult(coherent=residual <= tol, residual=residual)


def ohf_feature_matrix(S, x: np.ndarray) -> np.ndarray:
    """Feature block ``kron(x^T, S)`` mapping ``vec(Theta)`` to ``S @ Theta @ x``."""
    M = _matrix_of(S)
    x = np.asarray(x, dtype=float).reshape(-1)
    return linalg.kronecker(x[None, :], M)


class MetaVAW:
    """Per-node ridge forecasters reconciled by orthogonal projection.

    Implements the closed form::

        yhat_t = P (sum_{s<t} y_s x_s^T) (lam I + sum_{s<=t} x_s x_s^T)^{-1} x_t

    where ``P`` projects onto image(S). The projection is applied in factored
    form (pseudo-inverse computed once), so each step costs
    ``O(m^2 + n m + n d)``. Requires a fixed, injective summing matrix; the
    class cannot represent time-varying constraints.
    """

    def __init__(self, S, feature_dim: int, lam: float):
        M = _matrix_of(S)
        if M.ndim != 2:
            raise DimensionMismatch(f"summing matrix must be 2-D, got shape {M.shape}")
        if not lam > 0.0:
            raise ScheduleViolation(f"lam must be positive, got {lam}")
        gram = M.T @ M
        gram = 0.5 * (gram + gram.T)
        try:
            gram_spd = linalg.as_spd(gram, name="S^T S")
        except Exception as exc:
            raise RankDeficient(f"summing matrix lacks full column rank: {exc}") from None
        self.S = M.copy()
        self.n, self.d = M.shape
        self.m = int(feature_dim)
        if self.m < 1:
            raise DimensionMismatch(f"feature_dim must be positive, got {feature_dim}")
        self.lam = float(lam)
        self.projection = linalg.projection_onto_image(M)
        self._pinv = linalg.spd_inverse(gram_spd) @ M.T  # S^+, d x n
        self.gram_inv = np.eye(self.m) / self.lam
        self.cross = np.zeros((self.n, self.m))  # sum of y_s x_s^T
        self.t = 0
        self._pending: tuple[np.ndarray, np.ndarray, float] | None = None

    def receive_features(self, x: np.ndarray) -> np.ndarray:
        """Absorb the feature vector and return the coherent length-n prediction."""
        if self._pending is not None:
            raise ProtocolViolation("receive_features called twice without a response")
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape != (self.m,):
            raise DimensionMismatch(f"features have length {x.size}, expected {self.m}")
        u = self.gram_inv @ x
        self.gram_inv = self.gram_inv - np.outer(u, u) / (1.0 + x @ u)
        base = self.cross @ (self.gram_inv @ x)  # stacked per-node forecasts
        prediction = self.S @ (self._pinv @ base)
        theta_norm = float(np.linalg.norm(self._pinv @ (self.cross @ self.gram_inv)))
        self._pending = (x, prediction, theta_norm)
        return prediction

    def receive_response(self, y: np.ndarray) -> StepOutcome:
        if self._pending is None:
            raise ProtocolViolation("receive_response called before receive_features")
        x, prediction, theta_norm = self._pending
        y = np.asarray(y, dtype=float).reshape(-1)
        if y.shape != (self.n,):
            raise DimensionMismatch(f"response has length {y.size}, expected {self.n}")
        self.cross = self.cross + np.outer(y, x)
        self.t += 1
        self._pending = None
        residual = prediction - y
        return StepOutcome(
            t=self.t,
            prediction=prediction,
            response=y.copy(),
            loss=float(residual @ residual),
            theta_norm=theta_norm,
        )


def metavaw_equivalence_audit(S, lam: float, stream) -> float:
    """Max prediction gap between MetaVAW and the vectorized learner it equals.

    Feeds the same ``(x, y)`` stream to MetaVAW and to :class:`MultiVAW` on
    the vectorized problem with regularization ``kron(lam I, S^T S)``, and
    returns ``max_t ||yhat_meta - yhat_vectorized||``. Returns 0.0 for an
    empty stream.
    """
    M = _matrix_of(S)
    stream = list(stream)
    if not stream:
        return 0.0
    m = np.asarray(stream[0][0], dtype=float).reshape(-1).size
    d = M.shape[1]
    meta = MetaVAW(S, m, lam)
    gram = M.T @ M
    vectorized = MultiVAW(d * m, KroneckerConstant(lam * np.eye(m), 0.5 * (gram + gram.T)))
    worst = 0.0
    for x, y in stream:
        x = np.asarray(x, dtype=float).reshape(-1)
        pred_meta = meta.receive_features(x)
        X = ohf_feature_matrix(M, x)
        theta = vectorized.receive_features(X)
        pred_vec = X @ theta
        worst = max(worst, float(np.linalg.norm(pred_meta - pred_vec)))
        meta.receive_response(y)
        vectorized.receive_response(y)
    return worst
