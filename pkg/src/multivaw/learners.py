"""Online linear-regression learners with exact closed-form updates.

Every learner follows the same strict two-phase step protocol:

1. ``receive_features(...)``: features arrive, the learner commits to a
   parameter (and hence a prediction);
2. ``receive_response(...)``: the response arrives, sufficient statistics
   are updated, and a :class:`StepOutcome` records the step.

Calling either phase out of order raises :class:`ProtocolViolation`. A learner
instance is single-threaded; distinct instances share no mutable state.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import (
    DimensionMismatch,
    ProtocolViolation,
    RankDeficient,
    ScheduleViolation,
)

#: Fast-path inverses are re-factorized from scratch after this many
#: incremental updates, bounding floating-point drift on long streams.
WOODBURY_REFRESH_EVERY = 512


# ---------------------------------------------------------------------------
# Regularization schedules
# ---------------------------------------------------------------------------


class RegularizationSchedule:
    """Rule producing the SPD regularization matrix used at each step.

    Schedules must be nondecreasing in the Loewner order; constant kinds are
    trivially so, and :class:`ExplicitSequence` verifies its whole list at
    construction. ``constant`` drives the learner's fast-path selection.
    """

    constant = False

    def matrix(self, t: int, dim: int) -> np.ndarray:
        """Regularization matrix for step ``t`` (1-based) of a ``dim``-dim learner."""
        raise NotImplementedError


class ScaledIdentity(RegularizationSchedule):
    """Constant ``lam * I``."""

    constant = True

    def __init__(self, lam: float):
        if not lam > 0.0:
            raise ScheduleViolation(f"lam must be positive, got {lam}")
        self.lam = float(lam)
        self._cache: np.ndarray | None = None

    def matrix(self, t: int, dim: int) -> np.ndarray:
        if self._cache is None or self._cache.shape[0] != dim:
            self._cache = self.lam * np.eye(dim)
        return self._cache


class ConstantMatrix(RegularizationSchedule):
    """A fixed SPD matrix used at every step."""

    constant = True

    def __init__(self, matrix: np.ndarray):
        self._matrix = linalg.as_spd(matrix, name="regularization matrix")

    def matrix(self, t: int, dim: int) -> np.ndarray:
        if self._matrix.shape[0] != dim:
            raise DimensionMismatch(
                f"schedule is {self._matrix.shape[0]}-dimensional, learner is {dim}"
            )
        return self._matrix


class KroneckerConstant(RegularizationSchedule):
    """Constant ``kron(left, gram)`` built from two SPD factors.

    ``left`` is the (typically small) factor acting on the feature side and
    ``gram`` the factor acting on the output side, e.g. the Gram matrix of a
    fixed left feature multiplier.
    """

    constant = True

    def __init__(self, left: np.ndarray, gram: np.ndarray):
        self.left = linalg.as_spd(left, name="left factor")
        self.gram = linalg.as_spd(gram, name="gram factor")
        self._matrix = linalg.kronecker(self.left, self.gram)

    def matrix(self, t: int, dim: int) -> np.ndarray:
        if self._matrix.shape[0] != dim:
            raise DimensionMismatch(
                f"schedule is {self._matrix.shape[0]}-dimensional, learner is {dim}"
            )
        return self._matrix


class ExplicitSequence(RegularizationSchedule):
    """An explicit list of per-step SPD matrices.

    The list must be nondecreasing in the Loewner order (checked here, with
    the package-wide slack for rounding noise). Steps beyond the end of the
    list reuse the last entry, which preserves monotonicity.
    """

    constant = False

    def __init__(self, matrices):
        mats = [linalg.as_spd(m, name=f"schedule entry {i}") for i, m in enumerate(matrices)]
        if not mats:
            raise ScheduleViolation("schedule list is empty")
        dims = {m.shape[0] for m in mats}
        if len(dims) != 1:
            raise DimensionMismatch(f"schedule entries have mixed dimensions {sorted(dims)}")
        for i in range(1, len(mats)):
            if not linalg.is_loewner_nondecreasing(mats[i - 1], mats[i]):
                raise ScheduleViolation(f"schedule decreases between entries {i - 1} and {i}")
        self.matrices = mats

    def matrix(self, t: int, dim: int) -> np.ndarray:
        if self.matrices[0].shape[0] != dim:
            raise DimensionMismatch(
                f"schedule is {self.matrices[0].shape[0]}-dimensional, learner is {dim}"
            )
        return self.matrices[min(t, len(self.matrices)) - 1]


# ---------------------------------------------------------------------------
# Step records and learner state
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StepOutcome:
    """Record of one completed step: prediction, response, and squared loss."""

    t: int
    prediction: np.ndarray
    response: np.ndarray
    loss: float
    theta_norm: float


@dataclass
class LearnerState:
    """Sufficient statistics driving the closed-form prediction.

    ``A`` is the regularized Gram matrix, ``b`` the feature/response
    cross-moment, ``lambda_prev`` the regularization used at the last step,
    and ``A_inv`` the running inverse kept only on the fast path.
    """

    t: int
    A: np.ndarray
    b: np.ndarray
    lambda_prev: np.ndarray
    A_inv: np.ndarray | None = None


# ---------------------------------------------------------------------------
# MultiVAW
# ---------------------------------------------------------------------------


class MultiVAW:
    """Multivariate forward-ridge online learner.

    The parameter committed at each step solves::

        (Lambda_t + sum_{s<=t} X_s^T X_s) theta_t = sum_{s<t} X_s^T y_s

    so the current features are absorbed into the normal matrix before
    predicting. With a constant schedule the running inverse is maintained by
    rank-``n_t`` Woodbury updates; an explicit per-step schedule uses a fresh
    Cholesky factorization at every step. ``force_fresh=True`` disables the
    fast path (used by the dual-path audits).

    ``receive_features(X)`` returns the committed parameter vector; the
    prediction is ``X @ theta``, formed by the caller. Steps with zero rows
    are legal and only advance the regularizer.
    """

    def __init__(
        self,
        dim: int,
        schedule: RegularizationSchedule,
        *,
        force_fresh: bool = False,
        refresh_every: int = WOODBURY_REFRESH_EVERY,
    ):
        if dim < 1:
            raise DimensionMismatch(f"dim must be positive, got {dim}")
        self.dim = int(dim)
        self.schedule = schedule
        lam1 = np.array(schedule.matrix(1, self.dim), dtype=float)
        self.state = LearnerState(
            t=0, A=lam1.copy(), b=np.zeros(self.dim), lambda_prev=lam1
        )
        self._fast = bool(schedule.constant and not force_fresh)
        if self._fast:
            self.state.A_inv = linalg.spd_inverse(self.state.A)
        self._refresh_every = int(refresh_every)
        self._since_refresh = 0
        self._pending: tuple[np.ndarray, np.ndarray] | None = None

    @property
    def t(self) -> int:
        return self.state.t

    def receive_features(self, X: np.ndarray) -> np.ndarray:
        """Absorb the revealed features and return the committed parameter."""
        if self._pending is not None:
            raise ProtocolViolation("receive_features called twice without a response")
        X = linalg.as_feature_matrix(X, cols=self.dim)
        st = self.state
        if self.schedule.constant:
            st.A += X.T @ X
        else:
            lam_next = self.schedule.matrix(st.t + 1, self.dim)
            if lam_next is not st.lambda_prev:
                if not linalg.is_loewner_nondecreasing(st.lambda_prev, lam_next):
                    raise ScheduleViolation(
                        f"regularization decreases entering step {st.t + 1}"
                    )
            st.A = st.A - st.lambda_prev + lam_next + X.T @ X
            st.lambda_prev = lam_next
        if self._fast:
            st.A_inv = linalg._woodbury_core(st.A_inv, X)
            self._since_refresh += 1
            if self._since_refresh >= self._refresh_every:
                st.A_inv = linalg.spd_inverse(st.A)
                self._since_refresh = 0
            theta = st.A_inv @ st.b
        else:
            theta = linalg.spd_solve(st.A, st.b)
        self._pending = (X, theta)
        return theta

    def receive_response(self, y: np.ndarray) -> StepOutcome:
        """Absorb the revealed response; returns the completed step's record."""
        if self._pending is None:
            raise ProtocolViolation("receive_response called before receive_features")
        X, theta = self._pending
        y = np.asarray(y, dtype=float).reshape(-1)
        if y.shape != (X.shape[0],):
            raise DimensionMismatch(
                f"response has length {y.size}, features have {X.shape[0]} rows"
            )
        st = self.state
        st.b = st.b + X.T @ y
        st.t += 1
        self._pending = None
        prediction = X @ theta
        residual = prediction - y
        return StepOutcome(
            t=st.t,
            prediction=prediction,
            response=y.copy(),
            loss=float(residual @ residual),
            theta_norm=float(np.linalg.norm(theta)),
        )

    # -- checkpointing ------------------------------------------------------

    def save_state(self, path) -> None:
        """Write a binary checkpoint: int64 dim, row-major A and b, int64 t."""
        st = self.state
        with open(path, "wb") as fh:
            fh.write(struct.pack("<q", self.dim))
            fh.write(np.ascontiguousarray(st.A, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(st.b, dtype="<f8").tobytes())
            fh.write(struct.pack("<q", st.t))

    def load_state(self, path) -> None:
        """Restore a checkpoint written by :meth:`save_state`.

        The schedule is not serialized; the learner must be constructed with
        the same schedule for the resumed run to be meaningful.
        """
        with open(path, "rb") as fh:
            raw = fh.read()
        if len(raw) < 8:
            raise ValueError("checkpoint is truncated")
        (dim,) = struct.unpack_from("<q", raw, 0)
        expected = 8 + 8 * dim * dim + 8 * dim + 8
        if dim != self.dim:
            raise DimensionMismatch(f"checkpoint dim {dim} != learner dim {self.dim}")
        if len(raw) != expected:
            raise ValueError(f"checkpoint has {len(raw)} bytes, expected {expected}")
        A = np.frombuffer(raw, dtype="<f8", count=dim * dim, offset=8)
        b = np.frombuffer(raw, dtype="<f8", count=dim, offset=8 + 8 * dim * dim)
        (t,) = struct.unpack_from("<q", raw, 8 + 8 * dim * dim + 8 * dim)
        st = self.state
        st.A = linalg.as_spd(A.reshape(dim, dim), name="checkpoint A")
        st.b = b.astype(float).copy()
        st.t = int(t)
        st.lambda_prev = np.array(
            self.schedule.matrix(max(st.t, 1), self.dim), dtype=float
        )
        st.A_inv = linalg.spd_inverse(st.A) if self._fast else None
        self._since_refresh = 0
        self._pending = None


# ---------------------------------------------------------------------------
# Univariate forward algorithm
# ---------------------------------------------------------------------------


class VAW:
    """Univariate forward-ridge learner (rank-one inverse updates).

    Maintains ``(lam I + sum_s x_s x_s^T)^{-1}`` directly through the
    Sherman-Morrison identity; at prediction time the inverse already includes
    the current feature vector. Behaviourally identical to a one-row-per-step
    :class:`MultiVAW` with a scaled-identity schedule, but implemented as an
    independent code path.
    """

    def __init__(self, dim: int, lam: float):
        if dim < 1:
            raise DimensionMismatch(f"dim must be positive, got {dim}")
        if not lam > 0.0:
            raise ScheduleViolation(f"lam must be positive, got {lam}")
        self.dim = int(dim)
        self.lam = float(lam)
        self.theta = np.zeros(self.dim)
        self._A_inv = np.eye(self.dim) / self.lam
        self._b = np.zeros(self.dim)
        self.t = 0
        self._pending: tuple[np.ndarray, float] | None = None

    def receive_features(self, x: np.ndarray) -> float:
        """Absorb the feature vector and return the scalar prediction."""
        if self._pending is not None:
            raise ProtocolViolation("receive_features called twice without a response")
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape != (self.dim,):
            raise DimensionMismatch(f"features have length {x.size}, expected {self.dim}")
        u = self._A_inv @ x
        self._A_inv = self._A_inv - np.outer(u, u) / (1.0 + x @ u)
        self.theta = self._A_inv @ self._b
        prediction = float(x @ self.theta)
        self._pending = (x, prediction)
        return prediction

    def receive_response(self, y: float) -> StepOutcome:
        if self._pending is None:
            raise ProtocolViolation("receive_response called before receive_features")
        x, prediction = self._pending
        y = float(y)
        self._b = self._b + x * y
        self.t += 1
        self._pending = None
        return StepOutcome(
            t=self.t,
            prediction=np.array([prediction]),
            response=np.array([y]),
            loss=(prediction - y) ** 2,
            theta_norm=float(np.linalg.norm(self.theta)),
        )


# ---------------------------------------------------------------------------
# Baselines: FTRL and projected OGD
# ---------------------------------------------------------------------------


class FTRL:
    """Ridge-regularized leader on past losses only.

    Predicts with ``theta_t = (lam I + sum_{s<t} X_s^T X_s)^{-1} b_{t-1}``:
    unlike the forward learners, the current features are *not* absorbed
    before predicting, so the normal matrix lags the prediction by one step.
    """

    def __init__(self, dim: int, lam: float):
        if dim < 1:
            raise DimensionMismatch(f"dim must be positive, got {dim}")
        if not lam > 0.0:
            raise ScheduleViolation(f"lam must be positive, got {lam}")
        self.dim = int(dim)
        self.lam = float(lam)
        self.theta = np.zeros(self.dim)
        self._A_inv = np.eye(self.dim) / self.lam
        self._b = np.zeros(self.dim)
        self.t = 0
        self._pending: tuple[np.ndarray, np.ndarray] | None = None

    def receive_features(self, X: np.ndarray) -> np.ndarray:
        if self._pending is not None:
            raise ProtocolViolation("receive_features called twice without a response")
        X = linalg.as_feature_matrix(X, cols=self.dim)
        self.theta = self._A_inv @ self._b
        prediction = X @ self.theta
        self._pending = (X, prediction)
        return prediction

    def receive_response(self, y: np.ndarray) -> StepOutcome:
        if self._pending is None:
            raise ProtocolViolation("receive_response called before receive_features")
        X, prediction = self._pending
        y = np.asarray(y, dtype=float).reshape(-1)
        if y.shape != (X.shape[0],):
            raise DimensionMismatch(
                f"response has length {y.size}, features have {X.shape[0]} rows"
            )
        self._A_inv = linalg.woodbury_update(self._A_inv, X)
        self._b = self._b + X.T @ y
        self.t += 1
        self._pending = None
        residual = prediction - y
        return StepOutcome(
            t=self.t,
            prediction=prediction,
            response=y.copy(),
            loss=float(residual @ residual),
            theta_norm=float(np.linalg.norm(self.theta)),
        )


class OGD:
    """Projected online gradient descent on the squared loss.

    Starts at zero; after each response the parameter moves along
    ``-eta * 2 X^T (X theta - y)`` and is clipped componentwise to
    ``[-clip, clip]``.
    """

    def __init__(self, dim: int, eta: float, clip: float):
        if dim < 1:
            raise DimensionMismatch(f"dim must be positive, got {dim}")
        if not eta > 0.0:
            raise ValueError(f"eta must be positive, got {eta}")
        if not clip > 0.0:
            raise ValueError(f"clip must be positive, got {clip}")
        self.dim = int(dim)
        self.eta = float(eta)
        self.clip = float(clip)
        self.theta = np.zeros(self.dim)
        self.t = 0
        self._pending: tuple[np.ndarray, np.ndarray] | None = None

    def receive_features(self, X: np.ndarray) -> np.ndarray:
        if self._pending is not None:
            raise ProtocolViolation("receive_features called twice without a response")
        X = linalg.as_feature_matrix(X, cols=self.dim)
        prediction = X @ self.theta
        self._pending = (X, prediction)
        return prediction

    def receive_response(self, y: np.ndarray) -> StepOutcome:
        if self._pending is None:
            raise ProtocolViolation("receive_response called before receive_features")
        X, prediction = self._pending
        y = np.asarray(y, dtype=float).reshape(-1)
        if y.shape != (X.shape[0],):
            raise DimensionMismatch(
                f"response has length {y.size}, features have {X.shape[0]} rows"
            )
        theta_norm = float(np.linalg.norm(self.theta))
        gradient = 2.0 * (X.T @ (X @ self.theta - y))
        self.theta = np.clip(self.theta - self.eta * gradient, -self.clip, self.clip)
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


# ---------------------------------------------------------------------------
# Kronecker-structured closed form
# ---------------------------------------------------------------------------


class KroneckerMultiVAW:
    """Closed-form fast path for a fixed left factor and Kronecker regularization.

    For a fixed injective ``V`` (n x d) and SPD ``left`` (m x m), this learner
    reproduces :class:`MultiVAW` run on the vectorized problem with features
    ``kron(w^T, V)`` and regularization ``kron(left, V^T V)``, via the matrix
    closed form::

        Theta_t = (V^T V)^{-1} V^T (sum_{s<t} Y_s w_s^T) (left + sum_{s<=t} w_s w_s^T)^{-1}

    at a per-step cost of O(m^2 + d m + n d) instead of O((dm)^3).
    """

    def __init__(self, V: np.ndarray, left: np.ndarray):
        V = np.asarray(V, dtype=float)
        if V.ndim != 2:
            raise DimensionMismatch(f"V must be 2-D, got shape {V.shape}")
        if not np.all(np.isfinite(V)):
            raise ValueError("V has non-finite entries")
        gram = V.T @ V
        gram = 0.5 * (gram + gram.T)
        try:
            gram = linalg.as_spd(gram, name="V^T V")
        except Exception as exc:
            raise RankDeficient(f"V must have full column rank: {exc}") from None
        self.V = V.copy()
        self.gram = gram
        self.left = linalg.as_spd(left, name="left factor")
        self.n, self.d = V.shape
        self.m = self.left.shape[0]
        # (V^T V)^{-1} V^T, computed once
        self._pinv = linalg.spd_inverse(gram) @ V.T
        self._w_gram_inv = linalg.spd_inverse(self.left)
        self._coeff = np.zeros((self.d, self.m))  # (V^T V)^{-1} V^T sum Y_s w_s^T
        self.t = 0
        self._pending: tuple[np.ndarray, np.ndarray, float] | None = None

    def receive_features(self, w: np.ndarray) -> np.ndarray:
        """Absorb the right-factor features and return the length-n prediction."""
        if self._pending is not None:
            raise ProtocolViolation("receive_features called twice without a response")
        w = np.asarray(w, dtype=float).reshape(-1)
        if w.shape != (self.m,):
            raise DimensionMismatch(f"features have length {w.size}, expected {self.m}")
        u = self._w_gram_inv @ w
        self._w_gram_inv = self._w_gram_inv - np.outer(u, u) / (1.0 + w @ u)
        h = self._w_gram_inv @ w
        prediction = self.V @ (self._coeff @ h)
        theta_norm = float(np.linalg.norm(self._coeff @ self._w_gram_inv))
        self._pending = (w, prediction, theta_norm)
        return prediction

    def receive_response(self, Y: np.ndarray) -> StepOutcome:
        if self._pending is None:
            raise ProtocolViolation("receive_response called before receive_features")
        w, prediction, theta_norm = self._pending
        Y = np.asarray(Y, dtype=float).reshape(-1)
        if Y.shape != (self.n,):
            raise DimensionMismatch(f"response has length {Y.size}, expected {self.n}")
        self._coeff = self._coeff + np.outer(self._pinv @ Y, w)
        self.t += 1
        self._pending = None
        residual = prediction - Y
        return StepOutcome(
            t=self.t,
            prediction=prediction,
            response=Y.copy(),
            loss=float(residual @ residual),
            theta_norm=theta_norm,
        )
