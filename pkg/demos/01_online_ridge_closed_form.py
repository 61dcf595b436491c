"""Closed-form online ridge regression, from scalar responses to matrices.

Walks through the step protocol shared by every learner in the package:
features arrive, a parameter is committed, the response is revealed. The
committed parameter always solves a regularized least-squares system that
already includes the current features, which is what separates these
learners from follow-the-leader baselines.
"""

import numpy as np

from multivaw import VAW, MultiVAW, ScaledIdentity

rng = np.random.default_rng(0)

# --- the univariate learner on a tiny hand-checkable stream -----------------
print("== scalar responses ==")
vaw = VAW(dim=1, lam=1.0)
print("step 1: features x=1 ->", vaw.receive_features([1.0]), "(empty history predicts 0)")
vaw.receive_response(1.0)
pred = vaw.receive_features([1.0])
print(f"step 2: after observing y=1, same features -> {pred:.6f} (the ridge pull: 1/3)")
vaw.receive_response(1.0)

# --- the multivariate learner: matrix features, vector responses ------------
print("\n== matrix features ==")
d, T = 4, 200
theta_true = rng.standard_normal(d)
learner = MultiVAW(d, ScaledIdentity(0.5))
total_loss = 0.0
for t in range(T):
    n_t = int(rng.integers(1, 4))  # the number of rows may vary per step
    X = rng.standard_normal((n_t, d))
    y = X @ theta_true + 0.05 * rng.standard_normal(n_t)
    theta = learner.receive_features(X)
    outcome = learner.receive_response(y)
    total_loss += outcome.loss
print(f"ran {T} steps, cumulative loss {total_loss:.3f}")
print("parameter error:", np.linalg.norm(theta - theta_true))

# --- the two execution paths agree ------------------------------------------
print("\n== fast path vs fresh factorization ==")
fast = MultiVAW(d, ScaledIdentity(0.5))
slow = MultiVAW(d, ScaledIdentity(0.5), force_fresh=True)
worst = 0.0
for _ in range(100):
    X = rng.standard_normal((2, d))
    y = rng.standard_normal(2)
    worst = max(worst, np.linalg.norm(fast.receive_features(X) - slow.receive_features(X)))
    fast.receive_response(y)
    slow.receive_response(y)
print("worst parameter gap between the incremental-inverse and fresh paths:", worst)

# --- checkpointing for resumable runs ----------------------------------------
print("\n== checkpoint round trip ==")
import tempfile
from pathlib import Path

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "state.bin"
    fast.save_state(path)
    resumed = MultiVAW(d, ScaledIdentity(0.5))
    resumed.load_state(path)
    X = rng.standard_normal((2, d))
    print(
        "resumed learner commits the same parameter:",
        np.allclose(resumed.receive_features(X), fast.receive_features(X)),
    )
