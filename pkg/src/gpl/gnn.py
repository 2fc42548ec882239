"""Two-layer graph-convolution binary classifier with manual backprop and Adam."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

LOG_EPS = 1e-12
ADAM_B1 = 0.9
ADAM_B2 = 0.999
ADAM_EPS = 1e-8

PARAM_NAMES = ("W1", "b1", "W2", "b2")


class ClassifierError(ValueError):
    """Raised for invalid classifier inputs or non-finite losses."""


@dataclass
class ClassifierState:
    """Parameters, Adam moments, and step counter for the 2-layer model."""

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    adam_m: dict = field(default_factory=dict)
    adam_v: dict = field(default_factory=dict)
    t: int = 0

    def params(self) -> dict:
        return {k: getattr(self, k) for k in PARAM_NAMES}


def init_classifier(d_in: int, hidden: int = 16, seed: int = 0) -> ClassifierState:
    """Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)], seeded."""
    rng = np.random.default_rng(seed)
    s1 = 1.0 / np.sqrt(d_in)
    s2 = 1.0 / np.sqrt(hidden)
    state = ClassifierState(
        W1=rng.uniform(-s1, s1, size=(d_in, hidden)),
        b1=rng.uniform(-s1, s1, size=hidden),
        W2=rng.uniform(-s2, s2, size=(hidden, 1)),
        b2=rng.uniform(-s2, s2, size=1),
    )
    for k, p in state.params().items():
        state.adam_m[k] = np.zeros_like(p)
        state.adam_v[k] = np.zeros_like(p)
    return state


def _forward_cache(state: ClassifierState, op, X):
    xs = op @ X
    pre1 = xs @ state.W1 + state.b1
    h1 = np.maximum(pre1, 0.0)
    pre2 = (op @ (h1 @ state.W2)).ravel() + state.b2[0]
    z = expit(pre2)
    return z, pre2, h1, pre1, xs


def forward(state: ClassifierState, op, X) -> np.ndarray:
    """Per-node positive posterior z = sigmoid(S relu(S X W1 + b1) W2 + b2)."""
    return _forward_cache(state, op, X)[0]


def pu_loss(z: np.ndarray, positives, negatives) -> float:
    """Group-averaged clamped cross-entropy.

    Mean of -log(z + eps) over the positive group plus mean of
    -log(1 - z + eps) over the provisional-negative group; an empty group's
    term is dropped, both empty is an error.
    """
    pos = np.asarray(list(positives), dtype=np.int64)
    neg = np.asarray(list(negatives), dtype=np.int64)
    if pos.size == 0 and neg.size == 0:
        raise ClassifierError("both groups empty")
    loss = 0.0
    if pos.size:
        loss -= float(np.mean(np.log(z[pos] + LOG_EPS)))
    if neg.size:
        loss -= float(np.mean(np.log(1.0 - z[neg] + LOG_EPS)))
    return loss


def loss_gradients(state: ClassifierState, op, X, positives, negatives):
    """Exact gradients of pu_loss in every parameter. Returns (grads, loss).

    The operator is treated as a constant: no gradient flows to the edge
    mask from the classification loss.
    """
    pos = np.asarray(list(positives), dtype=np.int64)
    neg = np.asarray(list(negatives), dtype=np.int64)
    z, pre2, h1, pre1, xs = _forward_cache(state, op, X)
    loss = pu_loss(z, pos, neg)
    if not np.isfinite(loss):
        raise ClassifierError("non-finite classification loss")

    dz = np.zeros_like(z)
    if pos.size:
        dz[pos] -= 1.0 / (pos.size * (z[pos] + LOG_EPS))
    if neg.size:
        dz[neg] += 1.0 / (neg.size * (1.0 - z[neg] + LOG_EPS))
    dpre2 = dz * z * (1.0 - z)

    dq = (op.T @ dpre2)[:, None]  # adjoint of the outer aggregation
    grads = {
        "W2": h1.T @ dq,
        "b2": np.array([dpre2.sum()]),
    }
    dpre1 = (dq @ state.W2.T) * (pre1 > 0)
    grads["W1"] = xs.T @ dpre1
    grads["b1"] = dpre1.sum(axis=0)
    return grads, loss


def backward_and_step(state: ClassifierState, op, X, positives, negatives, lr: float):
    """One exact-gradient Adam step on pu_loss. Returns (state, loss).

    lr=0 leaves the parameters unchanged.
    """
    if lr < 0:
        raise ClassifierError("lr must be >= 0")
    grads, loss = loss_gradients(state, op, X, positives, negatives)
    state.t += 1
    for k, p in state.params().items():
        gk = grads[k]
        state.adam_m[k] = ADAM_B1 * state.adam_m[k] + (1 - ADAM_B1) * gk
        state.adam_v[k] = ADAM_B2 * state.adam_v[k] + (1 - ADAM_B2) * gk * gk
        mhat = state.adam_m[k] / (1 - ADAM_B1**state.t)
        vhat = state.adam_v[k] / (1 - ADAM_B2**state.t)
        p -= lr * mhat / (np.sqrt(vhat) + ADAM_EPS)
    return state, loss


@dataclass(frozen=True)
class SelectionResult:
    s_set: np.ndarray      # provisional positives, ascending node ids
    complement: np.ndarray  # the rest of U, ascending node ids


def select_top(u_nodes, u_scores, pi_hat: float) -> SelectionResult:
    """Top round(pi_hat * |U|) unlabeled nodes by score.

    Rounding is half-up; score ties break toward the lower node index.
    """
    if not 0.0 <= pi_hat <= 1.0:
        raise ClassifierError("pi_hat must lie in [0, 1]")
    u = np.asarray(u_nodes, dtype=np.int64)
    s = np.asarray(u_scores, dtype=np.float64)
    if u.shape != s.shape:
        raise ClassifierError("node and score arrays must align")
    k = int(np.floor(pi_hat * u.size + 0.5))
    order = np.lexsort((u, -s))
    chosen = np.sort(u[order[:k]])
    rest = np.sort(u[order[k:]])
    return SelectionResult(s_set=chosen, complement=rest)


def predict_labels(z: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """Binarize scores: +1 where z >= threshold, else -1."""
    if not 0.0 < threshold < 1.0:
        raise ClassifierError("threshold must lie in (0, 1)")
    return np.where(z >= threshold, 1, -1).astype(np.int64)


CHECKPOINT_MAGIC = "gpl-checkpoint v1"


def save_checkpoint(state: ClassifierState, path) -> None:
    """Versioned text dump: parameters, Adam moments, and step counter.

    Values are written with 17 significant digits, which round-trips float64
    exactly, so save/load preserves the state bit for bit.
    """
    blocks = dict(state.params())
    for k in PARAM_NAMES:
        blocks["m" + k] = state.adam_m[k]
        blocks["v" + k] = state.adam_v[k]
    with open(path, "w", encoding="utf-8") as f:
        f.write(CHECKPOINT_MAGIC + "\n")
        f.write(f"t {state.t}\n")
        for name, arr in blocks.items():
            a = np.atleast_2d(np.asarray(arr, dtype=np.float64))
            f.write(f"{name} {a.shape[0]} {a.shape[1]}\n")
            for row in a:
                f.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def load_checkpoint(path) -> ClassifierState:
    with open(path, encoding="utf-8") as f:
        lines = [ln.rstrip("\n") for ln in f]
    if not lines or lines[0] != CHECKPOINT_MAGIC:
        raise ClassifierError(f"{path}: not a recognized checkpoint file")
    t = int(lines[1].split()[1])
    blocks = {}
    k = 2
    while k < len(lines) and lines[k].strip():
        name, r, c = lines[k].split()
        r, c = int(r), int(c)
        rows = [np.array(lines[k + 1 + q].split(), dtype=np.float64) for q in range(r)]
        blocks[name] = np.array(rows, dtype=np.float64).reshape(r, c)
        k += 1 + r
    state = ClassifierState(
        W1=blocks["W1"],
        b1=blocks["b1"].ravel(),
        W2=blocks["W2"],
        b2=blocks["b2"].ravel(),
        t=t,
    )
    for name in PARAM_NAMES:
        shaped = lambda a, ref: a.ravel() if ref.ndim == 1 else a
        state.adam_m[name] = shaped(blocks["m" + name], getattr(state, name))
        state.adam_v[name] = shaped(blocks["v" + name], getattr(state, name))
    return state
