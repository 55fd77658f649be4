"""Mini-batch training loop with validation-loss early stopping.

The monitored quantity is validation loss; an epoch counts as an improvement
only when its val loss is strictly below the best seen so far.  Training stops
once `patience` consecutive epochs fail to improve, and the parameters (and
buffers) from the best epoch are restored before returning.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from abaf import rng as rng_mod
from abaf.nn import Adam, softmax, softmax_cross_entropy


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 100
    patience: int = 10
    batch_size: int = 16
    lr: float = 1e-3

    def __post_init__(self) -> None:
        if self.patience < 1:
            raise ValueError(f"patience must be >= 1, got {self.patience}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.max_epochs < 1:
            raise ValueError(f"max_epochs must be >= 1, got {self.max_epochs}")


@dataclass
class TrainHistory:
    train_losses: list[float] = field(default_factory=list)
    val_losses: list[float] = field(default_factory=list)
    best_epoch: int = 0
    n_epochs: int = 0
    early_stopped: bool = False


def _snapshot(model) -> dict[str, np.ndarray]:
    state = {name: p.value.copy() for name, p in model.named_parameters()}
    for name, buf in model.named_buffers():
        state["buffer:" + name] = buf.copy()
    return state


def _restore(model, state: dict[str, np.ndarray]) -> None:
    for name, p in model.named_parameters():
        p.value[...] = state[name]
    for name, buf in model.named_buffers():
        buf[...] = state["buffer:" + name]


def _forward_logits(model, x: np.ndarray) -> np.ndarray:
    out = model.forward(x)
    return out[0] if isinstance(out, tuple) else out


def predict_scores(model, x: np.ndarray, batch_size: int = 64) -> np.ndarray:
    """Positive-class probabilities in eval mode, batched for memory."""
    model.eval()
    scores = []
    for i in range(0, x.shape[0], batch_size):
        logits = _forward_logits(model, x[i:i + batch_size])
        scores.append(softmax(logits)[:, 1])
    return np.concatenate(scores)


def compute_embeddings(model, x: np.ndarray, batch_size: int = 64) -> np.ndarray:
    """Penultimate embeddings in eval mode; model.forward must return them."""
    model.eval()
    parts = []
    for i in range(0, x.shape[0], batch_size):
        out = model.forward(x[i:i + batch_size])
        if not isinstance(out, tuple):
            raise TypeError("model does not expose an embedding output")
        parts.append(out[1])
    return np.concatenate(parts, axis=0)


def _eval_loss(model, x: np.ndarray, y: np.ndarray, batch_size: int = 64) -> float:
    model.eval()
    total = 0.0
    for i in range(0, x.shape[0], batch_size):
        logits = _forward_logits(model, x[i:i + batch_size])
        loss, _ = softmax_cross_entropy(logits, y[i:i + batch_size])
        total += loss * logits.shape[0]
    return total / x.shape[0]


def train_model(
    model,
    x_train: np.ndarray,
    y_train: np.ndarray,
    x_val: np.ndarray,
    y_val: np.ndarray,
    cfg: TrainConfig,
    seed: int,
    name: str = "train",
) -> TrainHistory:
    if x_train.shape[0] == 0 or x_val.shape[0] == 0:
        raise ValueError("train and val splits must be non-empty")
    if x_train.shape[0] != y_train.shape[0] or x_val.shape[0] != y_val.shape[0]:
        raise ValueError("features and labels disagree in length")

    optim = Adam(model.parameters(), lr=cfg.lr)
    history = TrainHistory()
    best_val = np.inf
    best_state = None
    bad_epochs = 0
    n = x_train.shape[0]

    for epoch in range(1, cfg.max_epochs + 1):
        model.train()
        perm = rng_mod.stream(seed, f"{name}/epoch{epoch}").permutation(n)
        loss_sum = 0.0
        seen = 0
        for i in range(0, n, cfg.batch_size):
            idx = perm[i:i + cfg.batch_size]
            if idx.size < 2 and n >= 2:
                continue  # a 1-sample remainder has no batch statistics
            logits = _forward_logits(model, x_train[idx])
            loss, grad = softmax_cross_entropy(logits, y_train[idx])
            model.zero_grad()
            model.backward(grad)
            optim.step()
            loss_sum += loss * idx.size
            seen += idx.size
        history.train_losses.append(loss_sum / max(seen, 1))

        val_loss = _eval_loss(model, x_val, y_val)
        history.val_losses.append(val_loss)
        history.n_epochs = epoch

        if val_loss < best_val:
            best_val = val_loss
            history.best_epoch = epoch
            best_state = _snapshot(model)
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= cfg.patience:
                history.early_stopped = True
                break

    _restore(model, best_state)
    model.eval()
    return history
