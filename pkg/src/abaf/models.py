"""The four sub-models, the weighted-aggregation mechanism, and late fusion.

Stream order everywhere is (envelope, spectrogram, mel, hsf).

ImageModel: conv16 -> relu -> pool -> conv32 -> relu -> pool, the conv map
reshaped to a T-token sequence, LSTM + temporal attention, then
FC(128, no bias) + batch-norm + relu (the 128-d embedding is tapped here,
before dropout) -> dropout -> FC(64) + relu -> dropout -> FC(2).

NumModel: the selected-and-standardised HSF vector as a single-token sequence
through the same LSTM/attention/FC tail, except its first FC carries a bias
and no batch-norm (that is what its published parameter count implies).

FusionModel: the four weighted 128-d embeddings as a 4-token sequence ->
LSTM + temporal attention -> FC(64) + relu -> dropout -> FC(2).

Aggregation: each sub-model gets Score_i = a*Acc + b*P + c*R + d*MacroF1 +
e*WeightedF1 on its validation split, and stream weights w_i = Score_i / sum.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from abaf.config import PipelineConfig
from abaf.nn import (
    LSTM,
    BatchNorm1d,
    Conv2d,
    Dropout,
    Linear,
    MaxPool2d,
    Module,
    ReLU,
    TemporalAttention,
)
from abaf.types import Metrics

STREAM_ORDER: tuple[str, ...] = ("envelope", "spectrogram", "mel", "hsf")


@dataclass(frozen=True)
class ImageModelConfig:
    in_channels: int = 1
    image_side: int = 64
    seq_tokens: int = 16
    lstm_hidden: int = 48
    embed_dim: int = 128
    fc_hidden: int = 64
    n_classes: int = 2
    dropout_p: float = 0.3
    conv_filters: tuple[int, int] = (16, 32)

    def __post_init__(self) -> None:
        if self.image_side % 4:
            raise ValueError(f"image side must be divisible by 4, got {self.image_side}")
        flat = self.conv_filters[1] * (self.image_side // 4) ** 2
        if flat % self.seq_tokens:
            raise ValueError(
                f"conv output of {flat} values does not split into "
                f"{self.seq_tokens} tokens"
            )

    @property
    def token_dim(self) -> int:
        return self.conv_filters[1] * (self.image_side // 4) ** 2 // self.seq_tokens


@dataclass(frozen=True)
class NumModelConfig:
    input_dim: int = 64
    lstm_hidden: int = 64
    embed_dim: int = 128
    fc_hidden: int = 64
    n_classes: int = 2
    dropout_p: float = 0.3


@dataclass(frozen=True)
class FusionConfig:
    n_streams: int = 4
    embed_dim: int = 128
    lstm_hidden: int = 64
    fc_hidden: int = 64
    n_classes: int = 2
    dropout_p: float = 0.3


def image_config_from(cfg: PipelineConfig) -> ImageModelConfig:
    return ImageModelConfig(
        in_channels=cfg.features.channels,
        image_side=cfg.features.side,
        seq_tokens=cfg.model.seq_tokens,
        lstm_hidden=cfg.model.image_lstm_hidden,
        embed_dim=cfg.model.embed_dim,
        fc_hidden=cfg.model.hidden_dim,
        dropout_p=cfg.model.dropout,
    )


def num_config_from(cfg: PipelineConfig) -> NumModelConfig:
    return NumModelConfig(
        input_dim=cfg.model.num_top_k,
        lstm_hidden=cfg.model.num_lstm_hidden,
        embed_dim=cfg.model.embed_dim,
        fc_hidden=cfg.model.hidden_dim,
        dropout_p=cfg.model.dropout,
    )


def fusion_config_from(cfg: PipelineConfig) -> FusionConfig:
    return FusionConfig(
        embed_dim=cfg.model.embed_dim,
        lstm_hidden=cfg.model.fusion_lstm_hidden,
        fc_hidden=cfg.model.hidden_dim,
        dropout_p=cfg.model.dropout,
    )


class _ClassifierTail(Module):
    """Shared FC(64) + relu -> dropout -> FC(2) tail after the embedding."""

    def __init__(self, embed_dim: int, fc_hidden: int, n_classes: int,
                 dropout_p: float, rng: np.random.Generator):
        super().__init__()
        self.drop1 = Dropout(dropout_p, rng.spawn(1)[0])
        self.fc2 = Linear(embed_dim, fc_hidden, rng)
        self.relu2 = ReLU()
        self.drop2 = Dropout(dropout_p, rng.spawn(1)[0])
        self.fc3 = Linear(fc_hidden, n_classes, rng)

    def forward(self, embedding: np.ndarray) -> np.ndarray:
        h = self.drop1.forward(embedding)
        h = self.relu2.forward(self.fc2.forward(h))
        return self.fc3.forward(self.drop2.forward(h))

    def backward(self, grad_logits: np.ndarray) -> np.ndarray:
        g = self.drop2.backward(self.fc3.backward(grad_logits))
        g = self.fc2.backward(self.relu2.backward(g))
        return self.drop1.backward(g)


class ImageModel(Module):
    def __init__(self, cfg: ImageModelConfig, rng: np.random.Generator):
        super().__init__()
        self.cfg = cfg
        f1, f2 = cfg.conv_filters
        self.conv1 = Conv2d(cfg.in_channels, f1, rng)
        self.relu_c1 = ReLU()
        self.pool1 = MaxPool2d()
        self.conv2 = Conv2d(f1, f2, rng)
        self.relu_c2 = ReLU()
        self.pool2 = MaxPool2d()
        self.lstm = LSTM(cfg.token_dim, cfg.lstm_hidden, rng)
        self.att = TemporalAttention(cfg.lstm_hidden, rng)
        self.fc1 = Linear(cfg.lstm_hidden, cfg.embed_dim, rng, bias=False)
        self.bn1 = BatchNorm1d(cfg.embed_dim)
        self.relu1 = ReLU()
        self.tail = _ClassifierTail(
            cfg.embed_dim, cfg.fc_hidden, cfg.n_classes, cfg.dropout_p, rng
        )
        self._conv_shape: tuple | None = None

    def forward(self, images: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(N, C, H, W) -> (logits (N, 2), embedding (N, 128))."""
        cfg = self.cfg
        if images.ndim != 4 or images.shape[1:] != (
            cfg.in_channels, cfg.image_side, cfg.image_side,
        ):
            raise ValueError(
                f"expected (N, {cfg.in_channels}, {cfg.image_side}, "
                f"{cfg.image_side}), got {images.shape}"
            )
        h = self.pool1.forward(self.relu_c1.forward(self.conv1.forward(images)))
        h = self.pool2.forward(self.relu_c2.forward(self.conv2.forward(h)))
        self._conv_shape = h.shape
        seq = h.reshape(h.shape[0], cfg.seq_tokens, cfg.token_dim)
        pooled = self.att.forward(self.lstm.forward(seq))
        embedding = self.relu1.forward(self.bn1.forward(self.fc1.forward(pooled)))
        return self.tail.forward(embedding), embedding

    def backward(self, grad_logits: np.ndarray) -> np.ndarray:
        return self.backward_from_embedding(self.tail.backward(grad_logits))

    def backward_from_embedding(self, grad_embedding: np.ndarray) -> np.ndarray:
        g = self.fc1.backward(self.bn1.backward(self.relu1.backward(grad_embedding)))
        g = self.lstm.backward(self.att.backward(g))
        g = g.reshape(self._conv_shape)
        g = self.conv2.backward(self.relu_c2.backward(self.pool2.backward(g)))
        return self.conv1.backward(self.relu_c1.backward(self.pool1.backward(g)))


class NumModel(Module):
    def __init__(self, cfg: NumModelConfig, rng: np.random.Generator):
        super().__init__()
        self.cfg = cfg
        self.lstm = LSTM(cfg.input_dim, cfg.lstm_hidden, rng)
        self.att = TemporalAttention(cfg.lstm_hidden, rng)
        self.fc1 = Linear(cfg.lstm_hidden, cfg.embed_dim, rng, bias=True)
        self.relu1 = ReLU()
        self.tail = _ClassifierTail(
            cfg.embed_dim, cfg.fc_hidden, cfg.n_classes, cfg.dropout_p, rng
        )

    def forward(self, vectors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(N, input_dim) -> (logits, embedding); a one-token sequence inside."""
        if vectors.ndim != 2 or vectors.shape[1] != self.cfg.input_dim:
            raise ValueError(f"expected (N, {self.cfg.input_dim}), got {vectors.shape}")
        seq = vectors[:, None, :]
        pooled = self.att.forward(self.lstm.forward(seq))
        embedding = self.relu1.forward(self.fc1.forward(pooled))
        return self.tail.forward(embedding), embedding

    def backward(self, grad_logits: np.ndarray) -> np.ndarray:
        return self.backward_from_embedding(self.tail.backward(grad_logits))

    def backward_from_embedding(self, grad_embedding: np.ndarray) -> np.ndarray:
        g = self.fc1.backward(self.relu1.backward(grad_embedding))
        g = self.lstm.backward(self.att.backward(g))
        return g[:, 0, :]


class FusionModel(Module):
    def __init__(self, cfg: FusionConfig, rng: np.random.Generator):
        super().__init__()
        self.cfg = cfg
        self.lstm = LSTM(cfg.embed_dim, cfg.lstm_hidden, rng)
        self.att = TemporalAttention(cfg.lstm_hidden, rng)
        self.fc1 = Linear(cfg.lstm_hidden, cfg.fc_hidden, rng)
        self.relu1 = ReLU()
        self.drop = Dropout(cfg.dropout_p, rng.spawn(1)[0])
        self.fc2 = Linear(cfg.fc_hidden, cfg.n_classes, rng)

    def forward(self, tokens: np.ndarray) -> np.ndarray:
        """(N, n_streams, embed_dim) fused tokens -> logits (N, 2)."""
        cfg = self.cfg
        if tokens.ndim != 3 or tokens.shape[1:] != (cfg.n_streams, cfg.embed_dim):
            raise ValueError(
                f"expected (N, {cfg.n_streams}, {cfg.embed_dim}), got {tokens.shape}"
            )
        pooled = self.att.forward(self.lstm.forward(tokens))
        h = self.relu1.forward(self.fc1.forward(pooled))
        return self.fc2.forward(self.drop.forward(h))

    def backward(self, grad_logits: np.ndarray) -> np.ndarray:
        g = self.fc1.backward(self.relu1.backward(self.drop.backward(self.fc2.backward(grad_logits))))
        return self.lstm.backward(self.att.backward(g))


@dataclass(frozen=True)
class WamPreset:
    alpha: float
    beta: float
    gamma: float
    delta: float
    epsilon: float

    def __post_init__(self) -> None:
        coefs = (self.alpha, self.beta, self.gamma, self.delta, self.epsilon)
        if any(c < 0.0 for c in coefs):
            raise ValueError(f"preset coefficients must be >= 0, got {coefs}")


WAM_PRESETS: dict[str, WamPreset] = {
    "overall": WamPreset(0.5, 0.1, 0.1, 0.1, 0.1),
    "recall": WamPreset(0.1, 0.3, 0.3, 0.1, 0.1),
    "robustness": WamPreset(0.1, 0.1, 0.1, 0.3, 0.3),
}


def wam_score(metrics: Metrics, preset: WamPreset) -> float:
    return (
        preset.alpha * metrics.acc
        + preset.beta * metrics.precision
        + preset.gamma * metrics.recall
        + preset.delta * metrics.macro_avg_f1
        + preset.epsilon * metrics.weighted_avg_f1
    )


def wam_weights(scores) -> np.ndarray:
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 1 or s.size == 0:
        raise ValueError(f"scores must be a non-empty vector, got shape {s.shape}")
    if (s < 0.0).any():
        raise ValueError(f"scores must be >= 0, got {s.tolist()}")
    total = s.sum()
    if total == 0.0:
        warnings.warn(
            "all aggregation scores are zero; falling back to uniform stream weights",
            stacklevel=2,
        )
        return np.full(s.size, 1.0 / s.size)
    return s / total


def late_fuse(embeddings, weights) -> np.ndarray:
    """Four (N, 128) embeddings + four weights -> (N, 4, 128) fused tokens."""
    w = np.asarray(weights, dtype=np.float64)
    if len(embeddings) != w.size:
        raise ValueError(f"{len(embeddings)} embeddings but {w.size} weights")
    first = embeddings[0]
    for e in embeddings[1:]:
        if e.shape != first.shape:
            raise ValueError("embeddings must share one shape")
    return np.stack([wi * e for wi, e in zip(w, embeddings)], axis=1)
