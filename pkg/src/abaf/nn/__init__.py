from abaf.nn.gradcheck import grad_check
from abaf.nn.layers import (
    BatchNorm1d,
    Conv2d,
    Dropout,
    Linear,
    MaxPool2d,
    ReLU,
)
from abaf.nn.loss import softmax, softmax_cross_entropy
from abaf.nn.optim import Adam
from abaf.nn.params import (
    Module,
    ModuleList,
    Parameter,
    count_params,
    load_checkpoint,
    save_checkpoint,
)
from abaf.nn.recurrent import LSTM, MultiHeadAttention, TemporalAttention

__all__ = [
    "Adam",
    "BatchNorm1d",
    "Conv2d",
    "Dropout",
    "LSTM",
    "Linear",
    "MaxPool2d",
    "Module",
    "ModuleList",
    "MultiHeadAttention",
    "Parameter",
    "ReLU",
    "TemporalAttention",
    "count_params",
    "grad_check",
    "load_checkpoint",
    "save_checkpoint",
    "softmax",
    "softmax_cross_entropy",
]
