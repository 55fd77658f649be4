"""Central-difference verification of analytic gradients.

``grad_check`` perturbs every entry of the given arrays in place, re-evaluates
a scalar loss, and compares (f(x+eps) - f(x-eps)) / 2eps against the analytic
gradient.  The per-entry score is |a - n| / max(|a|, |n|); entries where both
magnitudes sit below the guard are judged by absolute difference instead,
since the relative form is meaningless at the noise floor.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

GUARD = 1e-7


def grad_check(
    loss_fn: Callable[[], float],
    arrays: Sequence[np.ndarray],
    analytic_grads: Sequence[np.ndarray],
    eps: float = 1e-5,
) -> float:
    """Max relative error between analytic and central-difference gradients."""
    if len(arrays) != len(analytic_grads):
        raise ValueError("arrays and analytic_grads must align")
    worst = 0.0
    for arr, grad in zip(arrays, analytic_grads):
        if arr.shape != grad.shape:
            raise ValueError(f"gradient shape {grad.shape} != array shape {arr.shape}")
        flat = arr.reshape(-1)
        gflat = grad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = loss_fn()
            flat[i] = orig - eps
            f_minus = loss_fn()
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * eps)
            analytic = gflat[i]
            scale = max(abs(analytic), abs(numeric))
            if scale < GUARD:
                err = 0.0 if abs(analytic - numeric) < GUARD else 1.0
            else:
                err = abs(analytic - numeric) / scale
            worst = max(worst, err)
    return worst
