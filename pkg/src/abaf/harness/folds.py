"""Deterministic stratified k-fold assignment and class balancing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from abaf import rng as rng_mod


@dataclass(frozen=True)
class FoldPlan:
    """Index sets for one fold: train indices and validation/test indices."""

    train_idx: np.ndarray
    test_idx: np.ndarray


def stratified_kfold(labels, k: int, seed: int, name: str = "kfold") -> list[FoldPlan]:
    """Split indices into k folds preserving the class ratio in every fold.

    Each class is shuffled with its own named stream, then dealt round-robin
    (fold j receives positions j, j+k, j+2k, ... of the shuffled class), so
    fold sizes per class differ by at most one.
    """
    y = np.asarray(labels).ravel()
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    classes = np.unique(y)
    for c in classes:
        if int((y == c).sum()) < k:
            raise ValueError(f"class {c} has fewer than k={k} members")

    fold_members: list[list[np.ndarray]] = [[] for _ in range(k)]
    for c in classes:
        idx = np.flatnonzero(y == c)
        order = rng_mod.stream(seed, f"{name}/class{c}").permutation(idx.size)
        shuffled = idx[order]
        for j in range(k):
            fold_members[j].append(shuffled[j::k])

    plans = []
    all_idx = np.arange(y.size)
    for j in range(k):
        test = np.sort(np.concatenate(fold_members[j]))
        mask = np.ones(y.size, dtype=bool)
        mask[test] = False
        plans.append(FoldPlan(train_idx=all_idx[mask], test_idx=test))
    return plans


def split_train_val(labels, val_frac: float, seed: int, name: str = "val"):
    """Stratified train/validation split; returns (train_idx, val_idx).

    Per class, ceil(frac * n) members go to validation so small classes are
    never left without one.
    """
    y = np.asarray(labels).ravel()
    if not 0.0 < val_frac < 1.0:
        raise ValueError(f"val_frac must be in (0, 1), got {val_frac}")
    val_parts = []
    train_parts = []
    for c in np.unique(y):
        idx = np.flatnonzero(y == c)
        order = rng_mod.stream(seed, f"{name}/class{c}").permutation(idx.size)
        shuffled = idx[order]
        n_val = max(1, int(np.ceil(val_frac * idx.size)))
        if n_val >= idx.size:
            raise ValueError(f"class {c} too small for val_frac={val_frac}")
        val_parts.append(shuffled[:n_val])
        train_parts.append(shuffled[n_val:])
    return np.sort(np.concatenate(train_parts)), np.sort(np.concatenate(val_parts))


def downsample_balance(labels, seed: int, name: str = "balance") -> np.ndarray:
    """Indices of a class-balanced subset: every class kept at minority size."""
    y = np.asarray(labels).ravel()
    classes = np.unique(y)
    if classes.size < 2:
        raise ValueError("need at least two classes to balance")
    n_min = min(int((y == c).sum()) for c in classes)
    kept = []
    for c in classes:
        idx = np.flatnonzero(y == c)
        order = rng_mod.stream(seed, f"{name}/class{c}").permutation(idx.size)
        kept.append(idx[order[:n_min]])
    return np.sort(np.concatenate(kept))
