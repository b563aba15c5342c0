"""Regression datasets and RMSE fitness."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .expression import evaluate


@dataclass(frozen=True)
class Dataset:
    name: str
    inputs: np.ndarray
    targets: np.ndarray
    train: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        n = len(self.targets)
        if self.inputs.ndim != 2 or self.inputs.shape[0] != n or self.inputs.shape[1] < 1:
            raise ValueError("inputs must be a (rows x features) matrix matching targets")
        rows = np.concatenate([self.train, self.test])
        if len(rows) != n or not np.array_equal(np.sort(rows), np.arange(n)):
            raise ValueError("train/test must partition the rows")

    @property
    def n_features(self) -> int:
        return self.inputs.shape[1]

    def split(self, part):
        """Rows of ``"train"``, ``"test"`` or ``"all"``."""
        if part == "all":
            return self.inputs, self.targets
        if part not in ("train", "test"):
            raise ValueError(f"unknown split {part!r}")
        idx = self.train if part == "train" else self.test
        return self.inputs[idx], self.targets[idx]


def rmse(predictions, targets) -> float:
    p = np.asarray(predictions, dtype=float)
    t = np.asarray(targets, dtype=float)
    if p.shape != t.shape or p.size == 0:
        raise ValueError(f"need equal non-empty lengths, got {p.shape} and {t.shape}")
    with np.errstate(all="ignore"):
        return float(np.sqrt(np.mean((p - t) ** 2)))


def quartic_target(x):
    return x + x**2 + x**3 + x**4


def pagie_target(x, y):
    # 1/(1+x^-4) written so that x = 0 is defined
    x4, y4 = np.asarray(x, float) ** 4, np.asarray(y, float) ** 4
    return x4 / (1.0 + x4) + y4 / (1.0 + y4)


def _all_train(name, X, y):
    return Dataset(name, X, y, np.arange(len(y)), np.arange(0))


def make_quartic() -> Dataset:
    x = np.round(np.linspace(-1.0, 1.0, 21), 10)
    return _all_train("quartic", x[:, None], quartic_target(x))


def make_pagie() -> Dataset:
    axis = np.round(np.linspace(-5.0, 5.0, 26), 10)
    xx, yy = np.meshgrid(axis, axis, indexing="ij")
    X = np.column_stack([xx.ravel(), yy.ravel()])
    return _all_train("pagie", X, pagie_target(X[:, 0], X[:, 1]))


def load_csv(path, target_column, train_fraction=0.7, seed=0) -> Dataset:
    """Read a numeric CSV with a header row; the other columns become inputs."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if target_column not in header:
            raise ValueError(f"{path}: no column named {target_column!r}")
        rows = []
        for lineno, row in enumerate(reader, 2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
            try:
                rows.append([float(c) for c in row])
            except ValueError as err:
                raise ValueError(f"{path}:{lineno}: {err}") from None
    if not rows:
        raise ValueError(f"{path}: no data rows")
    if len(header) < 2:
        raise ValueError(f"{path}: need at least one input column")
    if not 0.0 < train_fraction <= 1.0:
        raise ValueError("train_fraction must lie in (0, 1]")
    data = np.array(rows)
    t = header.index(target_column)
    X = np.delete(data, t, axis=1)
    order = np.random.default_rng(seed).permutation(len(rows))
    n_train = max(1, int(round(train_fraction * len(rows))))
    return Dataset(str(path), X, data[:, t], np.sort(order[:n_train]), np.sort(order[n_train:]))


def fitness_function(dataset: Dataset, part="train"):
    """RMSE of a derivation's expression on one split; NaN when not evaluable."""
    X, y = dataset.split(part)

    def fitness(derivation):
        if derivation.tree is None or len(y) == 0:
            return math.nan
        return rmse(evaluate(derivation.tree, X), y)

    return fitness


BENCHMARKS = {"quartic": make_quartic, "pagie": make_pagie}
