"""Categorical and Dirichlet tensors plus the information-theoretic primitives.

Axis convention for every tensor in the package: the normalised (outcome) axis
comes first, conditioning axes follow, and the control axis, when present, is
last.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

EPS = 1e-16
SUM_TOL = 1e-9


class AllZeroColumn(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


class NonFiniteInput(ValueError):
    pass


def log_stable(x):
    """Natural log floored at ``EPS`` so deterministic zeros stay finite."""
    return np.log(np.asarray(x, dtype=float) + EPS)


@dataclass(frozen=True)
class Axis:
    name: str
    size: int


@dataclass(frozen=True, eq=False)
class CategoricalTensor:
    """Nonnegative array whose slices along ``norm_axis`` are distributions."""

    axes: tuple[Axis, ...]
    values: np.ndarray
    norm_axis: int = 0

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "axes", tuple(self.axes))
        names = [a.name for a in self.axes]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate axis names: {names}")
        if values.shape != tuple(a.size for a in self.axes):
            raise ValueError(
                f"shape {values.shape} does not match axes {[(a.name, a.size) for a in self.axes]}"
            )
        if np.any(values < 0):
            raise ValueError("categorical tensor has negative entries")
        sums = values.sum(axis=self.norm_axis)
        if not np.allclose(sums, 1.0, rtol=0.0, atol=SUM_TOL):
            raise ValueError("columns along the normalisation axis do not sum to 1")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape


@dataclass(frozen=True, eq=False)
class DirichletTensor:
    """Concentration parameters for a congruent :class:`CategoricalTensor`."""

    axes: tuple[Axis, ...]
    alpha: np.ndarray
    norm_axis: int = 0

    def __post_init__(self):
        alpha = np.array(self.alpha, dtype=float)
        alpha.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "axes", tuple(self.axes))
        if alpha.shape != tuple(a.size for a in self.axes):
            raise ValueError("alpha shape does not match axes")
        if not np.all(alpha > 0):
            raise ValueError("Dirichlet concentrations must be strictly positive")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.axes)

    def column_sums(self) -> np.ndarray:
        return self.alpha.sum(axis=self.norm_axis, keepdims=True)


def validate_simplex(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1:
        raise ValueError("simplex must be a vector")
    if np.any(p < 0) or abs(p.sum() - 1.0) > SUM_TOL:
        raise ValueError(f"not a probability vector: {p}")
    return p


def normalize(t, axis: int = 0) -> np.ndarray:
    """Rescale ``t`` so every slice along ``axis`` sums to one."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("normalize expects nonnegative entries")
    sums = t.sum(axis=axis, keepdims=True)
    if np.any(sums == 0):
        raise AllZeroColumn(f"column along axis {axis} sums to zero")
    return t / sums


def kl_divergence(p, q) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise LengthMismatch(f"{p.shape} vs {q.shape}")
    return float(np.sum(p * (log_stable(p) - log_stable(q))))


def entropy(p) -> float:
    p = np.asarray(p, dtype=float)
    return float(-np.sum(p * log_stable(p)))


def softmax(x, precision: float = 1.0) -> np.ndarray:
    if precision <= 0:
        raise ValueError("precision must be positive")
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput("softmax input contains non-finite values")
    z = precision * x
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def dirichlet_mean(d: DirichletTensor) -> CategoricalTensor:
    return CategoricalTensor(d.axes, d.alpha / d.column_sums(), d.norm_axis)


def wnorm(d: DirichletTensor) -> np.ndarray:
    """Per-entry novelty weight ``(1/alpha - 1/sum(alpha)) / 2`` of a Dirichlet."""
    return 0.5 * (1.0 / d.alpha - 1.0 / d.column_sums())


def outer(vectors: Sequence[np.ndarray]) -> np.ndarray:
    out = np.ones(())
    for v in vectors:
        out = np.multiply.outer(out, np.asarray(v, dtype=float))
    return out
