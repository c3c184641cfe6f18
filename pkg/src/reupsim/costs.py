"""Training objectives evaluated over a dataset through a backend.

Three objectives: classification accuracy, cross-entropy, and chi-squared,
all built on the per-point projection probability M(theta, x_i, y_i).  The
literal published forms of accuracy (with a leading minus) and cross-entropy
(gated by the correct-classification indicator) are kept as clearly named
"as written" variants; the defaults are the standard definitions, since the
gated CE is minimized by misclassifying everything.
"""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import circuits
from .backend import Backend
from .circuits import CircuitSpec
from .data import Dataset

LOG_EPS = 1e-12


class CostKind(enum.Enum):
    ACCURACY = "accuracy"
    CROSS_ENTROPY = "cross_entropy"
    CROSS_ENTROPY_AS_WRITTEN = "cross_entropy_as_written"
    CHI_SQUARED = "chi_squared"

    @classmethod
    def parse(cls, name: str) -> "CostKind":
        try:
            return cls(str(name).lower())
        except ValueError:
            options = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown cost {name!r}; expected one of {options}") from None


def is_loss(kind: CostKind) -> bool:
    """True when lower is better; accuracy is the one maximized objective."""
    return kind is not CostKind.ACCURACY


def measured_values(spec: CircuitSpec, theta: np.ndarray, ds: Dataset,
                    backend: Backend, workers: int = 1,
                    shift: tuple[int, int, float] | None = None) -> np.ndarray:
    """Per-point estimates of M(theta, x_i, y_i) through the backend.

    The exact-probability stage may be sharded over threads; shards are
    contiguous point ranges reassembled in point order, and the backend's
    noise stage runs once over the assembled batch, so the result is
    bit-identical for any worker count.
    """
    if len(ds) == 0:
        raise ValueError("dataset is empty")
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    n = len(ds)
    if workers == 1 or n < 2 * workers:
        p = circuits.measure_batch(spec, theta, ds.x, ds.y, shift=shift)
    else:
        bounds = np.linspace(0, n, workers + 1).astype(int)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(
                lambda se: circuits.measure_batch(spec, theta, ds.x[se[0]:se[1]],
                                                  ds.y[se[0]:se[1]], shift=shift),
                zip(bounds[:-1], bounds[1:]))
            p = np.concatenate(list(parts))
    return backend.sample(p, ds.y)


def accuracy_from(measured: np.ndarray) -> float:
    """Fraction of points with estimated M above 0.5."""
    measured = np.asarray(measured)
    if measured.size == 0:
        raise ValueError("no measured values")
    return float(np.mean(measured > 0.5))


def value_from(kind: CostKind, measured: np.ndarray) -> float:
    """Objective value from a batch of per-point M estimates."""
    m = np.asarray(measured, dtype=float)
    if m.size == 0:
        raise ValueError("no measured values")
    if kind is CostKind.ACCURACY:
        return accuracy_from(m)
    if kind is CostKind.CROSS_ENTROPY:
        return float(-np.mean(np.log(np.clip(m, LOG_EPS, 1.0))))
    if kind is CostKind.CROSS_ENTROPY_AS_WRITTEN:
        gated = np.where(m > 0.5, np.log(np.clip(m, LOG_EPS, 1.0)), 0.0)
        return float(-np.mean(gated))
    if kind is CostKind.CHI_SQUARED:
        return float(np.mean((1.0 - m) ** 2))
    raise ValueError(f"unhandled cost kind {kind}")  # pragma: no cover


def evaluate(kind: CostKind, spec: CircuitSpec, theta: np.ndarray, ds: Dataset,
             backend: Backend, workers: int = 1) -> float:
    return value_from(kind, measured_values(spec, theta, ds, backend, workers=workers))


def evaluate_with_accuracy(kind: CostKind, spec: CircuitSpec, theta: np.ndarray,
                           ds: Dataset, backend: Backend,
                           workers: int = 1) -> tuple[float, float]:
    """(objective, accuracy) computed from one shared estimate batch."""
    m = measured_values(spec, theta, ds, backend, workers=workers)
    return value_from(kind, m), accuracy_from(m)


def accuracy(spec: CircuitSpec, theta: np.ndarray, ds: Dataset, backend: Backend,
             workers: int = 1) -> float:
    return evaluate(CostKind.ACCURACY, spec, theta, ds, backend, workers)


def accuracy_as_written(spec: CircuitSpec, theta: np.ndarray, ds: Dataset,
                        backend: Backend, workers: int = 1) -> float:
    """The published accuracy expression, which carries a leading minus."""
    return -accuracy(spec, theta, ds, backend, workers)


def cross_entropy(spec: CircuitSpec, theta: np.ndarray, ds: Dataset, backend: Backend,
                  workers: int = 1) -> float:
    return evaluate(CostKind.CROSS_ENTROPY, spec, theta, ds, backend, workers)


def chi_squared(spec: CircuitSpec, theta: np.ndarray, ds: Dataset, backend: Backend,
                workers: int = 1) -> float:
    return evaluate(CostKind.CHI_SQUARED, spec, theta, ds, backend, workers)


def analytic_gradient(kind: CostKind, spec: CircuitSpec, theta: np.ndarray,
                      ds: Dataset) -> np.ndarray:
    """Exact objective gradient, composed from the state-evolution gradients.

    Accuracy is piecewise constant, so its gradient is identically zero away
    from threshold crossings; the other objectives chain through dM/dtheta.
    """
    if len(ds) == 0:
        raise ValueError("dataset is empty")
    if kind is CostKind.ACCURACY:
        return np.zeros(spec.n_params)
    m = circuits.measure_batch(spec, theta, ds.x, ds.y)
    dm = circuits.analytic_gradient_batch(spec, theta, ds.x, ds.y)
    if kind is CostKind.CROSS_ENTROPY:
        w = -1.0 / np.clip(m, LOG_EPS, None)
    elif kind is CostKind.CROSS_ENTROPY_AS_WRITTEN:
        w = np.where(m > 0.5, -1.0 / np.clip(m, LOG_EPS, None), 0.0)
    elif kind is CostKind.CHI_SQUARED:
        w = -2.0 * (1.0 - m)
    else:  # pragma: no cover
        raise ValueError(f"unhandled cost kind {kind}")
    return (w[:, None] * dm).mean(axis=0)
