"""Gradient estimators and gradient-based training loops.

Three ways to get a cost gradient through a backend:

* finite_difference: central differences on the whole cost, two cost
  evaluations per parameter (the hardware-expensive route; on a noisy
  backend the estimate inherits all the readout noise).
* parameter_shift: per-gate-angle exact rule, two shifted evaluations per
  gate angle plus one base batch for the chain-rule weights.
* analytic: closed-form state derivatives.  On an ideal backend this is the
  exact composition; on a noisy backend the shifted evaluations are sampled
  exactly like parameter_shift, since hardware cannot return a derivative
  without measuring, and the two protocols coincide for these rotations.

All estimators charge the measurement ledger with what the equivalent
hardware run would consume, so convergence-per-measurement comparisons
between optimizers are honest.

The BFGS loop supports the textbook inverse-Hessian update and an
alternative published form (a DFP-shaped inverse update); both step along
theta <- theta - alpha * H * grad with a backtracking line search.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import circuits, costs
from .backend import Backend, IdealBackend, TimeBudget, estimate_time
from .circuits import CircuitSpec
from .costs import CostKind
from .data import Dataset
from .seeding import derive_seed
from .trace import TrainingError, TrainingTrace

GRAD_NORM_TOL = 1e-8
CURVATURE_TOL = 1e-12


class GradMethod(enum.Enum):
    FINITE_DIFFERENCE = "finite_difference"
    PARAMETER_SHIFT = "parameter_shift"
    ANALYTIC = "analytic"

    @classmethod
    def parse(cls, name: str) -> "GradMethod":
        try:
            return cls(str(name).lower())
        except ValueError:
            options = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown gradient method {name!r}; expected one of {options}") from None


class OptimizerKind(enum.Enum):
    BFGS_STANDARD = "bfgs_standard"
    BFGS_AS_WRITTEN = "bfgs_as_written"
    GRADIENT_DESCENT = "gradient_descent"
    SGD = "sgd"

    @classmethod
    def parse(cls, name: str) -> "OptimizerKind":
        try:
            return cls(str(name).lower())
        except ValueError:
            options = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown optimizer {name!r}; expected one of {options}") from None


@dataclass(frozen=True)
class LineSearchSpec:
    """Backtracking search for the step length.

    armijo: halve alpha until the sufficient-decrease condition holds.
    wolfe: additionally require the strict curvature condition, at the cost
    of one gradient evaluation per trial step.
    """

    kind: str = "armijo"
    c1: float = 1e-4
    c2: float = 0.9
    alpha0: float = 1.0
    max_halvings: int = 25

    def __post_init__(self):
        if self.kind not in ("armijo", "wolfe"):
            raise ValueError(f"line search kind must be armijo or wolfe, got {self.kind!r}")
        if not 0.0 < self.c1 < 1.0:
            raise ValueError(f"c1 must lie in (0, 1), got {self.c1}")
        if not self.c1 < self.c2 < 1.0:
            raise ValueError(f"c2 must lie in (c1, 1), got {self.c2}")
        if self.alpha0 <= 0:
            raise ValueError(f"alpha0 must be positive, got {self.alpha0}")
        if self.max_halvings < 1:
            raise ValueError(f"max_halvings must be >= 1, got {self.max_halvings}")


@dataclass(frozen=True)
class GradConfig:
    method: OptimizerKind = OptimizerKind.BFGS_STANDARD
    gradient: GradMethod = GradMethod.ANALYTIC
    step: float = 1e-2
    learning_rate: float = 0.5
    batch_size: int | None = None
    max_iterations: int = 50
    line_search: LineSearchSpec = field(default_factory=LineSearchSpec)
    cost: CostKind = CostKind.CROSS_ENTROPY
    init_range: tuple[float, float] = (-np.pi, np.pi)
    target_accuracy: float | None = None
    max_estimates: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError(f"finite-difference step must be positive, got {self.step}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.max_iterations < 0:
            raise ValueError(f"max_iterations must be >= 0, got {self.max_iterations}")
        if self.target_accuracy is not None and not 0.0 < self.target_accuracy <= 1.0:
            raise ValueError(f"target_accuracy must lie in (0, 1], got {self.target_accuracy}")
        if self.max_estimates is not None and self.max_estimates < 1:
            raise ValueError(f"max_estimates must be >= 1, got {self.max_estimates}")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")


def gradient_fd(kind: CostKind, spec: CircuitSpec, theta: np.ndarray, ds: Dataset,
                backend: Backend, step: float, workers: int = 1) -> np.ndarray:
    """Central-difference cost gradient: 2 x dim cost evaluations."""
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    theta = circuits.check_theta(spec, theta)
    grad = np.empty(theta.size)
    for j in range(theta.size):
        probe = theta.copy()
        probe[j] = theta[j] + step
        f_plus = costs.evaluate(kind, spec, probe, ds, backend, workers=workers)
        probe[j] = theta[j] - step
        f_minus = costs.evaluate(kind, spec, probe, ds, backend, workers=workers)
        grad[j] = (f_plus - f_minus) / (2.0 * step)
    return grad


def _cost_weights(kind: CostKind, m: np.ndarray) -> np.ndarray:
    """dCost/dM per point, for chaining per-point measurement gradients."""
    if kind is CostKind.CROSS_ENTROPY:
        return -1.0 / np.clip(m, costs.LOG_EPS, None)
    if kind is CostKind.CROSS_ENTROPY_AS_WRITTEN:
        return np.where(m > 0.5, -1.0 / np.clip(m, costs.LOG_EPS, None), 0.0)
    if kind is CostKind.CHI_SQUARED:
        return -2.0 * (1.0 - m)
    raise ValueError(f"cost {kind.value} has no usable measurement derivative")


def gradient_parameter_shift(kind: CostKind, spec: CircuitSpec, theta: np.ndarray,
                             ds: Dataset, backend: Backend,
                             workers: int = 1) -> np.ndarray:
    """Shift-rule cost gradient: +-pi/2 evaluations per gate angle.

    Refuses the accuracy cost: an indicator has no meaningful shift gradient.
    """
    if kind is CostKind.ACCURACY:
        raise ValueError("parameter-shift gradient is undefined for the accuracy cost")
    theta = circuits.check_theta(spec, theta)
    m = costs.measured_values(spec, theta, ds, backend, workers=workers)
    w = _cost_weights(kind, m)
    n = len(ds)
    dm = np.empty((spec.layers, 2, n))
    for l in range(spec.layers):
        for gate in range(2):
            plus = costs.measured_values(spec, theta, ds, backend, workers=workers,
                                         shift=(l, gate, np.pi / 2.0))
            minus = costs.measured_values(spec, theta, ds, backend, workers=workers,
                                          shift=(l, gate, -np.pi / 2.0))
            dm[l, gate] = 0.5 * (plus - minus)
    cy, cz = circuits.ansatz_design(spec.ansatz, ds.x)
    grad = np.zeros(spec.n_params)
    for l in range(spec.layers):
        per_point = dm[l, 0][:, None] * cy + dm[l, 1][:, None] * cz
        grad[4 * l:4 * l + 4] = (w[:, None] * per_point).mean(axis=0)
    return grad


def gradient_analytic(kind: CostKind, spec: CircuitSpec, theta: np.ndarray,
                      ds: Dataset, backend: Backend, workers: int = 1) -> np.ndarray:
    """Closed-form cost gradient with hardware-equivalent accounting.

    Noisy backends route through the shift-rule sampler (measuring a
    derivative still means measuring); ideal backends return the exact
    composition and charge the same number of estimates.
    """
    if kind is CostKind.ACCURACY:
        raise ValueError("the accuracy cost has an identically-zero gradient; "
                         "pick a differentiable cost")
    if backend.is_noisy:
        return gradient_parameter_shift(kind, spec, theta, ds, backend, workers=workers)
    grad = costs.analytic_gradient(kind, spec, theta, ds)
    backend.charge((4 * spec.layers + 1) * len(ds))
    return grad


def estimate_gradient(method: GradMethod, kind: CostKind, spec: CircuitSpec,
                      theta: np.ndarray, ds: Dataset, backend: Backend,
                      step: float = 1e-2, workers: int = 1) -> np.ndarray:
    if method is GradMethod.FINITE_DIFFERENCE:
        return gradient_fd(kind, spec, theta, ds, backend, step, workers=workers)
    if method is GradMethod.PARAMETER_SHIFT:
        return gradient_parameter_shift(kind, spec, theta, ds, backend, workers=workers)
    if method is GradMethod.ANALYTIC:
        return gradient_analytic(kind, spec, theta, ds, backend, workers=workers)
    raise ValueError(f"unhandled gradient method {method}")  # pragma: no cover


def bfgs_update(H: np.ndarray, s: np.ndarray, y: np.ndarray,
                mode: OptimizerKind = OptimizerKind.BFGS_STANDARD) -> np.ndarray:
    """One inverse-Hessian update from the displacement/gradient-change pair.

    Standard mode is the textbook rank-two BFGS inverse formula.  The
    as-written mode is the alternative published form
    H - (H y y^T H)/(y^T H y) + (s s^T)/(y^T s), which is the DFP-shaped
    inverse update.  Callers must enforce the curvature safeguard first.
    """
    ys = float(y @ s)
    if ys <= CURVATURE_TOL:
        raise ValueError(f"curvature condition violated: y.s = {ys}")
    if mode is OptimizerKind.BFGS_AS_WRITTEN:
        Hy = H @ y
        return H - np.outer(Hy, Hy) / float(y @ Hy) + np.outer(s, s) / ys
    rho = 1.0 / ys
    n = s.size
    left = np.eye(n) - rho * np.outer(s, y)
    return left @ H @ left.T + rho * np.outer(s, s)


@dataclass
class _Budget:
    """Stop-condition bookkeeping shared by the gradient trainers."""

    backend: Backend
    max_estimates: int | None

    def exhausted(self, upcoming: int = 0) -> bool:
        if self.max_estimates is None:
            return False
        return self.backend.ledger.total_estimates + upcoming > self.max_estimates


def _evaluate_point(cfg: GradConfig, spec: CircuitSpec, theta: np.ndarray, ds: Dataset,
                    backend: Backend, workers: int) -> tuple[float, float]:
    return costs.evaluate_with_accuracy(cfg.cost, spec, theta, ds, backend, workers=workers)


def _initial_theta(cfg: GradConfig, spec: CircuitSpec, theta0: np.ndarray | None) -> np.ndarray:
    if theta0 is not None:
        return circuits.check_theta(spec, np.asarray(theta0, dtype=float)).copy()
    rng = np.random.default_rng(derive_seed(cfg.seed, "grad-init"))
    return rng.uniform(cfg.init_range[0], cfg.init_range[1], spec.n_params)


def _gradient_cost(method: GradMethod, spec: CircuitSpec, n_points: int) -> int:
    """Estimates one gradient evaluation will charge to the ledger."""
    if method is GradMethod.FINITE_DIFFERENCE:
        return 2 * spec.n_params * n_points
    return (4 * spec.layers + 1) * n_points


def bfgs_train(cfg: GradConfig, spec: CircuitSpec, dataset: Dataset, backend: Backend,
               theta0: np.ndarray | None = None, workers: int = 1,
               budget: TimeBudget | None = None) -> tuple[np.ndarray, TrainingTrace]:
    """Quasi-Newton minimization of the configured cost; returns the iterate
    with the best measured cost and the per-iteration trace.

    Stops on max_iterations, a gradient norm below 1e-8, an exhausted
    estimate budget, or a failed line search.
    """
    if cfg.method not in (OptimizerKind.BFGS_STANDARD, OptimizerKind.BFGS_AS_WRITTEN):
        raise ValueError(f"bfgs_train got optimizer {cfg.method.value}")
    budget_model = budget if budget is not None else TimeBudget()
    tracker = _Budget(backend, cfg.max_estimates)
    theta = _initial_theta(cfg, spec, theta0)
    dim = theta.size
    H = np.eye(dim)
    h_seeded = False
    trace = TrainingTrace()

    def record(iteration: int, best_acc: float, best_val: float) -> None:
        est, shots = backend.ledger.snapshot()
        trace.append(iteration, best_acc, best_val, None, est, shots,
                     estimate_time(backend.ledger, budget_model) * 1000.0)

    try:
        f, acc = _evaluate_point(cfg, spec, theta, dataset, backend, workers)
        g = estimate_gradient(cfg.gradient, cfg.cost, spec, theta, dataset, backend,
                              step=cfg.step, workers=workers)
    except (ValueError, TrainingError):
        raise
    except Exception as exc:
        raise TrainingError(f"backend failure at iteration 0: {exc}") from exc

    best_theta, best_val, best_acc = theta.copy(), f, acc
    record(0, best_acc, best_val)

    ls = cfg.line_search
    grad_cost = _gradient_cost(cfg.gradient, spec, len(dataset))
    for k in range(1, cfg.max_iterations + 1):
        if np.linalg.norm(g) < GRAD_NORM_TOL:
            break
        d = -(H @ g)
        slope = float(g @ d)
        if slope >= 0:
            # numerical breakdown of positive definiteness: restart from steepest descent
            H = np.eye(dim)
            d = -g
            slope = float(g @ d)

        # cost of one more iteration: at least one line-search trial + one gradient
        if tracker.exhausted(upcoming=len(dataset) + grad_cost):
            break

        alpha = ls.alpha0
        accepted = None
        try:
            for _ in range(ls.max_halvings):
                trial = theta + alpha * d
                f_trial, acc_trial = _evaluate_point(cfg, spec, trial, dataset,
                                                     backend, workers)
                if f_trial <= f + ls.c1 * alpha * slope:
                    if ls.kind == "wolfe":
                        g_trial = estimate_gradient(cfg.gradient, cfg.cost, spec, trial,
                                                    dataset, backend, step=cfg.step,
                                                    workers=workers)
                        if abs(float(g_trial @ d)) > ls.c2 * abs(slope):
                            alpha *= 0.5
                            continue
                        accepted = (trial, f_trial, acc_trial, g_trial)
                    else:
                        accepted = (trial, f_trial, acc_trial, None)
                    break
                alpha *= 0.5
                if tracker.exhausted(upcoming=len(dataset)):
                    break
        except (ValueError, TrainingError):
            raise
        except Exception as exc:
            raise TrainingError(f"backend failure at iteration {k}: {exc}") from exc

        if accepted is None:
            break
        trial, f_trial, acc_trial, g_trial = accepted

        if g_trial is None:
            if tracker.exhausted(upcoming=grad_cost):
                pass  # trace the accepted step, then stop: no budget for a gradient
            else:
                try:
                    g_trial = estimate_gradient(cfg.gradient, cfg.cost, spec, trial,
                                                dataset, backend, step=cfg.step,
                                                workers=workers)
                except (ValueError, TrainingError):
                    raise
                except Exception as exc:
                    raise TrainingError(f"backend failure at iteration {k}: {exc}") from exc

        s = trial - theta
        if g_trial is not None:
            y = g_trial - g
            ys = float(y @ s)
            if ys > CURVATURE_TOL:
                if not h_seeded:
                    # size the initial inverse Hessian from the first curvature
                    # pair so early steps are not stuck at unit scale
                    H = (ys / float(y @ y)) * np.eye(dim)
                    h_seeded = True
                H = bfgs_update(H, s, y, cfg.method)
        theta, f = trial, f_trial
        if f_trial < best_val:
            best_theta, best_val = trial.copy(), f_trial
        best_acc = max(best_acc, acc_trial)
        record(k, best_acc, best_val)

        if g_trial is None:
            break
        g = g_trial
        if cfg.target_accuracy is not None and best_acc >= cfg.target_accuracy:
            break
        if tracker.exhausted():
            break

    return best_theta, trace


def sgd_train(cfg: GradConfig, spec: CircuitSpec, dataset: Dataset, backend: Backend,
              theta0: np.ndarray | None = None, workers: int = 1,
              budget: TimeBudget | None = None) -> tuple[np.ndarray, TrainingTrace]:
    """Mini-batch gradient descent; full-batch when batch_size is unset or
    equals the dataset size (plain gradient descent).

    One iteration is one parameter update; the full-set cost and accuracy
    are measured once per iteration for the trace.
    """
    if cfg.method not in (OptimizerKind.SGD, OptimizerKind.GRADIENT_DESCENT):
        raise ValueError(f"sgd_train got optimizer {cfg.method.value}")
    budget_model = budget if budget is not None else TimeBudget()
    tracker = _Budget(backend, cfg.max_estimates)
    theta = _initial_theta(cfg, spec, theta0)
    n = len(dataset)
    batch = n if cfg.batch_size is None else min(cfg.batch_size, n)
    if cfg.method is OptimizerKind.GRADIENT_DESCENT and batch != n:
        raise ValueError("gradient_descent is full-batch; use sgd for mini-batches")
    shuffle_rng = np.random.default_rng(derive_seed(cfg.seed, "sgd-shuffle"))
    trace = TrainingTrace()

    def record(iteration: int, best_acc: float, best_val: float) -> None:
        est, shots = backend.ledger.snapshot()
        trace.append(iteration, best_acc, best_val, None, est, shots,
                     estimate_time(backend.ledger, budget_model) * 1000.0)

    try:
        f, acc = _evaluate_point(cfg, spec, theta, dataset, backend, workers)
    except (ValueError, TrainingError):
        raise
    except Exception as exc:
        raise TrainingError(f"backend failure at iteration 0: {exc}") from exc
    best_theta, best_val, best_acc = theta.copy(), f, acc
    record(0, best_acc, best_val)

    order = np.arange(n)
    cursor = n  # force a reshuffle on first use
    grad_cost = _gradient_cost(cfg.gradient, spec, batch)
    for k in range(1, cfg.max_iterations + 1):
        if tracker.exhausted(upcoming=grad_cost + n):
            break
        if cursor + batch > n:
            order = shuffle_rng.permutation(n) if batch < n else order
            cursor = 0
        idx = order[cursor:cursor + batch]
        cursor += batch
        try:
            g = estimate_gradient(cfg.gradient, cfg.cost, spec, theta,
                                  dataset.subset(idx), backend,
                                  step=cfg.step, workers=workers)
            theta = theta - cfg.learning_rate * g
            f, acc = _evaluate_point(cfg, spec, theta, dataset, backend, workers)
        except (ValueError, TrainingError):
            raise
        except Exception as exc:
            raise TrainingError(f"backend failure at iteration {k}: {exc}") from exc
        if f < best_val:
            best_theta, best_val = theta.copy(), f
        best_acc = max(best_acc, acc)
        record(k, best_acc, best_val)
        if cfg.target_accuracy is not None and best_acc >= cfg.target_accuracy:
            break

    return best_theta, trace


@dataclass(frozen=True)
class LocalSearchSpec:
    """Bounded random search around a grid point: `budget` perturbations of
    the non-grid parameters, each uniform in +-radius per coordinate."""

    budget: int = 0
    radius: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.budget < 0:
            raise ValueError(f"budget must be >= 0, got {self.budget}")
        if self.radius < 0:
            raise ValueError(f"radius must be >= 0, got {self.radius}")


def landscape_scan(spec: CircuitSpec, dataset: Dataset, theta0: np.ndarray,
                   grid0: np.ndarray, grid1: np.ndarray,
                   neighborhood: LocalSearchSpec | None = None,
                   backend: Backend | None = None) -> np.ndarray:
    """Best-achievable-accuracy surface over a (theta_0, theta_1) grid.

    Each cell fixes the first two parameters at the grid values and reports
    the best accuracy over the unperturbed point plus `budget` random
    perturbations of the remaining parameters.  Cell RNG streams are keyed
    by cell index, so the scan order cannot change the surface.
    """
    neighborhood = neighborhood if neighborhood is not None else LocalSearchSpec()
    backend = backend if backend is not None else IdealBackend()
    theta0 = circuits.check_theta(spec, np.asarray(theta0, dtype=float))
    grid0 = np.asarray(grid0, dtype=float)
    grid1 = np.asarray(grid1, dtype=float)
    if grid0.size == 0 or grid1.size == 0:
        raise ValueError("grid must be nonempty")
    surface = np.empty((grid0.size, grid1.size))
    for i, a in enumerate(grid0):
        for j, b in enumerate(grid1):
            theta = theta0.copy()
            theta[0], theta[1] = a, b
            best = costs.accuracy(spec, theta, dataset, backend)
            if neighborhood.budget > 0:
                cell_rng = np.random.default_rng(
                    derive_seed(neighborhood.seed, f"landscape/{i}/{j}"))
                for _ in range(neighborhood.budget):
                    probe = theta.copy()
                    probe[2:] += cell_rng.uniform(-neighborhood.radius,
                                                  neighborhood.radius,
                                                  theta.size - 2)
                    best = max(best, costs.accuracy(spec, probe, dataset, backend))
            surface[i, j] = best
    return surface
