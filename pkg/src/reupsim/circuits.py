"""Exact single-qubit state evolution for data re-uploading circuits.

A circuit is L layers applied to |0>, each layer an R_y rotation followed by
an R_z rotation.  The two angles of layer l are linear combinations of a
4-entry parameter slice theta[4l:4l+4] and the 2D data point x, with the
combination fixed by the chosen ansatz kernel (2A-2D).  Everything here is a
pure function: states in, states out, no global state.

Gate convention: R_y(phi) = exp(-i phi Y / 2), R_z(phi) = exp(-i phi Z / 2).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

ATOL_NORM = 1e-12


class Ansatz(enum.Enum):
    """The four linear kernels mapping (theta slice, x) to gate angles."""

    A2A = "2A"
    A2B = "2B"
    A2C = "2C"
    A2D = "2D"

    @classmethod
    def parse(cls, name: str) -> "Ansatz":
        try:
            return cls(str(name).upper())
        except ValueError:
            raise ValueError(f"unknown ansatz {name!r}; expected one of 2A, 2B, 2C, 2D") from None


@dataclass(frozen=True)
class QubitState:
    """Normalized amplitude pair (alpha, beta) of a single qubit."""

    alpha: complex
    beta: complex

    def probabilities(self) -> tuple[float, float]:
        return abs(self.alpha) ** 2, abs(self.beta) ** 2

    def norm_error(self) -> float:
        return abs(abs(self.alpha) ** 2 + abs(self.beta) ** 2 - 1.0)


ZERO_STATE = QubitState(1.0 + 0.0j, 0.0 + 0.0j)


@dataclass(frozen=True)
class DataPoint:
    """A 2D coordinate with its binary class label."""

    x: tuple[float, float]
    label: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")


@dataclass(frozen=True)
class CircuitSpec:
    """Ansatz kind plus layer count; parameter vectors have length 4*layers."""

    ansatz: Ansatz = Ansatz.A2C
    layers: int = 4

    def __post_init__(self):
        if self.layers < 1:
            raise ValueError(f"layer count must be >= 1, got {self.layers}")

    @property
    def n_params(self) -> int:
        return 4 * self.layers


# Annotation alias: a flat real vector of length spec.n_params.
ParameterVector = np.ndarray


def check_theta(spec: CircuitSpec, theta: np.ndarray) -> np.ndarray:
    """Validate and return theta as a float array of length 4*layers."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (spec.n_params,):
        raise ValueError(
            f"parameter vector has shape {theta.shape}, expected ({spec.n_params},) "
            f"for {spec.layers} layers"
        )
    return theta


def random_parameters(spec: CircuitSpec, rng: np.random.Generator,
                      low: float = -2 * np.pi, high: float = 2 * np.pi) -> np.ndarray:
    """Uniform random parameter vector in [low, high)."""
    return rng.uniform(low, high, size=spec.n_params)


def rotation_y(state: QubitState, angle: float) -> QubitState:
    """Apply R_y(angle) = exp(-i angle Y / 2)."""
    c, s = np.cos(angle / 2.0), np.sin(angle / 2.0)
    return QubitState(c * state.alpha - s * state.beta,
                      s * state.alpha + c * state.beta)


def rotation_z(state: QubitState, angle: float) -> QubitState:
    """Apply R_z(angle) = exp(-i angle Z / 2); outcome probabilities unchanged."""
    phase = np.exp(-0.5j * angle)
    return QubitState(phase * state.alpha, np.conj(phase) * state.beta)


def ansatz_design(ansatz: Ansatz, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-point design rows for the two gate angles of one layer.

    Returns (cy, cz), each of shape (n, 4), such that for layer slice
    t = theta[4l:4l+4] the angles are phi_y = cy @ t and phi_z = cz @ t.
    The rows are also the exact derivatives d(angle)/d(theta_j).
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = x.shape[0]
    x0, x1 = x[:, 0], x[:, 1]
    cy, cz = np.zeros((n, 4)), np.zeros((n, 4))
    if ansatz is Ansatz.A2A:
        cy[:, 0], cy[:, 1], cy[:, 2] = x0, x1, 1.0
        cz[:, 3] = 1.0
    elif ansatz is Ansatz.A2B:
        cy[:, 0], cy[:, 1] = x0, 1.0
        cz[:, 2], cz[:, 3] = x1, 1.0
    elif ansatz is Ansatz.A2C:
        cy[:, 0], cy[:, 1] = x0, x1
        cz[:, 2], cz[:, 3] = x0, x1
    elif ansatz is Ansatz.A2D:
        cy[:, 0] = 1.0
        cz[:, 1], cz[:, 2], cz[:, 3] = x0, x1, 1.0
    else:  # pragma: no cover
        raise ValueError(f"unhandled ansatz {ansatz}")
    return cy, cz


def layer_args(ansatz: Ansatz, theta_layer: np.ndarray, x: np.ndarray) -> tuple[float, float]:
    """Gate angles (phi_y, phi_z) of a single layer; R_y is applied first."""
    theta_layer = np.asarray(theta_layer, dtype=float)
    if theta_layer.shape != (4,):
        raise ValueError(f"layer slice must have 4 entries, got shape {theta_layer.shape}")
    cy, cz = ansatz_design(ansatz, x)
    return float(cy[0] @ theta_layer), float(cz[0] @ theta_layer)


def layer_angles(spec: CircuitSpec, theta: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """All layer angles for a batch of points: two (L, n) arrays."""
    theta = check_theta(spec, theta)
    cy, cz = ansatz_design(spec.ansatz, x)
    slices = theta.reshape(spec.layers, 4)
    return slices @ cy.T, slices @ cz.T


def _evolve(phi_y: np.ndarray, phi_z: np.ndarray,
            shift: tuple[int, int, float] | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Run the layered circuit on |0> for a batch; returns final (alpha, beta).

    `shift`, if given, is (layer, gate, delta) with gate 0 = R_y, 1 = R_z;
    delta is added to that single gate angle (parameter-shift evaluations).
    """
    n = phi_y.shape[1]
    alpha = np.ones(n, dtype=complex)
    beta = np.zeros(n, dtype=complex)
    for l in range(phi_y.shape[0]):
        ay, az = phi_y[l], phi_z[l]
        if shift is not None and shift[0] == l:
            if shift[1] == 0:
                ay = ay + shift[2]
            else:
                az = az + shift[2]
        c, s = np.cos(ay / 2.0), np.sin(ay / 2.0)
        alpha, beta = c * alpha - s * beta, s * alpha + c * beta
        phase = np.exp(-0.5j * az)
        alpha = alpha * phase
        beta = beta * np.conj(phase)
    return alpha, beta


def evaluate_batch(spec: CircuitSpec, theta: np.ndarray, x: np.ndarray,
                   shift: tuple[int, int, float] | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Exact outcome probabilities (p0, p1) for each point in the batch."""
    phi_y, phi_z = layer_angles(spec, theta, x)
    alpha, beta = _evolve(phi_y, phi_z, shift=shift)
    return np.abs(alpha) ** 2, np.abs(beta) ** 2


def evaluate_circuit(spec: CircuitSpec, theta: np.ndarray, x: np.ndarray) -> tuple[float, float]:
    """Exact (p0, p1) for a single point."""
    p0, p1 = evaluate_batch(spec, theta, x)
    return float(p0[0]), float(p1[0])


def measure_batch(spec: CircuitSpec, theta: np.ndarray, x: np.ndarray,
                  y: np.ndarray, shift: tuple[int, int, float] | None = None) -> np.ndarray:
    """Projection probability onto each point's label state |y_i>."""
    y = np.asarray(y)
    if not ((y == 0) | (y == 1)).all():
        raise ValueError("labels must be 0 or 1")
    p0, p1 = evaluate_batch(spec, theta, x, shift=shift)
    return np.where(y == 1, p1, p0)


def measure_label(spec: CircuitSpec, theta: np.ndarray, x: np.ndarray, y: int) -> float:
    """M(theta, x, y): probability of projecting the final state onto |y>."""
    if y not in (0, 1):
        raise ValueError(f"label must be 0 or 1, got {y}")
    return float(measure_batch(spec, theta, x, np.array([y]))[0])


def classify_batch(spec: CircuitSpec, theta: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Predicted labels: 1 where p1 > 0.5, else 0 (ties go to 0)."""
    _, p1 = evaluate_batch(spec, theta, x)
    return (p1 > 0.5).astype(int)


def classify(spec: CircuitSpec, theta: np.ndarray, x: np.ndarray) -> int:
    return int(classify_batch(spec, theta, x)[0])


def gate_angle_gradients(spec: CircuitSpec, theta: np.ndarray, x: np.ndarray,
                         y: np.ndarray) -> np.ndarray:
    """dM/d(gate angle) for all 2L gate angles, shape (L, 2, n).

    Forward pass stores the state after every gate; the backward pass
    accumulates the row vector <y| G_2L ... G_{g+1}.  With P the Pauli axis
    of gate g, d(amp)/d(phi_g) = row_g . (-i P / 2) psi_g and
    dM/dphi_g = 2 Re(conj(amp) d(amp)).
    """
    phi_y, phi_z = layer_angles(spec, theta, x)
    L, n = phi_y.shape
    y = np.asarray(y)

    # Forward: states after each of the 2L gates (order: y gate then z gate).
    alphas = np.empty((2 * L + 1, n), dtype=complex)
    betas = np.empty((2 * L + 1, n), dtype=complex)
    alphas[0], betas[0] = 1.0, 0.0
    for l in range(L):
        c, s = np.cos(phi_y[l] / 2.0), np.sin(phi_y[l] / 2.0)
        a, b = alphas[2 * l], betas[2 * l]
        alphas[2 * l + 1] = c * a - s * b
        betas[2 * l + 1] = s * a + c * b
        phase = np.exp(-0.5j * phi_z[l])
        alphas[2 * l + 2] = alphas[2 * l + 1] * phase
        betas[2 * l + 2] = betas[2 * l + 1] * np.conj(phase)

    # amp = <y|psi_final> per point.
    amp = np.where(y == 1, betas[2 * L], alphas[2 * L])

    # Backward: row = <y| (product of gates after gate g), components (ra, rb).
    ra = np.where(y == 1, 0.0 + 0.0j, 1.0 + 0.0j)
    rb = np.where(y == 1, 1.0 + 0.0j, 0.0 + 0.0j)
    grads = np.empty((L, 2, n))
    for l in range(L - 1, -1, -1):
        # Undo the z gate: row <- row @ R_z(phi_z[l]).
        phase = np.exp(-0.5j * phi_z[l])
        ra_z, rb_z = ra * phase, rb * np.conj(phase)
        # (-i Z / 2) psi = (-i a / 2, +i b / 2) with psi the post-R_z state;
        # the row here excludes the z gate, which commutes with its generator.
        psi_a, psi_b = alphas[2 * l + 2], betas[2 * l + 2]
        damp = ra * (-0.5j * psi_a) + rb * (0.5j * psi_b)
        grads[l, 1] = 2.0 * np.real(np.conj(amp) * damp)
        ra, rb = ra_z, rb_z

        # (-i Y / 2) psi = (-b/2, a/2) with psi the post-R_y state.
        psi_a, psi_b = alphas[2 * l + 1], betas[2 * l + 1]
        damp = ra * (-0.5 * psi_b) + rb * (0.5 * psi_a)
        grads[l, 0] = 2.0 * np.real(np.conj(amp) * damp)
        # Undo the y gate: row <- row @ R_y(phi_y[l]).
        c, s = np.cos(phi_y[l] / 2.0), np.sin(phi_y[l] / 2.0)
        ra, rb = c * ra + s * rb, -s * ra + c * rb
    return grads


def analytic_gradient_batch(spec: CircuitSpec, theta: np.ndarray, x: np.ndarray,
                            y: np.ndarray) -> np.ndarray:
    """Exact dM/dtheta_j per point, shape (n, 4L).

    Each theta_j enters the two gate angles of its layer linearly, so the
    chain rule contracts gate-angle gradients with the ansatz design rows.
    """
    grads = gate_angle_gradients(spec, theta, x, y)  # (L, 2, n)
    cy, cz = ansatz_design(spec.ansatz, x)           # (n, 4) each
    n = cy.shape[0]
    out = np.empty((n, spec.n_params))
    for l in range(spec.layers):
        out[:, 4 * l:4 * l + 4] = grads[l, 0][:, None] * cy + grads[l, 1][:, None] * cz
    return out


def analytic_gradient(spec: CircuitSpec, theta: np.ndarray, x: np.ndarray, y: int) -> np.ndarray:
    """Exact gradient of measure_label with respect to every parameter."""
    if y not in (0, 1):
        raise ValueError(f"label must be 0 or 1, got {y}")
    return analytic_gradient_batch(spec, theta, x, np.array([y]))[0]
