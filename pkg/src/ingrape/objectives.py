"""Terminal-time (Mayer) objectives and their exact gradients.

Every objective is written as a cost on X(T) = Phi(T) X0, where the columns of
X0 are vectorized operators: a single initial state, a list of basis states, or
the identity (in which case X(T) is the channel itself).  The gradient is then
one forward sweep, one backward sweep of the co-state Lambda, and one Frechet
derivative of exp(dt L_m) per control entry.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import (
    DimensionError,
    check_density,
    expm,
    expm_frechet,
    is_hermitian,
    is_unitary,
    vectorize,
)
from .models import ControlledSystem
from .propagator import PWCControls, step_generators

_SQRT_HALF = 1.0 / np.sqrt(2.0)

GATES = {
    "hadamard": _SQRT_HALF * np.array([[1, 1], [1, -1]], dtype=complex),
    "t": np.diag([1.0, np.exp(1j * np.pi / 4)]),
    "cnot": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
    "cz": np.diag([1.0, 1.0, 1.0, -1.0]).astype(complex),
}


def gate_targets() -> dict[str, np.ndarray]:
    return {name: g.copy() for name, g in GATES.items()}


def _qubit_states() -> list[np.ndarray]:
    kets = [np.array([1, 0]), np.array([0, 1]), _SQRT_HALF * np.array([1, 1]),
            _SQRT_HALF * np.array([1, 1j])]
    return [np.outer(k, k.conj()).astype(complex) for k in kets]


def default_gate_basis(dim: int) -> list[np.ndarray]:
    """|0>, |1>, |+>, |+i> for a qubit; their 16 pairwise products for two qubits."""
    if dim == 2:
        return _qubit_states()
    if dim == 4:
        q = _qubit_states()
        return [np.kron(a, b) for a in q for b in q]
    raise DimensionError(f"no default gate basis for dim {dim}")


def _unitary_superop(u: np.ndarray) -> np.ndarray:
    return np.kron(u.conj(), u)


@dataclass(frozen=True, eq=False)
class ObservableMean:
    """Tr(O rho(T)); with ``maximize`` the value is negated so it can be minimized."""

    O: np.ndarray
    rho0: np.ndarray
    maximize: bool = False

    def __post_init__(self):
        o = np.asarray(self.O, dtype=complex)
        if not is_hermitian(o):
            raise ValueError("observable not Hermitian")
        object.__setattr__(self, "O", o)
        object.__setattr__(self, "rho0", check_density(self.rho0))

    @property
    def dim(self) -> int:
        return self.O.shape[0]

    def initial_columns(self) -> np.ndarray:
        return vectorize(self.rho0)[:, None]

    def terminal(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        sign = -1.0 if self.maximize else 1.0
        row = sign * vectorize(self.O.T)
        value = float((row @ x[:, 0]).real)
        return value, row[None, :]


@dataclass(frozen=True, eq=False)
class StateTransfer:
    """||rho(T) - target||^2 in the Hilbert-Schmidt norm."""

    rho0: np.ndarray
    target: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rho0", check_density(self.rho0))
        object.__setattr__(self, "target", check_density(self.target))
        if self.rho0.shape != self.target.shape:
            raise DimensionError("initial and target states differ in dimension")

    @property
    def dim(self) -> int:
        return self.rho0.shape[0]

    def initial_columns(self) -> np.ndarray:
        return vectorize(self.rho0)[:, None]

    def terminal(self, x):
        d = x[:, 0] - vectorize(self.target)
        return float(np.vdot(d, d).real), 2.0 * d.conj()[None, :]


@dataclass(frozen=True, eq=False)
class GateOnStates:
    """Mean over basis states of ||Phi(rho_j) - U rho_j U^+||^2."""

    U: np.ndarray
    basis: tuple[np.ndarray, ...] = field(default=())

    def __post_init__(self):
        u = np.asarray(self.U, dtype=complex)
        if not is_unitary(u):
            raise ValueError("target gate not unitary")
        basis = tuple(check_density(b) for b in self.basis) or tuple(default_gate_basis(u.shape[0]))
        if any(b.shape != u.shape for b in basis):
            raise DimensionError("basis states and gate differ in dimension")
        object.__setattr__(self, "U", u)
        object.__setattr__(self, "basis", basis)

    @property
    def dim(self) -> int:
        return self.U.shape[0]

    def initial_columns(self) -> np.ndarray:
        return np.stack([vectorize(b) for b in self.basis], axis=1)

    def targets(self) -> np.ndarray:
        return np.stack([vectorize(self.U @ b @ self.U.conj().T) for b in self.basis], axis=1)

    def terminal(self, x):
        k = len(self.basis)
        d = x - self.targets()
        return float(np.vdot(d, d).real / k), (2.0 / k) * d.conj().T


@dataclass(frozen=True, eq=False)
class GateOnChannel:
    """||Phi - conj(U) (x) U||_F^2 on column-stacked superoperators."""

    U: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.U, dtype=complex)
        if not is_unitary(u):
            raise ValueError("target gate not unitary")
        object.__setattr__(self, "U", u)

    @property
    def dim(self) -> int:
        return self.U.shape[0]

    def initial_columns(self) -> np.ndarray:
        return np.eye(self.dim ** 2, dtype=complex)

    def terminal(self, x):
        d = x - _unitary_superop(self.U)
        return float(np.vdot(d, d).real), 2.0 * d.conj().T


Objective = ObservableMean | StateTransfer | GateOnStates | GateOnChannel


@dataclass(frozen=True)
class GradientVector:
    du: np.ndarray
    dw: np.ndarray
    dn: np.ndarray

    def flat(self) -> np.ndarray:
        return np.concatenate([self.du.ravel(), self.dw.ravel()])


def _check_dims(obj, system: ControlledSystem, controls: PWCControls) -> None:
    if obj.dim != system.dim:
        raise DimensionError(f"objective acts on dim {obj.dim}, system has dim {system.dim}")
    controls.check(system)


def evaluate(obj, system: ControlledSystem, controls: PWCControls) -> float:
    _check_dims(obj, system, controls)
    props = expm(controls.grid.dt * step_generators(system, controls))
    x = obj.initial_columns()
    for p in props:
        x = p @ x
    return obj.terminal(x)[0]


def value_and_gradient(obj, system: ControlledSystem,
                       controls: PWCControls) -> tuple[float, GradientVector]:
    _check_dims(obj, system, controls)
    dt = controls.grid.dt
    gens = dt * step_generators(system, controls)
    props = expm(gens)
    m_steps = props.shape[0]

    xs = [obj.initial_columns()]
    for p in props:
        xs.append(p @ xs[-1])
    value, lam = obj.terminal(xs[-1])

    # co-states: lams[m] multiplies dPhi_m from the left
    lams = [None] * m_steps
    for m in range(m_steps - 1, -1, -1):
        lams[m] = lam
        lam = lam @ props[m]

    directions = np.concatenate([system.coherent_superops, system.incoherent_superops]) * dt
    n_dir = directions.shape[0]
    k = system.n_coherent
    grad = np.zeros((m_steps, n_dir))
    if n_dir:
        a = np.repeat(gens, n_dir, axis=0)
        e = np.tile(directions, (m_steps, 1, 1))
        frechet = expm_frechet(a, e).reshape(m_steps, n_dir, *gens.shape[1:])
        for m in range(m_steps):
            # Re Tr(Lambda dPhi X) = Re sum(dPhi * (X Lambda)^T)
            weight = (xs[m] @ lams[m]).T
            grad[m] = np.einsum("dab,ab->d", frechet[m], weight).real
    du = grad[:, :k]
    dn = grad[:, k:]
    dw = 2.0 * controls.w * dn
    return value, GradientVector(du=du, dw=dw, dn=dn)


def gradient(obj, system: ControlledSystem, controls: PWCControls) -> GradientVector:
    return value_and_gradient(obj, system, controls)[1]
