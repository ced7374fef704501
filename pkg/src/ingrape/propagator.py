"""Evolution under piecewise-constant controls.

Generic route: every interval contributes exp(dt * L_m) acting on vectorized
operators.  For a qubit the same dynamics is an affine flow dr/dt = B r + c on
the Bloch vector, and exp(B t) is assembled from the Cardano roots of the
characteristic cubic of B.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .linalg import (
    PAULIS,
    REPEATED,
    bloch_from_density,
    cardano_roots,
    check_density,
    devectorize,
    expm,
    vectorize,
)
from .models import ControlledSystem, ControlSample, ModelError, liouvillian


@dataclass(frozen=True)
class TimeGrid:
    T: float
    M: int

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"total time must be positive, got {self.T}")
        if int(self.M) != self.M or self.M < 1:
            raise ValueError(f"number of intervals must be a positive integer, got {self.M}")
        object.__setattr__(self, "M", int(self.M))

    @property
    def dt(self) -> float:
        return self.T / self.M

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.M + 1)


@dataclass(frozen=True, eq=False)
class PWCControls:
    """Piecewise-constant controls; incoherent densities are parameterized as n = w**2."""

    grid: TimeGrid
    u: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        u = np.array(self.u, dtype=float, ndmin=2)
        w = np.array(self.w, dtype=float, ndmin=2)
        if u.shape[0] != self.grid.M and u.size == 0:
            u = u.reshape(self.grid.M, 0)
        if w.shape[0] != self.grid.M and w.size == 0:
            w = w.reshape(self.grid.M, 0)
        if u.shape[0] != self.grid.M or w.shape[0] != self.grid.M:
            raise ValueError(f"control arrays need {self.grid.M} rows, got {u.shape} and {w.shape}")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "w", w)

    @property
    def n(self) -> np.ndarray:
        return self.w ** 2

    def sample(self, m: int) -> ControlSample:
        return ControlSample(self.u[m], self.n[m])

    def check(self, system: ControlledSystem) -> None:
        if self.u.shape[1] != system.n_coherent or self.w.shape[1] != system.n_controls:
            raise ModelError("SHAPE", f"controls {self.u.shape}/{self.w.shape} do not match system "
                             f"with K={system.n_coherent}, C={system.n_controls}")

    def flat(self) -> np.ndarray:
        return np.concatenate([self.u.ravel(), self.w.ravel()])

    def with_flat(self, x: np.ndarray) -> "PWCControls":
        k = self.u.size
        return PWCControls(self.grid, x[:k].reshape(self.u.shape), x[k:].reshape(self.w.shape))


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (M + 1, N, N)
    step_propagators: np.ndarray | None = None

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def step_generators(system: ControlledSystem, controls: PWCControls) -> np.ndarray:
    controls.check(system)
    return system.generators(controls.u, controls.n)


def step_propagators(system: ControlledSystem, controls: PWCControls) -> np.ndarray:
    """Stack (M, N^2, N^2) of exp(dt L_m)."""
    return expm(controls.grid.dt * step_generators(system, controls))


def step_propagator(system: ControlledSystem, sample: ControlSample, dt: float) -> np.ndarray:
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    gen = liouvillian(system, sample)
    if dt == 0:
        return np.eye(gen.shape[0], dtype=complex)
    return expm(dt * gen)


def propagate(system: ControlledSystem, controls: PWCControls, rho0: np.ndarray,
              keep_propagators: bool = False) -> Trajectory:
    rho0 = check_density(rho0)
    if rho0.shape[0] != system.dim:
        raise ModelError("SHAPE", f"initial state has dim {rho0.shape[0]}, system has {system.dim}")
    props = step_propagators(system, controls)
    x = vectorize(rho0)
    states = [rho0]
    for phi in props:
        x = phi @ x
        states.append(devectorize(x))
    return Trajectory(controls.grid.nodes, np.array(states), props if keep_propagators else None)


def propagate_channel(system: ControlledSystem, controls: PWCControls) -> np.ndarray:
    """Superoperator of the whole evolution, Phi_M ... Phi_1."""
    props = step_propagators(system, controls)
    phi = np.eye(system.dim ** 2, dtype=complex)
    for p in props:
        phi = p @ phi
    return phi


@dataclass(frozen=True)
class BlochAffineGenerator:
    B: np.ndarray
    c: np.ndarray


def bloch_affine_generator(system: ControlledSystem, sample: ControlSample) -> BlochAffineGenerator:
    """Affine Bloch-ball form of the qubit Liouvillian.

    With rho = (I + r.sigma)/2 and r_i = Tr(sigma_i rho): B_ij = Tr(sigma_i L(sigma_j))/2
    and c_i = Tr(sigma_i L(I))/2.
    """
    if system.dim != 2:
        raise ModelError("SHAPE", "Bloch form exists only for qubits")
    gen = liouvillian(system, sample)
    # Tr(sigma_i X) = vec(sigma_i^T) . vec(X) in column stacking
    rows = np.array([vectorize(p.T) for p in PAULIS])
    cols = np.array([vectorize(p) for p in PAULIS]).T
    b = 0.5 * rows @ gen @ cols
    c = 0.5 * rows @ gen @ vectorize(np.eye(2))
    return BlochAffineGenerator(B=b.real.copy(), c=c.real.copy())


def _expm1(z: np.ndarray) -> np.ndarray:
    # exp(z) - 1 without cancellation for complex z
    x, y = z.real, z.imag
    return np.expm1(x) * np.cos(y) - 2.0 * np.sin(0.5 * y) ** 2 + 1j * np.exp(x) * np.sin(y)


def _phi1(z: np.ndarray) -> np.ndarray:
    """(exp(z) - 1)/z, continuous at zero."""
    z = np.asarray(z, dtype=complex)
    out = np.ones_like(z)
    nz = z != 0
    out[nz] = _expm1(z[nz]) / z[nz]
    return out


def bloch_step_cardano(gen: BlochAffineGenerator, dt: float, r: np.ndarray,
                       stats: Counter | None = None) -> np.ndarray:
    """Exact solution of dr/dt = B r + c over a step of length dt.

    The flow is r(dt) = exp(B dt) r + (int_0^dt exp(B s) ds) c, which is the
    top block row of the exponential of [[B, c], [0, 0]].  Both matrix
    functions come from the Lagrange-Sylvester formula on the roots of
    det(lambda I - B); clustered roots fall back to a Pade exponential of the
    augmented 4x4 matrix.  When ``stats`` is given, the branch taken is counted.
    """
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    b = np.asarray(gen.B, dtype=float)
    c = np.asarray(gen.c, dtype=float)
    r = np.asarray(r, dtype=float)
    if dt == 0:
        return r.copy()
    # characteristic polynomial lambda^3 + a2 lambda^2 + a1 lambda + a0
    a2 = -np.trace(b)
    a1 = 0.5 * (np.trace(b) ** 2 - np.trace(b @ b))
    a0 = -np.linalg.det(b)
    roots = cardano_roots(a2, a1, a0)
    lam = roots.roots
    if roots.discriminant_class == REPEATED:
        if stats is not None:
            stats["pade"] += 1
        aug = np.zeros((4, 4))
        aug[:3, :3] = b
        aug[:3, 3] = c
        e = expm(dt * aug)
        return e[:3, :3] @ r + e[:3, 3]
    if stats is not None:
        stats["cardano"] += 1
    eye = np.eye(3)
    r_out = np.zeros(3, dtype=complex)
    for i in range(3):
        j, k = [x for x in range(3) if x != i]
        proj = (b - lam[j] * eye) @ (b - lam[k] * eye) / ((lam[i] - lam[j]) * (lam[i] - lam[k]))
        z = lam[i] * dt
        r_out += np.exp(z) * (proj @ r) + dt * _phi1(z) * (proj @ c)
    return r_out.real


def propagate_bloch(system: ControlledSystem, controls: PWCControls, r0: np.ndarray,
                    stats: Counter | None = None) -> np.ndarray:
    """Bloch vectors at every grid node, computed by the Cardano route."""
    controls.check(system)
    rs = [np.asarray(r0, dtype=float)]
    for m in range(controls.grid.M):
        gen = bloch_affine_generator(system, controls.sample(m))
        rs.append(bloch_step_cardano(gen, controls.grid.dt, rs[-1], stats))
    return np.array(rs)


def write_trajectory_csv(path: str | Path, traj: Trajectory) -> None:
    dim = traj.states.shape[1]
    header = ["t"]
    for i in range(dim):
        for j in range(dim):
            header += [f"re_{i}{j}", f"im_{i}{j}"]
    if dim == 2:
        header += ["r_x", "r_y", "r_z"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for t, rho in zip(traj.times, traj.states):
            row = [repr(float(t))]
            for z in rho.reshape(-1):
                row += [repr(float(z.real)), repr(float(z.imag))]
            if dim == 2:
                row += [repr(float(x)) for x in bloch_from_density(rho)]
            writer.writerow(row)
