"""Controlled open-system models and their Liouvillian generators.

A :class:`ControlledSystem` evolves under

    d rho / dt = -i [H0 + sum_k u_k V_k, rho] + sum_channels A ((n_c + 1) D[L] + n_c D[L^+]) rho

where each incoherent channel has a lowering jump operator ``L``, an Einstein
coefficient ``A`` and the index ``c`` of the spectral density ``n_c >= 0`` it
listens to.  The generator is affine in ``u`` and in ``n``; the fixed pieces are
assembled once per system.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .linalg import (
    SIGMA_X,
    SIGMA_Z,
    commutator_superop,
    is_hermitian,
    lindblad_dissipator,
)


class ModelError(ValueError):
    """Invalid model description.  ``code`` is a stable machine-readable tag."""

    def __init__(self, code: str, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.code = code
        self.path = path


def transition_operator(dim: int, lower: int, upper: int) -> np.ndarray:
    """|lower><upper|, the jump taking ``upper`` down to ``lower``."""
    op = np.zeros((dim, dim), dtype=complex)
    op[lower, upper] = 1.0
    return op


@dataclass(frozen=True, eq=False)
class IncoherentChannel:
    """One environment-coupled transition.

    ``jump`` is the lowering operator; the stimulated pair contributes
    A (n + 1) D[jump] + A n D[jump^+].  ``lower``/``upper`` are kept for
    channels built from a single level pair.
    """

    jump: np.ndarray
    einstein_coeff: float
    control_index: int
    lower: int | None = None
    upper: int | None = None

    @classmethod
    def transition(cls, dim: int, lower: int, upper: int, einstein_coeff: float,
                   control_index: int) -> "IncoherentChannel":
        if not 0 <= lower < upper < dim:
            raise ModelError("INDEX_INVALID", f"need 0 <= lower < upper < {dim}, got ({lower}, {upper})")
        return cls(transition_operator(dim, lower, upper), einstein_coeff, control_index, lower, upper)


@dataclass(frozen=True)
class ControlSample:
    """Control values on one interval: coherent amplitudes u and spectral densities n."""

    u: np.ndarray
    n: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "u", np.asarray(self.u, dtype=float).reshape(-1))
        object.__setattr__(self, "n", np.asarray(self.n, dtype=float).reshape(-1))
        if np.any(self.n < 0):
            raise ModelError("DOMAIN", "incoherent controls must be nonnegative")


@dataclass(frozen=True, eq=False)
class ControlledSystem:
    H0: np.ndarray
    V: tuple[np.ndarray, ...]
    channels: tuple[IncoherentChannel, ...] = ()
    n_controls: int = 0
    name: str = "explicit"

    def __post_init__(self):
        h0 = np.asarray(self.H0, dtype=complex)
        object.__setattr__(self, "H0", h0)
        object.__setattr__(self, "V", tuple(np.asarray(v, dtype=complex) for v in self.V))
        object.__setattr__(self, "channels", tuple(self.channels))
        dim = h0.shape[0]
        if h0.ndim != 2 or h0.shape != (dim, dim) or dim < 1:
            raise ModelError("SHAPE", f"H0 must be square, got {h0.shape}", "H0")
        if not np.all(np.isfinite(h0)):
            raise ModelError("NON_FINITE", "H0 has non-finite entries", "H0")
        if not is_hermitian(h0):
            raise ModelError("NOT_HERMITIAN", "H0 not Hermitian", "H0")
        for k, v in enumerate(self.V):
            if v.shape != (dim, dim):
                raise ModelError("SHAPE", f"V[{k}] has shape {v.shape}, expected {(dim, dim)}", f"V[{k}]")
            if not is_hermitian(v):
                raise ModelError("NOT_HERMITIAN", f"V[{k}] not Hermitian", f"V[{k}]")
        for i, ch in enumerate(self.channels):
            path = f"channels[{i}]"
            if np.shape(ch.jump) != (dim, dim):
                raise ModelError("SHAPE", "jump operator has wrong shape", path)
            if not ch.einstein_coeff > 0:
                raise ModelError("PHYSICS_INVALID", "Einstein coefficient must be positive", path)
            if not 0 <= ch.control_index < self.n_controls:
                raise ModelError("INDEX_INVALID", f"control_index {ch.control_index} outside "
                                 f"[0, {self.n_controls})", path)

    @property
    def dim(self) -> int:
        return self.H0.shape[0]

    @property
    def n_coherent(self) -> int:
        return len(self.V)

    @cached_property
    def drift_superop(self) -> np.ndarray:
        """Generator at u = 0, n = 0: free evolution plus spontaneous emission."""
        g = commutator_superop(self.H0)
        for ch in self.channels:
            g = g + ch.einstein_coeff * lindblad_dissipator(ch.jump)
        return g

    @cached_property
    def coherent_superops(self) -> np.ndarray:
        """Stack (K, N^2, N^2) of -i[V_k, .]."""
        d2 = self.dim ** 2
        if not self.V:
            return np.zeros((0, d2, d2), dtype=complex)
        return np.stack([commutator_superop(v) for v in self.V])

    @cached_property
    def incoherent_superops(self) -> np.ndarray:
        """Stack (C, N^2, N^2); slice c is d L / d n_c."""
        d2 = self.dim ** 2
        out = np.zeros((self.n_controls, d2, d2), dtype=complex)
        for ch in self.channels:
            out[ch.control_index] += ch.einstein_coeff * (
                lindblad_dissipator(ch.jump) + lindblad_dissipator(ch.jump.conj().T))
        return out

    @cached_property
    def spontaneous_superop(self) -> np.ndarray:
        d2 = self.dim ** 2
        out = np.zeros((d2, d2), dtype=complex)
        for ch in self.channels:
            out += ch.einstein_coeff * lindblad_dissipator(ch.jump)
        return out

    def hamiltonian(self, u: Sequence[float]) -> np.ndarray:
        h = self.H0.copy()
        for uk, v in zip(u, self.V):
            h = h + uk * v
        return h

    def generators(self, u: np.ndarray, n: np.ndarray) -> np.ndarray:
        """Liouvillians for a batch of samples, u of shape (M, K) and n of shape (M, C)."""
        u = np.atleast_2d(np.asarray(u, dtype=float))
        n = np.atleast_2d(np.asarray(n, dtype=float))
        rows = max(u.shape[0], n.shape[0])
        out = np.broadcast_to(self.drift_superop, (rows,) + self.drift_superop.shape).copy()
        if self.n_coherent:
            out += np.einsum("mk,kab->mab", u, self.coherent_superops)
        if self.n_controls:
            out += np.einsum("mc,cab->mab", n, self.incoherent_superops)
        return out


def _check_sample(system: ControlledSystem, u, n) -> tuple[np.ndarray, np.ndarray]:
    u = np.asarray(u, dtype=float).reshape(-1)
    n = np.asarray(n, dtype=float).reshape(-1)
    if u.size != system.n_coherent:
        raise ModelError("SHAPE", f"expected {system.n_coherent} coherent controls, got {u.size}")
    if n.size != system.n_controls:
        raise ModelError("SHAPE", f"expected {system.n_controls} incoherent controls, got {n.size}")
    if np.any(n < 0):
        raise ModelError("DOMAIN", "incoherent controls must be nonnegative")
    return u, n


def dissipator_superop(system: ControlledSystem, n: Sequence[float]) -> np.ndarray:
    _, n = _check_sample(system, np.zeros(system.n_coherent), n)
    out = system.spontaneous_superop.copy()
    for c in range(system.n_controls):
        out += n[c] * system.incoherent_superops[c]
    return out


def liouvillian(system: ControlledSystem, sample: ControlSample) -> np.ndarray:
    u, n = _check_sample(system, sample.u, sample.n)
    return system.generators(u[None], n[None])[0]


def preset_qubit(omega: float, gamma: float) -> ControlledSystem:
    """Two-level system, H0 = omega/2 sigma_z, drive sigma_x, one thermal channel.

    Level 0 is the ground state.
    """
    if not gamma > 0:
        raise ModelError("PHYSICS_INVALID", "gamma must be positive", "gamma")
    return ControlledSystem(
        H0=0.5 * omega * SIGMA_Z,
        V=(SIGMA_X,),
        channels=(IncoherentChannel.transition(2, 0, 1, gamma, 0),),
        n_controls=1,
        name="qubit",
    )


def preset_qutrit_forbidden(E1: float, E2: float, E3: float, v13: complex, v23: complex,
                            A1: float, A2: float) -> ControlledSystem:
    """Qutrit whose two lower levels are coupled only through the upper level.

    Channel 0 drives the 1<->3 transition, channel 1 the 2<->3 transition; the
    1<->2 transition has neither a field coupling nor an environment.
    """
    energies = (E1, E2, E3)
    if len(set(energies)) != 3:
        raise ModelError("PHYSICS_INVALID", "energies must be pairwise distinct", "E")
    for label, a in (("A1", A1), ("A2", A2)):
        if not a > 0:
            raise ModelError("PHYSICS_INVALID", f"{label} must be positive", label)
    v = np.zeros((3, 3), dtype=complex)
    v[0, 2] = v13
    v[1, 2] = v23
    v = v + v.conj().T
    return ControlledSystem(
        H0=np.diag(np.asarray(energies, dtype=complex)),
        V=(v,),
        channels=(IncoherentChannel.transition(3, 0, 2, A1, 0),
                  IncoherentChannel.transition(3, 1, 2, A2, 1)),
        n_controls=2,
        name="qutrit_forbidden",
    )


def preset_two_qubit(omega1: float, omega2: float, J: float, gamma1: float,
                     gamma2: float) -> ControlledSystem:
    """Two Ising-coupled qubits, local sigma_x drives, one environment per qubit."""
    for label, g in (("gamma1", gamma1), ("gamma2", gamma2)):
        if not g > 0:
            raise ModelError("PHYSICS_INVALID", f"{label} must be positive", label)
    eye = np.eye(2)
    lower = np.array([[0, 1], [0, 0]], dtype=complex)
    h0 = (0.5 * omega1 * np.kron(SIGMA_Z, eye) + 0.5 * omega2 * np.kron(eye, SIGMA_Z)
          + J * np.kron(SIGMA_Z, SIGMA_Z))
    return ControlledSystem(
        H0=h0,
        V=(np.kron(SIGMA_X, eye), np.kron(eye, SIGMA_X)),
        channels=(IncoherentChannel(np.kron(lower, eye), gamma1, 0),
                  IncoherentChannel(np.kron(eye, lower), gamma2, 1)),
        n_controls=2,
        name="two_qubit",
    )


def systems_allclose(a: ControlledSystem, b: ControlledSystem, tol: float = 1e-12) -> bool:
    """Compare two systems through their generator pieces."""
    if a.dim != b.dim or a.n_coherent != b.n_coherent or a.n_controls != b.n_controls:
        return False
    pairs = [(a.drift_superop, b.drift_superop), (a.coherent_superops, b.coherent_superops),
             (a.incoherent_superops, b.incoherent_superops)]
    return all(np.allclose(x, y, rtol=0, atol=tol) for x, y in pairs)
