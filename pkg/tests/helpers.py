"""Independent oracles shared by the test modules."""

import numpy as np

from ingrape.linalg import devectorize, vectorize


def random_density(dim, rng, rank=None):
    rank = rank or dim
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_unitary(dim, rng):
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_hermitian(dim, rng):
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return 0.5 * (z + z.conj().T)


def taylor_expm(a, terms=30):
    """Truncated power series; only for matrices of modest norm."""
    out = np.eye(a.shape[0], dtype=complex)
    term = np.eye(a.shape[0], dtype=complex)
    for k in range(1, terms + 1):
        term = term @ a / k
        out = out + term
    return out


def apply_liouvillian_direct(system, u, n, rho):
    """Right-hand side of the master equation written out with matrix products."""
    h = system.hamiltonian(u)
    out = -1j * (h @ rho - rho @ h)
    for ch in system.channels:
        for jump, rate in ((ch.jump, ch.einstein_coeff * (n[ch.control_index] + 1)),
                           (ch.jump.conj().T, ch.einstein_coeff * n[ch.control_index])):
            ldl = jump.conj().T @ jump
            out = out + rate * (jump @ rho @ jump.conj().T - 0.5 * (ldl @ rho + rho @ ldl))
    return out


def liouvillian_by_columns(system, u, n):
    """Superoperator assembled column by column from apply_liouvillian_direct."""
    d = system.dim
    cols = []
    for k in range(d * d):
        e = np.zeros(d * d, dtype=complex)
        e[k] = 1
        cols.append(vectorize(apply_liouvillian_direct(system, u, n, devectorize(e))))
    return np.array(cols).T


def fd_gradient(objective_value, x, h=1e-5):
    """Central differences of a scalar function of a flat parameter vector."""
    g = np.zeros_like(x)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (objective_value(xp) - objective_value(xm)) / (2 * h)
    return g


class _FlatGradient:
    def __init__(self, g):
        self._g = g

    def flat(self):
        return self._g


class DoubleWell:
    """Surrogate objective (x^2 - 1)^2 + tilt x on the first coherent amplitude.

    Its two minima sit near x = -1 and x = +1 with values differing by about 2 tilt.
    """

    def __init__(self, tilt=0.2):
        self.tilt = tilt

    def _f(self, x):
        return (x * x - 1.0) ** 2 + self.tilt * x

    def evaluate(self, system, controls):
        return float(self._f(controls.u[0, 0]))

    def value_and_gradient(self, system, controls):
        x = controls.u[0, 0]
        g = np.zeros(controls.flat().size)
        g[0] = 4.0 * x * (x * x - 1.0) + self.tilt
        return float(self._f(x)), _FlatGradient(g)

    def minima(self):
        roots = np.roots([4.0, 0.0, -4.0, self.tilt]).real
        return sorted(self._f(r) for r in roots if abs(r) > 0.5)
