"""Small dense complex linear algebra used throughout the package.

Operators are vectorized by column stacking, so ``A @ X @ B`` becomes
``kron(B.T, A) @ vec(X)``.  All functions accept plain numpy arrays; the
exponential routines also accept stacks of matrices with shape ``(..., n, n)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (SIGMA_X, SIGMA_Y, SIGMA_Z)


class DimensionError(ValueError):
    pass


def vectorize(m: np.ndarray) -> np.ndarray:
    """Column-stack a square matrix into a vector of length dim**2."""
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    return m.reshape(-1, order="F")


def devectorize(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v).reshape(-1)
    dim = math.isqrt(v.size)
    if dim * dim != v.size:
        raise DimensionError(f"vector length {v.size} is not a perfect square")
    return v.reshape(dim, dim, order="F")


def spre(a: np.ndarray) -> np.ndarray:
    """Superoperator of X -> A X."""
    return np.kron(np.eye(a.shape[0]), a)


def spost(b: np.ndarray) -> np.ndarray:
    """Superoperator of X -> X B."""
    return np.kron(b.T, np.eye(b.shape[0]))


def sprepost(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Superoperator of X -> A X B."""
    return np.kron(b.T, a)


def commutator_superop(h: np.ndarray) -> np.ndarray:
    """Superoperator of X -> -i[H, X]."""
    return -1j * (spre(h) - spost(h))


def lindblad_dissipator(jump: np.ndarray) -> np.ndarray:
    """Superoperator of D[L]X = L X L^+ - 1/2 {L^+ L, X}."""
    ldl = jump.conj().T @ jump
    return sprepost(jump, jump.conj().T) - 0.5 * (spre(ldl) + spost(ldl))


def apply_superop(s: np.ndarray, x: np.ndarray) -> np.ndarray:
    return devectorize(s @ vectorize(x))


def choi_from_superop(s: np.ndarray) -> np.ndarray:
    """Choi matrix sum_ij |i><j| (x) Phi(|i><j|) of a column-stacked superoperator."""
    dim = math.isqrt(s.shape[0])
    # s[(a,b),(c,d)] with row index a + dim*b and column index c + dim*d
    t = s.reshape(dim, dim, dim, dim, order="F")  # t[a, b, c, d]
    # choi[(c,a),(d,b)] = Phi(|c><d|)[a, b]
    return t.transpose(2, 0, 3, 1).reshape(dim * dim, dim * dim)


def hs_distance_sq(a: np.ndarray, b: np.ndarray) -> float:
    """Squared Hilbert-Schmidt distance Tr[(A-B)^+ (A-B)]."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    d = a - b
    return float(np.vdot(d, d).real)


def bloch_from_density(rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho)
    if rho.shape != (2, 2):
        raise DimensionError("Bloch parameterization needs a 2x2 density matrix")
    return np.array([
        2.0 * rho[1, 0].real,
        2.0 * rho[1, 0].imag,
        (rho[0, 0] - rho[1, 1]).real,
    ])


def density_from_bloch(r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if r.shape != (3,):
        raise DimensionError("Bloch vector must have three components")
    return 0.5 * (np.eye(2) + r[0] * SIGMA_X + r[1] * SIGMA_Y + r[2] * SIGMA_Z)


# Scaling-and-squaring with diagonal Pade approximants (Higham 2005).
_THETA = {3: 1.495585217958292e-2, 5: 2.539398330063230e-1, 7: 9.504178996162932e-1,
          9: 2.097847961257068, 13: 5.371920351148152}

_PADE = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0),
    13: (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
         1187353796428800.0, 129060195264000.0, 10559470521600.0,
         670442572800.0, 33522128640.0, 1323241920.0, 40840800.0, 960960.0,
         16380.0, 182.0, 1.0),
}


def _pade_uv(a: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    b = _PADE[m]
    ident = np.broadcast_to(np.eye(a.shape[-1], dtype=a.dtype), a.shape)
    a2 = a @ a
    if m == 13:
        a4 = a2 @ a2
        a6 = a4 @ a2
        u = a @ (a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
                 + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident)
        v = (a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2)
             + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident)
        return u, v
    powers = [ident, a2]
    for _ in range(2, m // 2 + 1):
        powers.append(powers[-1] @ a2)
    u = sum(b[2 * j + 1] * powers[j] for j in range(m // 2 + 1))
    v = sum(b[2 * j] * powers[j] for j in range(m // 2 + 1))
    return a @ u, v


def expm(m: np.ndarray) -> np.ndarray:
    """Matrix exponential of a matrix or a stack of matrices.

    Degree and scaling are chosen from the 1-norm; inside a stack every matrix
    gets its own number of squarings.
    """
    a = np.asarray(m)
    if not np.all(np.isfinite(a)):
        raise ValueError("expm: non-finite entries")
    if a.shape[-1] != a.shape[-2]:
        raise DimensionError(f"expm needs square matrices, got {a.shape}")
    a = a.astype(np.result_type(a.dtype, np.float64))
    single = a.ndim == 2
    if single:
        a = a[None]
    norms = np.abs(a).sum(axis=-2).max(axis=-1)
    peak = float(norms.max()) if norms.size else 0.0
    for deg in (3, 5, 7, 9):
        if peak <= _THETA[deg]:
            u, v = _pade_uv(a, deg)
            r = np.linalg.solve(v - u, v + u)
            return r[0] if single else r
    s = np.maximum(0, np.ceil(np.log2(np.maximum(norms, 1e-300) / _THETA[13]))).astype(int)
    a = a / (2.0 ** s)[:, None, None]
    u, v = _pade_uv(a, 13)
    r = np.linalg.solve(v - u, v + u)
    for i in range(int(s.max()) if s.size else 0):
        idx = s > i
        r[idx] = r[idx] @ r[idx]
    return r[0] if single else r


def expm_frechet(a: np.ndarray, e: np.ndarray) -> np.ndarray:
    """Directional derivative of expm at A along E.

    Read off the top-right block of exp([[A, E], [0, A]]).  Stacks of (A, E)
    pairs are handled in one batched exponential.
    """
    a = np.asarray(a)
    e = np.asarray(e)
    if a.shape != e.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {e.shape}")
    n = a.shape[-1]
    dtype = np.result_type(a.dtype, e.dtype, np.float64)
    big = np.zeros(a.shape[:-2] + (2 * n, 2 * n), dtype=dtype)
    big[..., :n, :n] = a
    big[..., n:, n:] = a
    big[..., :n, n:] = e
    return expm(big)[..., :n, n:]


REPEATED = "repeated"
THREE_REAL = "three-distinct-real"
ONE_REAL = "one-real-pair-complex"


@dataclass(frozen=True)
class CubicRoots:
    roots: np.ndarray
    discriminant_class: str


def _root_separation(roots: np.ndarray) -> float:
    return min(abs(roots[0] - roots[1]), abs(roots[0] - roots[2]), abs(roots[1] - roots[2]))


def cardano_roots(a: float, b: float, c: float, repeated_tol: float = 1e-7) -> CubicRoots:
    """Roots of x^3 + a x^2 + b x + c = 0 via Cardano's formula.

    The depressed cubic t^3 + p t + q is solved with the trigonometric form
    when all roots are real and with real cube roots otherwise.  Well separated
    roots get one Newton polish on the original cubic.
    """
    a, b, c = float(a), float(b), float(c)
    shift = a / 3.0
    p = b - a * a / 3.0
    q = 2.0 * a ** 3 / 27.0 - a * b / 3.0 + c
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3  # < 0 means three distinct real roots
    if p < 0 and disc < 0:
        m = 2.0 * math.sqrt(-p / 3.0)
        arg = 3.0 * q / (p * m)
        phi = math.acos(max(-1.0, min(1.0, arg))) / 3.0
        t = np.array([m * math.cos(phi - 2.0 * math.pi * k / 3.0) for k in range(3)])
        roots = (t - shift).astype(complex)
    else:
        sq = math.sqrt(max(disc, 0.0))
        # pick the larger-magnitude branch to avoid cancellation
        s1 = float(np.cbrt(-q / 2.0 + sq)) if q <= 0 else float(np.cbrt(-q / 2.0 - sq))
        s2 = -p / (3.0 * s1) if s1 != 0.0 else 0.0
        real = s1 + s2
        imag = math.sqrt(3.0) / 2.0 * (s1 - s2)
        roots = np.array([real, -real / 2.0 + 1j * imag, -real / 2.0 - 1j * imag]) - shift
    scale = 1.0 + float(np.max(np.abs(roots)))
    if _root_separation(roots) >= repeated_tol * scale:
        for _ in range(2):
            f = ((roots + a) * roots + b) * roots + c
            df = (3.0 * roots + 2.0 * a) * roots + b
            with np.errstate(divide="ignore", invalid="ignore"):
                cand = roots - f / df
            f_cand = ((cand + a) * cand + b) * cand + c
            better = np.isfinite(cand) & (np.abs(f_cand) < np.abs(f))
            roots = np.where(better, cand, roots)
        if abs(roots[1].imag) > 0:
            roots[2] = roots[1].conjugate()
            roots[0] = roots[0].real
    sep = _root_separation(roots)
    if sep < repeated_tol * scale:
        cls = REPEATED
    elif np.all(np.abs(roots.imag) <= repeated_tol * scale):
        cls = THREE_REAL
        roots = roots.real.astype(complex)
    else:
        cls = ONE_REAL
    return CubicRoots(roots=roots, discriminant_class=cls)


def is_hermitian(m: np.ndarray, tol: float = 1e-12) -> bool:
    m = np.asarray(m)
    return m.ndim == 2 and m.shape[0] == m.shape[1] and bool(np.allclose(m, m.conj().T, rtol=0, atol=tol))


def is_unitary(m: np.ndarray, tol: float = 1e-12) -> bool:
    m = np.asarray(m)
    return bool(np.allclose(m.conj().T @ m, np.eye(m.shape[0]), rtol=0, atol=tol))


def check_density(rho: np.ndarray, tol: float = 1e-12, eig_tol: float = 1e-10) -> np.ndarray:
    """Return rho as a complex array, raising if it is not a density matrix."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionError(f"density matrix must be square, got {rho.shape}")
    if not np.all(np.isfinite(rho)):
        raise ValueError("density matrix has non-finite entries")
    if not is_hermitian(rho, tol):
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > tol:
        raise ValueError("density matrix trace differs from 1")
    if np.linalg.eigvalsh(rho).min() < -eig_tol:
        raise ValueError("density matrix has negative eigenvalues")
    return rho
