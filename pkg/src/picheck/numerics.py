"""Dense complex linear-algebra kernel.

Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128``.  The
heavy primitives (matrix exponential, general eigensolver) delegate to
SciPy/LAPACK; everything here validates inputs and pins the conventions
the rest of the package relies on.
"""
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg as sl

EQUALITY_TOL = 1e-9
PROPORTIONALITY_TOL = 1e-7
ZERO_TOL = 1e-10


class NumericsError(ValueError):
    pass


def as_cmatrix(a, name="matrix"):
    """Return `a` as a finite 2-D complex128 array or raise NumericsError."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim == 1:
        m = m.reshape(1, -1)
    if m.ndim != 2 or m.size == 0:
        raise NumericsError(f"{name} must be a non-empty 2-D array, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NumericsError(f"{name} has non-finite entries")
    return m


def _square(a, name):
    m = as_cmatrix(a, name)
    if m.shape[0] != m.shape[1]:
        raise NumericsError(f"{name} must be square, got shape {m.shape}")
    return m


def fro(a):
    return float(np.linalg.norm(a))


def kron(a, b):
    return np.kron(as_cmatrix(a, "a"), as_cmatrix(b, "b"))


def expm(a, scale=1.0):
    """exp(scale * a) by Pade scaling-and-squaring."""
    m = _square(a, "a")
    return sl.expm(complex(scale) * m)


def eig(a):
    """Eigenvalues (with multiplicity) and right eigenvectors of a general matrix.

    Columns of the returned matrix are the eigenvectors.
    """
    m = _square(a, "a")
    try:
        vals, vecs = np.linalg.eig(m)
    except np.linalg.LinAlgError as exc:
        raise NumericsError(f"eigensolver did not converge: {exc}") from exc
    return vals, vecs


def is_unitary(u, tol=1e-10):
    u = _square(u, "u")
    return fro(u.conj().T @ u - np.eye(u.shape[0])) <= tol


def is_hermitian(h, tol=1e-10):
    h = _square(h, "h")
    return fro(h - h.conj().T) <= tol


@dataclass(frozen=True)
class ProportionalityFit:
    """Best scalar `constant` with x ~ constant * target (Frobenius)."""

    constant: complex
    residual: float
    trivially_zero: bool

    def relative_residual(self, scale):
        return self.residual / scale if scale > 0 else 0.0


def proportionality_fit(x, target, zero_tol=ZERO_TOL):
    x = as_cmatrix(x, "x")
    target = as_cmatrix(target, "target")
    if x.shape != target.shape:
        raise NumericsError(f"shape mismatch {x.shape} vs {target.shape}")
    tt = np.vdot(target, target).real
    if tt == 0.0:
        raise NumericsError("target matrix is zero")
    tnorm = np.sqrt(tt)
    if fro(x) <= zero_tol * max(1.0, tnorm):
        return ProportionalityFit(0j, fro(x), True)
    c = complex(np.vdot(target, x) / tt)
    return ProportionalityFit(c, fro(x - c * target), False)


def rk4_solve(rhs: Callable[[float, np.ndarray], np.ndarray], x0, t_final, steps, t_start=0.0):
    """Fixed-step classical RK4 for dx/dt = rhs(t, x); `x0` may be any array shape."""
    if steps < 1:
        raise NumericsError("steps must be >= 1")
    x = np.array(x0, dtype=np.complex128)
    h = (t_final - t_start) / steps
    for n in range(steps):
        t = t_start + n * h
        with np.errstate(over="ignore", invalid="ignore"):
            k1 = rhs(t, x)
            k2 = rhs(t + 0.5 * h, x + 0.5 * h * k1)
            k3 = rhs(t + 0.5 * h, x + 0.5 * h * k2)
            k4 = rhs(t + h, x + h * k3)
            x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise NumericsError(f"non-finite values at t={t + h:g}")
    return x


def ode_propagate(generator: Callable[[float], np.ndarray], initial, t_final, steps):
    """Solve dX/dt = G(t) X on [0, t_final]; `initial` may be a rectangular slab."""
    x0 = as_cmatrix(initial, "initial")
    return rk4_solve(lambda t, x: generator(t) @ x, x0, t_final, steps)


def random_unitary(n, rng):
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_hermitian(n, rng, scale=1.0):
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * (z + z.conj().T) / 2


def random_density_matrix(n, rng):
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    rho = z @ z.conj().T
    return rho / np.trace(rho).real
