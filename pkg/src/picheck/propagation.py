"""PI propagators, projected ancilla blocks and Schrodinger-picture dressing."""
from dataclasses import dataclass

import numpy as np

from .algebra import AlgebraGraph, lift_dense, membership
from .numerics import (ZERO_TOL, NumericsError, ProportionalityFit, as_cmatrix, expm, fro,
                       is_hermitian, proportionality_fit)


class FrameError(ValueError):
    pass


class TrivialTransitionError(ValueError):
    """The projected transition amplitude is below the zero threshold."""


def pi_propagator(h, family, t):
    """exp(-i t H_AB) for the lift H_AB of the ancilla operator h."""
    return expm(lift_dense(h, family), -1j * t)


@dataclass(frozen=True)
class XiCheck:
    ok: bool
    membership_residual: float
    coefficient_error: float


def xi_correspondence_check(h, family, t, tol=1e-9, generator=None):
    """Check exp(-i t H) = sum_mn xi_mn(t) |m><n| (x) U_mn with xi = exp(-i t h).

    `generator` overrides the composite generator (default: the lift of h),
    which is how non-algebra generators are probed.
    """
    gen = lift_dense(h, family) if generator is None else as_cmatrix(generator)
    w = expm(gen, -1j * t)
    mem = membership(w, AlgebraGraph.full(family), tol)
    xi = expm(h, -1j * t)
    err = max(abs(mem.coefficients[(m, n)] - xi[m - 1, n - 1]) for (m, n) in mem.coefficients)
    return XiCheck(mem.residual <= tol and err <= tol, mem.residual, float(err))


def ancilla_block(w, i, r, d_B):
    """Central-system block <r| w |i> of a composite operator (1-based ancilla indices)."""
    return w[(r - 1) * d_B:r * d_B, (i - 1) * d_B:i * d_B]


@dataclass(frozen=True)
class ProjectedBlock:
    i: int
    r: int
    block: np.ndarray
    fit: ProportionalityFit

    @property
    def relative_residual(self):
        n = fro(self.block)
        return self.fit.residual / n if n > 0 and not self.fit.trivially_zero else 0.0


def projected_block(w, family, i, r, zero_tol=ZERO_TOL, target=None):
    """P_r w P_i as a d_B x d_B block, fitted against U_ri (or `target`)."""
    w = as_cmatrix(w, "w")
    for idx in (i, r):
        if not 1 <= idx <= family.d_A:
            raise IndexError(f"ancilla index {idx} outside [1, {family.d_A}]")
    if w.shape != (family.dim, family.dim):
        raise NumericsError(f"propagator shape {w.shape} does not match dimension {family.dim}")
    blk = ancilla_block(w, i, r, family.d_B).copy()
    tgt = family.U(r, i) if target is None else target
    return ProjectedBlock(i, r, blk, proportionality_fit(blk, tgt, zero_tol))


class DiagonalFrame:
    """Frame Hamiltonian H0(t) = sum_m |m><m| (x) H_m(t), piecewise constant in time.

    Each level carries a schedule: a list of (t_end, H) segments with increasing
    t_end; H applies on (previous t_end, t_end].  A plain matrix means a
    constant Hamiltonian for all t >= 0.
    """

    def __init__(self, schedules):
        self._levels = []
        for m, sched in enumerate(schedules, start=1):
            if isinstance(sched, (list, tuple)) and sched and isinstance(sched[0], tuple):
                segs = [(float(te), as_cmatrix(h, f"H_{m}")) for te, h in sched]
            else:
                segs = [(np.inf, as_cmatrix(sched, f"H_{m}"))]
            ends = [te for te, _ in segs]
            if any(b <= a for a, b in zip(ends, ends[1:])):
                raise FrameError(f"schedule for level {m} is not increasing")
            for _, h in segs:
                if not is_hermitian(h, 1e-10):
                    raise FrameError(f"H_{m} is not Hermitian")
            self._levels.append(segs)
        dims = {h.shape[0] for segs in self._levels for _, h in segs}
        if len(dims) != 1:
            raise FrameError("frame Hamiltonians differ in dimension")
        self.d_B = dims.pop()

    @classmethod
    def constant(cls, hamiltonians):
        return cls(list(hamiltonians))

    @classmethod
    def zero(cls, d_A, d_B):
        return cls([np.zeros((d_B, d_B))] * d_A)

    @property
    def d_A(self):
        return len(self._levels)

    def hamiltonian(self, m, t):
        for te, h in self._levels[m - 1]:
            if t <= te:
                return h
        raise FrameError(f"schedule for level {m} ends before t={t:g}")

    def R(self, m, t):
        """Time-ordered exp(-i int_0^t H_m), later segments multiplied on the left."""
        segs = self._levels[m - 1]
        if t > segs[-1][0]:
            raise FrameError(f"schedule for level {m} ends before t={t:g}")
        out = np.eye(self.d_B, dtype=np.complex128)
        start = 0.0
        for te, h in segs:
            stop = min(te, t)
            if stop > start:
                out = expm(h, -1j * (stop - start)) @ out
            start = te
            if te >= t:
                break
        return out

    def R_full(self, t):
        d = self.d_A * self.d_B
        out = np.zeros((d, d), dtype=np.complex128)
        for m in range(1, self.d_A + 1):
            s = slice((m - 1) * self.d_B, m * self.d_B)
            out[s, s] = self.R(m, t)
        return out

    def R_hat(self, t):
        """Superoperator R(t) (x) R(t)^* acting on row-stacked operators."""
        r = self.R_full(t)
        return np.kron(r, r.conj())

    def is_zero(self):
        return all(fro(h) == 0 for segs in self._levels for _, h in segs)


def schrodinger_dress(w_interaction, frame, t):
    return frame.R_full(t) @ as_cmatrix(w_interaction, "w")


def induced_transition_check(w, family, i, r, psi, k=None, zero_tol=ZERO_TOL):
    """Sine of the angle between <r| w |i, U_ik psi> and U_rk psi."""
    k = family.anchor if k is None else k
    psi = np.asarray(psi, dtype=np.complex128).ravel()
    if abs(np.linalg.norm(psi) - 1.0) > 1e-10:
        raise ValueError("psi must be normalized")
    dB = family.d_B
    state = np.zeros(family.dim, dtype=np.complex128)
    state[(i - 1) * dB:i * dB] = family.U(i, k) @ psi
    out = (as_cmatrix(w) @ state)[(r - 1) * dB:r * dB]
    n = np.linalg.norm(out)
    if n <= zero_tol:
        raise TrivialTransitionError(f"transition {i}->{r} has amplitude {n:.3e}")
    ref = family.U(r, k) @ psi
    ref = ref / np.linalg.norm(ref)
    perp = out - ref * np.vdot(ref, out)
    return float(np.linalg.norm(perp) / n)
