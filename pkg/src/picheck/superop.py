"""Hilbert-Schmidt space machinery: vectorization, HS-space PI base vectors,
Liouvillians, ancilla superprojectors and the exact PI gate condition.

Operators are vectorized by row stacking, vec(|a><b|) = |a> (x) |b>^*, so the
map rho -> X rho Y is the matrix X (x) Y^T.  Superoperators are plain
complex arrays of shape (d^2, d^2) with d = d_A * d_B.
"""
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .algebra import (AlgebraError, AlgebraGraph, closure_check, ket_bra, match_multiset,
                      membership, self_adjoint_extension)
from .numerics import (ZERO_TOL, NumericsError, ProportionalityFit, as_cmatrix, eig, expm, fro,
                       is_hermitian, ode_propagate, proportionality_fit)

MAX_DIM = 16


def vec(x):
    x = as_cmatrix(x, "x")
    if x.shape[0] != x.shape[1]:
        raise NumericsError("vec expects a square operator")
    return x.reshape(-1).copy()


def unvec(v):
    v = np.asarray(v, dtype=np.complex128).ravel()
    d = int(round(np.sqrt(v.size)))
    if d * d != v.size:
        raise NumericsError(f"length {v.size} is not a perfect square")
    return v.reshape(d, d).copy()


def left_right_superop(x, y):
    """Matrix of rho -> x rho y."""
    x = as_cmatrix(x, "x")
    y = as_cmatrix(y, "y")
    if x.shape != y.shape or x.shape[0] != x.shape[1]:
        raise NumericsError(f"incompatible shapes {x.shape} and {y.shape}")
    return np.kron(x, y.T)


def apply_superop(s, rho):
    return unvec(s @ vec(rho))


def hs_base_vector(family, m, n, p, q):
    """|mn>><<pq| (x) (U_mp (x) U_nq^*) realized on the composite HS space.

    This is the superoperator rho -> (|m><p| (x) U_mp) rho (|q><n| (x) U_nq^dagger).
    """
    dA = family.d_A
    x = np.kron(ket_bra(m, p, dA), family.U(m, p))
    yt = np.kron(ket_bra(n, q, dA), family.U(n, q).conj())
    return np.kron(x, yt)


def hs_element(coeffs, family):
    """sum h_{mn,pq} |mn>><<pq| (x) (U_mp (x) U_nq^*) from a (d_A^2, d_A^2) coefficient matrix.

    Rows of `coeffs` are indexed by (m, n) and columns by (p, q), both row-major.
    """
    coeffs = as_cmatrix(coeffs, "coeffs")
    dA = family.d_A
    if coeffs.shape != (dA * dA, dA * dA):
        raise NumericsError(f"coefficients have shape {coeffs.shape}, want ({dA * dA}, {dA * dA})")
    D = family.dim ** 2
    out = np.zeros((D, D), dtype=np.complex128)
    r = range(1, dA + 1)
    for m, n, p, q in product(r, r, r, r):
        c = coeffs[(m - 1) * dA + n - 1, (p - 1) * dA + q - 1]
        if c != 0:
            out += c * hs_base_vector(family, m, n, p, q)
    return out


def hs_basis_mult_check(family, left, right, tol=1e-12):
    """Verify the HS-space product rule for base vectors left=(m,n,p,q), right=(r,s,t,v)."""
    m, n, p, q = left
    r, s, t, v = right
    prod = hs_base_vector(family, m, n, p, q) @ hs_base_vector(family, r, s, t, v)
    if p == r and q == s:
        expected = hs_base_vector(family, m, n, t, v)
    else:
        expected = np.zeros_like(prod)
    return fro(prod - expected) <= tol


def superprojector(i, d_A, d_B):
    """rho -> P_i rho P_i with P_i = |i><i| (x) I."""
    p = np.kron(ket_bra(i, i, d_A), np.eye(d_B))
    return np.kron(p, p)


def hs_indices(m, d_A, d_B):
    """Flat row-stacked indices of the (m, m) ancilla block, ordered (j, k) row-major."""
    d = d_A * d_B
    base = (m - 1) * d_B
    return np.array([(base + j) * d + base + k for j in range(d_B) for k in range(d_B)])


def hs_block(w_hat, i, r, d_A, d_B):
    """The (r r, i i) block of a superoperator: the central map of P_r w_hat P_i."""
    rows = hs_indices(r, d_A, d_B)
    cols = hs_indices(i, d_A, d_B)
    return np.asarray(w_hat)[np.ix_(rows, cols)]


class LindbladModel:
    """Composite Hamiltonian plus jump operators with rates folded in.

    The Hamiltonian and each jump may be a matrix or a callable of time
    returning one.  `labels` names the jumps in reports.
    """

    def __init__(self, hamiltonian, jumps=(), labels=None, frame=None, max_dim=MAX_DIM):
        self._h = hamiltonian if callable(hamiltonian) else as_cmatrix(hamiltonian, "hamiltonian")
        self._jumps = [k if callable(k) else as_cmatrix(k, "jump") for k in jumps]
        self.labels = list(labels) if labels is not None else [f"K{i + 1}" for i in range(len(self._jumps))]
        if len(self.labels) != len(self._jumps):
            raise ValueError("labels and jumps differ in length")
        self.frame = frame
        h0 = self.hamiltonian_at(0.0)
        self.dim = h0.shape[0]
        if h0.shape[0] != h0.shape[1]:
            raise NumericsError("hamiltonian must be square")
        if self.dim > max_dim:
            raise NumericsError(f"composite dimension {self.dim} exceeds cap {max_dim}")
        if not is_hermitian(h0, 1e-10):
            raise NumericsError("hamiltonian is not Hermitian")
        for lab, k in zip(self.labels, self.jumps_at(0.0)):
            if k.shape != h0.shape:
                raise NumericsError(f"jump {lab} has shape {k.shape}, want {h0.shape}")

    @property
    def is_constant(self):
        return not callable(self._h) and not any(callable(k) for k in self._jumps)

    def hamiltonian_at(self, t):
        return as_cmatrix(self._h(t)) if callable(self._h) else self._h

    def jumps_at(self, t):
        return [as_cmatrix(k(t)) if callable(k) else k for k in self._jumps]

    def partition_jumps(self):
        """(constant jumps, callable jumps), each in model order."""
        return ([k for k in self._jumps if not callable(k)],
                [k for k in self._jumps if callable(k)])

    def time_dependent_jumps(self):
        return [lab for lab, k in zip(self.labels, self._jumps) if callable(k)]


def liouvillian(model, t=0.0):
    """-i(H (x) I - I (x) H^*) + sum_K [K (x) K^* - (K^dag K (x) I + I (x) (K^dag K)^*) / 2]."""
    h = model.hamiltonian_at(t)
    eye = np.eye(model.dim)
    out = -1j * (np.kron(h, eye) - np.kron(eye, h.conj()))
    for k in model.jumps_at(t):
        kk = k.conj().T @ k
        out += np.kron(k, k.conj()) - 0.5 * (np.kron(kk, eye) + np.kron(eye, kk.conj()))
    return out


def evolution_superop(model, t, steps=4000):
    """exp(L t) for constant models, otherwise the RK4 time-ordered propagator."""
    if model.is_constant:
        return expm(liouvillian(model), t)
    D = model.dim ** 2
    return ode_propagate(lambda s: liouvillian(model, s), np.eye(D), t, steps)


def channel_nonunitarity(block):
    """Weight of a central map outside its best single-operator conjugation.

    A map rho -> c V rho V^dagger has a rank-one reshuffled (Choi-type) matrix,
    so this returns sqrt(sum_{k>=2} s_k^2) / ||s|| over its singular values s.
    """
    n = int(round(np.sqrt(block.shape[0])))
    resh = np.asarray(block).reshape(n, n, n, n).transpose(0, 2, 1, 3).reshape(n * n, n * n)
    s = np.linalg.svd(resh, compute_uv=False)
    tot = np.linalg.norm(s)
    return float(np.linalg.norm(s[1:]) / tot) if tot > 0 else 0.0


@dataclass(frozen=True)
class GateCondition:
    i: int
    r: int
    fit: ProportionalityFit
    relative_residual: float
    channel_unitarity: float


def hs_target(family, i, r):
    u = family.U(r, i)
    return np.kron(u, u.conj())


def pi_gate_condition(w_hat, family, i, r, zero_tol=ZERO_TOL):
    """Fit P_r w_hat P_i against |rr>><<ii| (x) (U_ri (x) U_ri^*).

    Only the (rr, ii) block of the projected superoperator can be nonzero, so
    the fit runs on that d_B^2 x d_B^2 block.  `channel_unitarity` is the
    non-unitarity of the induced central map (0 for a scaled conjugation).
    """
    w_hat = as_cmatrix(w_hat, "w_hat")
    if w_hat.shape != (family.dim ** 2, family.dim ** 2):
        raise NumericsError(f"superoperator shape {w_hat.shape} does not match dimension {family.dim}")
    blk = hs_block(w_hat, i, r, family.d_A, family.d_B)
    fit = proportionality_fit(blk, hs_target(family, i, r), zero_tol)
    n = fro(blk)
    rel = 0.0 if fit.trivially_zero or n == 0 else fit.residual / n
    nonunit = 0.0 if fit.trivially_zero else channel_nonunitarity(blk)
    return GateCondition(i, r, fit, rel, nonunit)


@dataclass(frozen=True)
class Witness:
    label: str
    residual: float
    t: float


@dataclass
class Theorem1Report:
    exact_pi: bool
    graph_edges: tuple
    witnesses: list = field(default_factory=list)
    spot_times: tuple = ()
    worst_gate_residual: float = 0.0


def theorem1_check(model, graph, tol=1e-9, times=(0.0,), spot_times=(), gate_tol=1e-8,
                   zero_tol=ZERO_TOL, steps=4000):
    """Membership of the Hamiltonian and every jump in the self-adjoint closure of `graph`.

    Time-dependent operators are tested at each entry of `times`.  When all
    operators are members, the gate condition is spot-checked on every
    ancilla pair at `spot_times`; a failure there raises AssertionError since
    it would contradict the membership verdict.
    """
    ext = self_adjoint_extension(graph)
    if not closure_check(ext).closed:
        raise AlgebraError("graph closure failed")
    if ext.family.dim != model.dim:
        raise NumericsError(f"graph dimension {ext.family.dim} does not match model {model.dim}")
    ops = [("H", lambda s: model.hamiltonian_at(s))]
    for idx, lab in enumerate(model.labels):
        ops.append((lab, lambda s, idx=idx: model.jumps_at(s)[idx]))
    check_times = (0.0,) if model.is_constant else tuple(times)
    witnesses = []
    for lab, op in ops:
        worst = max(((membership(op(s), ext, tol), s) for s in check_times),
                    key=lambda ms: ms[0].relative_residual)
        if not worst[0].member:
            witnesses.append(Witness(lab, worst[0].relative_residual, float(worst[1])))
    report = Theorem1Report(not witnesses, tuple(ext.sorted_edges()), witnesses, tuple(spot_times))
    if report.exact_pi:
        worst = 0.0
        fam = ext.family
        for s in spot_times:
            w_hat = evolution_superop(model, s, steps)
            for i, r in product(range(1, fam.d_A + 1), repeat=2):
                worst = max(worst, pi_gate_condition(w_hat, fam, i, r, zero_tol).relative_residual)
        report.worst_gate_residual = worst
        if worst > gate_tol:
            raise AssertionError(f"members of the algebra but gate residual {worst:.3e} > {gate_tol:g}")
    return report


@dataclass(frozen=True)
class HSSpectrumReport:
    ancilla_eigenvalues: tuple
    multiplicity_verified: bool
    eigvec_residuals: tuple
    spectrum_mismatch: float
    tol: float

    @property
    def ok(self):
        return self.multiplicity_verified and all(r <= self.tol for r in self.eigvec_residuals)


def lemma3_verify(coeffs, family, tol=1e-7, anchor=None):
    """HS analogue of the lifted spectrum: multiplicity d_B^2 and explicit eigenvectors.

    For an eigenvector c_mn of the coefficient matrix and central indices j, k,
    the candidate is vec(sum_mn c_mn |m><n| (x) U_ml |j><k| U_nl^dagger), l the anchor.
    """
    coeffs = as_cmatrix(coeffs, "coeffs")
    l = family.anchor if anchor is None else anchor
    H = hs_element(coeffs, family)
    lam, vecs = eig(coeffs)
    mu, _ = eig(H)
    dA, dB = family.d_A, family.d_B
    mismatch = match_multiset(np.repeat(lam, dB * dB), mu)
    residuals = []
    for idx in range(dA * dA):
        c = vecs[:, idx] / np.linalg.norm(vecs[:, idx])
        for j, k in product(range(dB), repeat=2):
            op = np.zeros((family.dim, family.dim), dtype=np.complex128)
            for m, n in product(range(1, dA + 1), repeat=2):
                cmn = c[(m - 1) * dA + n - 1]
                if cmn != 0:
                    central = np.outer(family.U(m, l)[:, j], family.U(n, l)[:, k].conj())
                    op[(m - 1) * dB:m * dB, (n - 1) * dB:n * dB] += cmn * central
            v = vec(op)
            residuals.append(float(np.linalg.norm(H @ v - lam[idx] * v)))
    return HSSpectrumReport(tuple(complex(x) for x in lam), mismatch <= tol, tuple(residuals),
                            mismatch, tol)

