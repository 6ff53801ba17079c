"""PI matrix algebras over an ancilla (dimension d_A) and a central system (d_B).

A unitary family {U_mn} is stored through anchor representatives
V_m = U(m, anchor), so that U(m, n) = V_m V_n^dagger satisfies the cocycle
U(m, e) U(e, n) = U(m, n) by construction.  Base vectors of the algebra are
|m><n| (x) U_mn; the composite index is ancilla-outer, central-inner, so
entry ((m, j), (n, k)) lives at row m*d_B + j, column n*d_B + k.

All ancilla indices in this module are 1-based.
"""
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy.optimize import linear_sum_assignment

from .numerics import EQUALITY_TOL, NumericsError, as_cmatrix, eig, fro, is_unitary


class AlgebraError(ValueError):
    pass


def ket_bra(m, n, d):
    """|m><n| on a d-level system, 1-based."""
    e = np.zeros((d, d), dtype=np.complex128)
    e[m - 1, n - 1] = 1.0
    return e


class UnitaryFamily:
    """Cocycle family of central-system unitaries indexed by ancilla pairs."""

    def __init__(self, d_A, d_B, representatives, anchor=1):
        self.d_A = int(d_A)
        self.d_B = int(d_B)
        self.anchor = int(anchor)
        reps = [as_cmatrix(v, f"representative {m + 1}") for m, v in enumerate(representatives)]
        if len(reps) != self.d_A:
            raise AlgebraError(f"expected {self.d_A} representatives, got {len(reps)}")
        if not 1 <= self.anchor <= self.d_A:
            raise AlgebraError(f"anchor {self.anchor} outside [1, {self.d_A}]")
        for m, v in enumerate(reps, start=1):
            if v.shape != (self.d_B, self.d_B):
                raise AlgebraError(f"representative {m} has shape {v.shape}, want ({self.d_B}, {self.d_B})")
            if not is_unitary(v, 1e-10):
                raise AlgebraError(f"representative {m} is not unitary")
        if fro(reps[self.anchor - 1] - np.eye(self.d_B)) > 1e-10:
            raise AlgebraError("anchor representative must be the identity")
        self._reps = tuple(reps)

    @classmethod
    def identity(cls, d_A, d_B):
        return cls(d_A, d_B, [np.eye(d_B)] * d_A)

    @classmethod
    def from_edge_map(cls, edge_map, anchor=1, tol=1e-10):
        """Convert a consistent map {(m, n): U_mn} into a family.

        The map must contain (m, anchor) for every m and pass the cocycle test.
        """
        report = verify_cocycle(edge_map, tol)
        if not report.ok:
            raise AlgebraError(f"edge map violates the cocycle at {report.worst_triple} "
                               f"(residual {report.worst_residual:.3e})")
        d_A = max(max(k) for k in edge_map)
        reps = []
        for m in range(1, d_A + 1):
            if (m, anchor) not in edge_map:
                raise AlgebraError(f"edge ({m}, {anchor}) needed for the anchor representative")
            reps.append(edge_map[(m, anchor)])
        d_B = as_cmatrix(reps[0]).shape[0]
        return cls(d_A, d_B, reps, anchor)

    @property
    def representatives(self):
        return self._reps

    def U(self, m, n):
        self._check(m)
        self._check(n)
        if m == n:
            return np.eye(self.d_B, dtype=np.complex128)
        return self._reps[m - 1] @ self._reps[n - 1].conj().T

    def edge_map(self):
        r = range(1, self.d_A + 1)
        return {(m, n): self.U(m, n) for m in r for n in r}

    def conjugator(self, k=None):
        """U_AB = sum_m |m><m| (x) U_mk, mapping h (x) I onto the lifted operator."""
        k = self.anchor if k is None else k
        out = np.zeros((self.dim, self.dim), dtype=np.complex128)
        for m in range(1, self.d_A + 1):
            s = slice((m - 1) * self.d_B, m * self.d_B)
            out[s, s] = self.U(m, k)
        return out

    def reanchored(self, k):
        """Same edges, representatives taken relative to anchor k."""
        return UnitaryFamily(self.d_A, self.d_B, [self.U(m, k) for m in range(1, self.d_A + 1)], k)

    @property
    def dim(self):
        return self.d_A * self.d_B

    def _check(self, m):
        if not 1 <= m <= self.d_A:
            raise AlgebraError(f"ancilla index {m} outside [1, {self.d_A}]")


def family_from_generators(d_A, d_B, representatives, anchor=1):
    return UnitaryFamily(d_A, d_B, representatives, anchor)


@dataclass(frozen=True)
class CocycleReport:
    ok: bool
    worst_residual: float
    worst_triple: tuple | None


def verify_cocycle(edge_map, tol=1e-12, triples=None):
    """Check U_me U_en = U_mn, U_mm = I and U_mn = U_nm^dagger over an explicit edge map.

    By default every triple whose three edges are present is tested.  An
    explicitly requested triple with a missing edge raises AlgebraError.
    """
    edges = {k: as_cmatrix(v) for k, v in edge_map.items()}
    nodes = sorted({i for k in edges for i in k})
    if triples is None:
        triples = [(m, e, n) for m, e, n in product(nodes, repeat=3)
                   if (m, e) in edges and (e, n) in edges and (m, n) in edges]
    else:
        for m, e, n in triples:
            for k in ((m, e), (e, n), (m, n)):
                if k not in edges:
                    raise AlgebraError(f"edge {k} missing for triple {(m, e, n)}")
    worst, where = 0.0, None
    for m, e, n in triples:
        r = fro(edges[(m, e)] @ edges[(e, n)] - edges[(m, n)])
        if r > worst:
            worst, where = r, (m, e, n)
    for (m, n), u in edges.items():
        if m == n:
            r = fro(u - np.eye(u.shape[0]))
        elif (n, m) in edges:
            r = fro(u - edges[(n, m)].conj().T)
        else:
            continue
        if r > worst:
            worst, where = r, (m, m, n)
    return CocycleReport(worst <= tol, worst, where)


@dataclass(frozen=True)
class AlgebraGraph:
    """Edge set over ancilla levels selecting base vectors |m><n| (x) U_mn.

    Loops (m, m) are always included.
    """

    family: UnitaryFamily
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        d = self.family.d_A
        edges = set()
        for m, n in self.edges:
            m, n = int(m), int(n)
            if not (1 <= m <= d and 1 <= n <= d):
                raise AlgebraError(f"edge {(m, n)} outside [1, {d}]")
            edges.add((m, n))
        edges.update((m, m) for m in range(1, d + 1))
        object.__setattr__(self, "edges", frozenset(edges))

    @classmethod
    def full(cls, family):
        r = range(1, family.d_A + 1)
        return cls(family, frozenset(product(r, r)))

    def sorted_edges(self):
        return sorted(self.edges)

    def base_vector(self, m, n):
        if (m, n) not in self.edges:
            raise AlgebraError(f"edge {(m, n)} not in graph")
        return np.kron(ket_bra(m, n, self.family.d_A), self.family.U(m, n))

    def with_edges(self, extra):
        return AlgebraGraph(self.family, self.edges | frozenset(extra))


@dataclass(frozen=True)
class ClosureReport:
    closed: bool
    missing_edges: tuple
    self_adjoint: bool


def closure_check(graph):
    e = graph.edges
    missing = sorted({(a, d) for (a, b) in e for (c, d) in e if b == c and (a, d) not in e})
    self_adjoint = all((n, m) in e for (m, n) in e)
    return ClosureReport(not missing, tuple(missing), self_adjoint)


def self_adjoint_extension(graph):
    """Smallest edge superset closed under reversal and composition."""
    edges = set(graph.edges)
    limit = graph.family.d_A ** 2
    while True:
        new = {(n, m) for (m, n) in edges}
        new |= {(a, d) for (a, b) in edges for (c, d) in edges if b == c}
        if new <= edges:
            break
        edges |= new
        assert len(edges) <= limit
    return AlgebraGraph(graph.family, frozenset(edges))


@dataclass(frozen=True)
class PIElement:
    graph: AlgebraGraph
    coefficients: dict

    def __post_init__(self):
        bad = set(self.coefficients) - self.graph.edges
        if bad:
            raise AlgebraError(f"coefficients on edges outside the graph: {sorted(bad)}")

    def coefficient_matrix(self):
        d = self.graph.family.d_A
        h = np.zeros((d, d), dtype=np.complex128)
        for (m, n), v in self.coefficients.items():
            h[m - 1, n - 1] = v
        return h


def lift(h, family):
    """Ancilla operator h -> PI element sum_mn h_mn |m><n| (x) U_mn on the full graph."""
    h = as_cmatrix(h, "h")
    if h.shape != (family.d_A, family.d_A):
        raise AlgebraError(f"h has shape {h.shape}, want ({family.d_A}, {family.d_A})")
    graph = AlgebraGraph.full(family)
    coeffs = {(m, n): complex(h[m - 1, n - 1]) for (m, n) in graph.edges}
    return PIElement(graph, coeffs)


def realize(element):
    fam = element.graph.family
    dB = fam.d_B
    out = np.zeros((fam.dim, fam.dim), dtype=np.complex128)
    for (m, n), c in element.coefficients.items():
        if c != 0:
            out[(m - 1) * dB:m * dB, (n - 1) * dB:n * dB] += c * fam.U(m, n)
    return out


def lift_dense(h, family):
    return realize(lift(h, family))


@dataclass(frozen=True)
class Membership:
    coefficients: dict
    residual: float
    norm: float
    member: bool

    @property
    def relative_residual(self):
        return self.residual / self.norm if self.norm > 0 else 0.0

    def element(self, graph):
        return PIElement(graph, dict(self.coefficients))


def membership(x, graph, tol=EQUALITY_TOL):
    """Decompose x over the graph's orthogonal base vectors.

    Base vectors have Frobenius norm sqrt(d_B) and are mutually orthogonal,
    so the coefficient of edge (m, n) is <|m><n| (x) U_mn, x> / d_B.
    `member` is residual <= tol * max(1, ||x||).
    """
    x = as_cmatrix(x, "x")
    fam = graph.family
    if x.shape != (fam.dim, fam.dim):
        raise AlgebraError(f"operator has shape {x.shape}, want ({fam.dim}, {fam.dim})")
    dB = fam.d_B
    coeffs = {}
    recon = np.zeros_like(x)
    for (m, n) in graph.sorted_edges():
        u = fam.U(m, n)
        blk = x[(m - 1) * dB:m * dB, (n - 1) * dB:n * dB]
        c = complex(np.vdot(u, blk) / dB)
        coeffs[(m, n)] = c
        recon[(m - 1) * dB:m * dB, (n - 1) * dB:n * dB] = c * u
    res = fro(x - recon)
    nrm = fro(x)
    return Membership(coeffs, res, nrm, res <= tol * max(1.0, nrm))


def path_product(graph, path):
    """Product of base vectors along (r, a), (a, b), ..., (e, i), written left to right."""
    if not path:
        raise AlgebraError("empty path")
    for (p, q), (s, _) in zip(path, path[1:]):
        if q != s:
            raise AlgebraError(f"edges {(p, q)} and {(s, _)} do not chain")
    out = graph.base_vector(*path[0])
    for e in path[1:]:
        out = out @ graph.base_vector(*e)
    return out


@dataclass(frozen=True)
class SpectrumReport:
    ancilla_eigenvalues: tuple
    multiplicity_verified: bool
    eigvec_residuals: tuple
    spectrum_mismatch: float
    tol: float = 1e-8

    @property
    def ok(self):
        return self.multiplicity_verified and all(r <= self.tol for r in self.eigvec_residuals)


def match_multiset(a, b):
    """Largest pairwise distance after optimally pairing two equal-size complex multisets."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise NumericsError("multisets differ in size")
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())


def lemma1_verify(h, family, tol=1e-8, anchor=None):
    """Spectrum of the lifted operator versus the ancilla operator.

    The lifted spectrum must equal the ancilla spectrum with every eigenvalue
    repeated d_B times.  For each ancilla eigenvector c and each central basis
    state |j>, the candidate sum_m c_m |m> (x) U_mk |j> is tested as an
    eigenvector of the lift; k is the anchor (any level works).
    """
    h = as_cmatrix(h, "h")
    k = family.anchor if anchor is None else anchor
    H = lift_dense(h, family)
    lam, vecs = eig(h)
    mu, _ = eig(H)
    mismatch = match_multiset(np.repeat(lam, family.d_B), mu)
    residuals = []
    dB = family.d_B
    for idx in range(family.d_A):
        c = vecs[:, idx] / np.linalg.norm(vecs[:, idx])
        for j in range(dB):
            v = np.zeros(family.dim, dtype=np.complex128)
            for m in range(1, family.d_A + 1):
                v[(m - 1) * dB:m * dB] = c[m - 1] * family.U(m, k)[:, j]
            residuals.append(float(np.linalg.norm(H @ v - lam[idx] * v)))
    return SpectrumReport(tuple(complex(x) for x in lam), mismatch <= tol, tuple(residuals),
                          mismatch, tol)
