"""Built-in models: error-transparent gates and PI SNAP gates.

Both are built in the interaction picture of their diagonal frame
H0 = sum_m |m><m| (x) H_m.  Relaxation rates are indexed by the upper
level of the jump (gamma_m for m -> m-1 or m -> 1, m in [2, d_A]).
"""
from dataclasses import dataclass, field

import numpy as np

from .algebra import AlgebraGraph, UnitaryFamily, ket_bra
from .numerics import as_cmatrix, expm, fro, is_hermitian
from .propagation import DiagonalFrame
from .superop import LindbladModel


def _rates(value, n, name):
    arr = np.full(n, float(value)) if np.isscalar(value) else np.asarray(value, dtype=float)
    if arr.shape != (n,):
        raise ValueError(f"{name} needs {n} entries, got {arr.shape}")
    if np.any(arr < 0):
        raise ValueError(f"{name} must be non-negative")
    return arr


@dataclass
class BuiltModel:
    model: LindbladModel
    graph: AlgebraGraph
    frame: DiagonalFrame
    gate_time: float
    notes: list = field(default_factory=list)
    frame_hamiltonians: list = None
    spec: object = None

    @property
    def family(self):
        return self.graph.family


@dataclass
class ErrorTransparentSpec:
    """Logical level |1> with correctable errors K_i = sqrt(gamma_i) |i><1| (x) I, i >= 2."""

    d_A: int
    d_B: int
    hamiltonians: list
    gammas: object = 0.02
    gate_time: float = 1.0

    def __post_init__(self):
        self.hamiltonians = [as_cmatrix(h, f"H_{m + 1}") for m, h in enumerate(self.hamiltonians)]
        if len(self.hamiltonians) != self.d_A:
            raise ValueError(f"need {self.d_A} central Hamiltonians, got {len(self.hamiltonians)}")
        for m, h in enumerate(self.hamiltonians, start=1):
            if h.shape != (self.d_B, self.d_B) or not is_hermitian(h):
                raise ValueError(f"H_{m} must be a Hermitian {self.d_B}x{self.d_B} matrix")
        self.gammas = _rates(self.gammas, self.d_A - 1, "gammas")


@dataclass(frozen=True)
class ETVerdict:
    level: int
    transparent: bool
    lam: float
    residual: float


def scalar_offset(a, b):
    """Best lambda with a - b ~ lambda I, and the residual ||a - b - lambda I||."""
    diff = as_cmatrix(a) - as_cmatrix(b)
    n = diff.shape[0]
    lam = np.trace(diff) / n
    return lam, fro(diff - lam * np.eye(n))


def et_condition_check(spec, tol=1e-9):
    """[K_i, H0] = lambda K_i holds iff H_1 - H_i = lambda I; one verdict per error level i."""
    out = []
    for i in range(2, spec.d_A + 1):
        lam, res = scalar_offset(spec.hamiltonians[0], spec.hamiltonians[i - 1])
        real = abs(lam.imag) <= tol
        out.append(ETVerdict(i, res <= tol and real, float(lam.real), res))
    return out


def _interaction_jump(frame, upper, lower, rate, d_A):
    """sqrt(rate) |lower><upper| (x) R_lower^dag(t) R_upper(t) as a callable."""
    kb = np.sqrt(rate) * ket_bra(lower, upper, d_A)

    def jump(t):
        return np.kron(kb, frame.R(lower, t).conj().T @ frame.R(upper, t))
    return jump


def et_model(spec, tol=1e-9):
    """Interaction-picture model with zero Hamiltonian and the correctable errors as jumps.

    Transparent errors are |i><1| (x) I (the e^{-i lambda t} phase cancels in
    K (x) K^* and K^dag K, so it is dropped); the others carry R_i^dag(t) R_1(t).
    """
    frame = DiagonalFrame.constant(spec.hamiltonians)
    verdicts = et_condition_check(spec, tol)
    d, dA, dB = spec.d_A * spec.d_B, spec.d_A, spec.d_B
    jumps, labels = [], []
    for v, g in zip(verdicts, spec.gammas):
        if g == 0:
            continue
        labels.append(f"relax_1_to_{v.level}")
        if v.transparent:
            jumps.append(np.sqrt(g) * np.kron(ket_bra(v.level, 1, dA), np.eye(dB)))
        else:
            jumps.append(_interaction_jump(frame, 1, v.level, g, dA))
    model = LindbladModel(np.zeros((d, d)), jumps, labels, frame)
    edges = {(i, 1) for i in range(2, dA + 1)} | {(1, i) for i in range(2, dA + 1)}
    graph = AlgebraGraph(UnitaryFamily.identity(dA, dB), frozenset(edges))
    notes = []
    broken = [v.level for v in verdicts if not v.transparent]
    if broken:
        notes.append(
            "ambiguous reference orders for the broken error-transparent example: final "
            "level |3> is listed as both exact and zeroth order; the orders reported here are "
            f"computed (non-transparent error levels: {broken})")
    return BuiltModel(model, graph, frame, spec.gate_time, notes, spec.hamiltonians, spec)


def nas_check(hamiltonians, tol=1e-9):
    """Partition levels into classes whose Hamiltonians differ by multiples of the identity."""
    hs = [as_cmatrix(h) for h in hamiltonians]
    parent = list(range(len(hs)))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a in range(len(hs)):
        for b in range(a + 1, len(hs)):
            lam, res = scalar_offset(hs[a], hs[b])
            if res <= tol and abs(lam.imag) <= tol:
                parent[find(b)] = find(a)
    classes = {}
    for a in range(len(hs)):
        classes.setdefault(find(a), []).append(a + 1)
    return sorted(classes.values())


@dataclass
class SnapSpec:
    """PI SNAP gate on an N-level truncated cavity with a d_A-level ancilla.

    Defaults: phases n*pi/2, Omega = 1, H_1 = chi * diag(0, ..., N-1) with
    chi = 0.5, H_2 = 0, all dephasing and relaxation rates 0.02, gate time
    pi / (2 Omega).
    """

    d_A: int = 4
    N: int = 2
    phases: object = None
    omega: float = 1.0
    chi: float = 0.5
    H1: object = None
    H2: object = None
    kappa: object = 0.02
    gamma: object = 0.02
    gate_time: float | None = None

    def __post_init__(self):
        if self.d_A < 2:
            raise ValueError("SNAP needs d_A >= 2")
        if self.N < 1:
            raise ValueError("truncation N must be positive")
        self.phases = (np.arange(self.N) * np.pi / 2 if self.phases is None
                       else np.asarray(self.phases, dtype=float))
        if self.phases.shape != (self.N,):
            raise ValueError(f"need {self.N} phases")
        self.H1 = (self.chi * np.diag(np.arange(self.N, dtype=float)) if self.H1 is None
                   else as_cmatrix(self.H1, "H1"))
        self.H2 = np.zeros((self.N, self.N)) if self.H2 is None else as_cmatrix(self.H2, "H2")
        for name, h in (("H1", self.H1), ("H2", self.H2)):
            if h.shape != (self.N, self.N) or not is_hermitian(h):
                raise ValueError(f"{name} must be a Hermitian {self.N}x{self.N} matrix")
        if not np.isreal(self.omega):
            raise ValueError("omega must be real")
        self.kappa = _rates(self.kappa, self.d_A, "kappa")
        self.gamma = _rates(self.gamma, self.d_A - 1, "gamma")
        if self.gate_time is None:
            self.gate_time = np.pi / (2 * self.omega)

    @property
    def unitary(self):
        return np.diag(np.exp(1j * self.phases))

    def frame_hamiltonians(self):
        return [self.H1] + [self.H2] * (self.d_A - 1)


def snap_family(spec):
    """Anchor 1: V_1 = I and V_m = U^dagger for m >= 2, so U_1m = U and U_mn = I among m, n >= 2."""
    u = spec.unitary
    return UnitaryFamily(spec.d_A, spec.N, [np.eye(spec.N)] + [u.conj().T] * (spec.d_A - 1))


def snap_graph(spec):
    dA = spec.d_A
    edges = {(1, dA), (dA, 1)}
    edges |= {(m - 1, m) for m in range(3, dA + 1)} | {(m, m - 1) for m in range(3, dA + 1)}
    return AlgebraGraph(snap_family(spec), frozenset(edges))


def snap_model(spec, picture="interaction"):
    """Lindblad model of the SNAP gate.

    Interaction picture: H_c = Omega (|1><d_A| (x) U + h.c.), dephasing
    sqrt(kappa_m) |m><m| (x) I, relaxation sqrt(gamma_m) |m-1><m| (x) I for
    m >= 3, and the 2 -> 1 relaxation carrying R_1^dag(t) R_2(t).
    Schrodinger picture: static H0 plus the rotating drive
    Omega (|1><d_A| (x) R_1 U R_2^dag + h.c.) and constant jumps.
    """
    dA, N = spec.d_A, spec.N
    u, eye = spec.unitary, np.eye(N)
    frame = DiagonalFrame.constant(spec.frame_hamiltonians())
    jumps, labels = [], []
    for m in range(1, dA + 1):
        if spec.kappa[m - 1] > 0:
            jumps.append(np.sqrt(spec.kappa[m - 1]) * np.kron(ket_bra(m, m, dA), eye))
            labels.append(f"dephase_{m}")
    for m in range(2, dA + 1):
        g = spec.gamma[m - 2]
        if g == 0:
            continue
        labels.append(f"relax_{m}_to_{m - 1}")
        if m == 2 and picture == "interaction":
            jumps.append(_interaction_jump(frame, 2, 1, g, dA))
        else:
            jumps.append(np.sqrt(g) * np.kron(ket_bra(m - 1, m, dA), eye))
    if picture == "interaction":
        ham = spec.omega * (np.kron(ket_bra(1, dA, dA), u) + np.kron(ket_bra(dA, 1, dA), u.conj().T))
    elif picture == "schrodinger":
        h0 = sum(np.kron(ket_bra(m, m, dA), h) for m, h in enumerate(spec.frame_hamiltonians(), 1))

        def ham(t):
            drive = frame.R(1, t) @ u @ frame.R(dA, t).conj().T
            hc = np.kron(ket_bra(1, dA, dA), drive)
            return h0 + spec.omega * (hc + hc.conj().T)
    else:
        raise ValueError(f"unknown picture {picture!r}")
    model = LindbladModel(ham, jumps, labels, frame)
    return BuiltModel(model, snap_graph(spec), frame, float(spec.gate_time), [],
                      spec.frame_hamiltonians(), spec)


def relaxation_propagator_phase(spec, t):
    """R_1^dag(t) R_2(t), the central factor the 2 -> 1 relaxation picks up."""
    return expm(spec.H1, 1j * t) @ expm(spec.H2, -1j * t)
