"""Jump-counting Dyson expansion of a Lindblad propagator and approximate PI orders.

The Liouvillian splits as L = L_eff + S with the no-jump part
L_eff = -i(H_eff (x) I - I (x) H_eff^*), H_eff = H - (i/2) sum K^dag K, and the
jump insertion S = sum K (x) K^*.  The p-th Dyson term W_p collects every
trajectory with exactly p insertions of S.

An ancilla path i -> r is PI to order n when every partial sum
sum_{p<=k} W_p, projected onto (rr, ii), is proportional to U_ri (x) U_ri^*
for all k <= n, and not for k = n + 1.
"""
from dataclasses import dataclass, field

import numpy as np

from .numerics import ZERO_TOL, NumericsError, expm, fro, proportionality_fit, rk4_solve
from .superop import hs_indices, hs_target, liouvillian

EXACT = "EXACT"
UNREACHABLE = "UNREACHABLE"
PASS_TOL = 1e-7
FAIL_TOL = 1e-4


class GrayZoneError(RuntimeError):
    """A residual landed between pass_tol and fail_tol, or generic times disagree."""


class UnreachablePathError(RuntimeError):
    pass


class GeneratorSplit:
    """No-jump generator, jump superoperator and H_eff of a model, evaluated at time t.

    Contributions of time-independent jumps are assembled once.
    """

    def __init__(self, model):
        self.model = model
        self.dim = model.dim
        self._eye = np.eye(model.dim)
        const, self._td = model.partition_jumps()
        D = self.dim ** 2
        self._s_const = np.zeros((D, D), dtype=np.complex128)
        self._kk_const = np.zeros((self.dim, self.dim), dtype=np.complex128)
        for k in const:
            self._s_const += np.kron(k, k.conj())
            self._kk_const += k.conj().T @ k

    @property
    def is_constant(self):
        return self.model.is_constant

    def _td_jumps(self, t):
        return [np.asarray(k(t), dtype=np.complex128) for k in self._td]

    def h_eff(self, t=0.0, td_jumps=None):
        td = self._td_jumps(t) if td_jumps is None else td_jumps
        kk = self._kk_const + sum((k.conj().T @ k for k in td), np.zeros_like(self._kk_const))
        return self.model.hamiltonian_at(t) - 0.5j * kk

    def l_eff(self, t=0.0, td_jumps=None):
        he = self.h_eff(t, td_jumps)
        return -1j * (np.kron(he, self._eye) - np.kron(self._eye, he.conj()))

    def s_jump(self, t=0.0, td_jumps=None):
        td = self._td_jumps(t) if td_jumps is None else td_jumps
        out = self._s_const.copy()
        for k in td:
            out += np.kron(k, k.conj())
        return out

    def generators(self, t):
        """(L_eff(t), S(t)) sharing one evaluation of the time-dependent jumps."""
        td = self._td_jumps(t)
        return self.l_eff(t, td), self.s_jump(t, td)

    def liouvillian(self, t=0.0):
        return liouvillian(self.model, t)


def split(model):
    return GeneratorSplit(model)


@dataclass
class DysonStack:
    """Dyson terms W_0..W_pmax at time t; `columns` is None for full superoperators,
    otherwise the HS column indices the slabs were propagated for."""

    t: float
    terms: list
    columns: np.ndarray | None = None

    @property
    def pmax(self):
        return len(self.terms) - 1

    def partial_sum(self, k):
        return sum(self.terms[:k + 1])


def dyson_terms_constant(sp, t, pmax):
    """All W_p from one exponential of the block-bidiagonal generator.

    With L_eff on the diagonal blocks and S on the superdiagonal, block (0, p)
    of the exponential is exactly the p-fold time-ordered integral.
    """
    if not sp.is_constant:
        raise NumericsError("jump superoperator is time dependent; use dyson_terms_timedep")
    D = sp.dim ** 2
    le, s = sp.l_eff(), sp.s_jump()
    big = np.zeros(((pmax + 1) * D, (pmax + 1) * D), dtype=np.complex128)
    for p in range(pmax + 1):
        big[p * D:(p + 1) * D, p * D:(p + 1) * D] = le
        if p < pmax:
            big[p * D:(p + 1) * D, (p + 1) * D:(p + 2) * D] = s
    e = expm(big, t)
    return DysonStack(t, [e[0:D, p * D:(p + 1) * D].copy() for p in range(pmax + 1)])


def _hierarchy(sp, times, pmax, steps, columns):
    """RK4 on the stacked slabs; state layout (D, pmax + 1, n_columns).

    One integration covers every time in `times` (ascending); the step density
    is `steps` per max(times) and a snapshot is taken at each listed time.
    """
    D = sp.dim ** 2
    cols = np.arange(D) if columns is None else np.asarray(columns)
    c = cols.size
    x0 = np.zeros((D, pmax + 1, c), dtype=np.complex128)
    x0[:, 0, :] = np.eye(D)[:, cols]
    memo = {}

    def gens(s_t):
        if s_t not in memo:
            if len(memo) > 4:
                memo.clear()
            memo[s_t] = sp.generators(s_t)
        return memo[s_t]

    def rhs(s_t, x):
        le, s = gens(s_t)
        out = (le @ x.reshape(D, -1)).reshape(D, pmax + 1, c)
        out[:, 1:, :] += (s @ x[:, :-1, :].reshape(D, -1)).reshape(D, pmax, c)
        return out

    snapshots, x, t_prev = [], x0, 0.0
    t_end = max(times)
    for t in times:
        n = max(1, int(round(steps * (t - t_prev) / t_end))) if t > t_prev else 0
        if n:
            x = rk4_solve(rhs, x, t, n, t_start=t_prev)
        snapshots.append([x[:, p, :].copy() for p in range(pmax + 1)])
        t_prev = t
    return snapshots


def dyson_terms_timedep(sp, t, pmax, steps=4000, columns=None, convergence_tol=None):
    """Integrate dG_p/dt = L_eff(t) G_p + S(t) G_{p-1} with G_0(0) = I, G_p(0) = 0.

    `columns` restricts propagation to a subset of input HS columns (a slab),
    which is all the projected gate condition needs.  With `convergence_tol`
    set, the run is repeated at half the steps and the difference (scaled by
    the RK4 factor 1/15) must stay below the tolerance.
    """
    if steps < 1:
        raise NumericsError("steps must be >= 1")
    g = _hierarchy(sp, [t], pmax, steps, columns)[0]
    if convergence_tol is not None:
        coarse = _hierarchy(sp, [t], pmax, max(1, steps // 2), columns)[0]
        err = max(fro(a - b) for a, b in zip(g, coarse)) / 15.0
        if err > convergence_tol:
            raise NumericsError(f"insufficient steps: estimated error {err:.3e} > {convergence_tol:g}")
    return DysonStack(t, list(g), None if columns is None else np.asarray(columns))


def dyson_terms(sp, t, pmax, steps=4000, columns=None):
    if sp.is_constant:
        stack = dyson_terms_constant(sp, t, pmax)
        if columns is not None:
            stack = DysonStack(t, [w[:, columns] for w in stack.terms], np.asarray(columns))
        return stack
    return dyson_terms_timedep(sp, t, pmax, steps, columns)


def dyson_stacks(sp, times, pmax, steps=4000, columns=None):
    """Stacks at several times; time-dependent models share one integration."""
    if sp.is_constant:
        return [dyson_terms(sp, t, pmax, steps, columns) for t in times]
    order = sorted(range(len(times)), key=lambda j: times[j])
    snaps = _hierarchy(sp, [times[j] for j in order], pmax, steps, columns)
    cols = None if columns is None else np.asarray(columns)
    out = [None] * len(times)
    for j, snap in zip(order, snaps):
        out[j] = DysonStack(times[j], snap, cols)
    return out


@dataclass
class OrderTrace:
    """Per-time detail of one path's order evaluation.

    residuals[k] is the Frobenius residual of the k-th projected partial sum
    against its best multiple of the target; constants[k] is that multiple.
    term_residuals[k] is the relative non-proportional part of the k-th term
    alone, the quantity the verdict is taken on.
    """

    t: float
    residuals: list
    constants: list
    partial_norms: list
    term_norms: list
    term_residuals: list
    term_zero: list
    order: object

    @property
    def normalized_residuals(self):
        out, peak = [], 0.0
        for res, n in zip(self.residuals, self.partial_norms):
            peak = max(peak, n)
            out.append(res / peak if peak > 0 else 0.0)
        return out


@dataclass
class PathOrder:
    i: int
    r: int
    order: object
    target: np.ndarray
    traces: list = field(default_factory=list)

    @property
    def times(self):
        return [tr.t for tr in self.traces]


def _verdict(term_residuals, term_zero, partial_zero, pass_tol, fail_tol, where):
    for k, (res, zero) in enumerate(zip(term_residuals, term_zero)):
        if zero or res <= pass_tol:
            continue
        if res < fail_tol:
            raise GrayZoneError(
                f"{where}: residual {res:.3e} at order {k} lies between pass_tol {pass_tol:g} "
                f"and fail_tol {fail_tol:g}; adjust the evaluation time or tolerances")
        return k - 1
    return UNREACHABLE if all(partial_zero) else EXACT


def order_from_blocks(blocks, slab_norms, target, t, pass_tol=PASS_TOL, fail_tol=FAIL_TOL,
                      zero_tol=ZERO_TOL, where="path"):
    """Order verdict from the projected blocks of W_0..W_pmax.

    A term is trivially zero when its block norm is below zero_tol times the
    norm of the full term restricted to the input ancilla level.  Given that
    all earlier partial sums pass, the k-th partial sum is proportional to the
    target exactly when the k-th term is, so each order is judged on the
    term's own relative residual, which does not shrink with the jump rates.
    """
    tnorm = fro(target)
    residuals, constants, pnorms, tnorms, tres, tzero, pzero = [], [], [], [], [], [], []
    partial = np.zeros_like(blocks[0])
    for blk, slab in zip(blocks, slab_norms):
        partial = partial + blk
        pf = proportionality_fit(partial, target, 0.0)
        residuals.append(pf.residual)
        constants.append(pf.constant)
        pnorms.append(fro(partial))
        bn = fro(blk)
        tnorms.append(bn)
        zero = bn <= zero_tol * slab or bn == 0.0
        tzero.append(zero)
        if zero:
            tres.append(0.0)
        else:
            c = np.vdot(target, blk) / tnorm ** 2
            tres.append(fro(blk - c * target) / bn)
        pzero.append(pnorms[-1] <= zero_tol * max(slab_norms[:len(pnorms)]) or pnorms[-1] == 0.0)
    order = _verdict(tres, tzero, pzero, pass_tol, fail_tol, where)
    return OrderTrace(t, residuals, constants, pnorms, tnorms, tres, tzero, order)


def _blocks_for(stack, i, r, d_A, d_B, dress=None):
    """Projected (rr, ii) blocks of each term plus the norm of each term's column slab."""
    cols = hs_indices(i, d_A, d_B)
    rows = hs_indices(r, d_A, d_B)
    blocks, slabs = [], []
    for w in stack.terms:
        if stack.columns is None:
            slab = w[:, cols]
        else:
            pos = np.searchsorted(stack.columns, cols)
            if not np.array_equal(stack.columns[pos], cols):
                raise NumericsError(f"stack was not propagated for ancilla level {i}")
            slab = w[:, pos]
        blk = slab[rows, :]
        if dress is not None:
            blk = dress @ blk
        blocks.append(blk)
        slabs.append(fro(slab))
    return blocks, slabs


def _merge(i, r, target, traces):
    orders = {tr.order for tr in traces}
    if len(orders) != 1:
        detail = ", ".join(f"t={tr.t:.6g}: {tr.order}" for tr in traces)
        raise GrayZoneError(f"path {i}->{r}: order differs across evaluation times ({detail})")
    return PathOrder(i, r, orders.pop(), target, list(traces))


def pi_order(model, family, i, r, t, pmax=6, pass_tol=PASS_TOL, fail_tol=FAIL_TOL,
             zero_tol=ZERO_TOL, steps=4000, stack=None):
    """PI order of the path i -> r at one time (or several, if `t` is a sequence).

    Raises GrayZoneError for an undecidable residual and UnreachablePathError
    when the projected block vanishes through pmax.
    """
    times = [t] if np.isscalar(t) else list(t)
    report = pi_orders(model, family, [(i, r)], times, pmax, pass_tol, fail_tol, zero_tol,
                       steps, stacks=None if stack is None else [stack])[0]
    if report.order == UNREACHABLE:
        raise UnreachablePathError(f"path {i}->{r} has a vanishing block through order {pmax}")
    return report


def pi_orders(model, family, paths, times, pmax=6, pass_tol=PASS_TOL, fail_tol=FAIL_TOL,
              zero_tol=ZERO_TOL, steps=4000, frame=None, stacks=None):
    """Orders for several paths; Dyson terms are computed once per time and initial level.

    With `frame` given, blocks and targets are dressed by R_r(t) (x) R_r(t)^*
    (Schrodinger picture).  Paths whose blocks vanish report UNREACHABLE.
    """
    if pass_tol >= fail_tol:
        raise ValueError("pass_tol must be below fail_tol")
    sp = split(model)
    dA, dB = family.d_A, family.d_B
    starts = sorted({i for i, _ in paths})
    cols = np.sort(np.concatenate([hs_indices(i, dA, dB) for i in starts]))
    if stacks is None:
        stacks = dyson_stacks(sp, list(times), pmax, steps, cols)
    traces = {p: [] for p in paths}
    for stack in stacks:
        for i, r in paths:
            dress = None
            target = hs_target(family, i, r)
            if frame is not None:
                rr = frame.R(r, stack.t)
                dress = np.kron(rr, rr.conj())
                target = dress @ target
            blocks, slabs = _blocks_for(stack, i, r, dA, dB, dress)
            traces[(i, r)].append(order_from_blocks(
                blocks, slabs, target, stack.t, pass_tol, fail_tol, zero_tol,
                where=f"path {i}->{r} at t={stack.t:.6g}"))
    out = []
    for i, r in paths:
        target = hs_target(family, i, r)
        if frame is not None:
            rr = frame.R(r, stacks[0].t)
            target = np.kron(rr, rr.conj()) @ target
        out.append(_merge(i, r, target, traces[(i, r)]))
    return out


def schrodinger_pi_orders(model, family, frame, paths, times, pmax=6, pass_tol=PASS_TOL,
                          fail_tol=FAIL_TOL, zero_tol=ZERO_TOL, steps=4000):
    """Orders in the Schrodinger picture; asserts they match the interaction picture."""
    sp = split(model)
    dA, dB = family.d_A, family.d_B
    cols = np.sort(np.concatenate([hs_indices(i, dA, dB) for i in sorted({i for i, _ in paths})]))
    stacks = dyson_stacks(sp, list(times), pmax, steps, cols)
    inter = pi_orders(model, family, paths, times, pmax, pass_tol, fail_tol, zero_tol, steps,
                      stacks=stacks)
    dressed = pi_orders(model, family, paths, times, pmax, pass_tol, fail_tol, zero_tol, steps,
                        frame=frame, stacks=stacks)
    for a, b in zip(inter, dressed):
        if a.order != b.order:
            raise AssertionError(f"path {a.i}->{a.r}: order {a.order} in the interaction picture "
                                 f"but {b.order} after dressing")
    return dressed


def schrodinger_pi_order(model, family, frame, i, r, t, **kw):
    times = [t] if np.isscalar(t) else list(t)
    return schrodinger_pi_orders(model, family, frame, [(i, r)], times, **kw)[0]


def generic_times(gate_time, rng, n=3, lo=0.3):
    """n distinct pseudo-random times in [lo * T, T], sorted."""
    return sorted(float(x) for x in rng.uniform(lo * gate_time, gate_time, size=n))


def all_paths(d_A, start=1):
    return [(start, r) for r in range(1, d_A + 1)]


def projected_terms(stack, i, r, d_A, d_B):
    return _blocks_for(stack, i, r, d_A, d_B)[0]

