"""Batch front end: `picheck run | validate | builtin`.

Exit codes: 0 all checks pass, 1 some check fails, 2 configuration or usage
error, 3 numerical gray zone.
"""
import argparse
import csv
import io
import json
import os
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .algebra import (AlgebraGraph, UnitaryFamily, closure_check, lemma1_verify,
                      self_adjoint_extension, verify_cocycle)
from .config import (ConfigError, ErrorTransparentModelConfig, ExplicitModelConfig, RunConfig,
                     SnapModelConfig, check_name, dump_config, from_array, load_config,
                     parse_path_key, to_array)
from .dyson import EXACT, GrayZoneError, generic_times, pi_orders, schrodinger_pi_orders
from .models import (BuiltModel, ErrorTransparentSpec, SnapSpec, et_condition_check, et_model,
                     nas_check, snap_model)
from .numerics import random_hermitian, random_unitary
from .propagation import DiagonalFrame, xi_correspondence_check
from .superop import LindbladModel, lemma3_verify, theorem1_check

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_GRAY = 0, 1, 2, 3
RNG_NAME = "numpy.random.PCG64"


@dataclass
class CheckResult:
    name: str
    kind: str
    verdict: str  # PASS, FAIL, GRAY, ERROR
    worst_residual: float = 0.0
    seconds: float = 0.0
    details: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)  # pi_order CSV rows
    message: str = ""


@dataclass
class RunReport:
    config: RunConfig
    seed: int
    times: list
    results: list
    notes: list

    @property
    def exit_code(self):
        verdicts = {r.verdict for r in self.results}
        if "GRAY" in verdicts:
            return EXIT_GRAY
        if verdicts - {"PASS"}:
            return EXIT_FAIL
        return EXIT_PASS


def build_model(mcfg):
    """BuiltModel for a model section."""
    if isinstance(mcfg, SnapModelConfig):
        spec = SnapSpec(d_A=mcfg.d_A, N=mcfg.N, phases=mcfg.phases, omega=mcfg.omega, chi=mcfg.chi,
                        H1=None if mcfg.H1 is None else to_array(mcfg.H1),
                        H2=None if mcfg.H2 is None else to_array(mcfg.H2),
                        kappa=mcfg.kappa, gamma=mcfg.gamma, gate_time=mcfg.gate_time)
        return snap_model(spec, mcfg.picture)
    if isinstance(mcfg, ErrorTransparentModelConfig):
        hs = ([to_array(h) for h in mcfg.hamiltonians] if mcfg.hamiltonians is not None
              else [default_et_hamiltonian(mcfg.d_B)] * mcfg.d_A)
        spec = ErrorTransparentSpec(mcfg.d_A, mcfg.d_B, hs, mcfg.gammas, mcfg.gate_time)
        return et_model(spec)
    reps = (None if mcfg.representatives is None else [to_array(v) for v in mcfg.representatives])
    family = (UnitaryFamily.identity(mcfg.d_A, mcfg.d_B) if reps is None
              else UnitaryFamily(mcfg.d_A, mcfg.d_B, reps, mcfg.anchor))
    graph = (AlgebraGraph.full(family) if mcfg.edges is None
             else AlgebraGraph(family, frozenset(tuple(e) for e in mcfg.edges)))
    frame = None if mcfg.frame is None else DiagonalFrame.constant([to_array(h) for h in mcfg.frame])
    model = LindbladModel(to_array(mcfg.hamiltonian), [to_array(j.matrix) for j in mcfg.jumps],
                          [j.label for j in mcfg.jumps], frame)
    hams = None if mcfg.frame is None else [to_array(h) for h in mcfg.frame]
    return BuiltModel(model, graph, frame, mcfg.gate_time, [], hams)


def default_et_hamiltonian(d_B):
    return 0.5 * np.diag(np.arange(d_B, dtype=float))


def _family_sample(family, rng):
    """Random family with the same dimensions (anchor 1)."""
    reps = [np.eye(family.d_B)] + [random_unitary(family.d_B, rng) for _ in range(family.d_A - 1)]
    return UnitaryFamily(family.d_A, family.d_B, reps)


def _run_check(c, built, cfg, times, rng):
    num = cfg.numerics
    fam = built.family
    res = CheckResult(check_name(c, 0), c.kind, "PASS")
    if c.kind == "cocycle":
        rep = verify_cocycle(fam.edge_map(), c.tol)
        res.worst_residual = rep.worst_residual
        res.verdict = "PASS" if rep.ok else "FAIL"
        res.details = {"worst_triple": list(rep.worst_triple) if rep.worst_triple else None}
    elif c.kind == "closure":
        rep = closure_check(built.graph)
        res.verdict = "PASS" if rep.closed == c.expect_closed else "FAIL"
        res.details = {"closed": rep.closed, "self_adjoint": rep.self_adjoint,
                       "missing_edges": [list(e) for e in rep.missing_edges],
                       "self_adjoint_extension": [list(e) for e in
                                                  self_adjoint_extension(built.graph).sorted_edges()]}
    elif c.kind == "lemma1":
        worst, ok = 0.0, True
        for _ in range(c.samples):
            f = _family_sample(fam, rng)
            h = rng.normal(size=(fam.d_A, fam.d_A)) + 1j * rng.normal(size=(fam.d_A, fam.d_A))
            rep = lemma1_verify(h, f, c.tol)
            ok &= rep.ok
            worst = max(worst, rep.spectrum_mismatch, *rep.eigvec_residuals)
        res.verdict, res.worst_residual = ("PASS" if ok else "FAIL"), worst
    elif c.kind == "lemma3":
        worst, ok = 0.0, True
        n = fam.d_A ** 2
        for _ in range(c.samples):
            f = _family_sample(fam, rng)
            coeffs = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
            rep = lemma3_verify(coeffs, f, c.tol)
            ok &= rep.ok
            worst = max(worst, rep.spectrum_mismatch, *rep.eigvec_residuals)
        res.verdict, res.worst_residual = ("PASS" if ok else "FAIL"), worst
    elif c.kind == "xi":
        t = built.gate_time if c.t is None else c.t
        worst, ok = 0.0, True
        for _ in range(c.samples):
            f = _family_sample(fam, rng)
            rep = xi_correspondence_check(random_hermitian(fam.d_A, rng), f, t, c.tol)
            ok &= rep.ok
            worst = max(worst, rep.membership_residual, rep.coefficient_error)
        res.verdict, res.worst_residual = ("PASS" if ok else "FAIL"), worst
    elif c.kind == "theorem1":
        spot = sorted(float(x) for x in rng.uniform(0.0, 2 * built.gate_time, size=c.spot_checks))
        spot = [s if s > 0 else built.gate_time for s in spot]
        rep = theorem1_check(built.model, built.graph, num.membership_tol, times, spot,
                             num.gate_tol, num.zero_tol, num.steps)
        res.verdict = "PASS" if rep.exact_pi == c.expect_exact else "FAIL"
        res.worst_residual = (rep.worst_gate_residual if rep.exact_pi
                              else max(w.residual for w in rep.witnesses))
        res.details = {"exact_pi": rep.exact_pi, "graph_edges": [list(e) for e in rep.graph_edges],
                       "witnesses": [{"label": w.label, "residual": w.residual, "t": w.t}
                                     for w in rep.witnesses],
                       "spot_times": list(rep.spot_times)}
    elif c.kind == "pi_order":
        _pi_order(c, built, cfg, times, res)
    elif c.kind == "et_condition":
        verdicts = et_condition_check(built.spec, num.membership_tol)
        res.details = {"levels": [{"level": v.level, "transparent": v.transparent, "lambda": v.lam,
                                   "residual": v.residual} for v in verdicts]}
        res.worst_residual = max(v.residual for v in verdicts)
        if c.expect is not None:
            res.verdict = "PASS" if [v.transparent for v in verdicts] == c.expect else "FAIL"
    elif c.kind == "nas":
        classes = nas_check(built.frame_hamiltonians, num.membership_tol)
        res.details = {"classes": classes}
        if c.expect is not None:
            res.verdict = "PASS" if classes == sorted(sorted(x) for x in c.expect) else "FAIL"
    return res


def _pi_order(c, built, cfg, times, res):
    num = cfg.numerics
    fam = built.family
    paths = ([tuple(p) for p in c.paths] if c.paths is not None
             else [(1, r) for r in range(1, fam.d_A + 1)])
    pmax = c.pmax or num.pmax
    kw = dict(pmax=pmax, pass_tol=num.pass_tol, fail_tol=num.fail_tol, zero_tol=num.zero_tol,
              steps=num.steps)
    if c.schrodinger:
        reports = schrodinger_pi_orders(built.model, fam, built.frame, paths, times, **kw)
    else:
        reports = pi_orders(built.model, fam, paths, times, **kw)
    orders, worst = {}, 0.0
    for rep in reports:
        orders[f"{rep.i}->{rep.r}"] = rep.order
        top = pmax if rep.order == EXACT or not isinstance(rep.order, int) else rep.order
        for tr in rep.traces:
            worst = max([worst] + tr.term_residuals[:top + 1])
            for k in range(len(tr.residuals)):
                cst = complex(tr.constants[k])
                res.rows.append([rep.i, rep.r, k, tr.t, tr.term_residuals[k], cst.real, cst.imag,
                                 str(rep.order)])
    res.details = {"orders": orders, "pmax": pmax, "times": list(times)}
    res.worst_residual = worst
    if c.expect is not None:
        bad = {k: (orders.get(f"{a}->{b}"), v) for k, v in c.expect.items()
               for a, b in [parse_path_key(k)] if orders.get(f"{a}->{b}") != v}
        if bad:
            res.verdict = "FAIL"
            res.message = "; ".join(f"{k}: got {g}, expected {e}" for k, (g, e) in bad.items())


def _guarded(c, index, built, cfg, times, seed):
    rng = np.random.default_rng([seed, index])
    t0 = time.perf_counter()
    try:
        res = _run_check(c, built, cfg, times, rng)
    except GrayZoneError as exc:
        res = CheckResult(check_name(c, index), c.kind, "GRAY", message=str(exc))
    except Exception as exc:  # surfaced in the report with the check name
        res = CheckResult(check_name(c, index), c.kind, "ERROR",
                          message=f"{type(exc).__name__}: {exc}")
    res.name = check_name(c, index)
    res.seconds = time.perf_counter() - t0
    return res


def thread_cap():
    raw = os.environ.get("PICHECK_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"PICHECK_THREADS must be a positive integer, got {raw!r}") from None


def run(cfg, seed=None):
    """Execute every check in order (concurrently when allowed) and assemble the report."""
    seed = cfg.output.seed if seed is None else seed
    built = build_model(cfg.model)
    times = (list(cfg.numerics.times) if cfg.numerics.times is not None
             else generic_times(built.gate_time, np.random.default_rng([seed, 2 ** 32 - 1]),
                                cfg.numerics.n_times))
    workers = min(thread_cap(), max(1, len(cfg.checks)))
    jobs = [(c, k, built, cfg, times, seed) for k, c in enumerate(cfg.checks)]
    if workers == 1:
        results = [_guarded(*j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda j: _guarded(*j), jobs))
    return RunReport(cfg, seed, times, results, list(built.notes))


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def _atomic_write(path, text):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


PI_ORDER_COLUMNS = ["path_i", "path_r", "k", "t", "residual", "c_real", "c_imag", "verdict"]
SUMMARY_COLUMNS = ["check", "verdict", "worst_residual", "seconds"]


def emit_csv(report, directory, timing=False):
    """One CSV per pi_order check plus summary.csv; returns the written paths.

    The seconds column is left empty unless `timing` is set, so repeated runs
    stay byte-identical.
    """
    paths = []
    for r in report.results:
        if r.kind == "pi_order" and r.verdict != "ERROR":
            p = os.path.join(directory, f"{r.name}.csv")
            _atomic_write(p, _csv_text(PI_ORDER_COLUMNS, r.rows))
            paths.append(p)
    rows = [[r.name, r.verdict, float(r.worst_residual), _fmt(r.seconds) if timing else ""]
            for r in report.results]
    p = os.path.join(directory, "summary.csv")
    _atomic_write(p, _csv_text(SUMMARY_COLUMNS, rows))
    paths.append(p)
    return paths


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


def report_dict(report):
    return {
        "tool": "picheck", "version": __version__, "rng": RNG_NAME, "seed": report.seed,
        "times": report.times, "notes": report.notes, "exit_code": report.exit_code,
        "config": report.config.model_dump(mode="json"),
        "checks": [_jsonable({"name": r.name, "kind": r.kind, "verdict": r.verdict,
                              "worst_residual": r.worst_residual, "seconds": r.seconds,
                              "message": r.message, "details": r.details})
                   for r in report.results],
    }


def report_text(report):
    lines = [f"picheck {__version__}  seed={report.seed} ({RNG_NAME})",
             "times: " + ", ".join(f"{t:.6g}" for t in report.times)]
    for r in report.results:
        lines.append(f"[{r.verdict}] {r.name}  worst_residual={r.worst_residual:.3e}  "
                     f"({r.seconds:.2f} s)")
        if r.kind == "pi_order" and "orders" in r.details:
            for path, order in r.details["orders"].items():
                lines.append(f"    {path}: {order}")
        if r.kind == "theorem1" and r.details.get("witnesses"):
            for w in r.details["witnesses"]:
                lines.append(f"    witness {w['label']}: residual {w['residual']:.3e} at t={w['t']:.6g}")
        if r.message:
            lines.append(f"    {r.message}")
    for note in report.notes:
        lines.append(f"note: {note}")
    failed = [r.name for r in report.results if r.verdict != "PASS"]
    lines.append("result: " + ("all checks pass" if not failed else "not passing: " + ", ".join(failed)))
    return "\n".join(lines) + "\n"


def builtin_config(name):
    """A ready-to-edit configuration for a built-in model."""
    if name == "snap":
        model = {"type": "snap", "d_A": 4, "N": 2}
        checks = [{"kind": "cocycle"}, {"kind": "closure", "expect_closed": False}, {"kind": "nas"},
                  {"kind": "theorem1", "expect_exact": False},
                  {"kind": "pi_order", "paths": [[1, 4], [1, 3], [1, 2]],
                   "expect": {"1->4": 2, "1->3": 3, "1->2": 4}}]
    elif name == "error_transparent":
        h1 = default_et_hamiltonian(2)
        h3 = h1 + 0.5 * np.diag([0.0, 1.0])
        model = {"type": "error_transparent", "d_A": 3, "d_B": 2,
                 "hamiltonians": [from_array(h1), from_array(h1), from_array(h3)]}
        checks = [{"kind": "et_condition"}, {"kind": "theorem1", "expect_exact": False},
                  {"kind": "pi_order"}]
    else:
        raise ConfigError(f"unknown builtin {name!r}")
    return RunConfig.model_validate({"model": model, "checks": checks})


def _warn(msg):
    print(f"warning: {msg}", file=sys.stderr)


def _resolve(base, path):
    return path if base is None or os.path.isabs(path) else os.path.join(base, path)


def main(argv=None):
    ap = argparse.ArgumentParser(prog="picheck", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"picheck {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run the checks in a configuration")
    p_run.add_argument("config")
    p_run.add_argument("--out", help="directory for the report and CSV outputs")
    p_run.add_argument("--seed", type=int, help="override output.seed")
    p_run.add_argument("--strict", action="store_true", help="reject unknown configuration keys")
    p_run.add_argument("--timing", action="store_true", help="fill the seconds column of summary.csv")
    p_val = sub.add_parser("validate", help="validate a configuration and echo it with defaults")
    p_val.add_argument("config")
    p_val.add_argument("--strict", action="store_true")
    p_b = sub.add_parser("builtin", help="emit a configuration for a built-in model")
    p_b.add_argument("name", choices=["snap", "error_transparent"])
    p_b.add_argument("--print-config", action="store_true", required=True)
    args = ap.parse_args(argv)

    try:
        if args.command == "builtin":
            sys.stdout.write(dump_config(builtin_config(args.name)))
            return EXIT_PASS
        cfg = load_config(args.config, args.strict, _warn)
        if args.command == "validate":
            sys.stdout.write(dump_config(cfg))
            return EXIT_PASS
        if args.seed is not None and not 0 <= args.seed < 2 ** 64:
            raise ConfigError("--seed must be a 64-bit unsigned integer")
        thread_cap()
        report = run(cfg, args.seed)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if cfg.output.csv is not None:
        emit_csv(report, _resolve(args.out, cfg.output.csv), args.timing)
    if cfg.output.report is not None:
        _atomic_write(_resolve(args.out, cfg.output.report),
                      json.dumps(report_dict(report), indent=2) + "\n")
    sys.stdout.write(report_text(report))
    if report.exit_code == EXIT_GRAY:
        print("gray zone: a residual fell between pass_tol and fail_tol, or orders disagreed "
              "across times; try other evaluation times or tolerances", file=sys.stderr)
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
