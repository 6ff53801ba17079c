"""Acceptance criteria 1-10, each at its stated tolerance (and runtime limit where one is set).

Each test prints one PASS/FAIL line and records it for the terminal summary.
"""
import json
import time
from contextlib import contextmanager
from itertools import product

import numpy as np

from conftest import ACCEPTANCE, crandn, random_family
from picheck.algebra import (AlgebraGraph, UnitaryFamily, closure_check, lemma1_verify,
                             path_product, verify_cocycle)
from picheck.cli import main
from picheck.dyson import (EXACT, dyson_terms_constant, dyson_terms_timedep, generic_times,
                           pi_orders, split)
from picheck.models import ErrorTransparentSpec, SnapSpec, et_model, snap_model
from picheck.numerics import expm, random_hermitian
from picheck.propagation import pi_propagator, projected_block, xi_correspondence_check
from picheck.superop import (LindbladModel, hs_basis_mult_check, lemma3_verify, liouvillian,
                             theorem1_check)

SNAP_ORDERS = {(1, 4): 2, (1, 3): 3, (1, 2): 4}


@contextmanager
def criterion(num, title):
    info = {"detail": ""}
    t0 = time.perf_counter()
    ok = False
    try:
        yield info
        ok = True
    finally:
        detail = f"{time.perf_counter() - t0:.2f} s" + (f"; {info['detail']}" if info["detail"] else "")
        ACCEPTANCE[num] = (ok, title, detail)
        print(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {title}  ({detail})")


def snap_orders(spec, seed=2024):
    built = snap_model(spec)
    times = generic_times(built.gate_time, np.random.default_rng(seed))
    reports = pi_orders(built.model, built.family, list(SNAP_ORDERS), times, pmax=6,
                        pass_tol=1e-7, fail_tol=1e-4)
    return {(r.i, r.r): r.order for r in reports}, reports


def test_criterion_01_snap_orders():
    with criterion(1, "SNAP orders 1->4: 2, 1->3: 3, 1->2: 4") as info:
        t0 = time.perf_counter()
        orders, reports = snap_orders(SnapSpec())
        elapsed = time.perf_counter() - t0
        info["detail"] = f"orders {orders}"
        assert orders == SNAP_ORDERS
        assert all(len(r.traces) == 3 and r.traces[0].order == r.order for r in reports)
        assert elapsed < 60


def test_criterion_02_theorem1_exactness():
    with criterion(2, "exact PI criterion on dephasing-only SNAP and transparent ET") as info:
        t0 = time.perf_counter()
        rng = np.random.default_rng(5)
        h1 = 0.5 * np.diag([0.0, 1.0])
        et = et_model(ErrorTransparentSpec(3, 2, [h1, h1 - 0.3 * np.eye(2), h1 + 0.1 * np.eye(2)]))
        snap = snap_model(SnapSpec(gamma=0.0))
        worst = 0.0
        for built in (snap, et):
            T = built.gate_time
            spot = tuple(rng.uniform(0.0, 2 * T, size=3))
            rep = theorem1_check(built.model, built.graph, spot_times=spot, gate_tol=1e-8)
            assert rep.exact_pi
            worst = max(worst, rep.worst_gate_residual)
        info["detail"] = f"worst gate residual {worst:.1e}"
        assert worst <= 1e-8
        assert time.perf_counter() - t0 < 10


def test_criterion_03_lemma1_suite():
    with criterion(3, "lifted-operator spectrum suite") as info:
        t0 = time.perf_counter()
        rng = np.random.default_rng(3)
        worst = 0.0
        for dims in ((2, 2), (3, 2), (3, 3)):
            for k in range(50):
                fam = random_family(*dims, rng)
                d = dims[0]
                h = random_hermitian(d, rng) if k % 2 else crandn(rng, d, d)
                for anchor in range(1, d + 1):
                    rep = lemma1_verify(h, fam, tol=1e-8, anchor=anchor)
                    assert rep.ok, (dims, k, anchor)
                    worst = max(worst, rep.spectrum_mismatch, *rep.eigvec_residuals)
        info["detail"] = f"worst residual {worst:.1e}"
        assert time.perf_counter() - t0 < 20


def test_criterion_04_lemma3_suite():
    with criterion(4, "HS lifted-operator spectrum suite") as info:
        t0 = time.perf_counter()
        rng = np.random.default_rng(4)
        worst = 0.0
        for _ in range(20):
            fam = random_family(2, 2, rng)
            rep = lemma3_verify(crandn(rng, 4, 4), fam, tol=1e-7)
            assert rep.ok
            worst = max(worst, rep.spectrum_mismatch, *rep.eigvec_residuals)
        info["detail"] = f"worst residual {worst:.1e}"
        assert time.perf_counter() - t0 < 20


def test_criterion_05_propagator_suite():
    with criterion(5, "PI propagator suite (xi correspondence, projected blocks)") as info:
        rng = np.random.default_rng(6)
        dims = [(2, 2), (3, 2), (3, 3), (4, 2)]
        worst_xi = worst_fit = worst_unit = 0.0
        for k in range(50):
            dA, dB = dims[k % len(dims)]
            fam = random_family(dA, dB, rng)
            h = random_hermitian(dA, rng)
            t = float(rng.uniform(0.1, 3.0))
            xi = xi_correspondence_check(h, fam, t, tol=1e-9)
            assert xi.ok
            worst_xi = max(worst_xi, xi.membership_residual, xi.coefficient_error)
            w = pi_propagator(h, fam, t)
            for i, r in product(range(1, dA + 1), repeat=2):
                pb = projected_block(w, fam, i, r)
                if pb.fit.trivially_zero:
                    continue
                rel = pb.fit.residual / np.linalg.norm(pb.block)
                assert rel <= 1e-9
                u = pb.block / pb.fit.constant
                unit = np.linalg.norm(u.conj().T @ u - np.eye(dB))
                assert unit <= 1e-8
                worst_fit, worst_unit = max(worst_fit, rel), max(worst_unit, unit)
        info["detail"] = f"xi {worst_xi:.1e}, fit {worst_fit:.1e}, unitarity {worst_unit:.1e}"


def test_criterion_06_algebra_suite():
    with criterion(6, "cocycle, closure patterns, path independence, HS product rule") as info:
        rng = np.random.default_rng(7)
        fam = random_family(3, 2, rng)
        rep = verify_cocycle(fam.edge_map(), tol=1e-12, triples=list(product(range(1, 4), repeat=3)))
        assert rep.ok
        idf = UnitaryFamily.identity(3, 1)
        # three-level subalgebra patterns: two self-adjoint ones and a non-self-adjoint triangle
        patterns = {"d": {(1, 2), (2, 1)}, "e": set(), "f": {(2, 1), (3, 2), (3, 1)}}
        verdicts = {k: closure_check(AlgebraGraph(idf, frozenset(v))) for k, v in patterns.items()}
        assert verdicts["d"].closed and verdicts["d"].self_adjoint
        assert verdicts["e"].closed and verdicts["e"].self_adjoint
        assert verdicts["f"].closed and not verdicts["f"].self_adjoint
        g = AlgebraGraph.full(fam)
        worst = 0.0
        for r, i in product(range(1, 4), repeat=2):
            ref = g.base_vector(r, i)
            for n in (1, 2, 3):
                for mids in product(range(1, 4), repeat=n - 1):
                    nodes = (r,) + mids + (i,)
                    worst = max(worst, np.abs(path_product(g, list(zip(nodes, nodes[1:]))) - ref).max())
        assert worst <= 1e-12
        fam2 = random_family(2, 2, rng)
        idx = list(product((1, 2), repeat=4))
        assert all(hs_basis_mult_check(fam2, a, b, tol=1e-12) for a in idx for b in idx)
        info["detail"] = f"cocycle {rep.worst_residual:.1e}, paths {worst:.1e}, {len(idx) ** 2} HS products"


def test_criterion_07_dyson_machinery():
    with criterion(7, "Dyson cross-validation, convergence, power counting") as info:
        rng = np.random.default_rng(8)
        h = random_hermitian(4, rng)
        base = [crandn(rng, 4, 4) / 2 for _ in range(2)]
        sp = split(LindbladModel(h, [np.sqrt(0.1) * k for k in base]))
        a = dyson_terms_constant(sp, 0.8, 4)
        b = dyson_terms_timedep(sp, 0.8, 4, steps=2000)
        cross = max(np.abs(x - y).max() for x, y in zip(a.terms, b.terms))
        assert cross <= 1e-7
        model = LindbladModel(h, base)
        sp = split(model)
        t = 3.0 / np.linalg.norm(sp.s_jump())
        conv = np.abs(dyson_terms_constant(sp, t, 20).partial_sum(20) - expm(liouvillian(model), t)).max()
        assert conv <= 1e-8
        gammas = np.array([1e-3, 1e-2])
        norms = np.array([[np.linalg.norm(w) for w in dyson_terms_constant(
            split(LindbladModel(h, [np.sqrt(g) * k for k in base])), 1.0, 3).terms] for g in gammas])
        slopes = [float(np.diff(np.log(norms[:, p]))[0] / np.diff(np.log(gammas))[0]) for p in (1, 2, 3)]
        assert all(abs(s - p) <= 0.1 for s, p in zip(slopes, (1, 2, 3)))
        info["detail"] = f"cross {cross:.1e}, convergence {conv:.1e}, slopes {np.round(slopes, 3).tolist()}"


def test_criterion_08_structural_invariance():
    with criterion(8, "SNAP orders invariant under rates, truncation, gate time") as info:
        base = SnapSpec()
        variants = {
            "rates x0.5": SnapSpec(kappa=0.01, gamma=0.01),
            "rates x2": SnapSpec(kappa=0.04, gamma=0.04),
            "N=3": SnapSpec(N=3),
            "T -30%": SnapSpec(gate_time=0.7 * base.gate_time),
            "T +30%": SnapSpec(gate_time=1.3 * base.gate_time),
        }
        seen = {}
        for name, spec in variants.items():
            seen[name] = snap_orders(spec)[0]
        info["detail"] = ", ".join(f"{k}: ok" if v == SNAP_ORDERS else f"{k}: {v}" for k, v in seen.items())
        assert all(v == SNAP_ORDERS for v in seen.values())


def test_criterion_09_error_transparent_broken_edge(tmp_path, capsys):
    with criterion(9, "broken error-transparent run names the jump and flags the order ambiguity") as info:
        h1 = 0.5 * np.diag([0.0, 1.0])
        spec = ErrorTransparentSpec(3, 2, [h1, h1, h1 + 0.5 * np.diag([0.0, 1.0])])
        built = et_model(spec)
        rep = theorem1_check(built.model, built.graph, times=(0.5, 0.9))
        assert not rep.exact_pi and [w.label for w in rep.witnesses] == ["relax_1_to_3"]
        cfg = tmp_path / "et.json"
        assert main(["builtin", "error_transparent", "--print-config"]) == 0
        cfg.write_text(capsys.readouterr().out)
        code = main(["run", str(cfg), "--out", str(tmp_path / "out")])
        out = capsys.readouterr().out
        assert code == 0
        report = json.loads((tmp_path / "out" / "report.json").read_text())
        orders = next(c for c in report["checks"] if c["kind"] == "pi_order")["details"]["orders"]
        assert orders["1->1"] == EXACT and orders["1->2"] == EXACT
        assert isinstance(orders["1->3"], int)
        assert any("both exact and zeroth order" in n for n in report["notes"])
        assert "note:" in out and "1->3: " in out
        info["detail"] = f"derived orders {orders}"


def test_criterion_10_cli_determinism_and_exit_codes(tmp_path, capsys):
    with criterion(10, "CLI determinism and exit codes") as info:
        assert main(["builtin", "snap", "--print-config"]) == 0
        cfg = json.loads(capsys.readouterr().out)
        passing = tmp_path / "pass.json"
        passing.write_text(json.dumps(cfg))
        runs = []
        for k in range(2):
            out = tmp_path / f"run{k}"
            assert main(["run", str(passing), "--out", str(out), "--seed", "99"]) == 0
            runs.append(sorted(p for p in (out / "csv").iterdir()))
        assert [p.name for p in runs[0]] == [p.name for p in runs[1]]
        assert all(a.read_bytes() == b.read_bytes() for a, b in zip(*runs))
        failing = dict(cfg, checks=[{"kind": "theorem1"}])
        (tmp_path / "fail.json").write_text(json.dumps(failing))
        assert main(["run", str(tmp_path / "fail.json"), "--out", str(tmp_path / "f")]) == 1
        gray = dict(cfg, checks=[{"kind": "pi_order", "paths": [[1, 4]], "pmax": 3}],
                    numerics={"pass_tol": 1e-40, "fail_tol": 1.0})
        (tmp_path / "gray.json").write_text(json.dumps(gray))
        assert main(["run", str(tmp_path / "gray.json"), "--out", str(tmp_path / "g")]) == 3
        bad = dict(cfg, numerics={"pass_tol": 1e-3, "fail_tol": 1e-4})
        (tmp_path / "bad.json").write_text(json.dumps(bad))
        assert main(["run", str(tmp_path / "bad.json")]) == 2
        capsys.readouterr()
        info["detail"] = f"{len(runs[0])} CSVs byte-identical; exit codes 0/1/3/2 as expected"
