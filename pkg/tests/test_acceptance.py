"""Acceptance suite: one PASS/FAIL line per criterion.

Each test runs a criterion at its stated tolerance, prints a summary line
(visible even under ``pytest -q``) and then asserts.
"""

import time
from fractions import Fraction

import numpy as np
import pytest

from homeocomm import (
    FiberKind,
    GraphViolation,
    SpecDocument,
    VerticalPL,
    apply,
    commutator_factorization,
    compose,
    conjugation_report,
    conjugator,
    dump_spec,
    power_word_decomposition,
    split_loxodromic,
    verify_dynamics,
    verify_identity,
)
from homeocomm.cli import main
from homeocomm.corpus import cylinder_corpus, line_corpus
from homeocomm.suited import ArithmeticBands, certify_loxodromic

TOL = 1e-6
LINE = FiberKind.POINT
CIRCLE = FiberKind.CIRCLE
LINE_WINDOW, LINE_GRID = (-50.0, 50.0), (1, 10_000)
CYL_WINDOW, CYL_GRID = (-20.0, 20.0), (200, 200)
LATTICE_KS = range(-6, 7)


@pytest.fixture
def announce(capsys):
    def emit(name, ok, detail=""):
        with capsys.disabled():
            print(f"\nACCEPTANCE {'PASS' if ok else 'FAIL'}: {name}" + (f" [{detail}]" if detail else ""))
        return ok
    return emit


@pytest.fixture(scope="module")
def line_runs():
    runs = []
    for f in line_corpus():
        t0 = time.perf_counter()
        cert = commutator_factorization(f, LINE, LINE_WINDOW, LINE_GRID, TOL, strict=False)
        runs.append((f, cert, time.perf_counter() - t0))
    return runs


@pytest.fixture(scope="module")
def cylinder_runs():
    runs, skipped = [], []
    for i, f in enumerate(cylinder_corpus()):
        try:
            cert = commutator_factorization(f, CIRCLE, CYL_WINDOW, CYL_GRID, TOL, strict=False)
        except GraphViolation as exc:
            skipped.append((i, str(exc)))
            continue
        runs.append((f, cert))
    return runs, skipped


@pytest.fixture(scope="module")
def power_runs():
    g = VerticalPL.translation(3.0)
    return {exps: power_word_decomposition(g, exps, LINE, LINE_WINDOW, LINE_GRID, TOL,
                                           strict=False)
            for exps in [(2, 3), (-2, 3), (1, 4)]}


def all_commutator_certs(line_runs, cylinder_runs):
    return [c for _, c, _ in line_runs] + [c for _, c in cylinder_runs[0]]


def test_commutator_reproduction_line(line_runs, announce):
    errs = np.array([c.report.max_error for _, c, _ in line_runs])
    times = np.array([t for _, _, t in line_runs])
    passed = sum(c.passed for _, c, _ in line_runs)
    ok = len(line_runs) == 100 and passed == 100 and errs.max() < TOL and np.median(times) < 1.0
    announce("commutator reproduction on the line", ok,
             f"{passed}/100 pass, max_error={errs.max():.2e}, median={np.median(times):.3f}s")
    assert ok


def test_commutator_reproduction_cylinder(cylinder_runs, announce):
    runs, skipped = cylinder_runs
    errs = [c.report.max_error for _, c in runs]
    passed = sum(c.passed for _, c in runs)
    ok = passed == len(runs) and len(runs) + len(skipped) == 50 and max(errs) < TOL
    announce("commutator reproduction on the cylinder", ok,
             f"{passed}/{len(runs)} pass, {len(skipped)} graph violations reported, "
             f"max_error={max(errs):.2e}")
    for i, why in skipped:
        print(f"graph violation in cylinder instance {i}: {why}")
    assert ok


def test_conjugacy_oracle(line_runs, cylinder_runs, power_runs, announce):
    worst, count = 0.0, 0
    for cert in all_commutator_certs(line_runs, cylinder_runs):
        d = cert.details
        rep = conjugation_report(d["conjugator"], d["g_cert"], d["gf_cert"], tol=TOL)
        worst, count = max(worst, rep.max_error), count + 1
        assert rep.passed, rep.summary()
    for cert in power_runs.values():
        for h, fi in zip(cert.details["conjugators"], cert.details["pieces"]):
            if h is None:
                continue
            rep = conjugation_report(h, h.sigma, fi, LINE_WINDOW, LINE_GRID, TOL)
            worst, count = max(worst, rep.max_error), count + 1
            assert rep.passed, rep.summary()
    sigma = certify_loxodromic(VerticalPL.translation(1.0), ArithmeticBands(0.0, 1.0))
    tau = certify_loxodromic(VerticalPL.translation(2.0), ArithmeticBands(0.0, 2.0))
    c = conjugator(sigma, tau)
    q = np.array([float(Fraction(k, 7)) for k in range(-50, 50)])
    _, img = apply(c, None, q)
    closed = float(np.abs(img - 2 * q).max())
    ok = worst < TOL and closed < 1e-12
    announce("conjugacy oracle", ok,
             f"{count} conjugators, max_error={worst:.2e}, closed form error={closed:.2e}")
    assert ok


def test_power_words(power_runs, announce):
    lines = []
    ok = True
    for exps, cert in power_runs.items():
        moved = min(cert.details["displacement"])
        good = cert.report.max_error < TOL and moved > TOL and cert.passed
        ok &= good
        lines.append(f"{exps}: error={cert.report.max_error:.2e} min_move={moved:.2e}")
    announce("power words for t+3", ok, "; ".join(lines))
    assert ok


def test_loxodromic_splitting(line_runs, announce):
    worst, ok = 0.0, True
    for f, _, _ in line_runs:
        f1, f2 = split_loxodromic(f, LINE, LINE_WINDOW)
        rep = verify_identity(f, compose([f1.map, f2.map]), LINE_WINDOW, LINE_GRID, 1e-9, LINE)
        worst = max(worst, rep.max_error)
        dyn = [verify_dynamics(c) for c in (f1, f2)]
        ok &= rep.passed and f1.sink == -1 and f2.sink == 1 and all(d.passed for d in dyn)
    announce("loxodromic splitting", ok, f"100 instances, max_error={worst:.2e}")
    assert ok


def _outside_points(band, rng):
    lo, hi = band
    w = hi - lo
    return np.concatenate([[lo, hi], lo - w * rng.uniform(0, 3, 20), hi + w * rng.uniform(0, 3, 20)])


def test_exactness_at_lattice(line_runs, cylinder_runs, announce):
    rng = np.random.default_rng(2024)
    checked = 0
    ok = True
    for cert in all_commutator_certs(line_runs, cylinder_runs):
        s = cert.details["suited"]
        h = cert.details["g"].children()[0]
        ms = np.array([s.m(k) for k in LATTICE_KS])
        theta = None if s.fiber is LINE else rng.uniform(0, 1, ms.size - 1)
        _, img = apply(h.shift, theta, ms[:-1])
        ok &= img.tolist() == ms[1:].tolist()
        for k in LATTICE_KS[:-2]:
            piece = h.piece(k)
            t = _outside_points((s.m(k + 1), s.m(k + 2)), rng)
            th = None if s.fiber is LINE else rng.uniform(0, 1, t.size)
            th2, t2 = apply(piece, th, t)
            ok &= t2.tolist() == t.tolist() and (th is None or th2.tolist() == th.tolist())
            checked += 1
    announce("exactness at the lattice", ok, f"{checked} straighteners checked")
    assert ok


def test_dynamics(line_runs, cylinder_runs, power_runs, announce):
    certs = []
    for cert in all_commutator_certs(line_runs, cylinder_runs):
        certs += [cert.details["g_cert"], cert.details["gf_cert"]]
    for cert in power_runs.values():
        certs += cert.details["pieces"]
    reps = [verify_dynamics(c, iterations=100, samples=16) for c in certs]
    low = min(r.extras["min_progress"] for r in reps)
    ok = all(r.passed for r in reps)
    announce("dynamics toward the sink", ok, f"{len(certs)} certificates, min_progress={low}")
    assert ok


def test_determinism(tmp_path, announce):
    def spec(name, f, fiber):
        path = tmp_path / name
        path.write_text(dump_spec(SpecDocument(fiber, f, {})))
        return str(path)

    line = [spec(f"line{i}.json", f, LINE) for i, f in enumerate(line_corpus(3))]
    cyl = spec("cyl.json", cylinder_corpus(1)[0], CIRCLE)
    shift = spec("shift.json", VerticalPL.translation(3.0), LINE)
    runs = [["factor", s] for s in line + [cyl]]
    runs.append(["powers", shift, "--exponents", "2,3"])
    runs.append(["plot", str(tmp_path / "out0_0")])
    ok = True
    for n, args in enumerate(runs):
        outs = []
        for rep in range(2):
            out = tmp_path / f"out{n}_{rep}"
            ok &= main(args + ["-o", str(out)]) == 0
            outs.append(out.read_bytes())
        ok &= outs[0] == outs[1]
    announce("byte-identical reruns", ok, f"{len(runs)} commands rerun")
    assert ok
