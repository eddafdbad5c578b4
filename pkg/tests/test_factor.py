import numpy as np
import pytest

from homeocomm import (
    ArithmeticBands,
    BandViolation,
    CPoint,
    EndsMismatch,
    FiberBump,
    FiberKind,
    GraphCurve,
    Identity,
    NotOrientationPreserving,
    Power,
    Twist,
    VerticalPL,
    apply,
    assemble_g,
    build_straightener,
    build_suited,
    build_vertical_shift,
    certify_loxodromic,
    commutator_factorization,
    compose,
    conjugation_report,
    conjugator,
    evaluate,
    invert,
    power_root_conjugate,
    power_word_decomposition,
    split_loxodromic,
    verify_identity,
)
from homeocomm.corpus import cylinder_corpus, line_corpus

LINE = FiberKind.POINT
CIRCLE = FiberKind.CIRCLE
WIN = (-50.0, 50.0)
GRID = (1, 10_000)


@pytest.fixture(scope="module")
def unit_shift():
    f = VerticalPL.translation(1.0)
    return f, build_suited(f)


# g'

def test_vertical_shift_on_worked_lattice(unit_shift):
    _, s = unit_shift
    g1 = build_vertical_shift(s)
    assert evaluate(g1, CPoint(2.0)).t == 5.0
    assert evaluate(g1, CPoint(3.5)).t == 6.5


def test_vertical_shift_maps_band_onto_next(unit_shift, rng):
    _, s = unit_shift
    g1 = build_vertical_shift(s)
    u = rng.uniform(0, 1, 100)
    _, img = apply(g1, None, s.m(0) + u * (s.m(1) - s.m(0)))
    assert np.all((img > s.m(1)) & (img < s.m(2)))


def test_vertical_shift_exact_at_boundaries_far_out():
    s = build_suited(line_corpus(5)[4])
    g1 = build_vertical_shift(s)
    ms = np.array([s.m(k) for k in range(-30, 31)])
    _, img = apply(g1, None, ms[:-1])
    assert img.tolist() == ms[1:].tolist()


# straighteners

def test_point_straightener():
    h = build_straightener(GraphCurve([3.0], LINE), (2, 5), 4.0)
    assert evaluate(h, CPoint(3.0)).t == 4.0
    assert evaluate(h, CPoint(2.5)).t == 3.0


def test_degenerate_straightener_is_identity():
    assert isinstance(build_straightener(GraphCurve([4.0], LINE), (2, 5), 4.0), Identity)


def test_circle_straightener_flattens_curve():
    th = np.arange(1024) / 1024
    c = GraphCurve(3 + 0.5 * np.cos(2 * np.pi * th))
    h = build_straightener(c, (2, 5), 4.0)
    _, lv = apply(h, th, c.values)
    assert np.all(lv == 4.0)


def test_straightener_identity_outside_band(rng):
    th = np.arange(256) / 256
    c = GraphCurve(3 + 0.5 * np.sin(2 * np.pi * th))
    h = build_straightener(c, (2, 5), 3.5)
    t = np.concatenate([rng.uniform(-20, 2, 300), rng.uniform(5, 20, 300), [2.0, 5.0]])
    a = rng.uniform(0, 1, t.size)
    a2, t2 = apply(h, a, t)
    assert t2.tolist() == t.tolist() and a2.tolist() == a.tolist()


def test_straightener_band_violation():
    with pytest.raises(BandViolation):
        build_straightener(GraphCurve([5.5], LINE), (2, 5), 4.0)
    with pytest.raises(BandViolation):
        build_straightener(GraphCurve([3.0], LINE), (2, 5), 5.0)


# assembled g

def test_assemble_identity_gives_pure_shift():
    f = Identity()
    s = build_suited(f, fiber=LINE)
    asm = assemble_g(f, s)
    assert verify_identity(asm.g, asm.shift, WIN, GRID).max_error == 0.0
    assert verify_identity(compose([asm.g, f]), asm.g, WIN, GRID).max_error == 0.0


def test_assemble_worked_markers(unit_shift):
    f, s = unit_shift
    asm = assemble_g(f, s)
    gf = compose([asm.g, f])
    assert evaluate(gf, CPoint(0.0)).t == 3.0
    assert evaluate(gf, CPoint(3.0)).t == 6.0
    assert asm.g_cert.sink == 1 and asm.gf_cert.sink == 1


def test_assemble_cylinder_transport():
    bump = FiberBump.from_functions((-1.5, 1.5), [lambda th: 0 * th],
                                    [lambda th: 0.4 * np.cos(2 * np.pi * th)], 128)
    twist = Twist([(-2, 0.0), (0, 0.3), (2, 0.0)])
    f = compose([twist, bump])
    s = build_suited(f)
    asm = assemble_g(f, s)
    n = 777
    th = (np.arange(n) + 0.5) / n
    for k in (-1, 0, 1):
        _, lv = apply(compose([asm.g, f]), th, np.full(n, s.t(k)))
        assert np.max(np.abs(lv - s.t(k + 1))) < 1e-6
    assert asm.straighteners.transport_residual(0) < 1e-6


# conjugator

def test_closed_form_conjugator():
    sigma = certify_loxodromic(VerticalPL.translation(1.0), ArithmeticBands(0, 1))
    tau = certify_loxodromic(VerticalPL.translation(2.0), ArithmeticBands(0, 2))
    c = conjugator(sigma, tau)
    assert evaluate(c, CPoint(0.5)).t == 1.0
    x = np.array([p / q for p in range(-60, 60, 7) for q in (1, 3, 7)])
    _, y = apply(c, None, x)
    assert np.max(np.abs(y - 2 * x)) < 1e-12
    assert conjugation_report(c, sigma, tau, WIN, GRID, 1e-9).passed


def test_self_conjugator_is_identity():
    f = line_corpus(2)[1]
    s = build_suited(f)
    asm = assemble_g(f, s)
    c = conjugator(asm.g_cert, asm.g_cert)
    assert verify_identity(c, Identity(), WIN, GRID).max_error < 1e-9
    assert conjugation_report(c, asm.g_cert, asm.g_cert, WIN, GRID, 1e-9).passed


def test_conjugator_needs_shared_sink():
    sigma = certify_loxodromic(VerticalPL.translation(1.0), ArithmeticBands(0, 1))
    tau = certify_loxodromic(VerticalPL.translation(-1.0), ArithmeticBands(0, 1))
    with pytest.raises(EndsMismatch):
        conjugator(sigma, tau)


def test_conjugator_fixes_ends():
    f = line_corpus(3)[0]
    cert = commutator_factorization(f)
    c = cert.factors["b"]
    _, far = apply(c, None, np.array([-200.0, 200.0]))
    assert far[0] < 0 < far[1]


def test_cylinder_conjugator_identity():
    f = cylinder_corpus(2)[0]
    cert = commutator_factorization(f)
    d = cert.details
    rep = conjugation_report(d["conjugator"], d["g_cert"], d["gf_cert"], tol=1e-6)
    assert rep.passed


# commutators

def test_identity_factorization():
    cert = commutator_factorization(Identity(), fiber=LINE)
    assert isinstance(cert.factors["a"], Identity) and isinstance(cert.factors["b"], Identity)
    assert cert.report.max_error == 0.0


def test_unit_translation_commutator():
    f = VerticalPL.translation(1.0)
    cert = commutator_factorization(f)
    assert cert.passed and cert.report.max_error < 1e-9
    a, b = cert.factors["a"], cert.factors["b"]
    rhs = compose([a, b, invert(a), invert(b)])
    assert verify_identity(f, rhs, WIN, GRID, 1e-9).passed


def test_commutator_rejects_reflection(reflection):
    with pytest.raises(NotOrientationPreserving):
        commutator_factorization(reflection)


def test_cylinder_commutator():
    f = cylinder_corpus(3)[1]
    cert = commutator_factorization(f)
    assert cert.passed and cert.report.max_error < 1e-6
    assert cert.report.grid == (200, 200)


# splitting

def test_split_identity():
    f1, f2 = split_loxodromic(Identity(), fiber=LINE)
    assert verify_identity(compose([f1.map, f2.map]), Identity(), WIN, GRID).max_error < 1e-9
    assert f1.sink == -1 and f2.sink == 1


@pytest.mark.parametrize("shift", [1.0, 3.0])
def test_split_translation(shift):
    f = VerticalPL.translation(shift)
    f1, f2 = split_loxodromic(f)
    assert f1.dynamics_report.passed and f2.dynamics_report.passed
    assert verify_identity(compose([f1.map, f2.map]), f, WIN, GRID, 1e-9).passed


# power roots and words

def test_power_root_p1_is_the_map():
    fi = certify_loxodromic(VerticalPL.translation(3.0), ArithmeticBands(0, 3))
    assert power_root_conjugate(fi, 1) is fi.map


@pytest.mark.parametrize("p", [2, 3])
def test_power_root_of_translation(p):
    fi = certify_loxodromic(VerticalPL.translation(3.0), ArithmeticBands(0, 3))
    g = power_root_conjugate(fi, p)
    assert verify_identity(Power(g, p), fi.map, WIN, GRID, 1e-9).passed


def test_power_root_of_pl_loxodromic():
    _, f2 = split_loxodromic(VerticalPL([(-1, 0), (0, 1), (1, 3)]))
    g = power_root_conjugate(f2, 3)
    assert verify_identity(Power(g, 3), f2.map, WIN, GRID, 1e-9).passed


def test_power_word_unit_exponents():
    g = VerticalPL.translation(3.0)
    cert = power_word_decomposition(g, [1, 1])
    assert cert.passed and cert.report.max_error < 1e-9


@pytest.mark.parametrize("exps", [(2, 3), (-2, 3)])
def test_power_word_translation(exps):
    g = VerticalPL.translation(3.0)
    cert = power_word_decomposition(g, exps)
    assert cert.passed and cert.report.max_error < 1e-6
    assert all(d > 1e-6 for d in cert.details["displacement"])


def test_power_word_preconditions():
    g = VerticalPL.translation(3.0)
    with pytest.raises(ValueError):
        power_word_decomposition(g, [2])
    with pytest.raises(ValueError):
        power_word_decomposition(g, [0, 2])


def test_line_markers_hit_exactly():
    for f in line_corpus(6):
        s = build_suited(f)
        gf = compose([assemble_g(f, s).g, f])
        ts = np.array([s.t(k) for k in range(-6, 7)])
        _, img = apply(gf, None, ts[:-1])
        assert img.tolist() == ts[1:].tolist()
