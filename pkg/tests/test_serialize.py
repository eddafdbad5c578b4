import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from homeocomm import (
    Compose,
    FiberBump,
    FiberKind,
    Identity,
    Inverse,
    InvalidSpec,
    MonotoneSmooth,
    Power,
    SpecDocument,
    Twist,
    VerticalPL,
    apply,
    commutator_factorization,
    dump_certificate,
    dump_spec,
    invert,
    load_certificate,
    load_spec,
    power_word_decomposition,
    verify_identity,
)
from homeocomm.corpus import cylinder_corpus, line_corpus
from homeocomm.serialize import dumps, encode_map

CIRCLE = FiberKind.CIRCLE
LINE = FiberKind.POINT

steps = st.floats(0.05, 5.0, allow_nan=False)
levels = st.floats(-20.0, 20.0, allow_nan=False)


def increasing(n_min=2, n_max=6):
    return st.tuples(levels, st.lists(steps, min_size=n_min - 1, max_size=n_max - 1)).map(
        lambda p: np.cumsum([p[0]] + p[1]))


@st.composite
def vertical(draw):
    xs, ys = draw(increasing()), None
    ys = draw(increasing(len(xs), len(xs)))
    return VerticalPL(np.column_stack([xs, ys]))


@st.composite
def smooth(draw):
    xs = draw(increasing())
    ys = draw(increasing(len(xs), len(xs)))
    return MonotoneSmooth(np.column_stack([xs, ys]))


@st.composite
def twist(draw):
    ts = draw(increasing(1, 4))
    turns = draw(st.lists(st.floats(-1, 1), min_size=len(ts), max_size=len(ts)))
    return Twist(np.column_stack([ts, turns]))


@st.composite
def bump(draw):
    lo = draw(levels)
    hi = lo + draw(st.floats(0.5, 5.0))
    K = draw(st.sampled_from([4, 8]))
    a = draw(st.lists(st.floats(0.1, 0.9), min_size=K, max_size=K))
    b = draw(st.lists(st.floats(0.1, 0.9), min_size=K, max_size=K))
    src = lo + (hi - lo) * np.array(a)[:, None]
    dst = lo + (hi - lo) * np.array(b)[:, None]
    return FiberBump((lo, hi), src, dst, fiber=CIRCLE)


leaves = st.one_of(st.just(Identity()), vertical(), smooth(), twist(), bump())
trees = st.recursive(
    leaves,
    lambda kids: st.one_of(
        st.lists(kids, min_size=1, max_size=3).map(Compose),
        kids.map(Inverse),
        st.tuples(kids, st.integers(-3, 3)).map(lambda p: Power(*p)),
    ),
    max_leaves=6,
)


@settings(max_examples=80, deadline=None)
@given(trees)
def test_spec_roundtrip_is_byte_identical(m):
    text = dump_spec(SpecDocument(CIRCLE, m))
    again = dump_spec(load_spec(text))
    assert again == text


@settings(max_examples=40, deadline=None)
@given(trees, st.integers(0, 1000))
def test_loaded_spec_evaluates_identically(m, seed):
    rng = np.random.default_rng(seed)
    th, t = rng.uniform(0, 1, 16), rng.uniform(-25, 25, 16)
    m2 = load_spec(dump_spec(SpecDocument(CIRCLE, m))).map
    a, b = apply(m, th, t), apply(m2, th, t)
    assert a[0].tolist() == b[0].tolist() and a[1].tolist() == b[1].tolist()


def test_hand_written_spec_is_canonical():
    text = (
        '{\n  "schema": "1",\n  "fiber": "point",\n  "map": {\n'
        '    "node": "VerticalPL",\n    "breakpoints": [[0, 1], [1, 2.5]]\n  },\n'
        '  "options": {\n    "tol": 1e-09,\n    "window": [-10, 10]\n  }\n}\n'
    )
    spec = load_spec(text)
    assert spec.options == {"tol": 1e-9, "window": [-10, 10]}
    assert dump_spec(spec) == text


def test_shared_subtrees_written_once():
    m = line_corpus(1)[0]
    doc = encode_map(Compose([m, Inverse(m)]))
    assert doc["children"][0]["id"] == "n1"
    assert doc["children"][1]["child"] == {"ref": "n1"}
    m2 = load_spec(dumps({"schema": "1", "fiber": "point", "map": doc})).map
    assert m2.children()[1].child is m2.children()[0]


@pytest.mark.parametrize("text", [
    "",
    "[]",
    '{"schema": "2", "fiber": "point", "map": {"node": "Identity"}}',
    '{"schema": "1", "fiber": "torus", "map": {"node": "Identity"}}',
    '{"schema": "1", "fiber": "point"}',
    '{"schema": "1", "fiber": "point", "map": {"node": "Spiral"}}',
    '{"schema": "1", "fiber": "point", "map": {"node": "BandShift", "shift": 1}}',
    '{"schema": "1", "fiber": "point", "map": {"node": "VerticalPL", "breakpoints": [[0, 0]]}}',
    '{"schema": "1", "fiber": "point", "map": {"node": "VerticalPL",'
    ' "breakpoints": [[0, 0], [1, -1]]}}',
    '{"schema": "1", "fiber": "point", "map": {"node": "Twist", "alpha": [[0, 0.1]]}}',
    '{"schema": "1", "fiber": "point", "map": {"node": "Power",'
    ' "child": {"node": "Identity"}, "exponent": 1.5}}',
    '{"schema": "1", "fiber": "point", "map": {"ref": "nowhere"}}',
    '{"schema": "1", "fiber": "point", "map": {"node": "Identity"}, "extra": 1}',
    '{"schema": "1", "fiber": "point", "map": {"node": "Identity"}, "options": {"speed": 1}}',
])
def test_invalid_specs_rejected(text):
    with pytest.raises(InvalidSpec):
        load_spec(text)


def test_integer_valued_floats_written_as_integers():
    text = dump_spec(SpecDocument(LINE, VerticalPL([(0.0, 1.0), (2.0, 4.5)])))
    assert '"breakpoints": [[0, 1], [2, 4.5]]' in text


# certificates

@pytest.fixture(scope="module")
def line_cert():
    return commutator_factorization(line_corpus(1)[0])


def test_certificate_contents(line_cert):
    doc = json.loads(dump_certificate(line_cert))
    assert list(doc)[:5] == ["schema", "kind", "fiber", "claim", "input"]
    assert doc["report"]["pass"] is True and doc["pass"] is True
    ms = [v for _, v in doc["lattice"]["m"]]
    assert ms == sorted(ms) and all(float(v).is_integer() for v in ms)


def test_certificate_roundtrip_rebuilds_factors(line_cert):
    text = dump_certificate(line_cert)
    lc = load_certificate(text)
    rep = verify_identity(lc.input, lc.product(), tol=1e-9)
    assert rep.max_error == line_cert.report.max_error
    assert lc.suited().boundaries.window(-50, 50) == line_cert.details["suited"].boundaries.window(-50, 50)


def test_certificate_dump_is_deterministic():
    f = cylinder_corpus(1)[0]
    a = dump_certificate(commutator_factorization(f))
    b = dump_certificate(commutator_factorization(f))
    assert a == b


def test_power_word_certificate_roundtrip():
    cert = power_word_decomposition(VerticalPL.translation(3.0), [2, 3])
    lc = load_certificate(dump_certificate(cert))
    assert lc.factors["p"] == [2, 3]
    assert verify_identity(lc.input, lc.product(), tol=1e-6).passed


def test_certificate_rejects_garbage():
    with pytest.raises(InvalidSpec):
        load_certificate("{}")
    with pytest.raises(InvalidSpec):
        load_certificate('{"schema": "1", "kind": "commutator", "fiber": "point"}')
