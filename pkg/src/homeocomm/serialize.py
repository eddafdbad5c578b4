"""
JSON documents for map specs and factorization certificates (schema "1").

A map is a tree of ``{"node": <kind>, ...}`` objects with a fixed field
order per kind.  Subtrees shared inside one document are written once,
tagged ``"id"``, and referenced elsewhere as ``{"ref": <id>}``.  Spec
documents admit only the primitive kinds; certificates may also contain
the lazy construction nodes (band shifts, straighteners, conjugators),
which are stored as recipes and rebuilt deterministically on load.

Text is canonical: two-space indentation, numeric arrays on one line,
integer-valued floats written as integers.  For canonical input
``dump(load(text)) == text`` byte for byte.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import FiberMismatch, HomeoError, InvalidSpec, NotOrientationPreserving
from .maps import (
    Compose,
    FiberBump,
    FiberKind,
    Identity,
    Inverse,
    MapExpr,
    MonotoneSmooth,
    Power,
    Twist,
    VerticalPL,
)
from .suited import (
    ArithmeticBands,
    LoxodromicCertificate,
    StridedBands,
    SuitedDecomposition,
    _SuitedView,
)

SCHEMA = "1"
PRIMITIVE_KINDS = ("Identity", "VerticalPL", "Twist", "FiberBump", "MonotoneSmooth",
                   "Compose", "Inverse", "Power")
OPTION_KEYS = ("tol", "window", "grid", "horizon", "resolution", "margin",
               "search_window", "iterations", "exponents")
FIBERS = {"point": FiberKind.POINT, "circle": FiberKind.CIRCLE}
FIBER_NAMES = {v: k for k, v in FIBERS.items()}

# integers beyond 2**53 are not exactly representable as floats
_EXACT_INT = 2.0 ** 53


# ---------------------------------------------------------------- text layer

def _number(x):
    x = float(x)
    if not math.isfinite(x):
        raise InvalidSpec("non-finite number in document")
    if x.is_integer() and abs(x) < _EXACT_INT:
        return int(x)
    return x


def plain(v):
    """Convert numpy values and tuples to JSON-ready Python values."""
    if isinstance(v, dict):
        return {k: plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [plain(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return _number(v)
    return v


def _flat(v):
    if isinstance(v, list):
        return all(_flat(x) for x in v) and not any(isinstance(x, dict) for x in v)
    return not isinstance(v, dict)


def _emit(v, indent, out):
    pad = "  " * indent
    if isinstance(v, dict):
        if not v or list(v) == ["ref"]:
            out.append(json.dumps(v, separators=(", ", ": ")))
            return
        out.append("{\n")
        items = list(v.items())
        for i, (k, x) in enumerate(items):
            out.append(f"{pad}  {json.dumps(k)}: ")
            _emit(x, indent + 1, out)
            out.append(",\n" if i < len(items) - 1 else "\n")
        out.append(pad + "}")
    elif isinstance(v, list) and not _flat(v):
        out.append("[\n")
        for i, x in enumerate(v):
            out.append(pad + "  ")
            _emit(x, indent + 1, out)
            out.append(",\n" if i < len(v) - 1 else "\n")
        out.append(pad + "]")
    else:
        out.append(json.dumps(v, separators=(", ", ": "), allow_nan=False))


def dumps(doc):
    """Canonical text of a JSON-ready document (insertion order kept)."""
    out = []
    _emit(plain(doc), 0, out)
    out.append("\n")
    return "".join(out)


def loads(text):
    try:
        doc = json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise InvalidSpec(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise InvalidSpec("document must be a JSON object")
    if doc.get("schema") != SCHEMA:
        raise InvalidSpec(f"unsupported schema {doc.get('schema')!r}; expected {SCHEMA!r}")
    return doc


# ---------------------------------------------------------------- encoding

def _fields(obj):
    """``(kind, [(key, value)])``; values are data or encodable children."""
    if isinstance(obj, Identity):
        return "Identity", []
    if isinstance(obj, VerticalPL):
        return "VerticalPL", [("breakpoints", obj.breakpoints)]
    if isinstance(obj, Twist):
        return "Twist", [("alpha", obj.alpha)]
    if isinstance(obj, FiberBump):
        f = [("band", list(obj.band)), ("src", obj.src), ("dst", obj.dst)]
        if obj.angles is not None:
            f.append(("angles", obj.angles))
        if obj.src_lo is not None:
            f.append(("src_lo", obj.src_lo))
        if obj.dst_lo is not None:
            f.append(("dst_lo", obj.dst_lo))
        return "FiberBump", f
    if isinstance(obj, MonotoneSmooth):
        return "MonotoneSmooth", [("knots", obj.knots)]
    if isinstance(obj, Compose):
        return "Compose", [("children", list(obj.children()))]
    if isinstance(obj, Inverse):
        return "Inverse", [("child", obj.child)]
    if isinstance(obj, Power):
        return "Power", [("child", obj.child), ("exponent", obj.exponent)]
    from .factor import BandShift, BandStraighteners, Conjugator

    if isinstance(obj, BandShift):
        return "BandShift", [("bands", obj.bands), ("shift", obj.shift)]
    if isinstance(obj, BandStraighteners):
        return "BandStraighteners", [("map", obj.f), ("suited", obj.suited),
                                     ("resolution", obj.resolution)]
    if isinstance(obj, Conjugator):
        return "Conjugator", [("sigma", obj.sigma), ("tau", obj.tau),
                              ("resolution", obj.resolution)]
    if isinstance(obj, SuitedDecomposition):
        r = obj.recipe()
        return "Suited", [("map", obj.f), ("t0", r["t0"]), ("margin", r["margin"]),
                          ("window", r["window"]), ("horizon", r["horizon"]),
                          ("resolution", r["resolution"])]
    if isinstance(obj, _SuitedView):
        return "SuitedBands", [("suited", obj.suited), ("which", obj.which)]
    if isinstance(obj, ArithmeticBands):
        return "ArithmeticBands", [("origin", obj.origin), ("step", obj.step)]
    if isinstance(obj, StridedBands):
        return "StridedBands", [("base", obj.base), ("stride", obj.stride)]
    if isinstance(obj, LoxodromicCertificate):
        return "Loxodromic", [("map", obj.map), ("bands", obj.bands), ("sink", obj.sink)]
    raise InvalidSpec(f"cannot serialize {type(obj).__name__}")


def _encodable(v):
    return not isinstance(v, (np.ndarray, list, tuple, str, int, float, np.generic))


def _children(fields):
    for _, v in fields:
        if isinstance(v, list):
            yield from (x for x in v if _encodable(x))
        elif _encodable(v):
            yield v


class Encoder:
    """Writes several trees into one document, sharing common subtrees.

    Call :meth:`scan` on every root first, then :meth:`encode` them in
    document order.
    """

    def __init__(self):
        self._count = {}
        self._ids = {}
        self._keep = []

    def scan(self, obj):
        stack = [obj]
        while stack:
            o = stack.pop()
            key = id(o)
            seen = key in self._count
            self._count[key] = self._count.get(key, 0) + 1
            if not seen:
                self._keep.append(o)
                stack.extend(_children(_fields(o)[1]))
        return self

    def encode(self, obj):
        if isinstance(obj, list):
            return [self.encode(o) for o in obj]
        key = id(obj)
        if key in self._ids:
            return {"ref": self._ids[key]}
        kind, fields = _fields(obj)
        out = {"node": kind}
        if self._count.get(key, 0) > 1 and kind != "Identity":
            self._ids[key] = out["id"] = f"n{len(self._ids) + 1}"
        for k, v in fields:
            if isinstance(v, list) and any(_encodable(x) for x in v):
                out[k] = [self.encode(x) for x in v]
            elif _encodable(v):
                out[k] = self.encode(v)
            else:
                out[k] = plain(v)
        return out


def encode_map(m):
    return Encoder().scan(m).encode(m)


# ---------------------------------------------------------------- decoding

def _collect_ids(raw, table):
    if isinstance(raw, dict):
        if "id" in raw:
            if raw["id"] in table:
                raise InvalidSpec(f"duplicate id {raw['id']!r}")
            table[raw["id"]] = raw
        for v in raw.values():
            _collect_ids(v, table)
    elif isinstance(raw, list):
        for v in raw:
            _collect_ids(v, table)


class Decoder:
    """Rebuilds objects from a document; ``primitive`` rejects recipe nodes."""

    def __init__(self, doc, fiber, primitive=True):
        self.fiber = fiber
        self.primitive = primitive
        self._raw = {}
        self._built = {}
        self._busy = set()
        self.made = []
        _collect_ids(doc, self._raw)

    def decode(self, raw):
        if isinstance(raw, list):
            return [self.decode(r) for r in raw]
        if not isinstance(raw, dict):
            raise InvalidSpec(f"expected a node object, got {type(raw).__name__}")
        if "ref" in raw:
            ref = raw["ref"]
            if ref not in self._raw:
                raise InvalidSpec(f"dangling reference {ref!r}")
            raw = self._raw[ref]
        ident = raw.get("id")
        if ident is not None and ident in self._built:
            return self._built[ident]
        if ident in self._busy:
            raise InvalidSpec(f"reference cycle through {ident!r}")
        if ident is not None:
            self._busy.add(ident)
        try:
            obj = self._node(raw)
        except HomeoError:
            raise
        except (ValueError, TypeError, KeyError, IndexError) as exc:
            raise InvalidSpec(f"bad {raw.get('node')!r} node: {exc}") from exc
        finally:
            self._busy.discard(ident)
        if ident is not None:
            self._built[ident] = obj
        self.made.append(obj)
        return obj

    def _get(self, raw, key):
        if key not in raw:
            raise InvalidSpec(f"{raw.get('node')!r} node lacks field {key!r}")
        return raw[key]

    def _map(self, raw, key):
        m = self.decode(self._get(raw, key))
        if not isinstance(m, MapExpr):
            raise InvalidSpec(f"field {key!r} must be a map")
        return m

    def _node(self, raw):
        kind = raw.get("node")
        if kind not in PRIMITIVE_KINDS and self.primitive:
            raise InvalidSpec(f"unknown node kind {kind!r}")
        g = lambda k: self._get(raw, k)
        try:
            if kind == "Identity":
                return Identity()
            if kind == "VerticalPL":
                return VerticalPL(g("breakpoints"))
            if kind == "Twist":
                if self.fiber is FiberKind.POINT:
                    raise InvalidSpec("Twist needs the circle fiber")
                return Twist(g("alpha"))
            if kind == "FiberBump":
                return FiberBump(g("band"), g("src"), g("dst"), fiber=self.fiber,
                                 angles=raw.get("angles"), src_lo=raw.get("src_lo"),
                                 dst_lo=raw.get("dst_lo"))
            if kind == "MonotoneSmooth":
                return MonotoneSmooth(g("knots"))
            if kind == "Compose":
                kids = g("children")
                if not isinstance(kids, list):
                    raise InvalidSpec("Compose children must be a list")
                return Compose([self._map({"c": k}, "c") for k in kids])
            if kind == "Inverse":
                return Inverse(self._map(raw, "child"))
            if kind == "Power":
                p = g("exponent")
                if not isinstance(p, int) or isinstance(p, bool):
                    raise InvalidSpec("Power exponent must be an integer")
                return Power(self._map(raw, "child"), p)
        except NotOrientationPreserving as exc:
            raise InvalidSpec(f"map is not orientation preserving: {exc}") from exc
        except FiberMismatch as exc:
            raise InvalidSpec(str(exc)) from exc
        return self._recipe(kind, raw, g)

    def _recipe(self, kind, raw, g):
        from .factor import BandShift, BandStraighteners, Conjugator

        if kind == "BandShift":
            return BandShift(self.decode(g("bands")), int(g("shift")))
        if kind == "BandStraighteners":
            return BandStraighteners(self._map(raw, "map"), self.decode(g("suited")),
                                     int(g("resolution")))
        if kind == "Conjugator":
            return Conjugator(self.decode(g("sigma")), self.decode(g("tau")),
                              int(g("resolution")))
        if kind == "Suited":
            return SuitedDecomposition(self._map(raw, "map"), g("t0"), g("margin"),
                                       int(g("window")), int(g("horizon")),
                                       int(g("resolution")), self.fiber)
        if kind == "SuitedBands":
            suited = self.decode(g("suited"))
            which = g("which")
            if which not in ("boundaries", "markers"):
                raise InvalidSpec(f"unknown band family {which!r}")
            return getattr(suited, which)
        if kind == "ArithmeticBands":
            return ArithmeticBands(g("origin"), g("step"))
        if kind == "StridedBands":
            return StridedBands(self.decode(g("base")), int(g("stride")))
        if kind == "Loxodromic":
            sink = g("sink")
            if sink not in (1, -1):
                raise InvalidSpec("sink must be +1 or -1")
            return LoxodromicCertificate(self._map(raw, "map"), self.decode(g("bands")),
                                         sink, fiber=self.fiber)
        raise InvalidSpec(f"unknown node kind {kind!r}")


def _fiber(doc):
    name = doc.get("fiber")
    if name not in FIBERS:
        raise InvalidSpec(f"fiber must be 'point' or 'circle', got {name!r}")
    return FIBERS[name]


def decode_map(raw, fiber, primitive=True):
    m = Decoder(raw, fiber, primitive).decode(raw)
    if not isinstance(m, MapExpr):
        raise InvalidSpec("document root is not a map")
    if fiber is FiberKind.POINT and m.fiber is FiberKind.CIRCLE:
        raise InvalidSpec("circle-fiber map in a point-fiber document")
    return m


# ---------------------------------------------------------------- specs

@dataclass
class SpecDocument:
    fiber: FiberKind
    map: MapExpr
    options: dict = field(default_factory=dict)


def _options(raw):
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise InvalidSpec("options must be an object")
    unknown = set(raw) - set(OPTION_KEYS)
    if unknown:
        raise InvalidSpec(f"unknown options {sorted(unknown)}")
    return {k: raw[k] for k in OPTION_KEYS if k in raw}


def spec_document(m, fiber, options=None):
    doc = {"schema": SCHEMA, "fiber": FIBER_NAMES[fiber], "map": encode_map(m)}
    opts = _options(options)
    if opts:
        doc["options"] = opts
    return doc


def dump_spec(spec):
    return dumps(spec_document(spec.map, spec.fiber, spec.options))


def load_spec(text):
    """Parse a spec document; only primitive node kinds are accepted."""
    doc = loads(text)
    unknown = set(doc) - {"schema", "fiber", "map", "options"}
    if unknown:
        raise InvalidSpec(f"unknown spec fields {sorted(unknown)}")
    fiber = _fiber(doc)
    if "map" not in doc:
        raise InvalidSpec("spec lacks a map")
    return SpecDocument(fiber, decode_map(doc["map"], fiber), _options(doc.get("options")))


# ---------------------------------------------------------------- certificates

CLAIMS = {
    "commutator": "input = a o b o a^-1 o b^-1",
    "power_word": "input = g_1^p_1 o ... o g_r^p_r",
}


def lattice(cert, window=None):
    """Materialized ``(k, m_k)`` and ``(k, t_k)`` inside the report window."""
    suited = cert.details.get("suited")
    if suited is None:
        return None
    lo, hi = window or cert.report.window
    return {"m": [list(p) for p in suited.boundaries.window(lo, hi)],
            "t": [list(p) for p in suited.markers.window(lo, hi)]}


def certificate_document(cert, options=None):
    enc = Encoder().scan(cert.input)
    if cert.kind == "commutator":
        roots = [cert.factors["a"], cert.factors["b"]]
    else:
        roots = list(cert.factors["g"])
    for r in roots:
        enc.scan(r)
    doc = {"schema": SCHEMA, "kind": cert.kind, "fiber": FIBER_NAMES[cert.fiber],
           "claim": CLAIMS[cert.kind], "input": enc.encode(cert.input)}
    if cert.kind == "commutator":
        doc["factors"] = {"a": enc.encode(cert.factors["a"]),
                          "b": enc.encode(cert.factors["b"])}
    else:
        doc["factors"] = {"g": [enc.encode(g) for g in cert.factors["g"]],
                          "p": [int(p) for p in cert.factors["p"]]}
    doc["report"] = cert.report.to_dict()
    doc["pass"] = bool(cert.passed)
    if cert.kind == "commutator":
        lat = lattice(cert)
        if lat is not None:
            doc["lattice"] = lat
    else:
        doc["nontrivial"] = {"displacement": cert.details["displacement"],
                             "moved": cert.details["nontrivial"]}
    opts = _options(options)
    if opts:
        doc["options"] = opts
    return doc


def dump_certificate(cert, options=None):
    return dumps(certificate_document(cert, options))


@dataclass
class LoadedCertificate:
    kind: str
    fiber: FiberKind
    input: MapExpr
    factors: dict
    report: dict
    passed: bool
    lattice: dict | None
    options: dict
    raw: dict
    objects: list = field(default_factory=list)

    def suited(self):
        """The suited decomposition rebuilt from the factor recipes, if any."""
        return next((o for o in self.objects if isinstance(o, SuitedDecomposition)), None)

    def product(self):
        from .maps import compose, invert

        if self.kind == "commutator":
            a, b = self.factors["a"], self.factors["b"]
            return compose([a, b, invert(a), invert(b)])
        return compose([Power(g, p) for g, p in zip(self.factors["g"], self.factors["p"])])


def load_certificate(text):
    """Parse a certificate and rebuild its factors from their recipes."""
    doc = loads(text)
    for key in ("kind", "fiber", "input", "factors", "report"):
        if key not in doc:
            raise InvalidSpec(f"certificate lacks {key!r}")
    kind = doc["kind"]
    if kind not in CLAIMS:
        raise InvalidSpec(f"unknown certificate kind {kind!r}")
    fiber = _fiber(doc)
    dec = Decoder(doc, fiber, primitive=False)
    m = dec.decode(doc["input"])
    fac = doc["factors"]
    if not isinstance(fac, dict):
        raise InvalidSpec("factors must be an object")
    if kind == "commutator":
        factors = {"a": dec.decode(fac.get("a")), "b": dec.decode(fac.get("b"))}
    else:
        gs, ps = fac.get("g"), fac.get("p")
        if not isinstance(gs, list) or not isinstance(ps, list) or len(gs) != len(ps):
            raise InvalidSpec("power-word factors need matching 'g' and 'p' lists")
        factors = {"g": dec.decode(gs), "p": [int(p) for p in ps]}
    rep = doc["report"]
    if not isinstance(rep, dict) or not {"window", "grid", "tolerance", "max_error"} <= set(rep):
        raise InvalidSpec("malformed report")
    return LoadedCertificate(kind, fiber, m, factors, rep, bool(doc.get("pass")),
                             doc.get("lattice"), _options(doc.get("options")), doc, dec.made)
