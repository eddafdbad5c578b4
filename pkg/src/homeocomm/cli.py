"""
Command-line front end.

    homeocomm factor SPEC -o CERT
    homeocomm powers SPEC --exponents 2,3 -o CERT
    homeocomm verify CERT
    homeocomm plot CERT -o SVG

Exit codes: 0 pass, 2 invalid input (spec, certificate, exponents, or a
map that does not preserve orientation), 3 construction failure (no
suited lattice, non-graph image, band or loxodromy violation, overflow),
4 tolerance exceeded.  Results go to files; stdout is a short summary.
"""

import argparse
import sys

import numpy as np

from .curves import DEFAULT_RESOLUTION, level_image
from .errors import (
    BandViolation,
    EndsMismatch,
    FiberMismatch,
    GraphViolation,
    InvalidSpec,
    NonFinite,
    NotLoxodromic,
    NotOrientationPreserving,
    NotProper,
    ToleranceExceeded,
)
from .factor import commutator_factorization, default_tol, power_word_decomposition
from .maps import FiberKind, apply, compose, invert
from .serialize import dump_certificate, lattice, load_certificate, load_spec
from .suited import DEFAULT_HORIZON, DEFAULT_MARGIN, DEFAULT_WINDOW
from .verify import default_grid, default_window, verify_identity

EXIT_OK, EXIT_INVALID, EXIT_CONSTRUCTION, EXIT_TOLERANCE = 0, 2, 3, 4
INVALID = (InvalidSpec, NotOrientationPreserving, FiberMismatch)
CONSTRUCTION = (NotProper, GraphViolation, BandViolation, NotLoxodromic, EndsMismatch,
                NonFinite)


class UsageError(InvalidSpec):
    pass


def _floats(text, n=None):
    try:
        vals = [float(v) for v in str(text).split(",")]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from exc
    if n is not None and len(vals) != n:
        raise UsageError(f"expected {n} numbers, got {text!r}")
    return vals


def _ints(text):
    try:
        return [int(v) for v in str(text).split(",")]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from exc


def _grid(value, fiber):
    if isinstance(value, str):
        value = _ints(value)
    value = [int(v) for v in np.atleast_1d(value)]
    if len(value) == 1:
        value = [1 if fiber is FiberKind.POINT else value[0], value[0]]
    if len(value) != 2 or min(value) < 1:
        raise UsageError("grid must be N or N_THETA,N_T with positive counts")
    return tuple(value)


def _window(value):
    if isinstance(value, str):
        value = _floats(value, 2)
    lo, hi = (float(v) for v in value)
    if not lo < hi:
        raise UsageError("window must satisfy lo < hi")
    return (lo, hi)


def resolve_options(args, spec_options, fiber):
    """Flags override spec options, which override the defaults."""
    opts = dict(spec_options)
    for key in ("tol", "window", "grid", "horizon", "resolution", "margin", "search_window",
                "iterations", "exponents"):
        v = getattr(args, key, None)
        if v is not None:
            opts[key] = v
    out = {
        "tol": float(opts.get("tol", default_tol(fiber))),
        "window": _window(opts.get("window", default_window(fiber))),
        "grid": _grid(opts.get("grid", default_grid(fiber)), fiber),
        "horizon": int(opts.get("horizon", DEFAULT_HORIZON)),
        "resolution": int(opts.get("resolution", DEFAULT_RESOLUTION)),
        "margin": float(opts.get("margin", DEFAULT_MARGIN)),
        "search_window": int(opts.get("search_window", DEFAULT_WINDOW)),
        "iterations": int(opts.get("iterations", 100)),
    }
    if not out["tol"] > 0:
        raise UsageError("tolerance must be positive")
    if out["resolution"] < 16:
        raise UsageError("resolution must be at least 16")
    if "exponents" in opts:
        ex = opts["exponents"]
        out["exponents"] = _ints(ex) if isinstance(ex, str) else [int(p) for p in ex]
    return out


def _read(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _certificate_options(opts):
    keep = ("tol", "window", "grid", "horizon", "resolution", "margin", "search_window",
            "iterations", "exponents")
    return {k: list(opts[k]) if isinstance(opts[k], tuple) else opts[k]
            for k in keep if k in opts}


def _finish(cert, opts, out):
    _write(out, dump_certificate(cert, _certificate_options(opts)))
    print(f"{cert.kind}: {cert.report.summary()} -> {out}")
    return EXIT_OK if cert.passed else EXIT_TOLERANCE


def cmd_factor(args):
    spec = load_spec(_read(args.spec))
    o = resolve_options(args, spec.options, spec.fiber)
    cert = commutator_factorization(
        spec.map, spec.fiber, o["window"], o["grid"], o["tol"], o["margin"], o["resolution"],
        o["horizon"], o["search_window"], o["iterations"], strict=False)
    return _finish(cert, o, args.output)


def cmd_powers(args):
    spec = load_spec(_read(args.spec))
    o = resolve_options(args, spec.options, spec.fiber)
    exps = o.get("exponents")
    if exps is None:
        raise UsageError("powers needs --exponents")
    if len(exps) < 2 or any(p == 0 for p in exps):
        raise UsageError("exponents must be at least two nonzero integers")
    cert = power_word_decomposition(
        spec.map, exps, spec.fiber, o["window"], o["grid"], o["tol"], o["margin"],
        o["resolution"], o["horizon"], o["search_window"], o["iterations"], strict=False)
    return _finish(cert, o, args.output)


def cmd_verify(args):
    """Rebuild the factors of a certificate and re-run its grid check."""
    lc = load_certificate(_read(args.certificate))
    r = lc.report
    rep = verify_identity(lc.input, lc.product(), tuple(r["window"]), tuple(r["grid"]),
                          float(r["tolerance"]), lc.fiber)
    ok = rep.passed
    print(f"{lc.kind}: {rep.summary()} (recorded max_error={float(r['max_error']):.3e})")
    if lc.kind == "power_word":
        for i, g in enumerate(lc.factors["g"]):
            theta, t = _grid_points(lc.fiber, rep.window, rep.grid)
            th2, t2 = apply(g, theta, t)
            moved = float(np.max(np.abs(t2 - t)))
            if theta is not None:
                moved = max(moved, float(np.max(np.abs(np.mod(th2 - theta + 0.5, 1) - 0.5))))
            nontrivial = moved > rep.tolerance
            ok = ok and nontrivial
            print(f"  g_{i + 1}: max displacement {moved:.3e}"
                  + ("" if nontrivial else " (trivial)"))
    if lc.lattice is not None:
        suited = lc.suited()
        if suited is None:
            raise InvalidSpec("certificate records a lattice but no suited recipe")
        rebuilt = {"m": [list(p) for p in suited.boundaries.window(*rep.window)],
                   "t": [list(p) for p in suited.markers.window(*rep.window)]}
        same = all(_pairs(rebuilt[k]) == _pairs(lc.lattice.get(k, [])) for k in ("m", "t"))
        print(f"  lattice: {'reproduced' if same else 'MISMATCH'}")
        ok = ok and same
    return EXIT_OK if ok else EXIT_TOLERANCE


def _pairs(rows):
    return [(int(k), float(v)) for k, v in rows]


def _grid_points(fiber, window, grid):
    from .curves import grid_points

    return grid_points(fiber, window, grid)


# ---------------------------------------------------------------- plotting

WIDTH, HEIGHT, PAD = 800, 600, 40
ORBIT_STARTS = 8
ORBIT_STEPS = 100


def _fmt(x):
    return f"{x:.3f}".rstrip("0").rstrip(".") if x == x else "0"


def _level_attr(v):
    v = float(v)
    return str(int(v)) if v.is_integer() else repr(v)


class _Canvas:
    def __init__(self, window, xspan):
        self.lo, self.hi = window
        self.x0, self.x1 = xspan
        self.parts = []

    def x(self, u):
        return PAD + (u - self.x0) / (self.x1 - self.x0) * (WIDTH - 2 * PAD)

    def y(self, t):
        return HEIGHT - PAD - (t - self.lo) / (self.hi - self.lo) * (HEIGHT - 2 * PAD)

    def inside(self, t):
        return self.lo <= t <= self.hi

    def hline(self, level, cls, extra=""):
        y = _fmt(self.y(level))
        self.parts.append(
            f'<line class="{cls}" data-level="{_level_attr(level)}" x1="{_fmt(self.x(self.x0))}"'
            f' y1="{y}" x2="{_fmt(self.x(self.x1))}" y2="{y}"{extra}/>')

    def path(self, us, ts, cls, level=None):
        pts = [f"{_fmt(self.x(u))},{_fmt(self.y(t))}" for u, t in zip(us, ts)]
        attr = "" if level is None else f' data-level="{_level_attr(level)}"'
        self.parts.append(f'<path class="{cls}"{attr} data-samples="{len(pts)}"'
                          f' d="M{" L".join(pts)}"/>')

    def dots(self, us, ts, cls):
        for u, t in zip(us, ts):
            if self.inside(t):
                self.parts.append(f'<circle class="{cls}" cx="{_fmt(self.x(u))}"'
                                  f' cy="{_fmt(self.y(t))}" r="2"/>')

    def render(self, title):
        style = (".band{stroke:#444;stroke-width:1}.marker{stroke:#1f77b4;fill:none;"
                 "stroke-dasharray:4 3}.image{stroke:#d62728;fill:none}"
                 ".orbit-g{fill:#2ca02c}.orbit-gf{fill:#9467bd}.orbit-map{fill:#8c564b}")
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}"'
                f' viewBox="0 0 {WIDTH} {HEIGHT}">\n<style>{style}</style>\n'
                f'<title>{title}</title>\n'
                f'<rect x="{PAD}" y="{PAD}" width="{WIDTH - 2 * PAD}" height="{HEIGHT - 2 * PAD}"'
                f' fill="none" stroke="#bbb"/>\n')
        return head + "\n".join(self.parts) + "\n</svg>\n"


def _orbit(m, fiber, theta, t, steps, window):
    """Forward orbit points as (step, theta, t), stopping outside the window."""
    out = [(0, theta, t)]
    th = None if theta is None else theta.copy()
    tt = t.copy()
    for n in range(1, steps + 1):
        th, tt = apply(m, th, tt)
        out.append((n, th, tt))
        if np.all((tt < window[0]) | (tt > window[1])):
            break
    return out


def _draw_orbits(cv, m, fiber, starts, cls, steps, window):
    theta, t = starts
    for n, th, tt in _orbit(m, fiber, theta, t, steps, window):
        us = th if fiber is FiberKind.CIRCLE else np.full(tt.shape, n / steps)
        cv.dots(us, tt, cls)


def plot_certificate(lc):
    """Deterministic SVG of a loaded certificate."""
    fiber = lc.fiber
    window = tuple(float(v) for v in lc.report["window"])
    res = int(lc.options.get("resolution", DEFAULT_RESOLUTION))
    cv = _Canvas(window, (0.0, 1.0))
    f = lc.input
    if lc.kind == "commutator":
        lat = lc.lattice or {"m": [], "t": []}
        for _, level in lat["m"]:
            cv.hline(level, "band")
        th = (np.arange(res) / res) if fiber is FiberKind.CIRCLE else np.array([0.0, 1.0])
        for _, level in lat["t"]:
            if fiber is FiberKind.CIRCLE:
                cv.path(th, np.full(res, float(level)), "marker", level)
                img = level_image(f, level, res, fiber=fiber)
                cv.path(img.thetas, img.values, "image", level)
            else:
                cv.hline(level, "marker")
                _, im = apply(f, None, np.array([float(level)]))
                cv.hline(float(im[0]), "image")
        a = lc.factors["a"]
        g = invert(a)
        bands = sorted(float(v) for _, v in lat["m"])
        lo, hi = (bands[0], bands[1]) if len(bands) > 1 else window
        u = (np.arange(ORBIT_STARTS) + 0.5) / ORBIT_STARTS
        starts = (u.copy() if fiber is FiberKind.CIRCLE else None, lo + (hi - lo) * u)
        if lat["m"]:
            _draw_orbits(cv, g, fiber, starts, "orbit-g", ORBIT_STEPS, window)
            _draw_orbits(cv, compose([g, f]), fiber, starts, "orbit-gf", ORBIT_STEPS, window)
    else:
        u = (np.arange(ORBIT_STARTS) + 0.5) / ORBIT_STARTS
        starts = (u.copy() if fiber is FiberKind.CIRCLE else None,
                  window[0] + (window[1] - window[0]) * u)
        _draw_orbits(cv, f, fiber, starts, "orbit-map", ORBIT_STEPS, window)
    title = f"{lc.kind} certificate ({'circle' if fiber is FiberKind.CIRCLE else 'point'} fiber)"
    return cv.render(title)


def cmd_plot(args):
    lc = load_certificate(_read(args.certificate))
    svg = plot_certificate(lc)
    _write(args.output, svg)
    print(f"plot -> {args.output}")
    return EXIT_OK


# ---------------------------------------------------------------- entry

def _add_flags(p):
    p.add_argument("--tol", type=float, help="verification tolerance")
    p.add_argument("--window", help="verification window LO,HI")
    p.add_argument("--grid", help="grid N (line) or N_THETA,N_T (cylinder)")
    p.add_argument("--horizon", type=int, help="max band index explored")
    p.add_argument("--resolution", type=int, help="curve samples per turn")
    p.add_argument("--margin", type=float, help="suited containment margin")
    p.add_argument("--search-window", dest="search_window", type=int,
                   help="integer search reach for band boundaries")
    p.add_argument("--iterations", type=int, help="orbit steps in dynamics checks")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="homeocomm",
        description="Commutator and power-word factorizations of homeomorphisms "
                    "of R and S^1 x R.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("factor", help="write a map as a single commutator")
    p.add_argument("spec")
    p.add_argument("-o", "--output", required=True)
    _add_flags(p)
    p.set_defaults(run=cmd_factor)
    p = sub.add_parser("powers", help="write a map as a product of powers")
    p.add_argument("spec")
    p.add_argument("--exponents", help="comma-separated nonzero integers, e.g. 2,3")
    p.add_argument("-o", "--output", required=True)
    _add_flags(p)
    p.set_defaults(run=cmd_powers)
    p = sub.add_parser("verify", help="rebuild a certificate and re-check it")
    p.add_argument("certificate")
    p.set_defaults(run=cmd_verify)
    p = sub.add_parser("plot", help="draw a certificate as SVG")
    p.add_argument("certificate")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(run=cmd_plot)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.run(args)
    except INVALID as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except CONSTRUCTION as exc:
        print(f"construction failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONSTRUCTION
    except ToleranceExceeded as exc:
        print(f"tolerance exceeded: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE


if __name__ == "__main__":
    sys.exit(main())
