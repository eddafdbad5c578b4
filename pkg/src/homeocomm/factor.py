"""
Commutator and power-word factorizations on the line and the cylinder.

For ``f`` in the identity component, a suited lattice ``(m_k, t_k)`` is
built, the vertical shift ``g'`` carrying ``A_k`` onto ``A_{k+1}`` is
straightened band by band into ``g``, and then ``g`` and ``g o f`` are
both loxodromic with the same sink.  A conjugator ``c`` with
``c g c^-1 = g f`` gives ``f = [g^-1, c]``.
"""

import threading
from dataclasses import dataclass, field

import numpy as np

from .curves import (
    DEFAULT_RESOLUTION,
    GraphCurve,
    check_orientation,
    exact_level_image,
    grid_points,
)
from .errors import (
    BandViolation,
    EndsMismatch,
    GraphViolation,
    NotOrientationPreserving,
    ToleranceExceeded,
)
from .maps import (
    Compose,
    FiberBump,
    FiberKind,
    Identity,
    MapExpr,
    Power,
    WORKING,
    apply,
    apply_power,
    compose,
    invert,
    pl_eval,
    unify_fibers,
    wrap_turns,
)
from .precision import DD, approx, segment_slopes
from .suited import (
    DEFAULT_HORIZON,
    DEFAULT_MARGIN,
    DEFAULT_WINDOW,
    LoxodromicCertificate,
    StridedBands,
    build_suited,
    certify_loxodromic,
)
from .verify import VerificationReport, default_grid, default_window, verify_identity

LINE_TOL = 1e-9
CURVE_TOL = 1e-6
BISECT_TOL = 1e-12
NEWTON_STEPS = 6
NEWTON_TOL = 1e-14


def default_tol(fiber):
    return LINE_TOL if fiber is FiberKind.POINT else CURVE_TOL


class BandShift(MapExpr):
    """Vertical PL map with breakpoints ``(b_k, b_{k + shift})`` for all ``k``.

    The breakpoints are read from a lazily extended band sequence, so the
    map is defined on all of R and hits every boundary bit-exactly.
    """

    preserves_angle = True

    def __init__(self, bands, shift=1):
        if shift == 0:
            raise ValueError("shift must be nonzero")
        self.bands = bands
        self.shift = int(shift)
        self._lock = threading.Lock()
        self._cache = None

    def _breakpoints(self, t):
        b, s = self.bands, abs(self.shift)
        k_lo, k_hi = b.index(np.array([t.min(), t.max()]))
        b.level(k_lo - s)
        b.level(k_hi + 1 + s)
        kmin, lv = b.materialized()
        key = (kmin, len(lv))
        with self._lock:
            if self._cache is not None and self._cache[0] == key:
                return self._cache[1]
        lo, hi = (lv[:-s], lv[s:]) if self.shift > 0 else (lv[s:], lv[:-s])
        tables = ((lo, hi, segment_slopes(lo, hi)), (hi, lo, segment_slopes(hi, lo)))
        with self._lock:
            self._cache = (key, tables)
        return tables

    def _run(self, theta, t, sign):
        if t.size == 0:
            return theta, t
        xs, ys, slopes = self._breakpoints(t)[0 if sign > 0 else 1]
        return theta, pl_eval(xs, ys, t, slopes)

    def forward(self, theta, t):
        return self._run(theta, t, 1)

    def backward(self, theta, t):
        return self._run(theta, t, -1)

    def __repr__(self):
        return f"BandShift({self.bands!r}, {self.shift})"


def build_vertical_shift(suited):
    """``g'``: the theta-identity PL map with ``g'(A_k) = A_{k+1}``."""
    return BandShift(suited.boundaries, 1)


def build_straightener(curve, band, target, margin=0.0, low=None):
    """Fiberwise PL map of ``band`` sending the graph of ``curve`` to ``target``.

    At each sample angle the fiber map has knots ``(l, l), (gamma, target),
    (u, u)``; it is the identity outside the open band.  On the point
    fiber ``low`` may carry the rounding residual of ``gamma`` so that the
    knot is the exact double-double level.
    """
    lo, hi = (float(v) for v in band)
    target = float(target)
    if not (lo + margin < curve.min() and curve.max() < hi - margin):
        raise BandViolation(
            f"curve spans [{curve.min():g}, {curve.max():g}], outside band ({lo:g}, {hi:g})"
        )
    if not (lo + margin < target < hi - margin):
        raise BandViolation(f"target {target:g} outside band ({lo:g}, {hi:g})")
    if np.all(curve.values == target) and not low:
        return Identity()
    src = curve.values[:, None]
    dst = np.full_like(src, target)
    angles = None if curve.uniform or curve.fiber is FiberKind.POINT else curve.thetas
    src_lo = None if not low else [[float(low)]]
    return FiberBump((lo, hi), src, dst, fiber=curve.fiber, angles=angles, src_lo=src_lo)


class BandStraighteners(MapExpr):
    """The disjoint-support product ``h`` of the straighteners ``h_k``.

    ``h_k`` lives in ``A_{k+1}`` and sends the curve ``g'(f(Sigma_k))`` to
    the marker level ``t_{k+1}``.  Evaluating ``h`` at a point applies only
    the straightener of the band containing it; pieces are built on first
    use and cached.
    """

    preserves_angle = True

    def __init__(self, f, suited, resolution=None):
        self.f = f
        self.suited = suited
        self.fiber = suited.fiber
        self.resolution = int(resolution or suited.resolution)
        self.shift = build_vertical_shift(suited)
        self._carry = compose([self.shift, f])
        self._pieces = {}
        self._lock = threading.Lock()

    def curve(self, k):
        """The curve ``g'(f(Sigma_k))`` inside ``A_{k+1}``."""
        return exact_level_image(self._carry, self.suited.t(k), self.resolution,
                                 fiber=self.fiber)

    def piece(self, k):
        with self._lock:
            hit = self._pieces.get(k)
        if hit is not None:
            return hit
        s = self.suited
        band = (s.m(k + 1), s.m(k + 2))
        low = None
        if self.fiber is FiberKind.POINT:
            # the knot is the exact working-precision image, so g o f
            # hits the marker bit-exactly
            _, x = self._carry.forward(np.zeros(1, dtype=WORKING), DD(np.array([s.t(k)])))
            x = DD.of(x)
            curve, low = GraphCurve(x.hi, FiberKind.POINT), float(x.lo[0])
        else:
            curve = self.curve(k)
        h_k = build_straightener(curve, band, s.t(k + 1), low=low)
        with self._lock:
            return self._pieces.setdefault(k, h_k)

    def _run(self, theta, t, inverse):
        if t.size == 0:
            return theta, t
        band = self.suited.boundaries.index(t)
        out = t.copy()
        for j in np.unique(band):
            sel = band == j
            h = self.piece(int(j) - 1)
            step = h.backward if inverse else h.forward
            _, out[sel] = step(theta[sel], t[sel])
        return theta, out

    def forward(self, theta, t):
        return self._run(theta, t, False)

    def backward(self, theta, t):
        return self._run(theta, t, True)

    def transport_residual(self, k, samples=None):
        """Max level error of ``(g o f)(Sigma_k)`` against ``t_{k+1}``, off-sample."""
        if self.fiber is FiberKind.POINT:
            th = None
            t = np.array([self.suited.t(k)])
        else:
            n = samples or 2 * self.resolution
            th = (np.arange(n) + 0.5) / n
            t = np.full(n, self.suited.t(k))
        g = compose([self, self.shift])
        _, img = apply(compose([g, self.f]), th, t)
        return float(np.max(np.abs(img - self.suited.t(k + 1))))

    def __repr__(self):
        return f"BandStraighteners(N={self.resolution})"


@dataclass
class AssembledG:
    g: MapExpr
    g_cert: LoxodromicCertificate
    gf_cert: LoxodromicCertificate
    shift: BandShift
    straighteners: BandStraighteners


def assemble_g(f, suited, iterations=100, samples=16, resolution=None):
    """Build ``g = h o g'`` and certify both ``g`` and ``g o f`` loxodromic.

    ``g`` is certified on the bands ``A_k = [m_k, m_{k+1}]`` and ``g o f``
    on the bands ``B_k = [t_k, t_{k+1}]``; both have sink ``+inf``.
    """
    fiber = suited.fiber
    h = BandStraighteners(f, suited, resolution)
    g = Compose([h, h.shift])
    gf = compose([g, f])
    g_cert = certify_loxodromic(g, suited.boundaries, iterations, samples,
                                tol=LINE_TOL, fiber=fiber, suited=suited)
    # the straightener knots are sampled curve values, so g o f meets the
    # markers within the curve tolerance rather than exactly
    gf_cert = certify_loxodromic(gf, suited.markers, iterations, samples,
                                 tol=CURVE_TOL, fiber=fiber, suited=suited)
    return AssembledG(g, g_cert, gf_cert, h.shift, h)


def _narrowing(a, b, c, tol):
    """Some bracket is wider than ``tol`` and its midpoint still splits it."""
    return bool(np.any((b - a > tol) & (c > a) & (c < b)))


class BoundaryAngleMap:
    """Angle map ``theta -> Theta(theta)`` of a map on one level circle.

    The lift is fixed from ``resolution`` samples (degree 1, increasing,
    displacement at angle 0 in [-1/2, 1/2)); evaluation uses the exact map
    and snaps it to that lift branch.
    """

    def __init__(self, m, level, resolution=DEFAULT_RESOLUTION):
        from .curves import circle_lift

        self.m, self.level = m, float(level)
        self.trivial = bool(m.preserves_angle)
        n = resolution
        self.thetas = np.arange(n) / n
        if self.trivial:
            self.disp = np.zeros(n)
        else:
            img, _ = apply(m, self.thetas, np.full(n, self.level))
            chk = circle_lift(img)
            if not chk.ok:
                raise GraphViolation(
                    f"boundary angle map at level {level:g} is not degree-1 increasing"
                )
            disp = chk.lift - self.thetas
            disp -= np.floor(disp[0] + 0.5)
            self.disp = disp
        self.dmin, self.dmax = float(self.disp.min()), float(self.disp.max())

    def displacement(self, theta):
        if self.trivial:
            return np.zeros_like(theta)
        guess = np.interp(theta, self.thetas, self.disp, period=1.0)
        img, _ = apply(self.m, wrap_turns(theta), np.full(theta.shape, self.level))
        off = img - theta - guess
        return guess + (np.mod(off + 0.5, 1.0) - 0.5)

    def isotopy(self, theta, s):
        """Angle of the isotopy slice at time ``s``: theta + s * D(theta)."""
        if self.trivial:
            return theta
        return wrap_turns(theta + s * self.displacement(theta))

    def isotopy_inverse(self, x, s):
        """Solve ``theta + s * D(theta) = x`` on the lift.

        The root of the sampled (interpolated) equation seeds Newton steps
        on the exact one; points that do not settle fall back to bisection.
        """
        if self.trivial:
            return x
        x = np.asarray(x, dtype=float)
        s = np.broadcast_to(np.asarray(s, dtype=float), x.shape)
        disp = lambda th: np.interp(th, self.thetas, self.disp, period=1.0)
        a, b = self._bracket(x, s)
        while True:
            c = 0.5 * (a + b)
            if not _narrowing(a, b, c, 1e-15):
                break
            low = c + s * disp(c) < x
            a = np.where(low, c, a)
            b = np.where(low, b, c)
        th = 0.5 * (a + b)
        h = 1.0 / len(self.thetas)
        slope = 1.0 + s * (disp(th + 0.5 * h) - disp(th - 0.5 * h)) / h
        slope = np.maximum(slope, 1e-6)
        for _ in range(NEWTON_STEPS):
            r = th + s * self.displacement(th) - x
            done = np.abs(r) <= NEWTON_TOL
            if done.all():
                break
            th = np.where(done, th, th - r / slope)
        else:
            r = th + s * self.displacement(th) - x
            stuck = np.abs(r) > NEWTON_TOL
            if stuck.any():
                th[stuck] = self._bisect(x[stuck], s[stuck])
        return wrap_turns(th)

    def _bracket(self, x, s):
        pad = 0.05
        a = x - np.maximum(s, 0) * self.dmax - pad
        b = np.maximum(x - np.minimum(s, 0) * self.dmax - np.maximum(s, 0) * self.dmin,
                       x - s * self.dmin) + pad
        return a, b

    def _bisect(self, x, s):
        a, b = self._bracket(x, s)
        while True:
            c = 0.5 * (a + b)
            if not _narrowing(a, b, c, BISECT_TOL):
                break
            low = c + s * self.displacement(c) - x < 0
            a = np.where(low, c, a)
            b = np.where(low, b, c)
        return 0.5 * (a + b)


def _normalized(cert):
    """Map with sink +inf (inverting when the certified sink is -inf)."""
    return cert.map if cert.sink > 0 else invert(cert.map)


class Conjugator(MapExpr):
    """The conjugator ``c`` with ``c o sigma o c^-1 = tau``.

    On the ``n``-th band of ``sigma`` it is ``tau^n o phi o sigma^-n``,
    where ``phi`` identifies the fundamental band of ``sigma`` with that of
    ``tau``: level fractions are matched linearly and angles move along
    the straight-line isotopy of lifts between the identity and each
    map's boundary angle map.
    """

    def __init__(self, sigma, tau, resolution=DEFAULT_RESOLUTION):
        if sigma.sink != tau.sink:
            raise EndsMismatch("conjugation needs a shared sink")
        self.fiber = unify_fibers([sigma.fiber, tau.fiber, sigma.map.fiber, tau.map.fiber])
        self.sigma, self.tau = sigma, tau
        self.smap, self.tmap = _normalized(sigma), _normalized(tau)
        self.sbands, self.tbands = sigma.bands, tau.bands
        self.b0, self.b1 = self.sbands.level(0), self.sbands.level(1)
        self.a0, self.a1 = self.tbands.level(0), self.tbands.level(1)
        self.resolution = int(resolution)
        self.preserves_angle = self.smap.preserves_angle and self.tmap.preserves_angle
        if self.fiber is FiberKind.CIRCLE:
            self.s_angles = BoundaryAngleMap(self.smap, self.b0, resolution)
            self.t_angles = BoundaryAngleMap(self.tmap, self.a0, resolution)
        else:
            self.s_angles = self.t_angles = None

    def children(self):
        return (self.sigma.map, self.tau.map)

    def phi(self, theta, t):
        s = (t - self.b0) / (self.b1 - self.b0)
        level = self.a0 + s * (self.a1 - self.a0)
        if self.s_angles is None:
            return theta, level
        s = approx(s)
        base = self.s_angles.isotopy_inverse(theta, s)
        return self.t_angles.isotopy(base, s), level

    def phi_inverse(self, theta, t):
        s = (t - self.a0) / (self.a1 - self.a0)
        level = self.b0 + s * (self.b1 - self.b0)
        if self.t_angles is None:
            return theta, level
        s = approx(s)
        base = self.t_angles.isotopy_inverse(theta, s)
        return self.s_angles.isotopy(base, s), level

    def forward(self, theta, t):
        if t.size == 0:
            return theta, t
        n = self.sbands.index(t)
        theta, t = apply_power(self.smap, theta, t, -n)
        theta, t = self.phi(theta, t)
        theta, t = apply_power(self.tmap, theta, t, n)
        return theta, t

    def backward(self, theta, t):
        if t.size == 0:
            return theta, t
        n = self.tbands.index(t)
        theta, t = apply_power(self.tmap, theta, t, -n)
        theta, t = self.phi_inverse(theta, t)
        theta, t = apply_power(self.smap, theta, t, n)
        return theta, t

    def __repr__(self):
        return f"Conjugator(sink={self.sigma.sink:+d})"


def conjugator(sigma, tau, resolution=DEFAULT_RESOLUTION):
    """Conjugator between two loxodromic certificates sharing a sink."""
    return Conjugator(sigma, tau, resolution)


def conjugation_report(c, sigma, tau, window=None, grid=None, tol=None):
    """Grid check of ``c o sigma o c^-1 = tau``."""
    fiber = c.fiber or FiberKind.POINT
    tol = default_tol(fiber) if tol is None else tol
    lhs = compose([c, sigma.map, invert(c)])
    return verify_identity(lhs, tau.map, window, grid, tol, fiber)


@dataclass
class FactorizationCertificate:
    """A factorization claim with its grid verification.

    ``kind == "commutator"``: ``factors = {"a": a, "b": b}`` and
    ``f = a b a^-1 b^-1``.  ``kind == "power_word"``: ``factors =
    {"g": [g_1..g_r], "p": [p_1..p_r]}`` and ``f = prod g_i^p_i``.
    """

    input: MapExpr
    kind: str
    factors: dict
    report: VerificationReport
    fiber: FiberKind
    details: dict = field(default_factory=dict)

    @property
    def passed(self):
        ok = self.report.passed
        if self.kind == "power_word":
            ok = ok and all(self.details.get("nontrivial", []))
        return ok

    def product(self):
        """The right-hand side of the claimed identity."""
        if self.kind == "commutator":
            a, b = self.factors["a"], self.factors["b"]
            return compose([a, b, invert(a), invert(b)])
        return compose([Power(g, p) for g, p in zip(self.factors["g"], self.factors["p"])])


def _admit(f, fiber, window):
    rep = check_orientation(f, window, fiber=fiber)
    if not rep.passed:
        raise NotOrientationPreserving("; ".join(rep.reasons))


def commutator_factorization(f, fiber=None, window=None, grid=None, tol=None,
                             margin=DEFAULT_MARGIN, resolution=DEFAULT_RESOLUTION,
                             horizon=DEFAULT_HORIZON, search_window=DEFAULT_WINDOW,
                             iterations=100, strict=True):
    """Write ``f`` as a single commutator ``a b a^-1 b^-1``.

    Returns a :class:`FactorizationCertificate` with ``a = g^-1`` and
    ``b = c``.  With ``strict`` a failed grid check raises
    :class:`ToleranceExceeded` (the certificate is attached as
    ``err.certificate``).
    """
    fiber = fiber or f.fiber or FiberKind.POINT
    window = tuple(window or default_window(fiber))
    grid = tuple(grid or default_grid(fiber))
    tol = default_tol(fiber) if tol is None else tol
    if isinstance(f, Identity):
        rep = verify_identity(f, Identity(), window, grid, tol, fiber)
        return FactorizationCertificate(f, "commutator", {"a": Identity(), "b": Identity()},
                                        rep, fiber)
    _admit(f, fiber, window)
    suited = build_suited(f, 0, horizon, search_window, margin, resolution, fiber)
    asm = assemble_g(f, suited, iterations)
    c = conjugator(asm.g_cert, asm.gf_cert, resolution)
    a = invert(asm.g)
    cert = FactorizationCertificate(f, "commutator", {"a": a, "b": c}, None, fiber)
    rep = verify_identity(f, cert.product(), window, grid, tol, fiber)
    cert.report = rep
    cert.details = {"suited": suited, "g": asm.g, "g_cert": asm.g_cert,
                    "gf_cert": asm.gf_cert, "conjugator": c}
    if strict and not rep.passed:
        err = ToleranceExceeded(rep)
        err.certificate = cert
        raise err
    return cert


def split_loxodromic(f, fiber=None, window=None, margin=DEFAULT_MARGIN,
                     resolution=DEFAULT_RESOLUTION, horizon=DEFAULT_HORIZON,
                     search_window=DEFAULT_WINDOW, iterations=100):
    """Factor ``f = f1 o f2`` with both factors loxodromic.

    ``f1 = g^-1`` (sink ``-inf``) and ``f2 = g o f`` (sink ``+inf``).
    """
    fiber = fiber or f.fiber or FiberKind.POINT
    _admit(f, fiber, tuple(window or default_window(fiber)))
    suited = build_suited(f, 0, horizon, search_window, margin, resolution, fiber)
    asm = assemble_g(f, suited, iterations)
    f1 = certify_loxodromic(invert(asm.g), suited.boundaries, iterations,
                            tol=LINE_TOL, fiber=fiber, suited=suited)
    return f1, asm.gf_cert


def _power_root(fi, p, resolution=DEFAULT_RESOLUTION, iterations=100):
    if p == 1:
        return fi.map, None
    sigma = certify_loxodromic(Power(fi.map, p), StridedBands(fi.bands, p), iterations,
                               tol=CURVE_TOL, fiber=fi.fiber)
    h = conjugator(sigma, fi, resolution)
    return compose([h, fi.map, invert(h)]), h


def power_root_conjugate(fi, p, resolution=DEFAULT_RESOLUTION, iterations=100):
    """A ``p``-th root of a loxodromic map, conjugate to it.

    With ``h fi^p h^-1 = fi`` the root is ``h fi h^-1``.
    """
    if p < 1:
        raise ValueError("p must be a positive integer")
    return _power_root(fi, p, resolution, iterations)[0]


def power_word_decomposition(g, exponents, fiber=None, window=None, grid=None, tol=CURVE_TOL,
                             margin=DEFAULT_MARGIN, resolution=DEFAULT_RESOLUTION,
                             horizon=DEFAULT_HORIZON, search_window=DEFAULT_WINDOW,
                             iterations=100, strict=True):
    """Write ``g = g_1^p_1 o ... o g_r^p_r`` with nontrivial ``g_i``."""
    exponents = [int(p) for p in exponents]
    if len(exponents) < 2:
        raise ValueError("a power word needs at least two exponents")
    if any(p == 0 for p in exponents):
        raise ValueError("exponents must be nonzero")
    fiber = fiber or g.fiber or FiberKind.POINT
    window = tuple(window or default_window(fiber))
    grid = tuple(grid or default_grid(fiber))
    opts = dict(fiber=fiber, window=window, margin=margin, resolution=resolution,
                horizon=horizon, search_window=search_window, iterations=iterations)
    _admit(g, fiber, window)
    right = []
    left, r = None, g
    for _ in range(len(exponents) - 1):
        left, r2 = split_loxodromic(r, **opts)
        right.insert(0, r2)
        r = left.map
    pieces = [left] + right
    roots, conjugators = [], []
    for fi, p in zip(pieces, exponents):
        root, h = _power_root(fi, abs(p), resolution, iterations)
        roots.append(root if p > 0 else invert(root))
        conjugators.append(h)
    cert = FactorizationCertificate(g, "power_word", {"g": roots, "p": exponents}, None, fiber)
    rep = verify_identity(g, cert.product(), window, grid, tol, fiber)
    theta, t = grid_points(fiber, window, grid)
    moved = []
    for gi in roots:
        th2, t2 = apply(gi, theta, t)
        d = np.abs(t2 - t)
        if theta is not None:
            d = np.maximum(d, np.abs(np.mod(th2 - theta + 0.5, 1.0) - 0.5))
        moved.append(float(d.max()))
    cert.report = rep
    cert.details = {"pieces": pieces, "conjugators": conjugators, "displacement": moved,
                    "nontrivial": [m > tol for m in moved]}
    if strict and not cert.passed:
        err = ToleranceExceeded(rep)
        err.certificate = cert
        raise err
    return cert
