"""
Orientation-preserving homeomorphisms of fiber x R as expression trees.

Points are pairs ``(theta, t)``: ``theta`` is an angle in turns on the
circle fiber and ``t`` a real level.  For the point fiber ``theta`` is
carried along as zeros and ignored.  Every node evaluates on numpy arrays
through ``forward`` and ``backward`` (the inverse); trees are immutable.
"""

import enum
from dataclasses import dataclass

import numpy as np

from .errors import FiberMismatch, NonFinite, NotOrientationPreserving
from .precision import DD, approx, exact_diff, locate, segment_slopes, where


class FiberKind(enum.Enum):
    POINT = "point"
    CIRCLE = "circle"


@dataclass(frozen=True)
class CPoint:
    """A point of fiber x R; ``theta`` is None on the point fiber."""

    t: float
    theta: float | None = None


# angles are carried in extended precision; levels are DD (see precision)
WORKING = np.longdouble


def wrap_turns(x):
    """Reduce angles mod 1 into [0, 1)."""
    r = np.mod(x, 1.0)
    return np.where(r >= 1.0, 0.0, r)


def circle_dist(a, b):
    d = np.mod(np.asarray(a) - np.asarray(b) + 0.5, 1.0) - 0.5
    return np.abs(d)


def unify_fibers(fibers):
    """Common fiber of several nodes; None entries are fiber-agnostic."""
    found = None
    for fb in fibers:
        if fb is None:
            continue
        if found is None:
            found = fb
        elif fb is not found:
            raise FiberMismatch(f"cannot combine {found.value} and {fb.value} maps")
    return found


def pl_eval(xs, ys, x, slopes=None):
    """Evaluate a PL map with affine tails at DD levels ``x``.

    Segment slopes (DD, from exact differences; computed when not given)
    make a map and its inverse agree to working precision.  Values at
    breakpoints are returned bit-exactly.
    """
    x = DD.of(x)
    if slopes is None:
        slopes = segment_slopes(xs, ys)
    j = locate(xs, x)
    a = np.clip(j, 0, len(xs) - 1)
    seg = np.clip(j, 0, len(xs) - 2)
    return slopes[seg] * (x - xs[a]) + ys[a]


class MapExpr:
    """Base class of homeomorphism expressions.

    Subclasses implement ``forward(theta, t)`` and ``backward(theta, t)``
    on float arrays of equal shape and return new arrays.
    """

    fiber = None
    # True when no angle is ever moved; lets callers skip angle bookkeeping
    preserves_angle = False

    def forward(self, theta, t):
        raise NotImplementedError

    def backward(self, theta, t):
        raise NotImplementedError

    def __call__(self, p):
        return evaluate(self, p)

    def __matmul__(self, other):
        return compose([self, other])

    @property
    def inverse(self):
        return invert(self)

    def children(self):
        return ()


class Identity(MapExpr):
    preserves_angle = True

    def forward(self, theta, t):
        return theta, t

    backward = forward

    def __repr__(self):
        return "Identity()"


class VerticalPL(MapExpr):
    """``(theta, t) -> (theta, p(t))`` for a strictly increasing PL map ``p``.

    Beyond the extreme breakpoints ``p`` continues affinely with the
    terminal slopes.
    """

    preserves_angle = True

    def __init__(self, breakpoints):
        bp = np.asarray(breakpoints, dtype=float)
        if bp.ndim != 2 or bp.shape[1] != 2 or len(bp) < 2:
            raise ValueError("VerticalPL needs at least two (t_in, t_out) pairs")
        if not np.all(np.isfinite(bp)):
            raise ValueError("breakpoints must be finite")
        xs, ys = bp[:, 0].copy(), bp[:, 1].copy()
        if np.any(np.diff(xs) <= 0):
            raise ValueError("breakpoint inputs must be strictly increasing")
        if np.any(np.diff(ys) <= 0):
            raise NotOrientationPreserving("VerticalPL has a non-positive slope")
        xs.flags.writeable = False
        ys.flags.writeable = False
        self.xs, self.ys = xs, ys
        self._slopes = (segment_slopes(xs, ys), segment_slopes(ys, xs))

    @classmethod
    def translation(cls, c):
        return cls([(0.0, float(c)), (1.0, 1.0 + float(c))])

    @property
    def breakpoints(self):
        return np.column_stack([self.xs, self.ys])

    def forward(self, theta, t):
        return theta, pl_eval(self.xs, self.ys, t, self._slopes[0])

    def backward(self, theta, t):
        return theta, pl_eval(self.ys, self.xs, t, self._slopes[1])

    def __repr__(self):
        return f"VerticalPL({self.breakpoints.tolist()})"


class Twist(MapExpr):
    """``(theta, t) -> (theta + alpha(t), t)``.

    ``alpha`` is given by ``(t, turns)`` pairs, interpolated linearly and
    held constant beyond the extreme pairs; a single pair is a constant
    rotation.
    """

    fiber = FiberKind.CIRCLE

    def __init__(self, alpha):
        a = np.atleast_2d(np.asarray(alpha, dtype=float))
        if a.shape[1] != 2 or len(a) < 1:
            raise ValueError("alpha must be a list of (t, turns) pairs")
        if np.any(np.diff(a[:, 0]) <= 0):
            raise ValueError("alpha levels must be strictly increasing")
        self.ts = a[:, 0].copy()
        self.turns = a[:, 1].copy()

    @classmethod
    def constant(cls, turns):
        return cls([(0.0, turns)])

    @property
    def alpha(self):
        return np.column_stack([self.ts, self.turns])

    def offset(self, t):
        if len(self.ts) == 1:
            return np.full(t.shape, self.turns[0])
        return np.interp(approx(t), self.ts, self.turns)

    def forward(self, theta, t):
        return wrap_turns(theta + self.offset(t)), t

    def backward(self, theta, t):
        return wrap_turns(theta - self.offset(t)), t

    def __repr__(self):
        return f"Twist({self.alpha.tolist()})"


def _rowwise_pl(lo, hi, src, dst, t, src_lo=None, dst_lo=None):
    """Per-row PL map with knots (lo, src..., hi) -> (lo, dst..., hi).

    ``src_lo``/``dst_lo`` are optional low parts making the inner knots
    double-double values.
    """
    n = len(t)
    X = np.empty((n, src.shape[1] + 2))
    Y = np.empty_like(X)
    X[:, 0] = Y[:, 0] = lo
    X[:, -1] = Y[:, -1] = hi
    X[:, 1:-1] = src
    Y[:, 1:-1] = dst
    j = (t[:, None] >= X[:, 1:-1]).sum(axis=1)
    rows = np.arange(n)
    x0, x1 = X[rows, j], X[rows, j + 1]
    y0, y1 = Y[rows, j], Y[rows, j + 1]
    if src_lo is None and dst_lo is None:
        return exact_diff(y1, y0) * ((t - x0) / exact_diff(x1, x0)) + y0
    XL, YL = np.zeros_like(X), np.zeros_like(Y)
    if src_lo is not None:
        XL[:, 1:-1] = src_lo
    if dst_lo is not None:
        YL[:, 1:-1] = dst_lo
    # the index came from the high parts; settle ties with the low parts
    r = src.shape[1]
    up = (j < r) & (t >= DD(X[rows, np.minimum(j + 1, r)], XL[rows, np.minimum(j + 1, r)]))
    down = (j > 0) & (t < DD(x0, XL[rows, j]))
    j = j + up - down
    x0, x1 = DD(X[rows, j], XL[rows, j]), DD(X[rows, j + 1], XL[rows, j + 1])
    y0, y1 = DD(Y[rows, j], YL[rows, j]), DD(Y[rows, j + 1], YL[rows, j + 1])
    return (y1 - y0) * ((t - x0) / (x1 - x0)) + y0


class FiberBump(MapExpr):
    """Fiberwise PL bijection of a band ``[lo, hi]``, identity elsewhere.

    ``src`` and ``dst`` have shape ``(K, r)``: at angle ``j/K`` the fiber
    map has knots ``(lo, lo), (src[j, i], dst[j, i]), (hi, hi)``.  Between
    track angles both tracks are interpolated linearly (periodically), so
    the profile stays a strictly increasing bijection for every theta.
    Track angles default to ``j/K``; explicit ``angles`` (strictly
    increasing in ``[0, 1)``) give non-uniform tracks.  On the point fiber
    ``K`` is 1, and ``src_lo``/``dst_lo`` may then give low parts that
    make the inner knots double-double values.
    """

    preserves_angle = True

    def __init__(self, band, src, dst, fiber=None, angles=None, src_lo=None, dst_lo=None):
        lo, hi = (float(v) for v in band)
        if not lo < hi:
            raise ValueError("band must satisfy lo < hi")
        src = np.asarray(src, dtype=float)
        dst = np.asarray(dst, dtype=float)
        if src.ndim == 1:
            src, dst = src[None, :], dst[None, :]
        if src.shape != dst.shape or src.ndim != 2:
            raise ValueError("src and dst tracks must have the same (K, r) shape")
        for tr in (src, dst):
            full = np.column_stack([np.full(len(tr), lo), tr, np.full(len(tr), hi)])
            if np.any(np.diff(full, axis=1) <= 0):
                raise NotOrientationPreserving(
                    "FiberBump tracks must be strictly increasing inside the band"
                )
        if fiber is None:
            fiber = FiberKind.POINT if len(src) == 1 else FiberKind.CIRCLE
        if fiber is FiberKind.POINT and len(src) != 1:
            raise FiberMismatch("point-fiber FiberBump takes a single profile")
        if angles is not None:
            angles = np.asarray(angles, dtype=float)
            if angles.shape != (len(src),):
                raise ValueError("need one track angle per track row")
            if len(angles) > 1 and (np.any(np.diff(angles) <= 0) or angles[0] < 0
                                    or angles[-1] >= 1):
                raise ValueError("track angles must increase within [0, 1)")
        lows = []
        for low in (src_lo, dst_lo):
            if low is not None:
                low = np.asarray(low, dtype=float).reshape(src.shape)
                if len(src) != 1:
                    raise ValueError("knot low parts need a single profile")
                if not np.all(np.abs(low) <= 1e-12 * np.maximum(1.0, np.abs(src))):
                    raise ValueError("knot low parts must be rounding-sized")
                if not np.any(low):
                    low = None
            lows.append(low)
        self.lo, self.hi = lo, hi
        self.src, self.dst = src, dst
        self.src_lo, self.dst_lo = lows
        self.angles = angles
        self.fiber = fiber

    @classmethod
    def from_functions(cls, band, src_fns, dst_fns, samples=64):
        """Sample theta-dependent breakpoint functions into tracks."""
        th = np.arange(samples) / samples
        src = np.column_stack([np.broadcast_to(fn(th), th.shape) for fn in src_fns])
        dst = np.column_stack([np.broadcast_to(fn(th), th.shape) for fn in dst_fns])
        return cls(band, src, dst, fiber=FiberKind.CIRCLE)

    @property
    def band(self):
        return (self.lo, self.hi)

    def _tracks(self, theta):
        K = len(self.src)
        if K == 1:
            n = len(theta)
            return np.repeat(self.src, n, axis=0), np.repeat(self.dst, n, axis=0)
        if self.angles is None:
            pos = theta * K
            base = np.floor(pos)
            w = (pos - base)[:, None]
            j0 = base.astype(np.int64) % K
        else:
            a = self.angles
            th = np.mod(theta, 1.0)
            j0 = (np.searchsorted(a, th, side="right") - 1) % K
            left = a[j0]
            gap = np.mod(a[(j0 + 1) % K] - left, 1.0)
            gap = np.where(gap == 0, 1.0, gap)
            w = (np.mod(th - left, 1.0) / gap)[:, None]
        j1 = (j0 + 1) % K
        src = (1.0 - w) * self.src[j0] + w * self.src[j1]
        dst = (1.0 - w) * self.dst[j0] + w * self.dst[j1]
        return src, dst

    def _apply(self, theta, t, inverse):
        shape = t.shape
        th, tt = theta.ravel(), DD.of(t).ravel()
        out = tt.copy()
        inside = (tt > self.lo) & (tt < self.hi)
        if inside.any():
            src, dst = self._tracks(th[inside])
            src_lo, dst_lo = self.src_lo, self.dst_lo
            if inverse:
                src, dst, src_lo, dst_lo = dst, src, dst_lo, src_lo
            out[inside] = _rowwise_pl(self.lo, self.hi, src, dst, tt[inside], src_lo, dst_lo)
        return theta, out.reshape(shape)

    def forward(self, theta, t):
        return self._apply(theta, t, inverse=False)

    def backward(self, theta, t):
        return self._apply(theta, t, inverse=True)

    def __repr__(self):
        return f"FiberBump(band={self.band}, K={len(self.src)}, r={self.src.shape[1]})"


def _pchip_slopes(xs, ys):
    h = np.diff(xs)
    delta = np.diff(ys) / h
    d = np.empty_like(xs)
    d[0], d[-1] = delta[0], delta[-1]
    if len(xs) > 2:
        w1 = 2.0 * h[1:] + h[:-1]
        w2 = h[1:] + 2.0 * h[:-1]
        d[1:-1] = (w1 + w2) / (w1 / delta[:-1] + w2 / delta[1:])
    return d, delta


class MonotoneSmooth(MapExpr):
    """C^1 monotone cubic interpolant ``t -> s(t)`` with affine tails.

    Interior knot slopes use the weighted harmonic mean of the adjacent
    secants, which keeps every cubic piece monotone; end slopes equal the
    terminal secants so the tails join with matching derivative.  The
    inverse is evaluated by bisection.
    """

    bisect_tol = 1e-12
    preserves_angle = True

    def __init__(self, knots):
        k = np.asarray(knots, dtype=float)
        if k.ndim != 2 or k.shape[1] != 2 or len(k) < 2:
            raise ValueError("MonotoneSmooth needs at least two knots")
        xs, ys = k[:, 0].copy(), k[:, 1].copy()
        if np.any(np.diff(xs) <= 0):
            raise ValueError("knot inputs must be strictly increasing")
        if np.any(np.diff(ys) <= 0):
            raise NotOrientationPreserving("MonotoneSmooth knots must increase")
        self.xs, self.ys = xs, ys
        self.d, self._delta = _pchip_slopes(xs, ys)

    @property
    def knots(self):
        return np.column_stack([self.xs, self.ys])

    def _piece(self, t):
        xs = self.xs
        j = np.clip(locate(xs, t), 0, len(xs) - 2)
        h = exact_diff(xs[j + 1], xs[j])
        return j, h, (t - xs[j]) / h

    def _eval(self, t):
        xs, ys, d = self.xs, self.ys, self.d
        t = DD.of(t)
        j, h, u = self._piece(t)
        v = 1.0 - u
        inner = ((2.0 * u + 1.0) * v * v * ys[j] + u * v * v * h * d[j]
                 + u * u * (3.0 - 2.0 * u) * ys[j + 1] - u * u * v * h * d[j + 1])
        left = (t - xs[0]) * d[0] + ys[0]
        right = (t - xs[-1]) * d[-1] + ys[-1]
        return where(t < xs[0], left, where(t > xs[-1], right, inner))

    def _slope(self, t):
        j, h, u = self._piece(t)
        d, delta = self.d, self._delta
        v = 1.0 - u
        inner = 6.0 * u * v * delta[j] + v * (1.0 - 3.0 * u) * d[j] + u * (3.0 * u - 2.0) * d[j + 1]
        inner = inner.hi
        ta = approx(t)
        return np.where(ta < self.xs[0], d[0], np.where(ta > self.xs[-1], d[-1], inner))

    def _solve(self, y):
        xs, ys, d = self.xs, self.ys, self.d
        y = DD.of(y)
        ya = approx(y)
        j = np.clip(np.searchsorted(ys, ya, side="right") - 1, 0, len(xs) - 2)
        a, b = xs[j].copy(), xs[j + 1].copy()
        a = np.where(ya < ys[0], xs[0] + (ya - ys[0]) / d[0] - 1.0, a)
        b = np.where(ya > ys[-1], xs[-1] + (ya - ys[-1]) / d[-1] + 1.0, b)
        # relative to the bracket: tail roots can sit far beyond the knots,
        # where an absolute tolerance is below the float spacing
        scale = np.maximum(max(1.0, float(np.max(np.abs(xs)))), np.maximum(np.abs(a), np.abs(b)))
        while True:
            c = 0.5 * (a + b)
            if not np.any((b - a > self.bisect_tol * scale) & (c > a) & (c < b)):
                break
            up = self._eval(c) < y
            a = np.where(up, c, a)
            b = np.where(up, b, c)
        x = DD.of(0.5 * (a + b))
        # Newton steps carry the bisection root to working precision
        for _ in range(2):
            x = x - (self._eval(x) - y) / self._slope(x)
        return x

    def forward(self, theta, t):
        return theta, self._eval(t)

    def backward(self, theta, t):
        return theta, self._solve(t)

    def __repr__(self):
        return f"MonotoneSmooth({self.knots.tolist()})"


class Compose(MapExpr):
    """Composition; ``children[0]`` is applied last (right-to-left)."""

    def __init__(self, children):
        self._children = tuple(children)
        self.fiber = unify_fibers(c.fiber for c in self._children)
        self.preserves_angle = all(c.preserves_angle for c in self._children)

    def children(self):
        return self._children

    def forward(self, theta, t):
        for c in reversed(self._children):
            theta, t = c.forward(theta, t)
        return theta, t

    def backward(self, theta, t):
        for c in self._children:
            theta, t = c.backward(theta, t)
        return theta, t

    def __repr__(self):
        return "Compose(" + ", ".join(map(repr, self._children)) + ")"


class Inverse(MapExpr):
    """Lazy inverse node."""

    def __init__(self, child):
        self.child = child
        self.fiber = child.fiber
        self.preserves_angle = child.preserves_angle

    def children(self):
        return (self.child,)

    def forward(self, theta, t):
        return self.child.backward(theta, t)

    def backward(self, theta, t):
        return self.child.forward(theta, t)

    def __repr__(self):
        return f"Inverse({self.child!r})"


class Power(MapExpr):
    """Iterate ``child`` ``exponent`` times (negative: iterate the inverse)."""

    def __init__(self, child, exponent):
        self.child = child
        self.exponent = int(exponent)
        self.fiber = child.fiber
        self.preserves_angle = child.preserves_angle

    def children(self):
        return (self.child,)

    def _run(self, theta, t, n):
        step = self.child.forward if n > 0 else self.child.backward
        for _ in range(abs(n)):
            theta, t = step(theta, t)
        return theta, t

    def forward(self, theta, t):
        return self._run(theta, t, self.exponent)

    def backward(self, theta, t):
        return self._run(theta, t, -self.exponent)

    def __repr__(self):
        return f"Power({self.child!r}, {self.exponent})"


def apply_power(m, theta, t, n):
    """Apply ``m**n[i]`` to point ``i``, with per-point integer exponents."""
    n = np.asarray(n)
    theta, t = theta.copy(), t.copy()
    if n.size == 0:
        return theta, t
    for j in range(int(n.max(initial=0))):
        sel = n > j
        theta[sel], t[sel] = m.forward(theta[sel], t[sel])
    for j in range(int(-n.min(initial=0))):
        sel = n < -j
        theta[sel], t[sel] = m.backward(theta[sel], t[sel])
    return theta, t


def invert(m):
    """Lazy inverse; inverting an Inverse node returns its child."""
    if isinstance(m, Inverse):
        return m.child
    if isinstance(m, Identity):
        return m
    return Inverse(m)


def compose(ms):
    """Compose maps right-to-left; the empty product is the identity."""
    ms = [m for m in ms if not isinstance(m, Identity)]
    if not ms:
        return Identity()
    if len(ms) == 1:
        return ms[0]
    return Compose(ms)


def apply(m, theta, t):
    """Vectorized evaluation of ``m`` on arrays of angles and levels.

    ``theta`` may be None for point-fiber maps.  Nodes evaluate levels in
    double-double and angles in extended precision; results are rounded
    once at the end.
    """
    t = np.asarray(t, dtype=float)
    if theta is None:
        if m.fiber is FiberKind.CIRCLE:
            raise FiberMismatch("circle-fiber map evaluated without angles")
        theta = np.zeros_like(t)
    else:
        theta = np.broadcast_to(np.asarray(theta, dtype=float), t.shape)
    shape = t.shape
    # overflow is reported as NonFinite below, not as a numpy warning
    with np.errstate(over="ignore", invalid="ignore"):
        th, tt = m.forward(theta.astype(WORKING).ravel(), DD(t.ravel()))
        th, tt = np.asarray(th, dtype=float), DD.of(tt).to_float()
    if not (np.all(np.isfinite(tt)) and np.all(np.isfinite(th))):
        raise NonFinite("evaluation left the representable range")
    return th.reshape(shape), tt.reshape(shape)


def evaluate(m, p):
    """Image of a single ``CPoint`` under ``m``."""
    if p.theta is None:
        _, t = apply(m, None, np.array([p.t]))
        return CPoint(float(t[0]))
    if m.fiber is FiberKind.POINT:
        raise FiberMismatch("point-fiber map evaluated at a circle point")
    th, t = apply(m, np.array([p.theta]), np.array([p.t]))
    return CPoint(float(t[0]), float(th[0]))
