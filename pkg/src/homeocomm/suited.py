"""
Suited decompositions and loxodromic certificates.

A suited decomposition for ``f`` is a bi-infinite integer lattice of band
boundaries ``m_k`` and marker levels ``t_k`` with ``m_k < t_k < m_{k+1}``
such that the level circle ``Sigma_k`` at ``t_k`` and its image under ``f``
sit inside the band ``A_k = [m_k, m_{k+1}]`` with a margin.  Both
sequences are materialized lazily and append-only.
"""

import math
import threading
from dataclasses import dataclass, field

import numpy as np

from .curves import DEFAULT_RESOLUTION, level_image, level_spans
from .errors import NotLoxodromic, NotProper
from .maps import FiberKind, apply, invert
from .precision import is_dd, locate
from .verify import VerificationReport, verify_dynamics

DEFAULT_MARGIN = 0.25
DEFAULT_WINDOW = 10_000
DEFAULT_HORIZON = 2_000
# far out, an absolute gap drowns in float spacing; the gap also scales with level
RELATIVE_MARGIN = 1e-9
SEARCH_BATCH = 48


def int_above(x):
    """Smallest integer-valued float strictly greater than ``x``."""
    v = float(math.floor(x) + 1)
    if v <= x:
        v = math.nextafter(x, math.inf)
    return v


def int_below(x):
    """Largest integer-valued float strictly less than ``x``."""
    v = float(math.ceil(x) - 1)
    if v >= x:
        v = math.nextafter(x, -math.inf)
    return v


class BandSequence:
    """Strictly increasing boundary levels ``b_k``, materialized on demand.

    Subclasses provide ``_grow_up`` and ``_grow_down``, each appending one
    level at the corresponding end of ``self._levels``.
    """

    horizon = DEFAULT_HORIZON

    def __init__(self):
        self._lock = threading.RLock()
        self._levels = []
        self._kmin = 0

    def _grow_up(self):
        raise NotImplementedError

    def _grow_down(self):
        raise NotImplementedError

    def _up(self):
        if self._kmin + len(self._levels) - 1 >= self.horizon:
            raise NotProper(f"band horizon {self.horizon} exhausted upward")
        self._grow_up()

    def _down(self):
        if -self._kmin >= self.horizon:
            raise NotProper(f"band horizon {self.horizon} exhausted downward")
        self._grow_down()

    def level(self, k):
        with self._lock:
            while k >= self._kmin + len(self._levels):
                self._up()
            while k < self._kmin:
                self._down()
            return self._levels[k - self._kmin]

    def ensure_cover(self, lo, hi):
        """Materialize until ``b_kmin <= lo`` and ``b_kmax > hi``."""
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise NotProper("cannot cover a non-finite level")
        with self._lock:
            while self._levels[-1] <= hi:
                self._up()
            while self._levels[0] > lo:
                self._down()

    def materialized(self):
        with self._lock:
            return self._kmin, np.array(self._levels)

    def index(self, t):
        """Band index ``k`` with ``b_k <= t < b_{k+1}`` (vectorized)."""
        if not is_dd(t):
            t = np.asarray(t, dtype=float)
        if t.size == 0:
            return np.zeros(t.shape, dtype=np.int64)
        self.ensure_cover(float(t.min()), float(t.max()))
        kmin, lv = self.materialized()
        return locate(lv, t) + kmin

    def window(self, lo, hi):
        """Materialized ``(k, b_k)`` pairs whose levels fall in ``[lo, hi]``."""
        self.ensure_cover(lo, hi)
        kmin, lv = self.materialized()
        sel = (lv >= lo) & (lv <= hi)
        return [(int(k), float(v)) for k, v in zip(np.arange(kmin, kmin + len(lv))[sel], lv[sel])]


class ArithmeticBands(BandSequence):
    """``b_k = origin + k * step``."""

    def __init__(self, origin, step):
        super().__init__()
        if not step > 0:
            raise ValueError("step must be positive")
        self.origin, self.step = float(origin), float(step)
        self._levels = [self.origin]

    def _grow_up(self):
        k = self._kmin + len(self._levels)
        self._levels.append(self.origin + k * self.step)

    def _grow_down(self):
        self._kmin -= 1
        self._levels.insert(0, self.origin + self._kmin * self.step)

    def __repr__(self):
        return f"ArithmeticBands({self.origin:g}, {self.step:g})"


class StridedBands(BandSequence):
    """Every ``stride``-th boundary of a base sequence: ``b'_k = b_{stride * k}``."""

    def __init__(self, base, stride):
        super().__init__()
        if stride < 1:
            raise ValueError("stride must be positive")
        self.base, self.stride = base, int(stride)
        self._levels = [base.level(0)]

    def _grow_up(self):
        k = self._kmin + len(self._levels)
        self._levels.append(self.base.level(self.stride * k))

    def _grow_down(self):
        self._kmin -= 1
        self._levels.insert(0, self.base.level(self.stride * self._kmin))

    def __repr__(self):
        return f"StridedBands({self.base!r}, {self.stride})"


class _SuitedView(BandSequence):
    def __init__(self, suited, which):
        super().__init__()
        self.suited, self.which = suited, which
        self._lock = suited._lock
        self.horizon = suited.horizon

    def _sync(self):
        s = self.suited
        if self.which == "boundaries":
            self._kmin, self._levels = s._lo, s._m
        else:
            self._kmin, self._levels = s._lo, s._t

    def _grow_up(self):
        self.suited._extend_forward()
        self._sync()

    def _grow_down(self):
        self.suited._extend_backward()
        self._sync()

    def _up(self):
        BandSequence._up(self)

    def _down(self):
        BandSequence._down(self)

    def materialized(self):
        with self._lock:
            self._sync()
            return self._kmin, np.array(self._levels)

    def level(self, k):
        with self._lock:
            self._sync()
            return BandSequence.level(self, k)

    def ensure_cover(self, lo, hi):
        with self._lock:
            self._sync()
            BandSequence.ensure_cover(self, lo, hi)

    def __repr__(self):
        return f"SuitedBands({self.which})"


class SuitedDecomposition:
    """Lazily built suited lattice for ``f``.

    Materialized state: ``m_k`` for ``k`` in ``[lo, hi + 1]`` and ``t_k`` for
    ``k`` in ``[lo, hi]``.  Extension is sequential and deterministic, so
    any two readers see the same append-only sequences.
    """

    def __init__(self, f, t0=0, margin=DEFAULT_MARGIN, window=DEFAULT_WINDOW,
                 horizon=DEFAULT_HORIZON, resolution=DEFAULT_RESOLUTION, fiber=None):
        self.f = f
        self.fiber = fiber or f.fiber or FiberKind.POINT
        self.t0 = float(int(t0))
        self.margin = float(margin)
        self.window_w = int(window)
        self.horizon = int(horizon)
        self.resolution = int(resolution)
        self._lock = threading.RLock()
        self._spans = {}
        lo, hi = self._span(self.t0)
        n0 = int_above(max(hi - self.t0, self.t0 - lo) + self.margin)
        self._lo = 0
        self._m = [self.t0 - n0, self.t0 + n0]
        self._t = [self.t0]
        self.boundaries = _SuitedView(self, "boundaries")
        self.markers = _SuitedView(self, "markers")

    def pad(self, level):
        """Effective containment gap at ``level``."""
        return max(self.margin, RELATIVE_MARGIN * abs(level))

    @property
    def frontier(self):
        """Materialized index range ``(lo, hi)`` of the markers."""
        return self._lo, self._lo + len(self._t) - 1

    @property
    def explored(self):
        lo, hi = self.frontier
        return max(-lo, hi)

    def _span(self, c):
        """Min and max level of ``Sigma_c`` together with ``f(Sigma_c)``."""
        lo, hi = self._span_many(np.array([c]))
        return lo[0], hi[0]

    def _span_many(self, cs):
        missing = [c for c in dict.fromkeys(cs.tolist()) if c not in self._spans]
        if missing:
            lo, hi = level_spans(self.f, np.array(missing), self.resolution, self.fiber)
            for c, a, b in zip(missing, lo.tolist(), hi.tolist()):
                self._spans[c] = (min(c, a), max(c, b))
        pairs = [self._spans[c] for c in cs.tolist()]
        return np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs])

    def _reach(self, frontier):
        return self.window_w * max(1.0, abs(frontier))

    def _guess(self, lim, direction):
        """Candidate marker from the preimage of the level ``lim``.

        ``f(Sigma_c)`` clears ``lim`` exactly when ``Sigma_c`` clears
        ``f^-1(Sigma_lim)``, so the nearest integer past that curve is
        usually the answer; :meth:`_search` confirms it.
        """
        lo, hi = level_spans(invert(self.f), np.array([lim]), self.resolution, self.fiber)
        if direction > 0:
            return int_above(max(lim, float(hi[0])))
        return int_below(min(lim, float(lo[0])))

    def _search(self, frontier, admissible, direction, guess=None):
        """Nearest admissible integer beyond ``frontier``.

        ``admissible`` maps an array of candidates to booleans and is
        monotone along the search direction, so this returns the same
        integer as a linear scan.  Candidates are tested in batches: first
        at geometrically growing offsets, then at evenly spaced points of
        the bracketing interval.
        """
        first = int_above(frontier) if direction > 0 else int_below(frontier)
        reach = self._reach(frontier)
        rnd = np.floor if direction > 0 else np.ceil
        edge = float(rnd(frontier + direction * reach))
        if guess is not None and direction * (guess - first) >= 0 and direction * (edge - guess) >= 0:
            if guess == first:
                if admissible(np.array([guess]))[0]:
                    return guess
            else:
                prev = int_below(guess) if direction > 0 else int_above(guess)
                ok = admissible(np.array([prev, guess]))
                if ok[1] and not ok[0]:
                    return guess
        bad, offset = None, 0.0
        while True:
            steps = offset + np.exp2(np.arange(SEARCH_BATCH, dtype=float)) - 1.0
            cand = first + direction * steps
            beyond = direction * (cand - edge) >= 0
            if beyond.any():
                cand = np.append(cand[~beyond], edge)
            ok = admissible(cand)
            if ok.any():
                i = int(np.argmax(ok))
                good = float(cand[i])
                if i > 0:
                    bad = float(cand[i - 1])
                break
            if beyond.any():
                raise NotProper(f"no admissible marker within {reach:g} of level {frontier:g}")
            bad, offset = float(cand[-1]), 2.0 * steps[-1] + 1.0
        while bad is not None:
            inner = np.unique(rnd(np.linspace(bad, good, SEARCH_BATCH + 2)[1:-1]))
            inner = inner[(direction * (inner - bad) > 0) & (direction * (good - inner) > 0)]
            if direction < 0:
                inner = inner[::-1]
            if inner.size == 0:
                break
            ok = admissible(inner)
            if ok.any():
                i = int(np.argmax(ok))
                good = float(inner[i])
                if i > 0:
                    bad = float(inner[i - 1])
            else:
                bad = float(inner[-1])
        return good

    def _extend_forward(self):
        with self._lock:
            m_next = self._m[-1]
            lim = m_next + self.pad(m_next)
            tk = self._search(m_next, lambda c: self._span_many(c)[0] > lim, +1,
                              self._guess(lim, +1))
            top = self._span(tk)[1]
            if top - tk > self._reach(tk):
                raise NotProper(f"image of level {tk:g} escapes the search window")
            self._t.append(tk)
            self._m.append(int_above(top + self.pad(top)))

    def _extend_backward(self):
        with self._lock:
            m_prev = self._m[0]
            lim = m_prev - self.pad(m_prev)
            tk = self._search(m_prev, lambda c: self._span_many(c)[1] < lim, -1,
                              self._guess(lim, -1))
            bottom = self._span(tk)[0]
            if tk - bottom > self._reach(tk):
                raise NotProper(f"image of level {tk:g} escapes the search window")
            self._lo -= 1
            self._t.insert(0, tk)
            self._m.insert(0, int_below(bottom - self.pad(bottom)))

    def _ensure(self, k):
        while True:
            lo, hi = self.frontier
            if lo <= k <= hi:
                return
            if abs(k) > self.horizon:
                raise NotProper(f"index {k} beyond horizon {self.horizon}")
            if k > hi:
                self._extend_forward()
            else:
                self._extend_backward()

    def m(self, k):
        """Band boundary ``m_k``; ``A_k = [m_k, m_{k+1}]``."""
        with self._lock:
            lo, hi = self.frontier
            if k > hi + 1:
                self._ensure(k - 1)
            elif k < lo:
                self._ensure(k)
            return self._m[k - self._lo]

    def t(self, k):
        """Marker level ``t_k`` of the circle ``Sigma_k``."""
        with self._lock:
            self._ensure(k)
            return self._t[k - self._lo]

    def extend_to(self, K):
        """Materialize every index in ``[-K, K]``."""
        with self._lock:
            self._ensure(K)
            self._ensure(-K)
        return self

    def lattice(self):
        """Materialized ``(k, m_k, t_k)`` triples, plus the top boundary."""
        with self._lock:
            lo, hi = self.frontier
            rows = [(k, self._m[k - lo], self._t[k - lo]) for k in range(lo, hi + 1)]
            return rows, self._m[-1]

    def recipe(self):
        return {"t0": self.t0, "margin": self.margin, "window": self.window_w,
                "horizon": self.horizon, "resolution": self.resolution}

    def __repr__(self):
        lo, hi = self.frontier
        return f"SuitedDecomposition(k in [{lo}, {hi}], m={self._m[:3]}...)"


class ExplicitSuited:
    """A fixed, finite lattice (for inspecting hand-made or corrupted data)."""

    def __init__(self, f, m, t, margin=DEFAULT_MARGIN, resolution=DEFAULT_RESOLUTION,
                 fiber=None):
        self.f = f
        self.fiber = fiber or f.fiber or FiberKind.POINT
        self._m, self._t = dict(m), dict(t)
        self.margin = float(margin)
        self.resolution = int(resolution)

    def pad(self, level):
        return max(self.margin, RELATIVE_MARGIN * abs(level))

    def m(self, k):
        return float(self._m[k])

    def t(self, k):
        return float(self._t[k])


def build_suited(f, t0=0, horizon=DEFAULT_HORIZON, window=DEFAULT_WINDOW,
                 margin=DEFAULT_MARGIN, resolution=DEFAULT_RESOLUTION, fiber=None,
                 materialize=2):
    """Greedy suited decomposition for ``f``.

    The first band is symmetric about ``t0``; every later marker is the
    nearest integer past the current boundary whose level circle and its
    image clear that boundary by ``margin``, and the next boundary is the
    nearest integer clearing their top by ``margin`` (mirrored downward).
    ``materialize`` bands on each side are built eagerly so that
    construction errors surface here.

    Raises
    ------
    NotProper
        If no admissible integer exists within the search window.
    GraphViolation
        If a level image is not a graph.
    """
    suited = SuitedDecomposition(f, t0, margin, window, horizon, resolution, fiber)
    if materialize:
        suited.extend_to(materialize)
    return suited


@dataclass
class LoxodromicCertificate:
    """A map with bands it translates one step toward ``sink``.

    ``sink`` is +1 for the end ``t -> +inf`` and -1 for ``t -> -inf``; the
    map sends ``A_k`` to ``A_{k + sink}``.
    """

    map: object
    bands: BandSequence
    sink: int
    dynamics_report: VerificationReport | None = None
    transport_error: float = 0.0
    suited: object = None
    fiber: FiberKind = FiberKind.POINT
    notes: dict = field(default_factory=dict)

    @property
    def source(self):
        return -self.sink

    def inverse(self):
        from .maps import invert

        return LoxodromicCertificate(invert(self.map), self.bands, -self.sink, None,
                                     self.transport_error, self.suited, self.fiber)


def _boundary_image(m, level, fiber, n=64):
    if fiber is FiberKind.POINT:
        _, t = apply(m, None, np.array([level]))
        return t
    th = np.arange(n) / n
    _, t = apply(m, th, np.full(n, level))
    return t


def certify_loxodromic(m, bands, iterations=100, samples=16, ks=range(-3, 4),
                       tol=1e-6, fiber=None, suited=None):
    """Check band transport and orbit dynamics; label the sink.

    Raises
    ------
    NotLoxodromic
        With ``condition == "iii"`` when boundary circles are not carried
        to neighbouring boundaries, ``"iv"`` when orbits stall.
    """
    fiber = fiber or m.fiber or FiberKind.POINT
    b0 = bands.level(0)
    img0 = _boundary_image(m, b0, fiber)
    sink = 0
    for d in (1, -1):
        if np.max(np.abs(img0 - bands.level(d))) < tol:
            sink = d
            break
    if sink == 0:
        raise NotLoxodromic("iii", f"boundary level {b0:g} is not carried to a neighbour")
    worst = 0.0
    for k in ks:
        img = _boundary_image(m, bands.level(k), fiber)
        err = float(np.max(np.abs(img - bands.level(k + sink))))
        worst = max(worst, err)
        if not err < tol:
            raise NotLoxodromic("iii", f"boundary {k} lands {err:.2e} off its target")
    cert = LoxodromicCertificate(m, bands, sink, None, worst, suited, fiber)
    if iterations:
        rep = verify_dynamics(cert, iterations, samples)
        if not rep.passed:
            raise NotLoxodromic("iv", f"band progress {rep.extras['min_progress']}")
        cert.dynamics_report = rep
    return cert
