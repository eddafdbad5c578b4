"""
Sampled geometry on fiber x R: graph curves, level images, and the
sampled checks used to admit a map into the constructions.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import GraphViolation
from .maps import FiberKind, apply, circle_dist

DEFAULT_RESOLUTION = 1024
MAX_RESOLUTION = 65536
# below this normalized increment a monotonicity verdict is "marginal"
MARGINAL = 1e-6
# chord deviation that triggers refinement of an exact level image
REFINE_TOL = 1e-10


class GraphCurve:
    """The embedded circle ``{(theta, gamma(theta))}``.

    ``values[i]`` is ``gamma(thetas[i])``; the sample angles default to
    ``i / N`` and may be any strictly increasing list in ``[0, 1)``.
    Between samples the curve is the periodic linear interpolant.  On the
    point fiber the curve is a single level and ``values`` has length one.
    """

    def __init__(self, values, fiber=FiberKind.CIRCLE, thetas=None):
        v = np.asarray(values, dtype=float).ravel()
        if not np.all(np.isfinite(v)):
            raise ValueError("curve values must be finite")
        if fiber is FiberKind.POINT and len(v) != 1:
            raise ValueError("a point-fiber curve is a single level")
        if thetas is not None:
            thetas = np.asarray(thetas, dtype=float).ravel()
            if thetas.shape != v.shape:
                raise ValueError("need one angle per sample")
            if np.any(np.diff(thetas) <= 0) or thetas[0] < 0 or thetas[-1] >= 1:
                raise ValueError("sample angles must increase within [0, 1)")
            thetas.flags.writeable = False
        v.flags.writeable = False
        self.values = v
        self.fiber = fiber
        self._thetas = thetas

    @classmethod
    def constant(cls, level, fiber, resolution=DEFAULT_RESOLUTION):
        n = 1 if fiber is FiberKind.POINT else resolution
        return cls(np.full(n, float(level)), fiber)

    @property
    def resolution(self):
        return len(self.values)

    @property
    def uniform(self):
        return self._thetas is None

    @property
    def thetas(self):
        if self._thetas is None:
            return np.arange(self.resolution) / self.resolution
        return self._thetas

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.resolution == 1:
            return np.full_like(theta, self.values[0])
        return np.interp(theta, self.thetas, self.values, period=1.0)

    def min(self):
        return float(self.values.min())

    def max(self):
        return float(self.values.max())

    def __repr__(self):
        return f"GraphCurve(N={self.resolution}, range=[{self.min():g}, {self.max():g}])"


@dataclass
class CircleMapCheck:
    lift: np.ndarray
    ok: bool
    margin: float


def circle_lift(angles):
    """Lift samples ``Theta(j/N)`` of a circle map and test degree-1 monotonicity.

    ``margin`` is the smallest increment scaled by ``N`` (a lower estimate
    of the derivative); it is negative or zero when the sampled map folds.
    """
    a = np.asarray(angles, dtype=float)
    n = len(a)
    inc = np.diff(np.append(a, a[0] + 1.0))
    inc = np.mod(inc, 1.0)
    # a backwards step wraps to nearly a full turn and shows up in the total
    total = inc.sum()
    ok = bool(abs(total - 1.0) < 1e-6 and inc.min() > 0.0)
    lift = a[0] + np.concatenate([[0.0], np.cumsum(inc[:-1])])
    margin = float(inc.min() * n) if ok else min(0.0, float(inc.min() * n) - (total - 1.0))
    return CircleMapCheck(lift, ok, margin)


def _resampled(lift, img_t, resolution):
    x = np.arange(resolution) / resolution
    return np.interp(x, np.mod(lift, 1.0), img_t, period=1.0)


def level_image(m, t0, resolution=DEFAULT_RESOLUTION, max_resolution=MAX_RESOLUTION,
                fiber=None):
    """Image of the level circle ``fiber x {t0}`` as a graph curve.

    The image is sampled at ``resolution`` equispaced angles (doubling up to
    ``max_resolution`` while the monotonicity margin is marginal), then
    re-sampled over equispaced abscissae.

    Raises
    ------
    GraphViolation
        If the sampled angle map is not a degree-1 increasing circle map.
    """
    fiber = fiber or m.fiber or FiberKind.POINT
    if fiber is FiberKind.POINT:
        _, t = apply(m, None, np.array([float(t0)]))
        return GraphCurve(t, FiberKind.POINT)
    if resolution < 16:
        raise ValueError("resolution must be at least 16")
    n = resolution
    while True:
        th = np.arange(n) / n
        img_th, img_t = apply(m, th, np.full(n, float(t0)))
        chk = circle_lift(img_th)
        if chk.ok and chk.margin >= MARGINAL:
            break
        if n >= max_resolution:
            if chk.ok:
                break
            raise GraphViolation(
                f"image of level {t0:g} is not a graph at resolution {n}"
            )
        n *= 2
    return GraphCurve(_resampled(chk.lift, img_t, resolution), FiberKind.CIRCLE)


def exact_level_image(m, t0, resolution=DEFAULT_RESOLUTION, max_points=MAX_RESOLUTION,
                      tol=REFINE_TOL, fiber=None):
    """Level image on its own (non-uniform) sample angles, refined adaptively.

    Samples ``Theta(theta_i)`` keep the image's kinks at sample angles
    instead of smearing them by resampling.  Parameter intervals whose
    midpoint image leaves the chord by more than ``tol`` (in level, or
    in angle order) are bisected until none remain or ``max_points`` is
    reached.
    """
    fiber = fiber or m.fiber or FiberKind.POINT
    if fiber is FiberKind.POINT:
        return level_image(m, t0, fiber=fiber)
    base = level_image(m, t0, resolution, fiber=fiber)  # graph check
    n = resolution
    th = np.arange(n) / n
    img_th, img_t = apply(m, th, np.full(n, float(t0)))
    chk = circle_lift(img_th)
    if not chk.ok:
        return base
    par, psi, lev = th, chk.lift, img_t
    # parameter intervals [par[i], par[i + 1]] (periodic) still to test
    active = np.arange(len(par))
    while active.size and len(par) + active.size <= max_points:
        nxt = (active + 1) % len(par)
        p0, p1 = par[active], np.where(nxt == 0, 1.0, par[nxt])
        q0, q1 = psi[active], np.where(nxt == 0, psi[0] + 1.0, psi[nxt])
        l0, l1 = lev[active], lev[nxt]
        mid = 0.5 * (p0 + p1)
        m_th, m_t = apply(m, mid, np.full(mid.shape, float(t0)))
        m_psi = q0 + np.mod(m_th - q0, 1.0)
        w = (m_psi - q0) / (q1 - q0)
        bad = (np.abs(l0 + w * (l1 - l0) - m_t) > tol) | (w <= 0) | (w >= 1)
        if not bad.any():
            break
        par = np.concatenate([par, mid[bad]])
        psi = np.concatenate([psi, m_psi[bad]])
        lev = np.concatenate([lev, m_t[bad]])
        order = np.argsort(par, kind="stable")
        par, psi, lev = par[order], psi[order], lev[order]
        rank = np.empty_like(order)
        rank[order] = np.arange(len(order))
        new = rank[len(order) - int(bad.sum()):]
        left = rank[active[bad]]
        active = np.unique(np.concatenate([left, new]))
    ang = np.mod(psi, 1.0)
    order = np.argsort(ang, kind="stable")
    ang, lev = ang[order], lev[order]
    keep = np.concatenate([[True], np.diff(ang) > 0])
    return GraphCurve(lev[keep], FiberKind.CIRCLE, thetas=ang[keep])


def level_spans(m, levels, resolution=DEFAULT_RESOLUTION, fiber=None):
    """``(min, max)`` of each level image, as :func:`level_image` would give.

    All levels are evaluated in one vectorized pass; rows whose angle map
    is marginal fall back to the adaptive single-level path.
    """
    fiber = fiber or m.fiber or FiberKind.POINT
    levels = np.asarray(levels, dtype=float)
    if fiber is FiberKind.POINT:
        _, t = apply(m, None, levels)
        return t, t.copy()
    n = resolution
    th = np.arange(n) / n
    img_th, img_t = apply(m, np.tile(th, len(levels)), np.repeat(levels, n))
    img_th, img_t = img_th.reshape(-1, n), img_t.reshape(-1, n)
    lo, hi = np.empty(len(levels)), np.empty(len(levels))
    for i, lv in enumerate(levels):
        chk = circle_lift(img_th[i])
        if chk.ok and chk.margin >= MARGINAL:
            gamma = _resampled(chk.lift, img_t[i], resolution)
        else:
            gamma = level_image(m, lv, resolution, fiber=fiber).values
        lo[i], hi[i] = gamma.min(), gamma.max()
    return lo, hi


@dataclass
class OrientationReport:
    passed: bool
    reasons: list = field(default_factory=list)

    def __bool__(self):
        return self.passed


def check_orientation(m, window=(-50.0, 50.0), samples=256, fiber=None,
                      far=1e6, resolution=256):
    """Sampled membership test for the identity component.

    Point fiber: strict monotonicity of sampled levels.  Circle fiber:
    every sampled level image is a degree-1 increasing graph and the
    images of increasing levels are strictly nested.  Both: the far ends
    keep their sign (end preservation).
    """
    fiber = fiber or m.fiber or FiberKind.POINT
    lo, hi = window
    reasons = []
    levels = np.linspace(lo, hi, samples)
    if fiber is FiberKind.POINT:
        _, img = apply(m, None, levels)
        if np.any(np.diff(img) <= 0):
            reasons.append("levels are not mapped strictly increasingly")
        _, ends = apply(m, None, np.array([-far, far]))
    else:
        n = resolution
        th = np.arange(n) / n
        prev = None
        for lv in levels:
            img_th, img_t = apply(m, th, np.full(n, lv))
            chk = circle_lift(img_th)
            if not chk.ok:
                reasons.append(f"angle map at level {lv:g} is not degree-1 increasing")
                break
            gamma = np.interp(th, np.mod(chk.lift, 1.0), img_t, period=1.0)
            if prev is not None and np.any(gamma <= prev):
                reasons.append(f"level images are not nested near level {lv:g}")
                break
            prev = gamma
        _, ends = apply(m, np.zeros(2), np.array([-far, far]))
    if not (ends[0] < 0 < ends[1]):
        reasons.append("ends are not preserved")
    return OrientationReport(not reasons, reasons)


def grid_points(fiber, window, grid):
    """Flattened verification grid ``(theta, t)``; theta is None on the line."""
    lo, hi = window
    n_theta, n_t = grid
    ts = np.linspace(lo, hi, n_t)
    if fiber is FiberKind.POINT:
        return None, ts
    th = np.arange(n_theta) / n_theta
    TH, T = np.meshgrid(th, ts, indexing="ij")
    return TH.ravel(), T.ravel()


def pointwise_distance(a, b, theta, t):
    """Sup-product metric between images: max(circle distance, |dt|)."""
    th_a, t_a = apply(a, theta, t)
    th_b, t_b = apply(b, theta, t)
    d = np.abs(t_a - t_b)
    if theta is not None:
        d = np.maximum(d, circle_dist(th_a, th_b))
    return d


def sup_distance(a, b, window, grid, fiber=None):
    """Max over the grid of the distance between ``a(p)`` and ``b(p)``."""
    fiber = fiber or a.fiber or b.fiber or FiberKind.POINT
    theta, t = grid_points(fiber, window, grid)
    return float(pointwise_distance(a, b, theta, t).max())
