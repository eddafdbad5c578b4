"""
Seeded random test maps.

Line maps are PL homeomorphisms with at most 20 breakpoints in [-10, 10]
and slopes log-uniform in [0.1, 10], continued affinely.  Cylinder maps
are compositions of at most 6 primitives (VerticalPL, Twist, FiberBump).
"""

import numpy as np

from .maps import FiberBump, FiberKind, Twist, VerticalPL, compose

LINE_SEED = 20240601
CYLINDER_SEED = 20240602


def random_line_pl(rng, max_breaks=20, span=10.0, slope_range=(0.1, 10.0)):
    """A random increasing PL map of R with affine tails."""
    n = int(rng.integers(2, max_breaks + 1))
    xs = np.sort(rng.uniform(-span, span, n))
    while np.any(np.diff(xs) < 1e-3):
        xs = np.sort(rng.uniform(-span, span, n))
    lo, hi = np.log(slope_range)
    slopes = np.exp(rng.uniform(lo, hi, n - 1))
    y0 = rng.uniform(-span / 2, span / 2)
    ys = y0 + np.concatenate([[0.0], np.cumsum(slopes * np.diff(xs))])
    return VerticalPL(np.column_stack([xs, ys]))


def line_corpus(count=100, seed=LINE_SEED):
    rng = np.random.default_rng(seed)
    return [random_line_pl(rng) for _ in range(count)]


def _random_vertical(rng, span=8.0):
    n = int(rng.integers(2, 6))
    xs = np.sort(rng.uniform(-span, span, n))
    slopes = np.exp(rng.uniform(np.log(0.5), np.log(2.0), n - 1))
    ys = rng.uniform(-2, 2) + xs[0] + np.concatenate([[0.0], np.cumsum(slopes * np.diff(xs))])
    return VerticalPL(np.column_stack([xs, ys]))


def _random_twist(rng, span=8.0):
    n = int(rng.integers(1, 5))
    ts = np.sort(rng.uniform(-span, span, n))
    while n > 1 and np.any(np.diff(ts) < 0.5):
        ts = np.sort(rng.uniform(-span, span, n))
    return Twist(np.column_stack([ts, rng.uniform(-0.5, 0.5, n)]))


def _random_bump(rng, span=8.0, K=64):
    lo = rng.uniform(-span, span - 2)
    hi = lo + rng.uniform(1.5, 4.0)
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    th = np.arange(K) / K
    phase, amp = rng.uniform(0, 1), rng.uniform(0.05, 0.35) * half
    src = np.full(K, mid)
    dst = mid + amp * np.cos(2 * np.pi * (th + phase))
    return FiberBump((lo, hi), src[:, None], dst[:, None], fiber=FiberKind.CIRCLE)


def random_cylinder(rng, max_parts=6):
    makers = (_random_vertical, _random_twist, _random_bump)
    n = int(rng.integers(1, max_parts + 1))
    parts = [makers[int(rng.integers(0, 3))](rng) for _ in range(n)]
    if all(p.fiber is not FiberKind.CIRCLE for p in parts):
        parts.append(_random_twist(rng))
    return compose(parts)


def cylinder_corpus(count=50, seed=CYLINDER_SEED):
    rng = np.random.default_rng(seed)
    return [random_cylinder(rng) for _ in range(count)]
