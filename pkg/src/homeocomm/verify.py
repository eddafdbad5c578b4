"""
Verification harness: grid comparisons, suitedness containment, and
orbit dynamics.  Every check returns a :class:`VerificationReport` with
``passed == (max_error < tolerance)``.
"""

from dataclasses import dataclass, field

import numpy as np

from .curves import grid_points, level_image, pointwise_distance
from .maps import FiberKind, apply, invert

LINE_WINDOW = (-50.0, 50.0)
LINE_GRID = (1, 10_000)
CYLINDER_WINDOW = (-20.0, 20.0)
CYLINDER_GRID = (200, 200)
WORST = 5


def default_window(fiber):
    return LINE_WINDOW if fiber is FiberKind.POINT else CYLINDER_WINDOW


def default_grid(fiber):
    return LINE_GRID if fiber is FiberKind.POINT else CYLINDER_GRID


def refine_grid(grid):
    """Grid with every old node kept: angles doubled, levels 2n - 1."""
    n_theta, n_t = grid
    return (2 * n_theta if n_theta > 1 else 1, 2 * n_t - 1)


@dataclass
class VerificationReport:
    window: tuple
    grid: tuple
    tolerance: float
    max_error: float
    failures: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    @property
    def passed(self):
        return bool(self.max_error < self.tolerance)

    def to_dict(self):
        d = {
            "window": [float(v) for v in self.window],
            "grid": [int(v) for v in self.grid],
            "tolerance": float(self.tolerance),
            "max_error": float(self.max_error),
            "pass": self.passed,
            "failures": self.failures,
        }
        if self.extras:
            d["extras"] = self.extras
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["window"]), tuple(d["grid"]), d["tolerance"],
                   d["max_error"], list(d.get("failures", [])), dict(d.get("extras", {})))

    def summary(self):
        verdict = "PASS" if self.passed else "FAIL"
        return f"{verdict} max_error={self.max_error:.3e} tol={self.tolerance:.1e}"


def _worst(err, theta, t, tol, limit=WORST):
    order = np.argsort(-err, kind="stable")[:limit]
    out = []
    for i in order:
        if not err[i] >= tol:
            break
        pt = {"t": float(t[i]), "error": float(err[i])}
        if theta is not None:
            pt["theta"] = float(theta[i])
        out.append(pt)
    return out


def verify_identity(lhs, rhs, window=None, grid=None, tol=1e-9, fiber=None):
    """Sup-distance comparison of two maps on a verification grid."""
    fiber = fiber or lhs.fiber or rhs.fiber or FiberKind.POINT
    window = tuple(window or default_window(fiber))
    grid = tuple(grid or default_grid(fiber))
    theta, t = grid_points(fiber, window, grid)
    err = pointwise_distance(lhs, rhs, theta, t)
    max_error = float(err.max())
    return VerificationReport(window, grid, tol, max_error, _worst(err, theta, t, tol))


def verify_suitedness(f, suited, ks):
    """Containment of ``Sigma_k`` and ``f(Sigma_k)`` in the interior of ``A_k``.

    The per-band error is the signed amount by which the margin-padded
    strict containment fails; ``tolerance`` is 0, so the report passes
    only when every band has positive slack.
    """
    fiber = suited.fiber
    errs, failures = [], []
    for k in ks:
        lo_b, hi_b = suited.m(k), suited.m(k + 1)
        tk = suited.t(k)
        img = level_image(f, tk, suited.resolution, fiber=fiber)
        lo = min(tk, img.min())
        hi = max(tk, img.max())
        e = max(lo_b + suited.pad(lo_b) - lo, hi - (hi_b - suited.pad(hi_b)))
        errs.append(e)
        if e >= 0:
            failures.append({"k": int(k), "t_k": tk, "band": [lo_b, hi_b],
                             "span": [lo, hi], "error": float(e)})
    max_error = float(max(errs)) if errs else -np.inf
    window = (suited.m(min(ks)), suited.m(max(ks) + 1)) if errs else (0.0, 0.0)
    return VerificationReport(window, (len(errs), 0), 0.0, max_error, failures[:WORST])


def dynamics_starts(cert, samples):
    b0, b1 = cert.bands.level(0), cert.bands.level(1)
    u = (np.arange(samples) + 0.5) / samples
    t = b0 + (b1 - b0) * u
    theta = None if cert.fiber is FiberKind.POINT else u.copy()
    return theta, t


SNAP = 1e-12


def _index_range(bands, t):
    """Band index, widened to both neighbours within rounding of a boundary.

    Orbits can approach a boundary geometrically, and a point that belongs
    just inside a band may round onto (or past) its boundary.
    """
    idx = bands.index(t)
    kmin, lv = bands.materialized()
    below, above = lv[idx - kmin], lv[idx + 1 - kmin]
    near_lo = np.abs(t - below) <= SNAP * np.maximum(1.0, np.abs(below))
    near_hi = np.abs(t - above) <= SNAP * np.maximum(1.0, np.abs(above))
    return np.where(near_lo, idx - 1, idx), np.where(near_hi, idx + 1, idx)


def verify_dynamics(cert, iterations=100, samples=16, starts=None):
    """Orbit evidence that points flow from the source to the sink.

    Forward iterates must strictly increase their band index in the sink
    direction at every step and backward iterates must move toward the
    source.  ``max_error`` is minus the smallest per-step band progress.
    """
    bands, sink = cert.bands, cert.sink
    theta, t = starts if starts is not None else dynamics_starts(cert, samples)
    t = np.asarray(t, dtype=float)
    min_progress = np.inf
    failures = []
    finals = {}
    for direction, m in ((1, cert.map), (-1, invert(cert.map))):
        th, tt = (None if theta is None else np.asarray(theta, float).copy()), t.copy()
        idx = _index_range(bands, tt)
        for step in range(iterations):
            th, tt = apply(m, th, tt)
            new = _index_range(bands, tt)
            if sink * direction > 0:
                prog = new[1] - idx[0]
            else:
                prog = idx[1] - new[0]
            low = int(prog.min())
            if low < min_progress:
                min_progress = low
            if low <= 0 and len(failures) < WORST:
                i = int(np.argmin(prog))
                failures.append({"start_t": float(t[i]), "step": step + 1,
                                 "direction": "forward" if direction > 0 else "backward",
                                 "progress": low})
            idx = new
        finals["forward" if direction > 0 else "backward"] = [float(v) for v in tt]
    if iterations == 0:
        min_progress = 0
    extras = {"min_progress": int(min_progress), "iterations": int(iterations),
              "final_levels": finals}
    window = (float(t.min()), float(t.max()))
    return VerificationReport(window, (samples, iterations), 0.0,
                              float(-min_progress), failures, extras)
