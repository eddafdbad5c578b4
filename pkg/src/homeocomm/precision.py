"""
Vectorized double-double arithmetic for levels.

A :class:`DD` array holds ``hi + lo`` with ``|lo| <= ulp(hi) / 2``, about
106 bits of mantissa.  The conjugators built by the factorizations have
slopes spanning many orders of magnitude, so rounding an intermediate
level to a double can move the composite far more than the verification
tolerance; map trees are therefore evaluated on DD levels and rounded
once at the end.  Only ``+ - * /``, comparisons, and indexing are
provided: that is all the PL and cubic nodes use.
"""

import numpy as np

_SPLIT = 134217729.0  # 2**27 + 1


def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _quick_two_sum(a, b):
    s = a + b
    return s, b - (s - a)


def _split(a):
    t = _SPLIT * a
    hi = t - (t - a)
    return hi, a - hi


def _two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def _parts(x):
    if isinstance(x, DD):
        return x.hi, x.lo
    x = np.asarray(x)
    if x.dtype.itemsize > 8 and x.dtype.kind == "f":
        hi = x.astype(np.float64)
        return hi, (x - hi).astype(np.float64)
    x = x.astype(np.float64, copy=False)
    return x, np.zeros_like(x)


class DD:
    """Array of double-double numbers."""

    __array_ufunc__ = None
    __slots__ = ("hi", "lo")

    def __init__(self, hi, lo=None):
        self.hi = np.asarray(hi, dtype=np.float64)
        self.lo = np.zeros_like(self.hi) if lo is None else np.asarray(lo, dtype=np.float64)

    @classmethod
    def of(cls, x):
        if isinstance(x, DD):
            return x
        return cls(*_parts(x))

    # array protocol
    @property
    def shape(self):
        return self.hi.shape

    @property
    def size(self):
        return self.hi.size

    @property
    def ndim(self):
        return self.hi.ndim

    def __len__(self):
        return len(self.hi)

    def __getitem__(self, idx):
        return DD(self.hi[idx], self.lo[idx])

    def __setitem__(self, idx, value):
        h, l = _parts(value)
        self.hi[idx] = h
        self.lo[idx] = l

    def copy(self):
        return DD(self.hi.copy(), self.lo.copy())

    def ravel(self):
        return DD(self.hi.ravel(), self.lo.ravel())

    def reshape(self, *shape):
        return DD(self.hi.reshape(*shape), self.lo.reshape(*shape))

    def min(self):
        return float(self.hi.min())

    def max(self):
        return float(self.hi.max())

    def to_float(self):
        return self.hi + self.lo

    def to_long(self):
        return self.hi.astype(np.longdouble) + self.lo

    def __repr__(self):
        return f"DD({self.to_float()!r})"

    # arithmetic
    def __neg__(self):
        return DD(-self.hi, -self.lo)

    def __add__(self, other):
        if not isinstance(other, DD):
            b = np.asarray(other)
            if b.dtype.itemsize <= 8:
                s, e = _two_sum(self.hi, b.astype(np.float64, copy=False))
                return DD(*_quick_two_sum(s, e + self.lo))
        bh, bl = _parts(other)
        s, e = _two_sum(self.hi, bh)
        t, f = _two_sum(self.lo, bl)
        e = e + t
        s, e = _quick_two_sum(s, e)
        e = e + f
        return DD(*_quick_two_sum(s, e))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, DD):
            return self + DD(-other.hi, -other.lo)
        return self + (-np.asarray(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, DD):
            b = np.asarray(other)
            if b.dtype.itemsize <= 8:
                b = b.astype(np.float64, copy=False)
                p, e = _two_prod(self.hi, b)
                return DD(*_quick_two_sum(p, e + self.lo * b))
        bh, bl = _parts(other)
        p, e = _two_prod(self.hi, bh)
        e = e + (self.hi * bl + self.lo * bh)
        return DD(*_quick_two_sum(p, e))

    __rmul__ = __mul__

    def __truediv__(self, other):
        b = DD.of(other)
        q1 = self.hi / b.hi
        r = self - b * q1
        q2 = r.hi / b.hi
        r = r - b * q2
        q3 = r.hi / b.hi
        q1, q2 = _quick_two_sum(q1, q2)
        return DD(q1, q2) + q3

    def __rtruediv__(self, other):
        return DD.of(other) / self

    # comparisons (exact)
    def _cmp(self, other):
        bh, bl = _parts(other)
        return self.hi - bh, self.hi == bh, self.lo - bl

    def __lt__(self, other):
        d, eq, dl = self._cmp(other)
        return (d < 0) | (eq & (dl < 0))

    def __le__(self, other):
        d, eq, dl = self._cmp(other)
        return (d < 0) | (eq & (dl <= 0))

    def __gt__(self, other):
        d, eq, dl = self._cmp(other)
        return (d > 0) | (eq & (dl > 0))

    def __ge__(self, other):
        d, eq, dl = self._cmp(other)
        return (d > 0) | (eq & (dl >= 0))


def is_dd(x):
    return isinstance(x, DD)


def approx(x):
    """Nearest double (the ``hi`` part) of a DD array, or ``x`` itself."""
    return x.hi if isinstance(x, DD) else np.asarray(x)


def where(mask, a, b):
    """Elementwise select that keeps DD operands DD."""
    if isinstance(a, DD) or isinstance(b, DD):
        ah, al = _parts(a)
        bh, bl = _parts(b)
        return DD(np.where(mask, ah, bh), np.where(mask, al, bl))
    return np.where(mask, a, b)


def locate(xs, x):
    """``searchsorted(xs, x, side="right") - 1`` with exact DD comparisons."""
    if not isinstance(x, DD):
        return np.searchsorted(xs, x, side="right") - 1
    j = np.searchsorted(xs, x.hi, side="right") - 1
    jc = np.clip(j, 0, len(xs) - 1)
    back = (j >= 0) & (x.hi == xs[jc]) & (x.lo < 0)
    return j - back


def segment_slopes(xs, ys):
    """DD slopes of the PL segments through ``(xs, ys)``."""
    return exact_diff(ys[1:], ys[:-1]) / exact_diff(xs[1:], xs[:-1])


def exact_diff(a, b):
    """``a - b`` for doubles ``a``, ``b`` as an exact DD."""
    return DD(*_two_sum(np.asarray(a, dtype=np.float64), -np.asarray(b, dtype=np.float64)))
