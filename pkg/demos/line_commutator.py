"""Write the unit translation t -> t + 1 as a single commutator.

Walks through the construction: the suited lattice, the band shift g',
the assembled g, the conjugator c, and the final grid check of
f = [g^-1, c].
"""

import numpy as np

from homeocomm import FiberKind, VerticalPL, apply, build_suited, commutator_factorization

f = VerticalPL.translation(1.0)

s = build_suited(f)
print("band boundaries m_k, k = -1..2:", [s.m(k) for k in range(-1, 3)])
print("marker levels   t_k, k = -1..1:", [s.t(k) for k in range(-1, 2)])

cert = commutator_factorization(f, FiberKind.POINT)
a, b = cert.factors["a"], cert.factors["b"]
print("grid check:", cert.report.summary())

# g = a^-1 pushes each band one step up; so does g o f on the marker bands
g = cert.details["g"]
ms = np.array([s.m(k) for k in range(-1, 3)])
_, img = apply(g, None, ms[:-1])
print("g(m_k) =", img.tolist(), " m_{k+1} =", ms[1:].tolist())

x = np.linspace(-5, 5, 5)
_, lhs = apply(cert.product(), None, x)
print("a b a^-1 b^-1 at", x.tolist(), "->", lhs.tolist())
