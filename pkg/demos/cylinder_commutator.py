"""Factor a twisted, bumped map of the cylinder S^1 x R.

The input twists angles depending on height and bends one level circle
into a wavy graph.  The factorization straightens the image curves band
by band before building the conjugator.
"""

import numpy as np

from homeocomm import FiberKind, apply, commutator_factorization
from homeocomm.corpus import cylinder_corpus

f = cylinder_corpus(2)[1]
print("input:", f)

cert = commutator_factorization(f, FiberKind.CIRCLE)
print("grid check:", cert.report.summary())

s = cert.details["suited"]
print("band boundaries m_k, k = -1..2:", [s.m(k) for k in range(-1, 3)])

rng = np.random.default_rng(7)
theta, t = rng.uniform(0, 1, 4), rng.uniform(-10, 10, 4)
th1, t1 = apply(f, theta, t)
th2, t2 = apply(cert.product(), theta, t)
for row in zip(theta, t, th1, t1, th2, t2):
    print("(%.3f, %7.3f) -> f: (%.6f, %9.6f)  [a,b]: (%.6f, %9.6f)" % row)
