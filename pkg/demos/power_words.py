"""Write t -> t + 3 as a product of powers g_1^2 g_2^3.

The map is first split into two loxodromic pieces; each piece is then
replaced by a conjugate p-th root of itself.
"""

import numpy as np

from homeocomm import FiberKind, VerticalPL, apply, power_word_decomposition

g = VerticalPL.translation(3.0)
for exps in [(2, 3), (-2, 3), (1, 4)]:
    cert = power_word_decomposition(g, exps, FiberKind.POINT)
    print(exps, cert.report.summary())
    for gi, p, moved in zip(cert.factors["g"], exps, cert.details["displacement"]):
        _, y = apply(gi, None, np.array([0.0, 10.0]))
        print(f"  g_i^{p}: g_i(0) = {y[0]:.6f}, g_i(10) = {y[1]:.6f}, max move {moved:.3f}")
