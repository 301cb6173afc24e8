"""What the epsilon schedule buys.

A constant gain eps0 trades robustness (size of the inflated set, eps0 d^2/4)
against intervention everywhere (|L_g h| / eps0).  An exponential schedule
lets the trade-off depend on how close the state is to the boundary.
"""

import numpy as np

from tissf import ConstantEpsilon, ExponentialEpsilon, LinearClassK
from tissf.cert import eps_condition_slack, gamma_issf, gamma_tissf

alpha = LinearClassK(1.0)
d = 3.0
sched = ExponentialEpsilon(1.0, 2.0, -2.0)

print(" h      ISSf(0.1) |u-k|  ISSf(1) |u-k|  TISSf |u-k|   TISSf inflation")
for h in np.linspace(-0.5, 2.0, 6):
    # on the double integrator |L_g h| = 1, so |u - k| = 1 / eps(h)
    print(f"{h:5.2f}   {1 / 0.1:13.3f}  {1 / 1.0:13.3f}  {1 / float(sched(h)):11.3f}   {float(gamma_tissf(alpha, sched, h, d)):8.3f}")

print("\ninflation of the constant-gain sets:", {e: gamma_issf(alpha, e, d) for e in (0.1, 1.0)})

# The schedule must not grow too fast relative to alpha; for alpha(r) = r the
# condition reads eps'(h) + 4/d^2 > 0, which any lambda1 >= 0 satisfies.
for s in (sched, ConstantEpsilon(0.1)):
    print(type(s).__name__, "condition slack at h = 0:", round(eps_condition_slack(alpha, s, 0.0, d), 6))
