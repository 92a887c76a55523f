"""One channel draw, three schemes: how much power does each need?

Draws a strong/weak user pair, designs minimum-power precoders for CoMA,
NOMA and OMA at the same rate targets, and checks each design against the
constraints it was built for.
"""

import numpy as np

from cinoma import (PairScenario, coma_constraint_slack, noma_constraint_slack, order_pair,
                    sample_channel, solve_power_min_coma, solve_power_min_noma,
                    solve_power_min_oma)

rng = np.random.default_rng(1)
sc = PairScenario(n_antennas=2, var1=2.0, var2=1.0, r1=1.0, r2=1.0)
h1, h2 = order_pair(sample_channel(2, sc.var1, rng), sample_channel(2, sc.var2, rng))
print(f"channel gains: strong {h1.gain:.3f}, weak {h2.gain:.3f}")
corr = abs(np.vdot(h1.coeffs, h2.coeffs)) / np.sqrt(h1.gain * h2.gain)
print(f"channel correlation |h1^H h2| / (||h1|| ||h2||) = {corr:.3f}\n")

# CoMA designs per symbol pair; the power depends on the relative phase
const = sc.constellation
for m in range(const.order):
    x = (const.symbol(0), const.symbol(m))
    pair, power, state = solve_power_min_coma(sc, h1, h2, x, rng=0)
    sector, user2 = coma_constraint_slack(sc, h1, h2, pair, x)
    print(f"CoMA, relative symbol {m}: power {power:.4f} after {state.iter} SCA steps, "
          f"slack sector {sector:+.1e} user2 {user2:+.1e}")

design = solve_power_min_noma(sc, h1, h2, rng=0)
print(f"\nNOMA: power {design.power:.4f} (relaxation bound {design.sdr_bound:.4f}), "
      f"slacks {np.round(noma_constraint_slack(sc, h1, h2, design.pair), 9)}")

_, power = solve_power_min_oma(sc, h1, h2)
print(f"OMA:  power {power:.4f} (each user alone in half the slots)")
