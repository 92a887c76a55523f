"""SER under a power budget for one channel draw.

Designs max-min SNR precoders for CoMA and NOMA at a few budgets, then
sends QPSK symbols through the channel and counts errors at both users.
CoMA needs one design per relative symbol phase; the strong user decodes
by phase alone, the NOMA strong user runs SIC.
"""

import numpy as np

from cinoma import (PairScenario, order_pair, sample_channel, ser_from_snr, solve_sermin_coma,
                    solve_sermin_noma)
from cinoma.receiver import block_errors

rng = np.random.default_rng(4)
sc = PairScenario(n_antennas=2, var1=2.0, var2=1.0, r2=4.0)
h1, h2 = order_pair(sample_channel(2, sc.var1, rng), sample_channel(2, sc.var2, rng))
M, n = sc.constellation.order, 20_000
idx = rng.integers(M, size=(2, n))

print(" P[dB]   CoMA t   CoMA SER (u1, u2)      NOMA t   NOMA SER (u1, u2)")
for pdb in (10, 15, 20):
    s = sc.replace(power_budget=10 ** (pdb / 10))
    coma, ts = {}, []
    for d in range(M):
        pair, t, _ = solve_sermin_coma(s, h1, h2, (1, np.exp(2j * np.pi * d / M)), rng=0)
        coma[d] = pair
        ts.append(t)
    noma, t_noma = solve_sermin_noma(s, h1, h2, rng=0)
    ec = block_errors("CoMA", s, h1, h2, coma, idx[0], idx[1], np.random.default_rng(0))
    en = block_errors("NOMA", s, h1, h2, noma, idx[0], idx[1], np.random.default_rng(0))
    print(f"{pdb:5d} {np.mean(ts):8.2f}   {ec[0] / n:.4f}, {ec[1] / n:.4f}"
          f"     {t_noma:8.2f}   {en[0] / n:.4f}, {en[1] / n:.4f}")
print(f"\nQ(sqrt(t)) for reference at t = 10: {ser_from_snr(10.0):.2e}")
