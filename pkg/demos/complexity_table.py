"""Receiver operation counts for SIC (NOMA) and phase-only (CoMA) detection."""

from cinoma import complexity_coma, complexity_noma

print("  N    M      NOMA        CoMA    ratio")
for M in (2, 4, 8):
    for N in (1, 2, 4, 8):
        a, b = complexity_noma(N, M), complexity_coma(N, M)
        print(f"{N:3d} {M:4d} {a:10d} {b:10d} {a / b:8.2f}")
