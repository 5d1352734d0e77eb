"""Run the same int8 matrix multiply three ways and compare cycles.

All three paths share one functional convention (per-64-chunk saturating
partials, saturating final sum), so their outputs are bit-identical and
only the timing differs.
"""

import numpy as np

from socsim import (Soc, SocConfig, matmul_nmce, matmul_reference, matmul_sw,
                    place_matmul, warm_matmul)


def run_all(n):
    rng = np.random.default_rng(n)
    a = rng.integers(-128, 128, (n, n), dtype=np.int16).astype(np.int8)
    b = rng.integers(-128, 128, (n, n), dtype=np.int16).astype(np.int8)
    ref = matmul_reference(a, b)
    cycles = {}
    for path in ("single", "quad", "nmce"):
        soc = Soc(SocConfig(pipelined_nmce=True))
        ops = place_matmul(soc, a, b)
        warm_matmul(soc, ops)
        if path == "nmce":
            c, cyc = matmul_nmce(soc, ops)
        else:
            c, cyc = matmul_sw(soc, ops, cores=1 if path == "single" else 4)
        assert np.array_equal(c, ref), path
        cycles[path] = cyc
    return cycles


print(f"{'size':>6} {'single':>12} {'quad':>12} {'engines':>12} "
      f"{'quad x':>8} {'engine x':>9}")
for n in (8, 16, 32, 64):
    cyc = run_all(n)
    print(f"{n:>4}^2 {cyc['single']:>12} {cyc['quad']:>12} "
          f"{cyc['nmce']:>12} {cyc['single'] / cyc['quad']:>7.2f}x "
          f"{cyc['single'] / cyc['nmce']:>8.2f}x")

print()
print("outputs were verified bit-identical across all three paths")
print("engine advantage grows with size: MMIO setup amortizes while the")
print("64-wide MAC replaces 64 scalar multiply-accumulates per fetch")
