"""Watch the best-offset prefetcher learn an access pattern.

The prefetcher scores candidate line offsets over learning phases using a
recent-requests table, then prefetches at the winning offset. Feeding it
a synthetic miss stream directly exposes the learning; running the stride
kernel shows the end-to-end effect on cycles.
"""

from socsim import (BestOffsetPrefetcher, BopConfig, Soc, SocConfig,
                    stride_kernel)

# --- learning, observed directly ---------------------------------------
pf = BestOffsetPrefetcher(BopConfig())
stride = 3
t = 0
for i in range(4000):
    line = i * stride
    pf.on_access(line, True, t)        # every access is a miss
    pf.record_fill(t + 50, line)
    t += 1000

print(f"stride-{stride} miss stream: learned offset {pf.best_offset}")
assert pf.best_offset == stride

pf2 = BestOffsetPrefetcher(BopConfig())
t = 0
for i in range(6000):
    pf2.on_access(i * 400, True, t)    # hopeless: beyond max candidate
    pf2.record_fill(t + 50, i * 400)
    t += 1000
print(f"stride-400 stream: prefetching enabled = {pf2.enabled}"
      " (it turns itself off rather than pollute)")

# --- end-to-end effect ---------------------------------------------------
print()
window = 4 << 20
for stride_lines in (1, 2):
    cycles = {}
    for on in (False, True):
        soc = Soc(SocConfig(prefetch_enabled=on))
        base = soc.alloc(window)
        cycles[on] = stride_kernel(soc, base, 8192, stride_lines, 800, window)
        if on:
            pf = soc.memsys.prefetchers[0]
            print(f"stride {stride_lines}: learned offset {pf.best_offset}, "
                  f"issued {soc.stats.prefetch_issued}, "
                  f"useful {soc.stats.prefetch_useful}")
    gain = 100.0 * (cycles[False] - cycles[True]) / cycles[False]
    print(f"  off {cycles[False]} cycles, on {cycles[True]} cycles "
          f"({gain:.1f}% faster)")
