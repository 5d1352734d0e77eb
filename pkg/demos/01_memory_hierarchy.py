"""Walk through the memory hierarchy timing model one access at a time.

Every access returns a completion cycle, so the easiest way to understand
the model is to issue a handful of reads and writes by hand and look at
the numbers.
"""

from socsim import Soc

soc = Soc()
mem = soc.memsys
cfg = soc.cfg.cache

print("=== cold read ===")
ev = mem.access(0x2000, "read", ("core", 0), now=0)
print(f"cold read of line 0x2000 finishes at cycle {ev.completion}")
print(f"  breakdown: {cfg.dram_cycles} DRAM + 64 link cycles"
      f" + {cfg.l2_hit_cycles} L2 + {cfg.l1_hit_cycles} L1")

print()
print("=== locality ===")
ev = mem.access(0x2000, "read", ("core", 0), now=200)
print(f"same line again: {ev.completion - 200} cycles (L1 hit)")
ev = mem.access(0x2000, "read", ("core", 1), now=300)
print(f"same line, different core: {ev.completion - 300} cycles"
      " (its L1 is cold, the shared L2 is warm)")

print()
print("=== writes ===")
# write-through L1: a write hit is posted, a write miss stalls for the fill
ev = mem.access(0x2000, "write", ("core", 1), now=400)
print(f"write hit is posted: {ev.completion - 400} cycle")
ev = mem.access(0x9000, "write", ("core", 1), now=500)
print(f"write miss stalls for the line: {ev.completion - 500} cycles")

print()
print("=== bank striping ===")
for addr in range(0x4000, 0x4000 + 5 * 64, 64):
    print(f"line 0x{addr:05x} lives in L2 bank {mem.bank_of(addr)}")
print("consecutive lines round-robin across banks, so parallel engines")
print("pinned to different banks see disjoint traffic")

print()
print("=== capacity ===")
l2_lines = cfg.l2_size // 64
print(f"L2 holds {l2_lines} lines; streaming past that evicts")
base = 0x100000
for i in range(l2_lines + 64):
    mem.access(base + 64 * i, "read", ("core", 0), now=10 ** 6 + 1000 * i)
ev = mem.access(base, "read", ("core", 0), now=10 ** 9)
print(f"re-reading the first streamed line costs {ev.completion - 10 ** 9}"
      " cycles again (it was evicted)")

print()
print(f"total DRAM line reads: {soc.stats.dram_reads // 64}")
print(f"total link bytes: {soc.stats.link_bytes}")
