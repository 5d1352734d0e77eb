"""Per-run counters.

One SimStats instance is shared by the memory system and whatever engines /
cores take part in a run.  Counters only ever increase while a simulation is
running.  Derived metrics (ops per kilocycle, speedups) are recomputed from
the raw counters at report time and never stored.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class SimStats:
    cycles: int = 0
    int8_ops: int = 0

    # byte counters
    l2_to_nmce: int = 0       # bytes moved over L2 bank ports to/from engines
    dram_reads: int = 0       # bytes filled from DRAM (line fills)
    dram_writes: int = 0      # bytes written back to DRAM (dirty evictions)
    link_bytes: int = 0       # total bytes serialized over the off-chip link

    # prefetch counters
    prefetch_issued: int = 0
    prefetch_useful: int = 0
    prefetch_late: int = 0
    prefetch_dropped: int = 0

    extra: dict = field(default_factory=dict)

    def ops_per_kilocycle(self) -> float:
        if self.cycles <= 0:
            return 0.0
        return self.int8_ops * 1000.0 / self.cycles

    def to_row(self, benchmark: str, path: str, speedup: float | None = None) -> dict:
        """Flatten into a report row. `speedup` is supplied by the harness."""
        row = {
            "benchmark": benchmark,
            "path": path,
            "cycles": int(self.cycles),
            "int8_ops": int(self.int8_ops),
            "bytes": {
                "l2_to_nmce": int(self.l2_to_nmce),
                "dram_reads": int(self.dram_reads),
                "dram_writes": int(self.dram_writes),
                "link_bytes": int(self.link_bytes),
            },
            "prefetch": {
                "issued": int(self.prefetch_issued),
                "useful": int(self.prefetch_useful),
                "late": int(self.prefetch_late),
                "dropped": int(self.prefetch_dropped),
            },
            "ops_per_kilocycle": self.ops_per_kilocycle(),
            "speedup_vs_baseline": speedup,
            "extra": {k: _jsonable(v) for k, v in sorted(self.extra.items())},
        }
        return row


def _jsonable(v):
    if isinstance(v, bool):
        return v
    if isinstance(v, (int, float, str)):
        return v
    if hasattr(v, "item"):  # numpy scalar
        return v.item()
    return str(v)
