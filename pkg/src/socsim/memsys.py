"""Memory hierarchy: per-core L1s, a banked shared L2, DRAM behind a narrow link.

Data lives in one flat byte array (the functional plane); caches carry only
tags, LRU order, dirty bits, and fill timestamps (the timing plane).  A read
therefore always returns the bytes of the most recent write to that address,
no matter what the cache state is - the timing model cannot corrupt values.

Timing composition for a demand load from a core:

    L1 hit     l1_hit_cycles
    L2 hit     l1_hit_cycles + l2_hit_cycles
    DRAM fill  l1_hit_cycles + l2_hit_cycles + dram_cycles
               + link queueing + ceil(64 / link_bytes_per_cycle)

The off-chip link is a single FIFO channel shared by fills and writebacks;
each line transfer occupies it for ceil(64 / link_bytes_per_cycle) cycles and
transfers queue in arrival order, so total link bytes always equal
64 * (line fills + writebacks).

L2 banks are striped by line: bank = (addr // 64) % banks.  Each engine port
is co-located with one bank; reads that resolve in a different bank pay
noc_hop_cycles extra.

Write policy: L1 is write-through no-write-allocate; L2 is write-back
write-allocate.  Core write hits are posted (the core pays only the L1 hit
cycle), core write misses stall for the fill, and full-line engine writes
validate the line without fetching it.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from .faults import SimulationFault, ValidationError
from .stats import SimStats

LINE = 64

# requester kinds
CORE = "core"
NMCE = "nmce"
SPARSE = "sparse"
PREFETCHER = "prefetcher"


@dataclass
class CacheConfig:
    l1_size: int = 16 * 1024
    l2_size: int = 256 * 1024
    banks: int = 4
    associativity: int = 8          # L2 ways
    l1_associativity: int = 4
    l1_hit_cycles: int = 1
    l2_hit_cycles: int = 10
    dram_cycles: int = 100
    link_bytes_per_cycle: int = 1
    noc_hop_cycles: int = 4
    mem_size: int = 16 * 1024 * 1024
    cores: int = 4
    nmce_allocate_l2: bool = True

    def validate(self) -> "CacheConfig":
        if self.l1_size % (LINE * self.l1_associativity):
            raise ValidationError(
                "cache.l1_size must be a multiple of line*l1_associativity")
        if self.l2_size % (LINE * self.associativity * self.banks):
            raise ValidationError(
                "cache.l2_size must divide evenly into banks*ways*lines")
        if self.banks < 1 or self.banks & (self.banks - 1):
            raise ValidationError("cache.banks must be a power of two >= 1")
        for name in ("l1_hit_cycles", "l2_hit_cycles", "dram_cycles",
                     "link_bytes_per_cycle"):
            if getattr(self, name) < 1:
                raise ValidationError(f"cache.{name} must be >= 1")
        if self.noc_hop_cycles < 0:
            raise ValidationError("cache.noc_hop_cycles must be >= 0")
        if self.mem_size % LINE or self.mem_size <= 0:
            raise ValidationError(
                "cache.mem_size must be a positive multiple of 64")
        if self.cores < 1:
            raise ValidationError("cache.cores must be >= 1")
        return self

    @property
    def line_transfer_cycles(self) -> int:
        return -(-LINE // self.link_bytes_per_cycle)


@dataclass
class MemEvent:
    kind: str            # "read" | "write" | "prefetch"
    addr: int
    requester: tuple     # (kind, id)
    completion: int


class MemorySystem:
    """Flat functional memory plus the L1/L2/link timing model."""

    def __init__(self, cfg: CacheConfig, stats: SimStats | None = None):
        self.cfg = cfg.validate()
        self.stats = stats if stats is not None else SimStats()
        self.mem = np.zeros(cfg.mem_size, dtype=np.uint8)

        self.l1_sets = cfg.l1_size // (LINE * cfg.l1_associativity)
        self.l2_sets = cfg.l2_size // (LINE * cfg.associativity * cfg.banks)
        # l1[core][set]: OrderedDict line -> None (LRU order, oldest first)
        self.l1 = [[OrderedDict() for _ in range(self.l1_sets)]
                   for _ in range(cfg.cores)]
        # l2[bank][set]: OrderedDict line -> [dirty, prefetched, ready_at]
        self.l2 = [[OrderedDict() for _ in range(self.l2_sets)]
                   for _ in range(cfg.banks)]

        self.link_free = 0
        self.prefetchers = [None] * cfg.cores

    # ------------------------------------------------------------------
    # functional plane

    def _check_range(self, addr: int, nbytes: int, device: str):
        if addr < 0 or addr + nbytes > self.cfg.mem_size:
            raise SimulationFault(
                device, f"address 0x{addr:x}+{nbytes} outside memory of "
                        f"size 0x{self.cfg.mem_size:x}")

    def read_bytes(self, addr: int, n: int, device: str = "memsys") -> bytes:
        self._check_range(addr, n, device)
        return self.mem[addr:addr + n].tobytes()

    def write_bytes(self, addr: int, data: bytes, device: str = "memsys"):
        self._check_range(addr, len(data), device)
        self.mem[addr:addr + len(data)] = np.frombuffer(bytes(data), dtype=np.uint8)

    def load_image(self, path, base: int):
        """Load a raw binary file into memory at `base`."""
        with open(path, "rb") as f:
            data = f.read()
        self.write_bytes(base, data, device="load_image")
        return len(data)

    # ------------------------------------------------------------------
    # plumbing

    def bank_of(self, addr: int) -> int:
        return (addr // LINE) % self.cfg.banks

    def _l2_set(self, line: int) -> OrderedDict:
        bank = line % self.cfg.banks
        return self.l2[bank][(line // self.cfg.banks) % self.l2_sets]

    def _book_link(self, earliest: int) -> int:
        """Occupy the link FIFO for one line transfer; returns completion."""
        start = earliest if earliest > self.link_free else self.link_free
        done = start + self.cfg.line_transfer_cycles
        self.link_free = done
        self.stats.link_bytes += LINE
        return done

    def _invalidate_l1(self, line: int):
        s = line % self.l1_sets
        for core_l1 in self.l1:
            core_l1[s].pop(line, None)

    def _evict_for(self, st: OrderedDict, now: int):
        """Make room in an L2 set; dirty victims book a writeback on the link."""
        while len(st) >= self.cfg.associativity:
            victim, state = st.popitem(last=False)
            self._invalidate_l1(victim)
            if state[0]:  # dirty
                self.stats.dram_writes += LINE
                self._book_link(now)

    def _fill_l2(self, line: int, ready_base: int, *, dirty: bool,
                 prefetched: bool, allocate: bool = True) -> int:
        """Fetch a line from DRAM. Returns the cycle the data arrives."""
        self.stats.dram_reads += LINE
        done = self._book_link(ready_base + self.cfg.dram_cycles)
        if allocate:
            st = self._l2_set(line)
            self._evict_for(st, ready_base)
            st[line] = [dirty, prefetched, done]
        return done

    # ------------------------------------------------------------------
    # core-side access

    def access(self, addr: int, kind: str, requester: tuple, now: int) -> MemEvent:
        """One core-side memory operation, line granularity for timing.

        kind: "read" | "write" | "prefetch".  Prefetches bypass the L1, fill
        only the L2, and are silently dropped (and counted) when the target
        is out of range or already present.
        """
        rkind, rid = requester
        if kind == "prefetch":
            return self._issue_prefetch(addr, requester, now)
        self._check_range(addr, 1, f"{rkind}{rid}")
        line = addr // LINE

        cfg = self.cfg
        t = now + cfg.l1_hit_cycles
        l1set = self.l1[rid][line % self.l1_sets]
        if line in l1set:
            l1set.move_to_end(line)
            if kind == "write":
                self._l2_write_touch(line)
            return MemEvent(kind, addr, requester, t)

        # L2 side
        t += cfg.l2_hit_cycles
        st = self._l2_set(line)
        entry = st.get(line)
        trained = False
        if entry is not None:
            st.move_to_end(line)
            completion = entry[2] if entry[2] > t else t
            if entry[1]:
                # first demand touch of a prefetched line
                self.stats.prefetch_useful += 1
                if entry[2] > t:
                    self.stats.prefetch_late += 1
                entry[1] = False
                trained = True
            if kind == "write":
                entry[0] = True
        else:
            trained = True
            dirty = kind == "write"
            completion = self._fill_l2(line, t, dirty=dirty, prefetched=False)
            pf = self.prefetchers[rid]
            if pf is not None:
                pf.record_fill(completion, line)
        if kind == "read":
            self._l1_insert(rid, line)
        elif kind == "write" and entry is not None:
            # posted write hit: core does not wait on the L2
            completion = now + cfg.l1_hit_cycles

        if trained:
            pf = self.prefetchers[rid]
            if pf is not None:
                target = pf.on_access(line, True, now)
                if target is not None:
                    self._issue_prefetch(target * LINE, (PREFETCHER, rid), now)
        return MemEvent(kind, addr, requester, completion)

    def _l1_insert(self, core: int, line: int):
        l1set = self.l1[core][line % self.l1_sets]
        l1set[line] = None
        l1set.move_to_end(line)
        while len(l1set) > self.cfg.l1_associativity:
            l1set.popitem(last=False)

    def _l2_write_touch(self, line: int):
        # write-through from L1: dirty the L2 copy (inclusion guarantees it)
        st = self._l2_set(line)
        entry = st.get(line)
        if entry is None:
            self._evict_for(st, 0)
            st[line] = [True, False, 0]
        else:
            entry[0] = True
            st.move_to_end(line)

    def _issue_prefetch(self, addr: int, requester: tuple, now: int) -> MemEvent:
        line = addr // LINE
        rid = requester[1]
        if addr < 0 or addr + LINE > self.cfg.mem_size:
            self.stats.prefetch_dropped += 1
            return MemEvent("prefetch", addr, requester, now)
        st = self._l2_set(line)
        if line in st:
            self.stats.prefetch_dropped += 1
            return MemEvent("prefetch", addr, requester, now)
        t = now + self.cfg.l2_hit_cycles
        completion = self._fill_l2(line, t, dirty=False, prefetched=True)
        self.stats.prefetch_issued += 1
        pf = self.prefetchers[rid]
        if pf is not None:
            pf.record_prefetch_fill(completion, line - pf.best_offset)
        return MemEvent("prefetch", addr, requester, completion)

    # ------------------------------------------------------------------
    # engine / accelerator ports

    def nmce_port_read(self, bank: int, addr: int, now: int):
        """Line read on an engine's bank port. Returns (line bytes, completion)."""
        device = f"nmce-port{bank}"
        if addr % LINE:
            raise SimulationFault(device, f"unaligned port read 0x{addr:x}")
        self._check_range(addr, LINE, device)
        completion = self._port_line_ref(
            addr, now, self.cfg.l2_hit_cycles, bank=bank,
            allocate=self.cfg.nmce_allocate_l2)
        self.stats.l2_to_nmce += LINE
        return self.mem[addr:addr + LINE].tobytes(), completion

    def nmce_port_write(self, bank: int, addr: int, data: bytes, now: int) -> int:
        """Full-line engine write: validates in L2 without a fetch."""
        device = f"nmce-port{bank}"
        if addr % LINE or len(data) != LINE:
            raise SimulationFault(device, f"unaligned port write 0x{addr:x}")
        self._check_range(addr, LINE, device)
        line = addr // LINE
        t = now + self.cfg.l2_hit_cycles
        if line % self.cfg.banks != bank:
            t += self.cfg.noc_hop_cycles
        st = self._l2_set(line)
        entry = st.get(line)
        if entry is None:
            self._evict_for(st, now)
            st[line] = [True, False, t]
        else:
            entry[0] = True
            st.move_to_end(line)
        self._invalidate_l1(line)
        self.write_bytes(addr, data, device)
        self.stats.l2_to_nmce += LINE
        return t

    def stream_read(self, addr: int, now: int, hit_cycles: int,
                    device: str = "sparse") -> int:
        """Line fetch on the sparse accelerator's direct L2 interface."""
        if addr % LINE:
            raise SimulationFault(device, f"unaligned stream read 0x{addr:x}")
        self._check_range(addr, LINE, device)
        return self._port_line_ref(addr, now, hit_cycles)

    def stream_write(self, addr: int, now: int, hit_cycles: int,
                     device: str = "sparse") -> int:
        """Write-allocate line touch on the accelerator port; caller supplies
        the functional bytes via write_bytes."""
        if addr % LINE:
            raise SimulationFault(device, f"unaligned stream write 0x{addr:x}")
        self._check_range(addr, LINE, device)
        t = self._port_line_ref(addr, now, hit_cycles)
        line = addr // LINE
        entry = self._l2_set(line).get(line)
        if entry is not None:
            entry[0] = True
        self._invalidate_l1(line)
        return t

    def _port_line_ref(self, addr: int, now: int, hit_cycles: int,
                       bank: int | None = None, allocate: bool = True) -> int:
        line = addr // LINE
        t = now + hit_cycles
        if bank is not None and line % self.cfg.banks != bank:
            t += self.cfg.noc_hop_cycles
        st = self._l2_set(line)
        entry = st.get(line)
        if entry is not None:
            st.move_to_end(line)
            return entry[2] if entry[2] > t else t
        return self._fill_l2(line, t, dirty=False, prefetched=False,
                             allocate=allocate)

    # ------------------------------------------------------------------
    # benchmark fixtures

    def install_warm(self, base: int, nbytes: int):
        """Pre-install clean lines into L2 without touching timing or stats."""
        self._check_range(base, nbytes, "install_warm")
        first = base // LINE
        last = (base + nbytes + LINE - 1) // LINE
        for line in range(first, last):
            st = self._l2_set(line)
            if line not in st:
                self._evict_for(st, 0)
                st[line] = [False, False, 0]
            else:
                st.move_to_end(line)
