"""Near-memory compute engine (NMCE): MMIO-programmed, co-located with an L2 bank.

Each engine owns a 0x100-byte register window at `mmio_base + id * 0x100`:

    offset  size  register
    0x00    64    v1        operand vector, 64 signed bytes
    0x40    8     v2_addr   base address of the streamed operand (u64 LE)
    0x48    8     stride    byte step between operands (i64 LE, 0/negative OK)
    0x50    8     go        bits 31..0 = count, bits 39..32 = op (0 MAC, 1 MEMCPY);
                            writing this register launches the operation
    0x58    8     dst_addr  MEMCPY destination base (u64 LE)
    0x60    8     status    bits 7..0 = state (0 idle, 1 busy, 2 done, 3 error),
                            bits 39..8 = progress; any write resets to idle
    0x80    64    result    32 saturated int16 dot products (LE), read-only

MAC: for i < count the engine fetches the 64-byte window at
v2_addr + stride*i through its bank port and computes
clamp_int16(sum_j v1[j] * window[j]) in full precision with one final clamp.
Entries at index >= count read as zero.  One window is consumed per cycle
once its line(s) arrive; by default at most one line fetch is outstanding,
and the opt-in pipelined mode issues one fetch per cycle instead.

MEMCPY: copies count lines; the source advances by stride, the destination
always advances by 64.  Source/destination must be line-aligned; overlapping
regions are rejected unless stride == 64 (which degenerates to an ordered
line-by-line copy).

Writing any register while busy is an error: the engine aborts, discards
partial results, and latches the error status until a status-register reset.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from .faults import SimulationFault

LINE = 64
MMIO_WINDOW = 0x100

REG_V1 = 0x00
REG_V2_ADDR = 0x40
REG_STRIDE = 0x48
REG_GO = 0x50
REG_DST_ADDR = 0x58
REG_STATUS = 0x60
REG_RESULT = 0x80

STATUS_IDLE = 0
STATUS_BUSY = 1
STATUS_DONE = 2
STATUS_ERROR = 3

OP_MAC = 0
OP_MEMCPY = 1

INT16_MIN = -32768
INT16_MAX = 32767


def make_go_word(count: int, op: int) -> int:
    """Encode the go-register value that launches `count` ops of kind `op`."""
    return (count & 0xFFFFFFFF) | ((op & 0xFF) << 32)


def saturating_dot(v1: bytes, window: bytes) -> int:
    """Functional core of one MAC: full-precision dot, single clamp to int16."""
    a = np.frombuffer(v1, dtype=np.int8).astype(np.int32)
    b = np.frombuffer(window, dtype=np.int8).astype(np.int32)
    acc = int(a @ b)
    return min(max(acc, INT16_MIN), INT16_MAX)


class NearMemoryEngine:
    def __init__(self, engine_id: int, memsys, bank: int | None = None,
                 pipelined: bool = False):
        self.engine_id = engine_id
        self.memsys = memsys
        self.bank = engine_id % memsys.cfg.banks if bank is None else bank
        self.pipelined = pipelined
        self.name = f"nmce{engine_id}"

        self.v1 = bytearray(LINE)
        self.v2_addr = 0
        self.stride = 0
        self.dst_addr = 0
        self.count = 0
        self.op = OP_MAC
        self.result = bytearray(LINE)
        self.progress = 0
        self.status = STATUS_IDLE
        self.done_cycle = 0

        self._fetches = []        # [(op_index, line_addr, is_last_line_of_op)]
        self._fi = 0
        self._outstanding = deque()
        self._next_issue = 0      # pipelined issue slot
        self._serial_time = 0     # serial-mode engine clock
        self._consume_free = 0    # MAC unit availability

    # ------------------------------------------------------------------
    # MMIO

    def mmio_read(self, offset: int, size: int, now: int) -> bytes:
        self.run_until(now)
        shadow = self._shadow()
        if offset < 0 or offset + size > MMIO_WINDOW:
            raise SimulationFault(self.name, f"MMIO read outside window: 0x{offset:x}")
        return bytes(shadow[offset:offset + size])

    def _shadow(self) -> bytearray:
        buf = bytearray(MMIO_WINDOW)
        buf[REG_V1:REG_V1 + LINE] = self.v1
        buf[REG_V2_ADDR:REG_V2_ADDR + 8] = self.v2_addr.to_bytes(8, "little")
        buf[REG_STRIDE:REG_STRIDE + 8] = self.stride.to_bytes(8, "little", signed=True)
        buf[REG_GO:REG_GO + 8] = make_go_word(self.count, self.op).to_bytes(8, "little")
        buf[REG_DST_ADDR:REG_DST_ADDR + 8] = self.dst_addr.to_bytes(8, "little")
        status_word = (self.status & 0xFF) | (self.progress << 8)
        buf[REG_STATUS:REG_STATUS + 8] = status_word.to_bytes(8, "little")
        buf[REG_RESULT:REG_RESULT + LINE] = self.result
        return buf

    def mmio_write(self, offset: int, data: bytes, now: int):
        self.run_until(now)
        if self.status == STATUS_BUSY:
            # any write while busy wedges the engine; the write is dropped
            self._abort()
            return
        if REG_V1 <= offset < REG_V1 + LINE:
            if offset + len(data) > REG_V1 + LINE:
                raise SimulationFault(self.name, "v1 write spills past the register")
            self.v1[offset:offset + len(data)] = data
            return
        if offset == REG_STATUS:
            self.status = STATUS_IDLE
            self.progress = 0
            return
        if len(data) != 8:
            raise SimulationFault(self.name, f"register at 0x{offset:x} needs 8-byte writes")
        value = int.from_bytes(data, "little")
        if offset == REG_V2_ADDR:
            self.v2_addr = value
        elif offset == REG_STRIDE:
            self.stride = int.from_bytes(data, "little", signed=True)
        elif offset == REG_DST_ADDR:
            self.dst_addr = value
        elif offset == REG_GO:
            if self.status == STATUS_ERROR:
                return  # needs an explicit status reset first
            self._launch(value & 0xFFFFFFFF, (value >> 32) & 0xFF, now)
        else:
            raise SimulationFault(self.name, f"MMIO write to invalid offset 0x{offset:x}")

    def _abort(self):
        self.status = STATUS_ERROR
        self.result = bytearray(LINE)
        self._fetches = []
        self._fi = 0
        self._outstanding.clear()

    # ------------------------------------------------------------------
    # launch + validation

    def _launch(self, count: int, op: int, now: int):
        self.result = bytearray(LINE)
        self.progress = 0
        self.count = count
        self.op = op
        if count > 32 or op not in (OP_MAC, OP_MEMCPY):
            self.status = STATUS_ERROR
            return
        mem_size = self.memsys.cfg.mem_size
        fetches = []
        if op == OP_MAC:
            for i in range(count):
                a = self.v2_addr + self.stride * i
                if a < 0 or a + LINE > mem_size:
                    self.status = STATUS_ERROR
                    return
                first = a & ~(LINE - 1)
                last = (a + LINE - 1) & ~(LINE - 1)
                if first != last:
                    fetches.append((i, first, False))
                fetches.append((i, last, True))
        else:
            src_lines = set()
            for i in range(count):
                a = self.v2_addr + self.stride * i
                d = self.dst_addr + LINE * i
                if a % LINE or d % LINE:
                    self.status = STATUS_ERROR
                    return
                if a < 0 or a + LINE > mem_size or d < 0 or d + LINE > mem_size:
                    self.status = STATUS_ERROR
                    return
                src_lines.add(a)
                fetches.append((i, a, True))
            if self.stride != LINE and count:
                dst_lines = {self.dst_addr + LINE * i for i in range(count)}
                if src_lines & dst_lines:
                    self.status = STATUS_ERROR
                    return
        if count == 0:
            self.status = STATUS_DONE
            self.done_cycle = now
            return
        self.status = STATUS_BUSY
        self._fetches = fetches
        self._fi = 0
        self._outstanding.clear()
        self._next_issue = now
        self._serial_time = now
        self._consume_free = now

    # ------------------------------------------------------------------
    # time advance

    def step(self, now: int):
        """Advance the engine through cycle `now` (per-cycle polling driver)."""
        self.run_until(now)

    def finish(self) -> int:
        """Run the engine to completion; returns the completion cycle."""
        self.run_until(None)
        return self.done_cycle

    def run_until(self, limit: int | None):
        if self.status != STATUS_BUSY:
            return

        def within(t):
            return limit is None or t <= limit

        while True:
            if self._outstanding:
                op_i, is_last, arrival = self._outstanding[0]
                if not is_last:
                    if within(arrival):
                        self._outstanding.popleft()
                        if arrival > self._serial_time:
                            self._serial_time = arrival
                        continue
                else:
                    t_done = max(arrival, self._consume_free) + 1
                    if within(t_done):
                        self._outstanding.popleft()
                        self._consume_free = t_done
                        if t_done > self._serial_time:
                            self._serial_time = t_done
                        self._complete_op(op_i, t_done)
                        continue
            if self._fi < len(self._fetches):
                if self.pipelined:
                    t_issue = self._next_issue
                    can_issue = True
                else:
                    t_issue = self._serial_time
                    can_issue = not self._outstanding
                if can_issue and within(t_issue):
                    op_i, addr, is_last = self._fetches[self._fi]
                    _, arrival = self.memsys.nmce_port_read(self.bank, addr, t_issue)
                    self._outstanding.append((op_i, is_last, arrival))
                    self._fi += 1
                    self._next_issue = t_issue + 1
                    continue
            break

        if self._fi == len(self._fetches) and not self._outstanding:
            self.status = STATUS_DONE
            self.done_cycle = self._consume_free

    def _complete_op(self, op_i: int, t: int):
        if self.op == OP_MAC:
            a = self.v2_addr + self.stride * op_i
            window = self.memsys.read_bytes(a, LINE, self.name)
            val = saturating_dot(bytes(self.v1), window)
            self.result[2 * op_i:2 * op_i + 2] = val.to_bytes(2, "little", signed=True)
        else:
            a = self.v2_addr + self.stride * op_i
            data = self.memsys.read_bytes(a, LINE, self.name)
            self.memsys.nmce_port_write(self.bank, self.dst_addr + LINE * op_i,
                                        data, t)
        self.progress += 1
