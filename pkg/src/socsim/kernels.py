"""Cores, the SoC container, and the benchmark kernels.

CoreModel is a scalar in-order core cost model: loads and stores go through
the memory hierarchy at line granularity, ALU work is charged as flat cycle
counts, and MMIO register accesses cost mmio_word_cycles per 64-bit word.
Register writes take effect at issue time; the core then pays the bus cost.

The dense matmul exists in three semantically identical paths:

  sw single   triple loop on one core
  sw quad     rows block-partitioned over all cores
  nmce        engines compute 64-wide saturating dots, the core orchestrates

All three follow the same saturation convention so results are bitwise
equal: the int32 dot of each 64-element chunk is clamped to int16, partials
accumulate in int32, and the final sum is clamped once more.

B matrices are stored column-major with the column stride padded up to a
whole number of lines, so every engine operand is one aligned line.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .bop_prefetch import BestOffsetPrefetcher, BopConfig
from .faults import SimulationFault, ValidationError
from .memsys import CORE, LINE, CacheConfig, MemorySystem
from .nmce import (NearMemoryEngine, OP_MAC, OP_MEMCPY, REG_DST_ADDR, REG_GO,
                   REG_RESULT, REG_STATUS, REG_STRIDE, REG_V1, REG_V2_ADDR,
                   STATUS_BUSY, STATUS_DONE, make_go_word)
from .sparse_accel import CsrImage, CsrMatrix, SparseAccelConfig, \
    SparseAccelerator, spmv

MMIO_BASE = 0x4000_0000
MMIO_STRIDE = 0x100
HEAP_BASE = 0x1000

INT16_MIN = -32768
INT16_MAX = 32767


@dataclass
class SocConfig:
    cache: CacheConfig = field(default_factory=CacheConfig)
    sparse: SparseAccelConfig = field(default_factory=SparseAccelConfig)
    engines: int = 4
    pipelined_nmce: bool = False
    prefetch_enabled: bool = False
    prefetch: BopConfig = field(default_factory=BopConfig)
    mmio_word_cycles: int = 5
    sw_elem_cycles: int = 6      # scalar matmul inner loop, per element
    spmv_work_cycles: int = 6    # scalar spmv per nonzero, on top of loads
    axpy_elem_cycles: int = 2    # scalar axpy per element
    store_elem_cycles: int = 2   # clamp+store per output element
    reg_add_cycles: int = 1      # accumulate one engine partial

    def validate(self) -> "SocConfig":
        self.cache.validate()
        self.sparse.validate()
        self.prefetch.validate()
        if self.engines < 1:
            raise ValidationError("engines must be >= 1")
        if self.mmio_word_cycles < 1:
            raise ValidationError("mmio_word_cycles must be >= 1")
        for name in ("sw_elem_cycles", "spmv_work_cycles", "axpy_elem_cycles",
                     "store_elem_cycles", "reg_add_cycles"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0")
        return self


class CoreModel:
    def __init__(self, soc: "Soc", core_id: int):
        self.soc = soc
        self.memsys = soc.memsys
        self.core_id = core_id
        self.now = 0

    def work(self, cycles: int):
        self.now += cycles

    def read_line(self, addr: int):
        ev = self.memsys.access(addr, "read", (CORE, self.core_id), self.now)
        self.now = ev.completion

    def write_line(self, addr: int):
        ev = self.memsys.access(addr, "write", (CORE, self.core_id), self.now)
        self.now = ev.completion

    # ------------------------------------------------------------------
    # MMIO

    def mmio_write(self, addr: int, data: bytes):
        engine, offset = self.soc.route_mmio(addr)
        engine.mmio_write(offset, data, self.now)
        self.now += -(-len(data) // 8) * self.soc.cfg.mmio_word_cycles

    def mmio_read(self, addr: int, size: int) -> bytes:
        engine, offset = self.soc.route_mmio(addr)
        self.now += -(-size // 8) * self.soc.cfg.mmio_word_cycles
        return engine.mmio_read(offset, size, self.now)

    def mmio_write_u64(self, addr: int, value: int):
        self.mmio_write(addr, value.to_bytes(8, "little", signed=value < 0))

    def engine_reg(self, engine_idx: int, reg: int) -> int:
        return self.soc.engine_window(engine_idx) + reg

    def wait_engine(self, engine_idx: int) -> int:
        """Poll the status register until the engine leaves the busy state."""
        addr = self.engine_reg(engine_idx, REG_STATUS)
        while True:
            word = int.from_bytes(self.mmio_read(addr, 8), "little")
            state = word & 0xFF
            if state != STATUS_BUSY:
                return state


class Soc:
    """Memory system, engines, sparse accelerator, cores, bump allocator."""

    def __init__(self, cfg: SocConfig | None = None):
        self.cfg = (cfg or SocConfig()).validate()
        self.memsys = MemorySystem(self.cfg.cache)
        self.engines = [
            NearMemoryEngine(i, self.memsys, pipelined=self.cfg.pipelined_nmce)
            for i in range(self.cfg.engines)]
        self.sparse = SparseAccelerator(self.memsys, self.cfg.sparse)
        self.cores = [CoreModel(self, i) for i in range(self.cfg.cache.cores)]
        self._heap = HEAP_BASE
        if self.cfg.prefetch_enabled:
            for c in range(self.cfg.cache.cores):
                self.memsys.prefetchers[c] = BestOffsetPrefetcher(
                    replace(self.cfg.prefetch))

    @property
    def stats(self):
        return self.memsys.stats

    def alloc(self, nbytes: int, align: int = LINE) -> int:
        base = (self._heap + align - 1) & ~(align - 1)
        if base + nbytes > self.cfg.cache.mem_size:
            raise SimulationFault(
                "alloc", f"out of simulated memory allocating {nbytes} bytes")
        self._heap = base + nbytes
        return base

    def engine_window(self, engine_idx: int) -> int:
        return MMIO_BASE + engine_idx * MMIO_STRIDE

    def route_mmio(self, addr: int):
        idx, offset = divmod(addr - MMIO_BASE, MMIO_STRIDE)
        if not 0 <= idx < len(self.engines):
            raise SimulationFault("mmio", f"no device at 0x{addr:x}")
        return self.engines[idx], offset


def _require_done(state: int, device: str, what: str):
    if state != STATUS_DONE:
        raise SimulationFault(device, f"{what} ended in state {state}")


# ----------------------------------------------------------------------
# dense matmul


def matmul_accum(a, b) -> np.ndarray:
    """int32 accumulator matrix: per-64-chunk dots clamped to int16, summed."""
    a = np.asarray(a, dtype=np.int8)
    b = np.asarray(b, dtype=np.int8)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValidationError("shape mismatch")
    k = a.shape[1]
    acc = np.zeros((a.shape[0], b.shape[1]), dtype=np.int32)
    for s in range(0, k, 64):
        part = a[:, s:s + 64].astype(np.int32) @ b[s:s + 64, :].astype(np.int32)
        acc += np.clip(part, INT16_MIN, INT16_MAX)
    return acc


def matmul_reference(a, b) -> np.ndarray:
    """int8 matmul with per-64-chunk int16 saturation, then one final clamp."""
    return np.clip(matmul_accum(a, b), INT16_MIN, INT16_MAX).astype(np.int16)


@dataclass
class MatmulOperands:
    m: int
    k: int
    n: int
    a_addr: int       # row-major int8, row stride k
    b_addr: int       # column-major int8, column stride col_stride
    c_addr: int       # row-major int16, row stride 2*n
    col_stride: int   # ceil(k/64)*64


def place_matmul(soc: Soc, a, b) -> MatmulOperands:
    a = np.ascontiguousarray(a, dtype=np.int8)
    b = np.ascontiguousarray(b, dtype=np.int8)
    m, k = a.shape
    k2, n = b.shape
    if k2 != k:
        raise ValidationError("shape mismatch")
    col_stride = -(-k // 64) * 64
    a_addr = soc.alloc(m * k)
    b_addr = soc.alloc(n * col_stride)
    c_addr = soc.alloc(m * n * 2)
    bcols = np.zeros((n, col_stride), dtype=np.int8)
    bcols[:, :k] = b.T
    soc.memsys.write_bytes(a_addr, a.tobytes(), "place_matmul")
    soc.memsys.write_bytes(b_addr, bcols.tobytes(), "place_matmul")
    return MatmulOperands(m, k, n, a_addr, b_addr, c_addr, col_stride)


def warm_matmul(soc: Soc, ops: MatmulOperands):
    soc.memsys.install_warm(ops.a_addr, ops.m * ops.k)
    soc.memsys.install_warm(ops.b_addr, ops.n * ops.col_stride)
    soc.memsys.install_warm(ops.c_addr, ops.m * ops.n * 2)


def _read_matmul_inputs(soc: Soc, ops: MatmulOperands):
    a = np.frombuffer(soc.memsys.read_bytes(ops.a_addr, ops.m * ops.k),
                      dtype=np.int8).reshape(ops.m, ops.k)
    bc = np.frombuffer(
        soc.memsys.read_bytes(ops.b_addr, ops.n * ops.col_stride),
        dtype=np.int8).reshape(ops.n, ops.col_stride)
    return a, bc[:, :ops.k].T


def _touch_span(core: CoreModel, addr: int, nbytes: int, write: bool = False):
    first = addr & ~(LINE - 1)
    last = (addr + nbytes - 1) & ~(LINE - 1)
    for la in range(first, last + LINE, LINE):
        if write:
            core.write_line(la)
        else:
            core.read_line(la)


def _store_row_int16(core: CoreModel, soc: Soc, addr: int, values: np.ndarray):
    """Clamp int32 partial sums to int16 and store one output row."""
    out = np.clip(values, INT16_MIN, INT16_MAX).astype("<i2")
    soc.memsys.write_bytes(addr, out.tobytes(), "store_row")
    core.work(soc.cfg.store_elem_cycles * len(out))
    _touch_span(core, addr, 2 * len(out), write=True)
    return out.astype(np.int16)


def matmul_sw(soc: Soc, ops: MatmulOperands, cores: int = 1) -> tuple[np.ndarray, int]:
    """Scalar triple-loop matmul on `cores` cores, rows block-partitioned."""
    if not 1 <= cores <= len(soc.cores):
        raise ValidationError("bad core count")
    a, b = _read_matmul_inputs(soc, ops)
    m, k, n = ops.m, ops.k, ops.n
    nseg = -(-k // 64)
    elem = soc.cfg.sw_elem_cycles
    acc_all = matmul_accum(a, b)
    c = np.zeros((m, n), dtype=np.int16)

    start = max(soc.cores[ci].now for ci in range(cores))
    ends = []
    rows_per = -(-m // cores)
    for ci in range(cores):
        core = soc.cores[ci]
        core.now = start
        for i in range(ci * rows_per, min((ci + 1) * rows_per, m)):
            for j in range(n):
                for s in range(nseg):
                    lo = 64 * s
                    seg = min(64, k - lo)
                    _touch_span(core, ops.a_addr + i * k + lo, seg)
                    core.read_line(ops.b_addr + j * ops.col_stride + lo)
                    core.work(elem * seg)
            c[i, :] = _store_row_int16(core, soc, ops.c_addr + i * 2 * n,
                                       acc_all[i])
        ends.append(core.now)
    soc.stats.int8_ops += 2 * m * n * k
    return c, max(ends) - start


def matmul_nmce(soc: Soc, ops: MatmulOperands, core_id: int = 0) -> tuple[np.ndarray, int]:
    """Engine-driven matmul: one engine computes 64-wide saturating dots for
    up to 32 consecutive output columns per launch; the core supplies the A
    chunk, accumulates int16 partials in registers, and stores each finished
    row."""
    core = soc.cores[core_id]
    m, k, n = ops.m, ops.k, ops.n
    nseg = -(-k // 64)
    npe = len(soc.engines)
    a_bytes = soc.memsys.read_bytes(ops.a_addr, m * k)
    c = np.zeros((m, n), dtype=np.int16)
    start = core.now

    for e in range(npe):
        core.mmio_write_u64(core.engine_reg(e, REG_STRIDE), ops.col_stride)
    v1_words = [0] * npe   # words of v1 currently holding stale data

    chunks = [(j0, min(32, n - j0)) for j0 in range(0, n, 32)]
    tasks = [(i, s) for i in range(m) for s in range(nseg)]
    acc = {}
    segs_done = {}

    for w0 in range(0, len(tasks), npe):
        wave = tasks[w0:w0 + npe]
        # load each engine's v1 with the A chunk of its (row, segment) task
        for e, (i, s) in enumerate(wave):
            lo = 64 * s
            seg = min(64, k - lo)
            words = -(-seg // 8)
            chunk = a_bytes[i * k + lo:i * k + lo + seg]
            pad_words = max(words, v1_words[e])
            payload = bytes(chunk) + bytes(8 * pad_words - seg)
            _touch_span(core, ops.a_addr + i * k + lo, seg)
            core.mmio_write(core.engine_reg(e, REG_V1), payload)
            v1_words[e] = words
            if i not in acc:
                acc[i] = np.zeros(n, dtype=np.int32)
                segs_done[i] = 0
        for j0, cnt in chunks:
            for e, (i, s) in enumerate(wave):
                v2 = ops.b_addr + j0 * ops.col_stride + 64 * s
                core.mmio_write_u64(core.engine_reg(e, REG_V2_ADDR), v2)
                core.mmio_write_u64(core.engine_reg(e, REG_GO),
                                    make_go_word(cnt, OP_MAC))
            for e, (i, s) in enumerate(wave):
                state = core.wait_engine(e)
                _require_done(state, soc.engines[e].name, "matmul launch")
                raw = core.mmio_read(core.engine_reg(e, REG_RESULT), 2 * cnt)
                part = np.frombuffer(raw[:2 * cnt], dtype="<i2")
                acc[i][j0:j0 + cnt] += part.astype(np.int32)
                core.work(soc.cfg.reg_add_cycles * cnt)
        for i, s in wave:
            segs_done[i] += 1
            if segs_done[i] == nseg:
                c[i, :] = _store_row_int16(core, soc, ops.c_addr + i * 2 * n,
                                           acc.pop(i))
                del segs_done[i]
    soc.stats.int8_ops += 2 * m * n * k
    return c, core.now - start


# ----------------------------------------------------------------------
# memcpy


def memcpy_sw(soc: Soc, src: int, dst: int, nbytes: int,
              core_id: int = 0) -> int:
    if nbytes % LINE or src % LINE or dst % LINE:
        raise ValidationError("memcpy needs line-aligned, line-sized ranges")
    if not (src + nbytes <= dst or dst + nbytes <= src):
        raise ValidationError("memcpy ranges overlap")
    core = soc.cores[core_id]
    start = core.now
    data = soc.memsys.read_bytes(src, nbytes)
    soc.memsys.write_bytes(dst, data, "memcpy_sw")
    for off in range(0, nbytes, LINE):
        core.read_line(src + off)
        core.write_line(dst + off)
        core.work(16)   # 8 word loads + 8 word stores register shuffles
    return core.now - start


def memcpy_nmce(soc: Soc, src: int, dst: int, nbytes: int,
                core_id: int = 0) -> int:
    """Line copy fanned out over all engines in contiguous shares of the
    range; each launch moves up to 32 lines."""
    if nbytes % LINE or src % LINE or dst % LINE:
        raise ValidationError("memcpy needs line-aligned, line-sized ranges")
    if not (src + nbytes <= dst or dst + nbytes <= src):
        raise ValidationError("memcpy ranges overlap")
    core = soc.cores[core_id]
    npe = len(soc.engines)
    lines = nbytes // LINE
    start = core.now

    share = -(-lines // npe)
    queues = []
    for e in range(npe):
        first, stop = e * share, min((e + 1) * share, lines)
        q = [(src + LINE * f, dst + LINE * f, min(32, stop - f))
             for f in range(first, stop, 32)]
        queues.append(q[::-1])   # pop() issues in address order
        core.mmio_write_u64(core.engine_reg(e, REG_STRIDE), LINE)

    def issue(e):
        s, d, cnt = queues[e].pop()
        core.mmio_write_u64(core.engine_reg(e, REG_V2_ADDR), s)
        core.mmio_write_u64(core.engine_reg(e, REG_DST_ADDR), d)
        core.mmio_write_u64(core.engine_reg(e, REG_GO),
                            make_go_word(cnt, OP_MEMCPY))

    live = [e for e in range(npe) if queues[e]]
    for e in live:
        issue(e)
    while live:
        nxt = []
        for e in live:
            state = core.wait_engine(e)
            _require_done(state, soc.engines[e].name, "memcpy launch")
            if queues[e]:
                issue(e)
                nxt.append(e)
        live = nxt
    return core.now - start


# ----------------------------------------------------------------------
# prefetcher stride kernel


def stride_kernel(soc: Soc, base: int, count: int, stride_lines: int,
                  work_cycles: int, window_bytes: int,
                  core_id: int = 0) -> int:
    """Pointer-walking loop: one line read then `work_cycles` of compute,
    advancing `stride_lines` per iteration and wrapping inside the window."""
    if window_bytes % LINE or stride_lines < 1 or count < 1:
        raise ValidationError("bad stride kernel parameters")
    core = soc.cores[core_id]
    window_lines = window_bytes // LINE
    start = core.now
    for i in range(count):
        line_i = (i * stride_lines) % window_lines
        core.read_line(base + LINE * line_i)
        core.work(work_cycles)
    return core.now - start


# ----------------------------------------------------------------------
# scalar spmv baseline


def decode_csr(memsys, image: CsrImage) -> CsrMatrix:
    rp = np.frombuffer(memsys.read_bytes(image.row_ptr_addr,
                                         4 * (image.rows + 1)), "<u4")
    ci = np.frombuffer(memsys.read_bytes(image.col_idx_addr, 4 * image.nnz),
                       "<u4")
    va = np.frombuffer(memsys.read_bytes(image.values_addr, image.nnz), "i1")
    return CsrMatrix(image.rows, image.cols, rp.copy(), ci.copy(),
                     va.copy()).validate()


def spmv_sw(soc: Soc, image: CsrImage, x_addr: int, y_addr: int,
            core_id: int = 0) -> tuple[np.ndarray, int]:
    core = soc.cores[core_id]
    a = decode_csr(soc.memsys, image)
    x = np.frombuffer(soc.memsys.read_bytes(x_addr, a.cols), "i1")
    y = spmv(a, x)
    start = core.now
    work = soc.cfg.spmv_work_cycles
    row_ptr = a.row_ptr.astype(np.int64)
    for r in range(a.rows):
        core.read_line(image.row_ptr_addr + 4 * (r + 1))
        core.work(4)
        for kk in range(row_ptr[r], row_ptr[r + 1]):
            core.read_line(image.col_idx_addr + 4 * kk)
            core.read_line(image.values_addr + kk)
            core.read_line(x_addr + int(a.col_idx[kk]))
            core.work(work)
        core.write_line(y_addr + 4 * r)
        core.work(2)
    soc.memsys.write_bytes(y_addr, y.astype("<i4").tobytes(), "spmv_sw")
    soc.stats.int8_ops += 2 * a.nnz
    return y, core.now - start


# ----------------------------------------------------------------------
# quantized MLP forward pass (ReLU activations, int8 weights)


@dataclass
class ReluMlpConfig:
    d_model: int = 64
    d_ff: int = 256
    layers: int = 2
    vocab: int = 256
    requant_shift: int = 10

    def validate(self) -> "ReluMlpConfig":
        if self.d_model < 64 or self.d_model % 64:
            raise ValidationError("d_model must be a positive multiple of 64")
        if self.d_ff < 1 or self.layers < 1 or self.vocab < 1:
            raise ValidationError("d_ff, layers, vocab must be >= 1")
        if not 0 <= self.requant_shift <= 24:
            raise ValidationError("requant_shift must be in [0, 24]")
        return self


@dataclass
class ReluMlpImage:
    cfg: ReluMlpConfig
    embed_addr: int          # vocab x d_model int8, row-major
    up_addrs: list[int]      # per layer: d_ff x d_model int8, row-major
    down_addrs: list[int]    # per layer: column-major, column stride d_model
    logits_addr: int         # vocab x d_model int8, row-major
    x_addr: int              # d_model scratch activation


def build_relu_mlp(soc: Soc, cfg: ReluMlpConfig,
                   rng: np.random.Generator) -> ReluMlpImage:
    cfg.validate()
    dm, ff, vv = cfg.d_model, cfg.d_ff, cfg.vocab

    def place(shape):
        w = rng.integers(-128, 128, size=shape, dtype=np.int16).astype(np.int8)
        addr = soc.alloc(w.size)
        soc.memsys.write_bytes(addr, w.tobytes(), "build_relu_mlp")
        return addr

    embed = place((vv, dm))
    ups, downs = [], []
    for _ in range(cfg.layers):
        ups.append(place((ff, dm)))
        downs.append(place((ff, dm)))   # column f of W_down at f*d_model
    logits = place((vv, dm))
    x_addr = soc.alloc(dm)
    return ReluMlpImage(cfg, embed, ups, downs, logits, x_addr)


def _requant(acc: np.ndarray, shift: int) -> np.ndarray:
    return np.clip(acc >> shift, -128, 127).astype(np.int8)


def _nmce_matvec(soc: Soc, core: CoreModel, w_addr: int, rows: int,
                 x_bytes: bytes, x_addr: int) -> np.ndarray:
    """acc[j] = sum over 64-chunks s of clamp_int16(x[s] . W[j][s]),
    W row-major with row stride d_model.  Launches fan out over engines."""
    dm = len(x_bytes)
    nseg = dm // 64
    npe = len(soc.engines)
    acc = np.zeros(rows, dtype=np.int32)
    for e in range(npe):
        core.mmio_write_u64(core.engine_reg(e, REG_STRIDE), dm)
    chunks = [(j0, min(32, rows - j0)) for j0 in range(0, rows, 32)]
    for s in range(nseg):
        lo = 64 * s
        _touch_span(core, x_addr + lo, 64)
        for e in range(npe):
            core.mmio_write(core.engine_reg(e, REG_V1), x_bytes[lo:lo + 64])
        for w0 in range(0, len(chunks), npe):
            wave = chunks[w0:w0 + npe]
            for e, (j0, cnt) in enumerate(wave):
                v2 = w_addr + j0 * dm + lo
                core.mmio_write_u64(core.engine_reg(e, REG_V2_ADDR), v2)
                core.mmio_write_u64(core.engine_reg(e, REG_GO),
                                    make_go_word(cnt, OP_MAC))
            for e, (j0, cnt) in enumerate(wave):
                state = core.wait_engine(e)
                _require_done(state, soc.engines[e].name, "matvec launch")
                raw = core.mmio_read(core.engine_reg(e, REG_RESULT), 2 * cnt)
                part = np.frombuffer(raw[:2 * cnt], dtype="<i2")
                acc[j0:j0 + cnt] += part.astype(np.int32)
                core.work(soc.cfg.reg_add_cycles * cnt)
    soc.stats.int8_ops += 2 * rows * dm
    return acc


@dataclass
class ReluInferResult:
    logits: np.ndarray
    cycles: int
    down_proj_bytes: int
    dense_down_proj_bytes: int
    activation_sparsity: float


def relu_infer(soc: Soc, model: ReluMlpImage, token: int,
               sparse_fetch: bool, core_id: int = 0) -> ReluInferResult:
    """One forward pass.  Up-projections and logits run on the engines; the
    down-projection is a scalar axpy over W_down columns, and a column whose
    activation is zero is skipped entirely when sparse_fetch is on (its
    contribution is zero, so results are bitwise unchanged)."""
    cfg = model.cfg
    if not 0 <= token < cfg.vocab:
        raise ValidationError("token out of range")
    core = soc.cores[core_id]
    dm, ff = cfg.d_model, cfg.d_ff
    mem = soc.memsys
    start = core.now

    def set_x(x: np.ndarray) -> bytes:
        data = x.astype(np.int8).tobytes()
        mem.write_bytes(model.x_addr, data, "relu_infer")
        core.work(soc.cfg.store_elem_cycles * dm)
        _touch_span(core, model.x_addr, dm, write=True)
        return data

    emb_addr = model.embed_addr + token * dm
    _touch_span(core, emb_addr, dm)
    x = np.frombuffer(mem.read_bytes(emb_addr, dm), "i1")
    x_bytes = set_x(x)

    down_bytes = 0
    zeros_seen = 0
    for layer in range(cfg.layers):
        acc_up = _nmce_matvec(soc, core, model.up_addrs[layer], ff,
                              x_bytes, model.x_addr)
        h = _requant(acc_up, cfg.requant_shift)
        h = np.maximum(h, 0)
        zeros_seen += int(np.count_nonzero(h == 0))
        y = np.zeros(dm, dtype=np.int32)
        col_lines = dm // LINE
        wdown = model.down_addrs[layer]
        for f in range(ff):
            if sparse_fetch and h[f] == 0:
                core.work(1)   # test and skip
                continue
            col_addr = wdown + f * dm
            _touch_span(core, col_addr, dm)
            col = np.frombuffer(mem.read_bytes(col_addr, dm), "i1")
            y += int(h[f]) * col.astype(np.int32)
            core.work(soc.cfg.axpy_elem_cycles * dm + 1)
            down_bytes += LINE * col_lines
        x = _requant(y, cfg.requant_shift)
        x_bytes = set_x(x)

    logits = _nmce_matvec(soc, core, model.logits_addr, cfg.vocab,
                          x_bytes, model.x_addr)
    dense_bytes = cfg.layers * ff * dm
    return ReluInferResult(
        logits=logits,
        cycles=core.now - start,
        down_proj_bytes=down_bytes,
        dense_down_proj_bytes=dense_bytes,
        activation_sparsity=zeros_seen / (cfg.layers * ff),
    )
