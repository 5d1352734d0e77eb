"""CPU-coupled sparse accelerator: int8 CSR matrix times int8 vector, exact int32.

The accelerator walks a CSR image that lives in simulated memory and gathers
x entries by column index.  Four read streams (row pointers, column indices,
values, x gathers) plus the y row commits share one L2-side port.  Each
stream keeps a current-line register, so consecutive touches to the same
line cost nothing; only line transitions issue a port fetch.  Two fetch
schedulers consume the identical fetch sequence:

  in_order              one outstanding fetch; the next fetch issues only
                        after the previous one completed
  reservation_station   up to rs_entries outstanding fetches, issued at one
                        per cycle; a slot frees when its data arrives

Consumed elements retire through a datapath that sustains `lanes` nonzeros
per cycle, and every row ends with a one-cycle commit of its y word.
"""

from __future__ import annotations

import struct
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .faults import SimulationFault, ValidationError

LINE = 64
INT32_MIN = -(2 ** 31)
INT32_MAX = 2 ** 31 - 1

_HEADER = struct.Struct("<3Q")  # rows, cols, nnz


@dataclass
class CsrMatrix:
    """Compressed sparse rows with int8 values and u32 indices."""

    rows: int
    cols: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.row_ptr = np.asarray(self.row_ptr, dtype=np.uint32)
        self.col_idx = np.asarray(self.col_idx, dtype=np.uint32)
        self.values = np.asarray(self.values, dtype=np.int8)

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    def validate(self):
        if self.rows <= 0 or self.cols <= 0:
            raise ValidationError("matrix dimensions must be positive")
        if self.row_ptr.shape != (self.rows + 1,):
            raise ValidationError("row_ptr must have rows+1 entries")
        if self.row_ptr[0] != 0 or self.row_ptr[-1] != self.nnz:
            raise ValidationError("row_ptr must start at 0 and end at nnz")
        if np.any(np.diff(self.row_ptr.astype(np.int64)) < 0):
            raise ValidationError("row_ptr must be non-decreasing")
        if self.col_idx.shape != self.values.shape:
            raise ValidationError("col_idx and values must have equal length")
        if self.nnz and int(self.col_idx.max()) >= self.cols:
            raise ValidationError("column index out of range")
        return self

    # ------------------------------------------------------------------
    # constructors

    @classmethod
    def from_dense(cls, dense) -> "CsrMatrix":
        d = np.asarray(dense)
        if d.ndim != 2:
            raise ValidationError("dense input must be 2-D")
        if d.size and (d.min() < -128 or d.max() > 127):
            raise ValidationError("values must fit int8")
        rows, cols = d.shape
        r, c = np.nonzero(d)
        row_ptr = np.zeros(rows + 1, dtype=np.uint32)
        np.cumsum(np.bincount(r, minlength=rows), out=row_ptr[1:])
        return cls(rows, cols, row_ptr, c.astype(np.uint32),
                   d[r, c].astype(np.int8)).validate()

    @classmethod
    def random(cls, rows: int, cols: int, density: float,
               rng: np.random.Generator) -> "CsrMatrix":
        """Bernoulli sparsity pattern; stored values are nonzero int8."""
        if not 0.0 <= density <= 1.0:
            raise ValidationError("density must be in [0, 1]")
        mask = rng.random((rows, cols)) < density
        vals = rng.integers(-128, 128, size=(rows, cols), dtype=np.int16)
        vals[vals == 0] = 1
        dense = np.where(mask, vals, 0).astype(np.int16)
        return cls.from_dense(dense)

    def to_dense(self) -> np.ndarray:
        d = np.zeros((self.rows, self.cols), dtype=np.int8)
        spans = np.diff(self.row_ptr.astype(np.int64))
        r = np.repeat(np.arange(self.rows), spans)
        d[r, self.col_idx] = self.values
        return d

    # ------------------------------------------------------------------
    # serialization: [rows u64][cols u64][nnz u64][row_ptr u32...]
    #                [col_idx u32...][values i8...], all little-endian

    def to_bytes(self) -> bytes:
        return (_HEADER.pack(self.rows, self.cols, self.nnz)
                + self.row_ptr.astype("<u4").tobytes()
                + self.col_idx.astype("<u4").tobytes()
                + self.values.astype("i1").tobytes())

    @classmethod
    def from_bytes(cls, blob: bytes) -> "CsrMatrix":
        if len(blob) < _HEADER.size:
            raise ValidationError("truncated CSR image")
        rows, cols, nnz = _HEADER.unpack_from(blob)
        need = _HEADER.size + 4 * (rows + 1) + 4 * nnz + nnz
        if len(blob) != need:
            raise ValidationError(
                f"CSR image is {len(blob)} bytes, header implies {need}")
        off = _HEADER.size
        row_ptr = np.frombuffer(blob, "<u4", rows + 1, off)
        off += 4 * (rows + 1)
        col_idx = np.frombuffer(blob, "<u4", nnz, off)
        off += 4 * nnz
        values = np.frombuffer(blob, "i1", nnz, off)
        return cls(rows, cols, row_ptr.copy(), col_idx.copy(),
                   values.copy()).validate()

    def to_binary(self, path):
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def from_binary(cls, path) -> "CsrMatrix":
        return cls.from_bytes(Path(path).read_bytes())

    @classmethod
    def from_matrix_market(cls, source) -> "CsrMatrix":
        """Coordinate-format Matrix Market reader (integer/pattern,
        general/symmetric)."""
        if hasattr(source, "read"):
            text = source.read()
        else:
            text = Path(source).read_text()
        lines = iter(text.splitlines())
        try:
            banner = next(lines).split()
        except StopIteration:
            raise ValidationError("empty Matrix Market input") from None
        if (len(banner) < 5 or banner[0].lower() != "%%matrixmarket"
                or banner[1].lower() != "matrix"
                or banner[2].lower() != "coordinate"):
            raise ValidationError("expected a coordinate Matrix Market banner")
        kind = banner[3].lower()
        symmetry = banner[4].lower()
        if kind not in ("integer", "pattern"):
            raise ValidationError(f"unsupported value field '{kind}'")
        if symmetry not in ("general", "symmetric"):
            raise ValidationError(f"unsupported symmetry '{symmetry}'")
        dims = None
        triples = []
        for ln, raw in enumerate(lines, start=2):
            s = raw.strip()
            if not s or s.startswith("%"):
                continue
            parts = s.split()
            if dims is None:
                if len(parts) != 3:
                    raise ValidationError(f"line {ln}: bad size line")
                dims = tuple(int(p) for p in parts)
                continue
            want = 2 if kind == "pattern" else 3
            if len(parts) != want:
                raise ValidationError(f"line {ln}: expected {want} fields")
            i, j = int(parts[0]) - 1, int(parts[1]) - 1
            v = 1 if kind == "pattern" else int(parts[2])
            if not (0 <= i < dims[0] and 0 <= j < dims[1]):
                raise ValidationError(f"line {ln}: entry out of bounds")
            if not -128 <= v <= 127:
                raise ValidationError(f"line {ln}: value does not fit int8")
            triples.append((i, j, v))
            if symmetry == "symmetric" and i != j:
                triples.append((j, i, v))
        if dims is None:
            raise ValidationError("missing size line")
        rows, cols, _ = dims
        triples.sort(key=lambda t: (t[0], t[1]))
        r = np.fromiter((t[0] for t in triples), dtype=np.int64,
                        count=len(triples))
        row_ptr = np.zeros(rows + 1, dtype=np.uint32)
        np.cumsum(np.bincount(r, minlength=rows), out=row_ptr[1:])
        col_idx = np.fromiter((t[1] for t in triples), dtype=np.uint32,
                              count=len(triples))
        values = np.fromiter((t[2] for t in triples), dtype=np.int8,
                             count=len(triples))
        return cls(rows, cols, row_ptr, col_idx, values).validate()


def spmv(a: CsrMatrix, x) -> np.ndarray:
    """Exact y = A @ x with int64 accumulation, result guaranteed int32."""
    xv = np.asarray(x)
    if xv.shape != (a.cols,):
        raise ValidationError(f"x must have {a.cols} entries")
    prod = a.values.astype(np.int64) * xv.astype(np.int64)[a.col_idx]
    spans = np.diff(a.row_ptr.astype(np.int64))
    y = np.zeros(a.rows, dtype=np.int64)
    np.add.at(y, np.repeat(np.arange(a.rows), spans), prod)
    if y.size and (y.min() < INT32_MIN or y.max() > INT32_MAX):
        raise ValidationError("result exceeds the exact int32 range")
    return y.astype(np.int32)


# ----------------------------------------------------------------------
# timed device model


@dataclass
class SparseAccelConfig:
    variant: str = "reservation_station"
    rs_entries: int = 8
    lanes: int = 8
    port_cycles: int = 2
    gather_entries: int = 4   # x-gather line buffer; other streams hold 1 line

    def validate(self):
        if self.variant not in ("in_order", "reservation_station"):
            raise ValidationError(f"unknown sparse variant '{self.variant}'")
        if (self.rs_entries < 1 or self.lanes < 1 or self.port_cycles < 1
                or self.gather_entries < 1):
            raise ValidationError("sparse accelerator parameters must be >= 1")
        return self


@dataclass
class CsrImage:
    """Addresses of a CSR matrix resident in simulated memory."""

    rows: int
    cols: int
    nnz: int
    row_ptr_addr: int
    col_idx_addr: int
    values_addr: int
    end_addr: int = field(default=0)

    def footprint(self) -> int:
        return self.end_addr - self.row_ptr_addr


def store_csr(memsys, a: CsrMatrix, base: int) -> CsrImage:
    """Write the three CSR arrays into simulated memory, each line-aligned."""
    def align(v):
        return (v + LINE - 1) & ~(LINE - 1)

    rp = align(base)
    ci = align(rp + 4 * (a.rows + 1))
    va = align(ci + 4 * a.nnz)
    end = align(va + a.nnz)
    memsys.write_bytes(rp, a.row_ptr.astype("<u4").tobytes(), "store_csr")
    memsys.write_bytes(ci, a.col_idx.astype("<u4").tobytes(), "store_csr")
    memsys.write_bytes(va, a.values.astype("i1").tobytes(), "store_csr")
    return CsrImage(a.rows, a.cols, a.nnz, rp, ci, va, end)


class SparseAccelerator:
    def __init__(self, memsys, cfg: SparseAccelConfig | None = None,
                 accel_id: int = 0):
        self.memsys = memsys
        self.cfg = (cfg or SparseAccelConfig()).validate()
        self.name = f"sparse{accel_id}"

    def _decode(self, image: CsrImage) -> CsrMatrix:
        m = self.memsys
        rp = np.frombuffer(
            m.read_bytes(image.row_ptr_addr, 4 * (image.rows + 1), self.name),
            "<u4")
        ci = np.frombuffer(
            m.read_bytes(image.col_idx_addr, 4 * image.nnz, self.name), "<u4")
        va = np.frombuffer(
            m.read_bytes(image.values_addr, image.nnz, self.name), "i1")
        try:
            return CsrMatrix(image.rows, image.cols, rp.copy(), ci.copy(),
                             va.copy()).validate()
        except ValidationError as e:
            raise SimulationFault(self.name, f"corrupt CSR image: {e}") from e

    def run(self, image: CsrImage, x_addr: int, y_addr: int,
            now: int) -> tuple[np.ndarray, int]:
        """Compute y = A @ x; returns (y, completion cycle)."""
        a = self._decode(image)
        x = np.frombuffer(self.memsys.read_bytes(x_addr, a.cols, self.name),
                          "i1")
        y = spmv(a, x)

        fetch_addr: list[int] = []
        fetch_is_write: list[bool] = []
        streams = ("rp", "idx", "val", "x", "y")
        bufs: dict[str, OrderedDict] = {s: OrderedDict() for s in streams}
        caps = {s: 1 for s in streams}
        caps["x"] = self.cfg.gather_entries

        def touch(stream: str, addr: int, write: bool = False) -> int:
            # returns the index of the fetch that brought this line in
            la = addr & ~(LINE - 1)
            buf = bufs[stream]
            hit = buf.get(la)
            if hit is not None:
                buf.move_to_end(la)
                return hit
            while len(buf) >= caps[stream]:
                buf.popitem(last=False)
            fetch_addr.append(la)
            fetch_is_write.append(write)
            buf[la] = len(fetch_addr) - 1
            return buf[la]

        row_ptr = a.row_ptr.astype(np.int64)
        elem_dep: list[int] = []
        row_last_elem: list[int] = []     # index into elem arrays, -1 if empty
        row_commit_dep: list[int] = []
        for r in range(a.rows):
            d = touch("rp", image.row_ptr_addr + 4 * r)
            d = max(d, touch("rp", image.row_ptr_addr + 4 * (r + 1)))
            for k in range(row_ptr[r], row_ptr[r + 1]):
                dk = touch("idx", image.col_idx_addr + 4 * k)
                dk = max(dk, touch("val", image.values_addr + k))
                dk = max(dk, touch("x", x_addr + int(a.col_idx[k])))
                elem_dep.append(max(dk, d))
            row_last_elem.append(len(elem_dep) - 1 if row_ptr[r + 1] > row_ptr[r]
                                 else -1)
            row_commit_dep.append(max(d, touch("y", y_addr + 4 * r, write=True)))

        done = self._schedule(fetch_addr, fetch_is_write, now)

        # datapath: `lanes` elements per cycle, in stream order
        lanes = self.cfg.lanes
        consume: list[int] = []
        t, used = now, lanes
        for dep in elem_dep:
            avail = done[dep]
            if avail > t:
                t, used = avail, 1
            elif used < lanes:
                used += 1
            else:
                t, used = t + 1, 1
            consume.append(t)

        end = now
        commit_prev = now
        for r in range(a.rows):
            last = row_last_elem[r]
            ready = consume[last] if last >= 0 else now
            ready = max(ready, done[row_commit_dep[r]], commit_prev)
            commit_prev = ready + 1
            end = commit_prev

        self.memsys.write_bytes(y_addr, y.astype("<i4").tobytes(), self.name)
        self.memsys.stats.int8_ops += 2 * a.nnz
        return y, end

    def _schedule(self, addrs: list[int], writes: list[bool],
                  now: int) -> list[int]:
        m = self.memsys
        pc = self.cfg.port_cycles
        rs = self.cfg.rs_entries
        in_order = self.cfg.variant == "in_order"
        done: list[int] = []
        prev_issue = now - 1
        for f, addr in enumerate(addrs):
            if in_order:
                t_issue = done[f - 1] if f else now
            else:
                t_issue = max(prev_issue + 1,
                              done[f - rs] if f >= rs else now)
            prev_issue = t_issue
            if writes[f]:
                done.append(m.stream_write(addr, t_issue, pc, self.name))
            else:
                done.append(m.stream_read(addr, t_issue, pc, self.name))
        return done
