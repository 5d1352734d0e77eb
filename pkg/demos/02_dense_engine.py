"""Program a near-memory engine directly over its MMIO register window.

The engine owns a 64-byte vector register and streams windows of a second
operand out of its home L2 bank. Results are int16 with saturating
arithmetic. This script pokes the registers by hand the way a bare-metal
driver would.
"""

import numpy as np

from socsim import (OP_MAC, REG_GO, REG_RESULT, REG_STATUS, REG_STRIDE,
                    REG_V1, REG_V2_ADDR, STATUS_DONE, Soc, make_go_word)

soc = Soc()
e = soc.engines[0]

# operand B: 8 windows of 64 bytes, bank-affine stride so every fetch
# stays in the engine's home bank
base = 0x40000
stride = 256
rng = np.random.default_rng(7)
for i in range(8):
    win = rng.integers(-128, 128, 64, dtype=np.int16).astype(np.int8)
    soc.memsys.write_bytes(base + i * stride, win.tobytes(), "demo")

v1 = rng.integers(-128, 128, 64, dtype=np.int16).astype(np.int8)

t = 0
e.mmio_write(REG_V1, v1.tobytes(), t)
e.mmio_write(REG_V2_ADDR, base.to_bytes(8, "little"), t)
e.mmio_write(REG_STRIDE, stride.to_bytes(8, "little", signed=True), t)
e.mmio_write(REG_GO, make_go_word(8, OP_MAC).to_bytes(8, "little"), t)

# poll status while the engine works; cold DRAM fills dominate the span
for poll in (100, 400, 800, 1200):
    word = int.from_bytes(e.mmio_read(REG_STATUS, 8, poll), "little")
    state, progress = word & 0xFF, word >> 8
    print(f"cycle {poll:3d}: state={state} progress={progress}/8")

done = e.finish()
word = int.from_bytes(e.mmio_read(REG_STATUS, 8, done), "little")
assert word & 0xFF == STATUS_DONE
res = np.frombuffer(e.mmio_read(REG_RESULT, 64, done), "<i2")[:8]
print(f"engine finished at cycle {done}")
print(f"results: {res.tolist()}")

ref = [int(np.clip(v1.astype(np.int32) @ np.frombuffer(
    soc.memsys.read_bytes(base + i * stride, 64), "i1").astype(np.int32),
    -32768, 32767)) for i in range(8)]
print(f"oracle:  {ref}")
assert res.tolist() == ref

# saturation: 64 * 127 * 127 overflows int16 and must clamp, not wrap
soc.memsys.write_bytes(base, b"\x7f" * 64, "demo")
e.mmio_write(REG_V1, b"\x7f" * 64, done)
e.mmio_write(REG_GO, make_go_word(1, OP_MAC).to_bytes(8, "little"), done)
t2 = e.finish()
sat = np.frombuffer(e.mmio_read(REG_RESULT, 64, t2), "<i2")[0]
print(f"all-127 dot product saturates to {sat} (raw value would be "
      f"{64 * 127 * 127})")
