"""Acceptance gate.

Each test covers one shipping criterion and prints a single PASS/FAIL line
(written straight to the terminal so it shows up even under pytest capture).
Tolerances and runtime bounds are pinned in the asserts; the functional
criteria are zero-tolerance bit equality against independent oracles.
"""

import json
import time

import numpy as np
import pytest

from socsim import (CsrMatrix, OP_MAC, ReluMlpConfig, Soc, SocConfig,
                    SparseAccelConfig, STATUS_DONE, build_relu_mlp,
                    make_go_word, matmul_nmce, matmul_reference, matmul_sw,
                    place_matmul, relu_infer, store_csr, stride_kernel,
                    warm_matmul)
from socsim.harness import run_suite
from socsim.nmce import REG_GO, REG_RESULT, REG_STATUS, REG_STRIDE, REG_V1, \
    REG_V2_ADDR

SEED = 20260815

# one line per criterion; conftest prints this block after the test run
RESULTS = []


def criterion(label):
    def wrap(fn):
        def run():
            t0 = time.perf_counter()
            try:
                fn()
            except BaseException:
                RESULTS.append(f"FAIL {label}")
                raise
            RESULTS.append(f"PASS {label} [{time.perf_counter() - t0:.1f}s]")
        run.__name__ = fn.__name__
        return run
    return wrap


def scalar_saturating_dot(v1, window):
    acc = 0
    for a, b in zip(v1, window):
        acc += a * b
    return max(-32768, min(32767, acc))


# ----------------------------------------------------------------------


@criterion("1: engine MAC == scalar saturating oracle, 10k+ MMIO cases")
def test_criterion_1_mac_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    soc = Soc()
    e = soc.engines[0]
    base = 1 << 20
    pool = rng.integers(-128, 128, 1 << 16, dtype=np.int16).astype(np.int8)
    soc.memsys.write_bytes(base, pool.tobytes(), "acc1")
    extreme = np.array([-128, -127, 126, 127], dtype=np.int8)
    epool = extreme[rng.integers(0, 4, 1 << 14)]
    soc.memsys.write_bytes(base + (1 << 16), epool.tobytes(), "acc1")

    def launch(v1, v2, stride, count, now):
        e.mmio_write(REG_V1, v1.tobytes(), now)
        e.mmio_write(REG_V2_ADDR, int(v2).to_bytes(8, "little"), now)
        e.mmio_write(REG_STRIDE, int(stride).to_bytes(8, "little",
                                                      signed=True), now)
        e.mmio_write(REG_GO, make_go_word(count, OP_MAC).to_bytes(8, "little"),
                     now)
        done = e.finish()
        word = int.from_bytes(e.mmio_read(REG_STATUS, 8, done), "little")
        assert word & 0xFF == STATUS_DONE
        got = np.frombuffer(e.mmio_read(REG_RESULT, 64, done), "<i2")[:count]
        for i in range(count):
            window = np.frombuffer(
                soc.memsys.read_bytes(v2 + i * stride, 64), "i1")
            want = scalar_saturating_dot(v1.tolist(), window.tolist())
            assert got[i] == want, (v2, stride, count, i)
        return count

    strides = [0, 64, -64, 128, 256, -256, 192, -192, 96, 33, -57, 320, -320]
    cases = 0
    trial = 0

    def next_now():
        nonlocal trial
        trial += 1
        return trial * 10 ** 7

    mid = base + (1 << 15)           # ample room for negative strides
    for _ in range(220):             # random values, random strides
        v1 = pool[int(rng.integers(0, (1 << 16) - 64)):][:64]
        v2 = mid + int(rng.integers(0, 4096))
        cases += launch(v1, v2, strides[int(rng.integers(0, len(strides)))],
                        32, next_now())
    emid = base + (1 << 16) + (1 << 13)
    for _ in range(100):             # +-127/-128 heavy inputs; saturation
        v1 = epool[int(rng.integers(0, (1 << 14) - 64)):][:64]
        cases += launch(v1, emid + int(rng.integers(0, 2048)),
                        strides[int(rng.integers(0, len(strides)))],
                        32, next_now())
    for _ in range(40):              # stride 0: all windows identical
        v1 = pool[int(rng.integers(0, (1 << 16) - 64)):][:64]
        cases += launch(v1, mid + int(rng.integers(0, 4096)), 0, 32,
                        next_now())
    for _ in range(40):              # negative strides walk downward
        v1 = pool[int(rng.integers(0, (1 << 16) - 64)):][:64]
        cases += launch(v1, mid + int(rng.integers(0, 4096)),
                        -int(rng.integers(1, 321)), 32, next_now())
    for _ in range(30):              # short ops
        v1 = pool[int(rng.integers(0, (1 << 16) - 64)):][:64]
        cases += launch(v1, mid + int(rng.integers(0, 4096)), 64,
                        int(rng.integers(1, 33)), next_now())
    # deterministic rail hits
    soc.memsys.write_bytes(mid, b"\x7f" * 64 + b"\x80" * 64, "acc1")
    ones = np.full(64, 127, dtype=np.int8)
    cases += launch(ones, mid, 64, 2, next_now())

    assert cases >= 10_000, cases
    assert time.perf_counter() - t0 < 10.0


@criterion("2: single/quad/engine matmul bit-identical on 100+ shapes")
def test_criterion_2_three_path_matmul():
    rng = np.random.default_rng(SEED + 1)

    def all_paths_equal(a, b):
        ref = matmul_reference(a, b)
        for path in ("single", "quad", "nmce"):
            soc = Soc(SocConfig(pipelined_nmce=True))
            ops = place_matmul(soc, a, b)
            warm_matmul(soc, ops)
            if path == "nmce":
                c, _ = matmul_nmce(soc, ops)
            else:
                c, _ = matmul_sw(soc, ops, cores=1 if path == "single" else 4)
            assert np.array_equal(c, ref), (path, a.shape, b.shape)

    shapes = 0
    for _ in range(100):
        m = int(rng.integers(1, 9))
        k = int(rng.integers(1, 161))
        n = int(rng.integers(1, 9))
        a = rng.integers(-128, 128, (m, k), dtype=np.int16).astype(np.int8)
        b = rng.integers(-128, 128, (k, n), dtype=np.int16).astype(np.int8)
        all_paths_equal(a, b)
        shapes += 1
    # saturating and edge shapes on top of the randomized set
    all_paths_equal(np.full((4, 192), 127, dtype=np.int8),
                    np.full((192, 3), 127, dtype=np.int8))
    all_paths_equal(np.full((4, 192), -128, dtype=np.int8),
                    np.full((192, 3), 127, dtype=np.int8))
    all_paths_equal(np.ones((1, 1), dtype=np.int8),
                    np.ones((1, 1), dtype=np.int8))
    shapes += 3
    assert shapes >= 100


@criterion("3: sparse variants == dense A*x at 1/10/50/100% density; "
           "RS <= in-order")
def test_criterion_3_sparse_oracle():
    rng = np.random.default_rng(SEED + 2)
    sizes = [(8, 8), (32, 64), (128, 128), (256, 256)]
    densities = [0.01, 0.10, 0.50, 1.00]
    checked = 0
    for si, (rows, cols) in enumerate(sizes):
        for di, dens in enumerate(densities):
            a = CsrMatrix.random(rows, cols, dens, rng)
            x = rng.integers(-128, 128, cols, dtype=np.int16).astype(np.int8)
            ref = a.to_dense().astype(np.int64) @ x.astype(np.int64)
            warm = (si + di) % 2 == 0
            ends = {}
            for variant in ("in_order", "reservation_station"):
                soc = Soc(SocConfig(
                    sparse=SparseAccelConfig(variant=variant)))
                image = store_csr(soc.memsys, a,
                                  soc.alloc(8192 + 5 * max(a.nnz, 1)))
                x_addr = soc.alloc(max(cols, 64))
                y_addr = soc.alloc(4 * rows)
                soc.memsys.write_bytes(x_addr, x.tobytes(), "acc3")
                if warm:
                    soc.memsys.install_warm(image.row_ptr_addr,
                                            image.footprint())
                    soc.memsys.install_warm(x_addr, cols)
                    soc.memsys.install_warm(y_addr, 4 * rows)
                y, end = soc.sparse.run(image, x_addr, y_addr, 0)
                assert np.array_equal(y.astype(np.int64), ref), \
                    (variant, rows, cols, dens)
                back = np.frombuffer(
                    soc.memsys.read_bytes(y_addr, 4 * rows), "<i4")
                assert np.array_equal(back.astype(np.int64), ref)
                ends[variant] = end
                checked += 1
            assert ends["reservation_station"] <= ends["in_order"], \
                (rows, cols, dens, warm, ends)
    assert checked == 2 * len(sizes) * len(densities)


@criterion("4: speedup trends on the default suite "
           "(>=5x @8, >=20x @256, monotone; memcpy >1x; sparse >10x)")
def test_criterion_4_speedup_trends():
    t0 = time.perf_counter()
    report = run_suite({"benchmarks": ["matmul_8", "matmul_64", "matmul_256",
                                       "memcpy_1m", "spmv_d10", "spmv_d50"]})
    sp = {(r["benchmark"], r["path"]): r["speedup_vs_baseline"]
          for r in report["rows"]}
    s8 = sp[("matmul_8", "nmce")]
    s64 = sp[("matmul_64", "nmce")]
    s256 = sp[("matmul_256", "nmce")]
    assert s8 >= 5.0, s8
    assert s256 >= 20.0, s256
    assert s8 <= s64 <= s256, (s8, s64, s256)
    assert sp[("memcpy_1m", "nmce")] > 1.0
    for bench in ("spmv_d10", "spmv_d50"):
        for variant in ("in_order", "reservation_station"):
            assert sp[(bench, variant)] > 10.0, (bench, variant)
    assert time.perf_counter() - t0 < 120.0


@criterion("5: prefetcher learns stride offsets; never slower; "
           "default gain in (0%, 20%]")
def test_criterion_5_prefetcher():
    t0 = time.perf_counter()
    window = 4 << 20

    def run(stride_lines, count, enabled):
        soc = Soc(SocConfig(prefetch_enabled=enabled))
        addr = soc.alloc(window)
        cyc = stride_kernel(soc, addr, count, stride_lines, 800, window)
        pf = soc.memsys.prefetchers[0]
        return cyc, pf

    # learned offsets over full learning phases
    _, pf1 = run(1, 8192, True)
    assert pf1.best_offset == 1, pf1.best_offset
    _, pf2 = run(2, 8192, True)
    assert pf2.best_offset == 2, pf2.best_offset

    # never slower than prefetch-off, including a hostile giant stride
    for stride_lines, count in ((1, 16384), (2, 8192), (300, 4096)):
        off, _ = run(stride_lines, count, False)
        on, _ = run(stride_lines, count, True)
        assert on <= off, (stride_lines, on, off)
        if stride_lines == 1 and count == 16384:
            gain = 100.0 * (off - on) / off
            assert 0.0 < gain <= 20.0, gain
    assert time.perf_counter() - t0 < 30.0


@criterion("6: sparse-fetch inference: logits bit-identical, weight bytes "
           "track activation sparsity within 5%")
def test_criterion_6_relu_sparse_fetch():
    t0 = time.perf_counter()
    mcfg = ReluMlpConfig(d_model=128, d_ff=512, layers=4, vocab=256)
    res = {}
    for sparse in (False, True):
        soc = Soc(SocConfig(pipelined_nmce=True))
        model = build_relu_mlp(soc, mcfg, np.random.default_rng(SEED + 3))
        res[sparse] = relu_infer(soc, model, token=36, sparse_fetch=sparse)
    dense, sp = res[False], res[True]
    assert np.array_equal(dense.logits, sp.logits)
    assert sp.activation_sparsity > 0.0
    expected = (1.0 - sp.activation_sparsity) * sp.dense_down_proj_bytes
    drift = abs(sp.down_proj_bytes - expected) / sp.dense_down_proj_bytes
    assert drift <= 0.05, (sp.down_proj_bytes, expected)
    assert sp.cycles < dense.cycles
    assert time.perf_counter() - t0 < 60.0


@criterion("7: same seed, same config -> byte-identical reports")
def test_criterion_7_determinism():
    blob_a = json.dumps(run_suite({}), indent=2, sort_keys=True)
    blob_b = json.dumps(run_suite({}), indent=2, sort_keys=True)
    assert blob_a.encode() == blob_b.encode()


@criterion("8: bank striping spreads every aligned 4N-line region evenly")
def test_criterion_8_stripe_balance():
    soc = Soc()
    banks = soc.cfg.cache.banks
    nlines = (64 << 10) // 64                     # 64 KiB window
    bank_idx = np.array([soc.memsys.bank_of(64 * i) for i in range(nlines)])
    pref = np.zeros((banks, nlines + 1), dtype=np.int64)
    for b in range(banks):
        pref[b, 1:] = np.cumsum(bank_idx == b)
    for n in range(1, nlines // banks + 1):
        span = banks * n
        starts = np.arange(0, nlines - span + 1)
        for b in range(banks):
            seg = pref[b, starts + span] - pref[b, starts]
            assert (seg == n).all(), (n, b)
