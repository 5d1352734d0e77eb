"""Sparse accelerator tests.

oracle_spmv is an independent scalar loop.  The frozen cycle counts for the
tiny warm case are derived by hand from the port model: five line fetches
(row pointers, indices, values, one x gather, one y commit), port latency 2,
datapath 8 lanes, one commit cycle per row.

  in_order            fetches chain: done = 2,4,6,8,10 -> commit at 11
  reservation_station fetches issue 1/cycle: done = 2,3,4,5,6 -> commit at 7
"""

import io

import numpy as np
import pytest

from socsim import (CsrMatrix, SimulationFault, Soc, SocConfig,
                    SparseAccelConfig, ValidationError, spmv, store_csr)


def oracle_spmv(a: CsrMatrix, x):
    y = []
    rp = a.row_ptr.tolist()
    ci = a.col_idx.tolist()
    va = a.values.tolist()
    for r in range(a.rows):
        acc = 0
        for k in range(rp[r], rp[r + 1]):
            acc += va[k] * int(x[ci[k]])
        y.append(acc)
    return y


def place(soc, a, warm=True):
    blob = 256 + 4 * (a.rows + 1) + 5 * a.nnz
    image = store_csr(soc.memsys, a, soc.alloc(blob))
    x_addr = soc.alloc(max(a.cols, 64))
    y_addr = soc.alloc(max(4 * a.rows, 64))
    if warm:
        soc.memsys.install_warm(image.row_ptr_addr, image.footprint())
        soc.memsys.install_warm(x_addr, max(a.cols, 64))
        soc.memsys.install_warm(y_addr, max(4 * a.rows, 64))
    return image, x_addr, y_addr


def run_variant(a, x, variant, warm=True):
    soc = Soc(SocConfig(sparse=SparseAccelConfig(variant=variant)))
    image, x_addr, y_addr = place(soc, a, warm)
    soc.memsys.write_bytes(x_addr, np.asarray(x, np.int8).tobytes(), "test")
    y, end = soc.sparse.run(image, x_addr, y_addr, 0)
    return y, end, soc


# ----------------------------------------------------------------------
# CSR container


def test_from_dense_roundtrip():
    d = np.array([[0, 3, 0], [0, 0, 0], [-7, 0, 2]], dtype=np.int8)
    a = CsrMatrix.from_dense(d)
    assert a.nnz == 3
    assert np.array_equal(a.to_dense(), d)


def test_validate_rejects_bad_row_ptr():
    with pytest.raises(ValidationError):
        CsrMatrix(2, 2, [0, 2, 1], [0, 1], [1, 1]).validate()


def test_validate_rejects_col_out_of_range():
    with pytest.raises(ValidationError):
        CsrMatrix(1, 2, [0, 1], [2], [1]).validate()


def test_binary_format_is_frozen():
    a = CsrMatrix(2, 3, [0, 1, 2], [2, 0], [7, -5])
    blob = a.to_bytes()
    want = (
        (2).to_bytes(8, "little") + (3).to_bytes(8, "little")
        + (2).to_bytes(8, "little")
        + b"".join(v.to_bytes(4, "little") for v in (0, 1, 2))
        + b"".join(v.to_bytes(4, "little") for v in (2, 0))
        + b"\x07" + b"\xfb"
    )
    assert blob == want
    back = CsrMatrix.from_bytes(blob)
    assert np.array_equal(back.to_dense(), a.to_dense())


def test_binary_rejects_truncation():
    a = CsrMatrix(2, 3, [0, 1, 2], [2, 0], [7, -5])
    with pytest.raises(ValidationError):
        CsrMatrix.from_bytes(a.to_bytes()[:-1])


def test_matrix_market_integer_general():
    text = """%%MatrixMarket matrix coordinate integer general
% comment line
3 4 3
1 1 5
3 4 -9
2 2 1
"""
    a = CsrMatrix.from_matrix_market(io.StringIO(text))
    want = np.zeros((3, 4), np.int8)
    want[0, 0], want[2, 3], want[1, 1] = 5, -9, 1
    assert np.array_equal(a.to_dense(), want)


def test_matrix_market_pattern_and_symmetric():
    text = """%%MatrixMarket matrix coordinate pattern symmetric
3 3 2
2 1
3 3
"""
    a = CsrMatrix.from_matrix_market(io.StringIO(text))
    want = np.zeros((3, 3), np.int8)
    want[1, 0] = want[0, 1] = want[2, 2] = 1
    assert np.array_equal(a.to_dense(), want)


def test_matrix_market_rejects_bad_banner():
    with pytest.raises(ValidationError):
        CsrMatrix.from_matrix_market(io.StringIO("%%MatrixMarket matrix array real general\n1 1\n1\n"))


def test_matrix_market_rejects_oversize_value():
    text = "%%MatrixMarket matrix coordinate integer general\n1 1 1\n1 1 300\n"
    with pytest.raises(ValidationError) as ei:
        CsrMatrix.from_matrix_market(io.StringIO(text))
    assert "line 3" in str(ei.value)


def test_file_roundtrip(tmp_path):
    rng = np.random.default_rng(5)
    a = CsrMatrix.random(17, 31, 0.2, rng)
    p = tmp_path / "m.csr"
    a.to_binary(p)
    b = CsrMatrix.from_binary(p)
    assert np.array_equal(a.to_dense(), b.to_dense())


# ----------------------------------------------------------------------
# exact spmv


def test_spmv_matches_oracle_on_randoms():
    rng = np.random.default_rng(9)
    for _ in range(25):
        rows = int(rng.integers(1, 40))
        cols = int(rng.integers(1, 40))
        a = CsrMatrix.random(rows, cols, float(rng.random()), rng)
        x = rng.integers(-128, 128, cols, dtype=np.int16).astype(np.int8)
        assert spmv(a, x).tolist() == oracle_spmv(a, x)


def test_spmv_shape_check():
    a = CsrMatrix.from_dense(np.eye(3, dtype=np.int8))
    with pytest.raises(ValidationError):
        spmv(a, np.zeros(4, np.int8))


# ----------------------------------------------------------------------
# timed device


def tiny_case():
    a = CsrMatrix(1, 64, [0, 2], [0, 1], [3, 5])
    x = np.ones(64, dtype=np.int8)
    return a, x


def test_frozen_in_order_cycles_tiny_warm():
    a, x = tiny_case()
    y, end, _ = run_variant(a, x, "in_order")
    assert y.tolist() == [8]
    assert end == 11


def test_frozen_reservation_station_cycles_tiny_warm():
    a, x = tiny_case()
    y, end, _ = run_variant(a, x, "reservation_station")
    assert y.tolist() == [8]
    assert end == 7


def test_y_is_written_to_memory():
    a, x = tiny_case()
    y, end, soc = run_variant(a, x, "in_order")
    # y_addr is the third allocation after the image and x
    raw = soc.memsys.read_bytes(soc._heap - 64, 4)
    assert int.from_bytes(raw, "little", signed=True) == 8


def test_both_variants_match_oracle_across_densities():
    rng = np.random.default_rng(21)
    for density in (0.0, 0.1, 0.5, 1.0):
        a = CsrMatrix.random(48, 48, density, rng)
        x = rng.integers(-128, 128, 48, dtype=np.int16).astype(np.int8)
        want = oracle_spmv(a, x)
        for variant in ("in_order", "reservation_station"):
            y, _, _ = run_variant(a, x, variant)
            assert y.tolist() == want


def test_reservation_station_never_slower_than_in_order():
    rng = np.random.default_rng(33)
    for trial in range(12):
        rows = int(rng.integers(1, 64))
        cols = int(rng.integers(1, 64))
        a = CsrMatrix.random(rows, cols, float(rng.random()), rng)
        x = rng.integers(-128, 128, cols, dtype=np.int16).astype(np.int8)
        warm = bool(trial % 2)
        _, t_io, _ = run_variant(a, x, "in_order", warm)
        _, t_rs, _ = run_variant(a, x, "reservation_station", warm)
        assert t_rs <= t_io


def test_empty_rows_still_commit():
    a = CsrMatrix(3, 8, [0, 0, 2, 2], [1, 3], [4, 4])
    x = np.ones(8, dtype=np.int8)
    y, end, _ = run_variant(a, x, "in_order")
    assert y.tolist() == [0, 8, 0]
    assert end > 0


def test_corrupt_image_raises_simulation_fault():
    a, x = tiny_case()
    soc = Soc()
    image, x_addr, y_addr = place(soc, a, warm=False)
    soc.memsys.write_bytes(image.row_ptr_addr, (99).to_bytes(4, "little"),
                           "test")
    with pytest.raises(SimulationFault):
        soc.sparse.run(image, x_addr, y_addr, 0)


def test_gather_buffer_dedupes_x_lines():
    """With 4 gather entries and x spanning 4 lines, every x line is
    fetched exactly once however the columns interleave."""
    rng = np.random.default_rng(2)
    a = CsrMatrix.random(64, 256, 0.3, rng)
    x = rng.integers(-128, 128, 256, dtype=np.int16).astype(np.int8)
    y, end, soc = run_variant(a, x, "in_order")
    assert y.tolist() == oracle_spmv(a, x)
    # warm L2: cycles should reflect only a few hundred fetches, far fewer
    # than one per nonzero gather
    assert end < 2 * (a.nnz + 600)


def test_variant_name_is_validated():
    with pytest.raises(ValidationError):
        SparseAccelConfig(variant="out_of_order").validate()
