"""socsim: deterministic cycle-approximate simulator of a heterogeneous SoC.

The model couples scalar cores, near-cache dense matrix engines programmed
over MMIO, a CPU-coupled sparse (CSR) accelerator, best-offset L2
prefetchers, and a banked cache hierarchy over one flat functional memory.
Functional results are exact; timing is approximate but fully deterministic:
the same config and seed always produce byte-identical benchmark reports.
"""

from .bop_prefetch import BestOffsetPrefetcher, BopConfig, \
    default_offset_candidates
from .faults import SimulationFault, ValidationError
from .harness import (REGISTRY, compare_reports, load_config, load_report,
                      main, run_suite, validate_report, write_csv,
                      write_report)
from .kernels import (CoreModel, MatmulOperands, ReluInferResult,
                      ReluMlpConfig, ReluMlpImage, Soc, SocConfig,
                      build_relu_mlp, matmul_accum, matmul_nmce,
                      matmul_reference, matmul_sw, memcpy_nmce, memcpy_sw,
                      place_matmul, relu_infer, spmv_sw, stride_kernel,
                      warm_matmul)
from .memsys import CacheConfig, MemEvent, MemorySystem
from .nmce import (NearMemoryEngine, OP_MAC, OP_MEMCPY, REG_DST_ADDR, REG_GO,
                   REG_RESULT, REG_STATUS, REG_STRIDE, REG_V1, REG_V2_ADDR,
                   STATUS_BUSY, STATUS_DONE, STATUS_ERROR, STATUS_IDLE,
                   make_go_word, saturating_dot)
from .sparse_accel import (CsrImage, CsrMatrix, SparseAccelConfig,
                           SparseAccelerator, spmv, store_csr)
from .stats import SimStats

__version__ = "0.1.0"

__all__ = [
    "BestOffsetPrefetcher", "BopConfig", "CacheConfig", "CoreModel",
    "CsrImage", "CsrMatrix", "MatmulOperands", "MemEvent", "MemorySystem",
    "NearMemoryEngine", "OP_MAC", "OP_MEMCPY", "REGISTRY", "REG_DST_ADDR",
    "REG_GO", "REG_RESULT", "REG_STATUS", "REG_STRIDE", "REG_V1",
    "REG_V2_ADDR", "ReluInferResult", "ReluMlpConfig", "ReluMlpImage",
    "SimStats", "SimulationFault", "Soc", "SocConfig", "SparseAccelConfig",
    "SparseAccelerator", "STATUS_BUSY", "STATUS_DONE", "STATUS_ERROR",
    "STATUS_IDLE", "ValidationError", "build_relu_mlp", "compare_reports",
    "default_offset_candidates", "load_config", "load_report", "main",
    "make_go_word", "matmul_accum", "matmul_nmce", "matmul_reference",
    "matmul_sw", "memcpy_nmce", "memcpy_sw", "place_matmul", "relu_infer",
    "run_suite", "saturating_dot", "spmv", "spmv_sw", "store_csr",
    "stride_kernel", "validate_report", "warm_matmul", "write_csv",
    "write_report",
]
