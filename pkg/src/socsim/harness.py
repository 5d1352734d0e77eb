"""Benchmark suite and command line interface.

Subcommands:

  socsim run               run the suite, write a JSON report (optionally CSV)
  socsim compare A B       compare two reports row by row at a cycle tolerance
  socsim list-benchmarks   show benchmark names, paths, and default parameters

Determinism contract: the same config and seed produce a byte-identical
report.  Each benchmark draws its inputs from an rng seeded with
[seed, benchmark_index] and every measured path runs on a fresh Soc, so
adding or filtering benchmarks never perturbs the others.  Reports carry no
timestamps.

Exit codes: 0 success, 1 compare found rows out of tolerance, 2 config or
usage error, 3 simulation fault.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
from dataclasses import dataclass, replace
from importlib import resources

import numpy as np

from .faults import SimulationFault, ValidationError
from .kernels import (ReluMlpConfig, Soc, SocConfig, build_relu_mlp,
                      matmul_nmce, matmul_reference, matmul_sw, memcpy_nmce,
                      memcpy_sw, place_matmul, relu_infer, spmv_sw,
                      stride_kernel, warm_matmul)
from .sparse_accel import CsrMatrix, spmv, store_csr

SCHEMA_VERSION = 1


# ----------------------------------------------------------------------
# config handling


def _merge_dataclass(obj, data: dict, path: str):
    names = {f.name for f in dataclasses.fields(obj)}
    for key, val in data.items():
        if key not in names:
            raise ValidationError(f"{path}: unknown field '{key}'")
        cur = getattr(obj, key)
        if dataclasses.is_dataclass(cur):
            if not isinstance(val, dict):
                raise ValidationError(f"{path}.{key}: expected an object")
            _merge_dataclass(cur, val, f"{path}.{key}")
        else:
            if isinstance(cur, bool) and not isinstance(val, bool):
                raise ValidationError(f"{path}.{key}: expected a boolean")
            if isinstance(cur, int) and not isinstance(cur, bool) and \
                    not isinstance(val, int):
                raise ValidationError(f"{path}.{key}: expected an integer")
            setattr(obj, key, val)
    return obj


def build_soc_config(data: dict) -> SocConfig:
    cfg = SocConfig()
    _merge_dataclass(cfg, data, "soc")
    return cfg.validate()


def load_config(path: str) -> dict:
    try:
        text = open(path, encoding="utf-8").read()
    except OSError as e:
        raise ValidationError(f"{path}: {e.strerror or e}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ValidationError(
            f"{path}:{e.lineno}:{e.colno}: {e.msg}") from e
    if not isinstance(data, dict):
        raise ValidationError(f"{path}: top level must be an object")
    return data


def validate_config(config: dict):
    allowed = {"seed", "soc", "benchmarks", "params"}
    for key in config:
        if key not in allowed:
            raise ValidationError(f"config: unknown key '{key}'")
    if "seed" in config and not isinstance(config["seed"], int):
        raise ValidationError("config.seed: expected an integer")
    if "benchmarks" in config:
        if (not isinstance(config["benchmarks"], list)
                or not all(isinstance(b, str) for b in config["benchmarks"])):
            raise ValidationError("config.benchmarks: expected a list of names")
        known = {s.name for s in REGISTRY}
        for b in config["benchmarks"]:
            if b not in known:
                raise ValidationError(f"config.benchmarks: unknown benchmark "
                                      f"'{b}'")
    if "params" in config:
        if not isinstance(config["params"], dict):
            raise ValidationError("config.params: expected an object")
        known = {s.name for s in REGISTRY}
        for b, p in config["params"].items():
            if b not in known:
                raise ValidationError(f"config.params: unknown benchmark '{b}'")
            if not isinstance(p, dict):
                raise ValidationError(f"config.params.{b}: expected an object")
    build_soc_config(config.get("soc", {}))


# ----------------------------------------------------------------------
# benchmarks


@dataclass
class PathResult:
    path: str
    soc: Soc
    cycles: int
    extra: dict


def _int8(rng, shape):
    return rng.integers(-128, 128, size=shape, dtype=np.int16).astype(np.int8)


def bench_matmul(size: int, base: SocConfig, params: dict,
                 rng: np.random.Generator) -> list[PathResult]:
    m = k = n = size
    a, b = _int8(rng, (m, k)), _int8(rng, (k, n))
    expected = matmul_reference(a, b)
    out = []
    for path in ("single", "quad", "nmce"):
        soc = Soc(base)
        ops = place_matmul(soc, a, b)
        if params["warm"]:
            warm_matmul(soc, ops)
        if path == "single":
            c, cyc = matmul_sw(soc, ops, cores=1)
        elif path == "quad":
            c, cyc = matmul_sw(soc, ops, cores=len(soc.cores))
        else:
            c, cyc = matmul_nmce(soc, ops)
        if not np.array_equal(c, expected):
            raise SimulationFault(f"matmul_{size}/{path}",
                                  "result mismatch against reference")
        out.append(PathResult(path, soc, cyc, {"size": size,
                                               "warm": params["warm"]}))
    return out


def bench_memcpy(nbytes: int, base: SocConfig, params: dict,
                 rng: np.random.Generator) -> list[PathResult]:
    payload = rng.integers(0, 256, size=nbytes, dtype=np.int16).astype(
        np.uint8).tobytes()
    out = []
    for path in ("sw", "nmce"):
        soc = Soc(base)
        src = soc.alloc(nbytes)
        dst = soc.alloc(nbytes)
        soc.memsys.write_bytes(src, payload, "bench_memcpy")
        if path == "sw":
            cyc = memcpy_sw(soc, src, dst, nbytes)
        else:
            cyc = memcpy_nmce(soc, src, dst, nbytes)
        if soc.memsys.read_bytes(dst, nbytes) != payload:
            raise SimulationFault(f"memcpy/{path}", "copied bytes differ")
        out.append(PathResult(path, soc, cyc, {"bytes": nbytes}))
    return out


def bench_spmv(density: float, base: SocConfig, params: dict,
               rng: np.random.Generator) -> list[PathResult]:
    rows_n, cols_n = params["rows"], params["cols"]
    a = CsrMatrix.random(rows_n, cols_n, density, rng)
    x = _int8(rng, cols_n)
    expected = spmv(a, x)
    out = []
    for path in ("sw", "in_order", "reservation_station"):
        cfg = replace(base, sparse=replace(base.sparse, variant=path)) \
            if path != "sw" else base
        soc = Soc(cfg)
        blob = 192 + 4 * (rows_n + 1) + 5 * a.nnz
        image = store_csr(soc.memsys, a, soc.alloc(blob + 192))
        x_addr = soc.alloc(cols_n)
        y_addr = soc.alloc(4 * rows_n)
        soc.memsys.write_bytes(x_addr, x.tobytes(), "bench_spmv")
        if params["warm"]:
            soc.memsys.install_warm(image.row_ptr_addr, image.footprint())
            soc.memsys.install_warm(x_addr, cols_n)
            soc.memsys.install_warm(y_addr, 4 * rows_n)
        if path == "sw":
            y, cyc = spmv_sw(soc, image, x_addr, y_addr)
        else:
            y, end = soc.sparse.run(image, x_addr, y_addr, soc.cores[0].now)
            cyc = end - soc.cores[0].now
        if not np.array_equal(y, expected):
            raise SimulationFault(f"spmv/{path}", "result mismatch")
        out.append(PathResult(path, soc, cyc,
                              {"density": density, "rows": rows_n,
                               "cols": cols_n, "nnz": a.nnz,
                               "warm": params["warm"]}))
    return out


def bench_stride(base: SocConfig, params: dict,
                 rng: np.random.Generator) -> list[PathResult]:
    window = params["window_bytes"]
    out = []
    cycles = {}
    for path in ("off", "on"):
        soc = Soc(replace(base, prefetch_enabled=(path == "on")))
        addr = soc.alloc(window)
        cyc = stride_kernel(soc, addr, params["count"], params["stride_lines"],
                            params["work_cycles"], window)
        cycles[path] = cyc
        extra = dict(params)
        if path == "on":
            pf = soc.memsys.prefetchers[0]
            extra.update(learned_offset=pf.best_offset,
                         prefetch_active=pf.enabled,
                         improvement_pct=round(
                             100.0 * (cycles["off"] - cyc) / cycles["off"], 4))
        out.append(PathResult(path, soc, cyc, extra))
    return out


def bench_relu_infer(base: SocConfig, params: dict,
                     rng: np.random.Generator) -> list[PathResult]:
    mcfg = ReluMlpConfig(d_model=params["d_model"], d_ff=params["d_ff"],
                         layers=params["layers"], vocab=params["vocab"],
                         requant_shift=params["requant_shift"]).validate()
    weights_seed = int(rng.integers(2 ** 31))
    token = int(rng.integers(0, mcfg.vocab))
    out = []
    logits_ref = None
    for path in ("dense_fetch", "sparse_fetch"):
        soc = Soc(base)
        model = build_relu_mlp(soc, mcfg, np.random.default_rng(weights_seed))
        res = relu_infer(soc, model, token, sparse_fetch=(path == "sparse_fetch"))
        if logits_ref is None:
            logits_ref = res.logits
        elif not np.array_equal(res.logits, logits_ref):
            raise SimulationFault("relu_infer",
                                  "sparse fetch changed the logits")
        out.append(PathResult(path, soc, res.cycles, {
            "token": token,
            "activation_sparsity": round(res.activation_sparsity, 6),
            "down_proj_bytes": res.down_proj_bytes,
            "dense_down_proj_bytes": res.dense_down_proj_bytes,
            "fetch_ratio": round(
                res.down_proj_bytes / res.dense_down_proj_bytes, 6),
        }))
    return out


@dataclass
class BenchSpec:
    name: str
    index: int
    runner: object
    baseline: str
    paths: tuple
    defaults: dict


REGISTRY = [
    BenchSpec("matmul_8", 0, lambda b, p, r: bench_matmul(8, b, p, r),
              "single", ("single", "quad", "nmce"), {"warm": True}),
    BenchSpec("matmul_64", 1, lambda b, p, r: bench_matmul(64, b, p, r),
              "single", ("single", "quad", "nmce"), {"warm": True}),
    BenchSpec("matmul_256", 2, lambda b, p, r: bench_matmul(256, b, p, r),
              "single", ("single", "quad", "nmce"), {"warm": True}),
    BenchSpec("memcpy_4k", 3, lambda b, p, r: bench_memcpy(4096, b, p, r),
              "sw", ("sw", "nmce"), {}),
    BenchSpec("memcpy_1m", 4, lambda b, p, r: bench_memcpy(1 << 20, b, p, r),
              "sw", ("sw", "nmce"), {}),
    BenchSpec("spmv_d10", 5, lambda b, p, r: bench_spmv(0.10, b, p, r),
              "sw", ("sw", "in_order", "reservation_station"),
              {"rows": 256, "cols": 256, "warm": True}),
    BenchSpec("spmv_d50", 6, lambda b, p, r: bench_spmv(0.50, b, p, r),
              "sw", ("sw", "in_order", "reservation_station"),
              {"rows": 256, "cols": 256, "warm": True}),
    BenchSpec("stride", 7, bench_stride,
              "off", ("off", "on"),
              {"count": 16384, "stride_lines": 1, "work_cycles": 800,
               "window_bytes": 4 << 20}),
    BenchSpec("relu_infer", 8, bench_relu_infer,
              "dense_fetch", ("dense_fetch", "sparse_fetch"),
              {"d_model": 128, "d_ff": 512, "layers": 4, "vocab": 256,
               "requant_shift": 10}),
]

DEFAULT_SEED = 20260815

# the shipped default config enables the engines' streaming-fetch mode
DEFAULT_SOC = {"pipelined_nmce": True}


def run_suite(config: dict) -> dict:
    validate_config(config)
    seed = config.get("seed", DEFAULT_SEED)
    selected = config.get("benchmarks") or [s.name for s in REGISTRY]
    soc_data = config.get("soc", DEFAULT_SOC)
    rows = []
    resolved_params = {}
    for spec in REGISTRY:
        if spec.name not in selected:
            continue
        params = {**spec.defaults,
                  **config.get("params", {}).get(spec.name, {})}
        resolved_params[spec.name] = params
        rng = np.random.default_rng([seed, spec.index])
        base = build_soc_config(soc_data)
        try:
            results = spec.runner(base, params, rng)
        except SimulationFault as e:
            raise SimulationFault(f"{spec.name}:{e.device}",
                                  str(e).split(": ", 1)[-1]) from e
        by_path = {r.path: r for r in results}
        base_cycles = by_path[spec.baseline].cycles
        for r in results:
            stats = r.soc.stats
            stats.cycles = r.cycles
            stats.extra.update(r.extra)
            speedup = None
            if r.path != spec.baseline and r.cycles > 0:
                speedup = round(base_cycles / r.cycles, 6)
            rows.append(stats.to_row(spec.name, r.path, speedup))
    return {
        "schema_version": SCHEMA_VERSION,
        "seed": seed,
        "config": {
            "soc": dataclasses.asdict(build_soc_config(soc_data)),
            "benchmarks": [s.name for s in REGISTRY if s.name in selected],
            "params": resolved_params,
        },
        "rows": rows,
    }


# ----------------------------------------------------------------------
# report IO


def report_schema() -> dict:
    ref = resources.files("socsim").joinpath("report_schema.json")
    return json.loads(ref.read_text(encoding="utf-8"))


def validate_report(report: dict, source: str = "report"):
    import jsonschema
    try:
        jsonschema.validate(report, report_schema())
    except jsonschema.ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ValidationError(f"{source}: schema violation at {where}: "
                              f"{e.message}") from e


def write_report(report: dict, path: str):
    validate_report(report)
    blob = json.dumps(report, indent=2, sort_keys=True) + "\n"
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as f:
        f.write(blob)
    os.replace(tmp, path)


CSV_COLUMNS = ["benchmark", "path", "cycles", "int8_ops", "ops_per_kilocycle",
               "speedup_vs_baseline", "l2_to_nmce", "dram_reads",
               "dram_writes", "link_bytes", "prefetch_issued",
               "prefetch_useful", "prefetch_late", "prefetch_dropped"]


def write_csv(report: dict, path: str):
    tmp = path + ".tmp"
    with open(tmp, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(CSV_COLUMNS)
        for row in report["rows"]:
            speedup = row.get("speedup_vs_baseline")
            w.writerow([
                row["benchmark"], row["path"], row["cycles"], row["int8_ops"],
                row["ops_per_kilocycle"], "" if speedup is None else speedup,
                row["bytes"]["l2_to_nmce"], row["bytes"]["dram_reads"],
                row["bytes"]["dram_writes"], row["bytes"]["link_bytes"],
                row["prefetch"]["issued"], row["prefetch"]["useful"],
                row["prefetch"]["late"], row["prefetch"]["dropped"]])
    os.replace(tmp, path)


def load_report(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as f:
            report = json.load(f)
    except OSError as e:
        raise ValidationError(f"{path}: {e.strerror or e}") from e
    except json.JSONDecodeError as e:
        raise ValidationError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from e
    validate_report(report, source=path)
    return report


def compare_reports(a: dict, b: dict, tolerance_pct: float) -> list[str]:
    """Returns human-readable lines for rows whose cycle counts diverge by
    more than tolerance_pct.  Mismatched row sets are a hard error."""
    ka = {(r["benchmark"], r["path"]): r for r in a["rows"]}
    kb = {(r["benchmark"], r["path"]): r for r in b["rows"]}
    if ka.keys() != kb.keys():
        only_a = sorted(ka.keys() - kb.keys())
        only_b = sorted(kb.keys() - ka.keys())
        raise ValidationError(
            f"reports cover different rows (only in first: {only_a}, "
            f"only in second: {only_b})")
    bad = []
    for key in sorted(ka):
        ca, cb = ka[key]["cycles"], kb[key]["cycles"]
        if ca == cb == 0:
            continue
        if cb == 0 or ca == 0:
            bad.append(f"{key[0]}/{key[1]}: cycles {ca} vs {cb}")
            continue
        drift = abs(ca / cb - 1.0) * 100.0
        if drift > tolerance_pct:
            bad.append(f"{key[0]}/{key[1]}: cycles {ca} vs {cb} "
                       f"({drift:.2f}% > {tolerance_pct}%)")
    return bad


# ----------------------------------------------------------------------
# CLI


def _cmd_run(args) -> int:
    config = load_config(args.config) if args.config else {}
    if args.seed is not None:
        config["seed"] = args.seed
    if args.benchmarks:
        config["benchmarks"] = args.benchmarks.split(",")
    report = run_suite(config)
    write_report(report, args.out)
    if args.csv:
        write_csv(report, args.csv)
    for row in report["rows"]:
        sp = row.get("speedup_vs_baseline")
        sp_txt = f"  speedup {sp:8.3f}x" if sp is not None else ""
        print(f"{row['benchmark']:<12} {row['path']:<20} "
              f"{row['cycles']:>12} cycles{sp_txt}")
    print(f"report written to {args.out}")
    return 0


def _cmd_compare(args) -> int:
    a = load_report(args.report_a)
    b = load_report(args.report_b)
    bad = compare_reports(a, b, args.tolerance)
    if bad:
        for line in bad:
            print(line)
        return 1
    print(f"reports agree within {args.tolerance}% on {len(a['rows'])} rows")
    return 0


def _cmd_list(args) -> int:
    for spec in REGISTRY:
        print(f"{spec.name:<12} paths={','.join(spec.paths)} "
              f"baseline={spec.baseline} defaults={json.dumps(spec.defaults, sort_keys=True)}")
    return 0


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="socsim",
        description="Deterministic cycle-approximate SoC simulator and "
                    "benchmark suite")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the benchmark suite")
    run.add_argument("--config", help="JSON config file")
    run.add_argument("--out", default="report.json", help="report path")
    run.add_argument("--csv", help="also write a CSV summary")
    run.add_argument("--seed", type=int, help="override the config seed")
    run.add_argument("--benchmarks", help="comma-separated benchmark subset")
    run.set_defaults(fn=_cmd_run)

    cmp_ = sub.add_parser("compare", help="compare two reports")
    cmp_.add_argument("report_a")
    cmp_.add_argument("report_b")
    cmp_.add_argument("--tolerance", type=float, default=0.0,
                      help="allowed cycle drift in percent")
    cmp_.set_defaults(fn=_cmd_compare)

    ls = sub.add_parser("list-benchmarks", help="list available benchmarks")
    ls.set_defaults(fn=_cmd_list)
    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ValidationError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except SimulationFault as e:
        print(f"simulation fault: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
