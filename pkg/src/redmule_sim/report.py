"""Run reports: aggregation, JSON/CSV emission and configuration sweeps.

The JSON document of a single run is an object with the keys listed in
:data:`REPORT_FIELDS`, in that order (see ``docs/report_schema.md``).  A sweep
is emitted as a JSON array of such objects, or as CSV with one row per
config and the flat columns of :data:`CSV_FIELDS`.
"""

from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

from .datapath import RunResult, run
from .fparith import Fp8Format
from .semiring import gemm_op_reference, get_kernel
from .streamer import BandwidthError, MemoryModel, check_bandwidth
from .tiling import ArrayConfig, ConfigError, IOPrecision
from .workloads import gen_operands
from .workloads.prng import NAME as PRNG_NAME

DEFAULT_FREQ_MHZ = 613.0
SCHEMA_VERSION = 1
THREADS_ENV = "REDMULE_SIM_THREADS"

REPORT_FIELDS = (
    "schema_version", "feasible", "error", "config", "dims", "kernel", "memory",
    "workload", "total_cycles", "utilization", "op_per_cycle", "freq_mhz",
    "gflops", "check", "cycles", "activity", "trace",
)

CSV_FIELDS = (
    "L", "H", "P", "port_bits", "io", "row_stages", "M", "N", "K", "kernel",
    "memory", "feasible", "total_cycles", "utilization", "op_per_cycle",
    "gflops", "stall_cycles", "error",
)


@dataclass(frozen=True)
class Workload:
    """A synthetic GEMM-Op: kernel, dims and the seed of its operands."""

    kernel: str = "matmul"
    M: int = 96
    N: int = 96
    K: int = 96
    seed: int = 0
    distribution: str = "unit"
    fp8_format: Fp8Format = Fp8Format.E4M3

    def dims(self) -> tuple[int, int, int]:
        return self.M, self.N, self.K

    def operands(self, cfg: ArrayConfig):
        fmt = self.fp8_format if cfg.io_precision is IOPrecision.FP8_COMPRESSED else None
        return gen_operands(self.seed, self.M, self.N, self.K, self.distribution, fmt)


def config_echo(cfg: ArrayConfig) -> dict[str, Any]:
    return {
        "L": cfg.L,
        "H": cfg.H,
        "P": cfg.P,
        "port_bits": cfg.port_bits,
        "io": cfg.io_precision.value,
        "row_stages": cfg.row_stages,
        "n_ces": cfg.n_ces,
    }


@dataclass
class RunReport:
    config: dict[str, Any]
    dims: tuple[int, int, int]
    kernel: str
    memory: str = "ideal"
    workload: dict[str, Any] = field(default_factory=dict)
    feasible: bool = True
    error: str | None = None
    total_cycles: int = 0
    utilization: float = 0.0
    op_per_cycle: float = 0.0
    cycles: dict[str, int] = field(default_factory=dict)
    activity: dict[str, int] = field(default_factory=dict)
    trace: dict[str, Any] = field(default_factory=dict)
    check: str | None = None  # "pass" / "fail" when a reference check ran

    def gflops_at(self, freq_mhz: float) -> float:
        """Throughput at a given clock: OP/cycle x MHz x 1e-3."""
        return self.op_per_cycle * freq_mhz * 1e-3

    def to_dict(self, freq_mhz: float = DEFAULT_FREQ_MHZ) -> dict[str, Any]:
        M, N, K = self.dims
        d = {
            "schema_version": SCHEMA_VERSION,
            "feasible": self.feasible,
            "error": self.error,
            "config": dict(self.config),
            "dims": {"M": M, "N": N, "K": K},
            "kernel": self.kernel,
            "memory": self.memory,
            "workload": dict(self.workload),
            "total_cycles": self.total_cycles,
            "utilization": self.utilization,
            "op_per_cycle": self.op_per_cycle,
            "freq_mhz": freq_mhz,
            "gflops": self.gflops_at(freq_mhz),
            "check": self.check,
            "cycles": dict(self.cycles),
            "activity": dict(self.activity),
            "trace": dict(self.trace),
        }
        assert tuple(d) == REPORT_FIELDS
        return d

    def csv_row(self, freq_mhz: float = DEFAULT_FREQ_MHZ) -> dict[str, Any]:
        M, N, K = self.dims
        c = self.config
        return {
            "L": c.get("L"), "H": c.get("H"), "P": c.get("P"),
            "port_bits": c.get("port_bits"), "io": c.get("io"),
            "row_stages": c.get("row_stages"),
            "M": M, "N": N, "K": K, "kernel": self.kernel, "memory": self.memory,
            "feasible": int(self.feasible), "total_cycles": self.total_cycles,
            "utilization": repr(self.utilization), "op_per_cycle": repr(self.op_per_cycle),
            "gflops": repr(self.gflops_at(freq_mhz)),
            "stall_cycles": self.cycles.get("stall_cycles", 0),
            "error": self.error or "",
        }


def build_report(
    cfg: ArrayConfig,
    kernel: str,
    result: RunResult,
    mem: MemoryModel | None = None,
    workload: Mapping[str, Any] | None = None,
    check: bool | None = None,
) -> RunReport:
    st = result.stats
    plan = result.plan
    counts = result.trace.counts()
    return RunReport(
        config=config_echo(cfg),
        dims=(plan.M, plan.N, plan.K),
        kernel=get_kernel(kernel).name,
        memory=(mem or MemoryModel.ideal()).describe(),
        workload=dict(workload or {}),
        total_cycles=st.total_cycles,
        utilization=st.utilization,
        op_per_cycle=st.op_per_cycle,
        cycles={
            "compute_cycles": st.compute_cycles,
            "prologue_cycles": st.prologue_cycles,
            "epilogue_cycles": st.epilogue_cycles,
            "stall_cycles": st.stall_cycles,
            "mem_stall_cycles": st.mem_stall_cycles,
        },
        activity={
            "n_ces": st.n_ces,
            "ce_busy_cycles": st.ce_busy_cycles,
            "ce_issue_cycles": st.ce_issue_cycles,
            "fma_active_cycles": st.fma_active_cycles,
            "fncomp_active_cycles": st.fncomp_active_cycles,
            "stage2_active_cycles": st.stage2_active_cycles,
            "ops_total": st.ops_total,
        },
        trace={
            "accesses": len(result.trace),
            "port_occupancy": len(result.trace) / st.total_cycles if st.total_cycles else 0.0,
            "beats": counts,
            "elements": result.trace.elements(),
            "tiles": plan.n_tiles,
            "passes_per_tile": plan.passes_per_tile,
        },
        check=None if check is None else ("pass" if check else "fail"),
    )


def infeasible_report(
    config: Mapping[str, Any], workload: Workload, error: str, mem: MemoryModel | None = None
) -> RunReport:
    return RunReport(
        config=dict(config),
        dims=workload.dims(),
        kernel=get_kernel(workload.kernel).name,
        memory=(mem or MemoryModel.ideal()).describe(),
        workload=workload_echo(workload),
        feasible=False,
        error=error,
    )


def workload_echo(workload: Workload) -> dict[str, Any]:
    return {
        "seed": workload.seed,
        "prng": PRNG_NAME,
        "distribution": workload.distribution,
        "fp8_format": workload.fp8_format.value,
    }


def evaluate(
    cfg: ArrayConfig,
    workload: Workload,
    mem: MemoryModel | None = None,
    check: bool = False,
    record_cycles: bool = False,
) -> tuple[RunReport, RunResult | None]:
    """Simulate ``workload`` on ``cfg``; infeasible configs yield a flagged report."""
    try:
        check_bandwidth(cfg)
    except BandwidthError as exc:
        return infeasible_report(config_echo(cfg), workload, str(exc), mem), None
    kernel = get_kernel(workload.kernel)
    x, w, y = workload.operands(cfg)
    result = run(cfg, kernel, x, w, y, mem, record_cycles=record_cycles)
    ok = None
    if check:
        ref = gemm_op_reference(kernel, x, w, y)
        if result.z.fmt is not None:
            ref = ref.to_fp8(result.z.fmt)
        ok = ref.data == result.z.data
    return build_report(cfg, kernel.name, result, mem, workload_echo(workload), ok), result


def _config_from(spec: ArrayConfig | Mapping[str, Any]) -> ArrayConfig:
    if isinstance(spec, ArrayConfig):
        return spec
    kw = dict(spec)
    if "io" in kw:
        kw["io_precision"] = IOPrecision(kw.pop("io"))
    return ArrayConfig(**kw)


def _sweep_one(args) -> RunReport:
    spec, workload, mem = args
    try:
        cfg = _config_from(spec)
    except (ConfigError, TypeError, ValueError) as exc:
        return infeasible_report(dict(spec), workload, str(exc), mem)
    return evaluate(cfg, workload, mem)[0]


def _sort_key(rep: RunReport) -> tuple:
    c = rep.config
    return (c.get("L", 0), c.get("H", 0), c.get("P", 0), c.get("port_bits", 0), str(c.get("io", "")))


def thread_cap(default: int | None = None) -> int:
    """Worker count for sweeps: ``REDMULE_SIM_THREADS`` if set, else ``default``."""
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
        return max(1, n)
    return max(1, default if default is not None else (os.cpu_count() or 1))


def sweep(
    configs: Iterable[ArrayConfig | Mapping[str, Any]],
    workload: Workload,
    mem: MemoryModel | None = None,
    threads: int | None = None,
) -> list[RunReport]:
    """One report per config, sorted by (L, H, P).

    Configs that fail validation or bandwidth feasibility appear with
    ``feasible=False`` and the diagnostic in ``error``.
    """
    jobs = [(c, workload, mem) for c in configs]
    if not jobs:
        return []
    workers = min(thread_cap(threads), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_sweep_one, jobs))
    else:
        reports = [_sweep_one(j) for j in jobs]
    return sorted(reports, key=_sort_key)


def emit(
    report: RunReport | Sequence[RunReport],
    fmt: str = "json",
    freq_mhz: float = DEFAULT_FREQ_MHZ,
) -> str:
    """Serialize one report or a table of reports as JSON or CSV."""
    many = not isinstance(report, RunReport)
    reports: list[RunReport] = list(report) if many else [report]
    fmt = fmt.lower()
    if fmt == "json":
        payload = [r.to_dict(freq_mhz) for r in reports] if many else reports[0].to_dict(freq_mhz)
        return json.dumps(payload, indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
        writer.writeheader()
        for r in reports:
            writer.writerow(r.csv_row(freq_mhz))
        return buf.getvalue()
    raise ValueError(f"unknown format {fmt!r}; use json or csv")
