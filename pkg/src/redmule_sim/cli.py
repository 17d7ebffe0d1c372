"""Command-line front end: ``redmule-sim {run,sweep,verify}``.

Exit codes: 0 success, 1 functional failure (``--check`` mismatch or a
failed verify property), 2 usage or configuration error, 3 the array
configuration cannot sustain the memory traffic (bandwidth infeasible).
"""

from __future__ import annotations

import argparse
import dataclasses
import itertools
import json
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Sequence

from .fparith import Fp8Format
from .report import DEFAULT_FREQ_MHZ, Workload, emit, evaluate, sweep
from .semiring import get_kernel
from .streamer import BandwidthError, MemoryModel, check_bandwidth
from .tiling import ArrayConfig, ConfigError, IOPrecision
from .verify import run_verify
from .workloads import Shape, load_shapes, parse_dims

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_BANDWIDTH = 3


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    """Everything ``run`` needs; JSON config files use these field names."""

    L: int = 12
    H: int = 4
    P: int = 3
    port_bits: int = 288
    io: str = "fp16"
    kernel: str = "matmul"
    dims: str | None = "96x96x96"
    shapes: str | None = None
    mem: str = "ideal"
    seed: int = 0
    distribution: str = "unit"
    fp8_format: str = "e4m3"
    out: str | None = None
    trace: str | None = None
    cycle_log: str | None = None
    check: bool = False
    freq_mhz: float = DEFAULT_FREQ_MHZ

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def array_config(self) -> ArrayConfig:
        try:
            io = IOPrecision(self.io)
        except ValueError:
            raise UsageError(f"--io must be fp16 or fp8, got {self.io!r}") from None
        try:
            return ArrayConfig(L=self.L, H=self.H, P=self.P, port_bits=self.port_bits,
                               io_precision=io)
        except ConfigError as exc:
            raise UsageError(f"invalid array configuration: {exc}") from None

    def shape_list(self) -> list[Shape]:
        try:
            if self.shapes:
                return load_shapes(self.shapes)
            if not self.dims:
                raise UsageError("either --dims or --shapes is required")
            return [Shape(*parse_dims(self.dims))]
        except (ValueError, OSError) as exc:
            raise UsageError(str(exc)) from None

    def memory(self) -> MemoryModel:
        return parse_mem(self.mem)

    def workload(self, shape: Shape) -> Workload:
        try:
            get_kernel(self.kernel)
            fmt = Fp8Format(self.fp8_format)
        except (KeyError, ValueError) as exc:
            raise UsageError(str(exc).strip("'\"")) from None
        return Workload(self.kernel, shape.M, shape.N, shape.K, self.seed,
                        self.distribution, fmt)


def parse_mem(text: str) -> MemoryModel:
    """``ideal``, ``lat:N`` or ``stalls:FILE`` (cycle numbers, one or more per line)."""
    kind, _, arg = text.partition(":")
    if kind == "ideal" and not arg:
        return MemoryModel.ideal()
    if kind == "lat":
        try:
            return MemoryModel.fixed_latency(int(arg))
        except ValueError:
            raise UsageError(f"bad latency in --mem {text!r}") from None
    if kind == "stalls" and arg:
        try:
            body = Path(arg).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read stall file: {exc}") from None
        cycles = []
        for line in body.splitlines():
            for tok in line.split("#", 1)[0].replace(",", " ").split():
                try:
                    cycles.append(int(tok))
                except ValueError:
                    raise UsageError(f"stall file {arg}: not a cycle number: {tok!r}") from None
        return MemoryModel.stall_pattern(cycles)
    raise UsageError(f"--mem must be ideal, lat:N or stalls:FILE, got {text!r}")


def _load_json(path: str, what: str) -> Any:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read {what} {path}: {exc}") from None


def resolve_run_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, then the JSON config file, then explicit flags."""
    values: dict[str, Any] = {}
    if args.config:
        doc = _load_json(args.config, "config file")
        if not isinstance(doc, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(doc) - set(RunConfig.field_names())
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        values.update(doc)
    for name in RunConfig.field_names():
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    if getattr(args, "shapes", None):
        values["dims"] = None
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise UsageError(str(exc)) from None


def _write(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_run(args: argparse.Namespace) -> int:
    rc = resolve_run_config(args)
    cfg = rc.array_config()
    mem = rc.memory()
    shapes = rc.shape_list()
    workloads = [rc.workload(s) for s in shapes]
    try:
        check_bandwidth(cfg)
    except BandwidthError as exc:
        print(f"error: bandwidth infeasible: {exc}", file=sys.stderr)
        return EXIT_BANDWIDTH

    reports, traces, logs = [], [], []
    for wl in workloads:
        rep, result = evaluate(cfg, wl, mem, check=rc.check,
                               record_cycles=bool(rc.cycle_log))
        reports.append(rep)
        traces.append(result.trace.to_csv())
        logs.append("".join(rec.line() + "\n" for rec in result.cycle_log))
        print(f"{wl.kernel} {wl.M}x{wl.N}x{wl.K} on {cfg.label()}: "
              f"{rep.total_cycles} cycles, utilization {rep.utilization:.4f}, "
              f"{rep.op_per_cycle:.2f} OP/cycle"
              + (f", check {rep.check}" if rep.check else ""), file=sys.stderr)

    _write(emit(reports if rc.shapes else reports[0], "json", rc.freq_mhz), rc.out)
    if rc.trace:
        Path(rc.trace).write_text("".join(
            t if i == 0 else t.split("\n", 1)[1] for i, t in enumerate(traces)))
    if rc.cycle_log:
        Path(rc.cycle_log).write_text("".join(logs))
    if any(r.check == "fail" for r in reports):
        print("error: engine output differs from the reference model", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


_SWEEP_AXES = ("L", "H", "P", "port_bits", "io")
_SWEEP_KEYS = set(_SWEEP_AXES) | {"kernel", "dims", "seed", "mem", "distribution",
                                  "fp8_format", "freq_mhz"}


def parse_sweep_spec(doc: Any) -> tuple[list[dict[str, Any]], RunConfig]:
    """Cross product of the listed L, H, P (and optionally port_bits, io)."""
    if not isinstance(doc, dict):
        raise UsageError("sweep spec must be a JSON object")
    unknown = set(doc) - _SWEEP_KEYS
    if unknown:
        raise UsageError(f"unknown sweep keys: {', '.join(sorted(unknown))}")
    base = RunConfig()
    axes: dict[str, list[Any]] = {}
    for key in _SWEEP_AXES:
        raw = doc.get(key, getattr(base, key))
        vals = raw if isinstance(raw, list) else [raw]
        if not vals:
            raise UsageError(f"sweep axis {key!r} is empty")
        want = str if key == "io" else int
        if not all(isinstance(v, want) and not isinstance(v, bool) for v in vals):
            raise UsageError(f"sweep axis {key!r} must hold {want.__name__} values")
        axes[key] = vals
    rest = {k: v for k, v in doc.items() if k not in _SWEEP_AXES}
    try:
        rc = dataclasses.replace(base, **rest)
    except TypeError as exc:
        raise UsageError(str(exc)) from None
    configs = [dict(zip(_SWEEP_AXES, combo)) for combo in itertools.product(*axes.values())]
    for c in configs:
        if c["io"] not in ("fp16", "fp8"):
            raise UsageError(f"io must be fp16 or fp8, got {c['io']!r}")
    return configs, rc


def cmd_sweep(args: argparse.Namespace) -> int:
    configs, rc = parse_sweep_spec(_load_json(args.spec, "sweep spec"))
    shapes = rc.shape_list()
    if len(shapes) != 1:
        raise UsageError("a sweep takes a single dims entry")
    reports = sweep(configs, rc.workload(shapes[0]), rc.memory(), threads=args.threads)
    _write(emit(reports, args.format, rc.freq_mhz), args.out)
    for r in reports:
        if not r.feasible:
            print(f"note: infeasible {r.config}: {r.error}", file=sys.stderr)
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    fault = args.inject_fault
    results = run_verify(quick=args.quick, fault_op=fault, seed=args.seed, echo=print)
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} properties passed")
    if failed:
        print("failing: " + ", ".join(failed))
        return EXIT_FAIL
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="redmule-sim",
        description="Cycle-level simulator of a GEMM-Op accelerator array.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one GEMM-Op and write a JSON report")
    p.add_argument("--config", help="JSON file with RunConfig fields (flags override it)")
    p.add_argument("--L", type=int, help="CE rows (default 12)")
    p.add_argument("--H", type=int, help="CEs per row (default 4)")
    p.add_argument("--P", type=int, help="pipeline registers per CE (default 3)")
    p.add_argument("--port-bits", dest="port_bits", type=int, help="memory port width (default 288)")
    p.add_argument("--io", choices=["fp16", "fp8"], help="I/O precision (default fp16)")
    p.add_argument("--kernel", help="kernel name or alias (default matmul)")
    p.add_argument("--dims", help="MxNxK (default 96x96x96)")
    p.add_argument("--shapes", help="shape-list file, one M,N,K per line")
    p.add_argument("--mem", help="ideal | lat:N | stalls:FILE")
    p.add_argument("--seed", type=int, help="operand seed (default 0)")
    p.add_argument("--distribution", choices=["unit", "int8"])
    p.add_argument("--fp8-format", dest="fp8_format", choices=[f.value for f in Fp8Format])
    p.add_argument("--freq-mhz", dest="freq_mhz", type=float, help="clock for the GFLOPS figure")
    p.add_argument("--check", action="store_const", const=True,
                   help="compare Z with the reference model; exit 1 on mismatch")
    p.add_argument("--trace", metavar="PATH", help="write the per-cycle access trace as CSV")
    p.add_argument("--cycle-log", dest="cycle_log", metavar="PATH",
                   help="write one text line per cycle (port activity, buffer occupancy)")
    p.add_argument("--out", metavar="PATH", help="JSON report path (default stdout)")
    p.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run one workload over a grid of array configs")
    s.add_argument("spec", help="path to a JSON sweep spec, e.g. {\"L\": [12], \"H\": [4, 8], \"P\": [3]}")
    s.add_argument("--format", choices=["csv", "json"], default="csv")
    s.add_argument("--threads", type=int, help="worker processes (REDMULE_SIM_THREADS wins)")
    s.add_argument("--out", metavar="PATH")
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify", help="run the built-in self-check suite")
    v.add_argument("--quick", action="store_true", help="reduced case counts")
    v.add_argument("--inject-fault", dest="inject_fault", type=int, nargs="?", const=7,
                   metavar="N", help="flip the rounding of the N-th CE op in every engine run")
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_verify)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
