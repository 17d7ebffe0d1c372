"""Cycle-level CE array engine.

Each of the L rows holds H cascaded CEs.  A CE issues one operation per
step into a (P+1)-deep pipeline; its result is the accumulator input of the
next CE in the row exactly P+1 steps later, and the last CE of a row feeds
the first one back for the next pass.  Over one pass CE column ``h`` keeps a
latched X operand and receives one W element per step from its shift
register, so a pass produces H*(P+1) partial results per row.

The engine interleaves this with the streamer port cycle by cycle; the
datapath freezes whenever a beat it needs has not landed.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable

from . import fparith as fp
from .matrix import MatrixBuf, Role, check_dims
from .semiring import Group, SemiringKernel, ce_op
from .streamer import (
    DEFAULT_FIFO_DEPTH,
    DEFAULT_TILE_SWITCH,
    AccessTrace,
    Beat,
    Handshake,
    Kind,
    MemoryModel,
    PortState,
    Schedule,
    handshake_step,
    issue_schedule,
)
from .tiling import ArrayConfig, IOPrecision, TilePlan, plan_tiles


@dataclass
class CycleStats:
    total_cycles: int = 0
    compute_cycles: int = 0
    prologue_cycles: int = 0
    epilogue_cycles: int = 0
    stall_cycles: int = 0
    mem_stall_cycles: int = 0
    ce_busy_cycles: int = 0
    ce_issue_cycles: int = 0
    fma_active_cycles: int = 0
    fncomp_active_cycles: int = 0
    stage2_active_cycles: int = 0
    ops_total: int = 0
    n_ces: int = 1

    @property
    def utilization(self) -> float:
        if not self.total_cycles:
            return 0.0
        return self.ce_busy_cycles / (self.total_cycles * self.n_ces)

    @property
    def op_per_cycle(self) -> float:
        if not self.total_cycles:
            return 0.0
        return self.ops_total / self.total_cycles

    def as_dict(self) -> dict:
        d = asdict(self)
        d["utilization"] = self.utilization
        d["op_per_cycle"] = self.op_per_cycle
        return d


@dataclass
class CycleRecord:
    cycle: int
    port: str
    handshake: str
    steps_done: int
    w_fifo: int
    x_lines: int

    def line(self) -> str:
        return (
            f"{self.cycle:8d} {self.port:5s} {self.handshake:11s} step={self.steps_done} "
            f"w={self.w_fifo} x={self.x_lines}"
        )


@dataclass
class RunResult:
    z: MatrixBuf
    stats: CycleStats
    trace: AccessTrace
    plan: TilePlan
    schedule: Schedule
    cycle_log: list[CycleRecord] = field(default_factory=list, repr=False)


def _pad_rows(buf: MatrixBuf, rows: int, cols: int, fill: int) -> list[list[int]]:
    out = []
    for r in range(rows):
        if r < buf.rows:
            row = buf.row(r)[:cols]
            out.append(row + [fill] * (cols - len(row)))
        else:
            out.append([fill] * cols)
    return out


class Engine:
    """One simulation instance; drive it with :meth:`step` or :meth:`run`."""

    def __init__(
        self,
        cfg: ArrayConfig,
        kernel: SemiringKernel,
        x: MatrixBuf,
        w: MatrixBuf,
        y: MatrixBuf,
        mem: MemoryModel | None = None,
        *,
        fifo_depth: int = DEFAULT_FIFO_DEPTH,
        tile_switch: int = DEFAULT_TILE_SWITCH,
        z_fmt: fp.Fp8Format | None = None,
        record_cycles: bool = False,
        fault_op: int | None = None,
    ) -> None:
        M, N, K = check_dims(x, w, y)
        fp8 = cfg.io_precision is IOPrecision.FP8_COMPRESSED
        for buf in (x, w, y):
            if (buf.fmt is not None) != fp8:
                raise ValueError(
                    f"{buf.role.name} holds {'FP8' if buf.fmt else 'FP16'} codes but the "
                    f"array is configured for {cfg.io_precision.value} I/O"
                )
        self.cfg = cfg
        self.kernel = kernel
        self.mem = mem or MemoryModel.ideal()
        self.plan = plan_tiles(cfg, M, N, K)
        self.schedule = issue_schedule(cfg, self.plan, fifo_depth, tile_switch)
        self.clock = self.schedule.clock
        self.z_fmt = (z_fmt or x.fmt) if fp8 else None
        self.record_cycles = record_cycles
        self.fault_op = fault_op

        plan = self.plan
        S = cfg.row_stages
        # input cast unit: FP8 beats are widened as they enter the streamer
        x16, w16, y16 = x.to_fp16(), w.to_fp16(), y.to_fp16()
        self._xp = _pad_rows(x16, plan.M_pad, plan.x_chunks * S, kernel.pad_x)
        for r in range(M):
            self._xp[r][N:] = [kernel.pad_x] * (plan.x_chunks * S - N)
        self._wp = _pad_rows(w16, plan.N_pad, plan.K_pad, kernel.pad_w)
        self._yp = _pad_rows(y16, plan.M_pad, plan.K_pad, kernel.pad_y)
        self._zp = [[fp.POS_ZERO16] * plan.K_pad for _ in range(plan.M_pad)]

        self.port = PortState(self.schedule.streams, self.mem, order=self.schedule.intents)
        self.trace = AccessTrace()
        self.stats = CycleStats(n_ces=cfg.n_ces)
        self.cycle = 0
        self.steps_done = 0
        self.cycle_log: list[CycleRecord] = []
        self._first_step_cycle: int | None = None
        self._last_step_cycle: int | None = None
        self._last_port_cycle = -1
        self._op_counter = 0

        L, H, D = cfg.L, cfg.H, cfg.depth
        self._op: Callable[[int, int, int], int] = ce_op(kernel)
        self._pipe = [[[fp.POS_ZERO16] * L for _ in range(D)] for _ in range(H)]
        self._xreg: list[list[int]] = [[fp.POS_ZERO16] * L for _ in range(H)]
        self._wreg: list[list[int]] = [[fp.POS_ZERO16] * S for _ in range(H)]
        self._wfifo: dict[tuple[int, int, int], list[int]] = {}
        self._xbuf: dict[tuple[int, int], list[list[int] | None]] = {}
        self._zbuf: list[list[int]] = [[fp.POS_ZERO16] * S for _ in range(L)]
        self._pending: dict[int, list[tuple[int, int, list[int]]]] = {}
        self._tiles = list(plan.tiles())
        self._arrivals: dict[int, list[Beat]] = {}

    @property
    def done(self) -> bool:
        return self.steps_done >= self.clock.n_steps and self.port.done and not self._arrivals

    # -- port side -------------------------------------------------------

    def _land(self, beat: Beat) -> None:
        S = self.cfg.row_stages
        tile = self._tiles[beat.tile]
        if beat.kind is Kind.LD_W:
            q, h = beat.a, beat.b
            n = q * self.cfg.H + h
            self._wfifo[(beat.tile, q, h)] = self._wp[n][tile.k0 : tile.k0 + S]
        elif beat.kind is Kind.LD_X:
            c, r = beat.a, beat.b
            rows = self._xbuf.setdefault((beat.tile, c), [None] * self.cfg.L)
            rows[r] = self._xp[tile.m0 + r][c * S : (c + 1) * S]
        elif beat.kind is Kind.LD_Y:
            r = beat.a
            self._zbuf[r] = self._yp[tile.m0 + r][tile.k0 : tile.k0 + S]

    def _store(self, beat: Beat) -> None:
        S = self.cfg.row_stages
        tile = self._tiles[beat.tile]
        r = beat.a
        self._zp[tile.m0 + r][tile.k0 : tile.k0 + S] = list(self._zbuf[r])

    # -- datapath side ---------------------------------------------------

    def _execute_step(self, s: int) -> None:
        cfg, clock, plan, kernel = self.cfg, self.clock, self.plan, self.kernel
        L, H, D = cfg.L, cfg.H, cfg.depth
        Q = plan.passes_per_tile
        slot = s % D
        op = self._op
        stats = self.stats

        emerging = self._pipe[H - 1][slot]
        last = clock.decode(s - D, H - 1)
        if last is not None and last[1] == Q - 1:
            self._pending.setdefault(s + clock.tile_switch, []).append(
                (last[0], last[2], emerging)
            )

        for h in range(H - 1, -1, -1):
            dec = clock.decode(s, h)
            if dec is None:
                continue
            i, q, j = dec
            tile = self._tiles[i]
            if j == 0:
                c = q // D
                xrows = self._xbuf[(i, c)]
                col = q * H + h - c * cfg.row_stages
                self._xreg[h] = [row[col] for row in xrows]
                self._wreg[h] = self._wfifo.pop((i, q, h))
                if h == H - 1 and (q == Q - 1 or q % D == D - 1):
                    del self._xbuf[(i, c)]
            wv = self._wreg[h][j]
            if h == 0:
                accs = [row[j] for row in self._zbuf] if q == 0 else emerging
            else:
                accs = self._pipe[h - 1][slot]
            out = [op(xv, wv, a) for xv, a in zip(self._xreg[h], accs)]
            if self.fault_op is not None:
                out = self._maybe_fault(out)
            self._pipe[h][slot] = out

            stats.ce_issue_cycles += L
            if kernel.uses_fma:
                stats.fma_active_cycles += L
            else:
                stats.fncomp_active_cycles += L
            if kernel.group is not Group.MATMUL:
                stats.stage2_active_cycles += L
            if j < tile.cols_valid and q * H + h < plan.N:
                stats.ce_busy_cycles += tile.rows_valid
                stats.ops_total += 2 * tile.rows_valid

        for i, j, vals in self._pending.pop(s, ()):
            for r in range(L):
                self._zbuf[r][j] = vals[r]

    def _maybe_fault(self, out: list[int]) -> list[int]:
        start = self._op_counter
        self._op_counter += len(out)
        k = self.fault_op - start
        if 0 <= k < len(out):
            out = list(out)
            out[k] ^= 1
        return out

    # -- cycle loop ------------------------------------------------------

    def step(self) -> None:
        """Advance exactly one cycle."""
        t = self.cycle
        state, beat = handshake_step(self.port, t, self.steps_done)
        if state is Handshake.TRANSFERRED:
            self.trace.append(t, beat)
            self._last_port_cycle = t
            if beat.kind.is_load:
                self._arrivals.setdefault(t + self.mem.latency, []).append(beat)
            else:
                self._store(beat)
        elif state is Handshake.STALLED:
            self.stats.mem_stall_cycles += 1
        for landed in self._arrivals.pop(t, ()):
            self._land(landed)

        n_steps = self.clock.n_steps
        if self.steps_done < n_steps:
            if self.port.step_ready(self.steps_done, t):
                self._execute_step(self.steps_done)
                self.steps_done += 1
                if self._first_step_cycle is None:
                    self._first_step_cycle = t
                self._last_step_cycle = t
            elif self._first_step_cycle is not None:
                self.stats.stall_cycles += 1

        if self.record_cycles:
            self.cycle_log.append(CycleRecord(
                t,
                beat.kind.value if state is Handshake.TRANSFERRED else "-",
                state.value,
                self.steps_done,
                len(self._wfifo),
                sum(1 for rows in self._xbuf.values() for r in rows if r is not None),
            ))
        self.cycle += 1

    def run(self) -> RunResult:
        limit = 64 * (self.clock.n_steps + self.port.n_total) + 4096 + 4 * len(self.mem.stalls)
        while not self.done:
            self.step()
            if self.cycle > limit:
                raise RuntimeError("engine did not finish; schedule deadlock")
        return self.result()

    def result(self) -> RunResult:
        plan = self.plan
        st = self.stats
        st.compute_cycles = self.steps_done
        last = max(self._last_port_cycle, self._last_step_cycle or -1)
        st.total_cycles = last + 1
        st.prologue_cycles = self._first_step_cycle or 0
        st.epilogue_cycles = st.total_cycles - ((self._last_step_cycle or -1) + 1)
        data: list[int] = []
        for r in range(plan.M):
            data.extend(self._zp[r][: plan.K])
        z = MatrixBuf(Role.Z, plan.M, plan.K, data)
        if self.z_fmt is not None:
            # output cast unit on the store path
            z = z.to_fp8(self.z_fmt)
        return RunResult(z, st, self.trace, plan, self.schedule, self.cycle_log)


def run(
    cfg: ArrayConfig,
    kernel: SemiringKernel,
    x: MatrixBuf,
    w: MatrixBuf,
    y: MatrixBuf,
    mem: MemoryModel | None = None,
    **kwargs,
) -> RunResult:
    """Simulate one GEMM-Op to completion."""
    return Engine(cfg, kernel, x, w, y, mem, **kwargs).run()
