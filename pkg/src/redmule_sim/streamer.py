"""Single-port memory streamer: beats, access schedule, handshake and stalls.

Time is measured two ways.  *Cycles* are wall-clock ticks of the port.
*Steps* are datapath compute cycles; the datapath executes one step per
cycle unless an operand it needs has not landed, in which case it freezes.

Every memory access is one *beat* carrying a full buffer line of
H*(P+1) elements.  Each beat has

- ``need``: the step that consumes it (loads), so step ``need`` cannot run
  until the beat has landed;
- ``release``: the number of completed steps required before the beat may
  move, i.e. when buffer space (loads) or result data (stores) exists.

:func:`issue_schedule` produces the port order under ideal memory using
earliest-need-first arbitration.  Under any other memory model the same
order is replayed in-order, so stalls shift beats in time but never reorder
them.  :func:`analytic_total_cycles` recomputes the replay's timing with a
max-plus recurrence instead of a cycle loop and serves as the stall oracle.
"""

from __future__ import annotations

import csv
import enum
import io
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Iterable

from .tiling import ArrayConfig, TilePlan

DEFAULT_FIFO_DEPTH = 2
# Cycles lost at each tile switch while the row feedback is re-armed to take
# the next Y tile; calibrated against the published 96x96x96 utilization.
DEFAULT_TILE_SWITCH = 1


class BandwidthError(RuntimeError):
    """The gaps between W reloads cannot carry the X/Y/Z traffic."""


class Kind(enum.Enum):
    LD_Y = "LD_Y"
    LD_X = "LD_X"
    LD_W = "LD_W"
    ST_Z = "ST_Z"

    @property
    def is_load(self) -> bool:
        return self is not Kind.ST_Z


# Tie-break for equal need: Y preload, then X, then W (matches the preload
# order), stores last.
_RANK = {Kind.LD_Y: 0, Kind.LD_X: 1, Kind.LD_W: 2, Kind.ST_Z: 3}


class MemMode(enum.Enum):
    IDEAL = "ideal"
    FIXED_LATENCY = "latency"
    STALL_PATTERN = "stalls"


@dataclass(frozen=True)
class MemoryModel:
    mode: MemMode = MemMode.IDEAL
    latency: int = 0
    stalls: frozenset[int] = frozenset()

    @classmethod
    def ideal(cls) -> "MemoryModel":
        return cls()

    @classmethod
    def fixed_latency(cls, n: int) -> "MemoryModel":
        if n < 0:
            raise ValueError("latency must be >= 0")
        return cls(MemMode.FIXED_LATENCY, latency=n)

    @classmethod
    def stall_pattern(cls, cycles: Iterable[int]) -> "MemoryModel":
        return cls(MemMode.STALL_PATTERN, stalls=frozenset(int(c) for c in cycles))

    def ready(self, cycle: int) -> bool:
        """Memory side of the handshake: can a beat move this cycle."""
        return cycle not in self.stalls

    def next_ready(self, cycle: int) -> int:
        while cycle in self.stalls:
            cycle += 1
        return cycle

    def describe(self) -> str:
        if self.mode is MemMode.FIXED_LATENCY:
            return f"lat:{self.latency}"
        if self.mode is MemMode.STALL_PATTERN:
            return f"stalls:{len(self.stalls)}"
        return "ideal"


@dataclass(frozen=True)
class StepClock:
    """Compute-step timing of the tile walk.

    Tile ``i`` starts at step ``i * period``; CE column ``h`` issues output
    column ``j`` of pass ``q`` at ``tile_start + q*S + h*(P+1) + j``.
    """

    cfg: ArrayConfig
    plan: TilePlan
    tile_switch: int = DEFAULT_TILE_SWITCH

    @property
    def width(self) -> int:
        return self.cfg.row_stages

    @property
    def tile_steps(self) -> int:
        return self.plan.passes_per_tile * self.width

    @property
    def period(self) -> int:
        return self.tile_steps + self.tile_switch

    def tile_start(self, i: int) -> int:
        return i * self.period

    @property
    def n_steps(self) -> int:
        # last tile's results pass the result register and fill the Z buffer
        return self.plan.n_tiles * self.period + self.width

    def z_ready(self, i: int) -> int:
        return self.tile_start(i + 1) + self.width

    def decode(self, step: int, h: int) -> tuple[int, int, int] | None:
        """(tile, pass, column) issued by CE column ``h`` at ``step``."""
        u = step - h * self.cfg.depth
        if u < 0:
            return None
        i, off = divmod(u, self.period)
        if i >= self.plan.n_tiles or off >= self.tile_steps:
            return None
        q, j = divmod(off, self.width)
        return i, q, j


@dataclass(frozen=True)
class Beat:
    kind: Kind
    seq: int
    tile: int
    row_block: int
    col_block: int
    # LD_W: (pass, ce_col); LD_X: (chunk, row); LD_Y/ST_Z: (row, 0)
    a: int
    b: int
    need: int
    release: int
    elems: int
    addr: int
    after: int | None = None  # seq of the ST_Z beat that must precede an LD_Y

    @property
    def key(self) -> tuple[Kind, int]:
        return self.kind, self.seq


def check_bandwidth(cfg: ArrayConfig) -> None:
    """Steady-state feasibility of the interleaved schedule.

    Within one X chunk (P+1 passes of H*(P+1) cycles) the port must carry L
    X beats in the cycles left free by the W reloads.
    """
    d = cfg.depth
    gaps = cfg.H * d * (d - 1)
    if gaps < cfg.L:
        raise BandwidthError(
            f"{cfg.label()}: W reloads every {d} cycle(s) leave {gaps} gap cycles per X chunk, "
            f"fewer than the {cfg.L} X beats required"
        )


@dataclass(frozen=True)
class MatrixBases:
    x: int
    w: int
    y: int
    z: int

    @classmethod
    def packed(cls, plan: TilePlan, elem_bytes: int) -> "MatrixBases":
        x = 0
        w = x + plan.M * plan.N * elem_bytes
        y = w + plan.N * plan.K * elem_bytes
        z = y + plan.M * plan.K * elem_bytes
        return cls(x, w, y, z)


def build_beats(
    clock: StepClock, fifo_depth: int = DEFAULT_FIFO_DEPTH
) -> dict[Kind, list[Beat]]:
    """All beats of a run, per stream, in stream order."""
    cfg, plan = clock.cfg, clock.plan
    S, D, L, H = cfg.row_stages, cfg.depth, cfg.L, cfg.H
    Q = plan.passes_per_tile
    eb = cfg.io_bits // 8
    bases = MatrixBases.packed(plan, eb)
    x_cap = 2 * L + fifo_depth
    streams: dict[Kind, list[Beat]] = {k: [] for k in Kind}
    x_last_use: list[int] = []
    w_need: list[int] = []

    for tile in plan.tiles():
        i, rb, cb = tile.index, tile.row_block, tile.col_block
        t0 = clock.tile_start(i)

        for r in range(L):
            m = tile.m0 + r
            ys = streams[Kind.LD_Y]
            if i == 0:
                release, after = 0, None
            elif i == 1:
                release, after = t0 - clock.period + S, None
            else:
                release, after = clock.z_ready(i - 2), (i - 2) * L + r
            ys.append(Beat(Kind.LD_Y, len(ys), i, rb, cb, r, 0, t0, release, S,
                           bases.y + (m * plan.K + tile.k0) * eb, after))

        for c in range(plan.x_chunks):
            q_last = min((c + 1) * D, Q) - 1
            last_use = t0 + q_last * S + (H - 1) * D
            for r in range(L):
                xs = streams[Kind.LD_X]
                b = len(xs)
                release = x_last_use[b - x_cap] + 1 if b >= x_cap else 0
                m = tile.m0 + r
                xs.append(Beat(Kind.LD_X, b, i, rb, cb, c, r, t0 + c * D * S, release, S,
                               bases.x + (m * plan.N + c * S) * eb))
                x_last_use.append(last_use)

        for q in range(Q):
            for h in range(H):
                ws = streams[Kind.LD_W]
                b = len(ws)
                need = t0 + q * S + h * D
                release = w_need[b - fifo_depth] + 1 if b >= fifo_depth else 0
                n = q * H + h
                ws.append(Beat(Kind.LD_W, b, i, rb, cb, q, h, need, release, S,
                               bases.w + (n * plan.K + tile.k0) * eb))
                w_need.append(need)

    for tile in plan.tiles():
        i = tile.index
        # the Z-buffer row is overwritten by the results of tile i+1 from
        # step tile_start(i+2) on, so the store must have left by then
        need = clock.tile_start(i + 2)
        for r in range(L):
            zs = streams[Kind.ST_Z]
            m = tile.m0 + r
            zs.append(Beat(Kind.ST_Z, len(zs), i, tile.row_block, tile.col_block, r, 0,
                           need, clock.z_ready(i), S,
                           bases.z + (m * plan.K + tile.k0) * eb))
    return streams


@dataclass
class Schedule:
    """Port order of every beat, with its cycle under ideal memory."""

    clock: StepClock
    fifo_depth: int
    streams: dict[Kind, list[Beat]]
    intents: list[Beat]
    ideal_cycles: list[int]
    ideal_step_cycles: list[int] = field(repr=False)

    @property
    def period(self) -> int:
        """Steady-state W reload period in cycles."""
        return self.clock.cfg.depth

    @property
    def gap_cycles(self) -> int:
        return self.clock.cfg.depth - 1

    @property
    def ideal_total_cycles(self) -> int:
        last_port = self.ideal_cycles[-1] if self.ideal_cycles else -1
        last_step = self.ideal_step_cycles[-1] if self.ideal_step_cycles else -1
        return max(last_port, last_step) + 1

    def count(self, kind: Kind) -> int:
        return len(self.streams[kind])


class PortState:
    """Runtime state of the port and the load streams for one run."""

    def __init__(
        self,
        streams: dict[Kind, list[Beat]],
        mem: MemoryModel,
        order: list[Beat] | None = None,
    ) -> None:
        self.streams = streams
        self.mem = mem
        self.order = order
        self.k = 0
        self.head = {kind: 0 for kind in Kind}
        # cycle from which each transferred beat counts as done, per stream
        self.arrival: dict[Kind, list[int]] = {k: [] for k in Kind}
        self.ready_ptr = {k: 0 for k in Kind}
        self.stored: set[int] = set()
        self.n_total = sum(len(v) for v in streams.values())
        self.n_done = 0

    @property
    def done(self) -> bool:
        return self.n_done == self.n_total

    def _eligible(self, beat: Beat, steps_done: int) -> bool:
        if steps_done < beat.release:
            return False
        return beat.after is None or beat.after in self.stored

    def next_intent(self, steps_done: int) -> Beat | None:
        """The beat the streamer asserts a request for this cycle, if any."""
        if self.order is not None:
            if self.k >= len(self.order):
                return None
            beat = self.order[self.k]
            return beat if self._eligible(beat, steps_done) else None
        best = None
        for kind in Kind:
            idx = self.head[kind]
            stream = self.streams[kind]
            if idx >= len(stream):
                continue
            beat = stream[idx]
            if not self._eligible(beat, steps_done):
                continue
            if best is None or (beat.need, _RANK[kind]) < (best.need, _RANK[best.kind]):
                best = beat
        return best

    def commit(self, beat: Beat, cycle: int) -> None:
        self.head[beat.kind] += 1
        self.k += 1
        self.n_done += 1
        if beat.kind.is_load:
            self.arrival[beat.kind].append(cycle + self.mem.latency)
        else:
            self.arrival[beat.kind].append(cycle)
            self.stored.add(beat.seq)

    def step_ready(self, step: int, cycle: int) -> bool:
        """True when every beat needed by ``step`` completed before ``cycle``.

        Loads must have landed; stores must have drained the Z-buffer row
        that ``step`` is about to overwrite.
        """
        for kind, arr in self.arrival.items():
            stream = self.streams[kind]
            p = self.ready_ptr[kind]
            while p < len(arr) and arr[p] <= cycle - 1:
                p += 1
            self.ready_ptr[kind] = p
            if p < len(stream) and stream[p].need <= step:
                return False
        return True


class Handshake(enum.Enum):
    TRANSFERRED = "transferred"
    STALLED = "stalled"  # request valid but memory not ready
    IDLE = "idle"  # nothing eligible to request


def handshake_step(port: PortState, cycle: int, steps_done: int) -> tuple[Handshake, Beat | None]:
    """Resolve the port for one cycle."""
    beat = port.next_intent(steps_done)
    if beat is None:
        return Handshake.IDLE, None
    if not port.mem.ready(cycle):
        return Handshake.STALLED, beat
    port.commit(beat, cycle)
    return Handshake.TRANSFERRED, beat


def issue_schedule(
    cfg: ArrayConfig,
    plan: TilePlan,
    fifo_depth: int = DEFAULT_FIFO_DEPTH,
    tile_switch: int = DEFAULT_TILE_SWITCH,
) -> Schedule:
    """Interleaved port order under ideal memory (earliest need first)."""
    check_bandwidth(cfg)
    if fifo_depth < 1:
        raise ValueError("fifo_depth must be >= 1")
    clock = StepClock(cfg, plan, tile_switch)
    streams = build_beats(clock, fifo_depth)
    port = PortState(streams, MemoryModel.ideal())
    intents: list[Beat] = []
    cycles: list[int] = []
    step_cycles: list[int] = []
    steps_done = 0
    cycle = 0
    n_steps = clock.n_steps
    limit = 64 * (n_steps + port.n_total) + 1024
    while steps_done < n_steps or not port.done:
        state, beat = handshake_step(port, cycle, steps_done)
        if state is Handshake.TRANSFERRED:
            intents.append(beat)
            cycles.append(cycle)
        if steps_done < n_steps and port.step_ready(steps_done, cycle):
            step_cycles.append(cycle)
            steps_done += 1
        cycle += 1
        if cycle > limit:
            raise RuntimeError("schedule did not converge")
    return Schedule(clock, fifo_depth, streams, intents, cycles, step_cycles)


def analytic_total_cycles(schedule: Schedule, mem: MemoryModel) -> int:
    """Total cycles of an in-order replay, by max-plus recurrence.

    A[k] = first ready cycle >= max(A[k-1] + 1, E[release_k - 1] + 1)
    E[s] = max(E[s-1] + 1, A[k] + lat_k + 1 for beats k needed at s)

    where lat_k is the memory latency for loads and 0 for stores.
    """
    intents = schedule.intents
    n_steps = schedule.clock.n_steps
    by_need: dict[int, list[int]] = {}
    for k, beat in enumerate(intents):
        by_need.setdefault(beat.need, []).append(k)
    A: list[int | None] = [None] * len(intents)
    E: list[int] = []

    def extend_steps(upto: int) -> None:
        while len(E) <= upto:
            s = len(E)
            t = E[-1] + 1 if E else 0
            for k in by_need.get(s, ()):
                if A[k] is None:
                    raise RuntimeError(f"step {s} depends on a beat not yet issued")
                lat = mem.latency if intents[k].kind.is_load else 0
                t = max(t, A[k] + lat + 1)
            E.append(t)

    prev = -1
    for k, beat in enumerate(intents):
        earliest = prev + 1
        if beat.release > 0:
            extend_steps(beat.release - 1)
            earliest = max(earliest, E[beat.release - 1] + 1)
        A[k] = mem.next_ready(earliest)
        prev = A[k]
    extend_steps(n_steps - 1)
    return max(prev, E[-1] if E else -1) + 1


@dataclass(frozen=True)
class AccessRecord:
    cycle: int
    kind: Kind
    elems: int
    addr: int
    tile: int
    row_block: int
    col_block: int


@dataclass
class AccessTrace:
    records: list[AccessRecord] = field(default_factory=list)

    def append(self, cycle: int, beat: Beat) -> None:
        self.records.append(AccessRecord(cycle, beat.kind, beat.elems, beat.addr,
                                         beat.tile, beat.row_block, beat.col_block))

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def cycles_of(self, kind: Kind) -> list[int]:
        return [r.cycle for r in self.records if r.kind is kind]

    def counts(self) -> dict[str, int]:
        out = {k.value: 0 for k in Kind}
        for r in self.records:
            out[r.kind.value] += 1
        return out

    def elements(self) -> dict[str, int]:
        out = {k.value: 0 for k in Kind}
        for r in self.records:
            out[r.kind.value] += r.elems
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["cycle", "kind", "elems", "addr", "tile", "row_block", "col_block"])
        for r in self.records:
            writer.writerow([r.cycle, r.kind.value, r.elems, r.addr, r.tile, r.row_block, r.col_block])
        return buf.getvalue()

    def find(self, cycle: int) -> AccessRecord | None:
        cyc = [r.cycle for r in self.records]
        i = bisect_left(cyc, cycle)
        if i < len(cyc) and cyc[i] == cycle:
            return self.records[i]
        return None
