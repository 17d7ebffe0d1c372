"""Graph problems mapped onto GEMM-Op kernels, with plain-Python oracles.

A graph is held as a dense binary16 weight matrix.  Each solver repeatedly
squares that matrix with one kernel (X = W = Y = current matrix), which
extends the admissible path length from 2**t to 2**(t+1) edges per
iteration, so ceil(log2(n-1)) iterations cover every simple path.

=================  ==========  ============  ==========  ===============
problem            kernel      diagonal      no edge     path value
=================  ==========  ============  ==========  ===============
APSP               (+, min)    0             +inf        sum of weights
MAX_CAPACITY       (min, max)  +inf          -inf        narrowest edge
MST_STYLE          (max, min)  -inf          +inf        widest edge
=================  ==========  ============  ==========  ===============

MST_STYLE computes minimax path values: for an undirected graph the entry
(u, v) equals the heaviest edge on the u-v path of a minimum spanning tree.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence, Union

from .. import fparith as fp
from ..datapath import run as run_engine
from ..matrix import MatrixBuf, Role
from ..semiring import SemiringKernel, gemm_op_reference, get_kernel
from ..tiling import ArrayConfig
from .prng import XorShift64Star

INF = math.inf
MAX_WEIGHT = 255
# binary16 represents every integer up to 2**11 exactly
EXACT_INT_LIMIT = 2048


class Problem(enum.Enum):
    APSP = "apsp"
    MAX_CAPACITY = "max_capacity"
    MST_STYLE = "mst_style"


_PROBLEM_SETUP = {
    # kernel, diagonal, absent-edge sentinel
    Problem.APSP: ("all_pairs_shortest_paths", 0.0, INF),
    Problem.MAX_CAPACITY: ("max_capacity_path", INF, -INF),
    Problem.MST_STYLE: ("min_spanning_tree", -INF, INF),
}


@dataclass
class GraphInstance:
    """Dense weight matrix ``weights[u][v]`` (float, sentinel for no edge)."""

    n: int
    weights: list[list[float]]
    problem: Problem

    def __post_init__(self) -> None:
        if self.n < 1 or len(self.weights) != self.n or any(len(r) != self.n for r in self.weights):
            raise ValueError("weights must be an n x n matrix with n >= 1")
        _, _, absent = _PROBLEM_SETUP[self.problem]
        for u, row in enumerate(self.weights):
            for v, w in enumerate(row):
                if u == v or w == absent:
                    continue
                if not (float(w).is_integer() and 0 <= w <= MAX_WEIGHT):
                    raise ValueError(f"edge ({u},{v}) weight {w} outside integers [0, {MAX_WEIGHT}]")

    @property
    def kernel(self) -> SemiringKernel:
        return get_kernel(_PROBLEM_SETUP[self.problem][0])

    @classmethod
    def from_edges(
        cls,
        n: int,
        edges: Iterable[tuple[int, int, float]],
        problem: Problem,
        directed: bool = False,
    ) -> "GraphInstance":
        """Build from (u, v, w) triples; parallel edges keep the best weight."""
        _, diag, absent = _PROBLEM_SETUP[problem]
        better = max if problem is Problem.MAX_CAPACITY else min
        weights = [[absent] * n for _ in range(n)]
        for u, v, w in edges:
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u},{v}) out of range for n={n}")
            pairs = [(u, v)] if directed else [(u, v), (v, u)]
            for a, b in pairs:
                cur = weights[a][b]
                weights[a][b] = float(w) if cur == absent else better(cur, float(w))
        for i in range(n):
            weights[i][i] = diag
        return cls(n, weights, problem)

    def to_matrix(self) -> MatrixBuf:
        return MatrixBuf.from_floats(Role.X, self.weights)


def parse_edge_list(
    lines: Iterable[str], problem: Problem, n: int | None = None, directed: bool = False
) -> GraphInstance:
    """Edge-list text, ``u v w`` per line (commas allowed, ``#`` comments).

    The node count is ``n`` if given, else one more than the largest index.
    """
    edges: list[tuple[int, int, float]] = []
    for lineno, line in enumerate(lines, 1):
        body = line.split("#", 1)[0].replace(",", " ").split()
        if not body:
            continue
        if len(body) != 3:
            raise ValueError(f"line {lineno}: expected 'u v w', got {line.strip()!r}")
        try:
            u, v, w = int(body[0]), int(body[1]), float(body[2])
        except ValueError:
            raise ValueError(f"line {lineno}: cannot parse {line.strip()!r}") from None
        edges.append((u, v, w))
    if n is None:
        n = 1 + max((max(u, v) for u, v, _ in edges), default=0)
    return GraphInstance.from_edges(n, edges, problem, directed)


def load_edge_list(path: str | Path, problem: Problem, n: int | None = None,
                   directed: bool = False) -> GraphInstance:
    with open(path) as fh:
        return parse_edge_list(fh, problem, n, directed)


def random_graph(
    seed: int, n: int, problem: Problem, density: float = 0.3, directed: bool = False
) -> GraphInstance:
    """Random instance with integer weights in [1, 255]."""
    rng = XorShift64Star(seed)
    edges = []
    for u in range(n):
        for v in range(n if directed else u + 1):
            if u != v and rng.random() < density:
                edges.append((u, v, float(rng.randint(1, MAX_WEIGHT))))
    return GraphInstance.from_edges(n, edges, problem, directed)


# -- engines ----------------------------------------------------------------

GemmOpFn = Callable[[SemiringKernel, MatrixBuf, MatrixBuf, MatrixBuf], MatrixBuf]
EngineSpec = Union[str, GemmOpFn, None]


def datapath_engine(cfg: ArrayConfig | None = None) -> GemmOpFn:
    cfg = cfg or ArrayConfig()

    def fn(kernel: SemiringKernel, x: MatrixBuf, w: MatrixBuf, y: MatrixBuf) -> MatrixBuf:
        return run_engine(cfg, kernel, x, w, y).z

    return fn


def resolve_engine(engine: EngineSpec) -> GemmOpFn:
    """``None``/"reference" -> golden model, "datapath" -> cycle engine."""
    if engine is None or engine == "reference":
        return gemm_op_reference
    if engine == "datapath":
        return datapath_engine()
    if callable(engine):
        return engine
    raise ValueError(f"unknown engine {engine!r}")


def squaring_iterations(n: int) -> int:
    return math.ceil(math.log2(n - 1)) if n > 2 else 0


def closure(g: GraphInstance, engine: EngineSpec = None,
            history: list[MatrixBuf] | None = None) -> MatrixBuf:
    """Repeated squaring of the weight matrix with the problem's kernel."""
    fn = resolve_engine(engine)
    kernel = g.kernel
    d = g.to_matrix()
    if history is not None:
        history.append(d)
    for _ in range(squaring_iterations(g.n)):
        x = MatrixBuf(Role.X, d.rows, d.cols, d.data)
        w = MatrixBuf(Role.W, d.rows, d.cols, d.data)
        y = MatrixBuf(Role.Y, d.rows, d.cols, d.data)
        d = fn(kernel, x, w, y)
        if history is not None:
            history.append(d)
    return d


def _to_floats(buf: MatrixBuf) -> list[list[float]]:
    vals = [fp.fp16_to_float(c) for c in buf.data]
    return [vals[r * buf.cols : (r + 1) * buf.cols] for r in range(buf.rows)]


def apsp_solve(g: GraphInstance, engine: EngineSpec = None) -> list[list[float]]:
    if g.problem is not Problem.APSP:
        raise ValueError("apsp_solve needs an APSP instance")
    return _to_floats(closure(g, engine))


def max_capacity_solve(g: GraphInstance, engine: EngineSpec = None) -> list[list[float]]:
    if g.problem is not Problem.MAX_CAPACITY:
        raise ValueError("max_capacity_solve needs a MAX_CAPACITY instance")
    return _to_floats(closure(g, engine))


def minimax_solve(g: GraphInstance, engine: EngineSpec = None) -> list[list[float]]:
    if g.problem is not Problem.MST_STYLE:
        raise ValueError("minimax_solve needs an MST_STYLE instance")
    return _to_floats(closure(g, engine))


# -- oracles ----------------------------------------------------------------

def floyd_warshall(weights: Sequence[Sequence[float]]) -> list[list[float]]:
    """Shortest distances with exact Python arithmetic."""
    n = len(weights)
    d = [list(map(float, row)) for row in weights]
    for i in range(n):
        d[i][i] = min(d[i][i], 0.0)
    for k in range(n):
        dk = d[k]
        for i in range(n):
            dik = d[i][k]
            if dik == INF:
                continue
            row = d[i]
            for j in range(n):
                alt = dik + dk[j]
                if alt < row[j]:
                    row[j] = alt
    return d


def widest_path(weights: Sequence[Sequence[float]]) -> list[list[float]]:
    """Maximum bottleneck capacity (Floyd-Warshall with min/max)."""
    n = len(weights)
    c = [list(map(float, row)) for row in weights]
    for k in range(n):
        ck = c[k]
        for i in range(n):
            cik = c[i][k]
            row = c[i]
            for j in range(n):
                alt = min(cik, ck[j])
                if alt > row[j]:
                    row[j] = alt
    return c


def minimax_path(weights: Sequence[Sequence[float]]) -> list[list[float]]:
    """Minimum over paths of the heaviest edge (Floyd-Warshall with max/min)."""
    n = len(weights)
    c = [list(map(float, row)) for row in weights]
    for k in range(n):
        ck = c[k]
        for i in range(n):
            cik = c[i][k]
            row = c[i]
            for j in range(n):
                alt = max(cik, ck[j])
                if alt < row[j]:
                    row[j] = alt
    return c


def oracle(g: GraphInstance) -> list[list[float]]:
    return {
        Problem.APSP: floyd_warshall,
        Problem.MAX_CAPACITY: widest_path,
        Problem.MST_STYLE: minimax_path,
    }[g.problem](g.weights)


def fp16_exact(matrix: Sequence[Sequence[float]]) -> bool:
    """Every finite entry is an integer binary16 holds exactly."""
    return all(abs(v) <= EXACT_INT_LIMIT for row in matrix for v in row if math.isfinite(v))
