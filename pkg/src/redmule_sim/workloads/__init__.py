"""Benchmark inputs and graph drivers for the simulator."""

from .graphs import (
    GraphInstance,
    Problem,
    apsp_solve,
    closure,
    datapath_engine,
    floyd_warshall,
    load_edge_list,
    max_capacity_solve,
    minimax_path,
    minimax_solve,
    oracle,
    parse_edge_list,
    random_graph,
    widest_path,
)
from .prng import XorShift64Star
from .synthetic import (
    Shape,
    gen_matrix,
    gen_operands,
    load_shapes,
    parse_dims,
    parse_shapes,
    resnet8_like_shapes,
)

__all__ = [
    "GraphInstance",
    "Problem",
    "Shape",
    "XorShift64Star",
    "apsp_solve",
    "closure",
    "datapath_engine",
    "floyd_warshall",
    "gen_matrix",
    "gen_operands",
    "load_edge_list",
    "load_shapes",
    "max_capacity_solve",
    "minimax_path",
    "minimax_solve",
    "oracle",
    "parse_dims",
    "parse_edge_list",
    "parse_shapes",
    "random_graph",
    "resnet8_like_shapes",
    "widest_path",
]
