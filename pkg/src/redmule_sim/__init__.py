"""Cycle-level simulator of a GEMM-Op accelerator array.

Submodules:

* ``fparith``: bit-exact binary16 / FP8 softfloat (FMA, min/max, casts)
* ``semiring``: the seven GEMM-Op kernels and their reference model
* ``tiling``: array configuration, tile plans, arithmetic-intensity model
* ``streamer``: memory port, beat schedule, memory models
* ``datapath``: the cycle-stepped engine (``run``)
* ``report``: JSON/CSV reports and config sweeps
* ``workloads``: seeded synthetic operands, shape lists and graph problems
"""

__version__ = "0.1.0"
