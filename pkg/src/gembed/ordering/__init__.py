"""
Edge-bucket orderings, swap bounds and buffer simulation.
"""

from .generators import (
    ORDERINGS,
    elimination_order,
    hilbert_cells,
    hilbert_order,
    hilbert_symmetric_order,
    make_plan,
    random_order,
    sequential_order,
)
from .plan import (
    BufferStep,
    IOReport,
    OrderingPlan,
    SwapBound,
    elimination_swap_count,
    lower_bound_swaps,
    plan_trace_frame,
    simulate_io,
    swap_bound,
)
from .simulator import NextUseIndex, belady_trace, count_belady_swaps, min_swaps_bruteforce, plan_from_sequence

__all__ = [
    "ORDERINGS",
    "BufferStep",
    "IOReport",
    "NextUseIndex",
    "OrderingPlan",
    "SwapBound",
    "belady_trace",
    "count_belady_swaps",
    "elimination_order",
    "elimination_swap_count",
    "hilbert_cells",
    "hilbert_order",
    "hilbert_symmetric_order",
    "lower_bound_swaps",
    "make_plan",
    "min_swaps_bruteforce",
    "plan_from_sequence",
    "plan_trace_frame",
    "random_order",
    "sequential_order",
    "simulate_io",
    "swap_bound",
]
