"""Dense interior-point solver for the convex subproblems used by the optimizers."""

from .program import (INFEASIBLE, MAXITER, OPTIMAL, UNBOUNDED, ConicProgram,
                      SocConstraint, SolveResult, solve)
from .sdr import SdrProgram, SdrSolution, extract_rank1, solve_sdr

__all__ = [
    "ConicProgram", "SocConstraint", "SolveResult", "solve",
    "SdrProgram", "SdrSolution", "solve_sdr", "extract_rank1",
    "OPTIMAL", "INFEASIBLE", "UNBOUNDED", "MAXITER",
]
