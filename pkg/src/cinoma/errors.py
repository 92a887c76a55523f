"""Exception types raised by the optimizers and solvers."""


class InfeasibleError(RuntimeError):
    """The requested targets cannot be met (certified by the solver)."""


class SolverError(RuntimeError):
    """A convex subproblem did not reach the requested accuracy."""


class RandomizationError(RuntimeError):
    """Gaussian randomization found no feasible rank-one candidate."""
