"""Frank-Wolfe solver over product feasible sets with certified lower bounds."""

from .fw import ConvexObjective, FWParams, SolveReport, fw_minimize
from .lmo import ChoiLmoResult, LmoError, LmoResult, lmo_choi, lmo_polytope, sample_feasible, solve_lmo
from .sets import (
    BoxPart,
    ChoiPart,
    Coupling,
    FeasibleSet,
    FixedPart,
    InfeasibleError,
    Point,
    PolytopePart,
    SimplexPart,
    combine,
    hs_inner,
)

__all__ = [
    "BoxPart", "ChoiLmoResult", "ChoiPart", "ConvexObjective", "Coupling",
    "FWParams", "FeasibleSet", "FixedPart", "InfeasibleError", "LmoError",
    "LmoResult", "Point", "PolytopePart", "SimplexPart", "SolveReport",
    "combine", "fw_minimize", "hs_inner", "lmo_choi", "lmo_polytope",
    "sample_feasible", "solve_lmo",
]
