"""Mixed-binary linear programming layer: model builder, engines and LP export."""
from .model import INF, LinExpr, MilpModel, add_product_bin_cont
from .solvers import LpSolution, MilpSolution, Status, lp_dual_value, solve_lp, solve_milp
from .lpfile import export_lp_file, format_lp

__all__ = [
    "INF", "LinExpr", "MilpModel", "add_product_bin_cont", "LpSolution", "MilpSolution", "Status",
    "lp_dual_value", "solve_lp", "solve_milp", "export_lp_file", "format_lp",
]
