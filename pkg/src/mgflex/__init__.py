"""Microgrid economic dispatch with a flexible tie-line trading range."""

__version__ = "0.1.0"

from .dispatch import DispatchError, DispatchSolution, Forecast, SystemState, mpc_step, solve_ed  # noqa: E402
from .flexband import (DataPackage, TargetProfile, TradingRange, make_data_package,  # noqa: E402
                       range_efficiency, solve_bound)
from .lp import LpProblem, LpSolution, LpStatus, solve_lp  # noqa: E402
from .milp import MilpProblem, MilpSolution, MilpStatus, solve_milp  # noqa: E402
from .model import AlphaParams, MicrogridConfig  # noqa: E402

__all__ = [
    "AlphaParams", "DataPackage", "DispatchError", "DispatchSolution", "Forecast", "LpProblem", "LpSolution",
    "LpStatus", "MicrogridConfig", "MilpProblem", "MilpSolution", "MilpStatus", "SystemState", "TargetProfile",
    "TradingRange", "make_data_package", "mpc_step", "range_efficiency", "solve_bound", "solve_ed", "solve_lp",
    "solve_milp",
]
