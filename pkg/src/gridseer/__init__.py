"""gridseer: power-grid simulation and learning toolkit.

Submodules
----------
grid       network data model, bundled 23-bus grid, grid JSON I/O
powerflow  Ybus assembly, Newton-Raphson power flow, congestion checks
faultsim   fault injection and labeled voltage-trace synthesis
nn         minimal neural-network engine (LSTM, dense, Adam) + linear SVM
weather    synthetic weather sampling and the solar production model
gridml     task-level models: fault type, faulted bus, solar power, congestion
dispatch   solar-subset scenarios, penalty model, surrogate, subset selection
cli        command-line entry point
"""

from .grid import (
    Bus, Branch, Generator, GridState,
    build_default_grid, load_grid, save_grid, grid_checksum, validate_grid,
)
from .powerflow import (
    AdmittanceMatrix, PowerFlowSolution, CongestionReport,
    build_ybus, solve_powerflow, check_congestion,
)
from .faultsim import (
    FAULT_KINDS, NO_FAULT, FaultDataset, FaultSpec, VoltageTrace,
    fault_voltages, gen_fault_dataset, symmetrical_components, synthesize_trace,
)
from .weather import WeatherSample
from .nn import ModelParams, load_model, save_model

__version__ = "0.1.0"
