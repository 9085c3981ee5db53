# src/cli/targets.py
"""Published reference errors, keyed table:setting[:count] for --table-ref."""
from typing import Dict

from src.errors import ConfigurationError

# Relative L² test errors of the operator networks (fractions, 0.0207 == 2.07%).
TARGETS: Dict[str, float] = {
    # DeepONet, DM data, by kappa family and N_OBS
    "table1:linear:1000": 0.0207,
    "table1:linear:500": 0.0228,
    "table1:linear:100": 0.0303,
    "table1:exponential:100": 0.0229,
    "table1:piecewise:100": 0.0256,
    "table1:quadratic:100": 0.0258,
    "table1:mixed:100": 0.0267,
    # (N_PDE, N_OBS) on the torus
    "table2:dm:0:100": 0.0303,
    "table2:dm:0:25": 0.0472,
    "table2:dm:0:10": 0.2654,
    "table2:dm:100:25": 0.0287,
    "table2:dm:100:10": 0.0483,
    "table2:rbf:0:100": 0.0289,
    "table2:rbf:0:25": 0.0704,
    "table2:rbf:0:10": 0.2569,
    "table2:rbf:100:25": 0.0266,
    "table2:rbf:100:10": 0.0304,
    # semi-torus, GMLS
    "table3:gmls:0:25": 0.0042,
    "table3:gmls:0:10": 0.0057,
    "table3:gmls:0:2": 0.0617,
    "table3:gmls:100:25": 0.0039,
    "table3:gmls:100:10": 0.0048,
    "table3:gmls:100:2": 0.0230,
    # semilinear torus, DM
    "semilinear:dm:0:10": 0.0089,
    "semilinear:dm:0:2": 0.0133,
    "semilinear:dm:100:10": 0.0069,
    "semilinear:dm:100:2": 0.0071,
    # inversion: posterior-mean kappa error, forward map, grid, sigma
    "table4:local-kernel:20x20:0.01": 0.0710,
    "table4:local-kernel:20x20:0.05": 0.0601,
    "table4:local-kernel:20x20:0.1": 0.1118,
    "table4:local-kernel:50x50:0.01": 0.0556,
    "table4:surrogate:20x20:0.01": 0.0867,
    "table4:surrogate:20x20:0.05": 0.0718,
    "table4:surrogate:20x20:0.1": 0.1204,
    "table4:surrogate:50x50:0.01": 0.0724,
}


def lookup(reference: str) -> float:
    try:
        return TARGETS[reference.strip().lower()]
    except KeyError:
        raise ConfigurationError(f"unknown table reference '{reference}'")
