"""Regenerate the shipped fixture grids and example configs."""

import json
from pathlib import Path

import numpy as np

from psido import grid, suite

ROOT = Path(__file__).resolve().parent.parent
FIX = ROOT / "fixtures"
CFG = ROOT / "configs"


def main():
    FIX.mkdir(exist_ok=True)
    CFG.mkdir(exist_ok=True)
    u, f = suite.manufactured_pair(k=2, N=256, N_x=64, L_rho=8.0)
    grid.save(u, FIX / "green_u.psig")
    grid.save(f, FIX / "green_f.psig")
    grid.save(grid.GridFunction(np.zeros((16, 16)), (np.pi, 4.0)), FIX / "zero.psig")
    configs = {
        "green_manufactured.json": {"input": "fixtures/green_f.psig", "reference": "fixtures/green_u.psig"},
        "norm_zero.json": {"input": "fixtures/zero.psig", "norm": {"alpha": 1.0}},
        "dno_cos.json": {"function": "cos(3*x)", "N": [256], "L": [np.pi]},
        "poisson_cos.json": {"function": "cos(2*x)", "N": [64, 256], "L": [np.pi, 8.0]},
        "quantize_resolvent.json": {"symbol": "1/(1+xi^2+eta^2)", "order": -2,
                                    "function": "cos(x)*cos(rho*pi/8)", "N": [32, 32], "L": [np.pi, 8.0]},
        "verify_poissest.json": {"theorem": "poissest"},
    }
    for name, data in configs.items():
        (CFG / name).write_text(json.dumps(data, indent=2) + "\n")


if __name__ == "__main__":
    main()
