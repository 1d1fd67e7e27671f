"""Command-line driver.

    psido quantize|dno|poisson|green|norm --config run.json --out results/
    psido verify <theorem> [--tolerance T] [--out results/]

Configs are JSON objects; unknown keys are rejected.  Every numeric output
is a CSV file with a one-line header.  Exit codes: 0 success, 1 invalid
configuration, 2 numerical failure, 3 tolerance violation in ``verify``.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import inspect
import json
import math
import sys
from pathlib import Path

import numpy as np
import sympy as sp

from . import bvp, grid, halfspace, sobolev, suite, symbols
from .grid import GridFunction

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_TOLERANCE = 0, 1, 2, 3
COMMANDS = ("quantize", "dno", "poisson", "green", "norm", "verify")


class ConfigError(ValueError):
    pass


class NumericalError(RuntimeError):
    pass


@dataclasses.dataclass(frozen=True)
class RunConfig:
    command: str
    theorem: str | None = None
    N: tuple = (64, 128)
    L: tuple = (math.pi, 8.0)
    layout: tuple | None = None
    symbol: str | None = None
    order: float | None = None
    function: str | None = None
    input: str | None = None
    reference: str | None = None
    coefficients: dict = dataclasses.field(default_factory=dict)
    norm: dict = dataclasses.field(default_factory=dict)
    lambdas: tuple | None = None
    tolerance: float | None = None
    seed: int = 0
    output: str = "results"

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.command == "verify":
            if self.theorem not in suite.CHECKS:
                raise ConfigError(f"unknown theorem identifier {self.theorem!r}")
            if self.lambdas is not None:
                lam = list(self.lambdas)
                if len(lam) < 4 or any(v <= 0 for v in lam):
                    raise ConfigError("lambdas need at least four positive values")
        N, L = tuple(int(v) for v in self.N), tuple(float(v) for v in self.L)
        if len(N) != len(L) or not 1 <= len(N) <= 3:
            raise ConfigError("N and L must have the same length (1 to 3)")
        if any(n < 2 or n & (n - 1) for n in N) or any(v <= 0 for v in L):
            raise ConfigError("N must be powers of two and L positive")
        object.__setattr__(self, "N", N)
        object.__setattr__(self, "L", L)
        if self.layout is not None:
            object.__setattr__(self, "layout", tuple(self.layout))
            if len(self.layout) != len(N):
                raise ConfigError("layout length must match the grid dimension")
        if self.tolerance is not None and not np.isfinite(self.tolerance):
            raise ConfigError("tolerance must be finite")
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        needs = {"quantize": ("symbol",), "dno": (), "poisson": (), "green": (), "norm": ()}
        for key in needs.get(self.command, ()):
            if getattr(self, key) is None:
                raise ConfigError(f"{self.command} needs {key!r}")
        if self.command in ("quantize", "dno", "poisson", "green", "norm"):
            if (self.function is None) == (self.input is None):
                raise ConfigError("give exactly one of 'function' or 'input'")
        unknown = set(self.norm) - {f.name for f in dataclasses.fields(sobolev.SobolevSpec)}
        if unknown:
            raise ConfigError(f"unknown norm keys {sorted(unknown)}")
        unknown = set(self.coefficients) - {"c", "s_coef", "mass", "tangential_dim"}
        if unknown:
            raise ConfigError(f"unknown coefficient keys {sorted(unknown)}")
        layout = self.layout or symbols.DEFAULT_LAYOUTS[len(N)]
        if self.symbol is not None:
            symbols.parse_expression(self.symbol, layout)
        if self.function is not None:
            fl = layout[:-1] if self.command == "poisson" else layout
            expr = symbols.parse_expression(self.function, fl)
            if expr.free_symbols - set(symbols.Y[:len(fl)]):
                raise ConfigError("input functions may only use coordinates")

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def load_config(path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return data


# ---------------------------------------------------------------- helpers


def _layout(cfg: RunConfig, ndim: int) -> tuple:
    return cfg.layout or symbols.DEFAULT_LAYOUTS[ndim]


def sample_expression(text: str, layout, L, N, support=grid.FULL) -> GridFunction:
    """Sample a coordinate expression (same grammar as symbols)."""
    expr = symbols.parse_expression(text, layout)
    ndim = len(layout)
    if expr.free_symbols - set(symbols.Y[:ndim]):
        raise ConfigError("input functions may only use coordinates")
    fn = sp.lambdify(list(symbols.Y[:ndim]), expr, "numpy")
    return grid.from_function(lambda *c: np.broadcast_to(np.asarray(fn(*c), dtype=complex), c[0].shape),
                              L, N, support)


def _input(cfg: RunConfig, support=grid.FULL) -> GridFunction:
    if cfg.input is not None:
        try:
            return grid.load(cfg.input)
        except (OSError, grid.GridError) as exc:
            raise ConfigError(f"cannot load input grid: {exc}") from exc
    return sample_expression(cfg.function, _layout(cfg, len(cfg.N)), cfg.L, cfg.N, support)


def _operator_spec(cfg: RunConfig, tangential_dim: int) -> bvp.EllipticOperatorSpec:
    c = dict(cfg.coefficients)
    c.setdefault("tangential_dim", tangential_dim)
    c["c"] = tuple(tuple(row) for row in c.get("c", ()))
    return bvp.EllipticOperatorSpec(**c)


def _check_finite(f: GridFunction):
    if not np.all(np.isfinite(f.values)):
        raise NumericalError("non-finite output")


def write_csv(path: Path, rows: list) -> None:
    fields = []
    for row in rows:
        for key in row:
            if key not in fields:
                fields.append(key)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow(row)


def _fmt(v: float) -> str:
    return f"{v:.12g}"


# ---------------------------------------------------------------- commands


def _cmd_quantize(cfg, out: Path) -> int:
    f = _input(cfg)
    sym = symbols.from_string(cfg.symbol, f.ndim, cfg.order, _layout(cfg, f.ndim))
    u = halfspace.quantize(sym, f)
    _check_finite(u)
    grid.save(u, out / "quantize.psig")
    write_csv(out / "quantize.csv", [{"symbol": cfg.symbol, "order": _fmt(sym.order),
                                      "l2_in": _fmt(sobolev.sobolev_norm(f, 0)),
                                      "l2_out": _fmt(sobolev.sobolev_norm(u, 0))}])
    return EXIT_OK


def _cmd_dno(cfg, out: Path) -> int:
    g = _input(cfg)
    spec = _operator_spec(cfg, g.ndim)
    d = bvp.dno(spec, g)
    _check_finite(d)
    grid.save(d, out / "dno.psig")
    write_csv(out / "dno.csv", [{"l2_in": _fmt(sobolev.sobolev_norm(g, 0)),
                                 "l2_out": _fmt(sobolev.sobolev_norm(d, 0))}])
    return EXIT_OK


def _cmd_poisson(cfg, out: Path) -> int:
    g = _input(cfg) if cfg.input else sample_expression(cfg.function, _layout(cfg, len(cfg.N))[:-1],
                                                        cfg.L[:-1], cfg.N[:-1])
    spec = _operator_spec(cfg, g.ndim)
    u = bvp.poisson(spec, g, cfg.L[-1], cfg.N[-1])
    _check_finite(u)
    grid.save(u, out / "poisson.psig")
    trace = grid.restrict_boundary(u, -1)
    err = float(np.max(np.abs(trace.values - g.values)))
    write_csv(out / "poisson.csv", [{"trace_error": _fmt(err),
                                     "harmonicity_residual": _fmt(bvp.harmonicity_residual(spec, u))}])
    return EXIT_OK


def _cmd_green(cfg, out: Path) -> int:
    f = _input(cfg, grid.halfspaces(len(cfg.N) - 1))
    if f.support.kind != "half":
        f = f.with_values(f.values, grid.halfspaces(f.ndim - 1))
    spec = _operator_spec(cfg, f.ndim - 1)
    u = bvp.green(spec, f)
    _check_finite(u)
    grid.save(u, out / "green.psig")
    row = {"trace_norm": _fmt(sobolev.sobolev_norm(grid.restrict_boundary(u, -1), 0)),
           "w1_local": _fmt(sobolev.local_norm(u, 1))}
    if cfg.reference:
        try:
            ref = grid.load(cfg.reference)
        except (OSError, grid.GridError) as exc:
            raise ConfigError(f"cannot load reference grid: {exc}") from exc
        row["relative_w1_error"] = _fmt(sobolev.local_norm(u - ref, 1) / sobolev.local_norm(ref, 1))
    write_csv(out / "green.csv", [row])
    return EXIT_OK


def _cmd_norm(cfg, out: Path) -> int:
    f = _input(cfg)
    spec = sobolev.SobolevSpec(**{k: tuple(v) if isinstance(v, list) else v for k, v in cfg.norm.items()})
    value = spec.norm(f)
    if not np.isfinite(value):
        raise NumericalError("non-finite norm")
    write_csv(out / "norm.csv", [{"alpha": _fmt(spec.alpha), "s": spec.s, "k": spec.k,
                                  "region": spec.region, "norm": _fmt(value)}])
    return EXIT_OK


def _cmd_verify(cfg, out: Path) -> int:
    kwargs = {}
    if cfg.tolerance is not None:
        kwargs["tol"] = cfg.tolerance
    if cfg.theorem == "symbolcut":
        kwargs["seed"] = cfg.seed
    if cfg.lambdas is not None and "lambdas" in inspect.signature(suite.CHECKS[cfg.theorem]).parameters:
        kwargs["lambdas"] = tuple(cfg.lambdas)
    res = suite.run_check(cfg.theorem, **kwargs)
    if not np.isfinite(res.value):
        raise NumericalError("non-finite verification metric")
    write_csv(out / f"{cfg.theorem}.csv", res.rows)
    write_csv(out / f"{cfg.theorem}_summary.csv", [{
        "theorem": res.name, "metric": res.metric, "value": _fmt(res.value),
        "tolerance": _fmt(res.tolerance), "passed": int(res.passed)}])
    print(res.summary())
    return EXIT_OK if res.passed else EXIT_TOLERANCE


HANDLERS = {"quantize": _cmd_quantize, "dno": _cmd_dno, "poisson": _cmd_poisson, "green": _cmd_green,
            "norm": _cmd_norm, "verify": _cmd_verify}


def run(cfg: RunConfig, out_dir=None) -> int:
    out = Path(out_dir or cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    return HANDLERS[cfg.command](cfg, out)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="psido", description=__doc__.split("\n\n")[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("theorem", nargs="?", help="theorem identifier for verify")
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--out", help="output directory (default: config 'output' or ./results)")
    p.add_argument("--tolerance", type=float, help="override the check tolerance")
    p.add_argument("--seed", type=int, help="seed for random fixture data")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        data = load_config(args.config) if args.config else {}
        data["command"] = args.command
        if args.theorem is not None:
            data["theorem"] = args.theorem
        if args.tolerance is not None:
            data["tolerance"] = args.tolerance
        if args.seed is not None:
            data["seed"] = args.seed
        cfg = RunConfig.from_dict(data)
    except (ConfigError, grid.GridError, symbols.SymbolError, bvp.BVPError, sobolev.NormError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return run(cfg, args.out)
    except (ConfigError, grid.GridError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, FloatingPointError, ValueError, ZeroDivisionError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
