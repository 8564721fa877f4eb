"""Command-line front end.

Exit codes: 0 ok, 2 configuration error, 3 reference (oracle) failure,
4 convergence assertion failed, 5 a property check failed.
"""

from __future__ import annotations

import argparse
import csv
import sys
from contextlib import contextmanager
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from .analysis import (build_error_table, check_layer_bounds, check_sandwich,
                       compare_oracles, continuous_checks, convergence_check,
                       oracle_components, uniform_order)
from .exceptions import InvalidMeshError, InvalidProblemError, OracleError, QuadratureError
from .mesh import PRNG_NAME, load_mesh, make_mesh, require_valid
from .problem import (CATALOG, continuous_max_principle_check, continuous_stability_check,
                      get_problem)
from .scheme import (SCHEMES, check_discrete_max_principle, check_discrete_stability,
                     check_exp_difference, discrete_decompose, sigma_property_sweep, solve)

EXIT_OK, EXIT_CONFIG, EXIT_ORACLE, EXIT_ASSERT, EXIT_CHECK = 0, 2, 3, 4, 5


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    problem: str = "var_sine"
    scheme: str = "fitted"
    mesh: str = "uniform"
    spread: float = 0.5
    grading: float = 2.0
    c_mesh: float = 1.0
    mesh_file: Optional[str] = None
    eps: float = 2.0 ** -10
    eps_min_exp: int = -20
    eps_max_exp: int = 0
    n: int = 64
    n_min: int = 16
    n_max: int = 2048
    u0: Optional[float] = None
    seed: int = 0
    trials: int = 1000
    out: str = "-"
    assert_: bool = False
    cross_check: bool = True
    jobs: int = 1

    def validate(self):
        if self.problem not in CATALOG:
            raise ConfigError(f"unknown problem {self.problem!r}; known: {', '.join(CATALOG)}")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.mesh not in ("uniform", "random", "graded"):
            raise ConfigError(f"unknown mesh kind {self.mesh!r}")
        if self.eps_max_exp > 0 or self.eps_min_exp > self.eps_max_exp:
            raise ConfigError("need eps_min_exp <= eps_max_exp <= 0")
        if self.n_min < 1 or self.n_max < self.n_min:
            raise ConfigError("need 1 <= n_min <= n_max")
        if not 0.0 < self.eps <= 1.0:
            raise ConfigError(f"eps must lie in (0, 1], got {self.eps!r}")
        if self.n < 1:
            raise ConfigError("n must be positive")
        return self

    @property
    def eps_grid(self):
        return [2.0 ** e for e in range(self.eps_max_exp, self.eps_min_exp - 1, -1)]

    @property
    def n_grid(self):
        out, n = [], self.n_min
        while n <= self.n_max:
            out.append(n)
            n *= 2
        return out


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value file; flags override it")
    common.add_argument("--problem", help=f"one of: {', '.join(CATALOG)}")
    common.add_argument("--scheme", help="fitted | standard")
    common.add_argument("--mesh", help="uniform | random | graded")
    common.add_argument("--spread", type=float)
    common.add_argument("--grading", type=float)
    common.add_argument("--c-mesh", dest="c_mesh", type=float,
                        help="width-bound constant for --mesh-file meshes")
    common.add_argument("--mesh-file", dest="mesh_file", help="one node per line")
    common.add_argument("--eps", type=float, help="single eps for solve/decompose/verify")
    common.add_argument("--eps-min-exp", dest="eps_min_exp", type=int)
    common.add_argument("--eps-max-exp", dest="eps_max_exp", type=int)
    common.add_argument("--n", type=int, help="single N for solve/decompose/verify")
    common.add_argument("--n-min", dest="n_min", type=int)
    common.add_argument("--n-max", dest="n_max", type=int)
    common.add_argument("--u0", type=float)
    common.add_argument("--seed", type=int)
    common.add_argument("--trials", type=int)
    common.add_argument("--out")
    common.add_argument("--jobs", type=int)
    common.add_argument("--assert", dest="assert_", action="store_true", default=None)
    common.add_argument("--no-cross-check", dest="cross_check", action="store_false",
                        default=None)

    parser = argparse.ArgumentParser(prog="spfit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="nodal solution and error")
    sub.add_parser("converge", parents=[common], help="(eps, N) error table")
    sub.add_parser("decompose", parents=[common], help="smooth/singular components")
    sub.add_parser("verify", parents=[common], help="maximum principle, stability and bounds")
    return parser


_CASTS = {f.name: f.type for f in fields(RunConfig)}


def _read_config_file(path) -> dict:
    out = {}
    try:
        lines = open(path).read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path!r}: {exc}") from None
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        key = "assert_" if key == "assert" else key
        if key not in _CASTS or key == "command":
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def _coerce(key, value):
    kind = str(_CASTS[key])
    try:
        if "bool" in kind:
            return value if isinstance(value, bool) else value.lower() in ("1", "true", "yes", "on")
        if "int" in kind:
            return int(value)
        if "float" in kind:
            return float(value)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {value!r}") from None
    return value


def build_config(argv) -> RunConfig:
    args = vars(_parser().parse_args(argv))
    merged = {}
    if args.get("config"):
        merged.update(_read_config_file(args["config"]))
    merged.update({k: v for k, v in args.items() if v is not None and k != "config"})
    return RunConfig(**{k: _coerce(k, v) if k != "command" else v
                        for k, v in merged.items()}).validate()


@contextmanager
def _output(path):
    if path in (None, "-"):
        yield sys.stdout
        return
    try:
        fh = open(path, "w", newline="")
    except OSError as exc:
        raise ConfigError(f"cannot write {path!r}: {exc}") from None
    with fh:
        yield fh


def _num(x) -> str:
    return "" if x is None or (isinstance(x, float) and np.isnan(x)) else repr(float(x))


def _problem(cfg: RunConfig, eps: float):
    return get_problem(cfg.problem, eps, cfg.u0)


def _mesh(cfg: RunConfig, T: float):
    if cfg.mesh_file:
        try:
            m = load_mesh(cfg.mesh_file, cfg.c_mesh)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot load mesh file: {exc}") from None
        return require_valid(m, T)
    return make_mesh(cfg.mesh, cfg.n, T, seed=cfg.seed, spread=cfg.spread, grading=cfg.grading)


def cmd_solve(cfg: RunConfig) -> int:
    p = _problem(cfg, cfg.eps)
    m = _mesh(cfg, p.T)
    U = solve(p, m, cfg.scheme)
    u, _, _, _ = oracle_components(p, m.nodes)
    with _output(cfg.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "U", "u", "abs_error"])
        for t, Uj, uj in zip(m.nodes, U.values, u):
            w.writerow([_num(t), _num(Uj), _num(uj), _num(abs(Uj - uj))])
    return EXIT_OK


def cmd_decompose(cfg: RunConfig) -> int:
    p = _problem(cfg, cfg.eps)
    m = _mesh(cfg, p.T)
    U = solve(p, m, cfg.scheme)
    dec = discrete_decompose(p, m, cfg.scheme)
    _, v, w_exact, _ = oracle_components(p, m.nodes)
    with _output(cfg.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "U", "V", "W", "v", "w"])
        for row in zip(m.nodes, U.values, dec.smooth.values, dec.singular.values, v, w_exact):
            w.writerow([_num(x) for x in row])
    return EXIT_OK


def cmd_converge(cfg: RunConfig) -> int:
    p = _problem(cfg, 1.0)
    table = build_error_table(p, cfg.eps_grid, cfg.n_grid, cfg.mesh, cfg.scheme, cfg.seed,
                              spread=cfg.spread, grading=cfg.grading,
                              cross_check=cfg.cross_check, n_jobs=cfg.jobs)
    res = uniform_order(table)
    with _output(cfg.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["eps", "N", "mesh", "scheme", "seed", "error", "order", "c_hat"])
        for i, eps in enumerate(table.eps_grid):
            for k, n in enumerate(table.n_grid):
                w.writerow([_num(eps), int(n), cfg.mesh, cfg.scheme, cfg.seed,
                            _num(table.errors[i, k]), "", ""])
        for k, (n, E) in enumerate(zip(table.n_grid, table.uniform_errors)):
            order = res.orders[k] if k < len(res.orders) else None
            w.writerow(["uniform", int(n), cfg.mesh, cfg.scheme, cfg.seed, _num(E),
                        _num(order), _num(n * E)])
    if cfg.assert_:
        report = convergence_check(table)
        print(report.line(), file=sys.stderr)
        if not report.passed:
            return EXIT_ASSERT
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    p = _problem(cfg, cfg.eps)
    m = _mesh(cfg, p.T)
    print(f"# problem={p.name} eps={p.eps!r} mesh={m.kind} N={m.N} scheme={cfg.scheme} "
          f"seed={cfg.seed} prng={PRNG_NAME}")
    reports = [
        continuous_max_principle_check(p),
        continuous_stability_check(p),
        continuous_checks(p),
        check_discrete_max_principle(p, m, cfg.scheme, cfg.trials, cfg.seed),
        check_discrete_stability(solve(p, m, cfg.scheme)),
        sigma_property_sweep(seed=cfg.seed),
        check_exp_difference(seed=cfg.seed),
        check_layer_bounds(p),
        check_sandwich(p, m),
    ]
    failed = False
    for r in reports:
        print(r.line())
        failed |= not (r.passed or getattr(r, "skipped", False))
    if not p.has_constant_coefficients:
        agreement = compare_oracles(p)
        print(f"[{'PASS' if agreement.passed else 'FAIL'}] dual oracle "
              f"max_gap={agreement.max_gap:.3e} points={agreement.points}")
        failed |= not agreement.passed
    return EXIT_CHECK if failed else EXIT_OK


COMMANDS = {"solve": cmd_solve, "converge": cmd_converge, "decompose": cmd_decompose,
            "verify": cmd_verify}


def main(argv=None) -> int:
    try:
        cfg = build_config(argv)
        return COMMANDS[cfg.command](cfg)
    except (ConfigError, InvalidMeshError, InvalidProblemError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) else str(exc)
        print(f"spfit: configuration error: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    except (OracleError, QuadratureError) as exc:
        print(f"spfit: reference failure: {exc}", file=sys.stderr)
        return EXIT_ORACLE


if __name__ == "__main__":
    sys.exit(main())
