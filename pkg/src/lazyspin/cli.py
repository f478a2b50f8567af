"""Command-line front end.

Configuration comes from ``key=value`` tokens (in a file given with
``--config``, separated by spaces or newlines, ``#`` starting a comment) and
from flags, which override file values. Subcommands:

    sample        lazy perfect samples of a window, as text grids
    marginal      exact per-vertex marginals of a window region
    probe-wsm     exact boundary-influence decay table
    check-oracle  transfer sweep vs brute force on random instances
    stats         recursion statistics over repeated runs

Exit codes: 0 success, 1 oracle mismatch, 2 configuration error,
3 budget abort, 4 cap exceeded.
"""

from __future__ import annotations

import argparse
import io
import sys
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from .errors import BudgetExhausted, CapExceeded, InfeasibleError
from .geometry import Box, graph_boundary
from .inference import (
    DEFAULT_MAX_FRONTIER,
    DEFAULT_MAX_STATES,
    InferenceProblem,
    marginal_brute,
    marginal_transfer,
)
from .lazy import DEFAULT_BUDGET, DEFAULT_MAX_FILLINGS, STRATEGIES, LazySampler
from .models import ising, potts, random_oracle_instances, wsm_probe
from .rng import MAX_SEED

SUBCOMMANDS = ("sample", "marginal", "probe-wsm", "check-oracle", "stats")
EXIT_OK, EXIT_MISMATCH, EXIT_CONFIG, EXIT_BUDGET, EXIT_CAP = 0, 1, 2, 3, 4
ORACLE_TOL = 1e-10


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    model: Optional[str] = None
    q: int = 2
    beta: float = 0.0
    h: float = 1.0
    L: Optional[int] = None
    strategy: str = "exact-min"
    window: Optional[tuple] = None
    seed: int = 0
    samples: int = 1
    budget: int = DEFAULT_BUDGET
    ells: tuple = (2, 3, 4, 5)
    boundary: str = "free"
    method: str = "transfer"
    instances: int = 200
    max_states: int = DEFAULT_MAX_STATES
    max_frontier: int = DEFAULT_MAX_FRONTIER
    max_fillings: int = DEFAULT_MAX_FILLINGS
    out: Optional[str] = None

    def system(self):
        if self.model == "potts":
            return potts(self.q, self.beta)
        return ising(self.beta, self.h)

    def box(self) -> Box:
        return Box(*self.window)

    def describe(self) -> str:
        """Resolved configuration as one line of ``key=value`` tokens."""
        parts = []
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "out":
                continue
            if isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            parts.append(f"{f.name}={v}")
        return " ".join(parts)


def _int_list(text: str) -> tuple:
    return tuple(int(t) for t in text.split(",") if t.strip())


def _window(text: str) -> tuple:
    vals = _int_list(text)
    if len(vals) != 4:
        raise ValueError("window needs four integers x0,y0,x1,y1")
    x0, y0, x1, y1 = vals
    if x1 < x0 or y1 < y0:
        raise ValueError("window is empty")
    return vals


def _int(text: str) -> int:
    return int(str(text).replace("_", ""))


_PARSERS = {
    "model": str,
    "q": _int,
    "beta": float,
    "h": float,
    "L": _int,
    "strategy": str,
    "window": _window,
    "seed": _int,
    "samples": _int,
    "budget": _int,
    "ells": _int_list,
    "boundary": str,
    "method": str,
    "instances": _int,
    "max_states": _int,
    "max_frontier": _int,
    "max_fillings": _int,
    "out": str,
}


def _tokens(text: str) -> dict:
    values = {}
    for line in text.splitlines():
        line = line.split("#", 1)[0]
        for tok in line.split():
            if "=" not in tok:
                raise ConfigError(f"expected key=value, got {tok!r}")
            key, val = tok.split("=", 1)
            values[key.strip()] = val.strip()
    return values


def parse_config(text: str = "", overrides: Optional[dict] = None) -> RunConfig:
    """Build a validated :class:`RunConfig` from file text plus flag overrides.

    Raises:
        ConfigError: unknown keys, malformed values or an incompatible
            strategy and model.
    """
    raw = _tokens(text or "")
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    unknown = sorted(set(raw) - set(_PARSERS))
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
    values = {}
    for key, val in raw.items():
        try:
            values[key] = val if not isinstance(val, str) else _PARSERS[key](val)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {val!r} ({exc})") from None
    cfg = RunConfig(**values)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.model is not None and cfg.model not in ("potts", "ising"):
        raise ConfigError(f"model must be potts or ising, got {cfg.model!r}")
    if cfg.strategy not in STRATEGIES:
        raise ConfigError(f"strategy must be one of {', '.join(STRATEGIES)}")
    if cfg.model is not None:
        try:
            system = cfg.system()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if cfg.strategy == "monotone" and not system.monotone_eligible:
            raise ConfigError("strategy monotone requires a monotone-eligible model")
    if cfg.L is not None and cfg.L < 2:
        raise ConfigError("L must be at least 2")
    if not 0 <= cfg.seed <= MAX_SEED:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    if cfg.samples < 1 or cfg.budget < 1 or cfg.instances < 1:
        raise ConfigError("samples, budget and instances must be positive")
    if cfg.method not in ("transfer", "brute"):
        raise ConfigError("method must be transfer or brute")
    if cfg.boundary != "free":
        try:
            spin = int(cfg.boundary)
        except ValueError:
            raise ConfigError("boundary must be 'free' or a spin index") from None
        if not 1 <= spin <= (cfg.q if cfg.model == "potts" else 2):
            raise ConfigError(f"boundary spin {spin} out of range")


_REQUIRED = {
    "sample": ("model", "L", "window"),
    "marginal": ("model", "window"),
    "probe-wsm": ("model",),
    "check-oracle": (),
    "stats": ("model", "L", "window"),
}


def _require(cfg: RunConfig, subcommand: str) -> None:
    missing = [k for k in _REQUIRED[subcommand] if getattr(cfg, k) is None]
    if missing:
        raise ConfigError(f"{subcommand} needs: {', '.join(missing)}")


def _header(cfg: RunConfig, subcommand: str) -> str:
    return f"# lazyspin {subcommand}\n# config: {cfg.describe()}\n"


def _grid_block(config: dict, box: Box) -> str:
    lines = []
    for y in range(box.y1, box.y0 - 1, -1):
        lines.append(" ".join(str(config[(x, y)]) for x in range(box.x0, box.x1 + 1)))
    return "\n".join(lines) + "\n"


def _sampler(cfg: RunConfig) -> LazySampler:
    return LazySampler(
        cfg.system(),
        cfg.L,
        cfg.strategy,
        budget=cfg.budget,
        max_fillings=cfg.max_fillings,
        max_frontier=cfg.max_frontier,
    )


def _run_sample(cfg: RunConfig, out: io.StringIO) -> int:
    sampler = _sampler(cfg)
    box = cfg.box()
    out.write(_header(cfg, "sample"))
    for k in range(cfg.samples):
        config, trace = sampler.sample_window(box, cfg.seed, index=k)
        if k:
            out.write("\n")
        out.write(
            f"# seed={cfg.seed} sample={k} calls={trace.total_calls} max_depth={trace.max_depth}\n"
        )
        out.write(_grid_block(config, box))
    return EXIT_OK


def _run_marginal(cfg: RunConfig, out: io.StringIO) -> int:
    system = cfg.system()
    box = cfg.box()
    if cfg.boundary == "free":
        context, free_boundary = {}, True
    else:
        context = {v: int(cfg.boundary) for v in graph_boundary(box)}
        free_boundary = False
    out.write(_header(cfg, "marginal"))
    out.write("x,y," + ",".join(f"p{i}" for i in range(1, system.q + 1)) + "\n")
    for v in box:
        problem = InferenceProblem(system, set(box), context, (v,), free_boundary)
        if cfg.method == "brute":
            p = marginal_brute(problem, cfg.max_states)
        else:
            p = marginal_transfer(problem, cfg.max_frontier)
        out.write(f"{v[0]},{v[1]}," + ",".join(f"{x:.12g}" for x in p) + "\n")
    return EXIT_OK


def _run_probe(cfg: RunConfig, out: io.StringIO) -> int:
    table = wsm_probe(cfg.system(), cfg.ells, max_frontier=cfg.max_frontier)
    out.write(_header(cfg, "probe-wsm"))
    out.write("ell,tv\n")
    for ell, tv in table.rows:
        out.write(f"{ell},{tv:.12g}\n")
    return EXIT_OK


def _run_check_oracle(cfg: RunConfig, out: io.StringIO) -> int:
    out.write(_header(cfg, "check-oracle"))
    out.write("instance,q,beta,h,width,height,max_abs_diff\n")
    worst = 0.0
    for k, inst in enumerate(random_oracle_instances(cfg.instances, cfg.seed)):
        diff = float(np.abs(marginal_brute(inst.problem, cfg.max_states)
                            - marginal_transfer(inst.problem, cfg.max_frontier)).max())
        worst = max(worst, diff)
        out.write(f"{k},{inst.q},{inst.beta:.6f},{inst.h:.6f},{inst.width},{inst.height},{diff:.3e}\n")
    return EXIT_OK if worst <= ORACLE_TOL else EXIT_MISMATCH


def _run_stats(cfg: RunConfig, out: io.StringIO, err) -> int:
    sampler = _sampler(cfg)
    box = cfg.box()
    out.write(_header(cfg, "stats"))
    out.write("run,total_calls,max_depth,aborted\n")
    aborted = 0
    for k in range(cfg.samples):
        try:
            _, trace = sampler.sample_window(box, cfg.seed, index=k)
            flag = 0
        except BudgetExhausted as exc:
            trace, flag = exc.trace, 1
            aborted += 1
        out.write(f"{k},{trace.total_calls},{trace.max_depth},{flag}\n")
    if aborted:
        print(f"lazyspin: {aborted} of {cfg.samples} runs exhausted the call budget", file=err)
        return EXIT_BUDGET
    return EXIT_OK


def execute(cfg: RunConfig, subcommand: str, stdout=None, stderr=None) -> int:
    """Run one subcommand and write its output; return the exit status.

    Output is assembled in memory and written once, so a failing run leaves
    no partial file behind, except ``stats``, whose per-run table is the point
    of a budget-limited experiment and is written even when runs abort.
    """
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    if subcommand not in SUBCOMMANDS:
        print(f"lazyspin: unknown subcommand {subcommand!r}", file=stderr)
        return EXIT_CONFIG
    buf = io.StringIO()
    try:
        _require(cfg, subcommand)
        if subcommand == "sample":
            status = _run_sample(cfg, buf)
        elif subcommand == "marginal":
            status = _run_marginal(cfg, buf)
        elif subcommand == "probe-wsm":
            status = _run_probe(cfg, buf)
        elif subcommand == "check-oracle":
            status = _run_check_oracle(cfg, buf)
        else:
            status = _run_stats(cfg, buf, stderr)
    except ConfigError as exc:
        print(f"lazyspin: configuration error: {exc}", file=stderr)
        return EXIT_CONFIG
    except InfeasibleError as exc:
        print(f"lazyspin: infeasible configuration: {exc}", file=stderr)
        return EXIT_CONFIG
    except BudgetExhausted as exc:
        trace = exc.trace
        print(
            f"lazyspin: budget abort: {exc} "
            f"(total_calls={trace.total_calls}, max_depth={trace.max_depth})",
            file=stderr,
        )
        return EXIT_BUDGET
    except CapExceeded as exc:
        print(f"lazyspin: cap exceeded: {exc}", file=stderr)
        return EXIT_CAP
    _emit(cfg, buf.getvalue(), stdout)
    return status


def _emit(cfg: RunConfig, text: str, stdout) -> None:
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lazyspin", description="Lazy perfect sampling of spin systems on Z^2."
    )
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", help="file of key=value settings")
    parser.add_argument("--model", choices=("potts", "ising"))
    parser.add_argument("--q")
    parser.add_argument("--beta")
    parser.add_argument("--h")
    parser.add_argument("--mesh-l", dest="L", help="mesh parameter L (>= 2)")
    parser.add_argument("--strategy", choices=STRATEGIES)
    parser.add_argument("--window", help="x0,y0,x1,y1 inclusive")
    parser.add_argument("--seed")
    parser.add_argument("--samples")
    parser.add_argument("--budget", help=f"max lazy calls per run (default {DEFAULT_BUDGET})")
    parser.add_argument("--ells", help="probe-wsm scales, comma separated")
    parser.add_argument("--boundary", help="marginal boundary: free or a spin index")
    parser.add_argument("--method", choices=("transfer", "brute"))
    parser.add_argument("--instances", help="check-oracle instance count")
    parser.add_argument("--max-states", dest="max_states")
    parser.add_argument("--max-frontier", dest="max_frontier")
    parser.add_argument("--max-fillings", dest="max_fillings")
    parser.add_argument("--out", help="output path (default stdout)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    text = ""
    try:
        if args.config:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        overrides = {k: v for k, v in vars(args).items() if k not in ("subcommand", "config")}
        cfg = parse_config(text, overrides)
    except (OSError, ConfigError) as exc:
        print(f"lazyspin: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return execute(cfg, args.subcommand)


if __name__ == "__main__":
    sys.exit(main())
