"""Command-line front end.

Every command evaluates one quantity over an optional sweep axis (``--sweep
var:start:stop:count:lin|log``) crossed with optional series axes
(``--series var:v1,v2,...``) and writes a CSV or JSON table.

Exit codes: 0 success, 2 usage error, 3 solver failure, 4 degenerate sample.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import itertools
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from . import __version__, analytic, montecarlo, thresholds
from .analytic import Deployment, NumericalError, ParameterError
from .channel import ChannelModel
from .roots import BracketError
from .tables import ResultTable

log = logging.getLogger(__name__)

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_DEGENERATE = 0, 2, 3, 4

SWEEP_VARS = ("rho_l", "rho_nl", "d_max", "beta_th", "sigma_s", "radius", "n_nl", "p")
PARAM_COLUMNS = ["sigma_s", "n_p", "beta_th", "d_max", "rho_l", "rho_nl", "radius", "n_nl"]
DEFAULTS = {
    "sigma_s": 4.0, "n_p": 2.0, "beta_th": 20.0, "d_max": None,
    "rho_l": 0.1, "rho_nl": 0.1, "radius": 100.0, "n_nl": None,
    "trials": 100, "target_nodes": None, "seed": 0, "margin": None, "workers": 1,
    "xi": 0.51, "q": 1.0, "p": None, "omega": None,
    "n_grid": "1e3,1e4,1e6,1e9", "format": "csv", "out": None,
}
QUANTITIES = ("lambda_bounded", "lambda_unbounded", "lambda_gap", "p_el", "p_n_el", "min_density")
THRESHOLD_KINDS = ("node_rho", "node_dmax", "net_rho", "net_dmax", "p0", "theorem2")


class UsageError(ValueError):
    pass


@dataclass(frozen=True)
class Sweep:
    variable: str
    start: float
    stop: float
    count: int
    spacing: str = "lin"

    def __post_init__(self) -> None:
        if self.variable not in SWEEP_VARS:
            raise UsageError(f"cannot sweep {self.variable!r}; choose from {', '.join(SWEEP_VARS)}")
        if not self.start < self.stop:
            raise UsageError("sweep start must be < stop")
        if self.count < 2:
            raise UsageError("sweep count must be >= 2")
        if self.spacing not in ("lin", "log"):
            raise UsageError("sweep spacing must be lin or log")
        if self.spacing == "log" and self.start <= 0:
            raise UsageError("log sweep needs a positive start")

    @classmethod
    def parse(cls, text: str) -> "Sweep":
        parts = text.split(":")
        if len(parts) not in (4, 5):
            raise UsageError(f"bad sweep {text!r}; expected var:start:stop:count[:lin|log]")
        try:
            return cls(parts[0].replace("-", "_"), float(parts[1]), float(parts[2]), int(parts[3]),
                       parts[4] if len(parts) == 5 else "lin")
        except ValueError as exc:
            raise UsageError(f"bad sweep {text!r}: {exc}") from None

    def values(self) -> np.ndarray:
        if self.spacing == "log":
            return np.geomspace(self.start, self.stop, self.count)
        return np.linspace(self.start, self.stop, self.count)


@dataclass
class SweepSpec:
    fixed: dict
    sweep: Sweep | None = None
    series: list[tuple[str, list[float]]] = field(default_factory=list)

    def points(self) -> Iterator[dict]:
        axes = [(name, values) for name, values in self.series]
        if self.sweep is not None:
            axes.append((self.sweep.variable, [float(v) for v in self.sweep.values()]))
        names = [a[0] for a in axes]
        for combo in itertools.product(*(a[1] for a in axes)):
            params = dict(self.fixed)
            for name, value in zip(names, combo):
                params[name] = value
                # a swept range and a fixed budget cannot both define d_max
                if name == "d_max":
                    params["beta_th"] = None
                elif name == "beta_th":
                    params["d_max"] = None
            yield params


def parse_series(text: str) -> tuple[str, list[float]]:
    name, _, values = text.partition(":")
    name = name.replace("-", "_")
    if name not in SWEEP_VARS + ("n_p",) or not values:
        raise UsageError(f"bad series {text!r}; expected var:v1,v2,...")
    try:
        return name, [float(v) for v in values.split(",")]
    except ValueError:
        raise UsageError(f"bad series values in {text!r}") from None


def channel_from(params: dict) -> ChannelModel:
    if params.get("d_max") is not None:
        return ChannelModel.from_d_max(params["sigma_s"], params["n_p"], params["d_max"])
    return ChannelModel(params["sigma_s"], params["n_p"], params["beta_th"])


def deployment_from(params: dict) -> Deployment:
    return Deployment(params["rho_l"], params["rho_nl"], params["radius"])


def n_nl_from(params: dict) -> float:
    if params.get("n_nl") is not None:
        return float(params["n_nl"])
    return deployment_from(params).n_nl


def _param_row(params: dict) -> dict:
    ch = channel_from(params)
    return {
        "sigma_s": ch.sigma_s, "n_p": ch.n_p, "beta_th": ch.beta_th, "d_max": ch.d_max,
        "rho_l": params["rho_l"], "rho_nl": params["rho_nl"], "radius": params["radius"],
        "n_nl": n_nl_from(params),
    }


def cmd_analytic(spec: SweepSpec, quantity: str) -> ResultTable:
    if quantity not in QUANTITIES:
        raise UsageError(f"unknown quantity {quantity!r}")
    table = ResultTable(PARAM_COLUMNS + [quantity])
    for params in spec.points():
        ch = channel_from(params)
        rho_l, radius = params["rho_l"], params["radius"]
        if quantity == "lambda_bounded":
            value = analytic.expected_neighbors_bounded(ch, rho_l, radius)
        elif quantity == "lambda_unbounded":
            value = analytic.expected_neighbors_unbounded(ch, rho_l)
        elif quantity == "lambda_gap":
            value = (analytic.expected_neighbors_unbounded(ch, rho_l)
                     - analytic.expected_neighbors_bounded(ch, rho_l, radius))
        elif quantity == "p_el":
            value = analytic.localization_probability(ch, rho_l)
        elif quantity == "p_n_el":
            lam = analytic.expected_neighbors_unbounded(ch, rho_l)
            value = analytic.network_localization_probability(lam, n_nl_from(params))
        else:
            value = analytic.minimum_density(ch)
        table.add(**_param_row(params), **{quantity: value})
    return table


SIM_COLUMNS = ["level", "estimate", "ci_low", "ci_high", "trials", "events", "samples",
               "seed", "margin", "analytic", "status"]


def cmd_simulate(
    spec: SweepSpec, level: str, *, trials: int | None = None, target_nodes: float | None = None,
    seed: int = 0, margin: float | None = None, workers: int = 1,
) -> ResultTable:
    """Monte Carlo estimates beside the matching analytic value.

    ``target_nodes`` sets the trial count so that the expected number of pooled
    NL-nodes reaches the target; otherwise ``trials`` is used as given.
    """
    if level not in ("node", "network"):
        raise UsageError("level must be node or network")
    table = ResultTable(PARAM_COLUMNS + SIM_COLUMNS)
    for params in spec.points():
        ch = channel_from(params)
        dep = deployment_from(params)
        n_trials = trials
        if target_nodes is not None:
            n_trials = max(1, math.ceil(target_nodes / dep.n_nl))
        config = montecarlo.SimConfig(dep, ch, int(n_trials), int(seed), margin)
        lam = analytic.expected_neighbors_unbounded(ch, dep.rho_l)
        row = dict(_param_row(params), n_nl=dep.n_nl, level=level, trials=config.trials,
                   seed=config.master_seed, margin=config.margin, status="ok")
        try:
            if level == "node":
                est = montecarlo.estimate_node_localization(config, workers)
                expected = analytic.single_node_localization_probability(lam)
            else:
                est = montecarlo.estimate_network_localization(config, workers)
                expected = analytic.network_localization_probability(lam, dep.n_nl)
        except montecarlo.DegenerateSampleError:
            row.update(estimate=math.nan, ci_low=math.nan, ci_high=math.nan, events=0,
                       samples=0, analytic=math.nan, status="degenerate")
        else:
            row.update(estimate=est.estimate, ci_low=est.ci_low, ci_high=est.ci_high,
                       events=est.events, samples=est.samples, analytic=expected)
        table.add(**row)
    return table


THRESHOLD_COLUMNS = ["kind", "value", "residual", "iterations", "bracket_low", "bracket_high",
                     "sign_changes", "xi", "omega"]


def cmd_threshold(spec: SweepSpec, kind: str, *, xi: float | None = None,
                  omega: float | None = None) -> ResultTable:
    if kind not in THRESHOLD_KINDS:
        raise UsageError(f"unknown threshold kind {kind!r}")
    if kind == "p0" and xi is None:
        raise UsageError("p0 needs --xi")
    if kind == "theorem2" and omega is None:
        raise UsageError("theorem2 needs --omega")
    table = ResultTable(PARAM_COLUMNS + THRESHOLD_COLUMNS)
    for params in spec.points():
        ch = channel_from(params)
        rho_l = params["rho_l"]
        n_nl = n_nl_from(params)
        extra = {"iterations": 0, "sign_changes": 0, "bracket_low": math.nan,
                 "bracket_high": math.nan, "residual": 0.0}
        if kind == "node_rho":
            value = thresholds.single_node_density_threshold(ch)
            lam = math.pi * ch.d_max**2 * ch.shadow_gain * value
            extra["residual"] = abs(thresholds.density_equation(lam, 1.0))
        elif kind == "node_dmax":
            value = thresholds.single_node_range_threshold(ch, rho_l)
            lam = analytic.expected_neighbors_unbounded(ch, rho_l, value)
            extra["residual"] = abs(thresholds.range_equation(lam, 1.0))
        elif kind in ("net_rho", "net_dmax"):
            if kind == "net_rho":
                res = thresholds.network_density_threshold(ch, n_nl)
            else:
                res = thresholds.network_range_threshold(ch, rho_l, n_nl)
            value = res.value
            extra.update(residual=res.residual, iterations=res.iterations,
                         bracket_low=res.bracket[0], bracket_high=res.bracket[1],
                         sign_changes=len(res.sign_changes))
        elif kind == "p0":
            value = thresholds.dense_network_p0(ch, params["radius"], xi)
        else:
            value = thresholds.theorem2_required_range(ch, rho_l, omega)
        table.add(**_param_row(params), kind=kind, value=value, xi=xi, omega=omega, **extra)
    return table


def cmd_asymptotic(
    growth: thresholds.GrowthSpec, model: ChannelModel, radius: float,
    n_grid: Sequence[float], p_values: Sequence[float] | None = None, *, transition: bool = False,
) -> ResultTable:
    """Network probability against the growth constant ``p`` for each ``n``.

    With ``transition=True`` one row per ``n`` gives the ``p`` values where the
    probability crosses 0.01, 0.5 and 0.99.
    """
    gamma = thresholds.asymptotic_gamma(model, radius)
    p0 = thresholds.dense_network_p0(model, radius, growth.xi)
    if transition:
        table = ResultTable(["n", "p_01", "p_50", "p_99", "width", "p0", "gamma"])
        for n in n_grid:
            lo, mid, hi = (thresholds.transition_p(gamma, n, lv, xi=growth.xi, q=growth.q)
                           for lv in (0.01, 0.5, 0.99))
            table.add(n=float(n), p_01=lo, p_50=mid, p_99=hi, width=hi - lo, p0=p0, gamma=gamma)
        return table
    if p_values is None:
        raise UsageError("asymptotic needs --sweep p:start:stop:count or --transition")
    table = ResultTable(["n", "p", "n_l", "n_nl", "p_n_el", "log_p_n_el", "p0", "gamma"])
    for n in n_grid:
        for p in p_values:
            spec = thresholds.GrowthSpec(xi=growth.xi, p=float(p), q=growth.q, t=growth.t,
                                         regime=growth.regime)
            n_l, n_nl = spec.counts(n)
            log_p = analytic.log_network_localization_probability(gamma * n_l, n_nl)
            table.add(n=float(n), p=float(p), n_l=n_l, n_nl=n_nl, p_n_el=math.exp(log_p),
                      log_p_n_el=log_p, p0=p0, gamma=gamma)
    return table


# Presets: parameter sets for regenerating each figure's data in one command.
PRESETS: dict[str, list[str]] = {
    "p_loc": ["analytic", "--quantity", "p_el", "--n-p", "2", "--beta-th", "20",
              "--series", "sigma_s:0,4,9", "--sweep", "rho_l:1e-4:1:61:log"],
    "e_d_v": ["analytic", "--quantity", "lambda_unbounded", "--n-p", "2", "--beta-th", "20",
              "--series", "sigma_s:0,4,9", "--sweep", "rho_l:1e-4:1:61:log"],
    "min_rho_l": ["analytic", "--quantity", "min_density", "--beta-th", "30",
                  "--series", "n_p:2,3,4", "--sweep", "sigma_s:0:12:49"],
    "lambda_gap": ["analytic", "--quantity", "lambda_gap", "--rho-l", "0.1", "--beta-th", "20",
                   "--series", "n_p:2,4", "--series", "sigma_s:4,9",
                   "--sweep", "radius:1:200:100"],
    "thr_rho_l": ["analytic", "--quantity", "p_n_el", "--beta-th", "40", "--sigma-s", "4",
                  "--n-p", "2", "--rho-nl", "0.1", "--radius", "100",
                  "--sweep", "rho_l:1e-6:1e-2:81:log"],
    "thr_dmax": ["analytic", "--quantity", "p_n_el", "--sigma-s", "4", "--n-p", "2",
                 "--rho-l", "0.1", "--rho-nl", "0.1", "--radius", "100",
                 "--sweep", "d_max:1.01:20:96"],
    "finite_thr_ro_l": ["threshold", "--kind", "net_rho", "--rho-nl", "0.1", "--radius", "100",
                        "--series", "n_p:2,4", "--series", "sigma_s:0,4,8",
                        "--sweep", "beta_th:20:60:41"],
    "finite_thr_d_max": ["threshold", "--kind", "net_dmax", "--n-p", "4", "--rho-nl", "0.1",
                         "--radius", "100", "--series", "sigma_s:0,4,8",
                         "--sweep", "rho_l:1e-3:1:31:log"],
    "asympt_p0": ["asymptotic", "--sigma-s", "9", "--n-p", "4", "--beta-th", "30",
                  "--radius", "60", "--xi", "0.51", "--n-grid", "1e3,1e4,1e6,1e9",
                  "--sweep", "p:0.5:100:200"],
}


def _read_config(path: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment. Keys use flag names."""
    values: dict = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key = key.strip().lstrip("-").replace("-", "_")
        values.setdefault(key, []).append(value.strip())
    return values


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("model and deployment")
    g.add_argument("--sigma-s", type=float, help="shadowing standard deviation [dB]")
    g.add_argument("--n-p", type=float, help="path-loss exponent")
    budget = g.add_mutually_exclusive_group()
    budget.add_argument("--beta-th", type=float, help="link budget [dB]")
    budget.add_argument("--d-max", type=float, help="mean coverage radius [m]")
    g.add_argument("--rho-l", type=float, help="L-node density [1/m^2]")
    g.add_argument("--rho-nl", type=float, help="NL-node density [1/m^2]")
    g.add_argument("--radius", type=float, help="domain radius R [m]")
    g.add_argument("--n-nl", type=float, help="NL-node count (default: rho_nl * pi * R^2)")
    o = common.add_argument_group("sweep and output")
    o.add_argument("--sweep", help="var:start:stop:count[:lin|log]")
    o.add_argument("--series", action="append", help="var:v1,v2,... (repeatable, crossed)")
    o.add_argument("--format", choices=("csv", "json"))
    o.add_argument("--out", help="output file (default: stdout)")
    o.add_argument("--config", help="key = value file; flags override it")

    parser = argparse.ArgumentParser(prog="poissonloc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analytic", parents=[common], help="closed-form quantities")
    p.add_argument("--quantity", choices=QUANTITIES, default="p_el")

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo estimates")
    p.add_argument("--level", choices=("node", "network"), default="node")
    p.add_argument("--trials", type=int)
    p.add_argument("--target-nodes", type=float, help="choose trials to pool this many NL-nodes")
    p.add_argument("--seed", type=int)
    p.add_argument("--margin", type=float, help="generation band width beyond R [m]")
    p.add_argument("--workers", type=int)

    p = sub.add_parser("threshold", parents=[common], help="finite and asymptotic thresholds")
    p.add_argument("--kind", choices=THRESHOLD_KINDS, required=False)
    p.add_argument("--xi", type=float)
    p.add_argument("--omega", type=float)

    p = sub.add_parser("asymptotic", parents=[common], help="dense-network trajectories")
    p.add_argument("--xi", type=float)
    p.add_argument("--q", type=float)
    p.add_argument("--n-grid", help="comma-separated n values")
    p.add_argument("--transition", action="store_true", help="emit crossing points per n")

    p = sub.add_parser("reproduce", help="regenerate a figure's data from a preset")
    p.add_argument("--preset", choices=sorted(PRESETS), required=True)
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--out")
    return parser


def _resolve(args: argparse.Namespace) -> dict:
    """Merge flags over config file over defaults."""
    opts = dict(DEFAULTS)
    from_file = _read_config(args.config) if getattr(args, "config", None) else {}
    if "beta_th" in from_file and "d_max" in from_file:
        raise UsageError("config sets both beta_th and d_max")
    for key, values in from_file.items():
        value = values[-1]
        if key == "series":
            opts["series"] = values
        elif key in ("sweep", "format", "out", "quantity", "level", "kind", "n_grid"):
            opts[key] = value
        elif key == "transition":
            opts[key] = value.lower() in ("1", "true", "yes")
        elif key in ("trials", "seed", "workers"):
            opts[key] = int(value)
        elif key in DEFAULTS:
            opts[key] = float(value)
        else:
            raise UsageError(f"unknown config key {key!r}")
        if key == "d_max":
            opts["beta_th"] = None
    for key, value in vars(args).items():
        if value is None or key in ("config", "command", "verbose", "preset"):
            continue
        if key == "d_max":
            opts["beta_th"] = None
        elif key == "beta_th":
            opts["d_max"] = None
        opts[key] = value
    return opts


def _spec_from(opts: dict) -> SweepSpec:
    fixed = {k: opts[k] for k in ("sigma_s", "n_p", "beta_th", "d_max", "rho_l", "rho_nl",
                                  "radius", "n_nl")}
    sweep = Sweep.parse(opts["sweep"]) if opts.get("sweep") else None
    series = [parse_series(s) for s in (opts.get("series") or [])]
    return SweepSpec(fixed, sweep, series)


def run(opts: dict, command: str) -> ResultTable:
    spec = _spec_from(opts)
    if command == "analytic":
        if spec.sweep is not None and spec.sweep.variable == "p":
            raise UsageError("p is only a valid sweep axis for the asymptotic command")
        return cmd_analytic(spec, opts.get("quantity", "p_el"))
    if command == "simulate":
        return cmd_simulate(spec, opts.get("level", "node"), trials=opts["trials"],
                            target_nodes=opts["target_nodes"], seed=opts["seed"],
                            margin=opts["margin"], workers=opts["workers"])
    if command == "threshold":
        kind = opts.get("kind")
        if kind is None:
            raise UsageError("threshold needs --kind")
        return cmd_threshold(spec, kind, xi=opts.get("xi") if kind == "p0" else None,
                             omega=opts.get("omega"))
    if command == "asymptotic":
        growth = thresholds.GrowthSpec(xi=opts["xi"], q=opts["q"])
        n_grid = [float(v) for v in str(opts["n_grid"]).split(",")]
        p_values = None
        if spec.sweep is not None:
            if spec.sweep.variable != "p":
                raise UsageError("asymptotic sweeps only p")
            p_values = [float(v) for v in spec.sweep.values()]
        return cmd_asymptotic(growth, channel_from(spec.fixed), opts["radius"], n_grid,
                              p_values, transition=bool(opts.get("transition")))
    raise UsageError(f"unknown command {command!r}")


def _metadata(command: str, opts: dict) -> dict:
    echo = {k: v for k, v in sorted(opts.items()) if v is not None and k not in ("out", "format")}
    return {
        "tool": "poissonloc",
        "version": __version__,
        "command": command,
        "options": echo,
        "seed": opts.get("seed") if command == "simulate" else None,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }


def _emit(table: ResultTable, fmt: str, out: str | None) -> None:
    text = table.to_json() if fmt == "json" else table.to_csv()
    if out is None:
        sys.stdout.write(text)
        return
    Path(out).write_text(text, encoding="utf-8", newline="")
    if fmt == "csv":
        Path(out + ".meta.json").write_text(json.dumps(table.metadata, indent=2) + "\n",
                                            encoding="utf-8")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    command = args.command
    try:
        if command == "reproduce":
            preset = PRESETS[args.preset]
            args = parser.parse_args(preset)
            for key in ("format", "out"):
                override = getattr(parser.parse_args(argv), key)
                if override is not None:
                    setattr(args, key, override)
            command = args.command
        opts = _resolve(args)
        table = run(opts, command)
    except (UsageError, ParameterError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BracketError, NumericalError) as exc:
        info = getattr(exc, "scan", None) or getattr(exc, "info", None)
        print(f"solver failure: {exc}; diagnostics: {info}", file=sys.stderr)
        return EXIT_SOLVER
    table.metadata = _metadata(command, opts)
    _emit(table, opts["format"], opts["out"])
    if command == "simulate" and "degenerate" in table.column("status"):
        print("degenerate sample: no NL-node generated in some configuration", file=sys.stderr)
        return EXIT_DEGENERATE
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
