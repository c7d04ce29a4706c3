"""Command line front end: ``dmesi {simulate,bounds,chains,region}``.

Configuration is a flat JSON object (see ``ExperimentConfig``); command line
flags override file values. Unknown keys are rejected.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import os
import sys
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from dmesi.bounds import in_regime, proposed_bound, remark1_ratio
from dmesi.chains import (
    REGION_MODES,
    Chain,
    DeltaTable,
    algorithm1,
    algorithm2,
    c_t,
    d_prefixes,
    default_order,
    read_chains,
    region2_check,
    validate_chains,
)
from dmesi.codec import COMBINERS, CodecParams, derive_codec_params
from dmesi.errors import DmesiError
from dmesi.protocol import Instance, chain_weights, generate_instance, monte_carlo

STRATEGIES = ("wz", "alg1", "alg2", "file")
INSTANCE_MODES = ("derive", "star", "verify", "table")

SIM_COLUMNS = [
    "estimator", "n", "d", "r", "k", "trials", "mse_empirical", "mse_stderr", "bound",
    "ratio_emp_bound", "sum_D", "sum_delta_sq", "improvement_region", "seed",
]


class ConfigError(ValueError):
    def __init__(self, field_name: str, msg: str):
        self.field = field_name
        super().__init__(f"{field_name}: {msg}")


@dataclass
class ExperimentConfig:
    n: int = 16
    d: int = 256
    r: int = 64  # bits per client message
    trials: int = 1000
    seed: int = 0
    instances: int = 1  # instance i uses seed + i
    instance_mode: str = "star"
    # derive mode (distances in the units of the vectors)
    spread: float = 1.0
    noise_min: float = 0.1
    noise_max: float = 1.0
    center_scale: float = 1.0
    # star mode
    head: int = 0
    delta_head: float = 1.0
    delta_link: object = 1.0  # scalar or per-client list
    delta_tail: object = 10.0  # scalar or per-client list
    # verify / table modes: .npy or comma-separated text, one client per row
    x_path: Optional[str] = None
    y_path: Optional[str] = None
    table_path: Optional[str] = None  # JSON {"delta_s": [...], "delta_c": [[...]]}
    strategy: str = "alg2"
    chains_path: Optional[str] = None
    combiner: str = "scaled"
    region_mode: str = "eq15"
    looseness: float = 1.0  # declared distances = realized * looseness
    allow_out_of_regime: bool = False
    out: Optional[str] = None
    figure: Optional[str] = None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def validate(self, need_vectors: bool = True) -> "ExperimentConfig":
        for name in ("n", "d", "r", "trials", "instances"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ConfigError(name, f"must be a positive integer, got {v!r}")
        if self.n < 2:
            raise ConfigError("n", "need at least two clients")
        choices = {"strategy": STRATEGIES, "combiner": COMBINERS,
                   "region_mode": REGION_MODES, "instance_mode": INSTANCE_MODES}
        for name, allowed in choices.items():
            if getattr(self, name) not in allowed:
                raise ConfigError(name, f"must be one of {allowed}, got {getattr(self, name)!r}")
        if not self.looseness >= 1:
            raise ConfigError("looseness", "must be >= 1")
        if not 0 <= self.head < self.n:
            raise ConfigError("head", f"must index a client in [0, {self.n})")
        required = {"file": ["chains_path"]}.get(self.strategy, [])
        if self.instance_mode == "verify":
            required += ["x_path", "y_path", "table_path"]
        if self.instance_mode == "table":
            required += ["table_path"]
            if need_vectors:
                raise ConfigError("instance_mode", "'table' has no vectors to simulate")
        for name in required:
            path = getattr(self, name)
            if not path:
                raise ConfigError(name, "required for this configuration")
            if not os.path.exists(path):
                raise ConfigError(name, f"file not found: {path}")
        params = self.codec_params()
        if not self.allow_out_of_regime and not in_regime(params.dim, self.r, params.log_k):
            raise ConfigError("r", f"need d >= r >= {2 * params.log_k} "
                                   "(set allow_out_of_regime to override)")
        return self

    def codec_params(self) -> CodecParams:
        try:
            return derive_codec_params(self.n, self.d, self.r)
        except DmesiError as exc:
            raise ConfigError("r", str(exc)) from exc


def load_config(path: Optional[str]) -> dict:
    """Read a flat JSON config; a ``{"config": {...}}`` wrapper is unwrapped."""
    if not path:
        return {}
    with open(path) as fh:
        raw = json.load(fh)
    if isinstance(raw, dict) and set(raw) >= {"config"} and isinstance(raw["config"], dict):
        raw = raw["config"]
    if not isinstance(raw, dict):
        raise ConfigError("config", "top level must be a JSON object")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(unknown[0], "unknown configuration key")
    return raw


def build_config(file_values: dict, overrides: dict) -> ExperimentConfig:
    values = dict(file_values)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**values)


def _load_array(path):
    if path.endswith(".npy"):
        return np.load(path)
    return np.loadtxt(path, delimiter=",", ndmin=2)


def _load_table(path) -> DeltaTable:
    with open(path) as fh:
        raw = json.load(fh)
    return DeltaTable(raw["delta_s"], raw["delta_c"])


def make_instance(cfg: ExperimentConfig, seed: int) -> Instance:
    if cfg.instance_mode == "derive":
        inst = generate_instance(cfg.n, cfg.d, "derive", seed, spread=cfg.spread,
                                 noise_min=cfg.noise_min, noise_max=cfg.noise_max,
                                 center_scale=cfg.center_scale)
    elif cfg.instance_mode == "star":
        inst = generate_instance(cfg.n, cfg.d, "star", seed, head=cfg.head,
                                 delta_head=cfg.delta_head, delta_link=cfg.delta_link,
                                 delta_tail=cfg.delta_tail, center_scale=cfg.center_scale)
    else:
        inst = generate_instance(cfg.n, cfg.d, "verify", seed, x=_load_array(cfg.x_path),
                                 y=_load_array(cfg.y_path), table=_load_table(cfg.table_path))
    return inst.with_looseness(cfg.looseness) if cfg.looseness != 1 else inst


def config_table(cfg: ExperimentConfig, seed: int) -> DeltaTable:
    if cfg.instance_mode == "table":
        table = _load_table(cfg.table_path)
        if table.n != cfg.n:
            raise ConfigError("table_path", f"table has {table.n} clients, n={cfg.n}")
        return table.scaled(cfg.looseness)
    return make_instance(cfg, seed).table


def select_chains(cfg: ExperimentConfig, table: DeltaTable, params: CodecParams,
                  strategy: Optional[str] = None):
    strategy = strategy or cfg.strategy
    if strategy == "wz":
        chains = [Chain.trivial(i) for i in range(table.n)]
        order = list(range(table.n))
    elif strategy == "alg1":
        chains, _ = algorithm1(table, params.dim, params.n)
        order = list(range(table.n))
    elif strategy == "alg2":
        chains, order = algorithm2(table, params.n, cfg.region_mode)
    else:
        chains = read_chains(cfg.chains_path)
        order = default_order(chains)
    problem = validate_chains(chains, order)
    if problem:
        raise ConfigError("chains_path" if strategy == "file" else "strategy", problem)
    return chains, order


def _estimators(cfg):
    return ["wz"] if cfg.strategy == "wz" else ["wz", cfg.strategy]


def _label(strategy):
    return "wz" if strategy == "wz" else f"pro-{strategy}"


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    return str(v)


def _write_csv(rows, columns, out: Optional[str]):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(row[c]) for c in columns])
    text = buf.getvalue()
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return text


def cmd_simulate(cfg: ExperimentConfig) -> list[dict]:
    cfg.validate(need_vectors=True)
    params = cfg.codec_params()
    rows = []
    for idx in range(cfg.instances):
        seed = cfg.seed + idx
        inst = make_instance(cfg, seed)
        for strategy in _estimators(cfg):
            chains, order = select_chains(cfg, inst.table, params, strategy)
            rep = monte_carlo(inst, chains, params, cfg.trials, seed, cfg.combiner, order)
            bound = rep.bounds.baseline if strategy == "wz" else rep.bounds.proposed
            rows.append({
                "estimator": _label(strategy), "n": cfg.n, "d": cfg.d, "r": cfg.r,
                "k": params.k, "trials": cfg.trials, "mse_empirical": rep.mse,
                "mse_stderr": rep.stderr, "bound": bound,
                "ratio_emp_bound": rep.mse / bound if bound > 0 else float("nan"),
                "sum_D": rep.bounds.sum_D, "sum_delta_sq": rep.bounds.sum_delta_sq,
                "improvement_region": rep.bounds.improvement_region, "seed": seed,
            })
    return rows


BOUND_COLUMNS = ["estimator", "seed", "baseline", "proposed", "B_used", "ratio", "remark1_ratio",
                 "sum_D", "sum_delta_sq", "improvement_region", "in_regime"]


def cmd_bounds(cfg: ExperimentConfig) -> list[dict]:
    cfg.validate(need_vectors=False)
    params = cfg.codec_params()
    rows = []
    for idx in range(cfg.instances):
        seed = cfg.seed + idx
        table = config_table(cfg, seed)
        for strategy in _estimators(cfg):
            chains, _ = select_chains(cfg, table, params, strategy)
            rep = proposed_bound(chains, table, params)
            row = {"estimator": _label(strategy), "seed": seed, **rep.to_dict()}
            row["remark1_ratio"] = (remark1_ratio(rep.sum_D, rep.sum_delta_sq, params.log_k)
                                    if rep.sum_delta_sq > 0 else float("nan"))
            rows.append(row)
    return rows


def cmd_chains(cfg: ExperimentConfig, validate: bool = False) -> tuple[list[str], Optional[str]]:
    cfg.validate(need_vectors=False)
    params = cfg.codec_params()
    table = config_table(cfg, cfg.seed)
    chains, order = select_chains(cfg, table, params)
    lines = [f"# strategy={cfg.strategy} decode_order={' '.join(map(str, order))}"]
    for c in order:
        ch = chains[c]
        w = chain_weights(ch, table, params).total_w
        D = d_prefixes(ch.hop_deltas(table), params.n)[-1]
        lines.append(f"{ch}  # w={fmt(w)} D={fmt(D)}")
    problem = validate_chains(chains, order) if validate else None
    if validate:
        lines.append(f"# validate: {problem or 'ok'}")
    return lines, problem


REGION_COLUMNS = ["delta_i", "delta_i_sq", "d_value", "strict_lhs", "in_region_eq15",
                  "in_region_strict_eq17"]


def cmd_region(n: int, delta_t: float, delta_ti: float, delta_i_values) -> list[dict]:
    D = d_prefixes([delta_t, delta_ti], n)[-1]
    t2, ti2 = delta_t**2, delta_ti**2
    strict = max(5 * t2 + 2 * ti2, c_t(2, n) * (t2 + 2 * ti2) + 3 * n * t2 / 154.0 + 3 * t2)
    return [{
        "delta_i": float(di), "delta_i_sq": float(di) ** 2, "d_value": D, "strict_lhs": strict,
        "in_region_eq15": region2_check(delta_t, delta_ti, di, n, "eq15"),
        "in_region_strict_eq17": region2_check(delta_t, delta_ti, di, n, "strict-eq17"),
    } for di in delta_i_values]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat JSON configuration file")
    common.add_argument("--seed", type=int)
    common.add_argument("--trials", type=int)
    common.add_argument("--out", help="write CSV here instead of stdout")
    common.add_argument("--figure", help="also render a figure to this path")
    common.add_argument("--strategy", choices=STRATEGIES)
    common.add_argument("--combiner", choices=COMBINERS)
    common.add_argument("--region-mode", dest="region_mode", choices=REGION_MODES)
    common.add_argument("--n", type=int)
    common.add_argument("--d", type=int)
    common.add_argument("--r", type=int)
    common.add_argument("--instances", type=int)
    common.add_argument("--instance-mode", dest="instance_mode", choices=INSTANCE_MODES)
    common.add_argument("--chains", dest="chains_path", help="chain file for --strategy file")

    p = argparse.ArgumentParser(prog="dmesi", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="Monte Carlo MSE vs bounds (CSV)")
    b = sub.add_parser("bounds", parents=[common], help="analytic bounds only")
    b.add_argument("--json", action="store_true", help="structured output that --config accepts")
    c = sub.add_parser("chains", parents=[common], help="print selected chains")
    c.add_argument("--validate", action="store_true")
    g = sub.add_parser("region", parents=[common], help="sweep delta_i across the chain region")
    g.add_argument("--delta-t", type=float, default=1.0)
    g.add_argument("--delta-ti", type=float, default=1.0)
    g.add_argument("--delta-i-min", type=float, default=0.0)
    g.add_argument("--delta-i-max", type=float, default=10.0)
    g.add_argument("--steps", type=int, default=101)
    return p


OVERRIDE_KEYS = ("seed", "trials", "out", "figure", "strategy", "combiner", "region_mode", "n",
                 "d", "r", "instances", "instance_mode", "chains_path")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        overrides = {k: getattr(args, k) for k in OVERRIDE_KEYS}
        cfg = build_config(load_config(args.config), overrides)
        if args.command == "simulate":
            rows = cmd_simulate(cfg)
            _write_csv(rows, SIM_COLUMNS, cfg.out)
            if cfg.figure:
                from dmesi.plotting import plot_simulation
                plot_simulation(rows, cfg.figure)
        elif args.command == "bounds":
            rows = cmd_bounds(cfg)
            if args.json:
                doc = json.dumps({"config": cfg.to_dict(), "reports": rows}, indent=2,
                                 default=float)
                if cfg.out:
                    with open(cfg.out, "w") as fh:
                        fh.write(doc + "\n")
                else:
                    print(doc)
            else:
                _write_csv(rows, BOUND_COLUMNS, cfg.out)
        elif args.command == "chains":
            lines, problem = cmd_chains(cfg, args.validate)
            text = "\n".join(lines) + "\n"
            if cfg.out:
                with open(cfg.out, "w") as fh:
                    fh.write(text)
            else:
                sys.stdout.write(text)
            if problem:
                return 1
        else:
            n = cfg.n
            values = np.linspace(args.delta_i_min, args.delta_i_max, args.steps)
            rows = cmd_region(n, args.delta_t, args.delta_ti, values)
            _write_csv(rows, REGION_COLUMNS, cfg.out)
            if cfg.figure:
                from dmesi.plotting import plot_region
                plot_region(rows, args.delta_t, args.delta_ti, n, cfg.figure)
    except ConfigError as exc:
        print(f"dmesi: invalid configuration: {exc}", file=sys.stderr)
        return 2
    except (DmesiError, ValueError, OSError) as exc:
        print(f"dmesi: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
