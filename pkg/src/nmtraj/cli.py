"""Configuration-driven command-line front end.

Subcommands: ``simulate`` (run one configured scenario), ``paper-example``
(the built-in two-meter qubit comparison at a configurable entanglement,
plus its unentangled companion), ``sweep`` (parameter sweeps in long table
format), and ``check-covariance`` (record statistics against the memory
kernel).  Exit codes: 0 success, 2 configuration error, 3 numerical error
(non-positive-definite meter state).

All outputs are deterministic for a fixed config and seed: numbers are
serialized as decimals with 17 significant digits and nothing depends on
wall clock or locale.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .chain import AsymmetricKernelTable, ChainConfig, CorrelationKernel, SystemSpec
from .ensemble import (
    EnsembleReport,
    PURITY_BINS,
    StrategyComparison,
    compare_strategies,
    covariance_check,
    mc_average,
    quadrature_average,
)
from .gauss import NotPositiveDefinite
from .measure import Strategy, StrategyRunner
from .presets import example_chain, example_kernel, example_system

__all__ = ["ConfigError", "ScenarioConfig", "main"]


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


def _fmt(x: float) -> str:
    """Decimal with 17 significant digits (round-trip exact)."""
    return format(float(x), ".17g")


def _require(mapping: dict, field: str, path: str):
    if field not in mapping:
        raise ConfigError(f"{path}.{field}", "missing")
    return mapping[field]


def _as_pairs(raw, n: int, path: str) -> np.ndarray:
    arr = np.asarray(raw, dtype=float)
    if arr.shape != (n, 2):
        raise ConfigError(path, f"expected {n} [re, im] pairs, got shape {arr.shape}")
    return arr[:, 0] + 1j * arr[:, 1]


def _to_pairs(arr: np.ndarray) -> list[list[float]]:
    flat = np.asarray(arr, dtype=complex).reshape(-1)
    return [[float(z.real), float(z.imag)] for z in flat]


@dataclass(frozen=True)
class ScenarioConfig:
    """Parsed scenario: system, bath, strategy, run and output settings."""

    system: SystemSpec
    kernel: CorrelationKernel
    chain: ChainConfig
    strategy: Strategy
    master_seed: int
    mode: str
    n_samples: int
    points_per_axis: int
    range_sigmas: float
    out_format: str
    out_path: str

    @classmethod
    def from_dict(cls, raw: dict) -> "ScenarioConfig":
        sys_d = _require(raw, "system", "scenario")
        dim = int(_require(sys_d, "dim", "system"))
        if dim < 2:
            raise ConfigError("system.dim", "must be >= 2")
        ham = _as_pairs(
            _require(sys_d, "hamiltonian", "system"), dim * dim, "system.hamiltonian"
        ).reshape(dim, dim)
        coup = _as_pairs(
            _require(sys_d, "coupling", "system"), dim * dim, "system.coupling"
        ).reshape(dim, dim)
        ket = _as_pairs(
            _require(sys_d, "initial_ket", "system"), dim, "system.initial_ket"
        )
        try:
            system = SystemSpec(hamiltonian=ham, coupling=coup, initial_ket=ket)
        except ValueError as exc:
            field = "system.initial_ket" if "ket" in str(exc) else "system"
            raise ConfigError(field, str(exc)) from exc

        bath = _require(raw, "bath", "scenario")
        kern_d = _require(bath, "kernel", "bath")
        ktype = _require(kern_d, "type", "bath.kernel")
        params = kern_d.get("params", {})
        try:
            if ktype == "markov":
                kernel = CorrelationKernel.markov(params.get("g2", 1.0))
            elif ktype == "exponential":
                kernel = CorrelationKernel.exponential(
                    params.get("g2", 1.0), _require(params, "gamma", "bath.kernel.params")
                )
            elif ktype == "gaussian":
                kernel = CorrelationKernel.gaussian(
                    params.get("g2", 1.0), _require(params, "sigma", "bath.kernel.params")
                )
            elif ktype == "table":
                kernel = CorrelationKernel.table(
                    _require(params, "times", "bath.kernel.params"),
                    _require(params, "values", "bath.kernel.params"),
                )
            else:
                raise ConfigError("bath.kernel.type", f"unknown kernel {ktype!r}")
        except AsymmetricKernelTable as exc:
            raise ConfigError("bath.kernel.params", str(exc)) from exc
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError("bath.kernel.params", str(exc)) from exc

        try:
            chain = ChainConfig(
                epsilon=float(bath.get("epsilon", 1.0)),
                n_apparatus=int(_require(bath, "n_apparatus", "bath")),
                kick_strength=float(bath.get("kick_strength", 1.0)),
            )
        except ValueError as exc:
            raise ConfigError("bath", str(exc)) from exc

        strat_d = _require(raw, "strategy", "scenario")
        stype = _require(strat_d, "type", "strategy")
        sparams = strat_d.get("params", {})
        try:
            strategy = Strategy(
                kind=stype,
                t_index=(
                    int(sparams["t_index"]) if "t_index" in sparams else None
                ),
            )
        except ValueError as exc:
            raise ConfigError("strategy.type", str(exc)) from exc
        if strategy.t_index is not None and not (
            1 <= strategy.t_index <= chain.n_apparatus
        ):
            raise ConfigError(
                "strategy.params.t_index",
                f"must be in 1..{chain.n_apparatus}, got {strategy.t_index}",
            )

        run = raw.get("run", {})
        mode = run.get("mode", "mc")
        if mode not in ("mc", "quadrature"):
            raise ConfigError("run.mode", f"must be 'mc' or 'quadrature', got {mode!r}")
        n_samples = int(run.get("n_samples", 1000))
        if n_samples < 1:
            raise ConfigError("run.n_samples", "must be >= 1")
        master_seed = int(run.get("master_seed", 0))
        if master_seed < 0:
            raise ConfigError("run.master_seed", "must be >= 0")
        points = int(run.get("points_per_axis", 201))
        if points < 2:
            raise ConfigError("run.points_per_axis", "must be >= 2")
        sigmas = float(run.get("range_sigmas", 8.0))
        if sigmas <= 0:
            raise ConfigError("run.range_sigmas", "must be positive")

        out = raw.get("output", {})
        out_format = out.get("format", "csv")
        if out_format not in ("csv", "json"):
            raise ConfigError("output.format", f"must be 'csv' or 'json', got {out_format!r}")
        out_path = out.get("path", "simulation_out." + out_format)

        return cls(
            system=system,
            kernel=kernel,
            chain=chain,
            strategy=strategy,
            master_seed=master_seed,
            mode=mode,
            n_samples=n_samples,
            points_per_axis=points,
            range_sigmas=sigmas,
            out_format=out_format,
            out_path=str(out_path),
        )

    def to_dict(self) -> dict:
        k = self.kernel
        if k.kind == "markov":
            params = {"g2": k.g2}
        elif k.kind == "exponential":
            params = {"g2": k.g2, "gamma": k.gamma}
        elif k.kind == "gaussian":
            params = {"g2": k.g2, "sigma": k.sigma}
        else:
            params = {"times": k.times.tolist(), "values": k.values.tolist()}
        sparams = {}
        if self.strategy.t_index is not None:
            sparams["t_index"] = self.strategy.t_index
        return {
            "system": {
                "dim": self.system.dim,
                "hamiltonian": _to_pairs(self.system.hamiltonian),
                "coupling": _to_pairs(self.system.coupling),
                "initial_ket": _to_pairs(self.system.initial_ket),
            },
            "bath": {
                "kernel": {"type": k.kind, "params": params},
                "epsilon": self.chain.epsilon,
                "n_apparatus": self.chain.n_apparatus,
                "kick_strength": self.chain.kick_strength,
            },
            "strategy": {"type": self.strategy.kind, "params": sparams},
            "run": {
                "master_seed": self.master_seed,
                "mode": self.mode,
                "n_samples": self.n_samples,
                "points_per_axis": self.points_per_axis,
                "range_sigmas": self.range_sigmas,
            },
            "output": {"format": self.out_format, "path": self.out_path},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def default_scenario_dict(a: float = 0.5) -> dict:
    """The built-in two-meter qubit scenario as a config dictionary."""
    system = example_system()
    kernel = example_kernel(a)
    chain = example_chain()
    cfg = ScenarioConfig(
        system=system,
        kernel=kernel,
        chain=chain,
        strategy=Strategy("monitoring"),
        master_seed=0,
        mode="mc",
        n_samples=1000,
        points_per_axis=201,
        range_sigmas=8.0,
        out_format="csv",
        out_path="simulation_out.csv",
    )
    return cfg.to_dict()


def _rho_headers(d: int) -> list[str]:
    names = []
    for part in ("re", "im"):
        for i in range(d):
            for j in range(d):
                names.append(f"rho_{part}_{i}{j}")
    return names


def _rho_cells(m: np.ndarray) -> list[str]:
    return [_fmt(v) for v in np.concatenate([m.real.ravel(), m.imag.ravel()])]


def _trajectory_rows(cfg: ScenarioConfig) -> list[dict]:
    runner = StrategyRunner(
        cfg.system,
        cfg.kernel,
        cfg.chain,
        cfg.strategy,
        range_sigmas=cfg.range_sigmas,
    )
    rng = np.random.default_rng((cfg.master_seed, 0))
    result = runner.run(rng=rng, collect_reduced=True)
    rows = []
    m_idx = 0
    for idx, event in enumerate(runner.events):
        if event[0] == "kick":
            _, n, _ = event
            row = {
                "step": n,
                "time": cfg.chain.epsilon * n,
                "observable": f"kick{n}",
                "outcome": None,
                "log_weight": None,
            }
        else:
            _, _coeffs, tag, time = event
            entry = result.record.entries[m_idx]
            m_idx += 1
            row = {
                "step": int(tag[1:]),
                "time": time,
                "observable": tag,
                "outcome": entry.outcome,
                "log_weight": entry.log_weight,
            }
        row["purity"] = result.purity_series[idx]
        row["rho"] = result.reduced_series[idx]
        rows.append(row)
    return rows


def _ensemble_row(report: EnsembleReport) -> dict:
    stats = report.purity_stats
    return {
        "strategy": report.strategy,
        "mode": report.mode,
        "n_samples": report.n_samples,
        "master_seed": report.master_seed,
        "points_per_axis": (
            None if report.quadrature_spec is None
            else report.quadrature_spec["points_per_axis"]
        ),
        "range_sigmas": (
            None if report.quadrature_spec is None
            else report.quadrature_spec["range_sigmas"]
        ),
        "total_mass": report.total_mass,
        "standard_error": report.standard_error,
        "trace_distance_to_reference": report.trace_distance_to_reference,
        "purity_mean": stats.mean,
        "purity_min": stats.min,
        "purity_max": stats.max,
        "fraction_mixed": stats.fraction_mixed,
        "average": report.average_density.matrix,
        "reference": report.reference_density.matrix,
    }


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return _fmt(v)


def _write_simulate_csv(path: Path, traj_rows: list[dict], ens: dict, d: int):
    lines = ["# trajectory"]
    header = ["step", "time", "observable", "outcome", "log_weight", "purity"]
    lines.append(",".join(header + _rho_headers(d)))
    for row in traj_rows:
        cells = [_cell(row[h]) for h in header]
        lines.append(",".join(cells + _rho_cells(row["rho"])))
    lines.append("")
    lines.append("# ensemble")
    scalar_keys = [k for k in ens if k not in ("average", "reference")]
    avg_heads = [h.replace("rho_", "avg_") for h in _rho_headers(d)]
    ref_heads = [h.replace("rho_", "ref_") for h in _rho_headers(d)]
    lines.append(",".join(scalar_keys + avg_heads + ref_heads))
    cells = [_cell(ens[k]) for k in scalar_keys]
    lines.append(",".join(cells + _rho_cells(ens["average"]) + _rho_cells(ens["reference"])))
    path.write_text("\n".join(lines) + "\n")


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return _to_pairs(v) if np.iscomplexobj(v) else v.tolist()
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        return float(v)
    return v


def _write_simulate_json(path: Path, traj_rows: list[dict], ens: dict):
    doc = {
        "trajectory": [
            {k: _jsonable(v) for k, v in row.items()} for row in traj_rows
        ],
        "ensemble": {k: _jsonable(v) for k, v in ens.items()},
    }
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def cmd_simulate(args) -> int:
    raw = json.loads(Path(args.config).read_text())
    cfg = ScenarioConfig.from_dict(raw)
    if args.seed is not None:
        cfg = replace(cfg, master_seed=args.seed)
    if args.samples is not None:
        cfg = replace(cfg, n_samples=args.samples)
    if args.format is not None:
        cfg = replace(cfg, out_format=args.format)
    if args.out is not None:
        cfg = replace(cfg, out_path=args.out)

    traj_rows = _trajectory_rows(cfg)
    if cfg.mode == "mc":
        report = mc_average(
            cfg.system, cfg.kernel, cfg.chain, cfg.strategy,
            cfg.n_samples, cfg.master_seed,
        )
    else:
        report = quadrature_average(
            cfg.system, cfg.kernel, cfg.chain, cfg.strategy,
            cfg.points_per_axis, cfg.range_sigmas,
        )
    ens = _ensemble_row(report)
    out = Path(cfg.out_path)
    if cfg.out_format == "csv":
        _write_simulate_csv(out, traj_rows, ens, cfg.system.dim)
    else:
        _write_simulate_json(out, traj_rows, ens)
    print(f"wrote {out}")
    return 0


_COMPARE_FIELDS = [
    "a",
    "strategy",
    "mode",
    "n_samples",
    "master_seed",
    "mean_purity",
    "min_purity",
    "mean_checkpoint_purity",
    "fraction_mixed",
    "trace_distance_to_reference",
    "standard_error",
]


def _compare_row_dict(a: float, row: StrategyComparison) -> dict:
    return {
        "a": a,
        "strategy": row.strategy,
        "mode": row.mode,
        "n_samples": row.n_samples,
        "master_seed": row.master_seed,
        "mean_purity": row.mean_purity,
        "min_purity": row.min_purity,
        "mean_checkpoint_purity": row.mean_checkpoint_purity,
        "fraction_mixed": row.fraction_mixed,
        "trace_distance_to_reference": row.trace_distance_to_reference,
        "standard_error": row.standard_error,
    }


def _write_table(path: Path, fields: list[str], rows: list[dict], fmt: str):
    if fmt == "csv":
        lines = [",".join(fields)]
        for row in rows:
            lines.append(",".join(_cell(row[f]) for f in fields))
        path.write_text("\n".join(lines) + "\n")
    else:
        doc = [{k: _jsonable(v) for k, v in row.items()} for row in rows]
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _hist_rows(a: float, rows: list[StrategyComparison]) -> list[dict]:
    edges = np.linspace(0.0, 1.0, PURITY_BINS + 1)
    out = []
    for row in rows:
        for b in range(PURITY_BINS):
            out.append(
                {
                    "a": a,
                    "strategy": row.strategy,
                    "bin_lo": edges[b],
                    "bin_hi": edges[b + 1],
                    "count": row.purity_histogram[b],
                }
            )
    return out


def cmd_paper_example(args) -> int:
    if not 0.0 <= args.a < 1.0 + 1e-15:
        raise ConfigError("a", "entanglement must satisfy 0 <= a < 1")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    system = example_system()
    chain = example_chain()
    compare_rows: list[dict] = []
    hist_rows: list[dict] = []
    for a in (args.a, 0.0):
        rows = compare_strategies(
            system,
            example_kernel(a),
            chain,
            n_samples=args.samples,
            master_seed=args.seed,
            mode="quadrature",
            points_per_axis=args.points,
        )
        compare_rows.extend(_compare_row_dict(a, r) for r in rows)
        hist_rows.extend(_hist_rows(a, rows))
    ext = args.format
    _write_table(out_dir / f"compare.{ext}", _COMPARE_FIELDS, compare_rows, ext)
    _write_table(
        out_dir / f"purity_hist.{ext}",
        ["a", "strategy", "bin_lo", "bin_hi", "count"],
        hist_rows,
        ext,
    )
    print(f"wrote {out_dir / ('compare.' + ext)} and {out_dir / ('purity_hist.' + ext)}")
    return 0


def cmd_sweep(args) -> int:
    try:
        grid = [float(v) for v in args.grid.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise ConfigError("grid", f"not a numeric list: {exc}") from exc
    if not grid:
        raise ConfigError("grid", "empty grid")
    if args.config is not None:
        base = ScenarioConfig.from_dict(json.loads(Path(args.config).read_text()))
        system, chain = base.system, base.chain
    else:
        system, chain = example_system(), example_chain()

    rows: list[dict] = []
    for value in grid:
        if args.param == "a":
            if not 0.0 <= value:
                raise ConfigError("grid", f"a = {value} out of range [0, 1)")
            kernel = CorrelationKernel.table(
                [0.0, chain.epsilon], [1.0, value]
            )
            cfg_v = chain
        elif args.param == "gamma":
            if value <= 0:
                raise ConfigError("grid", f"gamma = {value} must be positive")
            kernel = CorrelationKernel.exponential(1.0, value)
            cfg_v = chain
        else:  # epsilon
            if value <= 0:
                raise ConfigError("grid", f"epsilon = {value} must be positive")
            kernel = example_kernel(0.5)
            cfg_v = replace(chain, epsilon=value)
        comp = compare_strategies(
            system,
            kernel,
            cfg_v,
            n_samples=args.samples,
            master_seed=args.seed,
            mode="quadrature",
            points_per_axis=args.points,
        )
        for r in comp:
            row = _compare_row_dict(value, r)
            row["param"] = args.param
            rows.append(row)
    fields = ["param"] + [f if f != "a" else "value" for f in _COMPARE_FIELDS]
    for row in rows:
        row["value"] = row.pop("a")
    out = Path(args.out)
    _write_table(out, fields, rows, args.format)
    print(f"wrote {out}")
    return 0


def cmd_check_covariance(args) -> int:
    if args.config is not None:
        base = ScenarioConfig.from_dict(json.loads(Path(args.config).read_text()))
        kernel, chain = base.kernel, base.chain
    else:
        kernel, chain = example_kernel(0.5), example_chain()
    report = covariance_check(
        kernel, chain, args.samples, args.seed, method=args.method
    )
    fields = ["l", "m", "empirical", "expected", "std_error", "sigma_units"]
    rows = []
    n = chain.n_apparatus
    for l in range(n):
        for m in range(n):
            dev = report.empirical[l, m] - report.expected[l, m]
            rows.append(
                {
                    "l": l + 1,
                    "m": m + 1,
                    "empirical": report.empirical[l, m],
                    "expected": report.expected[l, m],
                    "std_error": report.std_error[l, m],
                    "sigma_units": dev / report.std_error[l, m],
                }
            )
    if args.out is not None:
        _write_table(Path(args.out), fields, rows, args.format)
    for row in rows:
        print(
            f"z{row['l']} z{row['m']}: emp={row['empirical']:+.5f} "
            f"exp={row['expected']:+.5f} ({row['sigma_units']:+.2f} sigma)"
        )
    print(f"max deviation: {report.max_sigma_units:.2f} sigma "
          f"({'within' if report.within_3sigma else 'OUTSIDE'} 3 sigma)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nmtraj",
        description="Apparatus-chain simulator for non-Markovian measurement trajectories",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run one configured scenario")
    p_sim.add_argument("--config", required=True, help="JSON scenario file")
    p_sim.add_argument("--seed", type=int, default=None, help="override run.master_seed")
    p_sim.add_argument("--samples", type=int, default=None, help="override run.n_samples")
    p_sim.add_argument("--out", default=None, help="override output.path")
    p_sim.add_argument("--format", choices=("csv", "json"), default=None)
    p_sim.set_defaults(func=cmd_simulate)

    p_pe = sub.add_parser(
        "paper-example",
        help="built-in two-meter qubit comparison (configured a plus a=0)",
    )
    p_pe.add_argument("--a", type=float, default=0.5, help="meter entanglement, 0 <= a < 1")
    p_pe.add_argument("--seed", type=int, default=12345)
    p_pe.add_argument("--samples", type=int, default=400, help="records per purity histogram")
    p_pe.add_argument("--points", type=int, default=121, help="quadrature points per axis")
    p_pe.add_argument("--out", default="paper_example_out", help="output directory")
    p_pe.add_argument("--format", choices=("csv", "json"), default="csv")
    p_pe.set_defaults(func=cmd_paper_example)

    p_sw = sub.add_parser("sweep", help="sweep a, gamma, or epsilon over a grid")
    p_sw.add_argument("--param", choices=("a", "gamma", "epsilon"), required=True)
    p_sw.add_argument("--grid", required=True, help="comma-separated values")
    p_sw.add_argument("--config", default=None, help="base scenario JSON (system/chain)")
    p_sw.add_argument("--seed", type=int, default=12345)
    p_sw.add_argument("--samples", type=int, default=200)
    p_sw.add_argument("--points", type=int, default=121)
    p_sw.add_argument("--out", default="sweep.csv")
    p_sw.add_argument("--format", choices=("csv", "json"), default="csv")
    p_sw.set_defaults(func=cmd_sweep)

    p_cv = sub.add_parser("check-covariance", help="record covariance vs the memory kernel")
    p_cv.add_argument("--config", default=None, help="scenario JSON supplying the bath")
    p_cv.add_argument("--samples", type=int, default=20000)
    p_cv.add_argument("--seed", type=int, default=12345)
    p_cv.add_argument("--method", choices=("measure", "direct"), default="measure")
    p_cv.add_argument("--out", default=None)
    p_cv.add_argument("--format", choices=("csv", "json"), default="csv")
    p_cv.set_defaults(func=cmd_check_covariance)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NotPositiveDefinite as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
