"""Command-line front end.

Every subcommand writes ``<command>.json`` (a report bundle) and/or CSV
tables into the output directory. Exit codes: 0 success, 2 invalid input,
3 numerical failure, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from . import oracle as orc
from .config import ConfigError, RunConfig, parse_config, replace_value
from .kernel import (
    THREADS_ENV,
    compute_full_cycle,
    compute_write_kernel,
    kernel_imaginary_residual,
    orthonormality_residuals,
    phi_zero_frequency,
    reconstruction_error,
    solve,
    write_kernel_values,
)
from .protocol import DrivingConfig, run_scenario
from .report import ReportBundle, schmidt_rows, schmidt_table, source_table, write_csv
from .source import Quadrature, build_input_spec, mode_occupancy, squeezed_variance

log = logging.getLogger("tripod_mzi")

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
SWEEP_PARAMS = {"t_w": "grid", "l": "grid", "mu": "source"}


@dataclass
class Flags:
    debug: bool = False
    figures: bool = False
    fields: bool = False
    param: str | None = None
    start: float | None = None
    stop: float | None = None
    steps: int = 10


class _Outputs:
    def __init__(self, config: RunConfig, figures: bool):
        self.dir = Path(config.output.directory)
        self.formats = config.output.formats
        self.figures = figures or config.output.figures
        self.written: list[Path] = []
        self.dir.mkdir(parents=True, exist_ok=True)

    def csv(self, name, header, rows):
        if "csv" in self.formats:
            self.written.append(write_csv(self.dir / name, header, rows))

    def json(self, bundle: ReportBundle):
        if "json" in self.formats:
            self.written.append(bundle.write_json(self.dir / f"{bundle.command}.json"))

    def figure(self, name, plot, *args, **kwargs):
        """Render ``plotting.<plot>`` to ``name`` when figures are on."""
        if self.figures:
            from . import plotting

            self.written.append(getattr(plotting, plot)(*args, self.dir / name, **kwargs))


def _phi0_sq(basis) -> np.ndarray:
    return np.array([phi_zero_frequency(basis, i) ** 2 for i in range(basis.n_modes)])


def _schmidt_diagnostics(fck, basis, phi0_sq) -> dict:
    res_phi, res_g = orthonormality_residuals(basis)
    return {
        "n_modes": basis.n_modes,
        "orthonormality_phi": res_phi,
        "orthonormality_g": res_g,
        "reconstruction_error": reconstruction_error(fck, basis),
        "max_discarded_lambda": float(basis.discarded.max()) if basis.discarded.size else 0.0,
        "phi0_sq_tail": float(phi0_sq[2:].sum()),
        "parseval_gap": float(1.0 - phi0_sq.sum()),
    }


def _input_specs(config: RunConfig, script, basis) -> dict:
    """Input spec per script id: the first pulse as configured, a second one squeezed orthogonally."""
    params = config.source_params()
    specs = {}
    for k, sid in enumerate(script.input_ids):
        p = params
        if k == 1:
            other = Quadrature.Y if params.squeezed_quadrature is Quadrature.X else Quadrature.X
            p = replace(params, squeezed_quadrature=other)
        specs[sid] = build_input_spec(p, basis)
    return specs


def _source_section(config: RunConfig, basis) -> tuple[dict, list]:
    params = config.source_params()
    spec = build_input_spec(params, basis)
    occupancy = [mode_occupancy(params, basis, i) for i in range(basis.n_modes)]
    normal, full = squeezed_variance(params)
    section = {
        "squeezed_quadrature": params.squeezed_quadrature.value,
        "normally_ordered_variance": normal,
        "full_variance": full,
        "modes": source_table(spec, occupancy),
    }
    return section, list(spec.notes)


def _config_echo(config: RunConfig) -> dict:
    return config.to_dict()


def cmd_kernel(config: RunConfig, flags: Flags) -> int:
    out = _Outputs(config, flags.figures)
    kcfg = config.kernel_config()
    wk = compute_write_kernel(kcfg)
    fck = compute_full_cycle(wk)
    t = wk.t_grid.nodes
    at_zero = write_kernel_values(t, [0.0], kcfg.n_inner)[:, 0]
    diagnostics = {
        "z0_max_abs_error": float(np.max(np.abs(at_zero - np.sin(t)))),
        "full_cycle_asymmetry": float(np.max(np.abs(fck.values - fck.values.T))),
    }
    notes = ["write kernel integrates t' over [0, t]"]
    if flags.debug:
        residual = kernel_imaginary_residual(kcfg)
        diagnostics["imaginary_residual"] = residual
        notes.append("imaginary part of the write-kernel integrand checked on the full grid")
        if residual > 1e-10:
            raise ArithmeticError(f"write kernel imaginary residual {residual:.3g} exceeds 1e-10")
    z = wk.z_grid.nodes
    out.csv("kernel.csv", ("t", "z", "g_ab"), ((t[i], z[j], wk.values[i, j]) for i in range(len(t)) for j in range(len(z))))
    out.csv(
        "full_cycle.csv",
        ("t", "t_prime", "g"),
        ((t[i], t[j], fck.values[i, j]) for i in range(len(t)) for j in range(len(t))),
    )
    bundle = ReportBundle("kernel", _config_echo(config), {"kernel": diagnostics}, notes)
    out.json(bundle)
    out.figure("kernel.png", "plot_write_kernel", wk)
    return EXIT_OK


def cmd_schmidt(config: RunConfig, flags: Flags) -> int:
    out = _Outputs(config, flags.figures)
    wk, fck, basis = solve(config.kernel_config(), rank_tol=config.grid.rank_tol)
    phi0_sq = _phi0_sq(basis)
    out.csv("schmidt.csv", ("i", "lambda", "mu", "phi0_sq"), schmidt_rows(basis, phi0_sq))
    t, z = basis.t_grid.nodes, basis.z_grid.nodes
    out.csv("phi.csv", ("t", "i", "phi"), ((t[k], i + 1, basis.phi[k, i]) for i in range(basis.n_modes) for k in range(len(t))))
    out.csv("g.csv", ("z", "i", "g"), ((z[k], i + 1, basis.g[k, i]) for i in range(basis.n_modes) for k in range(len(z))))
    sections = {
        "schmidt": schmidt_table(basis, phi0_sq),
        "schmidt_diagnostics": _schmidt_diagnostics(fck, basis, phi0_sq),
    }
    out.json(ReportBundle("schmidt", _config_echo(config), sections))
    out.figure("schmidt.png", "plot_schmidt_modes", basis)
    return EXIT_OK


def cmd_input(config: RunConfig, flags: Flags) -> int:
    out = _Outputs(config, flags.figures)
    _, _, basis = solve(config.kernel_config(), rank_tol=config.grid.rank_tol)
    phi0_sq = _phi0_sq(basis)
    source, notes = _source_section(config, basis)
    out.csv(
        "source.csv",
        ("i", "occupancy", "mean_x", "mean_y", "var_x", "var_y"),
        ((m["i"], m["occupancy"], m["mean_x"], m["mean_y"], m["var_x"], m["var_y"]) for m in source["modes"]),
    )
    sections = {"schmidt": schmidt_table(basis, phi0_sq), "source": source}
    out.json(ReportBundle("input", _config_echo(config), sections, notes))
    return EXIT_OK


def _oracle_section(config: RunConfig, basis):
    o = config.oracle
    if o.mode > basis.n_modes:
        raise ConfigError(f"[oracle] mode: only {basis.n_modes} Schmidt modes retained, got {o.mode}")
    grid = orc.PdeGrid(o.n_t, o.n_z, config.grid.t_w, config.grid.l)
    backward = o.retrieval == "backward"
    report = orc.compare_with_kernel(grid, basis, mode=o.mode - 1, backward=backward)
    section = report.to_dict()
    section["retrieval"] = o.retrieval
    written = orc.integrate_write(grid, basis.phi_at(grid.t_w - grid.t, o.mode - 1), DrivingConfig.SYMMETRIC_PLUS)
    section["excitation_balance"] = orc.excitation_balance(written)
    return grid, report, section, written


def cmd_scenario(config: RunConfig, flags: Flags) -> int:
    out = _Outputs(config, flags.figures)
    script = config.script()
    _, fck, basis = solve(config.kernel_config(), rank_tol=config.grid.rank_tol)
    phi0_sq = _phi0_sq(basis)
    source, notes = _source_section(config, basis)
    report = run_scenario(script, basis, _input_specs(config, script, basis))
    out.csv("scenario.csv", ("mode", "metric", "value"), report.rows())
    sections = {
        "schmidt": schmidt_table(basis, phi0_sq),
        "source": source,
        "scenario": report.to_dict(),
    }
    if config.oracle.enabled:
        _, oracle_report, sections["oracle"], _ = _oracle_section(config, basis)
        out.csv("oracle.csv", ("case", "rel_l2_error", "order"), oracle_report.rows())
    notes = notes + list(report.notes)
    out.json(ReportBundle("scenario", _config_echo(config), sections, notes))
    out.figure("scenario.png", "plot_scenario", report)
    return EXIT_OK


def cmd_oracle(config: RunConfig, flags: Flags) -> int:
    out = _Outputs(config, flags.figures)
    _, _, basis = solve(config.kernel_config(), rank_tol=config.grid.rank_tol)
    grid, report, section, written = _oracle_section(config, basis)
    out.csv("oracle.csv", ("case", "rel_l2_error", "order"), report.rows())
    if flags.fields:
        out.csv("fields.csv", ("t", "z", "a", "c", "b1", "b2"), written.rows())
    notes = [f"{config.oracle.retrieval} retrieval; trapezoidal box scheme"]
    out.json(ReportBundle("oracle", _config_echo(config), {"oracle": section}, notes))
    if out.figures:
        mode = config.oracle.mode - 1
        lam = float(basis.lambdas[mode])
        backward = config.oracle.retrieval == "backward"
        a_out = orc.integrate_read(grid, written.b_plus[-1], DrivingConfig.SYMMETRIC_PLUS, backward=backward)
        expected = math.sqrt(lam) * basis.phi_at(grid.t, mode)
        out.figure("oracle.png", "plot_oracle", grid.t, a_out, expected)
    return EXIT_OK


def cmd_sweep(config: RunConfig, flags: Flags) -> int:
    if flags.param not in SWEEP_PARAMS:
        raise ConfigError(f"--param must be one of {sorted(SWEEP_PARAMS)}, got {flags.param!r}")
    if flags.start is None or flags.stop is None:
        raise ConfigError("--from and --to are required for a sweep")
    if flags.steps < 1:
        raise ConfigError(f"--steps must be >= 1, got {flags.steps}")
    out = _Outputs(config, flags.figures)
    values = np.linspace(flags.start, flags.stop, flags.steps) if flags.steps > 1 else np.array([flags.start])
    section = SWEEP_PARAMS[flags.param]
    rows, table = [], []
    basis = None
    for value in values:
        cfg = replace_value(config, section, flags.param, float(value))
        if basis is None or section == "grid":
            _, _, basis = solve(cfg.kernel_config(), rank_tol=cfg.grid.rank_tol)
            phi0_sq = _phi0_sq(basis)
        spec = build_input_spec(cfg.source_params(), basis)
        for i in range(basis.n_modes):
            row = (flags.param, float(value), i + 1, basis.lambdas[i], phi0_sq[i], spec.var_x[i], spec.var_y[i])
            rows.append(row)
            table.append(dict(zip(("param", "value", "i", "lambda", "phi0_sq", "var_x", "var_y"), row)))
    out.csv("sweep.csv", ("param", "value", "i", "lambda", "phi0_sq", "var_x", "var_y"), rows)
    sweep = {"param": flags.param, "from": flags.start, "to": flags.stop, "steps": flags.steps, "rows": table}
    out.json(ReportBundle("sweep", _config_echo(config), {"sweep": sweep}))
    if out.figures:
        out.figure("sweep.png", "plot_sweep", [r[1:5] for r in rows], flags.param)
    return EXIT_OK


COMMANDS = {
    "kernel": cmd_kernel,
    "schmidt": cmd_schmidt,
    "input": cmd_input,
    "scenario": cmd_scenario,
    "oracle": cmd_oracle,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", type=Path, help="configuration file ([section] key = value)")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE", help="override one key")
    common.add_argument("-o", "--output", help="output directory (overrides [output] directory)")
    common.add_argument("--formats", help="comma-separated subset of csv,json")
    common.add_argument("--figures", action="store_true", help="also render PNG figures (needs matplotlib)")
    common.add_argument("--debug", action="store_true", help="extra kernel assertions and debug logging")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="tripod-mzi", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("kernel", parents=[common], help="write and full-cycle kernels")
    sub.add_parser("schmidt", parents=[common], help="Schmidt decomposition")
    sub.add_parser("input", parents=[common], help="per-mode input pulse moments")
    sub.add_parser("scenario", parents=[common], help="run a write/read scenario")
    p_or = sub.add_parser("oracle", parents=[common], help="PDE cross-check of the kernel")
    p_or.add_argument("--fields", action="store_true", help="dump field snapshots of the write run")
    p_sw = sub.add_parser("sweep", parents=[common], help="sweep t_w, l or mu")
    p_sw.add_argument("--param", required=True, choices=sorted(SWEEP_PARAMS))
    p_sw.add_argument("--from", dest="start", type=float, required=True)
    p_sw.add_argument("--to", dest="stop", type=float, required=True)
    p_sw.add_argument("--steps", type=int, default=10)
    return parser


def _load_config(args) -> RunConfig:
    lines = []
    if args.config is not None:
        lines = args.config.read_text(encoding="utf-8").splitlines()
    overrides = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        section, dot, name = key.strip().partition(".")
        if not sep or not dot:
            raise ConfigError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        overrides.setdefault(section.strip(), []).append(f"{name.strip()} = {value.strip()}")
    if args.output:
        overrides.setdefault("output", []).append(f"directory = {args.output}")
    if args.formats:
        overrides.setdefault("output", []).append(f"formats = {args.formats}")
    # parse the file alone first so its errors carry the file's line numbers
    base = parse_config("\n".join(lines))
    if not overrides:
        return base
    try:
        return parse_config(_merge(lines, overrides))
    except ConfigError as exc:
        if exc.line is not None and exc.line > len(lines):
            raise ConfigError(f"{exc.message} (command-line override)") from None
        raise


def _merge(lines, overrides) -> str:
    out, section = [], None
    drop = {(s, ln.partition("=")[0].strip().lower()) for s, items in overrides.items() for ln in items}
    for raw in lines:
        stripped = raw.strip()
        if stripped.startswith("["):
            section = stripped.strip("[]").strip().lower()
        elif "=" in stripped and not stripped.startswith(("#", ";")):
            if (section, stripped.partition("=")[0].strip().lower()) in drop:
                continue
        out.append(raw)
    for s, items in overrides.items():
        out.append(f"[{s}]")
        out.extend(items)
    return "\n".join(out)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.DEBUG if args.debug else logging.INFO if args.verbose else logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    flags = Flags(
        debug=args.debug,
        figures=args.figures,
        fields=getattr(args, "fields", False),
        param=getattr(args, "param", None),
        start=getattr(args, "start", None),
        stop=getattr(args, "stop", None),
        steps=getattr(args, "steps", 10),
    )
    try:
        config = _load_config(args)
        log.debug("threads capped by %s", THREADS_ENV)
        return COMMANDS[args.command](config, flags)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ImportError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ArithmeticError, np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, KeyError, IndexError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
