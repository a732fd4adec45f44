"""Command line: ``varbgk {run,project,check-flux,sweep,compare}``.

Exit status 0 on success, 1 when a check fails, 2 for bad input and 3 when
a run aborts (CFL violation, non-finite state).
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .bgk import CFLError, NonFiniteStateError, run
from .config import ConfigError, RunConfig, initial_density, load_config, parse_config
from .diagnostics import (DiagnosticsRecord, entropy_content, entropy_inequality_from_series,
                          summarize)
from .model import check_nondegeneracy
from .phase_grid import (PhaseGrid, from_macro, macro_density, read_macro_csv, write_kinetic_csv,
                         write_macro_csv)
from .projection import variational_projection
from .reference import MacroField, burgers_riemann_exact, godunov_run, l1_distance

log = logging.getLogger("varbgk")

EXIT_OK, EXIT_CHECK_FAILED, EXIT_BAD_INPUT, EXIT_ABORTED = 0, 1, 2, 3

SWEEP_PARAMS = ("h", "eps", "nx")
SWEEP_COLUMNS = ["param", "value", "status", "l1_reference", "E1", "E2", "E3", "E4",
                 "max_deviation", "item4_excess", "C_flux", "C_alpha",
                 "worst_entropy_violation", "worst_defect_negativity", "domination_failure_count"]


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def reference_field(cfg: RunConfig) -> MacroField | None:
    """Reference macro field at ``t_end`` on the run's spatial grid, if requested."""
    kind = cfg.compare.get("type", "none")
    g, t_end = cfg.grid, cfg.solver.t_end
    if kind == "none":
        return None
    if kind == "burgers_exact":
        ini = cfg.initial
        if t_end <= 0:
            rho = cfg.rho0
        else:
            rho = burgers_riemann_exact(float(ini["rho_l"]), float(ini["rho_r"]), float(ini["x0"]), g.x, t_end)
        return MacroField(g.x_min, g.x_max, rho, t_end, g.boundary)
    factor = int(cfg.compare.get("refine_factor", 4))
    nx_fine = g.nx * factor
    x_fine = g.x_min + (np.arange(nx_fine) + 0.5) * g.dx / factor
    rho_fine = initial_density(cfg.initial, x_fine, g.x_min, g.x_max, cfg.base_dir)
    fine = MacroField(g.x_min, g.x_max, rho_fine, 0.0, g.boundary)
    return godunov_run(cfg.flux, fine, t_end, cfg.solver.cfl).restrict(factor)


def execute_run(cfg: RunConfig, write: bool = True) -> dict:
    """Run one configuration; write its outputs and return the summary."""
    out = cfg.output
    if write:
        (out / "macro").mkdir(parents=True, exist_ok=True)
        _dump_json(cfg.manifest(), out / "run_manifest.json")
    records: list[DiagnosticsRecord] = []
    series = []
    diag_fh = open(out / "diagnostics.jsonl", "w") if write else None

    def sink(state, rec):
        records.append(rec)
        # kinetic entropy eta(v) = v^2/2, eta'(v) = v
        series.append(entropy_content(state, lambda v: v))
        if write:
            k = len(records) - 1
            write_macro_csv(state.grid.x, macro_density(state), out / "macro" / f"macro_{k:05d}.csv")
            diag_fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")

    try:
        final = run(from_macro(cfg.grid, cfg.rho0), cfg.flux, cfg.solver, [sink])
    finally:
        if diag_fh is not None:
            diag_fh.close()

    violation = entropy_inequality_from_series(series).max_increase if len(series) > 1 else 0.0
    summary = summarize(records, cfg.grid.eps, violation)
    summary.update({"t_final": final.t, "n_snapshots": len(records)})
    ref = reference_field(cfg)
    if ref is not None:
        mine = MacroField(cfg.grid.x_min, cfg.grid.x_max, macro_density(final), final.t, cfg.grid.boundary)
        summary["l1_reference"] = l1_distance(mine, ref)
        summary["reference"] = cfg.compare.get("type")
    if write:
        if cfg.raw.get("dump_kinetic", False):
            write_kinetic_csv(final, out / "kinetic_final.csv")
        _dump_json(summary, out / "summary.json")
    return summary


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    summary = execute_run(cfg)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


def read_column_csv(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or set(rows[0]) != {"v", "f"}:
        raise ConfigError(f"{path}: expected header 'v,f'")
    try:
        v = np.array([float(r["v"]) for r in rows])
        f = np.array([float(r["f"]) for r in rows])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: malformed number ({exc})") from None
    if f.min() < 0 or f.max() > 1:
        raise ConfigError(f"{path}: f values must lie in [0, 1]")
    return v, f


def project_column_file(path, eps: float, m_cap: float, out_csv: Path, out_json: Path) -> dict:
    v, f = read_column_csv(path)
    nv = f.size
    dv = m_cap / nv
    if not np.allclose(v, (np.arange(nv) + 0.5) * dv, rtol=0, atol=1e-9 * m_cap):
        raise ConfigError(f"{path}: v must be the {nv} cell centres of [0, {m_cap}]")
    try:
        grid = PhaseGrid(0.0, 1.0, 1, m_cap, nv, eps)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    res = variational_projection(f, grid)
    with open(out_csv, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["v", "pi"])
        w.writerows(zip(map(repr, map(float, v)), map(repr, map(float, res.pi))))
    record = res.to_dict()
    _dump_json(record, out_json)
    return record


def cmd_project(args) -> int:
    src = Path(args.column)
    out_csv = Path(args.out) if args.out else src.with_name(src.stem + "_pi.csv")
    out_json = out_csv.with_suffix(".json")
    record = project_column_file(src, args.eps, args.M, out_csv, out_json)
    print(json.dumps(record, sort_keys=True))
    return EXIT_OK


def cmd_check_flux(args) -> int:
    cfg = load_config(args.config)
    m_bound = float(np.max(np.abs(cfg.rho0))) or cfg.grid.m_cap
    report = check_nondegeneracy(cfg.flux, m_bound, args.directions, args.samples, args.tol)
    print(report)
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def _variant(raw: dict, param: str, value: float) -> dict:
    data = copy.deepcopy(raw)
    if param == "h":
        data["solver"]["h"] = value
    elif param == "eps":
        data["grid"]["eps"] = value
        data["grid"].pop("nv", None)
    else:
        data["grid"]["nx"] = int(value)
    return data


def run_sweep(cfg: RunConfig, param: str, values) -> list[dict]:
    if param not in SWEEP_PARAMS:
        raise ConfigError(f"sweep parameter must be one of {SWEEP_PARAMS}")
    rows = []
    for i, value in enumerate(values):
        data = _variant(cfg.raw, param, value)
        data["output"] = str(cfg.output / f"{param}_{i:02d}")
        row = {"param": param, "value": value}
        try:
            summary = execute_run(parse_config(data, cfg.base_dir))
            row.update({k: summary.get(k, "") for k in SWEEP_COLUMNS[3:]})
            row["status"] = "ok"
        except (ConfigError, CFLError, NonFiniteStateError, ValueError) as exc:
            log.error("variant %s=%s failed: %s", param, value, exc)
            row["status"] = f"failed: {exc}"
        rows.append(row)
    return rows


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    values = [float(v) for v in args.values.split(",") if v.strip()]
    rows = run_sweep(cfg, args.param, values)
    cfg.output.mkdir(parents=True, exist_ok=True)
    table = cfg.output / f"sweep_{args.param}.csv"
    with open(table, "w", newline="") as fh:
        w = csv.DictWriter(fh, SWEEP_COLUMNS)
        w.writeheader()
        w.writerows(rows)
    print(table.read_text(), end="")
    return EXIT_OK if all(r["status"] == "ok" for r in rows) else EXIT_CHECK_FAILED


def cmd_compare(args) -> int:
    xa, ra = read_macro_csv(args.a)
    xb, rb = read_macro_csv(args.b)
    if xa.size != xb.size or not np.allclose(xa, xb):
        raise ConfigError("compare: the two files use different x grids")
    dx = (xa[-1] - xa[0]) / (xa.size - 1) if xa.size > 1 else 1.0
    x_min = xa[0] - dx / 2
    d = l1_distance(MacroField(x_min, x_min + dx * xa.size, ra), MacroField(x_min, x_min + dx * xb.size, rb))
    print(repr(d))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="varbgk", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one configuration")
    r.add_argument("config")
    r.set_defaults(func=cmd_run)

    pr = sub.add_parser("project", help="variational projection of one v,f column")
    pr.add_argument("column")
    pr.add_argument("--eps", type=float, required=True)
    pr.add_argument("--M", type=float, required=True)
    pr.add_argument("--out", help="output v,pi CSV (JSON record written next to it)")
    pr.set_defaults(func=cmd_project)

    c = sub.add_parser("check-flux", help="scan the flux for flat characteristic speeds")
    c.add_argument("config")
    c.add_argument("--directions", type=int, default=64)
    c.add_argument("--samples", type=int, default=1001)
    c.add_argument("--tol", type=float, default=1e-12)
    c.set_defaults(func=cmd_check_flux)

    s = sub.add_parser("sweep", help="run a parameter sweep and tabulate the results")
    s.add_argument("config")
    s.add_argument("--param", choices=SWEEP_PARAMS, required=True)
    s.add_argument("--values", required=True, help="comma separated list")
    s.set_defaults(func=cmd_sweep)

    cm = sub.add_parser("compare", help="L1 distance between two x,rho CSV files")
    cm.add_argument("a")
    cm.add_argument("b")
    cm.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except (CFLError, NonFiniteStateError) as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_ABORTED


if __name__ == "__main__":
    sys.exit(main())
