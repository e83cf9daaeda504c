"""Batch front end: config-driven experiments emitting CSV (and SVG) files.

Commands
--------
density    surface-density table plus its structural property report
profiles   normalized optimal profiles for a list of openings
fk-plot    truncated potential on a fine grid with the cap breakpoint marked
bar        phase-field bar sweep against the limit model
regime     indexed-family study against its predicted limit density
oracle     grid-refined geodesic values (cross-check route)

Configs are INI files with typed keys validated against a per-command
schema; unknown sections or keys are rejected.  All outputs are pure
functions of the config (fixed multi-starts, no randomness), floats are
written with 12 significant digits, so identical configs give
byte-identical files.  The exit code is 0 only when no hard property
violation and no non-converged flag occurred.
"""

from __future__ import annotations

import argparse
import configparser
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from . import bar1d, cell_solver, geodesic, limit_model, regimes
from .potentials import (
    Custom,
    DamagePotential,
    DugdaleModified,
    GriffithScaled,
    PowerLaw,
    Prototype,
    truncated,
)

_FMT = limit_model._fmt


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------

def _floats(text: str):
    return tuple(float(tok) for tok in text.replace(",", " ").split())


_POTENTIAL_SCHEMA = {
    "family": str,
    "ell": float,
    "a": float,
    "p": float,
    "kappa": float,
    "samples_s": _floats,
    "samples_f": _floats,
}

_SOLVER_SCHEMA = {
    "nodes_per_unit": int,
    "max_iters": int,
    "tol_energy": float,
    "patience": int,
    "t_start": float,
    "t_growth": float,
    "t_stop_rel": float,
    "t_max_steps": int,
    "beta_clamp": float,
    "table_tol": float,
}

_SCHEMAS = {
    "density": {
        "potential": _POTENTIAL_SCHEMA,
        "grid": {"s_values": _floats, "s_max": float, "s_count": int},
        "solver": _SOLVER_SCHEMA,
    },
    "profiles": {
        "potential": _POTENTIAL_SCHEMA,
        "profiles": {"s_values": _floats, "source": str},
        "solver": _SOLVER_SCHEMA,
        "oracle": {"n_alpha": int, "n_beta": int, "stencil": int, "square": bool},
    },
    "fk-plot": {
        "potential": _POTENTIAL_SCHEMA,
        "fkplot": {"epsilon": float, "s_count": int},
    },
    "bar": {
        "potential": _POTENTIAL_SCHEMA,
        "bar": {
            "epsilons": _floats,
            "stretches": _floats,
            "tol": float,
            "max_rounds": int,
            "eta": float,
            "mesh_nodes": int,
            "table_points": int,
        },
        "solver": _SOLVER_SCHEMA,
    },
    "regime": {
        "regime": {
            "kind": str,
            "j_count": int,
            "ell": float,
            "a_growth": float,
            "p": float,
            "kappa": float,
            "ell_growth": float,
            "s_values": _floats,
        },
        "solver": _SOLVER_SCHEMA,
    },
    "oracle": {
        "potential": _POTENTIAL_SCHEMA,
        "grid": {"s_values": _floats, "s_max": float, "s_count": int},
        "oracle": {
            "n_alpha": int,
            "n_beta": int,
            "stencil": int,
            "square": bool,
            "refine_factor": float,
            "refine_tol": float,
            "max_refinements": int,
            "dump_paths": bool,
        },
    },
}


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def load_config(path: str, command: str) -> dict:
    """Parse and validate an experiment config against the command schema."""
    schema = _SCHEMAS[command]
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ValueError(f"config file {path!r} not found or unreadable")
    config: dict = {}
    for section in parser.sections():
        if section not in schema:
            raise ValueError(f"unknown section [{section}] for command {command}")
        config[section] = {}
        for key, raw in parser.items(section):
            if key not in schema[section]:
                raise ValueError(f"unknown key {key!r} in section [{section}]")
            caster = schema[section][key]
            if caster is bool:
                config[section][key] = _parse_bool(raw)
            else:
                config[section][key] = caster(raw)
    return config


def build_potential(section: dict) -> DamagePotential:
    family = section.get("family", "prototype")
    ell = section.get("ell", 1.0)
    if family == "prototype":
        return Prototype(ell)
    if family == "griffith":
        return GriffithScaled(ell)
    if family == "dugdale":
        return DugdaleModified(Prototype(ell), section["a"])
    if family == "powerlaw":
        return PowerLaw(section["p"], section.get("kappa", 1.0))
    if family == "custom":
        return Custom(section["samples_s"], section["samples_f"])
    raise ValueError(f"unknown potential family {family!r}")


def _solver_options(config: dict, tol_override: float | None) -> cell_solver.SolverOptions:
    opts = cell_solver.SolverOptions(**config.get("solver", {}))
    if tol_override is not None:
        opts = replace(opts, table_tol=tol_override)
    return opts


def _s_grid(section: dict) -> np.ndarray:
    if "s_values" in section:
        return np.asarray(section["s_values"], dtype=float)
    s_max = section.get("s_max", 2.0)
    s_count = section.get("s_count", 41)
    return np.linspace(0.0, s_max, s_count)


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_FMT(x) for x in row) + "\n")


def _write_svg(path: Path, series, title: str, size=(640, 480)) -> None:
    """Minimal deterministic line chart: one polyline per named series."""
    w, h = size
    pad = 50.0
    xs_all = np.concatenate([np.asarray(xs, float) for _, xs, _ in series])
    ys_all = np.concatenate([np.asarray(ys, float) for _, _, ys in series])
    x0, x1 = float(np.min(xs_all)), float(np.max(xs_all))
    y0, y1 = float(np.min(ys_all)), float(np.max(ys_all))
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    colors = ("#1b6ca8", "#c23b22", "#2e8540", "#8661c5", "#b7791f", "#3c6e71")

    def sx(x):
        return pad + (x - x0) / (x1 - x0) * (w - 2 * pad)

    def sy(y):
        return h - pad - (y - y0) / (y1 - y0) * (h - 2 * pad)

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
        f'viewBox="0 0 {w} {h}">',
        f'<rect width="{w}" height="{h}" fill="white"/>',
        f'<text x="{w / 2:.1f}" y="20" text-anchor="middle" '
        f'font-family="monospace" font-size="13">{title}</text>',
        f'<line x1="{pad}" y1="{h - pad}" x2="{w - pad}" y2="{h - pad}" '
        'stroke="black" stroke-width="1"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{h - pad}" '
        'stroke="black" stroke-width="1"/>',
    ]
    for x, anchor in ((x0, "start"), (x1, "end")):
        lines.append(
            f'<text x="{sx(x):.1f}" y="{h - pad + 16:.1f}" text-anchor="{anchor}" '
            f'font-family="monospace" font-size="11">{_FMT(float(x))}</text>'
        )
    for y in (y0, y1):
        lines.append(
            f'<text x="{pad - 6:.1f}" y="{sy(y) + 4:.1f}" text-anchor="end" '
            f'font-family="monospace" font-size="11">{_FMT(float(y))}</text>'
        )
    for idx, (name, xs, ys) in enumerate(series):
        pts = " ".join(
            f"{sx(float(x)):.2f},{sy(float(y)):.2f}" for x, y in zip(xs, ys)
        )
        color = colors[idx % len(colors)]
        lines.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
            f'points="{pts}"/>'
        )
        lines.append(
            f'<text x="{w - pad + 4:.1f}" y="{pad + 14 * idx + 10:.1f}" '
            f'font-family="monospace" font-size="11" fill="{color}">{name}</text>'
        )
    lines.append("</svg>")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_density(config, out: Path, args) -> int:
    pot = build_potential(config.get("potential", {}))
    opts = _solver_options(config, args.tol)
    grid = _s_grid(config.get("grid", {}))
    table = cell_solver.build_density_table(pot, grid, opts)
    table.to_csv(out / "density.csv")

    checks = limit_model.check_table_properties(table, pot.ell, opts.table_tol)
    rows = [
        (name, int(rec["applicable"]), int(rec["passed"]), rec["margin"])
        for name, rec in checks.items()
        if name != "all_passed"
    ]
    _write_csv(out / "density_properties.csv",
               ("check", "applicable", "passed", "margin"), rows)
    if args.svg:
        _write_svg(out / "density.svg",
                   [("g(s)", table.s, table.value)], "surface density")

    hard_violation = not checks["all_passed"]
    flagged = any(not d.get("converged", True) for d in table.diagnostics)
    return 1 if (hard_violation or flagged) else 0


def _chord_parameter(path: np.ndarray) -> np.ndarray:
    seg = np.sqrt(np.sum(np.diff(path, axis=0) ** 2, axis=1))
    total = np.concatenate([[0.0], np.cumsum(seg)])
    return total / total[-1] if total[-1] > 0 else total


def cmd_profiles(config, out: Path, args) -> int:
    pot = build_potential(config.get("potential", {}))
    opts = _solver_options(config, args.tol)
    sec = config.get("profiles", {})
    source = sec.get("source", "best")
    s_values = sec.get("s_values", (0.1, 0.3, 0.5, 1.0, 1.5))
    osec = config.get("oracle", {})
    report = []
    svg_series = []
    flagged = False
    for s in s_values:
        if s == 0.0:
            _write_csv(out / "profile_s0.csv",
                       ("t", "alpha_over_s", "beta"), [(0.0, 0.0, 1.0)])
            report.append((0.0, "degenerate", 0.0, 0.0, 1, 1.0, 1.0))
            continue
        cell = cell_solver.surface_density(pot, s, opts)
        flagged = flagged or not cell.diagnostics["converged"]
        if osec.get("square", True):
            grid = geodesic.GeodesicGrid.square_for(
                s, osec.get("n_beta", 512), osec.get("stencil", 16)
            )
        else:
            grid = geodesic.GeodesicGrid(
                osec.get("n_alpha", 512), osec.get("n_beta", 512),
                osec.get("stencil", 16),
            )
        geo = geodesic.geodesic_distance(pot, s, grid)
        if source == "cell" or (source == "best" and cell.value <= geo.value):
            prof = cell.profile
            ts = prof.grid / prof.T
            a_over_s = prof.alpha / s
            beta = prof.beta
            chosen = "cell"
            path = np.column_stack([prof.alpha, prof.beta])
        else:
            ts = _chord_parameter(geo.path)
            a_over_s = geo.path[:, 0] / s
            beta = geo.path[:, 1]
            chosen = "oracle"
            path = geo.path
        contain = geodesic.interior_containment(path, s)
        name = out / f"profile_s{_FMT(float(s))}.csv"
        _write_csv(name, ("t", "alpha_over_s", "beta"),
                   list(zip(ts, a_over_s, beta)))
        svg_series.append((f"s={_FMT(float(s))}", a_over_s, beta))
        report.append(
            (float(s), chosen, cell.value, geo.value,
             int(contain["inside"]), contain["beta_min"], contain["beta_max"])
        )
    _write_csv(out / "profiles_report.csv",
               ("s", "source", "value_cell", "value_oracle",
                "inside", "beta_min", "beta_max"), report)
    if args.svg and svg_series:
        _write_svg(out / "profiles.svg", svg_series, "optimal profiles")
    return 1 if flagged else 0


def cmd_fk_plot(config, out: Path, args) -> int:
    pot = build_potential(config.get("potential", {}))
    sec = config.get("fkplot", {})
    eps = sec.get("epsilon", 0.04)
    count = sec.get("s_count", 401)
    ss = np.linspace(0.0, 1.0, count)
    root_eps = np.sqrt(eps)

    def capgap(s):
        return root_eps * float(pot._f(np.asarray(s))) - 1.0

    breakpoint_s = None
    if capgap(1.0 - 1e-12) > 0 > capgap(0.0):
        breakpoint_s = float(brentq(capgap, 0.0, 1.0 - 1e-12, xtol=1e-14))
        ss = np.unique(np.concatenate([ss, [breakpoint_s]]))
    vals = truncated(pot, eps, ss)
    rows = [
        (float(s), float(v), int(breakpoint_s is not None and s == breakpoint_s))
        for s, v in zip(ss, vals)
    ]
    _write_csv(out / "fk.csv", ("s", "value", "marker"), rows)
    if args.svg:
        _write_svg(out / "fk.svg", [("f_eps", ss, vals)], "truncated potential")
    return 0


def _bar_cell(job):
    pot, eps, t, n_nodes, tol, max_rounds, eta = job
    template = bar1d.PhaseFieldState.pristine(eps, t, n_nodes, eta=eta)
    res = bar1d.alternate_minimize(template, pot, tol=tol, max_rounds=max_rounds)
    return res.energy, res.rounds, res.converged


def cmd_bar(config, out: Path, args) -> int:
    pot = build_potential(config.get("potential", {}))
    opts = _solver_options(config, args.tol)
    sec = config.get("bar", {})
    eps_list = sec.get("epsilons", (0.1, 0.03, 0.01))
    t_list = sec.get("stretches", (0.1, 0.3, 0.6, 1.0, 2.0))
    tol = sec.get("tol", 1e-7)
    max_rounds = sec.get("max_rounds", 600)
    eta = sec.get("eta", 0.0)
    mesh_nodes = sec.get("mesh_nodes")
    table_points = sec.get("table_points", 41)

    t_max = max(t_list) if t_list else 0.0
    grid = np.linspace(0.0, max(t_max, 1e-6), table_points)
    gtable = cell_solver.build_density_table(pot, grid, opts)

    jobs = []
    for eps in eps_list:
        n_nodes = mesh_nodes if mesh_nodes is not None else bar1d.mesh_nodes_for(eps)
        if (n_nodes - 1) < 20.0 / eps:
            raise ValueError(f"mesh of {n_nodes} nodes cannot resolve eps={eps:g}")
        for t in t_list:
            jobs.append((pot, eps, float(t), n_nodes, tol, max_rounds, eta))
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            outcomes = list(pool.map(_bar_cell, jobs))
    else:
        outcomes = [_bar_cell(job) for job in jobs]

    rows = []
    flagged = False
    for (pot_, eps, t, n_nodes, *_), (energy, rounds, converged) in zip(jobs, outcomes):
        limit, _ = limit_model.limit_bar_energy(gtable, pot.ell, t)
        gap = abs(energy - limit)
        flags = "" if converged else "max-rounds"
        flagged = flagged or not converged
        rows.append((eps, t, energy, limit, gap, rounds, flags))
    _write_csv(out / "bar.csv",
               ("eps", "t", "energy", "limit_energy", "gap", "rounds", "flags"),
               rows)
    if args.svg:
        series = []
        for eps in eps_list:
            ts = [r[1] for r in rows if r[0] == eps]
            es = [r[2] for r in rows if r[0] == eps]
            series.append((f"eps={_FMT(float(eps))}", ts, es))
        _write_svg(out / "bar.svg", series, "bar energies")
    return 1 if flagged else 0


def cmd_regime(config, out: Path, args) -> int:
    opts = _solver_options(config, args.tol)
    sec = config.get("regime", {})
    kind = sec.get("kind", "dugdale")
    j_count = sec.get("j_count", 6)
    ell = sec.get("ell", 1.0)
    s_values = sec.get("s_values")
    if kind == "dugdale":
        growth = sec.get("a_growth", 2.0)
        seq = regimes.build_sequence(
            "dugdale", ell=ell, a_values=[growth**j for j in range(1, j_count + 1)]
        )
        default_grid = np.concatenate([[0.0], np.linspace(0.1, 2.0, 14)])
    elif kind == "powerlaw":
        seq = regimes.build_sequence(
            "powerlaw", p=sec.get("p", 3.0), kappa=sec.get("kappa", 1.0),
            j_values=list(range(1, j_count + 1)),
        )
        default_grid = np.concatenate([[0.0], np.geomspace(0.05, 2.0, 10)])
    elif kind == "griffith":
        growth = sec.get("ell_growth", 4.0)
        seq = regimes.build_sequence(
            "griffith", ell_values=[growth**j for j in range(1, j_count + 1)]
        )
        default_grid = np.array([0.0, 0.25, 1.0, 4.0])
    else:
        raise ValueError(f"unknown regime kind {kind!r}")
    grid = np.asarray(s_values, float) if s_values else default_grid

    study = regimes.regime_study(seq, grid, opts)
    rows = []
    for j, tab in zip(study.sequence.indices, study.tables):
        for s, v, pred in zip(tab.s, tab.value, study.predicted):
            rows.append((j, float(s), float(v), float(pred), float(v - pred)))
    _write_csv(out / "regime.csv", ("j", "s", "value", "predicted", "gap"), rows)
    summary = [
        ("kind", kind),
        ("monotone_violations", study.monotone_violations),
    ]
    summary += [
        (f"sup_gap_j{j}", g) for j, g in zip(study.sequence.indices, study.sup_gaps)
    ]
    _write_csv(out / "regime_summary.csv", ("key", "value"), summary)
    if args.svg:
        series = [
            (f"j={j}", tab.s, tab.value)
            for j, tab in zip(study.sequence.indices, study.tables)
        ]
        series.append(("limit", study.s_grid, study.predicted))
        _write_svg(out / "regime.svg", series, f"{kind} family densities")
    flagged = not study.monotone_ok or any(
        not d.get("converged", True) for tab in study.tables for d in tab.diagnostics
    )
    return 1 if flagged else 0


def cmd_oracle(config, out: Path, args) -> int:
    pot = build_potential(config.get("potential", {}))
    grid_sec = config.get("grid", {})
    osec = config.get("oracle", {})
    ss = _s_grid(grid_sec)
    rows = []
    flagged = False
    for s in ss:
        if osec.get("square", True):
            g0 = geodesic.GeodesicGrid.square_for(
                max(float(s), 1e-6), osec.get("n_beta", 256), osec.get("stencil", 16)
            )
        else:
            g0 = geodesic.GeodesicGrid(
                osec.get("n_alpha", 256), osec.get("n_beta", 256),
                osec.get("stencil", 16),
            )
        res = geodesic.refine_until_stable(
            pot, float(s), g0,
            factor=osec.get("refine_factor", 1.5),
            tol=osec.get("refine_tol", 0.01),
            max_refinements=osec.get("max_refinements", 5),
        )
        flagged = flagged or not res.stable
        rows.append((float(s), res.value, len(res.history), int(res.stable)))
        if osec.get("dump_paths", False):
            _write_csv(out / f"oracle_path_s{_FMT(float(s))}.csv",
                       ("alpha", "beta"), [tuple(p) for p in res.path])
    _write_csv(out / "oracle.csv", ("s", "value", "refinements", "stable"), rows)
    if args.svg:
        _write_svg(out / "oracle.svg",
                   [("g(s)", [r[0] for r in rows], [r[1] for r in rows])],
                   "geodesic surface density")
    return 1 if flagged else 0


_COMMANDS = {
    "density": cmd_density,
    "profiles": cmd_profiles,
    "fk-plot": cmd_fk_plot,
    "bar": cmd_bar,
    "regime": cmd_regime,
    "oracle": cmd_oracle,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cohesivefrac",
        description="cohesive fracture density experiments (CSV-first batch tool)",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="experiment config (INI)")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--tol", type=float, default=None,
                       help="override the table tolerance")
        p.add_argument("--svg", action="store_true",
                       help="also emit simple SVG line charts")
    args = parser.parse_args(argv)

    try:
        config = load_config(args.config, args.command)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return _COMMANDS[args.command](config, out, args)


if __name__ == "__main__":
    sys.exit(main())
