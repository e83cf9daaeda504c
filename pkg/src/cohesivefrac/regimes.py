"""Regime families and their limiting surface densities.

Three ways of letting the potential family vary with its index recover
classical fracture models in the limit: stiffening the low-damage
response linearly (Dugdale: density min(1, ell*s)), capping a power-law
potential by diverging ramps (density with s^(2/(p+1)) growth at small
openings), and scaling the prototype coefficient up (Griffith: unit
density for every positive opening).  The studies here tabulate the
member densities with the cell solver and measure the approach to the
predicted limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .cell_solver import SolverOptions, build_density_table
from .limit_model import DensityTable
from .potentials import (
    DamagePotential,
    DugdaleModified,
    GriffithScaled,
    PointwiseMin,
    PowerLaw,
    Prototype,
)

__all__ = [
    "RegimeSequence",
    "build_sequence",
    "RegimeStudy",
    "regime_study",
    "PowerLawTable",
    "powerlaw_density_table",
    "SmallOpeningReport",
    "powerlaw_small_opening_check",
    "dugdale_plateau_level",
    "powerlaw_upper_construction",
]

_MONOTONE_PROBE = np.linspace(0.0, 0.999, 200)


@dataclass(frozen=True)
class RegimeSequence:
    """Indexed potential family together with its predicted limit density."""

    kind: str
    indices: tuple
    members: tuple
    scaling: dict
    predicted: str

    def predicted_values(self, s, theta: DensityTable | None = None):
        arr = np.asarray(s, dtype=float)
        if self.kind == "dugdale":
            ell = self.scaling["ell"]
            return np.minimum(1.0, ell * arr)
        if self.kind == "griffith":
            return np.where(arr > 0.0, 1.0, 0.0)
        if theta is None:
            raise ValueError("power-law limits need the reference density table")
        return theta.interp(arr)


def build_sequence(kind: str, **params) -> RegimeSequence:
    """Construct a validated regime family.

    dugdale:  base prototype coefficient ``ell`` stiffened by ``a_values``
              (strictly increasing); limit density min(1, ell*s).
    powerlaw: capped power-law members min(j*s/(1-s), psi_p) for
              ``j_values``; limit density is the power-law table.
    griffith: prototype coefficients ``ell_values`` increasing to infinity;
              limit density is the indicator of positive openings.

    Members must be pointwise nondecreasing in the index; violations are
    rejected.
    """
    if kind == "dugdale":
        ell = float(params.get("ell", 1.0))
        a_values = tuple(float(a) for a in params["a_values"])
        if any(a2 <= a1 for a1, a2 in zip(a_values, a_values[1:])) or a_values[0] <= 0:
            raise ValueError("stiffening slopes must be positive and increasing")
        base = Prototype(ell)
        members = tuple(DugdaleModified(base, a) for a in a_values)
        indices = tuple(range(1, len(a_values) + 1))
        scaling = {"ell": ell, "a": a_values}
        predicted = "min(1, ell*s)"
    elif kind == "powerlaw":
        p = float(params["p"])
        kappa = float(params.get("kappa", 1.0))
        j_values = tuple(float(j) for j in params["j_values"])
        if any(j2 <= j1 for j1, j2 in zip(j_values, j_values[1:])) or j_values[0] <= 0:
            raise ValueError("ramp coefficients must be positive and increasing")
        psi = PowerLaw(p, kappa)
        members = tuple(PointwiseMin(Prototype(j), psi) for j in j_values)
        indices = tuple(range(1, len(j_values) + 1))
        scaling = {"p": p, "kappa": kappa, "j": j_values}
        predicted = "powerlaw-table"
    elif kind == "griffith":
        ell_values = tuple(float(e) for e in params["ell_values"])
        if any(e2 <= e1 for e1, e2 in zip(ell_values, ell_values[1:])) or ell_values[0] <= 0:
            raise ValueError("coefficients must be positive and increasing")
        members = tuple(GriffithScaled(e) for e in ell_values)
        indices = tuple(range(1, len(ell_values) + 1))
        scaling = {"ell": ell_values}
        predicted = "indicator(s>0)"
    else:
        raise ValueError(f"unknown regime kind {kind!r}")

    for a, b in zip(members, members[1:]):
        if np.any(a._f(_MONOTONE_PROBE) > b._f(_MONOTONE_PROBE) * (1 + 1e-12)):
            raise ValueError("family members must be pointwise nondecreasing")
    return RegimeSequence(kind, indices, members, scaling, predicted)


@dataclass(frozen=True)
class RegimeStudy:
    sequence: RegimeSequence
    s_grid: np.ndarray
    tables: tuple
    predicted: np.ndarray
    sup_gaps: tuple
    monotone_ok: bool
    monotone_violations: int
    theta_table: DensityTable | None = None


def regime_study(
    seq: RegimeSequence,
    s_grid,
    opts: SolverOptions | None = None,
) -> RegimeStudy:
    """Tabulate member densities and their gap to the predicted limit.

    Reports the sup over the grid of |g_j - limit| per index and checks
    the pointwise family monotonicity g_j <= g_{j+1} + 2*tol.
    """
    opts = opts or SolverOptions()
    grid = np.asarray(s_grid, dtype=float)
    tables = tuple(build_density_table(pot, grid, opts) for pot in seq.members)

    theta = None
    if seq.kind == "powerlaw":
        theta = powerlaw_density_table(
            seq.scaling["p"], seq.scaling["kappa"], grid, opts
        ).table
    predicted = seq.predicted_values(grid, theta)

    sup_gaps = tuple(
        float(np.max(np.abs(tab.value - predicted))) for tab in tables
    )
    violations = 0
    for a, b in zip(tables, tables[1:]):
        violations += int(np.count_nonzero(a.value > b.value + 2 * opts.table_tol))
    return RegimeStudy(
        sequence=seq,
        s_grid=grid,
        tables=tables,
        predicted=np.asarray(predicted),
        sup_gaps=sup_gaps,
        monotone_ok=violations == 0,
        monotone_violations=violations,
        theta_table=theta,
    )


@dataclass(frozen=True)
class PowerLawTable:
    table: DensityTable
    holder_constant: float  # fitted c in value <= c * s^(2/(p+1)), reported only


def powerlaw_density_table(
    p: float,
    kappa: float,
    s_grid,
    opts: SolverOptions | None = None,
) -> PowerLawTable:
    """Density table for the power-law potential, with the fitted growth constant."""
    opts = opts or SolverOptions()
    table = build_density_table(PowerLaw(p, kappa), s_grid, opts)
    pos = table.s > 0
    if np.any(pos):
        c = float(np.max(table.value[pos] / table.s[pos] ** (2.0 / (p + 1.0))))
    else:
        c = 0.0
    return PowerLawTable(table, c)


def powerlaw_upper_construction(p: float, kappa: float, s, lam: float = 1.0):
    """Explicit flat-dip upper bound for the power-law density.

    Dip level 1 - (lam*s)^(1/(p+1)) crossed linearly; defined while the dip
    stays positive.
    """
    psi = PowerLaw(p, kappa)
    arr = np.asarray(s, dtype=float)
    depth = (lam * arr) ** (1.0 / (p + 1.0))
    if np.any(depth >= 1.0):
        raise ValueError("construction needs (lam*s)^(1/(p+1)) < 1")
    level = 1.0 - depth
    out = depth * psi._f(level) * arr + depth**2
    return out if isinstance(s, np.ndarray) else float(out)


@dataclass(frozen=True)
class SmallOpeningReport:
    p: float
    kappa: float
    s_values: tuple
    ratios: tuple
    lower: float
    upper: float
    stable: bool
    passed: bool


def powerlaw_small_opening_check(
    p: float,
    kappa: float,
    s_values,
    opts: SolverOptions | None = None,
    rel_tol: float = 0.1,
) -> SmallOpeningReport:
    """Growth-rate window check at small openings.

    The ratio value / s^(2/(p+1)) has a limit as s -> 0 sitting between
    kappa^(2/(p+1)) and the flat-dip constant
    (p+1) / (2^(2/(p+1)) (p-1)^((p-1)/(p+1))) * kappa^(2/(p+1)); the check
    asserts the smallest-opening ratio lies in that window widened by
    rel_tol.  Non-stabilizing ratio sequences are flagged, not failed.
    """
    opts = opts or SolverOptions()
    ss = np.asarray(sorted(float(x) for x in s_values), dtype=float)[::-1]
    if np.any(ss <= 0):
        raise ValueError("small-opening probes must be positive")
    pot = PowerLaw(p, kappa)
    exponent = 2.0 / (p + 1.0)
    ratios = []
    for s in ss:
        val = build_density_table(pot, np.array([0.0, s]), opts).value[-1]
        ratios.append(float(val / s**exponent))
    lower = kappa**exponent
    upper = (
        (p + 1.0)
        / (2.0**exponent * (p - 1.0) ** ((p - 1.0) / (p + 1.0)))
        * kappa**exponent
    )
    stable = True
    if len(ratios) >= 2:
        stable = abs(ratios[-1] - ratios[-2]) <= 0.1 * max(abs(ratios[-1]), 1e-12)
    passed = lower * (1.0 - rel_tol) <= ratios[-1] <= upper * (1.0 + rel_tol)
    return SmallOpeningReport(
        p, kappa, tuple(ss), tuple(ratios), lower, upper, stable, passed
    )


def dugdale_plateau_level(base: DamagePotential, a: float) -> float:
    """Largest damage level where the stiffening ramp meets the base potential.

    Solves a*s = f(s); the returned level rises to 1 as the slope grows and
    (1 - level) * a approaches the base coefficient ell.
    """
    if not (a > 0 and math.isfinite(a)):
        raise ValueError("slope must be a positive finite real")

    def gap(s):
        return a * s - float(base._f(np.asarray(s)))

    probes = np.linspace(1e-6, 1.0 - 1e-9, 4096)
    signs = np.array([gap(s) for s in probes])
    pos = np.nonzero(signs > 0)[0]
    if pos.size == 0:
        raise ValueError("ramp never exceeds the potential; no plateau level")
    i = pos[-1]
    if i == probes.size - 1:
        return float(probes[-1])
    return float(brentq(gap, probes[i], probes[i + 1], xtol=1e-14))
