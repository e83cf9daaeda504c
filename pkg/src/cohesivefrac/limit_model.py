"""Limit-model ingredients: volume density, 1D candidates, density tables.

The effective (sharp-interface) model on a 1D bar stores energy through a
volume density that is quadratic up to slope ell/2 and affine beyond, and
pays for jumps through a surface density table computed elsewhere (cell
solver or geodesic oracle).  Candidates here are piecewise-H1 functions
with finitely many jumps and no diffuse singular part.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "volume_density",
    "Candidate1D",
    "DensityTable",
    "limit_phi_1d",
    "limit_bar_energy",
    "check_table_properties",
]

CSV_COLUMNS = ("s", "value", "solver", "grid", "T", "iterations", "residual")


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.12g}"
    return str(x)


def volume_density(ell: float, t):
    """Stored elastic energy density: t^2 capped into the affine branch.

    Quadratic for t <= ell/2 and ell*t - ell^2/4 beyond; this is the convex
    envelope of min(t^2, ell*t), continuous at the crossover.
    """
    if not ell > 0:
        raise ValueError("ell must be positive")
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0):
        raise ValueError("slope must be nonnegative")
    out = np.where(arr <= ell / 2.0, arr**2, ell * arr - ell**2 / 4.0)
    return out if isinstance(t, np.ndarray) else float(out)


@dataclass(frozen=True)
class Candidate1D:
    """Piecewise-smooth displacement on an interval with interior jumps.

    ``pieces`` holds the node values of each smooth piece on a uniform grid
    of its subinterval; subintervals are delimited by ``breakpoints``.  The
    jump at breakpoint i is pieces[i+1][0] - pieces[i][-1].
    """

    domain: tuple = (0.0, 1.0)
    breakpoints: tuple = ()
    pieces: tuple = ()

    def __post_init__(self):
        x0, x1 = self.domain
        if not x1 > x0:
            raise ValueError("empty domain")
        br = tuple(float(b) for b in self.breakpoints)
        if any(not (x0 < b < x1) for b in br):
            raise ValueError("breakpoints must be strictly interior")
        if any(b2 <= b1 for b1, b2 in zip(br, br[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        pieces = tuple(np.asarray(p, dtype=float) for p in self.pieces)
        if len(pieces) != len(br) + 1:
            raise ValueError("need exactly one piece more than breakpoints")
        if any(p.ndim != 1 or p.size < 2 for p in pieces):
            raise ValueError("each piece needs at least two node values")
        object.__setattr__(self, "breakpoints", br)
        object.__setattr__(self, "pieces", pieces)

    @property
    def edges(self) -> tuple:
        x0, x1 = self.domain
        return (x0, *self.breakpoints, x1)

    @property
    def jumps(self) -> tuple:
        return tuple(
            float(nxt[0] - prv[-1]) for prv, nxt in zip(self.pieces, self.pieces[1:])
        )

    @staticmethod
    def affine(slope: float, domain=(0.0, 1.0), nodes: int = 2) -> "Candidate1D":
        x0, x1 = domain
        xs = np.linspace(0.0, x1 - x0, nodes)
        return Candidate1D(domain=domain, pieces=(slope * xs,))


@dataclass(frozen=True)
class DensityTable:
    """Sampled surface density s -> value with per-sample solver diagnostics."""

    potential: str
    s: np.ndarray
    value: np.ndarray
    diagnostics: tuple = field(default_factory=tuple)
    tol: float = 0.02

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        v = np.asarray(self.value, dtype=float)
        if s.ndim != 1 or s.shape != v.shape or s.size < 1:
            raise ValueError("need matching 1d arrays")
        if np.any(np.diff(s) <= 0):
            raise ValueError("sample openings must be strictly increasing")
        if s[0] == 0.0 and v[0] != 0.0:
            raise ValueError("value at s=0 must be exactly 0")
        if np.any(v < 0) or np.any(v > 1.0 + self.tol):
            raise ValueError("density values must lie in [0, 1 + tol]")
        diags = self.diagnostics
        if diags and len(diags) != s.size:
            raise ValueError("one diagnostics record per sample expected")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "value", v)
        object.__setattr__(self, "diagnostics", tuple(diags))

    @property
    def s_max(self) -> float:
        return float(self.s[-1])

    def interp(self, s):
        """Piecewise-linear interpolation; raises outside the sampled range."""
        arr = np.asarray(s, dtype=float)
        if np.any(arr < self.s[0]) or np.any(arr > self.s[-1]):
            raise ValueError("opening outside the sampled range")
        out = np.interp(arr, self.s, self.value)
        return out if isinstance(s, np.ndarray) else float(out)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        buf.write(",".join(CSV_COLUMNS) + "\n")
        for i in range(self.s.size):
            d = self.diagnostics[i] if self.diagnostics else {}
            row = (
                _fmt(float(self.s[i])),
                _fmt(float(self.value[i])),
                str(d.get("solver", "")),
                str(d.get("grid", "")),
                _fmt(d["T"]) if "T" in d else "",
                str(d.get("iterations", "")),
                _fmt(d["residual"]) if "residual" in d else "",
            )
            buf.write(",".join(row) + "\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text

    @staticmethod
    def from_csv(path, potential: str = "", tol: float = 0.02) -> "DensityTable":
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")
            if tuple(header) != CSV_COLUMNS:
                raise ValueError("unexpected density-table header")
            ss, vv, diags = [], [], []
            for line in fh:
                parts = line.rstrip("\n").split(",")
                ss.append(float(parts[0]))
                vv.append(float(parts[1]))
                diags.append(
                    {
                        "solver": parts[2],
                        "grid": parts[3],
                        "T": float(parts[4]) if parts[4] else None,
                        "iterations": int(parts[5]) if parts[5] else None,
                        "residual": float(parts[6]) if parts[6] else None,
                    }
                )
        return DensityTable(
            potential=potential, s=np.array(ss), value=np.array(vv),
            diagnostics=tuple(diags), tol=tol,
        )


def limit_phi_1d(cand: Candidate1D, ell: float, gtable: DensityTable) -> float:
    """Limit energy of a 1D candidate: volume term plus table-interpolated jumps."""
    total = 0.0
    edges = cand.edges
    for (a, b), piece in zip(zip(edges, edges[1:]), cand.pieces):
        h = (b - a) / (piece.size - 1)
        slopes = np.abs(np.diff(piece)) / h
        total += float(np.sum(volume_density(ell, slopes) * h))
    for jump in cand.jumps:
        total += gtable.interp(abs(jump))
    return total


def limit_bar_energy(gtable: DensityTable, ell: float, t: float):
    """Minimal limit energy of a stretched bar over single-jump candidates.

    Minimizes volume_density(t - s) + g(s) over the jump opening s in [0, t],
    sampled on the table grid plus the endpoints; ties break toward the
    smaller opening.  Subadditivity of the surface density makes one jump
    sufficient at the table's resolution.
    """
    if t < 0:
        raise ValueError("stretch must be nonnegative")
    if t > gtable.s_max:
        raise ValueError("density table does not cover the requested stretch")
    grid = gtable.s[(gtable.s >= 0.0) & (gtable.s <= t)]
    candidates = np.unique(np.concatenate([[0.0, t], grid]))
    energies = volume_density(ell, t - candidates) + np.interp(
        candidates, gtable.s, gtable.value
    )
    best = int(np.argmin(energies))  # argmin returns the first, smallest s
    return float(energies[best]), float(candidates[best])


def check_table_properties(
    table: DensityTable, ell: float, tol: float | None = None
) -> dict:
    """Structural property suite for a computed surface-density table.

    Checks, each reported with its worst margin (negative = violated):
    zero at origin, monotonicity within 2*tol, subadditivity on in-range
    grid pairs within 2*tol, the 0 <= g <= min(1, ell*s) + tol bounds, the
    discrete Lipschitz ratio <= ell + tol, the small-opening slope within
    10% of ell, and (when the range reaches 20/ell) the large-opening level
    >= 0.9.  The slope and level checks are reported only when the grid
    supports them.
    """
    tol = table.tol if tol is None else tol
    s, v = table.s, table.value
    checks = {}

    checks["zero_at_origin"] = {
        "applicable": bool(s[0] == 0.0),
        "margin": -abs(float(v[0])) if s[0] == 0.0 else 0.0,
    }

    diffs = np.diff(v)
    checks["monotone"] = {
        "applicable": s.size > 1,
        "margin": float(np.min(diffs) + 2 * tol) if s.size > 1 else 0.0,
    }

    worst = np.inf
    if s.size > 1:
        pos = s > 0
        si, vi = s[pos], v[pos]
        total = si[:, None] + si[None, :]
        mask = total <= s[-1]
        if np.any(mask):
            sums = np.interp(total[mask], s, v)
            worst = float(np.min((vi[:, None] + vi[None, :])[mask] - sums))
    checks["subadditive"] = {
        "applicable": bool(np.isfinite(worst)),
        "margin": worst + 2 * tol if np.isfinite(worst) else 0.0,
    }

    upper = np.minimum(1.0, ell * s) + tol
    checks["bounds"] = {
        "applicable": True,
        "margin": float(min(np.min(v + tol), np.min(upper - v))),
    }

    if s.size > 1:
        ratios = np.diff(v) / np.diff(s)
        checks["lipschitz"] = {
            "applicable": True,
            "margin": float(ell + tol - np.max(ratios)),
        }
    else:
        checks["lipschitz"] = {"applicable": False, "margin": 0.0}

    small = s[(s > 0)][:2]
    if small.size and small[0] <= 0.05 / ell:
        slopes = np.interp(small, s, v) / small
        margin = float(np.min(np.minimum(slopes - 0.9 * ell, 1.1 * ell - slopes)))
        checks["slope_at_origin"] = {"applicable": True, "margin": margin}
    else:
        checks["slope_at_origin"] = {"applicable": False, "margin": 0.0}

    if s[-1] >= 20.0 / ell:
        checks["level_at_large_opening"] = {
            "applicable": True,
            "margin": float(v[-1] - 0.9),
        }
    else:
        checks["level_at_large_opening"] = {"applicable": False, "margin": 0.0}

    for rec in checks.values():
        rec["passed"] = (not rec["applicable"]) or rec["margin"] >= 0.0
    checks["all_passed"] = all(
        rec["passed"] for name, rec in checks.items() if name != "all_passed"
    )
    return checks
