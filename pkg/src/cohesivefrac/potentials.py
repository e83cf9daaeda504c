"""Damage potentials, their truncations, and truncated-sequence limits.

Every model in this library is parametrized by a nondecreasing potential
f : [0, 1) -> [0, +inf) with f(0) = 0, f > 0 away from 0, diverging at
full integrity (s -> 1).  Families for which the product (1 - s) f(s)
has a finite positive limit ``ell`` are the cohesive ones; the power-law
family diverges faster and carries ``ell = inf``.

Energy integrands must never evaluate f itself close to s = 1: they go
through the bounded combination (1 - s) f(s), exposed as ``product``,
which every family extends continuously (or with an inf marker) to s = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "DamagePotential",
    "Prototype",
    "GriffithScaled",
    "DugdaleModified",
    "PowerLaw",
    "PointwiseMin",
    "Custom",
    "EpsilonSchedule",
    "truncated",
    "TruncatedLimitKind",
    "TruncatedLimitClassification",
    "UnsupportedRegimeError",
    "classify_truncated_limit",
]


class UnsupportedRegimeError(ValueError):
    """Raised for truncated-sequence scalings outside the classified table."""


def _check_unit_interval(s, closed: bool) -> np.ndarray:
    arr = np.asarray(s, dtype=float)
    top_ok = np.all(arr <= 1.0) if closed else np.all(arr < 1.0)
    if not (np.all(arr >= 0.0) and top_ok):
        hi = "1]" if closed else "1)"
        raise ValueError(f"argument must lie in [0, {hi}, got values outside")
    return arr


def _match(template, arr: np.ndarray):
    return arr if isinstance(template, np.ndarray) else float(arr)


class DamagePotential:
    """Base class; concrete families implement _f, _df and _product."""

    family = "abstract"

    @property
    def ell(self) -> float:
        """Limit of (1 - s) f(s) at s = 1; inf for super-linear blow-up."""
        raise NotImplementedError

    def __call__(self, s):
        """Evaluate f on [0, 1).  Values at the top endpoint are rejected."""
        arr = _check_unit_interval(s, closed=False)
        return _match(s, self._f(arr))

    def deriv(self, s):
        """One-sided derivative of f on [0, 1) (right branch at kinks)."""
        arr = _check_unit_interval(s, closed=False)
        return _match(s, self._df(arr))

    def product(self, s):
        """(1 - s) f(s) on [0, 1], continuously extended to s = 1."""
        arr = _check_unit_interval(s, closed=True)
        return _match(s, self._product(arr))

    def descriptor(self) -> str:
        raise NotImplementedError

    # concrete families override these three
    def _f(self, s: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _df(self, s: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _product(self, s: np.ndarray) -> np.ndarray:
        # generic fallback: safe only for families that also override at s=1
        out = np.where(s < 1.0, (1.0 - s) * self._f(np.minimum(s, 1.0 - 1e-15)), self.ell)
        return out


@dataclass(frozen=True)
class Prototype(DamagePotential):
    """f(s) = ell * s / (1 - s); the model cohesive family."""

    ell_value: float = 1.0
    family = "prototype"

    def __post_init__(self):
        if not (self.ell_value > 0 and math.isfinite(self.ell_value)):
            raise ValueError("ell must be a positive finite real")

    @property
    def ell(self) -> float:
        return self.ell_value

    def _f(self, s):
        with np.errstate(divide="ignore"):
            return self.ell_value * s / (1.0 - s)

    def _df(self, s):
        with np.errstate(divide="ignore"):
            return self.ell_value / (1.0 - s) ** 2

    def _product(self, s):
        return self.ell_value * s

    def descriptor(self) -> str:
        return f"prototype(ell={self.ell_value:g})"


@dataclass(frozen=True)
class GriffithScaled(Prototype):
    """Prototype with a large coefficient; tagged as a brittle-limit member."""

    family = "griffith-scaled"

    def descriptor(self) -> str:
        return f"griffith(ell={self.ell_value:g})"


@dataclass(frozen=True)
class DugdaleModified(DamagePotential):
    """f(s) = max(a * s, base(s)); stiffened low-damage response."""

    base: DamagePotential
    a: float
    family = "dugdale-modified"

    def __post_init__(self):
        if not (self.a > 0 and math.isfinite(self.a)):
            raise ValueError("a must be a positive finite real")
        if not math.isfinite(self.base.ell):
            raise ValueError("Dugdale modification requires a base with finite ell")

    @property
    def ell(self) -> float:
        # (1-s) * a*s -> 0, so the base limit survives the max
        return self.base.ell

    def _f(self, s):
        return np.maximum(self.a * s, self.base._f(s))

    def _df(self, s):
        return np.where(self.a * s >= self.base._f(s), self.a, self.base._df(s))

    def _product(self, s):
        return np.maximum(self.a * s * (1.0 - s), self.base._product(s))

    def descriptor(self) -> str:
        return f"dugdale(a={self.a:g}, base={self.base.descriptor()})"


@dataclass(frozen=True)
class PowerLaw(DamagePotential):
    """f(s) = kappa * s / (1 - s)^p with p > 1; sub-linear openings limit."""

    p: float
    kappa: float = 1.0
    family = "power-law"

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError("power-law exponent must satisfy p > 1")
        if not (self.kappa > 0 and math.isfinite(self.kappa)):
            raise ValueError("kappa must be a positive finite real")

    @property
    def ell(self) -> float:
        return math.inf

    def _f(self, s):
        with np.errstate(divide="ignore", over="ignore"):
            return self.kappa * s / (1.0 - s) ** self.p

    def _df(self, s):
        with np.errstate(divide="ignore", over="ignore"):
            return self.kappa * (1.0 + (self.p - 1.0) * s) / (1.0 - s) ** (self.p + 1.0)

    def _product(self, s):
        with np.errstate(divide="ignore", over="ignore"):
            out = np.asarray(self.kappa * s / (1.0 - s) ** (self.p - 1.0))
        out = np.where(s >= 1.0, np.inf, out)
        return out

    def descriptor(self) -> str:
        return f"powerlaw(p={self.p:g}, kappa={self.kappa:g})"


@dataclass(frozen=True)
class PointwiseMin(DamagePotential):
    """Pointwise minimum of two families.

    Used for the capped power-law members f(s) = min(j*s/(1-s), psi_p(s)):
    the min of two nondecreasing admissible potentials is admissible, and
    its product limit is the smaller of the two limits.
    """

    first: DamagePotential
    second: DamagePotential
    family = "pointwise-min"

    @property
    def ell(self) -> float:
        return min(self.first.ell, self.second.ell)

    def _f(self, s):
        return np.minimum(self.first._f(s), self.second._f(s))

    def _df(self, s):
        take_first = self.first._f(s) <= self.second._f(s)
        return np.where(take_first, self.first._df(s), self.second._df(s))

    def _product(self, s):
        return np.minimum(self.first._product(s), self.second._product(s))

    def descriptor(self) -> str:
        return f"min({self.first.descriptor()}, {self.second.descriptor()})"


@dataclass(frozen=True)
class Custom(DamagePotential):
    """Monotone piecewise-linear potential from tabulated samples.

    Samples must start at (0, 0), be strictly increasing in s inside
    [0, 1), and nondecreasing and positive in value after the origin.
    Beyond the last sample f follows the hyperbolic tail
    c / (1 - s) with c = (1 - s_last) f_last, so the product form is
    constant there; ``ell`` is estimated by Richardson extrapolation of
    (1 - s) f(s) along s = 1 - 2^-m.
    """

    samples_s: tuple
    samples_f: tuple
    family = "custom"

    def __post_init__(self):
        ss = np.asarray(self.samples_s, dtype=float)
        ff = np.asarray(self.samples_f, dtype=float)
        if ss.ndim != 1 or ss.shape != ff.shape or ss.size < 2:
            raise ValueError("need matching 1d sample arrays with >= 2 points")
        if ss[0] != 0.0 or ff[0] != 0.0:
            raise ValueError("samples must start at (0, 0)")
        if np.any(np.diff(ss) <= 0) or ss[-1] >= 1.0:
            raise ValueError("sample abscissae must be strictly increasing in [0, 1)")
        if np.any(np.diff(ff) < 0) or np.any(ff[1:] <= 0):
            raise ValueError("sample values must be nondecreasing and positive after 0")
        object.__setattr__(self, "samples_s", tuple(float(x) for x in ss))
        object.__setattr__(self, "samples_f", tuple(float(x) for x in ff))

    @property
    def _tail_c(self) -> float:
        return (1.0 - self.samples_s[-1]) * self.samples_f[-1]

    @property
    def ell(self) -> float:
        # Richardson extrapolation of p(m) = (1-s)f(s) at s = 1 - 2^-m,
        # assuming first-order decay of the error in 2^-m.
        ms = np.arange(1, 13)
        p = self._product(1.0 - 0.5**ms)
        extrap = 2.0 * p[1:] - p[:-1]
        return float(extrap[-1])

    def _f(self, s):
        ss = np.asarray(self.samples_s)
        ff = np.asarray(self.samples_f)
        inner = np.interp(s, ss, ff)
        with np.errstate(divide="ignore"):
            tail = self._tail_c / (1.0 - s)
        return np.where(s <= ss[-1], inner, tail)

    def _df(self, s):
        ss = np.asarray(self.samples_s)
        ff = np.asarray(self.samples_f)
        slopes = np.diff(ff) / np.diff(ss)
        idx = np.clip(np.searchsorted(ss, s, side="right") - 1, 0, slopes.size - 1)
        with np.errstate(divide="ignore"):
            tail = self._tail_c / (1.0 - s) ** 2
        return np.where(s <= ss[-1], slopes[idx], tail)

    def _product(self, s):
        ss = np.asarray(self.samples_s)
        inner = (1.0 - s) * np.interp(s, ss, np.asarray(self.samples_f))
        return np.where(s <= ss[-1], inner, self._tail_c)

    def descriptor(self) -> str:
        return f"custom({len(self.samples_s)} samples)"


def truncated(pot: DamagePotential, eps: float, s):
    """Truncated potential min(1, sqrt(eps) * f(s)), pinned to 1 at s = 1.

    This is the damage-to-stiffness map used at regularization scale eps;
    it is defined on the closed interval [0, 1].
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    arr = _check_unit_interval(s, closed=True)
    inner = np.minimum(arr, 1.0 - 1e-16)
    with np.errstate(over="ignore"):
        vals = np.minimum(1.0, math.sqrt(eps) * pot._f(inner))
    vals = np.where(arr == 1.0, 1.0, vals)
    return _match(s, vals)


@dataclass(frozen=True)
class EpsilonSchedule:
    """Geometric regularization schedule eps_k = eps0 * ratio^k.

    The coercivity perturbation is eta_k = eps_k^eta_exponent, which is
    o(eps_k) whenever eta_exponent > 1.  An optional stiffening coupling
    a_k = a0 * a_growth^k may be attached; it must diverge while
    a_k * sqrt(eps_k) decreases to zero, i.e. 1 < a_growth < 1/sqrt(ratio).
    """

    eps0: float = 0.1
    ratio: float = 0.5
    eta_exponent: float = 2.0
    a0: float | None = None
    a_growth: float | None = None

    def __post_init__(self):
        if not (0 < self.eps0 and 0 < self.ratio < 1):
            raise ValueError("need eps0 > 0 and 0 < ratio < 1")
        if not self.eta_exponent > 1:
            raise ValueError("eta_exponent must exceed 1 so that eta = o(eps)")
        if (self.a0 is None) != (self.a_growth is None):
            raise ValueError("a0 and a_growth must be given together")
        if self.a0 is not None:
            if not (self.a0 > 0 and self.a_growth > 1):
                raise ValueError("coupling must have a0 > 0 and a_growth > 1")
            if not self.a_growth * math.sqrt(self.ratio) < 1:
                raise ValueError("coupling must keep a_k * sqrt(eps_k) decreasing to 0")

    def eps(self, k: int) -> float:
        return self.eps0 * self.ratio**k

    def eta(self, k: int) -> float:
        return self.eps(k) ** self.eta_exponent

    def a(self, k: int) -> float:
        if self.a0 is None:
            raise ValueError("no stiffening coupling attached")
        return self.a0 * self.a_growth**k


class TruncatedLimitKind(str, Enum):
    INDICATOR_ONE = "indicator_of_one"
    IDENTITY = "identity"
    CAPPED_RAMP = "capped_ramp"
    INDICATOR_POSITIVE = "indicator_of_positive"


@dataclass(frozen=True)
class TruncatedLimitClassification:
    kind: TruncatedLimitKind
    sequence: str
    coupling: str
    gamma: float | None
    ell: float

    def limit(self, s):
        """Classified pointwise limit evaluated on [0, 1]."""
        arr = _check_unit_interval(s, closed=True)
        if self.kind is TruncatedLimitKind.INDICATOR_ONE:
            out = np.where(arr == 1.0, 1.0, 0.0)
        elif self.kind is TruncatedLimitKind.IDENTITY:
            out = arr.copy()
        elif self.kind is TruncatedLimitKind.INDICATOR_POSITIVE:
            out = np.where(arr > 0.0, 1.0, 0.0)
        else:
            with np.errstate(divide="ignore"):
                ramp = self.gamma * arr / (1.0 - arr)
            out = np.minimum(1.0, np.where(arr == 1.0, np.inf, ramp))
        return _match(s, out)

    def sample(self, k: int, s):
        """Finite-k member of the truncated sequence at the canonical scaling.

        The canonical sequences are eps_k = 4^-k style geometric laws chosen
        so that a_k diverges and the coupling a_k * sqrt(eps_k) approaches its
        regime value monotonically; samples then converge monotonically to
        the classified limit.
        """
        arr = _check_unit_interval(s, closed=True)
        inner = np.minimum(arr, 1.0 - 1e-16)
        if self.sequence == "ramp":
            if self.coupling == "vanishing":
                c = 2.0**-k
            elif self.coupling == "critical":
                c = self.gamma * (1.0 + 2.0**-k)
            else:  # diverging
                c = 2.0**k
            with np.errstate(over="ignore"):
                vals = np.minimum(1.0, c * inner / (1.0 - inner))
        else:  # stiffened prototype, a_k = eps_k^(-1/2)
            root_eps = 2.0**-k
            with np.errstate(over="ignore"):
                vals = np.minimum(
                    1.0, np.maximum(inner, root_eps * self.ell * inner / (1.0 - inner))
                )
        vals = np.where(arr == 1.0, 1.0, vals)
        return _match(s, vals)


_CLASSIFICATION_TABLE = {
    ("ramp", "vanishing"): TruncatedLimitKind.INDICATOR_ONE,
    ("ramp", "critical"): TruncatedLimitKind.CAPPED_RAMP,
    ("ramp", "diverging"): TruncatedLimitKind.INDICATOR_POSITIVE,
    ("dugdale", "inverse_sqrt"): TruncatedLimitKind.IDENTITY,
    ("dugdale", "vanishing"): TruncatedLimitKind.INDICATOR_ONE,
    ("dugdale", "diverging"): TruncatedLimitKind.INDICATOR_POSITIVE,
}


def classify_truncated_limit(
    sequence: str,
    coupling: str,
    gamma: float | None = None,
    ell: float = 1.0,
) -> TruncatedLimitClassification:
    """Classify the pointwise limit of the truncated sequence f_k^(k).

    ``sequence`` selects the diverging family: "ramp" for f^(k) = a_k s/(1-s),
    "dugdale" for the stiffened prototype (a_k s) v (ell s/(1-s)).
    ``coupling`` describes a_k * sqrt(eps_k): "vanishing", "critical" (with
    the finite value ``gamma``), "diverging", or "inverse_sqrt" for the exact
    balance a_k = eps_k^(-1/2).
    """
    key = (sequence, coupling)
    if key not in _CLASSIFICATION_TABLE:
        raise UnsupportedRegimeError(
            f"no classified limit for sequence={sequence!r}, coupling={coupling!r}"
        )
    if coupling == "critical":
        if gamma is None or not (0 < gamma < math.inf):
            raise UnsupportedRegimeError("critical coupling needs gamma in (0, inf)")
    else:
        gamma = None
    return TruncatedLimitClassification(
        kind=_CLASSIFICATION_TABLE[key],
        sequence=sequence,
        coupling=coupling,
        gamma=gamma,
        ell=ell,
    )
