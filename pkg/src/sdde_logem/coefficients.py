"""Coefficient fields and regularity checks.

The drift and noise coefficients f, g : R^d -> R^{dxd} are matrices of
scalar descriptors from a small set of parametric families, each of which
is bounded with a closed-form Lipschitz constant and exact range bounds.
That restriction is what makes the regularity validation sound: every
constant reported by ``validate_assumptions`` is computed, not sampled.

Also here: the off-diagonal coupling matrix built from f, initial-path
descriptors with analytic Holder data, and the operator-norm bound
1 + ||M||_F >= ||I + M||_2 used by the stability estimates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import TYPE_CHECKING

import numpy as np

from .errors import (
    ConfigurationError,
    NumericInputError,
    UsageError,
    ValidationUnsupportedError,
)
from .levy import moment_integral

if TYPE_CHECKING:  # pragma: no cover
    from .scheme import Scenario

__all__ = [
    "ScalarField",
    "Constant",
    "BoundedAffine",
    "Sigmoid",
    "scalar_field_from_dict",
    "InitialPath",
    "ConstantPath",
    "HolderPowerPath",
    "initial_path_from_dict",
    "CoefficientField",
    "evaluate_f",
    "evaluate_g",
    "off_diagonal_matrix",
    "operator_norm_bound",
    "AssumptionReport",
    "validate_assumptions",
]


def _finite(name, value):
    v = float(value)
    if not math.isfinite(v):
        raise ConfigurationError(f"{name} must be finite, got {value!r}")
    return v


def _sigmoid(t):
    # numerically stable logistic function
    if t >= 0.0:
        return 1.0 / (1.0 + math.exp(-t))
    e = math.exp(t)
    return e / (1.0 + e)


class ScalarField:
    """One entry of a coefficient matrix: a bounded scalar function of the state."""

    family = "abstract"

    def value(self, x):
        raise NotImplementedError

    def bounds(self):
        """Exact (lo, hi) range bounds of the entry over all of R^d."""
        raise NotImplementedError

    def lipschitz(self):
        """A global Lipschitz constant (Euclidean norm on the input)."""
        raise NotImplementedError

    @property
    def is_constant(self):
        lo, hi = self.bounds()
        return lo == hi

    @property
    def constant_value(self):
        lo, hi = self.bounds()
        if lo != hi:
            raise UsageError(f"{self.family} entry is not constant")
        return lo

    def weight_dim(self):
        """Length of the weight vector, or None for weightless families."""
        return None

    def to_dict(self):
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(ScalarField):
    c: float
    family = "constant"

    def __post_init__(self):
        _finite("constant.c", self.c)

    def value(self, x):
        return self.c

    def bounds(self):
        return (self.c, self.c)

    def lipschitz(self):
        return 0.0

    def to_dict(self):
        return {"family": "constant", "c": self.c}


@dataclass(frozen=True)
class BoundedAffine(ScalarField):
    """clamp(c0 + c1 * <w, x>, clip_lo, clip_hi) for a fixed weight vector w."""

    c0: float
    c1: float
    w: tuple
    clip_lo: float
    clip_hi: float
    family = "bounded_affine"

    def __post_init__(self):
        _finite("bounded_affine.c0", self.c0)
        _finite("bounded_affine.c1", self.c1)
        lo = _finite("bounded_affine.clip_lo", self.clip_lo)
        hi = _finite("bounded_affine.clip_hi", self.clip_hi)
        if lo > hi:
            raise ConfigurationError(f"bounded_affine requires clip_lo <= clip_hi, got {lo} > {hi}")
        object.__setattr__(self, "w", tuple(_finite("bounded_affine.w", wi) for wi in self.w))

    @cached_property
    def _w_arr(self):
        return np.asarray(self.w, dtype=np.float64)

    def value(self, x):
        t = self.c0 + self.c1 * float(self._w_arr @ x)
        return min(max(t, self.clip_lo), self.clip_hi)

    def bounds(self):
        if self.c1 == 0.0 or not any(self.w):
            v = min(max(self.c0, self.clip_lo), self.clip_hi)
            return (v, v)
        return (self.clip_lo, self.clip_hi)

    def lipschitz(self):
        if self.c1 == 0.0:
            return 0.0
        return abs(self.c1) * float(np.linalg.norm(self._w_arr))

    def weight_dim(self):
        return len(self.w)

    def to_dict(self):
        return {
            "family": "bounded_affine",
            "c0": self.c0,
            "c1": self.c1,
            "w": list(self.w),
            "clip_lo": self.clip_lo,
            "clip_hi": self.clip_hi,
        }


@dataclass(frozen=True)
class Sigmoid(ScalarField):
    """c0 + amplitude * logistic(<w, x>)."""

    c0: float
    amplitude: float
    w: tuple
    family = "sigmoid"

    def __post_init__(self):
        _finite("sigmoid.c0", self.c0)
        _finite("sigmoid.amplitude", self.amplitude)
        object.__setattr__(self, "w", tuple(_finite("sigmoid.w", wi) for wi in self.w))

    @cached_property
    def _w_arr(self):
        return np.asarray(self.w, dtype=np.float64)

    def value(self, x):
        return self.c0 + self.amplitude * _sigmoid(float(self._w_arr @ x))

    def bounds(self):
        if not any(self.w):
            v = self.c0 + 0.5 * self.amplitude
            return (v, v)
        lo = min(self.c0, self.c0 + self.amplitude)
        hi = max(self.c0, self.c0 + self.amplitude)
        return (lo, hi)

    def lipschitz(self):
        # the logistic function has derivative bounded by 1/4
        return 0.25 * abs(self.amplitude) * float(np.linalg.norm(self._w_arr))

    def weight_dim(self):
        return len(self.w)

    def to_dict(self):
        return {"family": "sigmoid", "c0": self.c0, "amplitude": self.amplitude, "w": list(self.w)}


_FIELD_FAMILIES = {"constant": Constant, "bounded_affine": BoundedAffine, "sigmoid": Sigmoid}


def scalar_field_from_dict(doc):
    if not isinstance(doc, dict) or "family" not in doc:
        raise ConfigurationError("coefficient entry must be an object with a 'family' key")
    family = doc["family"]
    cls = _FIELD_FAMILIES.get(family)
    if cls is None:
        raise ConfigurationError(
            f"unknown coefficient family {family!r}; expected one of {sorted(_FIELD_FAMILIES)}"
        )
    kwargs = {k: (tuple(v) if k == "w" else v) for k, v in doc.items() if k != "family"}
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigurationError(f"bad parameters for coefficient family {family!r}: {exc}") from exc


class InitialPath:
    """Initial segment descriptor phi_i on [-b, 0] with analytic Holder data."""

    family = "abstract"

    def value(self, t):
        raise NotImplementedError

    def holder(self):
        """(exponent gamma, constant rho) such that |phi(t)-phi(s)| <= rho |t-s|^gamma."""
        raise NotImplementedError

    def to_dict(self):
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantPath(InitialPath):
    c: float
    family = "constant"

    def __post_init__(self):
        _finite("phi.c", self.c)

    def value(self, t):
        return self.c

    def holder(self):
        return (0.5, 0.0)

    def to_dict(self):
        return {"family": "constant", "c": self.c}


@dataclass(frozen=True)
class HolderPowerPath(InitialPath):
    """phi(t) = c0 + c1 * (-t)^exponent on [-b, 0], exponent in [1/2, 1)."""

    c0: float
    c1: float
    exponent: float
    family = "holder_poly"

    def __post_init__(self):
        _finite("phi.c0", self.c0)
        _finite("phi.c1", self.c1)
        gamma = _finite("phi.exponent", self.exponent)
        if not 0.5 <= gamma < 1.0:
            raise ConfigurationError(f"phi exponent must lie in [0.5, 1), got {gamma}")

    def value(self, t):
        return self.c0 + self.c1 * (-t) ** self.exponent if t < 0.0 else self.c0

    def holder(self):
        # s -> s^gamma is gamma-Holder with constant 1 on [0, inf)
        return (self.exponent, abs(self.c1))

    def to_dict(self):
        return {"family": "holder_poly", "c0": self.c0, "c1": self.c1, "exponent": self.exponent}


_PHI_FAMILIES = {"constant": ConstantPath, "holder_poly": HolderPowerPath}


def initial_path_from_dict(doc):
    if not isinstance(doc, dict) or "family" not in doc:
        raise ConfigurationError("phi entry must be an object with a 'family' key")
    family = doc["family"]
    cls = _PHI_FAMILIES.get(family)
    if cls is None:
        raise ConfigurationError(
            f"unknown phi family {family!r}; expected one of {sorted(_PHI_FAMILIES)}"
        )
    kwargs = {k: v for k, v in doc.items() if k != "family"}
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigurationError(f"bad parameters for phi family {family!r}: {exc}") from exc


@dataclass(frozen=True)
class CoefficientField:
    """The pair of d x d coefficient matrices (f, g) as descriptor grids."""

    d: int
    f_entries: tuple
    g_entries: tuple

    def __post_init__(self):
        if not isinstance(self.d, int) or self.d < 1:
            raise ConfigurationError(f"dimension d must be a positive integer, got {self.d!r}")
        for name, grid in (("f", self.f_entries), ("g", self.g_entries)):
            if len(grid) != self.d or any(len(row) != self.d for row in grid):
                raise ConfigurationError(f"{name} must be a {self.d}x{self.d} grid of entries")
            for i, row in enumerate(grid):
                for j, entry in enumerate(row):
                    if not isinstance(entry, ScalarField):
                        raise ConfigurationError(f"{name}[{i}][{j}] is not a coefficient descriptor")
                    wd = entry.weight_dim()
                    if wd is not None and wd != self.d:
                        raise ConfigurationError(
                            f"{name}[{i}][{j}] has weight length {wd}, expected {self.d}"
                        )

    def f_matrix(self, x):
        d = self.d
        out = np.empty((d, d))
        for i in range(d):
            row = self.f_entries[i]
            for j in range(d):
                out[i, j] = row[j].value(x)
        return out

    def g_matrix(self, x):
        d = self.d
        out = np.empty((d, d))
        for i in range(d):
            row = self.g_entries[i]
            for j in range(d):
                out[i, j] = row[j].value(x)
        return out

    def to_dict(self):
        return {
            "f": [[e.to_dict() for e in row] for row in self.f_entries],
            "g": [[e.to_dict() for e in row] for row in self.g_entries],
        }


def _check_state(x, d):
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (d,):
        raise UsageError(f"state must have shape ({d},), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NumericInputError("state vector contains non-finite entries")
    return x


def evaluate_f(field, x):
    """The drift coefficient matrix f(x)."""
    return field.f_matrix(_check_state(x, field.d))


def evaluate_g(field, x):
    """The jump coefficient matrix g(x)."""
    return field.g_matrix(_check_state(x, field.d))


def off_diagonal_matrix(field, x):
    """F(x): equal to f(x) off the diagonal, exactly zero on it."""
    out = field.f_matrix(_check_state(x, field.d))
    np.fill_diagonal(out, 0.0)
    return out


def operator_norm_bound(M):
    """1 + ||M||_F, an upper bound for the spectral norm of I + M.

    ||I + M|| <= 1 + ||M||_2 <= 1 + ||M||_F.  The additive form is used
    (rather than folding the one inside the square root) because the
    latter is not an upper bound: for M = diag(3, 0), ||I+M|| = 4 while
    sqrt(1 + tr(M^T M)) = sqrt(10) < 4.
    """
    M = np.asarray(M, dtype=np.float64)
    if not np.all(np.isfinite(M)):
        raise NumericInputError("matrix contains non-finite entries")
    return 1.0 + float(np.sqrt(np.sum(M * M)))


def _min_rect_product(zlo, zhi, glo, ghi):
    # min of z*g over [zlo, zhi] x [glo, ghi]; zhi may be +inf, zlo is finite.
    candidates = [zlo * glo, zlo * ghi]
    if math.isfinite(zhi):
        candidates += [zhi * glo, zhi * ghi]
    elif glo < 0.0:
        candidates.append(-math.inf)
    return min(candidates)


@dataclass(frozen=True)
class AssumptionReport:
    """Quantitative record of the regularity checks for one scenario.

    Pass flags are set only when the corresponding computed quantity
    satisfies its inequality; nothing here is sampled.
    """

    positivity_mode: bool
    # initial path: per-component (gamma, rho) and phi(0)
    phi_holder: tuple
    phi_zero: tuple
    holder_pass: bool
    # coefficient regularity: per-entry constants and the aggregate rho
    f_lipschitz: tuple
    g_lipschitz: tuple
    f_bounds: tuple
    g_bounds: tuple
    rho: float
    regularity_pass: bool
    # jump positivity: mark-space floor -R and worst-case min(1 + z*g_ij)
    support_floor: float
    jump_margin: float
    jump_margin_pass: bool
    # moment bounds: {q: (per-component values)}
    moment_values: dict
    moments_pass: bool
    # positivity-mode extras
    offdiag_f_nonneg: bool
    phi_positive: bool

    @property
    def passed(self):
        core = self.holder_pass and self.regularity_pass and self.jump_margin_pass and self.moments_pass
        if not self.positivity_mode:
            return core
        return core and self.offdiag_f_nonneg and self.phi_positive and self.jump_margin > 0.0

    def failures(self):
        out = []
        if not self.holder_pass:
            out.append("initial path: phi(0) > 0 with Holder exponent in [1/2, 1) fails")
        if not self.regularity_pass:
            out.append("coefficients: bounded/Lipschitz constants not finite")
        if not self.jump_margin_pass:
            out.append(f"jump positivity margin {self.jump_margin:.6g} is not > 0")
        if not self.moments_pass:
            out.append("weighted jump moments not finite")
        if self.positivity_mode and not self.offdiag_f_nonneg:
            out.append("positivity mode: an off-diagonal f entry can be negative")
        if self.positivity_mode and not self.phi_positive:
            out.append("positivity mode: some phi(0) component is not > 0")
        return out

    def to_json_dict(self):
        return {
            "positivity_mode": self.positivity_mode,
            "phi_holder": [list(h) for h in self.phi_holder],
            "phi_zero": list(self.phi_zero),
            "holder_pass": self.holder_pass,
            "f_lipschitz": [list(r) for r in self.f_lipschitz],
            "g_lipschitz": [list(r) for r in self.g_lipschitz],
            "f_bounds": [[list(b) for b in r] for r in self.f_bounds],
            "g_bounds": [[list(b) for b in r] for r in self.g_bounds],
            "rho": self.rho,
            "regularity_pass": self.regularity_pass,
            "support_floor": self.support_floor,
            "jump_margin": self.jump_margin,
            "jump_margin_pass": self.jump_margin_pass,
            "moment_values": {repr(q): list(v) for q, v in sorted(self.moment_values.items())},
            "moments_pass": self.moments_pass,
            "offdiag_f_nonneg": self.offdiag_f_nonneg,
            "phi_positive": self.phi_positive,
            "passed": self.passed,
            "failures": self.failures(),
        }


def _descriptor_constants(entry, where):
    for attr in ("bounds", "lipschitz"):
        if not hasattr(entry, attr):
            raise ValidationUnsupportedError(
                f"{where}: descriptor {type(entry).__name__} has no closed-form constants"
            )
    return entry.bounds(), entry.lipschitz()


def validate_assumptions(scenario: "Scenario", q_list):
    """Run the quantitative regularity checks and aggregate a report.

    Checks, in order: the initial path's Holder data and sign at zero;
    per-entry range and Lipschitz constants of f and g; the worst-case
    jump factor min(1 + z * g_ij) over each entry's range and the
    corresponding component's mark support; the weighted jump moments for
    every q in ``q_list``.  In positivity mode the off-diagonal f >= 0
    and phi(0) > 0 hypotheses are enforced on top.
    """
    field = scenario.field
    d = field.d

    phi_holder = []
    phi_zero = []
    for i, phi in enumerate(scenario.phi):
        if not hasattr(phi, "holder"):
            raise ValidationUnsupportedError(
                f"phi[{i}]: descriptor {type(phi).__name__} has no analytic Holder data"
            )
        phi_holder.append(phi.holder())
        phi_zero.append(float(phi.value(0.0)))
    holder_pass = all(
        0.5 <= gamma < 1.0 and math.isfinite(rho) for gamma, rho in phi_holder
    ) and all(v > 0.0 for v in phi_zero)

    f_lip, g_lip, f_bnd, g_bnd = [], [], [], []
    for name, grid, lips, bnds in (
        ("f", field.f_entries, f_lip, f_bnd),
        ("g", field.g_entries, g_lip, g_bnd),
    ):
        for i, row in enumerate(grid):
            lr, br = [], []
            for j, entry in enumerate(row):
                (lo, hi), lip = _descriptor_constants(entry, f"{name}[{i}][{j}]")
                lr.append(lip)
                br.append((lo, hi))
            lips.append(tuple(lr))
            bnds.append(tuple(br))
    all_lip = [v for row in f_lip + g_lip for v in row]
    f_abs = [max(abs(lo), abs(hi)) for row in f_bnd for lo, hi in row]
    rho = max(all_lip + f_abs) if (all_lip + f_abs) else 0.0
    regularity_pass = all(math.isfinite(v) for v in all_lip + f_abs)

    floors = [spec.law.support_floor for spec in scenario.levy]
    support_floor = min(floors)
    jump_margin = math.inf
    for j, spec in enumerate(scenario.levy):
        zlo, zhi = spec.law.support()
        if spec.rate == 0.0:
            continue
        for i in range(d):
            glo, ghi = g_bnd[i][j]
            jump_margin = min(jump_margin, 1.0 + _min_rect_product(zlo, zhi, glo, ghi))
    if jump_margin == math.inf:  # no active jump component
        jump_margin = 1.0
    jump_margin_pass = jump_margin > 0.0

    moment_values = {}
    for q in q_list:
        moment_values[float(q)] = tuple(
            moment_integral(spec.law, spec.rate, float(q)) for spec in scenario.levy
        )
    moments_pass = all(math.isfinite(v) for vs in moment_values.values() for v in vs)

    offdiag_ok = all(
        f_bnd[i][j][0] >= 0.0 for i in range(d) for j in range(d) if i != j
    )
    phi_positive = all(v > 0.0 for v in phi_zero)

    return AssumptionReport(
        positivity_mode=scenario.positivity_mode,
        phi_holder=tuple(phi_holder),
        phi_zero=tuple(phi_zero),
        holder_pass=holder_pass,
        f_lipschitz=tuple(f_lip),
        g_lipschitz=tuple(g_lip),
        f_bounds=tuple(f_bnd),
        g_bounds=tuple(g_bnd),
        rho=rho,
        regularity_pass=regularity_pass,
        support_floor=support_floor,
        jump_margin=jump_margin,
        jump_margin_pass=jump_margin_pass,
        moment_values=moment_values,
        moments_pass=moments_pass,
        offdiag_f_nonneg=offdiag_ok,
        phi_positive=phi_positive,
    )
