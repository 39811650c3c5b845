"""The positivity-preserving logarithmic Euler-Maruyama integrator.

The state S is advanced through the splitting S = p * X (componentwise):

* X carries the diagonal drift and all jump noise.  Over one step it is
  multiplied by exp(f_ii(v) * dt) and, for every jump (u, z) of driving
  component j inside the step, by the factor (1 + g_ij(v) * z) -- the
  exponential of the per-jump logarithm.  Each factor is positive as long
  as 1 + g_ij * z > 0, so X can never change sign.
* p carries the off-diagonal drift coupling through the linear update
  p <- [F(v) * dt + I] p with F the off-diagonal part of f; when the
  off-diagonal entries are nonnegative, p stays nonnegative.

Both updates freeze their coefficients at the delayed state
v = S(t_k - b).  Grids are uniform with step delta = b/m so that t_k - b
is itself a node and the delayed lookup is exact; on [0, b] it falls back
to the initial path phi.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from .coefficients import CoefficientField, InitialPath
from .errors import (
    ConfigurationError,
    NumericInputError,
    OverflowAbortError,
    PositivityBreachError,
    SddeError,
    SequencingError,
    UnsupportedOracleError,
    UsageError,
)
from .levy import LevyComponentSpec

__all__ = [
    "Scenario",
    "Grid",
    "SolutionPath",
    "build_grid",
    "delayed_state",
    "x_step",
    "p_step",
    "compose",
    "simulate",
    "exact_frozen_solution",
    "path_to_csv_text",
]

#: snapping tolerance when deciding whether T sits on the uniform grid
_GRID_SNAP = 1e-12


@dataclass(frozen=True)
class Scenario:
    """A complete problem instance.

    d components on [0, T] with delay b, coefficient field (f, g),
    initial path phi on [-b, 0], and one jump spec per component.  When
    ``positivity_mode`` is set, construction additionally requires
    phi(0) > 0; the coefficient-level positivity hypotheses are enforced
    by ``validate_assumptions``.
    """

    d: int
    b: float
    T: float
    field: CoefficientField
    phi: tuple
    levy: tuple
    positivity_mode: bool = False

    def __post_init__(self):
        if not isinstance(self.d, int) or self.d < 1:
            raise ConfigurationError(f"d must be a positive integer, got {self.d!r}")
        if not (math.isfinite(self.b) and self.b > 0.0):
            raise ConfigurationError(f"b must be a positive real, got {self.b!r}")
        if not (math.isfinite(self.T) and self.T > 0.0):
            raise ConfigurationError(f"T must be a positive real, got {self.T!r}")
        if self.field.d != self.d:
            raise ConfigurationError(f"field dimension {self.field.d} != d={self.d}")
        if len(self.phi) != self.d:
            raise ConfigurationError(f"phi must have {self.d} components, got {len(self.phi)}")
        if len(self.levy) != self.d:
            raise ConfigurationError(f"levy must have {self.d} components, got {len(self.levy)}")
        for i, p in enumerate(self.phi):
            if not isinstance(p, InitialPath):
                raise ConfigurationError(f"phi[{i}] is not an initial-path descriptor")
        for j, spec in enumerate(self.levy):
            if not isinstance(spec, LevyComponentSpec):
                raise ConfigurationError(f"levy[{j}] is not a component spec")
        if self.positivity_mode:
            for i, p in enumerate(self.phi):
                if not p.value(0.0) > 0.0:
                    raise ConfigurationError(
                        f"positivity mode requires phi[{i}](0) > 0, got {p.value(0.0)}"
                    )

    def phi_at(self, t):
        """phi(t) as a d-vector, t <= 0."""
        return np.array([p.value(t) for p in self.phi], dtype=np.float64)

    def to_dict(self):
        doc = {
            "d": self.d,
            "b": self.b,
            "T": self.T,
            "positivity_mode": self.positivity_mode,
            "phi": [p.to_dict() for p in self.phi],
            "levy": [spec.to_dict() for spec in self.levy],
        }
        doc.update(self.field.to_dict())
        return doc

    def digest(self):
        """Stable hash of the canonicalized scenario, for report provenance."""
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform partition of [0, T] with step delta = b/m.

    ``times`` holds the nodes 0, delta, 2*delta, ... with the final node
    equal to T exactly (a short last step when T is not a multiple of
    delta).  ``history_times`` holds the m+1 nodes (j - m) * delta of
    [-b, 0].  Every step starts at an exact multiple of delta, so the
    delayed time t_k - b is the node k - m (or a history node).
    """

    b: float
    T: float
    m: int
    delta: float
    times: np.ndarray
    history_times: np.ndarray
    truncated: bool

    def __post_init__(self):
        self.times.flags.writeable = False
        self.history_times.flags.writeable = False

    @property
    def n_steps(self):
        return len(self.times) - 1

    @property
    def n_nodes(self):
        return len(self.times)


def build_grid(b, T, m):
    """Build the uniform delay-aligned grid on [0, T] with delta = b/m."""
    if not (isinstance(m, (int, np.integer)) and not isinstance(m, bool)) or m < 1:
        raise ConfigurationError(f"m must be a positive integer, got {m!r}")
    if not (math.isfinite(b) and b > 0.0):
        raise ConfigurationError(f"b must be a positive real, got {b!r}")
    if not (math.isfinite(T) and T > 0.0):
        raise ConfigurationError(f"T must be a positive real, got {T!r}")
    delta = b / m
    if delta >= 1.0:
        raise ConfigurationError(
            f"step size delta = b/m = {delta:.6g} must be < 1; increase m"
        )
    if delta >= b:
        raise ConfigurationError(f"step size delta = {delta:.6g} must be < b = {b:.6g}; use m >= 2")

    ratio = T / delta
    n_round = round(ratio)
    if n_round >= 1 and abs(n_round * delta - T) <= _GRID_SNAP * max(delta, T):
        # T sits on the grid; snap the last node to it exactly
        nodes = [k * delta for k in range(n_round)] + [T]
        truncated = False
    else:
        n_full = int(math.floor(ratio))  # n_full * delta < T strictly
        nodes = [k * delta for k in range(n_full + 1)] + [T]
        truncated = True
    history = np.array([(j - m) * delta for j in range(m + 1)], dtype=np.float64)
    return Grid(
        b=float(b),
        T=float(T),
        m=int(m),
        delta=delta,
        times=np.asarray(nodes, dtype=np.float64),
        history_times=history,
        truncated=truncated,
    )


@dataclass(frozen=True, eq=False)
class SolutionPath:
    """Grid-indexed values of X, p and S = p * X, plus the phi history.

    ``S[k] == p[k] * X[k]`` holds bit-exactly at every node because S is
    stored as that product.  ``history_S[j]`` is phi sampled at
    ``grid.history_times[j]``.  Immutable once returned.
    """

    grid: Grid
    X: np.ndarray
    p: np.ndarray
    S: np.ndarray
    history_S: np.ndarray
    realization_fingerprint: str

    def __post_init__(self):
        for arr in (self.X, self.p, self.S, self.history_S):
            arr.flags.writeable = False

    @property
    def d(self):
        return self.S.shape[1]

    @property
    def n_nodes(self):
        return self.S.shape[0]


def delayed_state(path, grid, k):
    """The delayed state S(t_k - b) seen by step k.

    For t_k - b <= 0 this is phi(t_k - b) (the stored history sample);
    afterwards it is the computed node k - m.
    """
    if not isinstance(k, (int, np.integer)) or k < 0:
        raise UsageError(f"node index must be a non-negative integer, got {k!r}")
    if k <= grid.m:
        return path.history_S[k]
    idx = k - grid.m
    if idx >= path.n_nodes:
        raise SequencingError(
            f"delayed node {idx} for step {k} has not been computed yet"
        )
    return path.S[idx]


def _x_update(X, f_diag, g_mat, step_events, delta_k):
    """Multiplicative X update: exp of drift time plus per-jump logarithms.

    ``step_events`` is a list of (component j, marks array) pairs for the
    jumps inside the step.  Raises PositivityBreachError when any factor
    1 + g_ij * z fails to be positive.
    """
    factor = np.exp(f_diag * delta_k)
    for j, marks in step_events:
        gcol = g_mat[:, j]
        for z in marks:
            fac = 1.0 + gcol * z
            if np.any(fac <= 0.0):
                i = int(np.argmin(fac))
                raise PositivityBreachError(
                    f"jump factor 1 + g[{i}][{j}]*z = {fac[i]:.6g} <= 0 "
                    f"for mark z = {z:.6g}, g = {gcol[i]:.6g}",
                    i=i,
                    j=j,
                    mark=z,
                    g_value=float(gcol[i]),
                )
            factor = factor * fac
    return X * factor


def _p_update(p, f_mat, delta_k):
    """Linear p update [F * dt + I] p with F the off-diagonal part of f."""
    F = f_mat.copy()
    np.fill_diagonal(F, 0.0)
    return p + delta_k * (F @ p)


def x_step(X_k, delayed, events, delta_k, field):
    """Advance the jump factor X over one step of width delta_k.

    ``events`` is a per-component sequence of (time, mark) lists for the
    jumps in (t_k, t_{k+1}]; coefficients are frozen at ``delayed`` for
    the whole step.
    """
    X_k = np.asarray(X_k, dtype=np.float64)
    if not np.all(np.isfinite(X_k)):
        raise NumericInputError(f"non-finite state input {X_k!r}")
    if len(events) != field.d:
        raise UsageError(f"events must have one entry per component ({field.d})")
    f_diag = field.f_matrix(delayed).diagonal().copy()
    step_events = []
    for j, evs in enumerate(events):
        if evs:
            step_events.append((j, np.asarray([z for _, z in evs], dtype=np.float64)))
    g_mat = field.g_matrix(delayed) if step_events else None
    out = _x_update(X_k, f_diag, g_mat, step_events, delta_k)
    if not np.all(np.isfinite(out)):
        raise OverflowAbortError("non-finite X after step")
    return out


def p_step(p_k, delayed, delta_k, field):
    """Advance the coupling vector p over one step of width delta_k."""
    p_k = np.asarray(p_k, dtype=np.float64)
    out = _p_update(p_k, field.f_matrix(delayed), delta_k)
    if not np.all(np.isfinite(out)):
        raise OverflowAbortError("non-finite p after step")
    return out


def compose(p, X):
    """S = p * X componentwise."""
    return np.asarray(p, dtype=np.float64) * np.asarray(X, dtype=np.float64)


def simulate(scenario, grid, realization):
    """Run the scheme over the whole grid and return the solution path.

    Callers are responsible for having validated the scenario's
    assumptions when ``positivity_mode`` is on; the per-jump positivity
    of every factor is still enforced here and any breach aborts the
    path with the offending entry, node and time attached.
    """
    if realization.d != scenario.d:
        raise UsageError(
            f"realization has {realization.d} components, scenario has {scenario.d}"
        )
    if realization.horizon < grid.T:
        raise UsageError(
            f"realization horizon {realization.horizon} is shorter than the grid horizon {grid.T}"
        )
    if grid.b != scenario.b:
        raise UsageError(f"grid delay {grid.b} does not match scenario delay {scenario.b}")

    field = scenario.field
    d = scenario.d
    m = grid.m
    times = grid.times
    n_steps = grid.n_steps

    history_S = np.empty((m + 1, d))
    for j, t in enumerate(grid.history_times):
        history_S[j] = scenario.phi_at(t)

    # per-component event counters at every node: events in (t_k, t_{k+1}]
    # live between boundaries[j][k] and boundaries[j][k+1]
    boundaries = [np.searchsorted(realization.times[j], times, side="right") for j in range(d)]

    Xs = np.empty((n_steps + 1, d))
    ps = np.empty((n_steps + 1, d))
    Ss = np.empty((n_steps + 1, d))
    X = history_S[m].copy()  # X(0) = phi(0)
    p = np.ones(d)
    Xs[0], ps[0], Ss[0] = X, p, compose(p, X)

    for k in range(n_steps):
        t0 = times[k]
        delta_k = times[k + 1] - t0
        v2 = history_S[k] if k <= m else Ss[k - m]
        f_mat = field.f_matrix(v2)
        step_events = []
        for j in range(d):
            a, bnd = boundaries[j][k], boundaries[j][k + 1]
            if bnd > a:
                step_events.append((j, realization.marks[j][a:bnd]))
        g_mat = field.g_matrix(v2) if step_events else None
        try:
            X = _x_update(X, f_mat.diagonal().copy(), g_mat, step_events, delta_k)
            p = _p_update(p, f_mat, delta_k)
        except SddeError as exc:
            raise exc.at_node(k, float(t0))
        S = compose(p, X)
        if not np.all(np.isfinite(S)):
            raise OverflowAbortError(
                f"non-finite state: X={X!r}, p={p!r}"
            ).at_node(k + 1, float(times[k + 1]))
        Xs[k + 1], ps[k + 1], Ss[k + 1] = X, p, S

    return SolutionPath(
        grid=grid,
        X=Xs,
        p=ps,
        S=Ss,
        history_S=history_S,
        realization_fingerprint=realization.fingerprint,
    )


def _constant_matrix(entries, what):
    rows = []
    for i, row in enumerate(entries):
        vals = []
        for j, entry in enumerate(row):
            if not entry.is_constant:
                raise UnsupportedOracleError(
                    f"{what}[{i}][{j}] is not constant; the closed-form reference "
                    "requires constant coefficients"
                )
            vals.append(entry.constant_value)
        rows.append(vals)
    return np.asarray(rows, dtype=np.float64)


def exact_frozen_solution(scenario, realization, times):
    """Closed-form solution for constant coefficients with no off-diagonal drift.

    With f_ij = 0 (i != j) and constant f_ii, g_ij, each component solves a
    scalar linear jump equation whose solution is the product formula

        S_i(t) = phi_i(0) * exp(f_ii * t) * prod_j prod_{(u,z): u <= t} (1 + g_ij * z).

    Evaluated directly from the realization, independent of any grid.
    Returns an array of shape (len(times), d).
    """
    f_const = _constant_matrix(scenario.field.f_entries, "f")
    g_const = _constant_matrix(scenario.field.g_entries, "g")
    off = f_const.copy()
    np.fill_diagonal(off, 0.0)
    if np.any(off != 0.0):
        raise UnsupportedOracleError("off-diagonal f entries must be identically zero")
    if realization.d != scenario.d:
        raise UsageError("realization dimension does not match the scenario")

    d = scenario.d
    phi0 = scenario.phi_at(0.0)
    f_diag = f_const.diagonal()
    out = np.empty((len(times), d))
    for row, t in enumerate(times):
        values = phi0 * np.exp(f_diag * t)
        for j in range(d):
            ts = realization.times[j]
            zs = realization.marks[j]
            for u, z in zip(ts, zs):
                if u > t:
                    break
                factors = 1.0 + g_const[:, j] * z
                if np.any(factors <= 0.0):
                    i = int(np.argmin(factors))
                    raise PositivityBreachError(
                        f"jump factor 1 + g[{i}][{j}]*z = {factors[i]:.6g} <= 0 in the reference",
                        i=i,
                        j=j,
                        mark=float(z),
                        g_value=float(g_const[i, j]),
                    )
                values = values * factors
        out[row] = values
    return out


def path_to_csv_text(path):
    """Render a solution path as CSV: time, component, X, p, S.

    Rows are time-major, component-minor, starting with the history
    segment (where X is the phi sample and p is one).  Numbers carry 17
    significant digits so rewriting the file is byte-stable.
    """
    fmt = "{:.17g}"
    lines = ["time,component,X,p,S"]
    for j in range(path.grid.m):  # history nodes before t=0 (node 0 is in times)
        t = path.grid.history_times[j]
        for i in range(path.d):
            v = path.history_S[j, i]
            lines.append(
                f"{fmt.format(t)},{i},{fmt.format(v)},{fmt.format(1.0)},{fmt.format(v)}"
            )
    for k in range(path.n_nodes):
        t = path.grid.times[k]
        for i in range(path.d):
            lines.append(
                f"{fmt.format(t)},{i},{fmt.format(path.X[k, i])},"
                f"{fmt.format(path.p[k, i])},{fmt.format(path.S[k, i])}"
            )
    return "\n".join(lines) + "\n"
