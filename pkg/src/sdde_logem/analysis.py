"""Monte Carlo verification harness.

Strong-error estimation couples a fine grid with each coarse grid through
a shared jump realization per path index, so their difference measures
discretization error rather than noise.  The remaining studies audit the
scheme's guarantees: positivity of every stored state, stability of
sup-moments across refinements, and the step-increment scaling that
drives the convergence bound.

Every estimator is a pure function of (scenario, parameters, seed): the
i-th path draws its realization from the substream (seed, i), and partial
results are reduced in path-index order, so reports are bit-identical
across runs and worker counts.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .coefficients import validate_assumptions
from .errors import (
    AssumptionValidationError,
    ConfigurationError,
    ExperimentAbortError,
    PositivityBreachError,
    SddeError,
    UnsupportedOracleError,
    UsageError,
)
from .levy import empty_realization, sample_jump_realization
from .scheme import _constant_matrix, _p_update, _x_update, build_grid, delayed_state, simulate

__all__ = [
    "RateFit",
    "fit_rate",
    "ConvergenceLevel",
    "ConvergenceReport",
    "coupled_strong_error",
    "DeterministicReferenceReport",
    "deterministic_reference_error",
    "PositivityAudit",
    "positivity_audit",
    "MomentLevel",
    "MomentReport",
    "moment_study",
    "IncrementLevel",
    "IncrementReport",
    "increment_scaling",
]


# ---------------------------------------------------------------------------
# rate fitting

@dataclass(frozen=True)
class RateFit:
    """Least-squares fit of log(error) against log(delta).

    ``exact`` marks the degenerate case in which every error was zero
    (the scheme reproduced the reference exactly), where no slope exists.
    """

    slope: float | None
    intercept: float | None
    residual: float | None
    exact: bool
    n_used: int
    n_excluded: int


def fit_rate(pairs):
    """Fit a log-log slope through (delta, error) pairs.

    Zero errors are excluded (and counted); if all are zero the result is
    the distinguished exact fit.  A single surviving pair is an error.
    """
    pairs = list(pairs)
    if len(pairs) < 2:
        raise UsageError(f"need at least 2 (delta, error) pairs, got {len(pairs)}")
    kept = []
    for delta, err in pairs:
        if err < 0.0:
            raise UsageError(f"errors must be non-negative, got {err}")
        if err > 0.0:
            kept.append((delta, err))
    excluded = len(pairs) - len(kept)
    if not kept:
        return RateFit(slope=None, intercept=None, residual=None, exact=True,
                       n_used=0, n_excluded=excluded)
    if len(kept) < 2:
        raise UsageError("insufficient data: fewer than 2 nonzero errors to fit")
    x = np.log([delta for delta, _ in kept])
    y = np.log([err for _, err in kept])
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.sum((np.polyval([slope, intercept], x) - y) ** 2))
    return RateFit(slope=float(slope), intercept=float(intercept), residual=residual,
                   exact=False, n_used=len(kept), n_excluded=excluded)


# ---------------------------------------------------------------------------
# shared machinery

def _run_chunk(job):
    worker, common, lo, hi = job
    return [worker(common, i) for i in range(lo, hi)]


def _map_paths(worker, common, n_paths, threads):
    """Evaluate worker(common, i) for i = 0..n_paths-1, in index order."""
    threads = 1 if threads is None else int(threads)
    if threads <= 1 or n_paths <= 1:
        return [worker(common, i) for i in range(n_paths)]
    n_chunks = min(n_paths, threads * 4)
    bounds = np.linspace(0, n_paths, n_chunks + 1).astype(int)
    jobs = [
        (worker, common, int(lo), int(hi))
        for lo, hi in zip(bounds[:-1], bounds[1:])
        if hi > lo
    ]
    results = []
    with ProcessPoolExecutor(max_workers=threads) as pool:
        for chunk in pool.map(_run_chunk, jobs):
            results.extend(chunk)
    return results


def _require_validated(scenario, q_list=(2.0, 4.0)):
    if not scenario.positivity_mode:
        return
    report = validate_assumptions(scenario, list(q_list))
    if not report.passed:
        raise AssumptionValidationError(
            "assumption validation failed: " + "; ".join(report.failures()),
            failures=report.failures(),
        )


def _wrap_path_error(exc, i):
    return ExperimentAbortError(f"path {i} failed: {exc}", path_index=i)


def _sup_norm_diff(a, b):
    d = a - b
    return float(np.sqrt((d * d).sum(axis=1)).max())


# ---------------------------------------------------------------------------
# coupled strong error

def _interpolate_at(scenario, path, u, include_jump_at_u, realization):
    """Evaluate the scheme's continuous interpolation of S at time u > 0."""
    grid = path.grid
    k = int(np.searchsorted(grid.times, u, side="left")) - 1
    v2 = delayed_state(path, grid, k)
    f_mat = scenario.field.f_matrix(v2)
    side = "right" if include_jump_at_u else "left"
    step_events = []
    for j in range(scenario.d):
        ts = realization.times[j]
        a = int(np.searchsorted(ts, grid.times[k], side="right"))
        b = int(np.searchsorted(ts, u, side=side))
        if b > a:
            step_events.append((j, realization.marks[j][a:b]))
    g_mat = scenario.field.g_matrix(v2) if step_events else None
    dt = u - grid.times[k]
    X_u = _x_update(path.X[k], f_mat.diagonal().copy(), g_mat, step_events, dt)
    p_u = _p_update(path.p[k], f_mat, dt)
    return p_u * X_u


def _coarse_to_fine_indices(coarse_grid, fine_grid, ratio):
    idx = np.arange(coarse_grid.n_nodes) * ratio
    idx[-1] = fine_grid.n_nodes - 1  # both last nodes sit at T exactly
    return idx


def _strong_error_path(common, i):
    scenario, fine_grid, coarse_grids, p, seed, augment = common
    try:
        realization = sample_jump_realization(scenario.levy, scenario.T, seed, i)
        fine_path = simulate(scenario, fine_grid, realization)
        sups = []
        for cgrid in coarse_grids:
            cpath = simulate(scenario, cgrid, realization)
            if cpath.realization_fingerprint != fine_path.realization_fingerprint:
                raise UsageError("coarse and fine paths consumed different realizations")
            ratio = fine_grid.m // cgrid.m
            idx = _coarse_to_fine_indices(cgrid, fine_grid, ratio)
            sup = _sup_norm_diff(fine_path.S[idx], cpath.S)
            aug = sup
            if augment:
                ctimes = cgrid.times
                for j in range(scenario.d):
                    for u in realization.times[j]:
                        pos = int(np.searchsorted(ctimes, u))
                        if pos < len(ctimes) and ctimes[pos] == u:
                            continue  # the node sup already sees this time
                        for incl in (True, False):
                            sf = _interpolate_at(scenario, fine_path, u, incl, realization)
                            sc = _interpolate_at(scenario, cpath, u, incl, realization)
                            aug = max(aug, float(np.linalg.norm(sf - sc)))
            sups.append((sup ** p, aug ** p))
        return sups
    except SddeError as exc:
        raise _wrap_path_error(exc, i) from exc


@dataclass(frozen=True)
class ConvergenceLevel:
    m: int
    delta: float
    n_paths: int
    error: float
    stderr: float
    mean_pow: float
    stderr_pow: float
    error_augmented: float | None


@dataclass(frozen=True)
class ConvergenceReport:
    """Per-level strong-error estimates with the fitted log-log rate."""

    levels: tuple
    slope: float | None
    intercept: float | None
    residual: float | None
    exact: bool
    augmented_slope: float | None
    p: float
    seed: int
    fine_m: int
    n_paths: int
    scenario_digest: str

    def to_csv_text(self):
        fmt = "{:.17g}"
        lines = ["delta,n_paths,p,error,stderr"]
        for lv in self.levels:
            lines.append(
                f"{fmt.format(lv.delta)},{lv.n_paths},{fmt.format(self.p)},"
                f"{fmt.format(lv.error)},{fmt.format(lv.stderr)}"
            )
        return "\n".join(lines) + "\n"

    def to_json_dict(self):
        return {
            "levels": [
                {
                    "m": lv.m,
                    "delta": lv.delta,
                    "n_paths": lv.n_paths,
                    "error": lv.error,
                    "stderr": lv.stderr,
                    "mean_pow": lv.mean_pow,
                    "stderr_pow": lv.stderr_pow,
                    "error_augmented": lv.error_augmented,
                }
                for lv in self.levels
            ],
            "slope": self.slope,
            "intercept": self.intercept,
            "residual": self.residual,
            "exact": self.exact,
            "augmented_slope": self.augmented_slope,
            "p": self.p,
            "seed": self.seed,
            "fine_m": self.fine_m,
            "n_paths": self.n_paths,
            "scenario_digest": self.scenario_digest,
        }


def coupled_strong_error(scenario, fine_m, coarse_m_list, p, n_paths, seed,
                         threads=1, augment_jump_times=True):
    """Estimate E[sup_t |S_fine - S_coarse|^p]^(1/p) per coarse level.

    Path i couples all grids through the realization drawn from
    (seed, i).  The sup runs over coarse nodes; alongside it an augmented
    sup also evaluates both interpolations at jump times that land
    strictly inside coarse steps (just before and just after the jump).
    The fitted slope uses the node-sup errors.  A single failed path
    aborts the whole experiment: partial averages would be biased.
    """
    if p < 2.0:
        raise UsageError(f"p must be >= 2, got {p}")
    if n_paths < 1:
        raise UsageError(f"n_paths must be >= 1, got {n_paths}")
    if not coarse_m_list:
        raise ConfigurationError("coarse_m_list must not be empty")
    coarse_sorted = sorted(int(m) for m in coarse_m_list)
    for m in coarse_sorted:
        if fine_m % m != 0:
            raise ConfigurationError(
                f"coarse m={m} does not divide fine_m={fine_m}; grids must be nested"
            )
    if fine_m < 8 * coarse_sorted[-1]:
        raise ConfigurationError(
            f"fine_m={fine_m} must be at least 8x the largest coarse m={coarse_sorted[-1]} "
            "to serve as the reference"
        )
    _require_validated(scenario)

    fine_grid = build_grid(scenario.b, scenario.T, int(fine_m))
    coarse_grids = [build_grid(scenario.b, scenario.T, m) for m in coarse_sorted]
    common = (scenario, fine_grid, coarse_grids, float(p), int(seed), bool(augment_jump_times))
    per_path = _map_paths(_strong_error_path, common, int(n_paths), threads)

    sup_p = np.asarray([[lvl[0] for lvl in row] for row in per_path])  # (n_paths, n_levels)
    aug_p = np.asarray([[lvl[1] for lvl in row] for row in per_path])

    levels = []
    pairs = []
    aug_pairs = []
    for col, grid in enumerate(coarse_grids):
        vals = sup_p[:, col]
        mean_pow = float(vals.mean())
        stderr_pow = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
        error = mean_pow ** (1.0 / p)
        stderr = (
            stderr_pow * error / (p * mean_pow) if mean_pow > 0.0 else 0.0
        )  # delta method through the 1/p root
        aug_mean = float(aug_p[:, col].mean())
        error_aug = aug_mean ** (1.0 / p) if augment_jump_times else None
        levels.append(
            ConvergenceLevel(
                m=grid.m,
                delta=grid.delta,
                n_paths=int(n_paths),
                error=error,
                stderr=stderr,
                mean_pow=mean_pow,
                stderr_pow=stderr_pow,
                error_augmented=error_aug,
            )
        )
        pairs.append((grid.delta, error))
        if error_aug is not None:
            aug_pairs.append((grid.delta, error_aug))

    levels.sort(key=lambda lv: -lv.delta)
    fit = fit_rate(pairs) if len(pairs) >= 2 else RateFit(None, None, None, False, 0, 0)
    aug_slope = None
    if augment_jump_times and len(aug_pairs) >= 2:
        try:
            aug_fit = fit_rate(aug_pairs)
            aug_slope = aug_fit.slope
        except UsageError:
            aug_slope = None
    return ConvergenceReport(
        levels=tuple(levels),
        slope=fit.slope,
        intercept=fit.intercept,
        residual=fit.residual,
        exact=fit.exact,
        augmented_slope=aug_slope,
        p=float(p),
        seed=int(seed),
        fine_m=int(fine_m),
        n_paths=int(n_paths),
        scenario_digest=scenario.digest(),
    )


# ---------------------------------------------------------------------------
# deterministic first-order reference

@dataclass(frozen=True)
class DeterministicReferenceReport:
    """Sup-node errors against the matrix-exponential flow, per grid level."""

    levels: tuple  # (m, delta, error)
    ratios: tuple  # error[l] / error[l+1] between consecutive levels
    horizon: float

    def to_json_dict(self):
        return {
            "levels": [{"m": m, "delta": d, "error": e} for m, d, e in self.levels],
            "ratios": [None if r is None else r for r in self.ratios],
            "horizon": self.horizon,
        }


def deterministic_reference_error(scenario, m_list):
    """Per-level sup error against exp(A t) phi(0) for the noise-free system.

    Requires g identically zero and constant f; runs on [0, min(T, b)]
    where the delayed argument is the known initial path, so the flow of
    dS/dt = A S with A = f is the exact reference (computed with the
    scaling-and-squaring matrix exponential).
    """
    g_const = _constant_matrix(scenario.field.g_entries, "g")
    if np.any(g_const != 0.0):
        raise UnsupportedOracleError("deterministic reference requires g identically zero")
    A = _constant_matrix(scenario.field.f_entries, "f")
    horizon = min(scenario.T, scenario.b)
    phi0 = scenario.phi_at(0.0)
    realization = empty_realization(scenario.d, horizon)

    levels = []
    for m in sorted(int(m) for m in m_list):
        grid = build_grid(scenario.b, horizon, m)
        path = simulate(scenario, grid, realization)
        ref = np.empty_like(path.S)
        for k, t in enumerate(grid.times):
            ref[k] = expm(A * t) @ phi0
        levels.append((grid.m, grid.delta, _sup_norm_diff(path.S, ref)))

    levels.sort(key=lambda lv: -lv[1])  # decreasing delta
    ratios = []
    for (_, _, e0), (_, _, e1) in zip(levels, levels[1:]):
        ratios.append(e0 / e1 if e1 > 0.0 else None)
    return DeterministicReferenceReport(
        levels=tuple(levels), ratios=tuple(ratios), horizon=horizon
    )


# ---------------------------------------------------------------------------
# positivity audit

def _audit_path(common, i):
    scenario, grid, seed = common
    realization = sample_jump_realization(scenario.levy, scenario.T, seed, i)
    try:
        path = simulate(scenario, grid, realization)
    except PositivityBreachError as exc:
        return (math.nan, 0, 0, str(exc))
    except SddeError as exc:
        raise _wrap_path_error(exc, i) from exc
    S = path.S
    return (float(S.min()), int((S < 0.0).sum()), int(S.size), None)


@dataclass(frozen=True)
class PositivityAudit:
    n_paths: int
    completed_paths: int
    breached_paths: int
    first_breach: str | None
    entries_checked: int
    negative_entries: int
    min_value: float | None
    per_path_min_summary: dict
    seed: int
    scenario_digest: str

    def to_json_dict(self):
        return {
            "n_paths": self.n_paths,
            "completed_paths": self.completed_paths,
            "breached_paths": self.breached_paths,
            "first_breach": self.first_breach,
            "entries_checked": self.entries_checked,
            "negative_entries": self.negative_entries,
            "min_value": self.min_value,
            "per_path_min_summary": dict(self.per_path_min_summary),
            "seed": self.seed,
            "scenario_digest": self.scenario_digest,
        }


def positivity_audit(scenario, grid, n_paths, seed, threads=1):
    """Simulate n paths and count node-component entries below zero.

    Paths that abort with a positivity breach are reported (count plus
    the first diagnostic) rather than crashing the audit, so the audit
    can also characterize scenarios that fail their hypotheses.
    """
    if not scenario.positivity_mode:
        raise UsageError("positivity_audit requires a positivity-mode scenario")
    results = _map_paths(_audit_path, (scenario, grid, int(seed)), int(n_paths), threads)
    mins = [r[0] for r in results if r[3] is None]
    breaches = [r[3] for r in results if r[3] is not None]
    negatives = sum(r[1] for r in results)
    entries = sum(r[2] for r in results)
    if mins:
        arr = np.asarray(mins)
        summary = {
            "min": float(arr.min()),
            "q25": float(np.quantile(arr, 0.25)),
            "median": float(np.quantile(arr, 0.5)),
            "q75": float(np.quantile(arr, 0.75)),
            "max": float(arr.max()),
        }
        min_value = float(arr.min())
    else:
        summary = {}
        min_value = None
    return PositivityAudit(
        n_paths=int(n_paths),
        completed_paths=len(mins),
        breached_paths=len(breaches),
        first_breach=breaches[0] if breaches else None,
        entries_checked=entries,
        negative_entries=int(negatives),
        min_value=min_value,
        per_path_min_summary=summary,
        seed=int(seed),
        scenario_digest=scenario.digest(),
    )


# ---------------------------------------------------------------------------
# moment stability

def _moment_path(common, i):
    scenario, grids, q, seed = common
    try:
        realization = sample_jump_realization(scenario.levy, scenario.T, seed, i)
        return tuple(
            float(np.abs(simulate(scenario, grid, realization).X).max()) ** q
            for grid in grids
        )
    except SddeError as exc:
        raise _wrap_path_error(exc, i) from exc


@dataclass(frozen=True)
class MomentLevel:
    m: int
    delta: float
    estimate: float
    stderr: float


@dataclass(frozen=True)
class MomentReport:
    levels: tuple
    q: float
    n_paths: int
    seed: int
    scenario_digest: str

    def to_json_dict(self):
        return {
            "levels": [
                {"m": lv.m, "delta": lv.delta, "estimate": lv.estimate, "stderr": lv.stderr}
                for lv in self.levels
            ],
            "q": self.q,
            "n_paths": self.n_paths,
            "seed": self.seed,
            "scenario_digest": self.scenario_digest,
        }


def moment_study(scenario, m_list, q, n_paths, seed, threads=1):
    """Estimate E[sup over nodes and components |X|^q] per grid level.

    All levels share the same realizations (same (seed, i) streams) so
    that ratios across levels isolate the grid dependence.
    """
    if q < 1.0:
        raise UsageError(f"q must be >= 1, got {q}")
    _require_validated(scenario)
    grids = [build_grid(scenario.b, scenario.T, int(m)) for m in sorted(m_list)]
    results = _map_paths(_moment_path, (scenario, grids, float(q), int(seed)),
                         int(n_paths), threads)
    values = np.asarray(results)  # (n_paths, n_levels)
    levels = []
    for col, grid in enumerate(grids):
        v = values[:, col]
        stderr = float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else 0.0
        levels.append(MomentLevel(m=grid.m, delta=grid.delta,
                                  estimate=float(v.mean()), stderr=stderr))
    levels.sort(key=lambda lv: -lv.delta)
    return MomentReport(levels=tuple(levels), q=float(q), n_paths=int(n_paths),
                        seed=int(seed), scenario_digest=scenario.digest())


# ---------------------------------------------------------------------------
# step-increment scaling

def _increment_path(common, i):
    scenario, grids, p, seed = common
    try:
        realization = sample_jump_realization(scenario.levy, scenario.T, seed, i)
        out = []
        for grid in grids:
            S = simulate(scenario, grid, realization).S
            d = np.diff(S, axis=0)
            out.append(np.sqrt((d * d).sum(axis=1)) ** p)
        return out
    except SddeError as exc:
        raise _wrap_path_error(exc, i) from exc


@dataclass(frozen=True)
class IncrementLevel:
    m: int
    delta: float
    estimate: float
    stderr: float
    argmax_node: int


@dataclass(frozen=True)
class IncrementReport:
    levels: tuple
    slope: float | None
    intercept: float | None
    residual: float | None
    exact: bool
    p: float
    n_paths: int
    seed: int
    scenario_digest: str

    def to_json_dict(self):
        return {
            "levels": [
                {
                    "m": lv.m,
                    "delta": lv.delta,
                    "estimate": lv.estimate,
                    "stderr": lv.stderr,
                    "argmax_node": lv.argmax_node,
                }
                for lv in self.levels
            ],
            "slope": self.slope,
            "intercept": self.intercept,
            "residual": self.residual,
            "exact": self.exact,
            "p": self.p,
            "n_paths": self.n_paths,
            "seed": self.seed,
            "scenario_digest": self.scenario_digest,
        }


def increment_scaling(scenario, m_list, p, n_paths, seed, threads=1):
    """Estimate the worst per-step increment moment, per grid level.

    For each node k the Monte Carlo mean of |S(t_{k+1}) - S(t_k)|^p is
    formed; the level estimate is the maximum of those means over k.
    (The maximum is taken over the per-node expectations, not inside
    them: a single O(1) jump somewhere in [0, T] would otherwise pin the
    pathwise max at a level-independent constant and hide the step-size
    scaling this estimator is meant to expose.)
    """
    if p < 2.0:
        raise UsageError(f"p must be >= 2, got {p}")
    _require_validated(scenario)
    grids = [build_grid(scenario.b, scenario.T, int(m)) for m in sorted(m_list)]
    results = _map_paths(_increment_path, (scenario, grids, float(p), int(seed)),
                         int(n_paths), threads)
    levels = []
    pairs = []
    for col, grid in enumerate(grids):
        mat = np.asarray([row[col] for row in results])  # (n_paths, n_steps)
        node_means = mat.mean(axis=0)
        argmax = int(np.argmax(node_means))
        estimate = float(node_means[argmax])
        column = mat[:, argmax]
        stderr = float(column.std(ddof=1) / math.sqrt(len(column))) if len(column) > 1 else 0.0
        levels.append(IncrementLevel(m=grid.m, delta=grid.delta, estimate=estimate,
                                     stderr=stderr, argmax_node=argmax))
        pairs.append((grid.delta, estimate))
    levels.sort(key=lambda lv: -lv.delta)
    fit = fit_rate(pairs) if len(pairs) >= 2 else RateFit(None, None, None, False, 0, 0)
    return IncrementReport(
        levels=tuple(levels),
        slope=fit.slope,
        intercept=fit.intercept,
        residual=fit.residual,
        exact=fit.exact,
        p=float(p),
        n_paths=int(n_paths),
        seed=int(seed),
        scenario_digest=scenario.digest(),
    )
