"""Compound-Poisson driving noise.

Each component j carries an independent finite-activity jump process
Z_j(t) = sum_{k <= N_j(t)} Y_{j,k}: a Poisson stream of event times with
i.i.d. marks drawn from a jump-size law whose support is bounded from
below.  This module provides the parametric mark laws, exact sampling of
event streams from exponential interarrivals, interval queries over a
sampled stream, and the weighted moments of the intensity measure
nu_j = rate_j * law_j used by the assumption checks.

Interval convention: an event at time u belongs to the interval (s, t]
iff s < u <= t.  Queries are half-open on the left and closed on the
right throughout.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import integrate

from .errors import ConfigurationError, UsageError

__all__ = [
    "JumpLaw",
    "UniformJumps",
    "ShiftedExponentialJumps",
    "TwoPointJumps",
    "jump_law_from_dict",
    "LevyComponentSpec",
    "JumpRealization",
    "sample_jump_realization",
    "increment",
    "events_in",
    "moment_integral",
    "realization_to_json",
]


def _require_finite(name, value):
    if not math.isfinite(value):
        raise ConfigurationError(f"{name} must be finite, got {value!r}")
    return float(value)


class JumpLaw:
    """Base class for jump-size (mark) distributions.

    Concrete laws expose their support interval, analytic mean, exact
    sampling, and the weighted moment integral(q) = E[(1 + |Y|)^q] used
    by the moment-bound checks.  Supports are bounded from below; the
    ``support_floor`` is the lower bound clipped at zero, i.e. the -R of
    the mark space [-R, infinity).
    """

    family = "abstract"

    def support(self):
        """Return (lo, hi) with hi possibly ``math.inf``."""
        raise NotImplementedError

    @property
    def support_floor(self):
        lo, _ = self.support()
        return min(lo, 0.0)

    def mean(self):
        raise NotImplementedError

    def sample(self, rng, n):
        raise NotImplementedError

    def weight_moment(self, q):
        """E[(1 + |Y|)^q] for this law."""
        raise NotImplementedError

    def to_dict(self):
        raise NotImplementedError


def _weight_integral(a, b, q):
    # int_a^b (1+|z|)^q dz, split at zero; a <= b, both finite.
    total = 0.0
    if a < 0.0:
        top = min(b, 0.0)
        total += ((1.0 - a) ** (q + 1.0) - (1.0 - top) ** (q + 1.0)) / (q + 1.0)
    if b > 0.0:
        bot = max(a, 0.0)
        total += ((1.0 + b) ** (q + 1.0) - (1.0 + bot) ** (q + 1.0)) / (q + 1.0)
    return total


@dataclass(frozen=True)
class UniformJumps(JumpLaw):
    """Marks uniform on [lo, hi)."""

    lo: float
    hi: float
    family = "uniform"

    def __post_init__(self):
        lo = _require_finite("uniform.lo", self.lo)
        hi = _require_finite("uniform.hi", self.hi)
        if not lo < hi:
            raise ConfigurationError(f"uniform law requires lo < hi, got lo={lo}, hi={hi}")

    def support(self):
        return (self.lo, self.hi)

    def mean(self):
        return 0.5 * (self.lo + self.hi)

    def sample(self, rng, n):
        return rng.uniform(self.lo, self.hi, n)

    def weight_moment(self, q):
        return _weight_integral(self.lo, self.hi, q) / (self.hi - self.lo)

    def to_dict(self):
        return {"family": "uniform", "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class ShiftedExponentialJumps(JumpLaw):
    """Marks shift + Exponential(scale); support [shift, infinity)."""

    scale: float
    shift: float
    family = "shifted_exponential"

    def __post_init__(self):
        scale = _require_finite("shifted_exponential.scale", self.scale)
        _require_finite("shifted_exponential.shift", self.shift)
        if scale <= 0.0:
            raise ConfigurationError(
                f"shifted_exponential law requires scale > 0, got {scale}"
            )

    def support(self):
        return (self.shift, math.inf)

    def mean(self):
        return self.shift + self.scale

    def sample(self, rng, n):
        return self.shift + rng.exponential(self.scale, n)

    def weight_moment(self, q):
        scale, shift = self.scale, self.shift

        def density_weighted(z):
            return (1.0 + abs(z)) ** q * math.exp(-(z - shift) / scale) / scale

        opts = {"epsabs": 0.0, "epsrel": 1e-10, "limit": 200}
        if shift < 0.0:
            head, _ = integrate.quad(density_weighted, shift, 0.0, **opts)
            tail, _ = integrate.quad(density_weighted, 0.0, math.inf, **opts)
            return head + tail
        value, _ = integrate.quad(density_weighted, shift, math.inf, **opts)
        return value

    def to_dict(self):
        return {"family": "shifted_exponential", "scale": self.scale, "shift": self.shift}


@dataclass(frozen=True)
class TwoPointJumps(JumpLaw):
    """Marks equal z1 with probability prob1, else z2."""

    z1: float
    prob1: float
    z2: float
    family = "two_point"

    def __post_init__(self):
        _require_finite("two_point.z1", self.z1)
        _require_finite("two_point.z2", self.z2)
        p = _require_finite("two_point.prob1", self.prob1)
        if not 0.0 <= p <= 1.0:
            raise ConfigurationError(f"two_point.prob1 must lie in [0, 1], got {p}")

    def _atoms(self):
        atoms = []
        if self.prob1 > 0.0:
            atoms.append((self.z1, self.prob1))
        if self.prob1 < 1.0:
            atoms.append((self.z2, 1.0 - self.prob1))
        return atoms

    def support(self):
        zs = [z for z, _ in self._atoms()]
        return (min(zs), max(zs))

    def mean(self):
        return sum(z * w for z, w in self._atoms())

    def sample(self, rng, n):
        return np.where(rng.random(n) < self.prob1, self.z1, self.z2)

    def weight_moment(self, q):
        return sum(w * (1.0 + abs(z)) ** q for z, w in self._atoms())

    def to_dict(self):
        return {"family": "two_point", "z1": self.z1, "prob1": self.prob1, "z2": self.z2}


_LAW_FAMILIES = {
    "uniform": UniformJumps,
    "shifted_exponential": ShiftedExponentialJumps,
    "two_point": TwoPointJumps,
}


def jump_law_from_dict(doc):
    """Build a jump law from its dict form (inverse of ``to_dict``)."""
    if not isinstance(doc, dict) or "family" not in doc:
        raise ConfigurationError("jump law must be an object with a 'family' key")
    family = doc["family"]
    cls = _LAW_FAMILIES.get(family)
    if cls is None:
        raise ConfigurationError(
            f"unknown jump-law family {family!r}; expected one of {sorted(_LAW_FAMILIES)}"
        )
    kwargs = {k: v for k, v in doc.items() if k != "family"}
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigurationError(f"bad parameters for jump-law family {family!r}: {exc}") from exc


@dataclass(frozen=True)
class LevyComponentSpec:
    """Intensity and mark law of one driving component."""

    rate: float
    law: JumpLaw

    def __post_init__(self):
        rate = _require_finite("rate", self.rate)
        if rate < 0.0:
            raise ConfigurationError(f"rate must be non-negative, got {rate}")
        if not isinstance(self.law, JumpLaw):
            raise ConfigurationError("law must be a JumpLaw instance")

    def to_dict(self):
        return {"rate": self.rate, "law": self.law.to_dict()}


@dataclass(frozen=True, eq=False)
class JumpRealization:
    """One sampled driving path: per component, sorted event times with marks.

    Immutable after construction; the arrays are marked read-only so a
    realization can be shared across worker threads and coupled grids.
    """

    horizon: float
    times: tuple
    marks: tuple

    def __post_init__(self):
        if not self.horizon > 0.0:
            raise ConfigurationError(f"horizon must be > 0, got {self.horizon}")
        if len(self.times) != len(self.marks):
            raise ConfigurationError("times and marks must have one array per component")
        for j, (ts, zs) in enumerate(zip(self.times, self.marks)):
            if ts.shape != zs.shape or ts.ndim != 1:
                raise ConfigurationError(f"component {j}: times/marks must be matching 1-D arrays")
            if ts.size:
                if not np.all(np.isfinite(ts)) or not np.all(np.isfinite(zs)):
                    raise ConfigurationError(f"component {j}: non-finite event data")
                if not (ts[0] > 0.0 and ts[-1] <= self.horizon):
                    raise ConfigurationError(f"component {j}: event times must lie in (0, horizon]")
                if ts.size > 1 and not np.all(np.diff(ts) > 0.0):
                    raise ConfigurationError(f"component {j}: event times must be strictly increasing")
            ts.flags.writeable = False
            zs.flags.writeable = False

    @property
    def d(self):
        return len(self.times)

    @property
    def total_events(self):
        return int(sum(ts.size for ts in self.times))

    @cached_property
    def fingerprint(self):
        h = hashlib.sha256()
        h.update(np.float64(self.horizon).tobytes())
        for ts, zs in zip(self.times, self.marks):
            h.update(ts.tobytes())
            h.update(zs.tobytes())
        return h.hexdigest()


def empty_realization(d, horizon):
    """A realization with no events in any of the d components."""
    empty = tuple(np.empty(0, dtype=np.float64) for _ in range(d))
    return JumpRealization(horizon=float(horizon), times=empty, marks=tuple(np.empty(0) for _ in range(d)))


def sample_jump_realization(specs, horizon, seed, stream_index):
    """Sample one compound-Poisson realization for all components.

    Event times come from exponential interarrivals (exact simulation of
    the finite-activity process), marks from each component's law.  The
    draw is a pure function of (specs, horizon, seed, stream_index):
    components are consumed in spec order, times before marks, so the
    result is bit-reproducible across runs and thread schedules.
    """
    if not specs:
        raise ConfigurationError("specs must contain at least one component")
    horizon = _require_finite("horizon", horizon)
    if horizon <= 0.0:
        raise ConfigurationError(f"horizon must be > 0, got {horizon}")
    if not isinstance(seed, (int, np.integer)) or seed < 0:
        raise ConfigurationError(f"seed must be a non-negative integer, got {seed!r}")
    if not isinstance(stream_index, (int, np.integer)) or stream_index < 0:
        raise ConfigurationError(f"stream_index must be a non-negative integer, got {stream_index!r}")

    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((int(seed), int(stream_index)))))
    all_times = []
    all_marks = []
    for spec in specs:
        ts = []
        if spec.rate > 0.0:
            scale = 1.0 / spec.rate
            t = 0.0
            while True:
                gap = rng.exponential(scale)
                if gap == 0.0:  # zero interarrival would break strict ordering
                    continue
                t += gap
                if t > horizon:
                    break
                ts.append(t)
        times = np.asarray(ts, dtype=np.float64)
        marks = np.asarray(spec.law.sample(rng, times.size), dtype=np.float64)
        floor = spec.law.support_floor
        if marks.size and float(marks.min()) < floor:
            raise ConfigurationError(f"sampled mark below the law's support floor {floor}")
        all_times.append(times)
        all_marks.append(marks)
    return JumpRealization(horizon=horizon, times=tuple(all_times), marks=tuple(all_marks))


def _component_slice(realization, j, s, t):
    if not isinstance(j, (int, np.integer)) or not 0 <= j < realization.d:
        raise UsageError(f"component index {j!r} out of range for d={realization.d}")
    if s < 0.0 or t < s:
        raise UsageError(f"require 0 <= s <= t, got s={s}, t={t}")
    ts = realization.times[j]
    a = int(np.searchsorted(ts, s, side="right"))
    b = int(np.searchsorted(ts, t, side="right"))
    return a, b


def increment(realization, j, s, t):
    """Z_j(t) - Z_j(s): the sum of component-j marks with time in (s, t]."""
    if t > realization.horizon:
        raise UsageError(f"t={t} exceeds the realization horizon {realization.horizon}")
    a, b = _component_slice(realization, j, s, t)
    return float(np.sum(realization.marks[j][a:b]))


def events_in(realization, j, s, t):
    """Time-ordered [(time, mark), ...] of component j with time in (s, t]."""
    a, b = _component_slice(realization, j, s, t)
    ts = realization.times[j][a:b]
    zs = realization.marks[j][a:b]
    return list(zip(ts.tolist(), zs.tolist()))


def moment_integral(law, rate, q):
    """int (1 + |z|)^q nu(dz) for the intensity measure nu = rate * law."""
    if q < 1.0:
        raise UsageError(f"q must be >= 1, got {q}")
    rate = _require_finite("rate", rate)
    if rate < 0.0:
        raise ConfigurationError(f"rate must be non-negative, got {rate}")
    if rate == 0.0:
        return 0.0
    return rate * law.weight_moment(q)


def realization_to_json(realization):
    """Debug serialization: JSON array of {component, time, mark} records."""
    records = []
    for j in range(realization.d):
        for u, z in zip(realization.times[j].tolist(), realization.marks[j].tolist()):
            records.append({"component": j, "time": u, "mark": z})
    return json.dumps(records)
