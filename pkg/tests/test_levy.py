import math

import numpy as np
import pytest
from scipy import integrate

from sdde_logem import (
    ConfigurationError,
    LevyComponentSpec,
    ShiftedExponentialJumps,
    TwoPointJumps,
    UniformJumps,
    UsageError,
    events_in,
    increment,
    jump_law_from_dict,
    moment_integral,
    realization_to_json,
    sample_jump_realization,
)


def spec_uniform(rate=2.0, lo=-0.5, hi=1.0):
    return LevyComponentSpec(rate, UniformJumps(lo, hi))


class TestLawValidation:
    def test_uniform_requires_ordered_support(self):
        with pytest.raises(ConfigurationError):
            UniformJumps(0.5, 0.5)

    def test_shifted_exponential_requires_positive_scale(self):
        with pytest.raises(ConfigurationError):
            ShiftedExponentialJumps(scale=0.0, shift=-0.1)

    def test_two_point_probability_range(self):
        with pytest.raises(ConfigurationError):
            TwoPointJumps(z1=1.0, prob1=1.5, z2=0.0)

    def test_rate_must_be_nonnegative(self):
        with pytest.raises(ConfigurationError):
            LevyComponentSpec(-1.0, UniformJumps(0.0, 1.0))

    def test_support_floor_clipped_at_zero(self):
        assert UniformJumps(-0.5, 1.0).support_floor == -0.5
        assert UniformJumps(0.2, 1.0).support_floor == 0.0
        assert ShiftedExponentialJumps(1.0, -0.3).support_floor == -0.3
        assert TwoPointJumps(1.0, 0.5, -0.2).support_floor == -0.2

    def test_law_dict_round_trip(self):
        for law in (
            UniformJumps(-0.5, 1.0),
            ShiftedExponentialJumps(0.7, -0.2),
            TwoPointJumps(1.0, 0.25, -0.1),
        ):
            assert jump_law_from_dict(law.to_dict()) == law

    def test_unknown_family_rejected(self):
        with pytest.raises(ConfigurationError):
            jump_law_from_dict({"family": "cauchy", "scale": 1.0})


class TestSampling:
    def test_zero_rate_gives_empty_realization(self):
        specs = [LevyComponentSpec(0.0, UniformJumps(-0.5, 1.0))] * 3
        r = sample_jump_realization(specs, 1.0, 1, 0)
        assert r.total_events == 0

    def test_determinism_bit_identical(self):
        specs = [spec_uniform(), LevyComponentSpec(1.0, TwoPointJumps(0.5, 0.3, -0.2))]
        a = sample_jump_realization(specs, 2.0, 42, 7)
        b = sample_jump_realization(specs, 2.0, 42, 7)
        assert a.fingerprint == b.fingerprint
        for j in range(2):
            assert np.array_equal(a.times[j], b.times[j])
            assert np.array_equal(a.marks[j], b.marks[j])

    def test_streams_differ(self):
        a = sample_jump_realization([spec_uniform()], 2.0, 42, 0)
        b = sample_jump_realization([spec_uniform()], 2.0, 42, 1)
        assert a.fingerprint != b.fingerprint

    def test_event_count_mean_and_mark_mean(self):
        # lambda*T = 2.0; 10^4 streams, 4 standard errors
        n = 10_000
        counts = np.empty(n)
        marks = []
        for i in range(n):
            r = sample_jump_realization([spec_uniform(rate=2.0)], 1.0, 123, i)
            counts[i] = r.times[0].size
            marks.append(r.marks[0])
        se_count = math.sqrt(2.0 / n)
        assert abs(counts.mean() - 2.0) < 4 * se_count
        marks = np.concatenate(marks)
        law_mean = UniformJumps(-0.5, 1.0).mean()
        se_mark = marks.std(ddof=1) / math.sqrt(marks.size)
        assert abs(marks.mean() - law_mean) < 4 * se_mark

    def test_marks_respect_support_floor(self):
        specs = [
            spec_uniform(),
            LevyComponentSpec(3.0, ShiftedExponentialJumps(0.5, -0.25)),
            LevyComponentSpec(3.0, TwoPointJumps(0.4, 0.5, -0.3)),
        ]
        for i in range(200):
            r = sample_jump_realization(specs, 2.0, 5, i)
            for j, spec in enumerate(specs):
                if r.marks[j].size:
                    assert r.marks[j].min() >= spec.law.support_floor

    def test_times_strictly_increasing_in_horizon(self):
        for i in range(100):
            r = sample_jump_realization([spec_uniform(rate=5.0)], 3.0, 11, i)
            ts = r.times[0]
            if ts.size:
                assert np.all(np.diff(ts) > 0)
                assert ts[0] > 0 and ts[-1] <= 3.0

    def test_invalid_inputs(self):
        with pytest.raises(ConfigurationError):
            sample_jump_realization([], 1.0, 0, 0)
        with pytest.raises(ConfigurationError):
            sample_jump_realization([spec_uniform()], 0.0, 0, 0)
        with pytest.raises(ConfigurationError):
            sample_jump_realization([spec_uniform()], 1.0, -1, 0)


class TestQueries:
    def r(self):
        return sample_jump_realization([spec_uniform(rate=4.0)], 2.0, 99, 3)

    def test_empty_interval(self):
        r = self.r()
        assert events_in(r, 0, 0.5, 0.5) == []
        assert increment(r, 0, 0.5, 0.5) == 0.0

    def test_left_endpoint_excluded(self):
        r = self.r()
        ts = r.times[0]
        assert ts.size >= 2, "seed must produce events for this test"
        evs = events_in(r, 0, ts[0], ts[1])
        assert [u for u, _ in evs] == [ts[1]]

    def test_increment_is_direct_sum(self):
        r = self.r()
        s, t = 0.2, 1.7
        expected = sum(z for u, z in zip(r.times[0], r.marks[0]) if s < u <= t)
        assert increment(r, 0, s, t) == pytest.approx(expected, rel=1e-15)

    def test_partition_additivity(self):
        r = self.r()
        cuts = np.linspace(0.0, 2.0, 9)
        total = increment(r, 0, 0.0, 2.0)
        parts = sum(increment(r, 0, a, b) for a, b in zip(cuts[:-1], cuts[1:]))
        assert parts == pytest.approx(total, abs=1e-12)
        events = []
        for a, b in zip(cuts[:-1], cuts[1:]):
            events.extend(events_in(r, 0, a, b))
        assert events == events_in(r, 0, 0.0, 2.0)

    def test_component_out_of_range(self):
        r = self.r()
        with pytest.raises(UsageError):
            increment(r, 1, 0.0, 1.0)
        with pytest.raises(UsageError):
            events_in(r, -1, 0.0, 1.0)

    def test_increment_rejects_bad_interval(self):
        r = self.r()
        with pytest.raises(UsageError):
            increment(r, 0, 1.0, 0.5)
        with pytest.raises(UsageError):
            increment(r, 0, 0.0, 2.5)

    def test_json_serialization(self):
        import json

        r = self.r()
        records = json.loads(realization_to_json(r))
        assert len(records) == r.total_events
        assert all(set(rec) == {"component", "time", "mark"} for rec in records)


class TestMomentIntegral:
    def test_zero_rate(self):
        assert moment_integral(UniformJumps(-0.5, 0.5), 0.0, 2.0) == 0.0

    def test_single_atom(self):
        # rate * (1 + |z1|)^q with all mass on z1 = 1
        law = TwoPointJumps(z1=1.0, prob1=1.0, z2=123.0)
        assert moment_integral(law, 3.0, 2.0) == pytest.approx(12.0, rel=1e-14)

    def test_uniform_against_quadrature(self):
        # int_{-1/2}^{1/2} (1+|z|)^2 dz = 19/12
        law = UniformJumps(-0.5, 0.5)
        value = moment_integral(law, 1.0, 2.0)
        assert value == pytest.approx(19.0 / 12.0, rel=1e-12)
        quad, _ = integrate.quad(lambda z: (1 + abs(z)) ** 2, -0.5, 0.5, epsrel=1e-12)
        assert value == pytest.approx(quad, rel=1e-10)

    @pytest.mark.parametrize("q", [1.0, 2.0, 3.5])
    def test_uniform_asymmetric_against_quadrature(self, q):
        law = UniformJumps(-0.4, 1.3)
        quad, _ = integrate.quad(
            lambda z: (1 + abs(z)) ** q / 1.7, -0.4, 1.3, epsrel=1e-12
        )
        assert moment_integral(law, 2.5, q) == pytest.approx(2.5 * quad, rel=1e-9)

    def test_shifted_exponential_finite_and_positive(self):
        law = ShiftedExponentialJumps(0.8, -0.2)
        for q in (1.0, 2.0, 4.0):
            v = moment_integral(law, 1.5, q)
            assert math.isfinite(v) and v > 0

    def test_shifted_exponential_nonnegative_support_closed_form_q1(self):
        # for shift >= 0: E[(1+Y)^1] = 1 + shift + scale
        law = ShiftedExponentialJumps(0.6, 0.1)
        assert moment_integral(law, 1.0, 1.0) == pytest.approx(1.7, rel=1e-9)

    def test_q_below_one_rejected(self):
        with pytest.raises(UsageError):
            moment_integral(UniformJumps(0.0, 1.0), 1.0, 0.5)
