import numpy as np
import pytest

from sdde_logem import (
    CoefficientField,
    ConfigurationError,
    Constant,
    ConstantPath,
    HolderPowerPath,
    LevyComponentSpec,
    PositivityBreachError,
    Scenario,
    SequencingError,
    Sigmoid,
    UniformJumps,
    UnsupportedOracleError,
    build_grid,
    compose,
    delayed_state,
    empty_realization,
    exact_frozen_solution,
    events_in,
    p_step,
    path_to_csv_text,
    sample_jump_realization,
    simulate,
    x_step,
)
from sdde_logem.presets import scalar_constant


def const_field(d, f=0.0, g=0.0):
    return CoefficientField(
        d=d,
        f_entries=tuple(tuple(Constant(f) for _ in range(d)) for _ in range(d)),
        g_entries=tuple(tuple(Constant(g) for _ in range(d)) for _ in range(d)),
    )


class TestGrid:
    def test_aligned_grid(self):
        grid = build_grid(1.0, 1.0, 4)
        assert grid.delta == 0.25
        assert np.array_equal(grid.times, [0.0, 0.25, 0.5, 0.75, 1.0])
        assert np.array_equal(grid.history_times, [-1.0, -0.75, -0.5, -0.25, 0.0])
        assert not grid.truncated

    def test_truncated_final_step(self):
        grid = build_grid(1.0, 2.1, 2)
        assert grid.truncated
        assert np.allclose(grid.times, [0.0, 0.5, 1.0, 1.5, 2.0, 2.1])
        assert grid.times[-1] == 2.1

    def test_delay_alignment(self):
        for b, m in [(1.0, 4), (0.3, 5), (0.7, 9)]:
            grid = build_grid(b, 2.0, m)
            # every step start minus the delay is a node or history node
            starts = grid.times[:-1]
            all_nodes = np.concatenate([grid.history_times[:-1], grid.times])
            for k, t in enumerate(starts):
                assert (k - m) * grid.delta in all_nodes

    def test_short_horizon_single_step(self):
        grid = build_grid(1.0, 0.1, 4)
        assert np.array_equal(grid.times, [0.0, 0.1])

    def test_invalid_parameters(self):
        with pytest.raises(ConfigurationError):
            build_grid(1.0, 1.0, 0)
        with pytest.raises(ConfigurationError):
            build_grid(2.0, 1.0, 2)  # delta = 1 violates delta < 1
        with pytest.raises(ConfigurationError):
            build_grid(1.0, 1.0, 1)  # delta = b

    def test_snap_to_horizon(self):
        grid = build_grid(0.3, 1.0, 3)  # 10 * 0.1 accumulates float error
        assert grid.times[-1] == 1.0
        assert not grid.truncated


def two_comp_scenario(rate=2.0):
    field = CoefficientField(
        d=2,
        f_entries=(
            (Constant(0.2), Constant(0.5)),
            (Constant(0.3), Constant(-0.1)),
        ),
        g_entries=(
            (Constant(0.1), Constant(0.05)),
            (Constant(0.0), Constant(0.2)),
        ),
    )
    return Scenario(
        d=2, b=1.0, T=2.0, field=field,
        phi=(ConstantPath(1.0), ConstantPath(2.0)),
        levy=(LevyComponentSpec(rate, UniformJumps(-0.5, 1.0)),) * 2,
        positivity_mode=True,
    )


class TestDelayedState:
    def test_history_and_boundary(self):
        scn = two_comp_scenario()
        grid = build_grid(1.0, 2.0, 4)
        r = sample_jump_realization(scn.levy, 2.0, 3, 0)
        path = simulate(scn, grid, r)
        # k = 0: phi(-b)
        assert np.array_equal(delayed_state(path, grid, 0), [1.0, 2.0])
        # k = m: phi(0) == S(0)
        assert np.array_equal(delayed_state(path, grid, 4), path.S[0])
        # k = m + 2: stored node 2
        assert np.array_equal(delayed_state(path, grid, 6), path.S[2])

    def test_holder_history_sampled_analytically(self):
        field = const_field(1, f=0.1)
        scn = Scenario(
            d=1, b=1.0, T=1.0, field=field,
            phi=(HolderPowerPath(c0=1.0, c1=0.5, exponent=0.5),),
            levy=(LevyComponentSpec(0.0, UniformJumps(-0.1, 0.1)),),
        )
        grid = build_grid(1.0, 1.0, 4)
        path = simulate(scn, grid, empty_realization(1, 1.0))
        for k in range(4):
            t = (k - 4) * grid.delta
            expected = 1.0 + 0.5 * (-t) ** 0.5 if t < 0 else 1.0
            assert delayed_state(path, grid, k)[0] == expected

    def test_unreachable_node_is_sequencing_error(self):
        scn = two_comp_scenario()
        grid = build_grid(1.0, 2.0, 4)
        path = simulate(scn, grid, sample_jump_realization(scn.levy, 2.0, 3, 0))
        with pytest.raises(SequencingError):
            delayed_state(path, grid, grid.m + path.n_nodes)


class TestSteps:
    def test_x_step_identity_without_events_or_drift(self):
        field = const_field(1)
        X = np.array([1.7])
        out = x_step(X, np.array([1.0]), [[]], 0.25, field)
        assert np.array_equal(out, X)

    def test_x_step_single_jump_factor_exact(self):
        field = const_field(1, g=0.1)
        out = x_step(np.array([2.0]), np.array([1.0]), [[(0.1, 1.0)]], 0.25, field)
        assert out[0] == 2.0 * 1.1

    def test_x_step_drift_exponential(self):
        field = const_field(1, f=0.5)
        out = x_step(np.array([1.0]), np.array([1.0]), [[]], 0.2, field)
        assert out[0] == pytest.approx(np.exp(0.1), rel=1e-15)

    def test_x_step_breach_reports_entry(self):
        field = const_field(1, g=-2.0)
        with pytest.raises(PositivityBreachError) as err:
            x_step(np.array([1.0]), np.array([1.0]), [[(0.1, 0.6)]], 0.25, field)
        assert err.value.details["i"] == 0
        assert err.value.details["j"] == 0
        assert err.value.details["mark"] == 0.6

    def test_p_step_two_by_two(self):
        field = CoefficientField(
            2,
            ((Constant(0.0), Constant(1.0)), (Constant(1.0), Constant(0.0))),
            const_field(2).g_entries,
        )
        out = p_step(np.array([1.0, 1.0]), np.zeros(2), 0.5, field)
        assert np.array_equal(out, [1.5, 1.5])

    def test_p_step_zero_vector(self):
        field = two_comp_scenario().field
        out = p_step(np.zeros(2), np.ones(2), 0.5, field)
        assert np.array_equal(out, np.zeros(2))

    def test_compose(self):
        assert np.array_equal(compose(np.array([2.0, 3.0]), np.array([0.5, 1.0])), [1.0, 3.0])
        assert np.array_equal(compose(np.ones(2), np.array([4.0, 5.0])), [4.0, 5.0])
        assert np.array_equal(compose(np.array([2.0, 3.0]), np.zeros(2)), [0.0, 0.0])


class TestSimulate:
    def test_constant_solution_without_coefficients(self):
        scn = Scenario(
            d=2, b=1.0, T=2.0, field=const_field(2),
            phi=(ConstantPath(1.0), ConstantPath(2.0)),
            levy=(LevyComponentSpec(2.0, UniformJumps(-0.5, 1.0)),) * 2,
            positivity_mode=True,
        )
        grid = build_grid(1.0, 2.0, 4)
        path = simulate(scn, grid, sample_jump_realization(scn.levy, 2.0, 5, 0))
        assert np.array_equal(path.S, np.tile([1.0, 2.0], (path.n_nodes, 1)))

    def test_matches_oracle_on_constant_coefficients(self):
        scn = scalar_constant(f=0.4, g=0.2, rate=3.0, T=1.3)
        grid = build_grid(1.0, 1.3, 4)
        r = sample_jump_realization(scn.levy, 1.3, 21, 4)
        path = simulate(scn, grid, r)
        ref = exact_frozen_solution(scn, r, grid.times)
        rel = np.abs(path.S - ref) / np.abs(ref)
        assert rel.max() <= 1e-12

    def test_deterministic_repeat(self):
        scn = two_comp_scenario()
        grid = build_grid(1.0, 2.0, 8)
        r = sample_jump_realization(scn.levy, 2.0, 17, 2)
        a = simulate(scn, grid, r)
        b = simulate(scn, grid, r)
        assert np.array_equal(a.S, b.S)
        assert np.array_equal(a.X, b.X)
        assert np.array_equal(a.p, b.p)

    def test_composition_identity_bitwise(self):
        scn = two_comp_scenario()
        grid = build_grid(1.0, 2.0, 8)
        path = simulate(scn, grid, sample_jump_realization(scn.levy, 2.0, 17, 2))
        assert np.array_equal(path.S, path.p * path.X)

    def test_initial_conditions(self):
        scn = two_comp_scenario()
        grid = build_grid(1.0, 2.0, 4)
        path = simulate(scn, grid, sample_jump_realization(scn.levy, 2.0, 1, 0))
        assert np.array_equal(path.X[0], [1.0, 2.0])
        assert np.array_equal(path.p[0], [1.0, 1.0])

    def test_step_composition_matches_public_ops(self):
        # one manual step k=0 must reproduce the stored node 1 bitwise
        scn = two_comp_scenario()
        grid = build_grid(1.0, 2.0, 4)
        r = sample_jump_realization(scn.levy, 2.0, 29, 6)
        path = simulate(scn, grid, r)
        v2 = delayed_state(path, grid, 0)
        events = [events_in(r, j, grid.times[0], grid.times[1]) for j in range(2)]
        X1 = x_step(path.X[0], v2, events, grid.times[1] - grid.times[0], scn.field)
        p1 = p_step(path.p[0], v2, grid.times[1] - grid.times[0], scn.field)
        assert np.array_equal(X1, path.X[1])
        assert np.array_equal(p1, path.p[1])
        assert np.array_equal(compose(p1, X1), path.S[1])

    def test_positivity_over_batch(self):
        scn = two_comp_scenario()
        grid = build_grid(1.0, 2.0, 8)
        for i in range(300):
            path = simulate(scn, grid, sample_jump_realization(scn.levy, 2.0, 100, i))
            assert path.S.min() > 0.0

    def test_breach_carries_node_and_time(self):
        field = const_field(1, g=-1.5)
        scn = Scenario(
            d=1, b=1.0, T=2.0, field=field, phi=(ConstantPath(1.0),),
            levy=(LevyComponentSpec(20.0, UniformJumps(0.9, 1.0)),),
        )
        grid = build_grid(1.0, 2.0, 4)
        r = sample_jump_realization(scn.levy, 2.0, 0, 0)
        with pytest.raises(PositivityBreachError) as err:
            simulate(scn, grid, r)
        assert err.value.node is not None
        assert err.value.time is not None

    def test_horizon_mismatch_rejected(self):
        scn = two_comp_scenario()
        grid = build_grid(1.0, 2.0, 4)
        short = sample_jump_realization(scn.levy, 1.0, 1, 0)
        with pytest.raises(Exception):
            simulate(scn, grid, short)


class TestExactFrozenSolution:
    def test_no_jumps_no_drift(self):
        scn = scalar_constant(f=0.0, g=0.5, rate=1.0)
        r = empty_realization(1, 1.0)
        out = exact_frozen_solution(scn, r, [0.0, 0.5, 1.0])
        assert np.array_equal(out, np.ones((3, 1)))

    def test_two_unit_jumps_quadruple(self):
        import numpy as np

        scn = scalar_constant(f=0.0, g=1.0, rate=1.0)
        r_times = (np.array([0.2, 0.5]),)
        r_marks = (np.array([1.0, 1.0]),)
        from sdde_logem import JumpRealization

        r = JumpRealization(horizon=1.0, times=r_times, marks=r_marks)
        out = exact_frozen_solution(scn, r, [1.0])
        assert out[0, 0] == 4.0

    def test_drift_and_single_jump(self):
        from sdde_logem import JumpRealization

        scn = scalar_constant(f=0.3, g=0.1, rate=1.0)
        r = JumpRealization(horizon=1.0, times=(np.array([0.4]),), marks=(np.array([2.0]),))
        out = exact_frozen_solution(scn, r, [1.0])
        assert out[0, 0] == pytest.approx(np.exp(0.3) * 1.2, rel=1e-15)

    def test_jump_only_counted_after_time(self):
        from sdde_logem import JumpRealization

        scn = scalar_constant(f=0.0, g=1.0, rate=1.0)
        r = JumpRealization(horizon=1.0, times=(np.array([0.4]),), marks=(np.array([1.0]),))
        out = exact_frozen_solution(scn, r, [0.3, 0.4, 0.5])
        assert list(out[:, 0]) == [1.0, 2.0, 2.0]

    def test_state_dependent_coefficients_rejected(self):
        field = CoefficientField(
            1,
            ((Sigmoid(0.0, 1.0, (1.0,)),),),
            ((Constant(0.1),),),
        )
        scn = Scenario(
            d=1, b=1.0, T=1.0, field=field, phi=(ConstantPath(1.0),),
            levy=(LevyComponentSpec(1.0, UniformJumps(-0.1, 0.1)),),
        )
        with pytest.raises(UnsupportedOracleError):
            exact_frozen_solution(scn, empty_realization(1, 1.0), [1.0])

    def test_offdiagonal_drift_rejected(self):
        field = CoefficientField(
            2,
            ((Constant(0.1), Constant(0.2)), (Constant(0.0), Constant(0.1))),
            ((Constant(0.0),) * 2,) * 2,
        )
        scn = Scenario(
            d=2, b=1.0, T=1.0, field=field,
            phi=(ConstantPath(1.0), ConstantPath(1.0)),
            levy=(LevyComponentSpec(0.0, UniformJumps(-0.1, 0.1)),) * 2,
        )
        with pytest.raises(UnsupportedOracleError):
            exact_frozen_solution(scn, empty_realization(2, 1.0), [1.0])


class TestCsvExport:
    def test_rows_and_order(self):
        scn = two_comp_scenario()
        grid = build_grid(1.0, 2.0, 4)
        path = simulate(scn, grid, sample_jump_realization(scn.levy, 2.0, 9, 0))
        text = path_to_csv_text(path)
        lines = text.strip().split("\n")
        assert lines[0] == "time,component,X,p,S"
        # m history rows + n_nodes rows, each times d components
        assert len(lines) - 1 == (grid.m + path.n_nodes) * 2
        first = lines[1].split(",")
        assert float(first[0]) == -1.0 and first[1] == "0"
        # time-major, component-minor ordering
        times = [float(row.split(",")[0]) for row in lines[1:]]
        assert times == sorted(times)

    def test_history_rows_compose(self):
        scn = two_comp_scenario()
        grid = build_grid(1.0, 2.0, 4)
        path = simulate(scn, grid, sample_jump_realization(scn.levy, 2.0, 9, 0))
        for row in path_to_csv_text(path).strip().split("\n")[1:]:
            _, _, X, p, S = row.split(",")
            assert float(X) * float(p) == pytest.approx(float(S), rel=1e-15)
