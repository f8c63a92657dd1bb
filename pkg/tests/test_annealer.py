import math

import numpy as np
import pytest

from rnasel.annealer import (
    AnnealSchedule,
    accept,
    chain_rng,
    initial_state,
    propose_swap,
    run,
    _run_chain,
)
from rnasel.errors import ParameterError
from rnasel.objective import ObjectiveParams, SubsetState, eval_u, swap_delta

from conftest import all_ones_weights, random_context


def small_problem(seed=0, f=12, g=6, n=4, alpha=0.2):
    rng = np.random.default_rng(seed)
    ctx = random_context(rng, f, g)
    params = ObjectiveParams(alpha=alpha, n=n, weights=all_ones_weights(ctx))
    return ctx, params


def mirror_run(context, params, schedule, return_final=False, worsening_floor=1e-3):
    """Reference chain built from the public ops, drawing the same rng stream
    as the compiled batch kernel. Also counts clearly-worsening acceptances
    at the final temperature."""
    rng = chain_rng(schedule.seed, 0)
    start = initial_state(context, params, rng)
    state = SubsetState.build(context, start.indices, params)
    cur_u = state.current_u()
    best_u = cur_u
    best_idx = state.indices()
    rows = []
    final_worsening = 0
    last_step = schedule.num_steps - 1
    for step in range(schedule.num_steps):
        temperature = schedule.temperature(step)
        accepted = 0
        for _ in range(schedule.swaps_per_temperature):
            out_f, in_f = propose_swap(state, rng)
            new_u, pending = swap_delta(context, state, out_f, in_f, params)
            if accept(cur_u, new_u, temperature, rng):
                state.apply(pending)
                if step == last_step and new_u < cur_u - worsening_floor:
                    final_worsening += 1
                cur_u = new_u
                accepted += 1
                if cur_u > best_u:
                    best_u = cur_u
                    best_idx = state.indices()
        rows.append((step, temperature, cur_u, best_u, accepted))
    reported = state.indices() if return_final else best_idx
    return reported, rows, final_worsening


class TestSchedule:
    def test_validation(self):
        with pytest.raises(ParameterError):
            AnnealSchedule(t_init=1.0, t_final=2.0)
        with pytest.raises(ParameterError):
            AnnealSchedule(gamma=1.0)
        with pytest.raises(ParameterError):
            AnnealSchedule(swaps_per_temperature=0)
        with pytest.raises(ParameterError):
            AnnealSchedule(seed=-1)

    def test_num_steps_matches_formula(self):
        sched = AnnealSchedule(t_init=1.0, t_final=1e-4, gamma=0.95)
        expected = math.ceil(math.log(1e-4) / math.log(0.95))
        assert sched.num_steps == expected == 180

    def test_num_steps_counts_loop_iterations(self):
        sched = AnnealSchedule(t_init=1.0, t_final=1e-3, gamma=0.5)
        t, count = 1.0, 0
        while t >= sched.t_final:
            count += 1
            t = sched.temperature(count)
        assert sched.num_steps == count

    def test_at_least_one_step(self):
        assert AnnealSchedule(t_init=1.0, t_final=0.9999, gamma=0.5).num_steps == 1


class TestAccept:
    def test_improving_always(self):
        rng = np.random.default_rng(0)
        assert all(accept(0.2, 0.3, 1e-9, rng) for _ in range(100))

    def test_equal_always(self):
        rng = np.random.default_rng(0)
        assert all(accept(0.2, 0.2, 0.5, rng) for _ in range(100))

    def test_worsening_frequency(self):
        # drop of 0.1 at T = 1 accepted with probability exp(-0.1)
        rng = np.random.default_rng(123)
        trials = 20_000
        hits = sum(accept(0.5, 0.4, 1.0, rng) for _ in range(trials))
        p = math.exp(-0.1)
        sigma = math.sqrt(trials * p * (1 - p))
        assert abs(hits - trials * p) < 5 * sigma

    def test_temperature_must_be_positive(self):
        with pytest.raises(ParameterError):
            accept(0.5, 0.4, 0.0, np.random.default_rng(0))


class TestInitialState:
    def test_full_set_when_n_equals_f(self):
        ctx, _ = small_problem(f=6, n=6)
        params = ObjectiveParams(alpha=0.2, n=6, weights=all_ones_weights(ctx))
        sel = initial_state(ctx, params, np.random.default_rng(0))
        assert sel.indices == tuple(range(6))

    def test_seed_determinism(self):
        ctx, params = small_problem()
        a = initial_state(ctx, params, np.random.default_rng(99))
        b = initial_state(ctx, params, np.random.default_rng(99))
        assert a == b

    def test_uniform_membership(self):
        ctx, _ = small_problem(f=10, g=4)
        params = ObjectiveParams(alpha=0.0, n=3, weights=all_ones_weights(ctx))
        rng = np.random.default_rng(7)
        counts = np.zeros(10)
        draws = 10_000
        for _ in range(draws):
            sel = initial_state(ctx, params, rng)
            counts[list(sel.indices)] += 1
        # each feature present with probability n/F = 0.3
        sigma = math.sqrt(draws * 0.3 * 0.7)
        assert np.all(np.abs(counts - draws * 0.3) < 5 * sigma)

    def test_n_too_large(self):
        ctx, _ = small_problem()
        params = ObjectiveParams(alpha=0.2, n=ctx.n_features + 1, weights=all_ones_weights(ctx))
        with pytest.raises(ParameterError):
            initial_state(ctx, params, np.random.default_rng(0))


class TestProposeSwap:
    def test_single_possible_swap(self):
        ctx, _ = small_problem(f=2, g=3)
        params = ObjectiveParams(alpha=0.2, n=1, weights=all_ones_weights(ctx))
        state = SubsetState.build(ctx, [0], params)
        rng = np.random.default_rng(0)
        assert all(propose_swap(state, rng) == (0, 1) for _ in range(20))

    def test_seed_reproducible(self):
        ctx, params = small_problem()
        state = SubsetState.build(ctx, [0, 1, 2, 3], params)
        seq_a = [propose_swap(state, np.random.default_rng(5)) for _ in range(1)]
        seq_b = [propose_swap(state, np.random.default_rng(5)) for _ in range(1)]
        assert seq_a == seq_b

    def test_uniform_over_pairs(self):
        ctx, _ = small_problem(f=4, g=3)
        params = ObjectiveParams(alpha=0.2, n=2, weights=all_ones_weights(ctx))
        state = SubsetState.build(ctx, [0, 1], params)
        rng = np.random.default_rng(11)
        counts = {}
        draws = 10_000
        for _ in range(draws):
            pair = propose_swap(state, rng)
            counts[pair] = counts.get(pair, 0) + 1
        assert set(counts) == {(0, 2), (0, 3), (1, 2), (1, 3)}
        sigma = math.sqrt(draws * 0.25 * 0.75)
        for pair, count in counts.items():
            assert abs(count - draws * 0.25) < 5 * sigma

    def test_full_subset_rejected(self):
        ctx, _ = small_problem(f=4, g=3)
        params = ObjectiveParams(alpha=0.2, n=4, weights=all_ones_weights(ctx))
        state = SubsetState.build(ctx, [0, 1, 2, 3], params)
        with pytest.raises(ParameterError):
            propose_swap(state, np.random.default_rng(0))


class TestRun:
    def test_n_equals_f_returns_initial_state(self):
        ctx, _ = small_problem(f=5, g=4)
        params = ObjectiveParams(alpha=0.2, n=5, weights=all_ones_weights(ctx))
        schedule = AnnealSchedule(t_init=1.0, t_final=0.5, gamma=0.5, seed=3)
        best, trace = run(ctx, params, schedule)
        assert best.indices == tuple(range(5))
        assert all(row.accepted_count == 0 for row in trace.rows)

    def test_determinism_bit_identical(self):
        ctx, params = small_problem(seed=1)
        schedule = AnnealSchedule(t_init=1.0, t_final=1e-2, gamma=0.9, swaps_per_temperature=20, seed=42)
        best_a, trace_a = run(ctx, params, schedule)
        best_b, trace_b = run(ctx, params, schedule)
        assert best_a == best_b
        assert trace_a.rows == trace_b.rows

    def test_matches_public_op_mirror(self):
        # the compiled batch loop and the public propose/swap/accept ops must
        # produce the same trajectory from the same generator stream
        ctx, params = small_problem(seed=2)
        schedule = AnnealSchedule(t_init=1.0, t_final=1e-2, gamma=0.85, swaps_per_temperature=25, seed=7)
        best, trace = run(ctx, params, schedule)
        mirror_idx, mirror_rows, _ = mirror_run(ctx, params, schedule)
        assert best.indices == mirror_idx
        assert len(trace.rows) == len(mirror_rows)
        for row, (step, temperature, cur_u, best_u, accepted) in zip(trace.rows, mirror_rows):
            assert row.step == step
            assert row.temperature == temperature
            assert row.current_u == cur_u
            assert row.best_u == best_u
            assert row.accepted_count == accepted

    def test_return_final_matches_mirror(self):
        ctx, params = small_problem(seed=3)
        schedule = AnnealSchedule(t_init=1.0, t_final=0.05, gamma=0.8, swaps_per_temperature=10, seed=9)
        best, _ = run(ctx, params, schedule, return_final=True)
        mirror_idx, _, _ = mirror_run(ctx, params, schedule, return_final=True)
        assert best.indices == mirror_idx

    def test_best_u_non_decreasing_and_final_reported(self):
        ctx, params = small_problem(seed=4)
        schedule = AnnealSchedule(t_init=1.0, t_final=1e-3, gamma=0.9, swaps_per_temperature=10, seed=13)
        best, trace = run(ctx, params, schedule)
        bests = [row.best_u for row in trace.rows]
        assert all(b2 >= b1 for b1, b2 in zip(bests, bests[1:]))
        assert best.objective == pytest.approx(bests[-1], abs=1e-9)
        assert bests[-1] >= trace.rows[0].current_u - 1e-12

    def test_selection_objective_is_fresh_recomputation(self):
        ctx, params = small_problem(seed=5)
        schedule = AnnealSchedule(t_init=1.0, t_final=1e-2, gamma=0.9, swaps_per_temperature=15, seed=21)
        best, _ = run(ctx, params, schedule)
        u, u1, u2 = eval_u(ctx, best.indices, params)
        assert best.objective == u and best.u1 == u1 and best.u2 == u2
        assert best.objective == pytest.approx((1 - params.alpha) * u1 + params.alpha * u2, abs=1e-12)

    def test_running_sums_match_final_subset(self):
        ctx, params = small_problem(seed=6)
        schedule = AnnealSchedule(t_init=1.0, t_final=1e-3, gamma=0.9, swaps_per_temperature=30, seed=2)
        mirror_idx, rows, _ = mirror_run(ctx, params, schedule, return_final=True)
        u, _, _ = eval_u(ctx, mirror_idx, params)
        assert rows[-1][2] == pytest.approx(u, abs=1e-7)

    def test_hill_climbing_at_final_temperature(self):
        # by the final temperature the chain must accept no clearly-worsening
        # move: exp(-1e-3 / 1e-6) underflows to 0
        ctx, params = small_problem(seed=8)
        total = 0
        for seed in range(100):
            schedule = AnnealSchedule(
                t_init=0.5, t_final=1e-6, gamma=0.6, swaps_per_temperature=8, seed=seed
            )
            _, _, worsening = mirror_run(ctx, params, schedule, worsening_floor=1e-3)
            total += worsening
        assert total == 0

    def test_restart_semantics(self):
        ctx, params = small_problem(seed=9)
        schedule = AnnealSchedule(t_init=1.0, t_final=0.05, gamma=0.8, swaps_per_temperature=10,
                                  seed=31, restarts=4)
        best, trace = run(ctx, params, schedule)
        singles = []
        for chain in range(4):
            sel, _ = _run_chain(ctx, params, schedule, chain_rng(schedule.seed, chain), False)
            singles.append(sel)
        expected = max(singles, key=lambda s: s.objective)
        assert best.objective == expected.objective
        assert best.indices == expected.indices
        assert 0 <= trace.chain < 4

    def test_trace_csv_round_trip(self, tmp_path):
        ctx, params = small_problem(seed=10)
        schedule = AnnealSchedule(t_init=1.0, t_final=0.1, gamma=0.7, swaps_per_temperature=5, seed=17)
        _, trace = run(ctx, params, schedule)
        path = tmp_path / "trace.csv"
        trace.to_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "step,temperature,current_u,best_u,accepted_count"
        assert len(lines) == 1 + len(trace.rows)
        first = lines[1].split(",")
        assert int(first[0]) == 0
        assert float(first[1]) == trace.rows[0].temperature
        assert float(first[2]) == trace.rows[0].current_u
