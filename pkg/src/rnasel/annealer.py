"""Simulated annealing over fixed-size feature subsets.

One chain starts from a uniformly random subset, proposes single-feature
swaps with the complement, accepts improving moves outright and worsening
moves with probability exp(-|dU|/T), and cools T by a factor gamma after
each batch of proposals. The loop runs while T >= t_final and the reported
result is the best subset ever visited (a flag restores return-the-final
behaviour).

Reproducibility: chain c of a run seeded with s draws from
``numpy.random.default_rng(SeedSequence(entropy=s, spawn_key=(c,)))``
(PCG64). Restarts are independent chains merged by best objective value,
ties going to the lowest chain index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ParameterError
from .model import Selection
from .objective import ObjectiveContext, ObjectiveParams, SubsetState, eval_u

_MAX_SEED = 2**64


@dataclass(frozen=True)
class AnnealSchedule:
    """Cooling schedule and chain bookkeeping for one optimization."""

    t_init: float = 1.0
    t_final: float = 1e-4
    gamma: float = 0.999
    swaps_per_temperature: int = 1
    seed: int = 0
    restarts: int = 1

    def __post_init__(self):
        if not (0.0 < self.t_final < self.t_init):
            raise ParameterError(
                f"need 0 < t_final < t_init, got t_final={self.t_final}, t_init={self.t_init}"
            )
        if not 0.0 < self.gamma < 1.0:
            raise ParameterError(f"gamma must be in (0, 1), got {self.gamma}")
        if not isinstance(self.swaps_per_temperature, int) or self.swaps_per_temperature < 1:
            raise ParameterError("swaps_per_temperature must be a positive integer")
        if not isinstance(self.restarts, int) or self.restarts < 1:
            raise ParameterError("restarts must be a positive integer")
        if not isinstance(self.seed, int) or not 0 <= self.seed < _MAX_SEED:
            raise ParameterError("seed must be an unsigned 64-bit integer")

    @property
    def num_steps(self) -> int:
        """Number of temperature steps: ceil(ln(t_final/t_init)/ln(gamma))."""
        est = math.ceil(math.log(self.t_final / self.t_init) / math.log(self.gamma))
        k = max(est, 1)
        # settle floating-point boundary cases against the loop condition
        while self.temperature(k) >= self.t_final:
            k += 1
        while k > 1 and self.temperature(k - 1) < self.t_final:
            k -= 1
        return k

    def temperature(self, step: int) -> float:
        return self.t_init * self.gamma**step


@dataclass(frozen=True)
class TraceRow:
    step: int
    temperature: float
    current_u: float
    best_u: float
    accepted_count: int


@dataclass(frozen=True)
class AnnealTrace:
    """Per-temperature progress of the chain that produced the result."""

    rows: tuple[TraceRow, ...]
    selection: Selection
    seed: int
    chain: int

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("step,temperature,current_u,best_u,accepted_count\n")
            for row in self.rows:
                fh.write(
                    f"{row.step},{row.temperature!r},{row.current_u!r},"
                    f"{row.best_u!r},{row.accepted_count}\n"
                )


def chain_rng(seed: int, chain: int) -> np.random.Generator:
    """The generator used by one annealing chain of a seeded run."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(chain,)))


def initial_state(context: ObjectiveContext, params: ObjectiveParams, rng: np.random.Generator) -> Selection:
    """Uniformly random n-subset with its objective evaluated from scratch."""
    if params.n > context.n_features:
        raise ParameterError(f"n = {params.n} exceeds {context.n_features} features")
    idx = np.sort(rng.choice(context.n_features, size=params.n, replace=False))
    u, u1, u2 = eval_u(context, idx, params)
    return Selection(tuple(int(i) for i in idx), u, u1, u2)


def propose_swap(state: SubsetState, rng: np.random.Generator) -> tuple[int, int]:
    """Uniform (leave, enter) pair from the subset and its complement."""
    if state.comp.size == 0:
        raise ParameterError("subset equals the full feature set, nothing to swap in")
    i = int(rng.integers(0, state.sel.size))
    j = int(rng.integers(0, state.comp.size))
    return int(state.sel[i]), int(state.comp[j])


def accept(u_current: float, u_proposed: float, temperature: float, rng: np.random.Generator) -> bool:
    """Metropolis rule: improve always, otherwise exp(-|dU|/T)."""
    if temperature <= 0.0:
        raise ParameterError(f"temperature must be positive, got {temperature}")
    if u_proposed > u_current:
        return True
    return rng.random() < math.exp(-(u_current - u_proposed) / temperature)


def _run_chain(
    context: ObjectiveContext,
    params: ObjectiveParams,
    schedule: AnnealSchedule,
    rng: np.random.Generator,
    return_final: bool,
) -> tuple[Selection, tuple[TraceRow, ...]]:
    if params.n > context.n_features:
        raise ParameterError(f"n = {params.n} exceeds {context.n_features} features")
    start = np.sort(rng.choice(context.n_features, size=params.n, replace=False))
    state = SubsetState.build(context, start, params)
    cur_u = state.current_u()
    best_u = cur_u
    best_sel = state.sel.copy()

    rows = []
    swaps = schedule.swaps_per_temperature
    can_swap = state.comp.size > 0
    for step in range(schedule.num_steps):
        temperature = schedule.temperature(step)
        accepted = 0
        if can_swap:
            state.norm_sum, cur_u, best_u, accepted = _kernels.anneal_batch(
                rng,
                context.ratios, context.norms, context.max_norm, params.alpha, params.n,
                state.pair.iu, state.pair.ju, state.pair.w, state.pair.count_positive,
                state.sel, state.comp, state.s1, state.s2, state.cp, state.norm_sum, cur_u,
                temperature, swaps, best_u, best_sel,
                state._t_s1, state._t_s2, state._t_cp, state._m, state._v,
            )
        rows.append(TraceRow(step, temperature, float(cur_u), float(best_u), int(accepted)))

    reported = state.sel if return_final else best_sel
    idx = np.sort(reported)
    u, u1, u2 = eval_u(context, idx, params)
    selection = Selection(tuple(int(i) for i in idx), u, u1, u2)
    return selection, tuple(rows)


def run(
    context: ObjectiveContext,
    params: ObjectiveParams,
    schedule: AnnealSchedule,
    return_final: bool = False,
) -> tuple[Selection, AnnealTrace]:
    """Anneal ``schedule.restarts`` independent chains and keep the best.

    Fully deterministic given (context, params, schedule): chain c draws from
    ``chain_rng(schedule.seed, c)``.
    """
    best: Selection | None = None
    best_rows: tuple[TraceRow, ...] = ()
    best_chain = 0
    for chain in range(schedule.restarts):
        rng = chain_rng(schedule.seed, chain)
        selection, rows = _run_chain(context, params, schedule, rng, return_final)
        if best is None or selection.objective > best.objective:
            best = selection
            best_rows = rows
            best_chain = chain
    assert best is not None
    trace = AnnealTrace(best_rows, best, schedule.seed, best_chain)
    return best, trace
