import numpy as np
import pytest

from rnasel.model import (
    ExpressionMatrix,
    PairWeights,
    SampleMeta,
    SampleRecord,
)
from rnasel.objective import ObjectiveContext


def make_matrix(values, feature_ids=None, sample_ids=None) -> ExpressionMatrix:
    values = np.asarray(values, dtype=float)
    f, s = values.shape
    feature_ids = feature_ids or [f"f{i}" for i in range(f)]
    sample_ids = sample_ids or [f"s{j}" for j in range(s)]
    return ExpressionMatrix(tuple(feature_ids), tuple(sample_ids), values)


def make_meta(n_compounds: int, replicates: int = 2) -> SampleMeta:
    records = [SampleRecord(f"control_{r}", "control", "", r, "") for r in range(1, replicates + 1)]
    for c in range(n_compounds):
        name = f"cmp{chr(ord('A') + c)}"
        for r in range(1, replicates + 1):
            records.append(SampleRecord(f"{name}_{r}", "treated", name, r, f"control_{r}"))
    return SampleMeta(tuple(records))


def random_context(rng: np.random.Generator, n_features: int, n_treated: int) -> ObjectiveContext:
    ratios = rng.normal(size=(n_features, n_treated))
    norms = np.abs(rng.normal(size=n_features)) + 1e-3
    treated_ids = tuple(f"t{j}" for j in range(n_treated))
    return ObjectiveContext(ratios, norms, treated_ids)


def all_ones_weights(context: ObjectiveContext) -> PairWeights:
    return PairWeights.from_entries(context.treated_ids, default=1)


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile the numba kernels once so timing assertions see steady state."""
    from rnasel.annealer import AnnealSchedule
    from rnasel.annealer import run as anneal_run
    from rnasel.objective import ObjectiveParams

    rng = np.random.default_rng(0)
    ctx = random_context(rng, 8, 4)
    params = ObjectiveParams(alpha=0.2, n=3, weights=all_ones_weights(ctx))
    schedule = AnnealSchedule(t_init=1.0, t_final=0.5, gamma=0.9, swaps_per_temperature=2, seed=1)
    anneal_run(ctx, params, schedule)
