"""Sample, solve, summarize and aggregate: one labeled dataset from a sampling plan."""

from __future__ import annotations

import multiprocessing as mp
from dataclasses import dataclass
from typing import Iterator, Optional

from .fleet import Fleet
from .sampling import Protocol, SamplingPlan, WeightModel, cohort_2s, instance_1s
from .solver import SolverConfig, solve_lpp
from .summarize import Dataset, LabeledExample, SolvedCohort, select_example, split_examples


@dataclass(frozen=True)
class GenerationJob:
    plan: SamplingPlan
    n: int
    aggregation: str
    fleet: Fleet
    weight_model: WeightModel = WeightModel()
    solver: SolverConfig = SolverConfig()
    split_seed: Optional[int] = None

    def provenance(self) -> dict:
        return {
            "plan": self.plan.to_dict(),
            "n": self.n,
            "aggregation": self.aggregation,
            "fleet_hash": self.fleet.hash,
            "weight_model": {
                "load_ratio": [self.weight_model.load_ratio_low, self.weight_model.load_ratio_high],
                "empty_probability_bounds": list(self.weight_model.empty_probability_bounds),
            },
            "solver": {"mode": self.solver.mode, "gap": self.solver.gap, "tie_break": self.solver.tie_break},
            "split_seed": self.seed_for_split,
        }

    @property
    def seed_for_split(self) -> int:
        return self.plan.seed if self.split_seed is None else self.split_seed


def solve_cohort(job: GenerationJob, index: int) -> SolvedCohort:
    plan = job.plan
    if plan.protocol == Protocol.ONE_STAGE:
        members = (instance_1s(index, plan.data_class, plan.seed, job.fleet, job.weight_model),)
    else:
        members = cohort_2s(
            index, plan.second_stage_draws, plan.data_class, plan.seed, job.fleet, job.weight_model
        ).members
    return SolvedCohort(index, tuple((inst, solve_lpp(inst, job.fleet, job.solver)) for inst in members))


def example_for(job: GenerationJob, index: int) -> LabeledExample:
    return select_example(solve_cohort(job, index), job.aggregation, job.fleet, job.plan.seed)


_JOB: Optional[GenerationJob] = None


def _init_worker(job: GenerationJob) -> None:
    global _JOB
    _JOB = job


def _work(index: int) -> LabeledExample:
    return example_for(_JOB, index)


def iter_examples(job: GenerationJob, workers: int = 1) -> Iterator[LabeledExample]:
    """Examples in index order; the result does not depend on ``workers``."""
    if workers <= 1 or job.n <= 1:
        for i in range(job.n):
            yield example_for(job, i)
        return
    ctx = mp.get_context("fork") if "fork" in mp.get_all_start_methods() else mp.get_context()
    with ctx.Pool(workers, initializer=_init_worker, initargs=(job,)) as pool:
        yield from pool.imap(_work, range(job.n), chunksize=max(1, min(64, job.n // (4 * workers))))


def generate_dataset(job: GenerationJob, workers: int = 1, progress=None) -> Dataset:
    if job.n < 0:
        raise ValueError("n must be nonnegative")
    examples = []
    for i, ex in enumerate(iter_examples(job, workers)):
        examples.append(ex)
        if progress is not None:
            progress(i + 1, job.n)
    return Dataset(examples, split_examples(len(examples), job.seed_for_split), job.provenance())
