"""Deterministic parallel replication.

An experiment is a pure, picklable function `experiment(seed, start, stop)` that
returns one result row per replica index in [start, stop); replica r draws only
from `seed.replica(r)`. Chunk boundaries depend on the plan, never on the worker
count, and chunk results are concatenated in index order, so the folded output is
bit-identical for any number of workers.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np
from tqdm import tqdm

from percolab.config import settings
from percolab.exceptions import PercolabException, ReplicaError, ValidationError
from percolab.schemas.seeds import SeedSpec
from percolab.utils.logger import get_logger

logger = get_logger(__name__)

Experiment = Callable[[SeedSpec, int, int], np.ndarray]


@dataclass(frozen=True)
class ReplicaPlan:
    """Replica indices [offset, offset + total) of one seed."""

    total: int
    seed: SeedSpec
    workers: int = 1
    chunk: int = settings.REPLICA_CHUNK
    offset: int = 0

    def __post_init__(self) -> None:
        if self.total < 0:
            raise ValidationError("Replica total must be non-negative", field="total")
        if self.workers < 1:
            raise ValidationError("At least one worker is required", field="workers")
        if self.chunk < 1:
            raise ValidationError("Chunk size must be positive", field="chunk")

    @property
    def chunks(self) -> list[tuple[int, int]]:
        """Execution units, a partition of the index range in order."""
        stop = self.offset + self.total
        return [
            (start, min(start + self.chunk, stop))
            for start in range(self.offset, stop, self.chunk)
        ]


def _run_chunk(
    experiment: Experiment, seed: SeedSpec, start: int, stop: int
) -> np.ndarray:
    try:
        return np.asarray(experiment(seed, start, stop))
    except Exception:
        # Re-run one replica at a time to name the one that failed.
        for index in range(start, stop):
            try:
                experiment(seed, index, index + 1)
            except PercolabException as exc:
                exc.details.setdefault("replica_index", index)
                raise
            except Exception as exc:
                raise ReplicaError(
                    f"Replica {index} failed: {exc}",
                    replica_index=index,
                    seed=seed.replica(index).model_dump(),
                    original_error=repr(exc),
                ) from exc
        raise


def run_replicas(
    plan: ReplicaPlan, experiment: Experiment, desc: str = "replicas"
) -> np.ndarray:
    """Run every replica of the plan and concatenate results in index order."""
    if plan.total == 0:
        return np.empty(0)
    chunks = plan.chunks
    progress = tqdm(
        total=plan.total,
        desc=desc,
        disable=not settings.SHOW_PROGRESS,
        leave=False,
    )
    results: list[np.ndarray] = []
    try:
        if plan.workers == 1 or len(chunks) == 1:
            for start, stop in chunks:
                results.append(_run_chunk(experiment, plan.seed, start, stop))
                progress.update(stop - start)
        else:
            with ProcessPoolExecutor(max_workers=plan.workers) as pool:
                futures = [
                    pool.submit(_run_chunk, experiment, plan.seed, start, stop)
                    for start, stop in chunks
                ]
                for (start, stop), future in zip(chunks, futures):
                    results.append(future.result())
                    progress.update(stop - start)
    finally:
        progress.close()
    logger.debug(
        "Replicas finished",
        desc=desc,
        total=plan.total,
        workers=plan.workers,
        seed=plan.seed.label(),
    )
    return np.concatenate(results)
