"""Finite-size scaling correlation length near p_c.

L(p) is the smallest n at which the square [0, n]^2 has an open left-right crossing
with probability at least 1 - epsilon, and p_n = sup{p : L(p) > n} is located by a
noisy bisection on [p_c, 1] over the crossing probability at size n.
"""

from functools import partial
from typing import NamedTuple, Sequence

import numpy as np

from percolab.config import settings
from percolab.exceptions import ValidationError
from percolab.schemas.estimates import Estimate, PnEstimate, PnStatus
from percolab.schemas.reports import CorrelationTable
from percolab.schemas.seeds import SeedSpec
from percolab.services.connectivity import (
    batch_rows,
    crossing_rectangle,
    lr_crossing_batch,
)
from percolab.services.lattice import Region
from percolab.services.random_field import batch_weights
from percolab.utils.error_handling import handle_experiment_errors
from percolab.utils.logger import get_logger
from percolab.utils.replicas import ReplicaPlan, run_replicas
from percolab.utils.stats import wilson_interval

logger = get_logger(__name__)


def _crossing_chunk(
    rect: Region, p: float, seed: SeedSpec, start: int, stop: int
) -> np.ndarray:
    open_masks = batch_weights(rect, seed, start, stop) < p
    return lr_crossing_batch(rect, open_masks)


def _chunk_size(rect: Region) -> int:
    return min(settings.REPLICA_CHUNK, batch_rows(rect.n_edges))


def _crossing_outcomes(
    rect: Region, p: float, seed: SeedSpec, start: int, stop: int, workers: int
) -> np.ndarray:
    plan = ReplicaPlan(
        total=stop - start,
        seed=seed,
        workers=workers,
        chunk=_chunk_size(rect),
        offset=start,
    )
    return run_replicas(plan, partial(_crossing_chunk, rect, p), desc="crossing")


def crossing_probability(
    p: float,
    n: int,
    replicas: int,
    seed: SeedSpec,
    workers: int = 1,
    height: int | None = None,
) -> Estimate:
    """Share of level-p configurations with a left-right crossing of [0, n] x [0, h].

    h defaults to n. Replica r uses the field of `seed.child("crossing").replica(r)`,
    so estimates at different p are coupled and monotone in p.
    """
    if replicas < 1:
        raise ValidationError("replicas must be at least 1", field="replicas")
    if not 0.0 <= p <= 1.0:
        raise ValidationError("p must lie in [0, 1]", field="p")
    rect = crossing_rectangle(n, height if height is not None else n)
    stream = seed.child("crossing")
    outcomes = _crossing_outcomes(rect, p, stream, 0, replicas, workers)
    estimate = wilson_interval(
        int(outcomes.sum()), replicas, seed=stream, label=f"crossing(p={p},n={n})"
    )
    logger.info(
        "Crossing probability estimated",
        p=p,
        n=n,
        height=rect.y1,
        replicas=replicas,
        value=estimate.value,
        lower=estimate.lower,
        upper=estimate.upper,
    )
    return estimate


class _Probe(NamedTuple):
    decision: int
    estimate: Estimate


def _probe(
    rect: Region, p: float, target: float, seed: SeedSpec, workers: int
) -> _Probe:
    """Crossing probe at level p on the incremental replica schedule.

    decision is +1 when the interval lies above the target, -1 below, 0 if the
    full budget leaves it straddling.
    """
    done = 0
    successes = 0
    estimate: Estimate | None = None
    for count in settings.replica_schedule:
        successes += int(_crossing_outcomes(rect, p, seed, done, count, workers).sum())
        done = count
        estimate = wilson_interval(successes, done, seed=seed, label=f"crossing(p={p})")
        if estimate.lower > target:
            return _Probe(decision=1, estimate=estimate)
        if estimate.upper < target:
            return _Probe(decision=-1, estimate=estimate)
    return _Probe(decision=0, estimate=estimate)  # type: ignore[arg-type]


@handle_experiment_errors("estimate p_n")
def estimate_pn(
    n: int,
    epsilon: float = settings.DEFAULT_EPSILON,
    tolerance: float = settings.DEFAULT_TOLERANCE,
    seed: SeedSpec | None = None,
    workers: int = 1,
) -> PnEstimate:
    """Noisy bisection for p_n on [p_c, 1].

    Every probe reuses the coupled field `seed.child("pn")`. Returns the bracket
    midpoint once the half-width is at most `tolerance`; p_c itself when the
    crossing probability already reaches 1 - epsilon there (degenerate); and the
    current bracket, flagged unresolved, at the first probe the replica budget
    cannot decide.
    """
    if not 0.0 < epsilon < 0.5:
        raise ValidationError("epsilon must lie in (0, 1/2)", field="epsilon")
    if tolerance <= 0.0:
        raise ValidationError("tolerance must be positive", field="tolerance")
    if n < 1:
        raise ValidationError("n must be at least 1", field="n")
    seed = seed or SeedSpec(master_seed=0)
    stream = seed.child("pn")
    rect = crossing_rectangle(n, n)
    target = 1.0 - epsilon
    replicas = 0
    probes = 0

    def result(
        p_hat: float, lo: float, hi: float, status: PnStatus, probe: _Probe
    ) -> PnEstimate:
        estimate = PnEstimate(
            n=n,
            epsilon=epsilon,
            p_hat=p_hat,
            lower=lo,
            upper=hi,
            status=status,
            crossing=probe.estimate,
            replicas=replicas,
            probes=probes,
            seed=stream,
        )
        log = logger.warning if status == PnStatus.UNRESOLVED else logger.info
        log(
            "p_n estimated",
            n=n,
            epsilon=epsilon,
            p_hat=p_hat,
            lower=lo,
            upper=hi,
            status=status.value,
            probes=probes,
            replicas=replicas,
        )
        return estimate

    lo, hi = settings.P_C, 1.0
    probe = _probe(rect, lo, target, stream, workers)
    probes += 1
    replicas += probe.estimate.replicas
    if probe.decision > 0:
        return result(lo, lo, lo, PnStatus.DEGENERATE, probe)
    if probe.decision == 0:
        return result((lo + hi) / 2.0, lo, hi, PnStatus.UNRESOLVED, probe)

    while (hi - lo) / 2.0 > tolerance:
        mid = (lo + hi) / 2.0
        probe = _probe(rect, mid, target, stream, workers)
        probes += 1
        replicas += probe.estimate.replicas
        if probe.decision > 0:
            hi = mid
        elif probe.decision < 0:
            lo = mid
        else:
            return result(mid, lo, hi, PnStatus.UNRESOLVED, probe)
    return result((lo + hi) / 2.0, lo, hi, PnStatus.RESOLVED, probe)


def divergence_table(
    n_list: Sequence[int],
    epsilon: float = settings.DEFAULT_EPSILON,
    seed: SeedSpec | None = None,
    tolerance: float = settings.DEFAULT_TOLERANCE,
    workers: int = 1,
) -> CorrelationTable:
    """p_n and (p_n - p_c) n^2 for each n, with the monotone-trend verdict.

    Unresolved and degenerate rows are excluded with a warning, so every kept row
    has p_n strictly above p_c. `increasing` reports whether the statistic is
    strictly increasing over the remaining rows and `bands_separated` whether
    consecutive statistics stay ordered across their tolerance bands.
    """
    n_list = list(n_list)
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValidationError("n_list must be strictly increasing", field="n_list")
    seed = seed or SeedSpec(master_seed=0)
    rows, excluded = [], []
    for n in n_list:
        row = estimate_pn(n, epsilon, tolerance, seed.child(f"n={n}"), workers)
        if row.status != PnStatus.RESOLVED:
            logger.warning(
                "Excluding p_n row", n=n, epsilon=epsilon, status=row.status.value
            )
            excluded.append(row)
        else:
            rows.append(row)

    stats = [row.divergence_stat for row in rows]
    increasing = all(b > a for a, b in zip(stats, stats[1:]))
    bands_separated = all(
        (b.lower - settings.P_C) * b.n**2 > (a.upper - settings.P_C) * a.n**2
        for a, b in zip(rows, rows[1:])
    )
    if not increasing:
        logger.warning("Divergence statistic not increasing", stats=stats)
    for a, b in zip(rows, rows[1:]):
        if a.divergence_stat > 0:
            logger.info(
                "Divergence growth",
                n=b.n,
                factor=b.divergence_stat / a.divergence_stat,
            )
    return CorrelationTable(
        epsilon=epsilon,
        rows=rows,
        excluded=excluded,
        increasing=increasing,
        bands_separated=bands_separated,
    )


def crossing_profile(
    p: float,
    n_list: Sequence[int],
    replicas: int,
    seed: SeedSpec,
    workers: int = 1,
) -> list[Estimate]:
    """Crossing estimates at one level p for several square sizes."""
    return [
        crossing_probability(p, n, replicas, seed.child(f"profile/n={n}"), workers)
        for n in n_list
    ]
