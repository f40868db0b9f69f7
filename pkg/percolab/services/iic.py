"""Critical percolation conditioned on long arms.

The incipient infinite cluster is the limit of P_{p_c}[ . | 0 <-> dB(N)] as N grows.
This module estimates one-arm probabilities, draws conditioned configurations by
rejection, and estimates nu[all of Ann(n, 2n) open and in the IIC] through the
factorization P[E(n), 0 <-> dB(N)] = p_c^{|Ann|} P[0 <-> dB(N) | E(n)], where
conditioning on E(n) just forces the annulus edges open.
"""

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from percolab.config import settings
from percolab.exceptions import RejectionLimitError, ValidationError
from percolab.schemas.estimates import Estimate, NuEstimate
from percolab.schemas.seeds import SeedSpec
from percolab.services.connectivity import (
    batch_rows,
    cluster_of,
    connection_outcomes,
    separated_batch,
)
from percolab.services.lattice import Annulus, Region
from percolab.services.random_field import Configuration, Provenance, stream_weights
from percolab.utils.error_handling import handle_experiment_errors
from percolab.utils.logger import get_logger
from percolab.utils.stats import product_estimate, ratio_estimate, wilson_interval

logger = get_logger(__name__)


@dataclass(frozen=True)
class ConditionedSample:
    """A critical configuration on B(N) accepted under 0 <-> dB(N)."""

    configuration: Configuration
    radius: int
    accepted: bool
    attempts: int
    seed: SeedSpec


def _origin(region: Region) -> np.ndarray:
    return np.array([region.vertex_index((0, 0))], dtype=np.int64)


def _proportion(
    outcomes: np.ndarray, seed: SeedSpec, label: str, **context: object
) -> Estimate:
    estimate = wilson_interval(
        int(outcomes.sum()), int(outcomes.size), seed=seed, label=label
    )
    logger.info(
        "Probability estimated",
        label=label,
        replicas=int(outcomes.size),
        value=estimate.value,
        lower=estimate.lower,
        upper=estimate.upper,
        **context,
    )
    return estimate


def one_arm_probability(
    n: int, replicas: int, seed: SeedSpec, workers: int = 1
) -> Estimate:
    """pi(n) = P_{p_c}[0 <-> dB(n)] on B(n).

    Fields come from `seed.child("one-arm")` whatever n is, so estimates at
    different n are coupled and decrease in n replica by replica.
    """
    if n < 1:
        raise ValidationError("n must be at least 1", field="n")
    if replicas < 1:
        raise ValidationError("replicas must be at least 1", field="replicas")
    region = Region.box(n)
    stream = seed.child("one-arm")
    outcomes = connection_outcomes(
        region,
        settings.P_C,
        _origin(region),
        region.boundary_vertex_indices(n),
        replicas,
        stream,
        workers,
    )
    return _proportion(outcomes, stream, f"pi({n})", n=n)


def box_arm_probability(
    r: int, N: int, replicas: int, seed: SeedSpec, workers: int = 1
) -> Estimate:
    """rho(r, N) = P_{p_c}[B(r) <-> dB(N)]; exactly 1 when r >= N."""
    if r < 0 or N < 1:
        raise ValidationError("Need r >= 0 and N >= 1", field="r")
    stream = seed.child("box-arm")
    if r >= N:
        return Estimate(
            value=1.0,
            lower=1.0,
            upper=1.0,
            confidence=settings.CONFIDENCE,
            replicas=replicas,
            successes=replicas,
            seed=stream,
            label=f"rho({r},{N})",
        )
    region = Region.box(N)
    outcomes = connection_outcomes(
        region,
        settings.P_C,
        region.box_vertex_indices(r),
        region.boundary_vertex_indices(N),
        replicas,
        stream,
        workers,
    )
    return _proportion(outcomes, stream, f"rho({r},{N})", r=r, N=N)


def conditioned_one_arm(
    n: int, N: int, replicas: int, seed: SeedSpec, workers: int = 1
) -> Estimate:
    """P_{p_c}[0 <-> dB(N) | all of Ann(n, 2n) open], by forcing those edges open."""
    if n < 1 or N < 2 * n:
        raise ValidationError(
            "Conditioned one-arm needs n >= 1 and N >= 2n", field="N"
        )
    region = Region.box(N)
    stream = seed.child("conditioned-arm")
    outcomes = connection_outcomes(
        region,
        settings.P_C,
        _origin(region),
        region.boundary_vertex_indices(N),
        replicas,
        stream,
        workers,
        forced=Annulus(n, 2 * n).edge_mask(region),
    )
    return _proportion(outcomes, stream, f"pi({N}|E({n}))", n=n, N=N)


def iic_rejection_sample(
    N: int,
    seed: SeedSpec,
    attempt_cap: int = settings.REJECTION_ATTEMPT_CAP,
) -> ConditionedSample:
    """Draw critical configurations on B(N) until 0 <-> dB(N).

    Attempt a uses the stream `seed.substream(a)`; attempts are labeled in batches
    and the first accepted index wins, so the result does not depend on batching.
    """
    if N < 1:
        raise ValidationError("N must be at least 1", field="N")
    region = Region.box(N)
    origin = _origin(region)
    boundary = region.boundary_vertex_indices(N)
    batch = min(settings.REPLICA_CHUNK, batch_rows(region.n_edges))
    for start in range(0, attempt_cap, batch):
        stop = min(start + batch, attempt_cap)
        seeds = [seed.substream(a) for a in range(start, stop)]
        weights = stream_weights(region, seeds)
        open_masks = weights < settings.P_C
        hits = np.flatnonzero(~separated_batch(region, open_masks, origin, boundary))
        if hits.size:
            row = int(hits[0])
            attempt = start + row
            configuration = Configuration(
                region=region,
                open_mask=open_masks[row].copy(),
                forced_mask=np.zeros(region.n_edges, dtype=bool),
                provenance=Provenance.FIELD,
                level=settings.P_C,
                seed=seed.substream(attempt),
            )
            return ConditionedSample(
                configuration=configuration,
                radius=N,
                accepted=True,
                attempts=attempt + 1,
                seed=seed,
            )
    raise RejectionLimitError(
        f"No accepted configuration on B({N}) within {attempt_cap} attempts",
        attempts=attempt_cap,
        radius=N,
    )


def rejection_acceptance_rate(N: int, samples: int, seed: SeedSpec) -> Estimate:
    """Accepted draws over attempts across `samples` independent rejection runs."""
    if samples < 1:
        raise ValidationError("samples must be at least 1", field="samples")
    attempts = sum(
        iic_rejection_sample(N, seed.replica(i)).attempts for i in range(samples)
    )
    estimate = wilson_interval(samples, attempts, seed=seed, label=f"accept({N})")
    logger.info(
        "Rejection acceptance rate",
        N=N,
        samples=samples,
        attempts=attempts,
        value=estimate.value,
    )
    return estimate


def conditioned_volume_profile(
    N: int, radii: Sequence[int], samples: int, seed: SeedSpec
) -> list[float]:
    """Mean |C(0) ∩ B(k)| under accepted conditioned samples, for each k."""
    if any(k > N for k in radii):
        raise ValidationError("Profile radii must not exceed N", field="radii")
    totals = np.zeros(len(radii), dtype=np.float64)
    for i in range(samples):
        sample = iic_rejection_sample(N, seed.replica(i))
        norms = [v.norm for v in cluster_of(sample.configuration, (0, 0)).vertices]
        totals += [sum(1 for r in norms if r <= k) for k in radii]
    return (totals / samples).tolist()


@handle_experiment_errors("estimate the quasi-multiplicativity constant")
def quasi_mult_constant(
    n: int, N: int, replicas: int, seed: SeedSpec, workers: int = 1
) -> Estimate:
    """C_hat = pi(n) rho(2n, N) / pi(N) from three independent estimates.

    The left quasi-multiplicativity inequality says C_hat >= 1; an interval lying
    entirely below 1 is logged as a warning.
    """
    if n < 1 or N < 2 * n:
        raise ValidationError("Need n >= 1 and N >= 2n", field="N")
    pi_n = one_arm_probability(n, replicas, seed.child("qm/pi-n"), workers)
    rho = box_arm_probability(2 * n, N, replicas, seed.child("qm/rho"), workers)
    pi_big = one_arm_probability(N, replicas, seed.child("qm/pi-N"), workers)
    c_hat = ratio_estimate(product_estimate(pi_n, rho), pi_big)
    if c_hat.upper < 1.0:
        logger.warning(
            "Quasi-multiplicativity constant below 1", n=n, N=N, c_hat=c_hat.value
        )
    logger.info(
        "Quasi-multiplicativity constant",
        n=n,
        N=N,
        value=c_hat.value,
        lower=c_hat.lower,
        upper=c_hat.upper,
    )
    return c_hat.with_seed(seed, label=f"C({n},{N})")


@handle_experiment_errors("estimate nu of the annulus event")
def nu_annulus_estimate(
    n: int,
    N: int,
    replicas: int,
    seed: SeedSpec,
    workers: int = 1,
    c_hat: Estimate | None = None,
) -> NuEstimate:
    """nu[E_IIC(n)] ~ p_c^{|Ann(n,2n)|} P[0 <-> dB(N) | E(n)] / P[0 <-> dB(N)].

    The prefactor is exact; the ratio carries a delta-method interval. Sandwich
    bounds are p_c^{|Ann|} and C_hat p_c^{|Ann|}.
    """
    if n < 1 or N < 4 * n:
        raise ValidationError("nu estimate needs n >= 1 and N >= 4n", field="N")
    annulus_edges = Annulus(n, 2 * n).edge_count
    prefactor = settings.P_C**annulus_edges
    numerator = conditioned_one_arm(n, N, replicas, seed.child("nu/num"), workers)
    denominator = one_arm_probability(N, replicas, seed.child("nu/den"), workers)
    ratio = ratio_estimate(numerator, denominator)
    if c_hat is None:
        c_hat = quasi_mult_constant(n, N, replicas, seed.child("nu/C"), workers)

    estimate = NuEstimate(
        n=n,
        N=N,
        annulus_edges=annulus_edges,
        prefactor=prefactor,
        ratio=ratio,
        value=prefactor * ratio.value,
        lower_ci=prefactor * ratio.lower,
        upper_ci=prefactor * ratio.upper,
        sandwich_lower=prefactor,
        sandwich_upper=prefactor * c_hat.value,
        c_hat=c_hat,
        seed=seed,
    )
    if estimate.lower_ci <= 0.0:
        logger.warning("nu estimate not positive within CI", n=n, N=N)
    if not estimate.sandwich_ok:
        logger.warning(
            "nu estimate outside the sandwich",
            n=n,
            N=N,
            value=estimate.value,
            lower=estimate.sandwich_lower,
            upper=estimate.sandwich_upper,
        )
    logger.info(
        "nu estimated",
        n=n,
        N=N,
        log10_value=math.log10(estimate.value) if estimate.value > 0 else None,
        ratio=ratio.value,
        c_hat=c_hat.value,
    )
    return estimate
