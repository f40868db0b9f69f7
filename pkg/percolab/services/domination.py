"""Certified comparison of invasion and IIC annulus probabilities.

A level p >= p_c certificate for "the invasion covers Ann(n, 2n)" is
(a) every annulus edge is p-open and (b) B(2n) is not joined to dB(4n) by a p-open
path. Condition (b) only looks at edges with an endpoint outside B(2n), so the two
conditions live on disjoint edge sets and
    P[invasion covers Ann(n, 2n)] >= p^{|Ann(n, 2n)|} P_p[B(2n) -/- dB(4n)].
Against the IIC upper bound C p_c^{|Ann(n, 2n)|} the ratio grows like
(p/p_c)^{|Ann|}; a ratio of at least 2 witnesses that the IIC does not
stochastically dominate the invasion cluster.

The box geometry replaces the annulus by B(n) and the shell by B(n) -/- dB(3n).
"""

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.stats import linregress

from percolab.config import settings
from percolab.exceptions import (
    RejectionLimitError,
    SoundnessError,
    ValidationError,
)
from percolab.schemas.estimates import (
    CertificateOutcome,
    CrossCheckTally,
    Estimate,
    PnStatus,
)
from percolab.schemas.reports import DsvReport, DsvWindow, GapReport, GapRow, Geometry
from percolab.schemas.seeds import SeedSpec
from percolab.services.connectivity import (
    cluster_of,
    connection_outcomes,
    disconnecting_edges,
    separated_batch,
)
from percolab.services.iic import (
    iic_rejection_sample,
    one_arm_probability,
    quasi_mult_constant,
)
from percolab.services.invasion import (
    StopRule,
    run_invasion,
)
from percolab.services.lattice import (
    ORIGIN,
    Annulus,
    BoxSpec,
    Edge,
    Region,
    box_vertices,
    induced_edges,
)
from percolab.services.near_critical import estimate_pn
from percolab.services.random_field import condition_open, sample_weights
from percolab.utils.error_handling import handle_experiment_errors
from percolab.utils.logger import get_logger
from percolab.utils.stats import safe_log10, wilson_interval

logger = get_logger(__name__)

LOG10_TWO = math.log10(2.0)

# (n, N) pairs the quasi-multiplicativity constant is validated on.
C_HAT_PAIRS: tuple[tuple[int, int], ...] = ((1, 16), (2, 16))


def _pow10(x: float) -> float:
    if x > 308.0:
        return float("inf")
    return 10.0**x


@dataclass(frozen=True)
class CertificateGeometry:
    """Certified edge set, its shielding shell and the horizon they need."""

    kind: Geometry
    n: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValidationError("n must be at least 1", field="n")

    @property
    def shell_inner(self) -> int:
        return 2 * self.n if self.kind == Geometry.ANNULUS else self.n

    @property
    def shell_outer(self) -> int:
        return 4 * self.n if self.kind == Geometry.ANNULUS else 3 * self.n

    @cached_property
    def open_edges(self) -> frozenset[Edge]:
        if self.kind == Geometry.ANNULUS:
            return Annulus(self.n, 2 * self.n).edges
        return frozenset(induced_edges(box_vertices(BoxSpec(self.n))))

    @property
    def support_count(self) -> int:
        return len(self.open_edges)

    def region(self) -> Region:
        return Region.box(self.shell_outer)

    def open_mask(self, region: Region) -> np.ndarray:
        return region.edge_mask(self.open_edges)

    def shell_support(self, region: Region) -> np.ndarray:
        """Edges with at least one endpoint outside B(shell_inner)."""
        return ~region.box_edge_mask(self.shell_inner)

    def check_disjoint(self, region: Region) -> None:
        if np.any(self.open_mask(region) & self.shell_support(region)):
            raise SoundnessError(
                "Certificate factors share edges", geometry=self.kind.value, n=self.n
            )


def _check_level(p: float, lowest: float = 0.0) -> None:
    if not lowest <= p <= 1.0:
        raise ValidationError(f"p must lie in [{lowest}, 1], got {p}", field="p")


def disconnection_probability(
    p: float,
    n: int,
    replicas: int,
    seed: SeedSpec,
    workers: int = 1,
    geometry: Geometry = Geometry.ANNULUS,
) -> Estimate:
    """P_p[B(2n) -/- dB(4n)] (box geometry: B(n) -/- dB(3n)) on the shell's edges."""
    _check_level(p)
    shape = CertificateGeometry(geometry, n)
    region = shape.region()
    stream = seed.child(f"disconnection/{geometry.value}")
    joined = connection_outcomes(
        region,
        p,
        region.box_vertex_indices(shape.shell_inner),
        region.boundary_vertex_indices(shape.shell_outer),
        replicas,
        stream,
        workers,
        support=shape.shell_support(region),
    )
    estimate = wilson_interval(
        int((~joined).sum()), replicas, seed=stream, label=f"disconnect(p={p},n={n})"
    )
    logger.info(
        "Disconnection probability estimated",
        p=p,
        n=n,
        geometry=geometry.value,
        replicas=replicas,
        value=estimate.value,
        lower=estimate.lower,
        upper=estimate.upper,
    )
    return estimate


def certificate_cross_check(
    n: int,
    p: float,
    fields: int,
    seed: SeedSpec,
    geometry: Geometry = Geometry.ANNULUS,
) -> CrossCheckTally:
    """Run the invasion on fields that hold condition (a) and count outcomes.

    Condition (a) is imposed exactly by rescaling the certified weights into
    [0, p). Every field that also satisfies (b) must be covered by the invasion
    before it reaches the horizon dB(shell_outer).

    Raises:
        SoundnessError: On a certificate-holding field that is not covered
    """
    _check_level(p, settings.P_C)
    shape = CertificateGeometry(geometry, n)
    region = shape.region()
    support = shape.shell_support(region)
    inner = region.box_vertex_indices(shape.shell_inner)
    boundary = region.boundary_vertex_indices(shape.shell_outer)
    rule = StopRule(covered=shape.open_edges)
    tally = CrossCheckTally()
    for i in range(fields):
        replica_seed = seed.replica(i)
        field_ = condition_open(
            sample_weights(region, replica_seed), shape.open_edges, p
        )
        open_mask = (field_.weights < p) & support
        certified = bool(
            separated_batch(region, open_mask[None, :], inner, boundary)[0]
        )
        covered = censored = 0
        if certified:
            state = run_invasion(field_, rule)
            covered = int(
                state.target_invaded == state.target_total and not state.censored
            )
            censored = int(state.censored)
            if not covered:
                raise SoundnessError(
                    "Certificate holds but the invasion did not cover the target",
                    n=n,
                    p=p,
                    geometry=geometry.value,
                    seed=replica_seed.label(),
                    steps=state.step_count,
                    censored=state.censored,
                )
        tally = tally.merge(
            CrossCheckTally(
                fields=1, certified=int(certified), covered=covered, censored=censored
            )
        )
    logger.info(
        "Certificate cross-check",
        n=n,
        p=p,
        geometry=geometry.value,
        fields=tally.fields,
        certified=tally.certified,
        covered=tally.covered,
    )
    return tally


@handle_experiment_errors("compute the certificate bound")
def ipc_certificate_bound(
    n: int,
    p: float,
    replicas: int,
    seed: SeedSpec,
    workers: int = 1,
    geometry: Geometry = Geometry.ANNULUS,
    cross_check: int = 0,
) -> CertificateOutcome:
    """Certified lower bound p^{|support|} x P_p[shell disconnected].

    Bounds are also kept as log10 values, which stay finite where the product
    underflows. `cross_check > 0` runs the invasion soundness check on that many
    conditioned fields.
    """
    _check_level(p, settings.P_C)
    shape = CertificateGeometry(geometry, n)
    shape.check_disjoint(shape.region())
    disconnection = disconnection_probability(
        p, n, replicas, seed, workers, geometry=geometry
    )
    support = shape.support_count
    log10_open = support * math.log10(p)
    log10_bound = log10_open + safe_log10(disconnection.value)
    log10_lower = log10_open + safe_log10(disconnection.lower)
    tally = (
        certificate_cross_check(n, p, cross_check, seed.child("cross-check"), geometry)
        if cross_check
        else None
    )
    outcome = CertificateOutcome(
        n=n,
        p=p,
        support_edges=support,
        open_factor=p**support,
        disconnection=disconnection,
        bound=_pow10(log10_bound),
        bound_lower=_pow10(log10_lower),
        log10_bound=log10_bound,
        log10_bound_lower=log10_lower,
        cross_check=tally,
    )
    logger.info(
        "Certificate bound",
        n=n,
        p=p,
        geometry=geometry.value,
        support_edges=support,
        log10_bound=log10_bound,
    )
    return outcome


def default_grid(p_hat: float, points: int = 6) -> list[float]:
    """Levels from p_c to twice p_hat's excess over p_c (capped at 0.95), plus p_hat."""
    top = min(0.95, settings.P_C + 2.0 * (p_hat - settings.P_C))
    grid = {settings.P_C, min(p_hat, 0.99)}
    if top > settings.P_C:
        grid.update(float(p) for p in np.linspace(settings.P_C, top, points))
    return sorted(grid)


def optimize_certificate(
    n: int,
    p_grid: Sequence[float],
    replicas: int,
    seed: SeedSpec,
    workers: int = 1,
    geometry: Geometry = Geometry.ANNULUS,
) -> tuple[float, CertificateOutcome]:
    """The grid level with the largest certified bound.

    Every level reuses the same seed, so the disconnection estimates are coupled.
    """
    if not p_grid:
        raise ValidationError("p_grid must be nonempty", field="grid")
    for p in p_grid:
        if not settings.P_C <= p < 1.0:
            raise ValidationError("p_grid must lie in [p_c, 1)", field="grid")
    outcomes = [
        ipc_certificate_bound(n, p, replicas, seed, workers, geometry) for p in p_grid
    ]
    best = max(outcomes, key=lambda outcome: outcome.log10_bound)
    logger.info(
        "Certificate optimized",
        n=n,
        geometry=geometry.value,
        p_star=best.p,
        log10_bound=best.log10_bound,
        grid=list(p_grid),
    )
    return best.p, best


def validated_c_hat(
    replicas: int,
    seed: SeedSpec,
    workers: int = 1,
    pairs: Sequence[tuple[int, int]] = C_HAT_PAIRS,
) -> Estimate:
    """Largest quasi-multiplicativity estimate consistent with C >= 1."""
    estimates = [
        quasi_mult_constant(n, N, replicas, seed.child(f"n={n},N={N}"), workers)
        for n, N in pairs
    ]
    valid = [c for c in estimates if c.upper >= 1.0]
    if not valid:
        logger.warning("No C_hat estimate passed the C >= 1 check", pairs=list(pairs))
        valid = estimates
    return max(valid, key=lambda c: c.value)


def _gap_pipeline(
    geometry: Geometry,
    n_list: Sequence[int],
    epsilon: float,
    seed: SeedSpec,
    replicas: int,
    tolerance: float,
    workers: int,
    c_hat: Estimate | None,
    p_grid: Sequence[float] | None,
) -> GapReport:
    n_list = list(n_list)
    if not n_list or any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValidationError("n_list must be nonempty and increasing", field="n_list")
    if c_hat is None:
        c_hat = validated_c_hat(replicas, seed.child("C"), workers)
    log10_pc = math.log10(settings.P_C)

    rows: list[GapRow] = []
    skipped: list[int] = []
    for n in n_list:
        pn = estimate_pn(n, epsilon, tolerance, seed.child(f"pn/n={n}"), workers)
        if pn.status == PnStatus.UNRESOLVED:
            logger.warning("Skipping n with unresolved p_n", n=n)
            skipped.append(n)
            continue
        grid = sorted(set(p_grid or default_grid(pn.p_hat)) | {min(pn.p_hat, 0.99)})
        cert_seed = seed.child(f"cert/{geometry.value}/n={n}")
        p_star, cert = optimize_certificate(
            n, grid, replicas, cert_seed, workers, geometry
        )
        support = cert.support_edges
        log10_iic = math.log10(c_hat.value) + support * log10_pc
        log10_iic_ci = math.log10(c_hat.upper) + support * log10_pc
        seeds = [pn.seed.label(), cert_seed.label()]
        if c_hat.seed is not None:
            seeds.append(c_hat.seed.label())
        if geometry == Geometry.BOX:
            m = math.ceil(n / 2)
            arm_seed = seed.child(f"pi/m={m}")
            pi_m = one_arm_probability(m, replicas, arm_seed, workers)
            log10_iic -= math.log10(pi_m.value)
            log10_iic_ci -= safe_log10(pi_m.lower)
            seeds.append(arm_seed.label())
        log10_ratio = cert.log10_bound - log10_iic
        log10_ratio_lower = cert.log10_bound_lower - log10_iic_ci
        rows.append(
            GapRow(
                n=n,
                p_star=p_star,
                pn=pn,
                ipc_lower=cert.bound,
                iic_upper=_pow10(log10_iic),
                ratio=_pow10(log10_ratio),
                log10_ipc_lower=cert.log10_bound,
                log10_iic_upper=log10_iic,
                log10_ratio=log10_ratio,
                log10_ratio_lower=log10_ratio_lower,
                log10_exp_factor=support * math.log10(p_star / settings.P_C),
                witness=log10_ratio_lower >= LOG10_TWO,
                seeds=";".join(seeds),
            )
        )

    ratios = [row.log10_ratio for row in rows]
    increasing = all(b > a for a, b in zip(ratios, ratios[1:]))
    if not increasing:
        logger.warning(
            "Gap ratio not increasing", geometry=geometry.value, ratios=ratios
        )
    slope = None
    stats = [row.pn.divergence_stat for row in rows]
    if len(rows) >= 2 and len(set(stats)) > 1:
        slope = float(linregress(stats, [r * math.log(10.0) for r in ratios]).slope)
    witnesses = [row.n for row in rows if row.witness]
    report = GapReport(
        geometry=geometry,
        epsilon=epsilon,
        rows=rows,
        skipped=skipped,
        c_hat=c_hat,
        increasing=increasing,
        slope=slope,
        smallest_witness=witnesses[0] if witnesses else None,
    )
    logger.info(
        "Gap test finished",
        geometry=geometry.value,
        rows=len(rows),
        skipped=skipped,
        increasing=increasing,
        slope=slope,
        smallest_witness=report.smallest_witness,
    )
    return report


@handle_experiment_errors("run the gap test")
def gap_test(
    n_list: Sequence[int],
    epsilon: float = settings.DEFAULT_EPSILON,
    seed: SeedSpec | None = None,
    replicas: int = 10_000,
    tolerance: float = settings.DEFAULT_TOLERANCE,
    workers: int = 1,
    c_hat: Estimate | None = None,
    p_grid: Sequence[float] | None = None,
) -> GapReport:
    """Certified invasion lower bound over IIC upper bound for Ann(n, 2n), per n."""
    return _gap_pipeline(
        Geometry.ANNULUS,
        n_list,
        epsilon,
        seed or SeedSpec(master_seed=0),
        replicas,
        tolerance,
        workers,
        c_hat,
        p_grid,
    )


@handle_experiment_errors("run the box gap test")
def box_variant_gap(
    n_list: Sequence[int],
    epsilon: float = settings.DEFAULT_EPSILON,
    seed: SeedSpec | None = None,
    replicas: int = 10_000,
    tolerance: float = settings.DEFAULT_TOLERANCE,
    workers: int = 1,
    c_hat: Estimate | None = None,
    p_grid: Sequence[float] | None = None,
) -> GapReport:
    """The gap test for "all of B(n) is in the cluster".

    The IIC side is C_hat p_c^{|E(B(n))|} / pi(ceil(n/2)): given B(n) open the
    arm event needs B(n) <-> dB(N), and rho(n, N) <= rho(2m, N) <= C pi(N) / pi(m).
    """
    return _gap_pipeline(
        Geometry.BOX,
        n_list,
        epsilon,
        seed or SeedSpec(master_seed=0),
        replicas,
        tolerance,
        workers,
        c_hat,
        p_grid,
    )


def dsv_event_counter(
    source: str,
    windows: Sequence[Annulus],
    horizon: int,
    replicas: int,
    seed: SeedSpec,
) -> DsvReport:
    """Frequency of "no disconnecting edge in the window" for each window.

    source "ipc" grows the invasion until it exits B(horizon); source "iic" takes
    the origin cluster of a conditioned sample on B(horizon). Samples the sampler
    cannot produce count as censored; a censored share above CENSORING_LIMIT flags
    the horizon as too small.
    """
    if source not in ("ipc", "iic"):
        raise ValidationError("source must be 'ipc' or 'iic'", field="source")
    if not windows:
        raise ValidationError("At least one window is required", field="windows")
    if horizon < 2 * max(w.outer for w in windows):
        raise ValidationError(
            "Horizon must be at least twice the largest window radius", field="horizon"
        )
    region = Region.box(horizon)
    box = BoxSpec(horizon)
    rule = StopRule(exit_radius=horizon)
    stream = seed.child(f"dsv/{source}")
    hits = [0] * len(windows)
    censored = 0
    for i in range(replicas):
        replica_seed = stream.replica(i)
        if source == "ipc":
            state = run_invasion(sample_weights(region, replica_seed), rule)
            if state.censored:
                censored += 1
                continue
            cluster = state.cluster()
        else:
            try:
                sample = iic_rejection_sample(horizon, replica_seed)
            except RejectionLimitError:
                censored += 1
                continue
            cluster = cluster_of(sample.configuration, ORIGIN)
        for k, window in enumerate(windows):
            if not disconnecting_edges(cluster, ORIGIN, window, box):
                hits[k] += 1

    used = replicas - censored
    rate = censored / replicas if replicas else 0.0
    too_small = rate > settings.CENSORING_LIMIT
    if too_small:
        logger.warning(
            "Censoring above limit, horizon too small",
            source=source,
            horizon=horizon,
            censoring_rate=rate,
        )
    report = DsvReport(
        source=source,
        horizon=horizon,
        samples=replicas,
        censored=censored,
        windows=[
            DsvWindow(
                inner=window.inner,
                outer=window.outer,
                no_disconnecting=count,
                frequency=(
                    wilson_interval(
                        count,
                        used,
                        seed=stream,
                        label=f"D({window.inner},{window.outer})",
                    )
                    if used
                    else None
                ),
            )
            for window, count in zip(windows, hits)
        ],
        horizon_too_small=too_small,
    )
    logger.info(
        "Disconnecting-edge counts",
        source=source,
        horizon=horizon,
        samples=replicas,
        censored=censored,
        frequencies=[w.frequency and w.frequency.value for w in report.windows],
    )
    return report
