"""Proportion and ratio estimates with confidence intervals."""

import math

from scipy.stats import norm

from percolab.config import settings
from percolab.exceptions import EstimationError, ValidationError
from percolab.schemas.estimates import Estimate
from percolab.schemas.seeds import SeedSpec


def z_value(confidence: float) -> float:
    """Two-sided normal quantile for a confidence level."""
    if not 0.0 < confidence < 1.0:
        raise ValidationError("Confidence must lie in (0, 1)", field="confidence")
    return float(norm.ppf(1.0 - (1.0 - confidence) / 2.0))


def wilson_interval(
    successes: int,
    trials: int,
    confidence: float = settings.CONFIDENCE,
    seed: SeedSpec | None = None,
    label: str = "",
) -> Estimate:
    """Wilson score interval for a binomial proportion.

    Endpoints are clamped to [0, 1], and to exactly 0 (resp. 1) when no (resp. all)
    trials succeed.
    """
    if trials < 1:
        raise ValidationError(
            "Wilson interval needs at least one trial", field="trials"
        )
    if not 0 <= successes <= trials:
        raise ValidationError(
            f"successes must lie in [0, {trials}], got {successes}", field="successes"
        )
    z = z_value(confidence)
    phat = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (phat + z2 / (2.0 * trials)) / denom
    half = z * math.sqrt(phat * (1.0 - phat) / trials + z2 / (4.0 * trials**2)) / denom
    lower = 0.0 if successes == 0 else max(0.0, center - half)
    upper = 1.0 if successes == trials else min(1.0, center + half)
    return Estimate(
        value=phat,
        lower=min(lower, phat),
        upper=max(upper, phat),
        confidence=confidence,
        replicas=trials,
        successes=successes,
        seed=seed,
        label=label,
    )


def _sigma(estimate: Estimate) -> float:
    return estimate.halfwidth / z_value(estimate.confidence)


def ratio_estimate(num: Estimate, den: Estimate) -> Estimate:
    """Delta-method interval for num / den of two independent estimates.

    var(R) ~ (sigma_num^2 + R^2 sigma_den^2) / den^2, sigmas read back from the
    interval half-widths. A ratio of an estimate with itself is exactly 1 with a
    zero-width interval.
    """
    if num is den:
        return Estimate(
            value=1.0,
            lower=1.0,
            upper=1.0,
            confidence=num.confidence,
            replicas=num.replicas,
            seed=num.seed,
            label=f"{num.label}/{den.label}",
        )
    if den.lower <= 0.0:
        raise EstimationError(
            "Denominator interval touches zero", lower=den.lower, label=den.label
        )
    ratio = num.value / den.value
    variance = (_sigma(num) ** 2 + ratio**2 * _sigma(den) ** 2) / den.value**2
    half = z_value(num.confidence) * math.sqrt(variance)
    lower = ratio - half
    if num.lower >= 0.0:
        lower = max(0.0, lower)
    return Estimate(
        value=ratio,
        lower=lower,
        upper=ratio + half,
        confidence=num.confidence,
        replicas=min(num.replicas, den.replicas),
        seed=num.seed,
        label=f"{num.label}/{den.label}",
    )


def product_estimate(a: Estimate, b: Estimate) -> Estimate:
    """Delta-method interval for a * b of two independent estimates."""
    value = a.value * b.value
    variance = b.value**2 * _sigma(a) ** 2 + a.value**2 * _sigma(b) ** 2
    half = z_value(a.confidence) * math.sqrt(variance)
    lower = value - half
    if a.lower >= 0.0 and b.lower >= 0.0:
        lower = max(0.0, lower)
    return Estimate(
        value=value,
        lower=lower,
        upper=value + half,
        confidence=a.confidence,
        replicas=min(a.replicas, b.replicas),
        seed=a.seed,
        label=f"{a.label}*{b.label}",
    )


def scale_estimate(estimate: Estimate, factor: float) -> Estimate:
    """Multiply an estimate by an exact positive constant."""
    if factor <= 0.0:
        raise ValidationError("Scale factor must be positive", field="factor")
    return estimate.model_copy(
        update={
            "value": estimate.value * factor,
            "lower": estimate.lower * factor,
            "upper": estimate.upper * factor,
        }
    )


def safe_log10(x: float) -> float:
    return math.log10(x) if x > 0.0 else float("-inf")
