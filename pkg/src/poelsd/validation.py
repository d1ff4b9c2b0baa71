"""Size validation of grown regions against the minimal meaningful length."""

from __future__ import annotations

import math
from dataclasses import dataclass

# pixels at or above this probability count fully toward the region size
FULL_WEIGHT_AT = 0.3


def angle_match_probability(P: int, tau: float) -> float:
    """Probability that a random quantized angle lies within tau of a given one."""
    k = math.floor(tau * P / math.pi + 1e-9)
    return min(2 * k + 1, P) / P


def compute_l_min(width: int, height: int, epsilon: float = 1.0, p: float = 3 / 16) -> float:
    """(log eps - log N_L) / log p with N_L = sqrt((M*N)^5)."""
    if width < 1 or height < 1:
        raise ValueError("image dimensions must be positive")
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    log_nl = 2.5 * math.log(width * height)
    return (math.log(epsilon) - log_nl) / math.log(p)


@dataclass(frozen=True)
class ValidationContext:
    epsilon: float
    N_L: float
    p: float
    l_min: float

    @classmethod
    def for_image(cls, width: int, height: int, epsilon: float = 1.0, p: float = 3 / 16):
        return cls(
            epsilon=epsilon,
            N_L=math.sqrt(float(width * height) ** 5),
            p=p,
            l_min=compute_l_min(width, height, epsilon, p),
        )

    @classmethod
    def from_params(cls, width: int, height: int, params):
        p = angle_match_probability(params.P, params.tau)
        return cls.for_image(width, height, params.epsilon, p)


def pixel_weight(p: float) -> float:
    return 1.0 if p >= FULL_WEIGHT_AT else p


def region_size(region) -> float:
    """Weighted size: each pixel counts 1 if p >= 0.3, otherwise p."""
    pixels = region.pixels if hasattr(region, "pixels") else region
    return math.fsum(1.0 if p >= FULL_WEIGHT_AT else p for _, _, p in pixels)


def validate(regions, ctx: ValidationContext):
    """Split regions into (accepted, rejected); accepted iff size >= l_min."""
    accepted, rejected = [], []
    for region in regions:
        (accepted if region_size(region) >= ctx.l_min else rejected).append(region)
    return accepted, rejected
