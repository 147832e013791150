"""Closed-form flat norm values for disks and squares"""

import math

from utils.errors import InvalidArgumentError


def _positive(name: str, value: float):
    if not (value > 0 and math.isfinite(value)):
        raise InvalidArgumentError(f"{name} must be positive and finite, got {value}")


def disk_flatnorm(radius: float, lam: float) -> float:
    """Keep the circle (2 pi R) or fill the disk (lam pi R^2)"""
    _positive("radius", radius)
    _positive("lambda", lam)
    return min(2.0 * math.pi * radius, lam * math.pi * radius ** 2)


def square_flatnorm_l1(side: float, lam: float) -> float:
    """Square under the axis-aligned (l1) boundary mass"""
    _positive("side", side)
    _positive("lambda", lam)
    return min(4.0 * side, lam * side ** 2)


def square_rounding_threshold(side: float) -> float:
    """Smallest lambda for which corner rounding beats filling the square.

    Larger root of lam^2 a^2 - 4 a lam + (4 - pi) = 0.
    """
    _positive("side", side)
    return (2.0 + math.sqrt(math.pi)) / side


def square_flatnorm_euclid(side: float, lam: float) -> float:
    """Square with every corner cut by a circular arc of radius 1/lam"""
    _positive("side", side)
    _positive("lambda", lam)
    threshold = square_rounding_threshold(side)
    if lam < threshold * (1.0 - 1e-12):
        raise InvalidArgumentError(
            f"Corner rounding formula holds only for lambda >= (2 + sqrt(pi))/a = {threshold:.12g}, got {lam}")
    return 4.0 * side + (math.pi - 4.0) / lam
