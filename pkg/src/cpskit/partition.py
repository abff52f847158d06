"""Dyadic interval partitions of the real line and the induced taxonomy."""

from __future__ import annotations

import math
from typing import Sequence

__all__ = ["h_schedule", "cell_index", "scalar_predictor", "histogram_taxonomy"]


def h_schedule(n: int) -> float:
    """Cell width used with ``n`` training observations.

    Returns ``2 ** -floor(log2(n) / 3)``: always a power of 2, non-increasing
    in ``n``, shrinking to 0 while ``n * h_schedule(n)`` grows like
    ``n ** (2/3)``.  Consecutive widths divide each other, so the partitions
    are nested as ``n`` grows.
    """
    n = int(n)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return 2.0 ** -((n.bit_length() - 1) // 3)


def cell_index(x: float, h: float) -> int:
    """Index ``k`` of the half-open cell ``[k*h, (k+1)*h)`` containing ``x``."""
    # Division by a power of 2 is exact for doubles, so the boundary x == k*h
    # lands in the right-hand cell reliably.
    return math.floor(x / h)


def scalar_predictor(item) -> float:
    """Extract a scalar predictor from a number, 1-vector, or observation."""
    if isinstance(item, (int, float)):
        return float(item)
    x = getattr(item, "x", item)
    if isinstance(x, (int, float)):
        return float(x)
    if len(x) != 1:
        raise ValueError(
            f"scalar predictors required, got dimension {len(x)}; "
            "map multivariate predictors to the line first"
        )
    return float(x[0])


def histogram_taxonomy(xs: Sequence) -> list[int]:
    """Cell labels for a sequence of ``n + 1`` scalar predictors.

    Items may be bare scalars or observations.  The partition width is
    ``h_schedule(len(xs) - 1)``; equal label means same cell.  Labels depend
    only on predictors, never on responses, and permuting ``xs`` permutes the
    labels identically.
    """
    n = len(xs) - 1
    if n < 1:
        raise ValueError("taxonomy needs at least 2 items (n >= 1)")
    h = h_schedule(n)
    return [cell_index(scalar_predictor(x), h) for x in xs]
