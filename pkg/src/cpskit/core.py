"""Core data model: observations, predictive bands, and seeded random streams.

A predictive band stores the two extreme members (``tau = 0`` and ``tau = 1``)
of a randomized predictive distribution as piecewise-constant curves over the
response axis.  Everything defined here is immutable after construction, so
values can be shared freely between threads or processes.
"""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "VALUE_TOL",
    "Observation",
    "ExtendedObservation",
    "PredictiveBand",
    "RandomStream",
    "derive_stream",
]

# Band values are IEEE doubles built from small-integer count ratios; two
# values that are equal as rationals agree to far better than this.
VALUE_TOL = 1e-12


def _finite(value, what: str) -> float:
    v = float(value)
    if not math.isfinite(v):
        raise ValueError(f"{what} must be finite, got {value!r}")
    return v


@dataclass(frozen=True)
class Observation:
    """A predictor vector paired with a real response.

    ``x`` accepts a bare number for one-dimensional problems and is stored
    as a tuple so that observations stay hashable.
    """

    x: tuple[float, ...]
    y: float

    def __post_init__(self) -> None:
        raw = self.x
        if isinstance(raw, (int, float)):
            xs = (_finite(raw, "predictor component"),)
        else:
            xs = tuple(_finite(v, "predictor component") for v in raw)
        if not xs:
            raise ValueError("predictor must have dimension >= 1")
        object.__setattr__(self, "x", xs)
        object.__setattr__(self, "y", _finite(self.y, "response"))

    @property
    def d(self) -> int:
        """Predictor dimension."""
        return len(self.x)


@dataclass(frozen=True)
class ExtendedObservation:
    """An observation carrying a tie-break number ``theta`` in [0, 1]."""

    obs: Observation
    theta: float

    def __post_init__(self) -> None:
        if not isinstance(self.obs, Observation):
            raise TypeError("obs must be an Observation")
        t = _finite(self.theta, "theta")
        if not 0.0 <= t <= 1.0:
            raise ValueError(f"theta must lie in [0, 1], got {t}")
        object.__setattr__(self, "theta", t)

    @property
    def x(self) -> tuple[float, ...]:
        return self.obs.x

    @property
    def y(self) -> float:
        return self.obs.y


@dataclass(frozen=True)
class PredictiveBand:
    """Piecewise-constant lower/upper distribution-function pair.

    The band encodes ``Q_tau(y) = Q_0(y) + tau * (Q_1(y) - Q_0(y))`` for all
    ``tau`` in [0, 1].  ``jumps`` is the strictly increasing list of jump
    locations; ``lower`` and ``upper`` hold the plateau values of ``Q_0`` and
    ``Q_1`` on the ``len(jumps) + 1`` open intervals between consecutive jumps
    (the first and last extend to -inf and +inf); ``at_jump_lower`` and
    ``at_jump_upper`` hold the values at the jump locations themselves, which
    may be wider than the adjacent plateaus.

    Construction validates all structural invariants: values in [0, 1],
    ``lower <= upper`` pointwise, monotonicity in ``y`` of both curves, and
    extreme plateaus 0 and 1.
    """

    jumps: tuple[float, ...]
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    at_jump_lower: tuple[float, ...]
    at_jump_upper: tuple[float, ...]

    def __post_init__(self) -> None:
        for name in ("jumps", "lower", "upper", "at_jump_lower", "at_jump_upper"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        self.validate()

    def validate(self) -> None:
        """Re-check every structural invariant; raises ValueError on failure."""
        m = len(self.jumps)
        if len(self.lower) != m + 1 or len(self.upper) != m + 1:
            raise ValueError("plateau lists must have len(jumps) + 1 entries")
        if len(self.at_jump_lower) != m or len(self.at_jump_upper) != m:
            raise ValueError("at-jump lists must have len(jumps) entries")
        for j in self.jumps:
            if not math.isfinite(j):
                raise ValueError("jump locations must be finite")
        if any(b <= a for a, b in zip(self.jumps, self.jumps[1:])):
            raise ValueError("jumps must be strictly increasing")
        for seq in (self.lower, self.upper, self.at_jump_lower, self.at_jump_upper):
            for v in seq:
                if not math.isfinite(v) or v < -VALUE_TOL or v > 1.0 + VALUE_TOL:
                    raise ValueError(f"band value {v!r} outside [0, 1]")
        for lo, hi in zip(self.lower, self.upper):
            if lo > hi + VALUE_TOL:
                raise ValueError("lower plateau exceeds upper plateau")
        for lo, hi in zip(self.at_jump_lower, self.at_jump_upper):
            if lo > hi + VALUE_TOL:
                raise ValueError("lower jump value exceeds upper jump value")
        for plats, at_jumps, label in (
            (self.lower, self.at_jump_lower, "lower"),
            (self.upper, self.at_jump_upper, "upper"),
        ):
            for k in range(m):
                if plats[k] > at_jumps[k] + VALUE_TOL or at_jumps[k] > plats[k + 1] + VALUE_TOL:
                    raise ValueError(f"{label} curve is not monotone at jump {k}")
        if abs(self.lower[0]) > VALUE_TOL:
            raise ValueError("leftmost lower plateau must be 0")
        if abs(self.upper[-1] - 1.0) > VALUE_TOL:
            raise ValueError("rightmost upper plateau must be 1")

    def evaluate(self, y: float, tau: float) -> float:
        """Value of ``Q_tau`` at ``y``; linear in ``tau`` with slope >= 0."""
        if not 0.0 <= tau <= 1.0:
            raise ValueError(f"tau must lie in [0, 1], got {tau}")
        y = _finite(y, "query response")
        i = bisect.bisect_left(self.jumps, y)
        if i < len(self.jumps) and self.jumps[i] == y:
            lo, hi = self.at_jump_lower[i], self.at_jump_upper[i]
        else:
            lo, hi = self.lower[i], self.upper[i]
        return lo + tau * (hi - lo)

    def slack(self, y: float) -> float:
        """Randomization width ``Q_1(y) - Q_0(y)`` at ``y``."""
        return self.evaluate(y, 1.0) - self.evaluate(y, 0.0)

    def integrate(self, f: Callable[[float], float], tau: float = 0.0) -> float:
        """Integral of ``f`` against the measure of right-limit increments.

        The measure places mass ``Q_tau(j_k+) - Q_tau(j_{k-1}+)`` at jump
        ``j_k`` (right limits, i.e. plateau differences) and no mass at
        +-inf; when the extreme limits are not 0 and 1 the result is a
        sub-probability integral.
        """
        if not 0.0 <= tau <= 1.0:
            raise ValueError(f"tau must lie in [0, 1], got {tau}")
        total = 0.0
        for k, yk in enumerate(self.jumps):
            left = self.lower[k] + tau * (self.upper[k] - self.lower[k])
            right = self.lower[k + 1] + tau * (self.upper[k + 1] - self.lower[k + 1])
            v = float(f(yk))
            if not math.isfinite(v):
                raise ValueError(f"integrand is not finite at jump {yk!r}")
            total += v * (right - left)
        return total

    def is_distribution_function(self) -> bool:
        """True when lower and upper coincide everywhere (no tau slack)."""
        return all(a == b for a, b in zip(self.lower, self.upper)) and all(
            a == b for a, b in zip(self.at_jump_lower, self.at_jump_upper)
        )

    def to_dict(self) -> dict:
        return {
            "jumps": list(self.jumps),
            "lower": list(self.lower),
            "upper": list(self.upper),
            "at_jump_lower": list(self.at_jump_lower),
            "at_jump_upper": list(self.at_jump_upper),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PredictiveBand":
        return cls(
            jumps=tuple(d["jumps"]),
            lower=tuple(d["lower"]),
            upper=tuple(d["upper"]),
            at_jump_lower=tuple(d["at_jump_lower"]),
            at_jump_upper=tuple(d["at_jump_upper"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s: str) -> "PredictiveBand":
        return cls.from_dict(json.loads(s))


class RandomStream:
    """Deterministic uniform stream addressed by a seed and a derivation path.

    Distinct paths under the same master seed give independent streams; the
    same (seed, path) pair always replays the same sequence of draws.
    """

    __slots__ = ("seed", "path", "draws", "_gen")

    def __init__(self, seed: int, path: Sequence[int] = ()):
        self.seed = int(seed) % (1 << 64)
        self.path = tuple(int(p) for p in path)
        if any(p < 0 for p in self.path):
            raise ValueError("derivation path entries must be non-negative")
        self.draws = 0
        ss = np.random.SeedSequence(self.seed, spawn_key=self.path)
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def uniform(self) -> float:
        """One draw from U[0, 1)."""
        self.draws += 1
        return float(self._gen.random())

    def uniforms(self, k: int) -> np.ndarray:
        """``k`` draws from U[0, 1) as a float64 array."""
        k = int(k)
        self.draws += k
        return self._gen.random(k)

    def permutation(self, k: int) -> list[int]:
        """A uniformly random permutation of range(k)."""
        self.draws += 1
        return [int(i) for i in self._gen.permutation(int(k))]

    def child(self, *indices: int) -> "RandomStream":
        """Independent sub-stream at ``path + indices``."""
        return RandomStream(self.seed, self.path + tuple(int(i) for i in indices))

    def replica(self) -> "RandomStream":
        """Fresh stream at the same (seed, path), replaying from the start."""
        return RandomStream(self.seed, self.path)

    def __repr__(self) -> str:
        return f"RandomStream(seed={self.seed}, path={self.path}, draws={self.draws})"


def derive_stream(master_seed: int, path: Sequence[int] = ()) -> RandomStream:
    """Stream for ``(master_seed, path)``; deterministic and replayable."""
    return RandomStream(master_seed, path)
