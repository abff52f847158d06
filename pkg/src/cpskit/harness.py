"""Monte-Carlo validity, consistency, and calibration experiments.

Everything here is bit-reproducible: each trial derives its own stream from
the master seed, observations are drawn first (two uniforms each), then the
tie-break numbers in index order, then the single ``tau``.  Stream paths are
namespaced per experiment so different experiments under one seed never share
draws: probability-transform sampling uses ``[0, trial]``, the online
protocol ``[1]``, consistency curves ``[2, n_index, trial]``, and the
class-conditional calibration study ``[3, trial]``.
"""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import partial
from typing import Callable, Sequence

from .core import Observation, PredictiveBand, RandomStream, derive_stream
from .conformity import histogram_score, nn_score, trivial_score
from .partition import histogram_taxonomy, scalar_predictor
from .transducers import (
    conformal_pvalue,
    dh_band,
    hcps_band,
    hmps_band,
    mondrian_pvalue,
    nn_band,
    pfs_distribution,
    venn_distribution,
)

__all__ = [
    "TestFunction",
    "TEST_FUNCTIONS",
    "Sampler",
    "SAMPLERS",
    "SYSTEMS",
    "PredictiveSystemSpec",
    "pit_sample",
    "ks_uniform",
    "online_coverage",
    "consistency_curve",
    "marginal_calibration_exchangeable",
    "marginal_calibration_iid",
    "venn_calibration",
    "VennCalibrationResult",
    "experiment_summary",
    "rows_to_csv",
]


# ---------------------------------------------------------------------------
# Test functions and synthetic samplers


@dataclass(frozen=True)
class TestFunction:
    """A named bounded continuous function with its bound."""

    __test__ = False  # keep pytest from collecting this as a test class

    name: str
    fn: Callable[[float], float]
    bound: float


def _clamp(y: float) -> float:
    return max(-1.0, min(1.0, y))


TEST_FUNCTIONS: dict[str, TestFunction] = {
    "clamp": TestFunction("clamp", _clamp, 1.0),
    "cos": TestFunction("cos", math.cos, 1.0),
}


class Sampler:
    """Seeded IID source of observations with exact conditional expectations.

    ``draw`` consumes exactly two uniforms per observation.  Subclasses with a
    closed-form conditional oracle implement ``conditional_mean``.
    """

    name: str = "base"
    binary: bool = False

    def _make(self, u1: float, u2: float) -> Observation:
        raise NotImplementedError

    def draw(self, stream: RandomStream, k: int) -> list[Observation]:
        us = stream.uniforms(2 * k)
        return [self._make(us[2 * i], us[2 * i + 1]) for i in range(k)]

    def conditional_mean(self, f: TestFunction, x: float) -> float:
        raise ValueError(f"sampler {self.name!r} has no conditional oracle for {f.name!r}")


class NoisyLineSampler(Sampler):
    """x ~ U[0,1]; y = 2x + nu with nu uniform on {-1, +1}."""

    name = "p1"

    def _make(self, u1, u2):
        nu = -1.0 if u2 < 0.5 else 1.0
        return Observation(float(u1), 2.0 * float(u1) + nu)

    def conditional_mean(self, f, x):
        return (f.fn(2.0 * x - 1.0) + f.fn(2.0 * x + 1.0)) / 2.0


class IndependentSampler(Sampler):
    """x ~ U[0,1] and y ~ U[0,1] independently."""

    name = "p2"
    _integrals = {"clamp": 0.5, "cos": math.sin(1.0)}

    def _make(self, u1, u2):
        return Observation(float(u1), float(u2))

    def conditional_mean(self, f, x):
        try:
            return self._integrals[f.name]
        except KeyError:
            raise ValueError(
                f"sampler 'p2' has no registered integral for {f.name!r}"
            ) from None


class BernoulliSampler(Sampler):
    """x ~ U[0,1]; y ~ Bernoulli(x)."""

    name = "p3"
    binary = True

    def _make(self, u1, u2):
        return Observation(float(u1), 1.0 if u2 < u1 else 0.0)

    def conditional_mean(self, f, x):
        return (1.0 - x) * f.fn(0.0) + x * f.fn(1.0)


SAMPLERS: dict[str, Sampler] = {
    s.name: s for s in (NoisyLineSampler(), IndependentSampler(), BernoulliSampler())
}


# ---------------------------------------------------------------------------
# Predictive system registry


def _pit_dh(training, test, tau, thetas, rng):
    return conformal_pvalue(trivial_score, training, test, tau)


def _pit_nn(training, test, tau, thetas, rng):
    return conformal_pvalue(nn_score, training, test, tau, rng=rng)


def _pit_hist_mondrian(training, test, tau, thetas, rng):
    return mondrian_pvalue(histogram_taxonomy, trivial_score, training, test, tau)


def _pit_hist_conformal(training, test, tau, thetas, rng):
    measure = partial(histogram_score, n_for_partition=len(training))
    return conformal_pvalue(measure, training, test, tau, thetas=thetas)


def _band_dh(training, x, thetas, stream):
    return dh_band([o.y for o in training])


def _band_nn(training, x, thetas, stream):
    return nn_band(training, x, stream)


def _band_hist_mondrian(training, x, thetas, stream):
    return hmps_band(training, x)


def _band_hist_conformal(training, x, thetas, stream):
    return hcps_band(training, x, thetas=thetas)


def _band_pfs(training, x, thetas, stream):
    return pfs_distribution(training, x)


@dataclass(frozen=True)
class PredictiveSystemSpec:
    """How to evaluate one named predictive system."""

    name: str
    conformal: bool
    scalar_only: bool
    pit: Callable | None
    band: Callable[..., PredictiveBand] | None


SYSTEMS: dict[str, PredictiveSystemSpec] = {
    "dh": PredictiveSystemSpec("dh", True, False, _pit_dh, _band_dh),
    "nn": PredictiveSystemSpec("nn", True, False, _pit_nn, _band_nn),
    "hist-mondrian": PredictiveSystemSpec(
        "hist-mondrian", False, True, _pit_hist_mondrian, _band_hist_mondrian
    ),
    "hist-conformal": PredictiveSystemSpec(
        "hist-conformal", True, True, _pit_hist_conformal, _band_hist_conformal
    ),
    "pfs": PredictiveSystemSpec("pfs", False, True, None, _band_pfs),
}


def _system(system_id: str, need_pit: bool = False) -> PredictiveSystemSpec:
    try:
        spec = SYSTEMS[system_id]
    except KeyError:
        raise ValueError(
            f"unknown system {system_id!r}; choose from {sorted(SYSTEMS)}"
        ) from None
    if need_pit and spec.pit is None:
        raise ValueError(f"system {system_id!r} does not define a randomized p-value")
    return spec


# ---------------------------------------------------------------------------
# Small-sample validity


def pit_sample(
    system: str,
    sampler: Sampler,
    n: int,
    trials: int,
    master_seed: int,
    tau: float | None = None,
) -> list[float]:
    """Probability transforms of the realized response over fresh trials.

    Per trial ``t`` a stream at path ``[0, t]`` draws ``n + 1`` observations,
    the tie-break numbers, and tau (unless fixed), and the system's p-value is
    evaluated at the realized test response.  Under the sampler's IID law the
    returned values are exactly uniform on [0, 1].
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    spec = _system(system, need_pit=True)
    out = []
    for t in range(trials):
        st = derive_stream(master_seed, [0, t])
        obs = sampler.draw(st, n + 1)
        thetas = st.uniforms(n + 1).tolist()
        tau_t = st.uniform() if tau is None else float(tau)
        out.append(spec.pit(obs[:n], obs[n], tau_t, thetas, st))
    return out


def ks_uniform(values: Sequence[float]) -> float:
    """Kolmogorov-Smirnov distance of ``values`` from the uniform law on [0, 1]."""
    if len(values) == 0:
        raise ValueError("ks_uniform needs at least one value")
    vs = sorted(float(v) for v in values)
    if vs[0] < 0.0 or vs[-1] > 1.0:
        raise ValueError("values must lie in [0, 1]")
    m = len(vs)
    d = 0.0
    for i, v in enumerate(vs):
        d = max(d, v - i / m, (i + 1) / m - v)
    return d


def online_coverage(
    system: str,
    sampler: Sampler,
    steps: int,
    epsilon: float,
    seed: int,
) -> float:
    """Fraction of online steps whose transform lands in the central interval.

    Runs the online protocol: at step ``n`` the system predicts observation
    ``n + 1`` from the first ``n``, with a fresh tau per step, and the
    transform is checked against ``[epsilon/2, 1 - epsilon/2]``.  Only
    conformal systems make the step transforms independent, so others are
    rejected.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    spec = _system(system, need_pit=True)
    if not spec.conformal:
        raise ValueError(
            f"online validity is only claimed for conformal systems, not {system!r}"
        )
    st = derive_stream(seed, [1])
    obs = sampler.draw(st, steps + 1)
    thetas = st.uniforms(steps + 1).tolist()
    taus = st.uniforms(steps)
    lo_edge, hi_edge = epsilon / 2.0, 1.0 - epsilon / 2.0
    covered = 0
    if system == "dh":
        # Ranks against a growing sorted list; identical counts to the
        # generic transducer at a fraction of the cost.
        sorted_ys: list[float] = []
        for n in range(1, steps + 1):
            if n == 1:
                sorted_ys.append(obs[0].y)
            else:
                bisect.insort(sorted_ys, obs[n - 1].y)
            y_new = obs[n].y
            less = bisect.bisect_left(sorted_ys, y_new)
            tied = bisect.bisect_right(sorted_ys, y_new) - less + 1
            pit = (less + taus[n - 1] * tied) / (n + 1)
            if lo_edge <= pit <= hi_edge:
                covered += 1
    else:
        for n in range(1, steps + 1):
            pit = spec.pit(obs[:n], obs[n], float(taus[n - 1]), thetas[: n + 1], st)
            if lo_edge <= pit <= hi_edge:
                covered += 1
    return covered / steps


# ---------------------------------------------------------------------------
# Consistency


def consistency_curve(
    system: str,
    sampler: Sampler,
    f: TestFunction,
    ns: Sequence[int],
    trials: int,
    seed: int,
    tau: float | None = None,
) -> list[tuple[int, float]]:
    """Median absolute gap between the band integral and the true conditional mean.

    For each training size the sampler provides fresh data and the exact
    conditional expectation at the test predictor; the reported statistic is
    the median over trials of ``|integral - oracle|``.  Requires a sampler
    with a conditional oracle for ``f``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    spec = _system(system)
    if spec.band is None:
        raise ValueError(f"system {system!r} does not build predictive bands")
    # Fail fast on a missing oracle before burning trials.
    sampler.conditional_mean(f, 0.5)
    rows: list[tuple[int, float]] = []
    for j, n in enumerate(ns):
        if n < 1:
            raise ValueError("all training sizes must be >= 1")
        gaps = []
        for t in range(trials):
            st = derive_stream(seed, [2, j, t])
            obs = sampler.draw(st, n + 1)
            thetas = st.uniforms(n + 1).tolist()
            tau_t = st.uniform() if tau is None else float(tau)
            band = spec.band(obs[:n], obs[n].x, thetas, st)
            value = band.integrate(f.fn, tau_t)
            target = sampler.conditional_mean(f, scalar_predictor(obs[n]))
            gaps.append(abs(value - target))
        gaps.sort()
        mid = len(gaps) // 2
        median = gaps[mid] if len(gaps) % 2 else (gaps[mid - 1] + gaps[mid]) / 2.0
        rows.append((int(n), median))
    return rows


# ---------------------------------------------------------------------------
# Exact calibration counterexamples (two-point demos, no sampling)

# Score of an observation (x, y) with x in {+1, -1}: y for x = +1, 3y + 2 for
# x = -1.  Linear coefficients as exact rationals.
_DEMO_COEFFS = {1: (Fraction(1), Fraction(0)), -1: (Fraction(3), Fraction(2))}

_DEMO_POINTS = ((-1, Fraction(-1)), (1, Fraction(1)))  # (x label, response)


def _demo_score(xlab: int, y: Fraction) -> Fraction:
    a, b = _DEMO_COEFFS[xlab]
    return a * y + b


def _demo_pvalue_mean(train, test_x: int, y: Fraction) -> Fraction:
    """tau-averaged rank p-value for one training point, exact."""
    s_train = _demo_score(train[0], train[1])
    s_cand = _demo_score(test_x, y)
    less = 1 if s_train < s_cand else 0
    tied = (1 if s_train == s_cand else 0) + 1
    return (less + Fraction(1, 2) * tied) / 2


def _demo_jump(train, test_x: int) -> Fraction:
    """Response where the candidate's score crosses the training score."""
    a, b = _DEMO_COEFFS[test_x]
    return (_demo_score(train[0], train[1]) - b) / a


def marginal_calibration_exchangeable() -> tuple[Fraction, Fraction, tuple[Fraction, Fraction]]:
    """Exact two-point exchangeable counterexample to marginal calibration.

    The data law puts weight 1/2 on each ordering of the two fixed
    observations; at query response 0 the mean of the predictive distribution
    is 3/4 while the true probability of a response <= 0 is 1/2.  Also
    returns the two jump locations (-1 and -1/3).
    """
    a, b = _DEMO_POINTS
    sequences = [(a, b), (b, a)]  # (training point, test point), each weight 1/2
    y0 = Fraction(0)
    lhs = sum(_demo_pvalue_mean(tr, te[0], y0) for tr, te in sequences) / len(sequences)
    rhs = sum(Fraction(1 if te[1] <= y0 else 0) for _, te in sequences) / len(sequences)
    jumps = tuple(_demo_jump(tr, te[0]) for tr, te in sequences)
    return lhs, rhs, jumps


def marginal_calibration_iid() -> tuple[Fraction, Fraction, tuple[Fraction, ...]]:
    """Exact two-point IID counterexample to marginal calibration.

    Both observations are drawn independently with weight 1/2 each; the four
    equiprobable (training, test) sequences average (3/4, 3/4, 3/4, 1/4) at
    query response 0, so the mean predictive value is 5/8 against a true 1/2.
    """
    a, b = _DEMO_POINTS
    sequences = [(a, b), (b, a), (a, a), (b, b)]  # each weight 1/4
    y0 = Fraction(0)
    per_sequence = tuple(_demo_pvalue_mean(tr, te[0], y0) for tr, te in sequences)
    lhs = sum(per_sequence) / len(sequences)
    rhs = sum(Fraction(1 if te[1] <= y0 else 0) for _, te in sequences) / len(sequences)
    return lhs, rhs, per_sequence


# ---------------------------------------------------------------------------
# Class-conditional (Venn) calibration


@dataclass(frozen=True)
class VennCalibrationResult:
    """Monte-Carlo calibration summary for the realized-response component.

    ``marginal`` holds one row per query response: (y, mean predictive value,
    empirical probability of a response <= y).  For binary samplers
    ``conditional`` holds one row per attained predicted probability of a
    positive response: (p, trial count, empirical positive frequency).
    """

    marginal: tuple[tuple[float, float, float], ...]
    conditional: tuple[tuple[float, int, float], ...]


def venn_calibration(
    taxonomy,
    sampler: Sampler,
    n: int,
    trials: int,
    y_grid: Sequence[float],
    seed: int,
) -> VennCalibrationResult:
    """Both sides of the marginal-calibration identity for class ECDFs.

    Per trial the distribution function indexed by the realized test response
    is evaluated on ``y_grid`` and compared, in mean, with the empirical law
    of the test response.  For binary samplers the predicted positive
    probability ``p = 1 - Q(0)`` is additionally grouped exactly, recording
    the positive frequency among trials sharing each ``p``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    grid = [float(y) for y in y_grid]
    mean_q = [0.0] * len(grid)
    emp = [0] * len(grid)
    by_p: dict[float, list[int]] = {}
    for t in range(trials):
        st = derive_stream(seed, [3, t])
        obs = sampler.draw(st, n + 1)
        test = obs[n]
        band = venn_distribution(taxonomy, obs[:n], test.x, test.y)
        for k, y in enumerate(grid):
            mean_q[k] += band.evaluate(y, 0.0)
            if test.y <= y:
                emp[k] += 1
        if sampler.binary:
            p = 1.0 - band.evaluate(0.0, 0.0)
            bucket = by_p.setdefault(p, [0, 0])
            bucket[0] += 1
            bucket[1] += 1 if test.y == 1.0 else 0
    marginal = tuple(
        (grid[k], mean_q[k] / trials, emp[k] / trials) for k in range(len(grid))
    )
    conditional = tuple(
        (p, cnt, ones / cnt) for p, (cnt, ones) in sorted(by_p.items())
    )
    return VennCalibrationResult(marginal, conditional)


# ---------------------------------------------------------------------------
# Result emission


def experiment_summary(statistic: float, threshold: float, passed: bool) -> str:
    """JSON summary with the stable {statistic, threshold, pass} shape."""
    return json.dumps({"statistic": statistic, "threshold": threshold, "pass": passed})


def rows_to_csv(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    """Rows as a deterministic comma-separated block with a header line."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(v) if isinstance(v, float) else str(v) for v in row))
    return "\n".join(lines) + "\n"
