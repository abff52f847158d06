"""Rank transducers and the predictive bands they induce.

The central object is the randomized p-value of a candidate observation
against training data: the fraction of rotated-sequence conformity scores
below the candidate's own score, with ties shared out linearly in ``tau``.
Restricting the comparison to the candidate's taxonomy class gives the
Mondrian variant.  Closed-form band constructors are provided for the
response-rank system, the nearest-neighbour system, the cell-conditional
(histogram) systems, and the empirical probability forecaster, plus the
family of class-conditional distribution functions indexed by a postulated
response.
"""

from __future__ import annotations

import bisect
from collections import Counter
from typing import Callable, Sequence

import numpy as np

from .core import ExtendedObservation, Observation, PredictiveBand, RandomStream
from .conformity import _pick_response, _sq_dist, histogram_score, nn_score, trivial_score
from .partition import cell_index, h_schedule, histogram_taxonomy, scalar_predictor

__all__ = [
    "h_schedule",
    "cell_index",
    "histogram_taxonomy",
    "conformal_pvalue",
    "mondrian_pvalue",
    "band_from_pvalue",
    "dh_band",
    "nn_band",
    "hmps_band",
    "hcps_band",
    "pfs_distribution",
    "venn_distribution",
]


def _check_tau(tau: float) -> float:
    tau = float(tau)
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    return tau


def _extend(training, candidate, thetas):
    """Attach tie-break numbers to plain observations when supplied."""
    n = len(training)
    if thetas is None:
        return list(training), candidate
    thetas = [float(t) for t in thetas]
    if len(thetas) != n + 1:
        raise ValueError(f"need {n + 1} tie-break numbers, got {len(thetas)}")
    seq = [ExtendedObservation(o, t) for o, t in zip(training, thetas)]
    return seq, ExtendedObservation(candidate, thetas[n])


def conformal_pvalue(
    measure,
    training: Sequence[Observation],
    candidate: Observation,
    tau: float,
    thetas: Sequence[float] | None = None,
    rng: RandomStream | None = None,
) -> float:
    """Randomized rank p-value of ``candidate`` against ``training``.

    Each score ``i`` is the measure applied with observation ``i`` deleted and
    the candidate appended to the comparison data; the candidate's own score
    is computed against the full training sequence.  Returns
    ``(#below + tau * #tied) / (n + 1)`` where the tie count always includes
    the candidate itself, so the value is strictly increasing in ``tau``.
    """
    n = len(training)
    if n < 1:
        raise ValueError("conformal_pvalue requires at least one training observation")
    tau = _check_tau(tau)
    seq, cand = _extend(training, candidate, thetas)
    kwargs = {} if rng is None else {"rng": rng}
    cand_score = measure(seq, cand, **kwargs)
    less = 0
    tied = 1
    for i in range(n):
        score = measure(seq[:i] + seq[i + 1 :] + [cand], seq[i], **kwargs)
        if score < cand_score:
            less += 1
        elif score == cand_score:
            tied += 1
    return (less + tau * tied) / (n + 1)


def mondrian_pvalue(
    taxonomy,
    measure,
    training: Sequence[Observation],
    candidate: Observation,
    tau: float,
    thetas: Sequence[float] | None = None,
    rng: RandomStream | None = None,
) -> float:
    """Rank p-value restricted to the candidate's taxonomy class.

    ``taxonomy`` maps the length ``n + 1`` observation sequence to labels;
    only indices sharing the last label enter the counts, so the denominator
    is the class size (always >= 1: the candidate is in its own class).  For
    the result to define a predictive system the taxonomy must not read
    responses.
    """
    n = len(training)
    if n < 1:
        raise ValueError("mondrian_pvalue requires at least one training observation")
    tau = _check_tau(tau)
    labels = taxonomy(list(training) + [candidate])
    if len(labels) != n + 1:
        raise ValueError("taxonomy must label all n + 1 observations")
    members = [i for i in range(n) if labels[i] == labels[n]]
    seq, cand = _extend(training, candidate, thetas)
    kwargs = {} if rng is None else {"rng": rng}
    cand_score = measure(seq, cand, **kwargs)
    less = 0
    tied = 1
    for i in members:
        score = measure(seq[:i] + seq[i + 1 :] + [cand], seq[i], **kwargs)
        if score < cand_score:
            less += 1
        elif score == cand_score:
            tied += 1
    return (less + tau * tied) / (len(members) + 1)


def _rank_band(points: Sequence[float]) -> PredictiveBand:
    """Band of the rank p-value whose score crossings sit at ``points``.

    With ``n`` crossing points (a multiset) the value on an open interval
    containing no point is ``[c, c + 1] / (n + 1)`` where ``c`` counts points
    below, and at a point of multiplicity ``m`` it widens to
    ``[c, c + m + 1] / (n + 1)``.
    """
    pts = sorted(float(p) for p in points)
    n = len(pts)
    den = n + 1
    jumps: list[float] = []
    mults: list[int] = []
    for p in pts:
        if jumps and jumps[-1] == p:
            mults[-1] += 1
        else:
            jumps.append(p)
            mults.append(1)
    below = [0]
    for m in mults:
        below.append(below[-1] + m)
    lower = tuple(c / den for c in below)
    upper = tuple((c + 1) / den for c in below)
    at_lower = tuple(below[k] / den for k in range(len(jumps)))
    at_upper = tuple((below[k + 1] + 1) / den for k in range(len(jumps)))
    return PredictiveBand(tuple(jumps), lower, upper, at_lower, at_upper)


def _ecdf_band(values: Sequence[float]) -> PredictiveBand:
    """Right-continuous empirical distribution function as a degenerate band."""
    vals = sorted(float(v) for v in values)
    if not vals:
        raise ValueError("empirical distribution needs at least one value")
    n = len(vals)
    jumps: list[float] = []
    counts: list[int] = []
    for v in vals:
        if jumps and jumps[-1] == v:
            counts[-1] += 1
        else:
            jumps.append(v)
            counts.append(1)
    cum = [0]
    for c in counts:
        cum.append(cum[-1] + c)
    plats = tuple(c / n for c in cum)
    at = tuple(cum[k + 1] / n for k in range(len(jumps)))
    return PredictiveBand(tuple(jumps), plats, plats, at, at)


def dh_band(responses: Sequence[float]) -> PredictiveBand:
    """Predictive band built from response ranks alone, ignoring predictors.

    Distinct responses give plateaus ``[i, i + 1] / (n + 1)`` between sorted
    responses and widened values ``[i - 1, i + 1] / (n + 1)`` at them; tied
    responses merge jumps with their multiplicities.  Agrees with
    ``conformal_pvalue(trivial_score, ...)`` at every ``(y, tau)``.
    """
    if len(responses) < 1:
        raise ValueError("dh_band requires at least one response")
    return _rank_band(responses)


def nn_band(
    training: Sequence[Observation],
    x,
    stream: RandomStream,
    metric: Callable[[Sequence[float], Sequence[float]], float] | None = None,
) -> PredictiveBand:
    """Predictive band of the nearest-neighbour residual system at ``x``.

    The band's jumps sit at the score crossings: for training points whose
    predictor is strictly closer to ``x`` than to any other training
    predictor the crossing is the midpoint of their response with the
    nearest-neighbour estimate at ``x``; for the rest it is that estimate
    shifted by their own nearest-neighbour residual.  Distance ties are
    broken uniformly via ``stream`` (estimate first, then residuals in index
    order).
    """
    n = len(training)
    if n < 1:
        raise ValueError("nn_band requires at least one training observation")
    xq = Observation(x, 0.0).x
    dist = _sq_dist if metric is None else metric
    to_test = [dist(o.x, xq) for o in training]
    dmin = min(to_test)
    y_hat = _pick_response(
        [o.y for o, d in zip(training, to_test) if d == dmin], stream
    )
    crossings: list[float] = []
    for i, obs in enumerate(training):
        others = [dist(obs.x, training[j].x) for j in range(n) if j != i]
        min_other = min(others) if others else float("inf")
        if to_test[i] < min_other:
            crossings.append((y_hat + obs.y) / 2.0)
        else:
            nearby = [
                training[j].y
                for j in range(n)
                if j != i and dist(obs.x, training[j].x) == min_other
            ]
            crossings.append(y_hat + (obs.y - _pick_response(nearby, stream)))
    return _rank_band(crossings)


def hmps_band(training: Sequence[Observation], x) -> PredictiveBand:
    """Cell-conditional response-rank band at scalar predictor ``x``.

    Only training observations falling in the dyadic cell of ``x`` (width
    ``h_schedule(n)``) enter; with ``N`` of them the band is the rank band
    with denominator ``N + 1``.  An empty cell leaves only the candidate in
    its class, giving ``Q_tau identically tau``.
    """
    n = len(training)
    if n < 1:
        raise ValueError("hmps_band requires at least one training observation")
    h = h_schedule(n)
    cell = cell_index(scalar_predictor(x), h)
    in_cell = [o.y for o in training if cell_index(scalar_predictor(o), h) == cell]
    if not in_cell:
        return PredictiveBand((), (0.0,), (1.0,), (), ())
    return _rank_band(in_cell)


def pfs_distribution(training: Sequence[Observation], x) -> PredictiveBand:
    """Empirical distribution of in-cell responses; a point mass at 0 if none.

    The result is a genuine right-continuous distribution function (lower and
    upper coincide; no randomization slack).
    """
    if len(training) < 1:
        raise ValueError("pfs_distribution requires at least one training observation")
    h = h_schedule(len(training))
    cell = cell_index(scalar_predictor(x), h)
    in_cell = [o.y for o in training if cell_index(scalar_predictor(o), h) == cell]
    return _ecdf_band(in_cell if in_cell else [0.0])


def venn_distribution(
    taxonomy, training: Sequence[Observation], x, u: float
) -> PredictiveBand:
    """Distribution function of class responses under postulated response ``u``.

    The test observation ``(x, u)`` is appended, its taxonomy class formed,
    and the empirical distribution of the responses in that class (including
    ``u`` itself) returned.  For response-blind taxonomies the class is the
    same for every ``u``, and distribution functions for different ``u``
    differ by at most ``1 / class size`` pointwise.
    """
    n = len(training)
    if n < 1:
        raise ValueError("venn_distribution requires at least one training observation")
    test = Observation(x, u)
    seq = list(training) + [test]
    labels = taxonomy(seq)
    if len(labels) != n + 1:
        raise ValueError("taxonomy must label all n + 1 observations")
    class_responses = [o.y for o, lab in zip(seq, labels) if lab == labels[n]]
    return _ecdf_band(class_responses)


def _assemble_band(
    jump_candidates: Sequence[float],
    q01: Callable[[float], tuple[float, float]],
) -> PredictiveBand:
    """Build a band by probing a piecewise-constant p-value function.

    ``q01(y)`` returns ``(Q_0(y), Q_1(y))``.  The function must be constant on
    the open intervals between candidate jump locations, so probing interval
    midpoints (and one point beyond each end) is exact.  Candidates that
    change nothing are dropped.
    """
    jumps = sorted(set(float(j) for j in jump_candidates))
    if not jumps:
        lo, hi = q01(0.0)
        return PredictiveBand((), (lo,), (hi,), (), ())
    probes = [jumps[0] - 1.0]
    probes += [(a + b) / 2.0 for a, b in zip(jumps, jumps[1:])]
    probes.append(jumps[-1] + 1.0)
    plats = [q01(p) for p in probes]
    at = [q01(j) for j in jumps]
    out_jumps: list[float] = []
    out_lower: list[float] = [plats[0][0]]
    out_upper: list[float] = [plats[0][1]]
    out_ajl: list[float] = []
    out_aju: list[float] = []
    for k, j in enumerate(jumps):
        left, right, here = plats[k], plats[k + 1], at[k]
        if left == right == here:
            continue  # nothing changes here; merge the plateaus
        out_jumps.append(j)
        out_lower.append(right[0])
        out_upper.append(right[1])
        out_ajl.append(here[0])
        out_aju.append(here[1])
    return PredictiveBand(
        tuple(out_jumps), tuple(out_lower), tuple(out_upper), tuple(out_ajl), tuple(out_aju)
    )


def band_from_pvalue(
    jump_candidates: Sequence[float],
    pvalue: Callable[[float, float], float],
) -> PredictiveBand:
    """Band extracted from a p-value callable ``pvalue(y, tau)``.

    Exact (not a grid approximation) whenever the p-value is constant between
    the candidate jump locations, which holds for rank transducers probed at
    their score-crossing points.
    """
    return _assemble_band(jump_candidates, lambda y: (pvalue(y, 0.0), pvalue(y, 1.0)))


def hcps_band(
    training: Sequence[Observation],
    x,
    thetas: Sequence[float] | None = None,
    stream: RandomStream | None = None,
) -> PredictiveBand:
    """Band of the rank p-value driven by the in-cell rank score at ``x``.

    Tie-break numbers ``thetas`` (length ``n + 1``; drawn from ``stream`` when
    omitted) make scores almost surely distinct.  The band's jumps are a
    subset of the in-cell responses of the cell of ``x`` (plus 0 when the
    cell is empty); between consecutive in-cell responses every score is
    constant, so the construction is exact.  Agrees with
    ``conformal_pvalue(histogram_score, ...)`` at every ``(y, tau)``.
    """
    n = len(training)
    if n < 1:
        raise ValueError("hcps_band requires at least one training observation")
    if thetas is None:
        if stream is None:
            raise ValueError("hcps_band needs tie-break numbers or a stream")
        thetas = stream.uniforms(n + 1).tolist()
    thetas = [float(t) for t in thetas]
    if len(thetas) != n + 1:
        raise ValueError(f"need {n + 1} tie-break numbers, got {len(thetas)}")
    xq = scalar_predictor(x)
    xs = [scalar_predictor(o) for o in training]
    ys = [o.y for o in training]
    h = h_schedule(n)
    cells: dict[int, list[int]] = {}
    for i, xi in enumerate(xs):
        cells.setdefault(cell_index(xi, h), []).append(i)
    c_test = cell_index(xq, h)

    # Exact lexicographic rank of each observation among its cell mates
    # (self excluded): sorted tuple comparison handles response ties via theta.
    rank = [0] * n
    for members in cells.values():
        pairs = sorted((ys[i], thetas[i]) for i in members)
        for i in members:
            rank[i] = bisect.bisect_right(pairs, (ys[i], thetas[i])) - 1

    # Scores of observations outside the test cell never involve the
    # postulated response, so they are constants a/N.  Stored as floats: for
    # numerators and denominators up to ~1e6 the quotients are far enough
    # apart that IEEE division preserves both order and equality exactly.
    out_keys: list[float] = []
    for cell_id, members in cells.items():
        if cell_id == c_test:
            continue
        n_cell = len(members) - 1
        for i in members:
            if n_cell == 0:
                out_keys.append(1.0 if ys[i] >= 0 else 0.0)
            else:
                out_keys.append(rank[i] / n_cell)
    out_sorted = np.sort(np.asarray(out_keys, dtype=np.float64))

    in_cell = cells.get(c_test, [])
    m = len(in_cell)
    theta_cand = thetas[n]
    yc = np.asarray([ys[i] for i in in_cell], dtype=np.float64)
    tc = np.asarray([thetas[i] for i in in_cell], dtype=np.float64)
    rc = np.asarray([rank[i] for i in in_cell], dtype=np.int64)
    den = n + 1

    def q01(yq: float) -> tuple[float, float]:
        if m > 0:
            # A = in-cell pairs lexicographically <= the candidate's pair;
            # each in-cell score becomes (rank + flip) / m with flip = 1 when
            # the candidate's pair is <= that observation's pair.
            at_y = yc == yq
            a_cand = int(np.count_nonzero((yc < yq) | (at_y & (tc <= theta_cand))))
            flips = (yc > yq) | (at_y & (tc >= theta_cand))
            scores = rc + flips
            less = int(np.count_nonzero(scores < a_cand))
            tied = int(np.count_nonzero(scores == a_cand))
            key = a_cand / m
        else:
            less = tied = 0
            key = 1.0 if yq >= 0 else 0.0
        lo = int(np.searchsorted(out_sorted, key, side="left"))
        hi = int(np.searchsorted(out_sorted, key, side="right"))
        less += lo
        tied += hi - lo
        return (less / den, (less + tied + 1) / den)

    jump_candidates = sorted(set(yc.tolist())) if m > 0 else [0.0]
    return _assemble_band(jump_candidates, q01)
