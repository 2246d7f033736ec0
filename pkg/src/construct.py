# -*- coding: utf-8 -*-
"""
Copyright 2019 CSIRO Land and Water

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.

Cardinal utility from an Alt system: crossing solvers, the equal-intensity
midpoint, Archimedean stepping, the dyadic ladder a_i^k with values i/2^k
on a reference segment, and evaluation of the reconstructed utility by
calibrating points against that segment.

The ladder lives on one segment (the box diagonal unless the caller gives a
strictly ranked segment); any other point is valued through the rung it is
indifferent to.
"""
import itertools
import logging
import threading
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np
from cachetools import LRUCache
from scipy import optimize, stats

import config
from core import (
    BracketError, ConstructionError, ArchimedeanError, DegenerateFitError,
    DomainError, IntensityOrder, MonotonicityError, OrderingError, RECONSTRUCTION_PREDICATES,
    as_point, collect_report, draw, run_trials, uniform_sampler, require_trials, witness,
)

logger = logging.getLogger(__name__)

GREATER = IntensityOrder.GREATER
EQUAL = IntensityOrder.EQUAL
LESS = IntensityOrder.LESS

# equality band widening for the ladder spacing check
SPACING_SLACK = 1e3


@dataclass(frozen=True, eq=False)
class Segment:
    p: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        p = as_point(self.p)
        q = as_point(self.q, p.size)
        object.__setattr__(self, 'p', p)
        object.__setattr__(self, 'q', q)

    @classmethod
    def diagonal(cls, domain):
        return cls(domain.lower, domain.upper)

    @property
    def length(self):
        return float(np.linalg.norm(self.q - self.p))

    def at(self, t):
        return (1.0 - t) * self.p + t * self.q

    def sub(self, t0, t1):
        return Segment(self.at(t0), self.at(t1))

    def locate(self, x, tol=1e-9):
        """Parameter of the point of the segment equal to x; DomainError when x is off the segment."""
        x = as_point(x, self.p.size)
        d = self.q - self.p
        t = float(np.dot(x - self.p, d) / np.dot(d, d))
        if not -tol <= t <= 1.0 + tol or np.linalg.norm(self.at(t) - x) > tol * max(1.0, self.length):
            raise DomainError("Point {} is not on the reference segment.".format(x.tolist()))
        return min(max(t, 0.0), 1.0)

    def within(self, domain):
        return domain.contains(self.p) and domain.contains(self.q)

    def to_dict(self):
        return {'p': self.p.tolist(), 'q': self.q.tolist()}


# Side functions map a point to an IntensityOrder. The bracket runs from a point
# where the side is LESS or EQUAL (the D side) to one where it is GREATER or EQUAL (U).

def left_crossing(oracle, y, z, w):
    """[x,y] vs [z,w] as a function of x."""
    return lambda x: oracle.compare(x, y, z, w)


def right_crossing(oracle, y, z, w):
    """[z,w] vs [y,x] as a function of x; rises as x improves."""
    return lambda x: oracle.compare(z, w, y, x)


def midpoint_gap(oracle, x, z):
    """[w,x] vs [z,w] as a function of w."""
    return lambda w: oracle.compare(w, x, z, w)


def indifference(oracle, x):
    """p vs x as a function of p."""
    return lambda p: oracle.compare(p, x, x, x)


def crossing_param(seg, side, tol_t=None):
    """
    Bisect seg for a parameter where side is EQUAL.
    :param seg: Segment with side(p) <= EQUAL and side(q) >= EQUAL
    :param side: point -> IntensityOrder
    :param tol_t: parameter tolerance
    :return: float t in [0, 1]
    """
    tol_t = config.TOL_T if tol_t is None else float(tol_t)
    if not tol_t > 0:
        raise DomainError("Bisection tolerance must be positive.")
    at_p = side(seg.p)
    at_q = side(seg.q)
    if at_p is GREATER or at_q is LESS:
        raise BracketError("Segment does not bracket the crossing (start {}, end {}).".format(
            at_p.name, at_q.name))
    if at_p is EQUAL:
        return 0.0
    if at_q is EQUAL:
        return 1.0
    t, r = optimize.bisect(lambda s: float(side(seg.at(s))), 0.0, 1.0, xtol=tol_t,
                           maxiter=400, full_output=True, disp=False)
    logger.debug("crossing at t={:.12g} after {:d} iterations".format(t, r.iterations))
    return float(t)


def solve_crossing(oracle, seg, side, tol_t=None):
    return seg.at(crossing_param(seg, side, tol_t))


def _check_ordered(oracle, hi, lo, what):
    if oracle.compare(hi, lo, lo, lo) is not GREATER:
        raise OrderingError("{}: {} is not strictly preferred to {}.".format(
            what, np.asarray(hi).tolist(), np.asarray(lo).tolist()))


def midpoint_param(oracle, seg, tol_t=None):
    """Parameter of the equal-intensity midpoint of seg.p and seg.q."""
    x, z = seg.p, seg.q
    _check_ordered(oracle, z, x, "midpoint")
    t = crossing_param(seg, midpoint_gap(oracle, x, z), tol_t)
    y = seg.at(t)
    if oracle.compare(z, y, y, y) is not GREATER or oracle.compare(y, x, x, x) is not GREATER:
        raise ConstructionError("Midpoint {} is not strictly between its endpoints.".format(y.tolist()))
    return t


def solve_midpoint(oracle, x, z, tol_t=None):
    seg = Segment(x, z)
    return seg.at(midpoint_param(oracle, seg, tol_t))


@dataclass
class ArchimedeanSteps:
    k: int
    points: List[np.ndarray]

    def to_dict(self):
        return {'k': self.k, 'points': [p.tolist() for p in self.points]}


def archimedean_count(oracle, x, y, z, cap=1000, tol_t=None):
    """
    Lay equal steps a_{i+1} with [a_{i+1},a_i]=[x,y] from a_0=y, a_1=x toward z
    and stop at the first k with [x,y] > [z,a_k].
    """
    _check_ordered(oracle, x, y, "archimedean_count")
    if oracle.compare(z, x, x, x) is LESS:
        raise OrderingError("archimedean_count: z must be at least as good as x.")
    steps = [as_point(y), as_point(x)]
    k = 1
    while oracle.compare(x, y, z, steps[k]) is not GREATER:
        if k >= cap:
            raise ArchimedeanError("No k below {:d} exhausts the interval to z.".format(cap))
        a_k = steps[k]
        steps.append(solve_crossing(oracle, Segment(a_k, z), left_crossing(oracle, a_k, x, y), tol_t))
        k += 1
    return ArchimedeanSteps(k, steps)


def check_segment_ranked(oracle, seg, samples=33):
    """Preference must rise strictly along seg or the calibration bisection is ill-posed."""
    prev = seg.p
    for t in np.linspace(0.0, 1.0, samples)[1:]:
        cur = seg.at(t)
        if oracle.compare(cur, prev, prev, prev) is not GREATER:
            raise MonotonicityError(
                "Preference does not rise strictly along the reference segment near t={:.4g}; "
                "supply a strictly ranked segment for this oracle.".format(t))
        prev = cur
    return True


@dataclass(eq=False)
class DyadicLadder:
    segment: Segment
    depth: int
    levels: List[Dict[int, float]]
    tol_t: float
    y_star: np.ndarray
    x_star: np.ndarray
    oracle_calls: int = 0

    def point(self, i, k=None):
        k = self.depth if k is None else k
        return self.segment.at(self.levels[k][i])

    def rungs(self, k=None):
        """(indices, parameters) at level k, sorted by index."""
        level = self.levels[self.depth if k is None else k]
        idx = np.array(sorted(level), dtype=int)
        return idx, np.array([level[i] for i in idx])

    def values(self, k=None):
        k = self.depth if k is None else k
        idx, _ = self.rungs(k)
        return idx / float(2 ** k)

    def to_dict(self):
        idx, params = self.rungs()
        return {
            'segment': self.segment.to_dict(),
            'depth': self.depth,
            'tol_t': self.tol_t,
            'anchors': {'y_star': self.y_star.tolist(), 'x_star': self.x_star.tolist()},
            'rungs': {
                'index': idx.tolist(),
                'value': (idx / float(2 ** self.depth)).tolist(),
                'param': params.tolist(),
            },
            'oracle_calls': self.oracle_calls,
        }


def _extend_up(oracle, seg, t_i, unit, tol_t):
    """Next rung above t_i with [a_{i+1}, a_i] equal to the unit step, or None at the box edge."""
    if t_i >= 1.0:
        return None
    a_i = seg.at(t_i)
    side = left_crossing(oracle, a_i, unit[0], unit[1])
    if side(seg.q) is LESS:
        return None
    sub = Segment(a_i, seg.q)
    s = crossing_param(sub, side, tol_t)
    return t_i + s * (1.0 - t_i)


def _extend_down(oracle, seg, t_i, unit, tol_t):
    if t_i <= 0.0:
        return None
    a_i = seg.at(t_i)
    side = right_crossing(oracle, a_i, unit[0], unit[1])
    if side(seg.p) is GREATER:
        return None
    sub = Segment(seg.p, a_i)
    s = crossing_param(sub, side, tol_t)
    return s * t_i


def _extend(oracle, seg, level, unit, tol_t, first=False):
    top = max(level)
    while True:
        t = _extend_up(oracle, seg, level[top], unit, tol_t)
        if t is None:
            break
        level[top + 1] = t
        top += 1
        if not first:
            break
    bottom = min(level)
    while True:
        t = _extend_down(oracle, seg, level[bottom], unit, tol_t)
        if t is None:
            break
        level[bottom - 1] = t
        bottom -= 1
        if not first:
            break


def build_ladder(oracle, y_star, x_star, depth=None, tol_t=None, segment=None, check_ranked=True):
    """
    Rungs a_i^k on the reference segment with value i/2^k.

    Level 0 lays the unit step [x*, y*] up and down the segment until the box
    blocks. Each further level keeps the previous rungs at even indices,
    inserts equal-intensity midpoints between neighbours and tries one more
    half step past each end.
    """
    depth = config.DEPTH if depth is None else int(depth)
    tol_t = config.TOL_T if tol_t is None else float(tol_t)
    if depth < 0:
        raise DomainError("Ladder depth must be non-negative.")
    seg = segment or Segment.diagonal(oracle.domain)
    if not seg.within(oracle.domain):
        raise DomainError("Reference segment leaves the domain.")
    calls = oracle.calls
    if check_ranked:
        check_segment_ranked(oracle, seg)
    t0, t1 = seg.locate(y_star), seg.locate(x_star)
    y_star, x_star = seg.at(t0), seg.at(t1)
    _check_ordered(oracle, x_star, y_star, "build_ladder")
    level = {0: t0, 1: t1}
    _extend(oracle, seg, level, (x_star, y_star), tol_t, first=True)
    levels = [level]
    for k in range(depth):
        prev = levels[-1]
        cur = {2 * i: t for i, t in prev.items()}
        idx = sorted(prev)
        for i, j in zip(idx, idx[1:]):
            lo, hi = prev[i], prev[j]
            s = midpoint_param(oracle, seg.sub(lo, hi), tol_t)
            cur[2 * i + 1] = lo + s * (hi - lo)
        _extend(oracle, seg, cur, (seg.at(cur[1]), seg.at(cur[0])), tol_t)
        levels.append(cur)
        logger.debug("ladder level {:d}: {:d} rungs".format(k + 1, len(cur)))
    ladder = DyadicLadder(seg, depth, levels, tol_t, y_star, x_star, oracle.calls - calls)
    logger.info("Built ladder of depth {:d} with {:d} rungs ({:d} oracle calls)".format(
        depth, len(levels[-1]), ladder.oracle_calls))
    return ladder


class Calibrator(object):
    """
    Position on the reference segment of the point indifferent to x.
    Results are memoised per point.
    """

    def __init__(self, oracle, segment, tol_t=None, cache_size=1 << 20):
        self.oracle = oracle
        self.segment = segment
        self.tol_t = config.TOL_T if tol_t is None else float(tol_t)
        self._cache = LRUCache(maxsize=cache_size)
        self._lock = threading.Lock()

    def _solve(self, x):
        side = indifference(self.oracle, x)
        if side(self.segment.p) is GREATER:
            return 0.0, "below"
        if side(self.segment.q) is LESS:
            return 1.0, "above"
        return crossing_param(self.segment, side, self.tol_t), None

    def param(self, x):
        """:return: (t, flag) with flag None, 'below' or 'above' when x lies outside the segment's range"""
        x = np.asarray(x, dtype=float)
        key = x.tobytes()
        # held across the solve so call counts do not depend on thread interleaving
        with self._lock:
            hit = self._cache.get(key)
            if hit is None:
                hit = self._solve(x)
                self._cache[key] = hit
        return hit


class ReconstructedUtility(object):
    """
    û: piecewise linear in segment parameter through the deepest rungs.
    Points indifferent to a rung get that rung's exact value; beyond the
    outermost rungs the last slope is continued for at most one rung step
    and the result is flagged extrapolated.
    """

    def __init__(self, oracle, ladder, calibrator=None):
        self.oracle = oracle
        self.ladder = ladder
        self.domain = oracle.domain
        self.calibrator = calibrator or Calibrator(oracle, ladder.segment, ladder.tol_t)
        idx, params = ladder.rungs()
        self._t = params
        self._v = idx / float(2 ** ladder.depth)
        self._step = 1.0 / float(2 ** ladder.depth)

    @property
    def depth(self):
        return self.ladder.depth

    @property
    def budget(self):
        """Interpolation error budget in utility units: one rung step."""
        return self._step

    @property
    def rung_spacing(self):
        """Widest gap between neighbouring rungs, in coordinates along the reference segment."""
        seg = self.ladder.segment
        return float(np.max(np.diff(self._t))) * float(np.max(np.abs(seg.q - seg.p)))

    def _value_at(self, t):
        ts, vs = self._t, self._v
        if t < ts[0]:
            slope = (vs[1] - vs[0]) / (ts[1] - ts[0])
            return max(vs[0] + (t - ts[0]) * slope, vs[0] - self._step), True
        if t > ts[-1]:
            slope = (vs[-1] - vs[-2]) / (ts[-1] - ts[-2])
            return min(vs[-1] + (t - ts[-1]) * slope, vs[-1] + self._step), True
        return float(np.interp(t, ts, vs)), False

    def evaluate_detailed(self, x):
        x = np.asarray(x, dtype=float)
        t, flag = self.calibrator.param(x)
        value, extrapolated = self._value_at(t)
        j = int(np.argmin(np.abs(self._t - t)))
        if self.oracle.compare(self.ladder.segment.at(self._t[j]), x, x, x) is EQUAL:
            return float(self._v[j]), False
        return float(value), extrapolated or flag is not None

    def __call__(self, x):
        return self.evaluate_detailed(x)[0]

    def to_dict(self):
        doc = self.ladder.to_dict()
        doc['budget'] = self.budget
        doc['oracle'] = self.oracle.name
        return doc


def reconstruct(oracle, y_star=None, x_star=None, depth=None, tol_t=None, segment=None, check_ranked=True):
    """Ladder plus evaluator. Anchors default to the ends of the reference segment."""
    seg = segment or Segment.diagonal(oracle.domain)
    y_star = seg.p if y_star is None else y_star
    x_star = seg.q if x_star is None else x_star
    ladder = build_ladder(oracle, y_star, x_star, depth, tol_t, seg, check_ranked)
    return ReconstructedUtility(oracle, ladder)


def evaluate(recon, x):
    return recon(recon.domain.check(x))


def tabulate(recon, grid=11):
    """Rows (coords..., value, extrapolated) over a regular grid of the domain."""
    domain = recon.domain
    axes = [np.linspace(lo, hi, grid) for lo, hi in zip(domain.lower, domain.upper)]
    rows = []
    for coords in itertools.product(*axes):
        p = np.array(coords)
        if not domain.contains(p):
            continue
        value, extrapolated = recon.evaluate_detailed(p)
        rows.append(list(coords) + [value, int(extrapolated)])
    return rows


def tabulation_header(domain):
    return ["x{:d}".format(i + 1) for i in range(domain.dim)] + ["value", "extrapolated"]


@dataclass
class AffineFit:
    alpha: float
    beta: float
    max_residual: float
    samples: int
    rvalue: float
    notes: List[str] = field(default_factory=list)

    @property
    def positive(self):
        return self.alpha > 0

    def to_dict(self):
        return {
            'alpha': self.alpha,
            'beta': self.beta,
            'max_residual': self.max_residual,
            'samples': self.samples,
            'rvalue': self.rvalue,
            'positive': self.positive,
            'notes': list(self.notes),
        }


def verify_affine_uniqueness(oracle, anchors1, anchors2, depth=None, samples=200, seed=0,
                             tol_t=None, segment=None, sampler=None):
    """
    Two reconstructions from different anchor pairs must be positive affine
    images of each other: fit u2 = alpha*u1 + beta over sampled points.
    """
    seg = segment or Segment.diagonal(oracle.domain)
    first = reconstruct(oracle, anchors1[0], anchors1[1], depth, tol_t, seg)
    second = reconstruct(oracle, anchors2[0], anchors2[1], depth, tol_t, seg, check_ranked=False)
    second.calibrator = first.calibrator
    sampler = sampler or uniform_sampler(oracle.domain)
    rng = np.random.default_rng(seed)
    points = draw(sampler, rng, oracle.domain, int(samples))
    u1 = np.array([first(p) for p in points])
    u2 = np.array([second(p) for p in points])
    if np.ptp(u1) == 0.0:
        raise DegenerateFitError("All sampled points are indifferent; no affine fit exists.")
    fit = stats.linregress(u1, u2)
    residual = float(np.max(np.abs(u2 - (fit.slope * u1 + fit.intercept))))
    result = AffineFit(float(fit.slope), float(fit.intercept), residual, len(points), float(fit.rvalue))
    if not result.positive:
        result.notes.append("fitted slope is not positive")
    logger.info("Affine fit alpha={:.6g} beta={:.6g} max residual={:.3g}".format(
        result.alpha, result.beta, result.max_residual))
    return result


def _rung_between(oracle, recon, x, y):
    """A deepest-level rung z with x > z > y, middle rung first."""
    idx, params = recon.ladder.rungs()
    values = idx / float(2 ** recon.ladder.depth)
    seg = recon.ladder.segment
    lo, hi = recon(y), recon(x)
    inside = np.flatnonzero((values > lo) & (values < hi))
    for j in sorted(inside, key=lambda j: abs(values[j] - 0.5 * (lo + hi))):
        z = seg.at(params[j])
        if oracle.compare(x, z, z, z) is GREATER and oracle.compare(z, y, y, y) is GREATER:
            return True
    return False


def density_violation(oracle, recon, params, x, y):
    """None when x is not clearly above y or a rung separates them."""
    gap = 2.0 ** (1 - recon.ladder.depth)
    if recon(x) - recon(y) <= gap or oracle.compare(x, y, y, y) is not GREATER:
        return None
    if _rung_between(oracle, recon, x, y):
        return None
    return [GREATER]


def check_density(oracle, ladder, sampler, trials, seed=0, workers=None, max_witnesses=None,
                  min_depth=0):
    """
    Pairs whose reconstructed values differ by more than two rung steps must
    have a rung strictly preferred between them.
    """
    trials = require_trials(trials)
    if ladder.depth < min_depth:
        raise DomainError("Ladder depth {:d} is below the minimum {:d}.".format(ladder.depth, min_depth))
    recon = ReconstructedUtility(oracle, ladder)
    gap = 2.0 ** (1 - ladder.depth)
    domain = oracle.domain

    def _trial(rng):
        a, b = draw(sampler, rng, domain, 2)
        va, vb = recon(a), recon(b)
        x, y = (a, b) if va >= vb else (b, a)
        if abs(va - vb) <= gap or oracle.compare(x, y, y, y) is not GREATER:
            return None
        out = density_violation(oracle, recon, {}, x, y)
        if out is None:
            return []
        return [witness('no_rung_between', (x, y), out)]
    results = run_trials(_trial, trials, seed, workers)
    return collect_report('density', results, trials, seed, max_witnesses, params={'gap': gap})


def spacing_violation(oracle, recon, params, *points):
    out = oracle.relaxed(params.get('slack', SPACING_SLACK)).compare(*points)
    return None if out is EQUAL else [out]


def check_ladder_spacing(oracle, ladder, trials, seed=0, workers=None, max_witnesses=None,
                         slack=SPACING_SLACK):
    """[a_{i+k}, a_i] = [a_{j+k}, a_j] on random deepest-level rungs, within a widened band."""
    trials = require_trials(trials)
    params = {'slack': slack}
    idx, _ = ladder.rungs()
    lo, hi = int(idx[0]), int(idx[-1])
    report_notes = []
    for k in range(ladder.depth):
        for i, t in ladder.levels[k].items():
            if ladder.levels[k + 1].get(2 * i) != t:
                report_notes.append("rung ({:d},{:d}) not carried to level {:d}".format(i, k, k + 1))

    def _trial(rng):
        if hi - lo < 1:
            return None
        k = int(rng.integers(1, hi - lo + 1))
        i = int(rng.integers(lo, hi - k + 1))
        j = int(rng.integers(lo, hi - k + 1))
        pts = (ladder.point(i + k), ladder.point(i), ladder.point(j + k), ladder.point(j))
        out = spacing_violation(oracle, None, params, *pts)
        if out is None:
            return []
        return [witness('spacing', pts, out)]
    results = run_trials(_trial, trials, seed, workers)
    report = collect_report('ladder_spacing', results, trials, seed, max_witnesses, params=params)
    if report_notes:
        report.violation_count += len(report_notes)
        report.notes.extend(report_notes)
    return report


def _dead_band(recon, params):
    return params.get('dead_band', 4.0 * recon.budget)


def representation_violation(oracle, recon, params, x, y, z, w):
    d = recon(x) - recon(y) - recon(z) + recon(w)
    if abs(d) <= _dead_band(recon, params):
        return None
    out = oracle.compare(x, y, z, w)
    return None if int(out) == int(np.sign(d)) else [out]


def check_representation(oracle, recon, sampler, trials, seed=0, workers=None, max_witnesses=None,
                         dead_band=None):
    """sign(û(x)-û(y)-û(z)+û(w)) against the oracle outside a dead-band."""
    trials = require_trials(trials)
    params = {'dead_band': 4.0 * recon.budget if dead_band is None else float(dead_band)}
    domain = oracle.domain

    def _trial(rng):
        quad = draw(sampler, rng, domain, 4)
        x, y, z, w = quad
        if abs(recon(x) - recon(y) - recon(z) + recon(w)) <= params['dead_band']:
            return None
        out = representation_violation(oracle, recon, params, *quad)
        if out is None:
            return []
        return [witness('representation', quad, out)]
    results = run_trials(_trial, trials, seed, workers)
    return collect_report('representation', results, trials, seed, max_witnesses, params=params)


def order_violation(oracle, recon, params, x, y):
    d = recon(x) - recon(y)
    if abs(d) <= _dead_band(recon, params):
        return None
    pref = oracle.compare(x, y, y, y)
    return None if int(pref) == int(np.sign(d)) else [pref]


def check_order_embedding(oracle, recon, sampler, trials, seed=0, workers=None, max_witnesses=None,
                          dead_band=None):
    """û(x) >= û(y) exactly when x is weakly preferred to y."""
    trials = require_trials(trials)
    params = {'dead_band': 4.0 * recon.budget if dead_band is None else float(dead_band)}
    domain = oracle.domain

    def _trial(rng):
        x, y = draw(sampler, rng, domain, 2)
        if abs(recon(x) - recon(y)) <= params['dead_band']:
            return None
        out = order_violation(oracle, recon, params, x, y)
        if out is None:
            return []
        return [witness('order', (x, y), out)]
    results = run_trials(_trial, trials, seed, workers)
    return collect_report('order_embedding', results, trials, seed, max_witnesses, params=params)


RECONSTRUCTION_PREDICATES.update({
    'density': density_violation,
    'ladder_spacing': spacing_violation,
    'representation': representation_violation,
    'order_embedding': order_violation,
})
