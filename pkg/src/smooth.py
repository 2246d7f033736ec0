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
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

import config
from core import (
    AltError, BracketError, DomainError, RangeError, diagonal_sampler, draw,
    mixed_sampler, require_trials, run_trials, uniform_sampler,
)
from construct import ReconstructedUtility, Segment, crossing_param, indifference, solve_midpoint

logger = logging.getLogger(__name__)

LINE_SMOOTH = "line-smooth"
NOT_LINE_SMOOTH = "not-line-smooth"
INCONCLUSIVE = "inconclusive"

# below this |limit| the diagonal restriction counts as differentiable
LIMIT_ZERO = 1e-3
MIN_ALEP_DEPTH = 12
# stencils on reconstructions span at least this many rung gaps
ALEP_RUNG_STEPS = 16


@dataclass(frozen=True)
class DiagonalPoint:
    b: float

    def __post_init__(self):
        if not self.b > 0:
            raise DomainError("Diagonal scale must be positive.")

    def point(self, dim):
        return np.full(dim, float(self.b))

    def check(self, domain):
        return domain.check(self.point(domain.dim), "Diagonal point")


def diagonal_span(domain):
    """Scales c for which c*e lies in the box."""
    lo, hi = float(np.max(domain.lower)), float(np.min(domain.upper))
    if not lo < hi:
        raise RangeError("The box does not meet the main diagonal.")
    return lo, hi


def step_tolerance(a, tol=None, tol_t=None):
    """Solver tolerance at step a: tol when given, else tol_t capped at a*1e-4."""
    if tol is not None:
        return float(tol)
    return min(config.TOL_T if tol_t is None else float(tol_t), a * 1e-4)


def solve_f(oracle, a, b, tol=None, tol_t=None):
    """
    f(a,b): the diagonal scale whose point is the equal-intensity midpoint of
    (b-a)e and (b+a)e.
    """
    a, b = float(a), float(b)
    if not 0 < a < b:
        raise DomainError("solve_f needs 0 < a < b, got a={} b={}.".format(a, b))
    tol = step_tolerance(a, tol, tol_t)
    domain = oracle.domain
    x = DiagonalPoint(b - a).check(domain)
    z = DiagonalPoint(b + a).check(domain)
    y = solve_midpoint(oracle, x, z, tol / (2.0 * a))
    return float(np.mean(y))


@dataclass
class SmoothnessReport:
    b: float
    rows: List[dict]
    estimate: Optional[float]
    uncertainty: Optional[float]
    verdict: str
    bound_violations: List[dict] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)

    @property
    def line_smooth(self):
        return self.verdict == LINE_SMOOTH

    def to_dict(self):
        return {
            'b': self.b,
            'rows': self.rows,
            'estimate': self.estimate,
            'uncertainty': self.uncertainty,
            'verdict': self.verdict,
            'bound_violations': self.bound_violations,
            'notes': list(self.notes),
        }

    def csv_rows(self):
        return [[r['a'], r['f'], r['quotient']] for r in self.rows]


def default_schedule(b):
    return [b * 2.0 ** -k for k in range(4, 17)]


def _richardson(rows):
    """First-order extrapolation to a=0 over consecutive pairs of the given rows."""
    out = []
    for r1, r2 in zip(rows, rows[1:]):
        ratio = r1['a'] / r2['a']
        out.append((ratio * r2['quotient'] - r1['quotient']) / (ratio - 1.0))
    return out


def line_smoothness_limit(oracle, b=1.0, schedule=None, tol=None, fit_points=4, tol_t=None):
    """
    Tabulate (b - f(a,b))/a along a shrinking schedule and extrapolate the
    limit from the last fit_points entries.

    The verdict is not-line-smooth only when the limit sits more than three
    uncertainties away from zero, line-smooth when it is within LIMIT_ZERO,
    and inconclusive otherwise or when a solve fails.
    """
    b = float(b)
    schedule = default_schedule(b) if schedule is None else [float(a) for a in schedule]
    if not schedule or any(a <= 0 for a in schedule) or any(
            a2 >= a1 for a1, a2 in zip(schedule, schedule[1:])):
        raise DomainError("Schedule must be a decreasing sequence of positive steps.")
    if schedule[0] >= b:
        raise DomainError("Every step a must be below b={:g}.".format(b))
    DiagonalPoint(b - schedule[0]).check(oracle.domain)
    DiagonalPoint(b + schedule[0]).check(oracle.domain)
    lo, hi = diagonal_span(oracle.domain)
    band = oracle.eps_rel * (hi - lo)
    rows, notes, violations = [], [], []
    for a in schedule:
        try:
            f = solve_f(oracle, a, b, tol, tol_t)
        except AltError as e:
            notes.append("solve failed at a={:.6g}: {}".format(a, e))
            logger.warning("f(a,b) failed at a={:.6g}: {}".format(a, e))
            break
        noise = (step_tolerance(a, tol, tol_t) + band) / a
        q = (b - f) / a
        rows.append({'a': a, 'f': f, 'quotient': q, 'noise': noise})
        if q < -noise or q > 1.0 + noise:
            violations.append({'a': a, 'quotient': q})
    if len(rows) < fit_points or notes:
        notes.append("too few solved steps to extrapolate")
        return SmoothnessReport(b, rows, None, None, INCONCLUSIVE, violations, notes)
    tail = rows[-fit_points:]
    fitted = _richardson(tail)
    estimate = float(np.mean(fitted))
    uncertainty = 0.5 * float(np.ptp(fitted)) + tail[-1]['noise']
    if abs(estimate) > 3.0 * uncertainty and abs(estimate) > LIMIT_ZERO:
        verdict = NOT_LINE_SMOOTH
    elif abs(estimate) <= LIMIT_ZERO:
        verdict = LINE_SMOOTH
    else:
        verdict = INCONCLUSIVE
        notes.append("solver tolerance exceeds the signal at the smallest steps")
    logger.info("Line smoothness at b={:g}: limit {:.6g} +/- {:.2g}, {}".format(
        b, estimate, uncertainty, verdict))
    return SmoothnessReport(b, rows, estimate, uncertainty, verdict, violations, notes)


def calibrate(oracle, x, tol=1e-10):
    """a(x): the diagonal scale c with x indifferent to c*e."""
    domain = oracle.domain
    x = domain.check(x)
    lo, hi = diagonal_span(domain)
    seg = Segment(np.full(domain.dim, lo), np.full(domain.dim, hi))
    side = indifference(oracle, x)
    try:
        t = crossing_param(seg, side, tol / (hi - lo))
    except BracketError:
        raise RangeError("{} is not bracketed by the diagonal of the box.".format(x.tolist()))
    return lo + t * (hi - lo)


@dataclass
class DebreuReport:
    passed: bool
    samples: int
    failures: int
    witnesses: List[dict] = field(default_factory=list)
    proxy: bool = True
    params: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            'verdict': "pass" if self.passed else "fail",
            'samples': self.samples,
            'failures': self.failures,
            'witnesses': self.witnesses,
            'proxy': self.proxy,
            'params': dict(self.params),
        }


def debreu_smoothness_proxy(oracle, sampler=None, trials=200, h=1e-4, rtol=0.05, seed=0,
                            workers=None, max_witnesses=None, tol=1e-10):
    """
    C^1 proxy on the calibration function a(x). At each sampled point and
    coordinate, central differences at h and h/2 must agree and the forward
    and backward differences must agree, both within rtol of the slope.
    Steps are h times the box extent. Kinks off the sample set go unseen.
    """
    trials = require_trials(trials)
    max_witnesses = config.MAX_WITNESSES if max_witnesses is None else max_witnesses
    domain = oracle.domain
    lo, hi = diagonal_span(domain)
    sampler = sampler or mixed_sampler(uniform_sampler(domain), diagonal_sampler(domain))
    steps = h * domain.extent
    atol = 1e-6 * (hi - lo) / float(np.max(domain.extent))

    def _a(p):
        return calibrate(oracle, p, tol)

    def _trial(rng):
        x = draw(sampler, rng, domain, 1)[0]
        if np.any(x - 2 * steps < domain.lower) or np.any(x + 2 * steps > domain.upper):
            return None
        ax = _a(x)
        for i in range(domain.dim):
            e = np.zeros(domain.dim)
            e[i] = steps[i]
            up, down = _a(x + e), _a(x - e)
            up2, down2 = _a(x + 0.5 * e), _a(x - 0.5 * e)
            central = (up - down) / (2 * steps[i])
            central2 = (up2 - down2) / steps[i]
            forward = (up - ax) / steps[i]
            backward = (ax - down) / steps[i]
            scale = max(abs(central), atol)
            if abs(central - central2) > rtol * scale or abs(forward - backward) > rtol * scale:
                return [{
                    'point': x.tolist(), 'coordinate': i,
                    'central_h': central, 'central_h2': central2,
                    'forward': forward, 'backward': backward,
                }]
        return []
    results = run_trials(_trial, trials, seed, workers)
    tested = [r for r in results if r is not None]
    failed = [w for r in tested for w in r]
    report = DebreuReport(not failed, len(tested), len(failed), failed[:max_witnesses],
                          params={'h': h, 'rtol': rtol, 'seed': seed})
    logger.info("Debreu smoothness proxy on {}: {} ({:d} of {:d} samples kinked)".format(
        oracle.name, "pass" if report.passed else "fail", report.failures, report.samples))
    return report


def _domain_of(u, domain):
    return domain if domain is not None else getattr(u, 'domain', None)


def _check_margin(x, reach, domain):
    if domain is None:
        return
    if np.any(x - reach < domain.lower) or np.any(x + reach > domain.upper):
        raise DomainError("Point {} is closer than {:g} to the box edge.".format(x.tolist(), reach))


def numeric_gradient(u, x, h=1e-5, domain=None):
    x = np.asarray(x, dtype=float)
    _check_margin(x, 2 * h, _domain_of(u, domain))
    grad = np.empty(x.size)
    for i in range(x.size):
        e = np.zeros(x.size)
        e[i] = h
        grad[i] = (u(x + e) - u(x - e)) / (2 * h)
    return grad


def _cross(u, x, i, j, hi, hj):
    ei = np.zeros(x.size)
    ej = np.zeros(x.size)
    ei[i] = hi
    ej[j] = hj
    return (u(x + ei + ej) - u(x + ei - ej) - u(x - ei + ej) + u(x - ei - ej)) / (4 * hi * hj)


def numeric_hessian(u, x, h=1e-3, domain=None):
    x = np.asarray(x, dtype=float)
    _check_margin(x, 2 * h, _domain_of(u, domain))
    n = x.size
    hess = np.empty((n, n))
    ux = u(x)
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        hess[i, i] = (u(x + e) - 2 * ux + u(x - e)) / h ** 2
        for j in range(i + 1, n):
            hess[i, j] = hess[j, i] = _cross(u, x, i, j, h, h)
    return hess


@dataclass
class AlepClassification:
    point: List[float]
    pair: Tuple[int, int]
    estimate: float
    estimate_ij: float
    estimate_ji: float
    label: str
    h: float

    def to_dict(self):
        return {
            'point': self.point,
            'pair': list(self.pair),
            'estimate': self.estimate,
            'estimate_ij': self.estimate_ij,
            'estimate_ji': self.estimate_ji,
            'label': self.label,
            'h': self.h,
        }


def alep_classify(u, points, pair=(0, 1), h=1e-3, threshold=1e-4, domain=None, sym_rtol=0.1):
    """
    Sign of the cross second partial: below -threshold substitutes, above
    threshold complements, neutral in between. The two rectangular stencils
    (h, h/2) and (h/2, h) must agree or the point is indeterminate.

    On a reconstruction h is raised to ALEP_RUNG_STEPS rung gaps so the
    stencil averages over the interpolation kinks.
    """
    i, j = int(pair[0]), int(pair[1])
    if i == j:
        raise DomainError("ALEP needs two distinct commodities.")
    h = float(h)
    if isinstance(u, ReconstructedUtility):
        if u.depth < MIN_ALEP_DEPTH:
            raise DomainError("Reconstructions need depth >= {:d} for second derivatives.".format(
                MIN_ALEP_DEPTH))
        floor = ALEP_RUNG_STEPS * u.rung_spacing
        if h < floor:
            logger.info("ALEP step raised from {:g} to {:g} ({:d} rung gaps)".format(
                h, floor, ALEP_RUNG_STEPS))
            h = floor
    domain = _domain_of(u, domain)
    out = []
    for p in points:
        x = np.asarray(p, dtype=float)
        _check_margin(x, 2 * h, domain)
        e_ij = _cross(u, x, i, j, h, 0.5 * h)
        e_ji = _cross(u, x, i, j, 0.5 * h, h)
        estimate = 0.5 * (e_ij + e_ji)
        if abs(e_ij - e_ji) > max(threshold, sym_rtol * abs(estimate)):
            label = "indeterminate"
        elif estimate < -threshold:
            label = "substitute"
        elif estimate > threshold:
            label = "complement"
        else:
            label = "neutral"
        out.append(AlepClassification(x.tolist(), (i, j), float(estimate), float(e_ij),
                                      float(e_ji), label, h))
    return out


def interior_grid(domain, per_axis=5, inset=0.1):
    """Regular grid over the box shrunk by inset times the extent on every side."""
    lo = domain.lower + inset * domain.extent
    hi = domain.upper - inset * domain.extent
    axes = np.meshgrid(*[np.linspace(a, b, per_axis) for a, b in zip(lo, hi)], indexing='ij')
    return np.stack([ax.ravel() for ax in axes], axis=1)


def diagonal_restriction(recon):
    """g(b) = û(b e)."""
    dim = recon.domain.dim

    def _g(b):
        return recon(np.full(dim, float(b)))
    return _g
