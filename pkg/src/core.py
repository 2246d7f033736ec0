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

Alt systems over box domains: the quaternary comparison [x,y] vs [z,w], the
weak order it induces through (x,y,y,y), and randomized checkers for the
axioms a continuous cardinal representation needs.
"""
import enum
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

import config
from util import sub_rng

logger = logging.getLogger(__name__)


class AltError(RuntimeError):
    pass


class DomainError(AltError, ValueError):
    """Rejected input: outside the domain, wrong dimension or a bad precondition value."""
    pass


class RangeError(DomainError):
    pass


class BracketError(AltError):
    pass


class OrderingError(AltError):
    pass


class ConstructionError(AltError):
    pass


class ArchimedeanError(AltError):
    pass


class MonotonicityError(AltError):
    pass


class DegenerateFitError(AltError):
    pass


def as_point(coords, dim=None):
    """
    Copy coords into a flat float vector and validate it.
    :param coords: scalar or sequence of reals
    :param dim: expected dimension, or None
    :return: numpy.ndarray
    """
    p = np.array(coords, dtype=float).reshape(-1)
    if p.size < 1:
        raise DomainError("A point needs at least one coordinate.")
    if dim is not None and p.size != dim:
        raise DomainError("Point has {:d} coordinates, expected {:d}.".format(p.size, dim))
    if not np.all(np.isfinite(p)):
        raise DomainError("Point coordinates must be finite.")
    return p


@dataclass(frozen=True, eq=False)
class BoxDomain:
    """Product of intervals. Faces flagged open exclude their boundary (truncations of R^n_++)."""
    lower: np.ndarray
    upper: np.ndarray
    lower_open: Optional[tuple] = None
    upper_open: Optional[tuple] = None

    def __post_init__(self):
        lower = as_point(self.lower)
        upper = as_point(self.upper, lower.size)
        if not np.all(lower < upper):
            raise DomainError("Box lower corner must be strictly below the upper corner.")
        n = lower.size
        lower_open = tuple(bool(b) for b in (self.lower_open or (False,) * n))
        upper_open = tuple(bool(b) for b in (self.upper_open or (False,) * n))
        if len(lower_open) != n or len(upper_open) != n:
            raise DomainError("One openness flag per face is required.")
        object.__setattr__(self, 'lower', lower)
        object.__setattr__(self, 'upper', upper)
        object.__setattr__(self, 'lower_open', lower_open)
        object.__setattr__(self, 'upper_open', upper_open)

    @classmethod
    def cube(cls, dim, lo, hi, open_lower=False):
        return cls(np.full(dim, float(lo)), np.full(dim, float(hi)),
                   lower_open=(open_lower,) * dim)

    @classmethod
    def from_dict(cls, doc):
        return cls(doc['lower'], doc['upper'], lower_open=doc.get('lower_open'),
                   upper_open=doc.get('upper_open'))

    @property
    def dim(self):
        return self.lower.size

    @property
    def extent(self):
        return self.upper - self.lower

    @property
    def diameter(self):
        return float(np.linalg.norm(self.extent))

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != self.lower.shape or not np.all(np.isfinite(x)):
            return False
        above = np.where(self.lower_open, x > self.lower, x >= self.lower)
        below = np.where(self.upper_open, x < self.upper, x <= self.upper)
        return bool(np.all(above) and np.all(below))

    def check(self, x, what="Point"):
        p = as_point(x, self.dim)
        if not self.contains(p):
            raise DomainError("{} {} is outside the domain.".format(what, p.tolist()))
        return p

    def margin(self, x):
        """Distance from x to the nearest face."""
        x = np.asarray(x, dtype=float)
        return float(min(np.min(x - self.lower), np.min(self.upper - x)))

    def clip(self, x):
        return np.clip(x, self.lower, self.upper)

    def sample(self, rng):
        x = rng.uniform(self.lower, self.upper)
        # an open face must never be hit, uniform() may return its low end
        return np.where(np.asarray(self.lower_open) & (x <= self.lower),
                        np.nextafter(self.lower, self.upper), x)

    def to_dict(self):
        return {
            'lower': self.lower.tolist(),
            'upper': self.upper.tolist(),
            'lower_open': list(self.lower_open),
            'upper_open': list(self.upper_open),
        }


class IntensityOrder(enum.IntEnum):
    LESS = -1
    EQUAL = 0
    GREATER = 1

    def swapped(self):
        return IntensityOrder(-int(self))

    @classmethod
    def classify(cls, margin, eps):
        if abs(margin) <= eps:
            return cls.EQUAL
        return cls.GREATER if margin > 0 else cls.LESS


class Preference(enum.IntEnum):
    DISPREFER = -1
    INDIFFERENT = 0
    PREFER = 1


class _CallCounter(object):
    __slots__ = ("_count", "_lock")

    def __init__(self):
        self._count = 0
        self._lock = threading.Lock()

    def increment(self):
        with self._lock:
            self._count += 1

    def reset(self):
        with self._lock:
            self._count = 0

    @property
    def value(self):
        return self._count


class AltOracle(object):
    """
    Black-box Alt system on a box. compare(x, y, z, w) tells whether the
    improvement from y to x is stronger than (GREATER), as strong as (EQUAL)
    or weaker than (LESS) the improvement from w to z.

    The comparator is built from a signed intensity margin; margins within
    eps_eq of zero are EQUAL. scale is the utility range estimate eps_eq was
    derived from.
    """

    def __init__(self, domain, margin, eps_eq, name=None, scale=1.0, counter=None):
        eps_eq = float(eps_eq)
        if not eps_eq > 0:
            raise DomainError("Equality tolerance must be positive.")
        self.domain = domain
        self.dim = domain.dim
        self.name = name or "anonymous"
        self.eps_eq = eps_eq
        self.scale = float(scale) if scale and scale > 0 else 1.0
        self._margin = margin
        self._counter = counter or _CallCounter()

    def compare(self, x, y, z, w):
        self._counter.increment()
        m = self._margin(x, y, z, w)
        if m != m:
            raise DomainError("Oracle {} is undefined at {}.".format(
                self.name, [np.asarray(p).tolist() for p in (x, y, z, w)]))
        return IntensityOrder.classify(m, self.eps_eq)

    __call__ = compare

    @property
    def calls(self):
        return self._counter.value

    def reset_calls(self):
        self._counter.reset()

    @property
    def eps_rel(self):
        return self.eps_eq / self.scale

    def relaxed(self, factor):
        """Same system with a wider equality band. Shares the call counter."""
        return AltOracle(self.domain, self._margin, self.eps_eq * float(factor),
                         name=self.name, scale=self.scale, counter=self._counter)

    def describe(self):
        return {
            'name': self.name,
            'dimension': self.dim,
            'eps_eq': self.eps_eq,
            'scale': self.scale,
            'domain': self.domain.to_dict(),
        }


class PreferenceOrder(object):
    """x vs y read off the quadruple (x, y, y, y)."""

    def __init__(self, oracle):
        self.oracle = oracle

    def __call__(self, x, y):
        return Preference(int(self.oracle.compare(x, y, y, y)))

    def weakly_prefers(self, x, y):
        return self(x, y) is not Preference.DISPREFER


def derive_preference(oracle):
    return PreferenceOrder(oracle)


@dataclass
class AxiomReport:
    axiom: str
    trials: int
    seed: int
    samples: int = 0
    violations: List[dict] = field(default_factory=list)
    violation_count: int = 0
    proxy: bool = False
    notes: List[str] = field(default_factory=list)
    params: Dict[str, object] = field(default_factory=dict)

    @property
    def verdict(self):
        return "fail" if self.violation_count else "pass"

    @property
    def passed(self):
        return self.violation_count == 0

    def to_dict(self):
        return {
            'axiom': self.axiom,
            'trials': self.trials,
            'seed': self.seed,
            'verdict': self.verdict,
            'samples': self.samples,
            'violation_count': self.violation_count,
            'violations': self.violations,
            'proxy': self.proxy,
            'notes': list(self.notes),
            'params': dict(self.params),
        }


# Samplers take a numpy Generator and return one point.
Sampler = Callable[[np.random.Generator], np.ndarray]


def uniform_sampler(domain):
    def _sample(rng):
        return domain.sample(rng)
    return _sample


def grid_sampler(domain, values):
    """Each coordinate drawn from a fixed list, for exhaustive-style scans on small grids."""
    values = np.asarray(values, dtype=float)

    def _sample(rng):
        return values[rng.integers(0, values.size, size=domain.dim)]
    return _sample


def diagonal_sampler(domain):
    """Points c*e on the main diagonal, c uniform over the scales the box admits."""
    lo = float(np.max(domain.lower))
    hi = float(np.min(domain.upper))
    if not lo < hi:
        raise DomainError("The box does not meet the main diagonal.")

    def _sample(rng):
        return np.full(domain.dim, rng.uniform(lo, hi))
    return _sample


def mixed_sampler(*samplers):
    def _sample(rng):
        return samplers[int(rng.integers(0, len(samplers)))](rng)
    return _sample


def draw(sampler, rng, domain, count):
    points = []
    for _ in range(count):
        p = np.asarray(sampler(rng), dtype=float)
        if not domain.contains(p):
            raise DomainError("Sampler produced {} outside the domain.".format(p.tolist()))
        points.append(p)
    return points


def run_trials(trial, trials, seed, workers=None):
    """
    Run trial(rng) for every index with its own (seed, index) generator.
    Result order follows the index, so reports do not depend on the worker count.
    """
    workers = config.WORKERS if workers is None else workers

    def _one(i):
        return trial(sub_rng(seed, i))
    if workers <= 1 or trials < 2:
        return [_one(i) for i in range(trials)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_one, range(trials)))


def witness(case, points, outputs):
    return {
        'case': case,
        'points': [np.asarray(p, dtype=float).tolist() for p in points],
        'oracle_outputs': [o.name if isinstance(o, enum.Enum) else o for o in outputs],
    }


def collect_report(axiom, results, trials, seed, max_witnesses=None, proxy=False, params=None):
    """results holds one entry per trial: None when nothing was tested, else a list of witnesses."""
    max_witnesses = config.MAX_WITNESSES if max_witnesses is None else max_witnesses
    report = AxiomReport(axiom=axiom, trials=trials, seed=seed, proxy=proxy, params=dict(params or {}))
    for r in results:
        if r is None:
            continue
        report.samples += 1
        report.violation_count += len(r)
        for w in r:
            if len(report.violations) < max_witnesses:
                report.violations.append(w)
    if report.samples == 0:
        report.notes.append("no testable samples were drawn")
    if report.passed:
        logger.info("{}: pass ({:d} samples)".format(axiom, report.samples))
    else:
        logger.warning("{}: fail ({:d} violations in {:d} samples)".format(
            axiom, report.violation_count, report.samples))
    return report


def require_trials(trials):
    if int(trials) < 1:
        raise DomainError("trials must be at least 1.")
    return int(trials)


# Axiom predicates. Each returns the oracle outputs when the points violate the axiom, else None.

def consistency_violation(oracle, x, y, z):
    pref = oracle.compare(x, y, y, y)
    side = oracle.compare(x, z, y, z)
    if (pref is not IntensityOrder.LESS) != (side is not IntensityOrder.LESS):
        return [pref, side]
    return None


def second_consistency_violation(oracle, x, y, z):
    pref = oracle.compare(x, y, y, y)
    side = oracle.compare(z, y, z, x)
    if (pref is not IntensityOrder.LESS) != (side is not IntensityOrder.LESS):
        return [pref, side]
    return None


def crossover_violation(oracle, x, y, z, w):
    straight = oracle.compare(x, y, z, w)
    crossed = oracle.compare(x, z, y, w)
    if (straight is IntensityOrder.EQUAL) != (crossed is IntensityOrder.EQUAL):
        return [straight, crossed]
    return None


def monotonicity_violation(oracle, x, y):
    if not np.all(x > y):
        return None
    pref = oracle.compare(x, y, y, y)
    if pref is not IntensityOrder.GREATER:
        return [pref]
    return None


# relaxation applied when telling a jump from a tolerance-band crossing
JUMP_RELAXATION = 1e3
JUMP_GAP = 1e-12


def continuity_violation(oracle, *points):
    """
    points are two quadruples (8 points) an infinitesimal step apart.
    A continuous intensity cannot change outcome across them once the
    equality band is widened, so a change there is a jump.
    """
    near, far = points[:4], points[4:]
    gap = max(float(np.max(np.abs(np.asarray(a) - np.asarray(b)))) for a, b in zip(near, far))
    scale = max(oracle.domain.diameter, 1.0)
    if gap > JUMP_GAP * scale * 4.0:
        return None
    wide = oracle.relaxed(JUMP_RELAXATION)
    a = wide.compare(*near)
    b = wide.compare(*far)
    if a is not b:
        return [a, b]
    return None


def weak_order_violation(oracle, *points):
    """Two points test completeness, three test transitivity."""
    pref = derive_preference(oracle)
    if len(points) == 2:
        x, y = points
        if not (pref.weakly_prefers(x, y) or pref.weakly_prefers(y, x)):
            return [pref(x, y), pref(y, x)]
        return None
    x, y, z = points
    if pref.weakly_prefers(x, y) and pref.weakly_prefers(y, z) and not pref.weakly_prefers(x, z):
        return [pref(x, y), pref(y, z), pref(x, z)]
    return None


PREDICATES = {
    'consistency': consistency_violation,
    'second_consistency': second_consistency_violation,
    'crossover': crossover_violation,
    'monotonicity': monotonicity_violation,
    'continuity': continuity_violation,
    'weak_order': weak_order_violation,
}

# Report kinds checked against a ladder or reconstruction. construct registers
# predicate(oracle, recon, params, *points) here.
RECONSTRUCTION_PREDICATES = {}


def replay_witnesses(report, oracle, recon=None):
    """
    Re-evaluate every stored witness; True where it still is a violation.
    Ladder and reconstruction reports need the reconstruction they were
    checked against.
    """
    if report.axiom in PREDICATES:
        predicate = PREDICATES[report.axiom]

        def _replay(points):
            return predicate(oracle, *points)
    elif report.axiom in RECONSTRUCTION_PREDICATES:
        if recon is None:
            raise DomainError("Replaying {} witnesses needs the reconstruction they were checked "
                              "against.".format(report.axiom))
        predicate = RECONSTRUCTION_PREDICATES[report.axiom]

        def _replay(points):
            return predicate(oracle, recon, report.params, *points)
    else:
        raise DomainError("No replay predicate for {} reports.".format(report.axiom))
    out = []
    for w in report.violations:
        points = [np.asarray(p, dtype=float) for p in w['points']]
        out.append(_replay(points) is not None)
    return out


def check_consistency(oracle, sampler, trials, seed=0, workers=None, max_witnesses=None):
    trials = require_trials(trials)
    domain = oracle.domain

    def _trial(rng):
        x, y, z = draw(sampler, rng, domain, 3)
        found = []
        for a, b in ((x, y), (y, x)):
            out = consistency_violation(oracle, a, b, z)
            if out is not None:
                found.append(witness('consistency', (a, b, z), out))
        return found
    results = run_trials(_trial, trials, seed, workers)
    return collect_report('consistency', results, trials, seed, max_witnesses)


def check_second_consistency(oracle, sampler, trials, seed=0, workers=None, max_witnesses=None):
    trials = require_trials(trials)
    domain = oracle.domain

    def _trial(rng):
        x, y, z = draw(sampler, rng, domain, 3)
        found = []
        for a, b in ((x, y), (y, x)):
            out = second_consistency_violation(oracle, a, b, z)
            if out is not None:
                found.append(witness('second_consistency', (a, b, z), out))
        return found
    results = run_trials(_trial, trials, seed, workers)
    return collect_report('second_consistency', results, trials, seed, max_witnesses)


def _solve_partner(oracle, side, tol_t):
    """w on the main diagonal where side(w) is EQUAL; None if unbracketed."""
    from construct import Segment, crossing_param
    domain = oracle.domain
    seg = Segment(domain.lower, domain.upper)
    try:
        t = crossing_param(seg, side, tol_t)
    except BracketError:
        return None
    return seg.at(t)


def check_crossover(oracle, sampler, trials, seed=0, workers=None, max_witnesses=None, tol_t=1e-14):
    """
    Equal quadruples are manufactured: given x, y, z the partner w is solved for
    so that [x,y]=[z,w] (forward case) or [x,z]=[y,w] (converse case).
    Each trial also tests the null quadruple (x, x, y, y).
    """
    trials = require_trials(trials)
    domain = oracle.domain
    matched = {'forward': 0, 'converse': 0}
    lock = threading.Lock()

    def _trial(rng):
        x, y, z = draw(sampler, rng, domain, 3)
        found = []
        out = crossover_violation(oracle, x, x, y, y)
        if out is not None:
            found.append(witness('null', (x, x, y, y), out))
        # [x,y] vs [z,w] rises as w improves
        w = _solve_partner(oracle, lambda p: oracle.compare(x, y, z, p), tol_t)
        if w is not None and oracle.compare(x, y, z, w) is IntensityOrder.EQUAL:
            with lock:
                matched['forward'] += 1
            out = crossover_violation(oracle, x, y, z, w)
            if out is not None:
                found.append(witness('forward', (x, y, z, w), out))
        w = _solve_partner(oracle, lambda p: oracle.compare(x, z, y, p), tol_t)
        if w is not None and oracle.compare(x, z, y, w) is IntensityOrder.EQUAL:
            with lock:
                matched['converse'] += 1
            out = crossover_violation(oracle, x, y, z, w)
            if out is not None:
                found.append(witness('converse', (x, y, z, w), out))
        return found
    results = run_trials(_trial, trials, seed, workers)
    report = collect_report('crossover', results, trials, seed, max_witnesses,
                            params={'matched_forward': matched['forward'],
                                    'matched_converse': matched['converse']})
    if matched['forward'] + matched['converse'] == 0:
        report.notes.append("sampling failure: no Equal quadruples could be manufactured")
        logger.warning("crossover: no Equal quadruples could be manufactured")
    return report


def _boundary_pair(oracle, near, far, start):
    """
    Bisect the straight path between two quadruples down to JUMP_GAP in path
    parameter, keeping the starting outcome at one end.
    """
    near = [np.asarray(p, dtype=float) for p in near]
    far = [np.asarray(p, dtype=float) for p in far]
    lo, hi = 0.0, 1.0

    def _at(s):
        return [(1.0 - s) * a + s * b for a, b in zip(near, far)]
    while hi - lo > JUMP_GAP:
        mid = 0.5 * (lo + hi)
        if oracle.compare(*_at(mid)) is start:
            lo = mid
        else:
            hi = mid
    return _at(lo), _at(hi)


def check_continuity_proxy(oracle, sampler, trials, delta, seed=0, workers=None,
                           max_witnesses=None, perturbations=4):
    """
    Perturbation-stability proxy for closedness of the system in X^4.

    For sampled quadruples with outcome GREATER, each point is moved by at
    most delta times the box extent. Whenever the outcome changes, the change
    is located by bisection and the two quadruples on either side must agree
    once the equality band is widened; otherwise the intensity jumps there.
    This is a necessary-condition proxy, not a proof of closedness.
    """
    trials = require_trials(trials)
    delta = float(delta)
    if not delta > 0:
        raise DomainError("Perturbation radius delta must be positive.")
    domain = oracle.domain
    radius = delta * domain.extent

    def _trial(rng):
        quad = draw(sampler, rng, domain, 4)
        if oracle.compare(*quad) is not IntensityOrder.GREATER:
            return None
        found = []
        for _ in range(perturbations):
            moved = [domain.clip(p + rng.uniform(-radius, radius)) for p in quad]
            if oracle.compare(*moved) is IntensityOrder.GREATER:
                continue
            a, b = _boundary_pair(oracle, quad, moved, IntensityOrder.GREATER)
            out = continuity_violation(oracle, *(a + b))
            if out is not None:
                found.append(witness('jump', a + b, out))
                break
        return found
    results = run_trials(_trial, trials, seed, workers)
    report = collect_report('continuity', results, trials, seed, max_witnesses, proxy=True,
                            params={'delta': delta, 'relaxation': JUMP_RELAXATION})
    report.notes.append("proxy: perturbation stability is necessary for closedness, not sufficient")
    return report


def check_monotonicity(oracle, sampler, trials, seed=0, workers=None, max_witnesses=None):
    trials = require_trials(trials)
    domain = oracle.domain

    def _trial(rng):
        a, b = draw(sampler, rng, domain, 2)
        hi, lo = np.maximum(a, b), np.minimum(a, b)
        if not np.all(hi > lo):
            return None
        out = monotonicity_violation(oracle, hi, lo)
        if out is not None:
            return [witness('dominance', (hi, lo), out)]
        return []
    results = run_trials(_trial, trials, seed, workers)
    return collect_report('monotonicity', results, trials, seed, max_witnesses)


def check_weak_order(oracle, sampler, trials, seed=0, workers=None, max_witnesses=None):
    """Completeness and transitivity of the derived preference on sampled triples."""
    trials = require_trials(trials)
    domain = oracle.domain

    def _trial(rng):
        x, y, z = draw(sampler, rng, domain, 3)
        found = []
        out = weak_order_violation(oracle, x, y)
        if out is not None:
            found.append(witness('completeness', (x, y), out))
        out = weak_order_violation(oracle, x, y, z)
        if out is not None:
            found.append(witness('transitivity', (x, y, z), out))
        return found
    results = run_trials(_trial, trials, seed, workers)
    return collect_report('weak_order', results, trials, seed, max_witnesses)


def check_axiom_suite(oracle, sampler, trials, delta=0.05, seed=0, workers=None, max_witnesses=None):
    """All checkers on one seed, in the order verify reports them."""
    return {
        'consistency': check_consistency(oracle, sampler, trials, seed, workers, max_witnesses),
        'crossover': check_crossover(oracle, sampler, trials, seed, workers, max_witnesses),
        'second_consistency': check_second_consistency(oracle, sampler, trials, seed, workers,
                                                       max_witnesses),
        'continuity': check_continuity_proxy(oracle, sampler, trials, delta, seed, workers,
                                             max_witnesses),
        'monotonicity': check_monotonicity(oracle, sampler, trials, seed, workers, max_witnesses),
    }
