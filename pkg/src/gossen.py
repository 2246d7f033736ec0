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

Concavity through intensities: the gain from x to the midpoint of x and y
must be at least the gain from the midpoint to y.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

import config
from core import DomainError, IntensityOrder, draw, require_trials, run_trials, uniform_sampler
from construct import Segment, reconstruct
from oracle_zoo import make_difference_oracle

logger = logging.getLogger(__name__)

HOLDS = "holds"
HOLDS_STRICTLY = "holds-strictly"
FAILS = "fails"


@dataclass
class ConcavityVerdict:
    law: str
    samples: int
    violation_count: int = 0
    witnesses: List[dict] = field(default_factory=list)
    strict_samples: int = 0
    strict_misses: int = 0
    dyadic_depth: Optional[int] = None
    params: Dict[str, object] = field(default_factory=dict)

    @property
    def holds(self):
        return self.law != FAILS

    def to_dict(self):
        return {
            'law': self.law,
            'samples': self.samples,
            'violation_count': self.violation_count,
            'witnesses': self.witnesses,
            'strict_samples': self.strict_samples,
            'strict_misses': self.strict_misses,
            'dyadic_depth': self.dyadic_depth,
            'params': dict(self.params),
        }


def strictness_floor(oracle):
    """Pairs closer than this are too short for their margin to clear the equality band."""
    diag = oracle.domain.diameter
    return diag * max(1e-6, 3.0 * np.sqrt(oracle.eps_rel))


def _verdict(results, strict, max_witnesses, params, dyadic_depth=None):
    v = ConcavityVerdict(law=HOLDS, samples=0, dyadic_depth=dyadic_depth, params=params)
    for found, eligible, is_strict in results:
        v.samples += 1
        v.violation_count += len(found)
        for w in found:
            if len(v.witnesses) < max_witnesses:
                v.witnesses.append(w)
        if eligible:
            v.strict_samples += 1
            if not is_strict:
                v.strict_misses += 1
    if v.violation_count:
        v.law = FAILS
    elif strict and v.strict_samples and not v.strict_misses:
        v.law = HOLDS_STRICTLY
    return v


def _ggfl_witness(x, y, z, out):
    return {
        'points': [np.asarray(p, dtype=float).tolist() for p in (x, y, z)],
        'oracle_outputs': [out.name],
    }


def check_ggfl(oracle, sampler=None, trials=None, seed=0, strict=False, parameterization="pairs",
               workers=None, max_witnesses=None):
    """
    [z,x] >= [y,z] for z=(x+y)/2 on sampled pairs.

    parameterization "increments" samples x and v with x+2v in the box and
    tests [x+v,x] >= [x+2v,x+v] instead. With strict, the law holds strictly
    when every pair longer than strictness_floor() compares GREATER.
    """
    trials = require_trials(config.TRIALS if trials is None else trials)
    max_witnesses = config.MAX_WITNESSES if max_witnesses is None else max_witnesses
    if parameterization not in ("pairs", "increments"):
        raise DomainError("Unknown parameterization {}.".format(parameterization))
    domain = oracle.domain
    sampler = sampler or uniform_sampler(domain)
    floor = strictness_floor(oracle)

    def _trial(rng):
        if parameterization == "pairs":
            x, y = draw(sampler, rng, domain, 2)
        else:
            x = draw(sampler, rng, domain, 1)[0]
            v = rng.uniform(0.5 * (domain.lower - x), 0.5 * (domain.upper - x))
            y = x + 2.0 * v
            if not domain.contains(y):
                return [], False, False
        z = 0.5 * (x + y)
        out = oracle.compare(z, x, y, z)
        found = [_ggfl_witness(x, y, z, out)] if out is IntensityOrder.LESS else []
        eligible = float(np.linalg.norm(x - y)) > floor
        return found, eligible, out is IntensityOrder.GREATER
    results = run_trials(_trial, trials, seed, workers)
    verdict = _verdict(results, strict, max_witnesses,
                       {'parameterization': parameterization, 'strict': strict, 'floor': floor,
                        'seed': seed})
    logger.info("GGFL on {}: {} ({:d} samples)".format(oracle.name, verdict.law, verdict.samples))
    return verdict


def check_midpoint_concavity(u_hat, sampler=None, trials=None, tol=0.0, seed=0, domain=None,
                             dyadic_depth=None, workers=None, max_witnesses=None, full=False):
    """
    u((x+y)/2) >= (u(x)+u(y))/2 - tol on sampled pairs. With dyadic_depth l
    every t = m/2^l on the chord is tested as well; full without a depth
    sweeps to config.DYADIC_DEPTH.
    """
    trials = require_trials(config.TRIALS if trials is None else trials)
    max_witnesses = config.MAX_WITNESSES if max_witnesses is None else max_witnesses
    domain = domain or getattr(u_hat, 'domain', None)
    if domain is None:
        raise DomainError("A domain is needed to sample the function.")
    sampler = sampler or uniform_sampler(domain)
    if full and dyadic_depth is None:
        dyadic_depth = config.DYADIC_DEPTH
    if dyadic_depth is None:
        ts = np.array([0.5])
    else:
        ts = np.arange(1, 2 ** int(dyadic_depth)) / float(2 ** int(dyadic_depth))

    def _trial(rng):
        x, y = draw(sampler, rng, domain, 2)
        ux, uy = u_hat(x), u_hat(y)
        found = []
        for t in ts:
            z = (1.0 - t) * x + t * y
            gap = u_hat(z) - ((1.0 - t) * ux + t * uy)
            if gap < -tol:
                found.append({
                    'points': [x.tolist(), y.tolist(), z.tolist()],
                    't': float(t),
                    'gap': float(gap),
                })
                break
        return found, False, False
    results = run_trials(_trial, trials, seed, workers)
    verdict = _verdict(results, False, max_witnesses, {'tol': tol, 'seed': seed}, dyadic_depth)
    logger.info("Midpoint concavity: {} ({:d} samples)".format(verdict.law, verdict.samples))
    return verdict


_EXPECTED = {
    'affine': (HOLDS,),
    'concave': (HOLDS, HOLDS_STRICTLY),
    'strictly-concave': (HOLDS_STRICTLY,),
    'non-concave': (FAILS,),
}


@dataclass
class RoundtripReport:
    name: str
    tag: str
    ggfl: ConcavityVerdict
    midpoint: ConcavityVerdict
    agree: bool
    diffs: List[str] = field(default_factory=list)

    def to_dict(self):
        return {
            'name': self.name,
            'tag': self.tag,
            'ggfl': self.ggfl.to_dict(),
            'midpoint': self.midpoint.to_dict(),
            'agree': self.agree,
            'diffs': list(self.diffs),
        }


def theorem2_roundtrip(spec, domain=None, trials=None, seed=0, depth=None, eps_eq=None, workers=None,
                       full=False, dyadic_depth=None):
    """
    GGFL on the difference oracle and midpoint concavity of the utility
    rebuilt from that oracle, both held against the catalog tag. An affine
    tag also requires the strictness classifier to stay at holds.
    """
    if spec.concavity not in _EXPECTED:
        raise DomainError("{} has no concavity tag to check against.".format(spec.name))
    trials = config.TRIALS if trials is None else trials
    oracle = make_difference_oracle(spec, domain, eps_eq)
    ggfl = check_ggfl(oracle, trials=trials, seed=seed, strict=True, workers=workers)
    segment = Segment(*spec.reference) if spec.reference is not None else None
    recon = reconstruct(oracle, depth=depth, segment=segment)
    midpoint = check_midpoint_concavity(recon, trials=trials, tol=2.0 * recon.budget, seed=seed,
                                        workers=workers, full=full, dyadic_depth=dyadic_depth)
    expected = _EXPECTED[spec.concavity]
    diffs = []
    if ggfl.law not in expected:
        diffs.append("GGFL verdict {} but tag {} expects {}".format(
            ggfl.law, spec.concavity, " or ".join(expected)))
    if midpoint.holds != (spec.concavity != 'non-concave'):
        diffs.append("reconstruction midpoint verdict {} disagrees with tag {}".format(
            midpoint.law, spec.concavity))
    if ggfl.holds != midpoint.holds:
        diffs.append("GGFL ({}) and reconstruction ({}) disagree".format(ggfl.law, midpoint.law))
    report = RoundtripReport(spec.name, spec.concavity, ggfl, midpoint, not diffs, diffs)
    if diffs:
        logger.warning("Round trip for {} disagrees: {}".format(spec.name, "; ".join(diffs)))
    return report
