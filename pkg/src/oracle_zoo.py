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
import itertools
import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from cachetools import cached

import config
from core import AltOracle, BoxDomain, DomainError, as_point

logger = logging.getLogger(__name__)

CONCAVITY_TAGS = ("affine", "concave", "strictly-concave", "non-concave", "unknown")


@dataclass(frozen=True, eq=False)
class UtilitySpec:
    name: str
    dimension: int
    evaluator: Callable
    gradient: Optional[Callable] = None
    hessian: Optional[Callable] = None
    concavity: str = "unknown"
    debreu: Optional[bool] = None
    line: Optional[bool] = None
    monotone: bool = True
    domain: Optional[BoxDomain] = None
    reference: Optional[tuple] = None
    description: str = ""

    def __post_init__(self):
        if self.concavity not in CONCAVITY_TAGS:
            raise DomainError("Unknown concavity tag {}.".format(self.concavity))
        if self.domain is not None and self.domain.dim != self.dimension:
            raise DomainError("Domain of {} has the wrong dimension.".format(self.name))

    def default_domain(self):
        if self.domain is not None:
            return self.domain
        return BoxDomain.cube(self.dimension, 0.1, 10.0)

    def __call__(self, x):
        return float(self.evaluator(x))

    def to_dict(self):
        return {
            'name': self.name,
            'kind': 'utility',
            'dimension': self.dimension,
            'concavity': self.concavity,
            'debreu': self.debreu,
            'line': self.line,
            'monotone': self.monotone,
            'domain': self.default_domain().to_dict(),
            'reference': None if self.reference is None else [np.asarray(p).tolist() for p in self.reference],
            'description': self.description,
        }


@dataclass(frozen=True, eq=False)
class IntensitySpec:
    """g(x, y): strength of the improvement from y to x. Only used for negative fixtures."""
    name: str
    dimension: int
    evaluator: Callable
    domain: Optional[BoxDomain] = None
    description: str = ""

    def default_domain(self):
        if self.domain is not None:
            return self.domain
        return BoxDomain.cube(self.dimension, 0.1, 10.0)

    def to_dict(self):
        return {
            'name': self.name,
            'kind': 'intensity',
            'dimension': self.dimension,
            'domain': self.default_domain().to_dict(),
            'description': self.description,
        }


def _grid_points(domain, per_axis=5):
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in zip(domain.lower, domain.upper)]
    if domain.dim > 4:
        # corners plus centre once the full grid gets large
        axes = [np.array([lo, 0.5 * (lo + hi), hi]) for lo, hi in zip(domain.lower, domain.upper)]
    for coords in itertools.product(*axes):
        p = np.array(coords)
        if domain.contains(p):
            yield p


def estimate_range(evaluator, domain):
    """Spread of the evaluator over a coarse grid. Used to scale the equality tolerance."""
    values = [float(evaluator(p)) for p in _grid_points(domain)]
    values = [v for v in values if np.isfinite(v)]
    if not values:
        return 1.0
    spread = max(values) - min(values)
    return spread if spread > 0 else 1.0


def _resolve(spec, domain):
    domain = domain or spec.default_domain()
    if domain.dim != spec.dimension:
        raise DomainError("{} is {:d}-dimensional but the domain is {:d}-dimensional.".format(
            spec.name, spec.dimension, domain.dim))
    return domain


def make_difference_oracle(spec, domain=None, eps_eq=None):
    """
    Alt system of a utility: [x,y] vs [z,w] is the sign of (u(x)-u(y)) - (u(z)-u(w)).
    eps_eq is relative to the utility range over the domain.
    """
    domain = _resolve(spec, domain)
    eps_rel = config.EPS_EQ if eps_eq is None else float(eps_eq)
    if not eps_rel > 0:
        raise DomainError("Equality tolerance must be positive.")
    u = spec.evaluator
    scale = estimate_range(u, domain)

    def _margin(x, y, z, w):
        return (u(x) - u(y)) - (u(z) - u(w))
    return AltOracle(domain, _margin, eps_rel * scale, name=spec.name, scale=scale)


def make_intensity_oracle(spec, domain=None, eps_eq=None):
    domain = _resolve(spec, domain)
    eps_rel = config.EPS_EQ if eps_eq is None else float(eps_eq)
    if not eps_rel > 0:
        raise DomainError("Equality tolerance must be positive.")
    g = spec.evaluator
    nodes = list(_grid_points(domain, per_axis=3))
    values = [float(g(a, b)) for a in nodes for b in nodes]
    scale = (max(values) - min(values)) or 1.0

    def _margin(x, y, z, w):
        return g(x, y) - g(z, w)
    return AltOracle(domain, _margin, eps_rel * scale, name=spec.name, scale=scale)


def make_oracle(entry, domain=None, eps_eq=None):
    if isinstance(entry, IntensitySpec):
        return make_intensity_oracle(entry, domain, eps_eq)
    return make_difference_oracle(entry, domain, eps_eq)


def _kink(c):
    return c - 1.0 if c <= 1.0 else 0.5 * (c - 1.0)


def _cobb_douglas_gradient(x):
    r = np.sqrt(x[1] / x[0])
    return np.array([0.5 * r, 0.5 / r])


def _cobb_douglas_hessian(x):
    s = np.sqrt(x[0] * x[1])
    return np.array([[-0.25 * s / x[0] ** 2, 0.25 / s],
                     [0.25 / s, -0.25 * s / x[1] ** 2]])


@cached(cache={})
def _catalog():
    unit = BoxDomain.cube(1, 0.0, 1.0)
    return (
        UtilitySpec("linear", 2, lambda x: x[0] + x[1],
                    gradient=lambda x: np.ones(2), hessian=lambda x: np.zeros((2, 2)),
                    concavity="affine", debreu=True, line=True,
                    description="x1 + x2"),
        UtilitySpec("cobb_douglas", 2, lambda x: np.sqrt(x[0] * x[1]),
                    gradient=_cobb_douglas_gradient, hessian=_cobb_douglas_hessian,
                    concavity="concave", debreu=True, line=True,
                    description="sqrt(x1 x2); concave, not strictly along rays"),
        UtilitySpec("ces", 2, lambda x: (np.sqrt(x[0]) + np.sqrt(x[1])) ** 2,
                    concavity="concave", debreu=True, line=True,
                    description="CES with rho=0.5: (x1^0.5 + x2^0.5)^2"),
        UtilitySpec("exp1d", 1, lambda x: np.exp(x[0]),
                    gradient=lambda x: np.array([np.exp(x[0])]),
                    hessian=lambda x: np.array([[np.exp(x[0])]]),
                    concavity="non-concave", debreu=True, line=True, domain=unit,
                    description="e^t on [0, 1]; convex"),
        UtilitySpec("log_sum", 2, lambda x: np.log(x[0]) + np.log(x[1]),
                    gradient=lambda x: np.array([1.0 / x[0], 1.0 / x[1]]),
                    hessian=lambda x: np.diag([-1.0 / x[0] ** 2, -1.0 / x[1] ** 2]),
                    concavity="strictly-concave", debreu=True, line=True,
                    description="log x1 + log x2"),
        UtilitySpec("kinked_composite", 2, lambda x: _kink(np.sqrt(x[0] * x[1])),
                    concavity="concave", debreu=True, line=False,
                    domain=BoxDomain.cube(2, 0.01, 4.0),
                    description="g(sqrt(x1 x2)) with g(c)=c-1 below 1 and (c-1)/2 above"),
        UtilitySpec("min", 2, lambda x: min(x[0], x[1]),
                    concavity="concave", debreu=False, line=True,
                    description="min(x1, x2); homogeneous of degree one, kinked indifference curves"),
        UtilitySpec("step", 1, lambda x: np.floor(x[0]),
                    monotone=False, domain=BoxDomain.cube(1, 0.0, 3.0),
                    description="floor(t) on [0, 3]; discontinuous"),
        UtilitySpec("identity", 1, lambda x: x[0],
                    gradient=lambda x: np.ones(1), hessian=lambda x: np.zeros((1, 1)),
                    concavity="affine", debreu=True, line=True, domain=unit,
                    description="t on [0, 1]"),
        UtilitySpec("square", 1, lambda x: x[0] ** 2,
                    gradient=lambda x: np.array([2.0 * x[0]]),
                    hessian=lambda x: np.array([[2.0]]),
                    concavity="non-concave", debreu=True, line=True,
                    domain=BoxDomain.cube(1, 0.0, 3.0),
                    description="t^2 on [0, 3]"),
        UtilitySpec("neg_quadratic", 1, lambda x: -(x[0] - 1.0) ** 2,
                    gradient=lambda x: np.array([-2.0 * (x[0] - 1.0)]),
                    hessian=lambda x: np.array([[-2.0]]),
                    concavity="strictly-concave", monotone=False,
                    domain=BoxDomain.cube(1, 0.0, 2.0),
                    reference=(np.array([0.0]), np.array([1.0])),
                    description="-(t-1)^2 on [0, 2]; increasing only on [0, 1]"),
        UtilitySpec("cubic", 1, lambda x: x[0] ** 3,
                    concavity="non-concave", domain=BoxDomain.cube(1, -1.0, 1.0),
                    description="t^3 on [-1, 1]"),
        UtilitySpec("decreasing", 2, lambda x: -x[0],
                    concavity="affine", monotone=False,
                    description="-x1; violates monotonicity"),
    )


@cached(cache={})
def _intensity_catalog():
    line = BoxDomain.cube(1, 0.0, 10.0)
    return (
        IntensitySpec("broken_crossover", 1, lambda x, y: x[0] - 2.0 * y[0], domain=line,
                      description="g = u(x) - 2u(y), u(t)=t; consistent but breaks crossover"),
        IntensitySpec("broken_consistency", 1, lambda x, y: -(x[0] - y[0]) ** 2, domain=line,
                      description="g = -(u(x) - u(y))^2, u(t)=t; breaks consistency"),
        IntensitySpec("difference", 1, lambda x, y: x[0] - y[0], domain=line,
                      description="g = u(x) - u(y), u(t)=t; a plain difference system"),
        IntensitySpec("constant", 1, lambda x, y: 0.0, domain=line,
                      description="g = 0; every comparison is Equal"),
    )


def catalog():
    return list(_catalog())


def intensity_catalog():
    return list(_intensity_catalog())


def lookup(name):
    for entry in _catalog() + _intensity_catalog():
        if entry.name == name:
            return entry
    raise LookupError("Cannot find oracle {}.".format(name))


_UNARY = {
    'sqrt': np.sqrt,
    'log': np.log,
    'exp': np.exp,
}
_NARY = {
    '+': lambda args: sum(args),
    '*': lambda args: float(np.prod(args)),
    'min': min,
    'max': max,
}


def _compile(node, dim):
    if isinstance(node, bool):
        raise DomainError("Booleans are not expressions.")
    if isinstance(node, (int, float)):
        c = float(node)
        return lambda x: c
    if not isinstance(node, list) or not node:
        raise DomainError("Cannot parse expression node {!r}.".format(node))
    op, args = node[0], node[1:]
    if op == 'x':
        if len(args) != 1 or not isinstance(args[0], int) or not 0 <= args[0] < dim:
            raise DomainError("Coordinate reference {!r} is out of range.".format(node))
        i = args[0]
        return lambda x: x[i]
    parts = [_compile(a, dim) for a in args]
    if op in _UNARY:
        if len(parts) != 1:
            raise DomainError("{} takes one argument.".format(op))
        f, inner = _UNARY[op], parts[0]
        return lambda x: f(inner(x))
    if op in _NARY:
        if not parts:
            raise DomainError("{} needs arguments.".format(op))
        f = _NARY[op]
        return lambda x: f([p(x) for p in parts])
    if op == '-':
        if len(parts) == 1:
            return lambda x: -parts[0](x)
        if len(parts) == 2:
            return lambda x: parts[0](x) - parts[1](x)
    if op in ('/', 'pow') and len(parts) == 2:
        a, b = parts
        if op == '/':
            return lambda x: a(x) / b(x)
        return lambda x: a(x) ** b(x)
    raise DomainError("Unsupported operator {!r} with {:d} arguments.".format(op, len(parts)))


def load_expression(document):
    """
    Utility from a JSON expression document:
    {"name": ..., "dimension": n, "expression": [...], "domain": {"lower": [...], "upper": [...]},
     "concavity": ...}. Leaves are numbers or ["x", i].
    """
    try:
        dim = int(document['dimension'])
        expression = document['expression']
    except (KeyError, TypeError, ValueError) as e:
        raise DomainError("Expression document needs 'dimension' and 'expression': {}".format(e))
    evaluator = _compile(expression, dim)
    domain = BoxDomain.from_dict(document['domain']) if document.get('domain') else None
    reference = document.get('reference')
    if reference is not None:
        reference = (as_point(reference[0], dim), as_point(reference[1], dim))
    spec = UtilitySpec(document.get('name', 'expression'), dim, evaluator,
                       concavity=document.get('concavity', 'unknown'),
                       monotone=bool(document.get('monotone', True)),
                       domain=domain, reference=reference,
                       description="expression {}".format(expression))
    logger.debug("Loaded expression utility {}".format(spec.name))
    return spec
