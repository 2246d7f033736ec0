# -*- coding: utf-8 -*-
#
import os
import sys
from dataclasses import asdict, dataclass, fields, replace
from os import getenv
from typing import Optional

import orjson

from util import load_env
load_env()
module = sys.modules[__name__]
TRUTHS = {True, 1, '1', 'T', 't', 'true', 'TRUE', 'True'}
CONFIG = module.CONFIG = {}


class ConfigError(ValueError):
    """Invalid run configuration. The CLI exits with code 2 on these."""
    pass


EPS_EQ = CONFIG['EPS_EQ'] = float(getenv("ALT_EPS_EQ", 1e-9))
TOL_T = CONFIG['TOL_T'] = float(getenv("ALT_TOL_T", 1e-8))
DEPTH = CONFIG['DEPTH'] = int(getenv("ALT_DEPTH", 10))
DYADIC_DEPTH = CONFIG['DYADIC_DEPTH'] = int(getenv("ALT_DYADIC_DEPTH", 6))
TRIALS = CONFIG['TRIALS'] = int(getenv("ALT_TRIALS", 1000))
SEED = CONFIG['SEED'] = int(getenv("ALT_SEED", 0))
WORKERS = CONFIG['WORKERS'] = int(getenv("ALT_WORKERS", os.cpu_count() or 1))
MAX_WITNESSES = CONFIG['MAX_WITNESSES'] = int(getenv("ALT_MAX_WITNESSES", 10))
OUTPUT_DIR = CONFIG['OUTPUT_DIR'] = getenv("ALT_OUTPUT_DIR", ".")
LOG_LEVEL = CONFIG['LOG_LEVEL'] = getenv("ALT_LOG_LEVEL", "INFO")
DEBUG = CONFIG['DEBUG'] = getenv("ALT_DEBUG", '') in TRUTHS


@dataclass
class RunConfig:
    """One resolved run: defaults from the environment, then a JSON file, then flags."""
    oracle: Optional[str] = None
    expression: Optional[str] = None
    domain: Optional[dict] = None
    segment: Optional[list] = None
    anchors: Optional[list] = None
    second_anchors: Optional[list] = None
    seed: int = SEED
    eps_eq: float = EPS_EQ
    tol_t: float = TOL_T
    h: float = 1e-3
    delta: float = 0.05
    trials: int = TRIALS
    depth: int = DEPTH
    workers: int = WORKERS
    output_dir: str = OUTPUT_DIR
    b: float = 1.0
    schedule: Optional[list] = None
    strict: bool = False
    roundtrip: bool = False
    full: bool = False
    dyadic_depth: int = DYADIC_DEPTH
    reconstructed: bool = False
    grid: int = 11
    affine_tol: float = 5e-3

    @classmethod
    def from_file(cls, path):
        if not os.path.isfile(path):
            raise ConfigError("Config file {} does not exist.".format(path))
        with open(path, 'rb') as f:
            try:
                doc = orjson.loads(f.read())
            except orjson.JSONDecodeError as e:
                raise ConfigError("Config file {} is not valid JSON: {}".format(path, e))
        return cls().merged(doc)

    def merged(self, overrides):
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise ConfigError("Unknown config fields: {}".format(", ".join(sorted(unknown))))
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def validate(self):
        if not self.oracle and not self.expression:
            raise ConfigError("An oracle name or an expression file is required.")
        if self.expression and not os.path.isfile(self.expression):
            raise ConfigError("Expression file {} does not exist.".format(self.expression))
        for name in ('eps_eq', 'tol_t', 'h', 'delta', 'b', 'affine_tol'):
            if not float(getattr(self, name)) > 0:
                raise ConfigError("{} must be positive.".format(name))
        if int(self.trials) < 1:
            raise ConfigError("trials must be at least 1.")
        if int(self.depth) < 0:
            raise ConfigError("depth must be non-negative.")
        if int(self.workers) < 1:
            raise ConfigError("workers must be at least 1.")
        if int(self.grid) < 2:
            raise ConfigError("grid needs at least 2 points per axis.")
        if int(self.dyadic_depth) < 1:
            raise ConfigError("dyadic_depth must be at least 1.")
        if self.schedule is not None:
            try:
                steps = [float(a) for a in self.schedule]
            except (TypeError, ValueError):
                raise ConfigError("schedule must be a list of numbers.")
            if not steps or any(a <= 0 for a in steps) or any(a2 >= a1 for a1, a2 in zip(steps, steps[1:])):
                raise ConfigError("schedule must be a decreasing sequence of positive steps.")
        for name in ('anchors', 'second_anchors', 'segment'):
            pair = getattr(self, name)
            if pair is not None and len(pair) != 2:
                raise ConfigError("{} must be a pair of points.".format(name))
        return self

    def to_dict(self):
        return asdict(self)
