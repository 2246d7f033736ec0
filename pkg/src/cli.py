#!/bin/python3
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

Command line entry point.

    python src/cli.py verify --oracle cobb_douglas
    python src/cli.py reconstruct --oracle linear --second-anchors "1,1;2,2"
    python src/cli.py smoothness --oracle kinked_composite --b 1

Exit codes: 0 pass, 1 property fails or a precondition broke, 2 usage or config error.
"""
import argparse
import logging
import os
import sys

HERE_DIR = os.path.dirname(__file__)
if HERE_DIR not in sys.path:
    sys.path.append(HERE_DIR)
import config
from config import ConfigError, RunConfig
from core import AltError, BoxDomain, DomainError, uniform_sampler, check_axiom_suite
from construct import (
    Segment, check_order_embedding, check_representation, reconstruct, tabulate,
    tabulation_header, verify_affine_uniqueness,
)
from gossen import check_ggfl, theorem2_roundtrip
from oracle_zoo import IntensitySpec, catalog, intensity_catalog, load_expression, lookup, make_oracle
from reports import build_report, read_json, write_csv, write_json
from smooth import (
    MIN_ALEP_DEPTH, alep_classify, debreu_smoothness_proxy, interior_grid, line_smoothness_limit,
)

logger = logging.getLogger("alt_utility")

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2


def log_level(level=None):
    """Flag, then ALT_DEBUG, then ALT_LOG_LEVEL."""
    level = (level or ("DEBUG" if config.DEBUG else config.LOG_LEVEL)).upper()
    return getattr(logging, level, logging.INFO)


def setup_logging(level=None):
    logging.basicConfig(level=log_level(level),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def parse_points(text):
    """'1,1;2,2' -> [[1.0, 1.0], [2.0, 2.0]]"""
    if text is None:
        return None
    try:
        return [[float(c) for c in part.split(",")] for part in text.split(";")]
    except ValueError:
        raise ConfigError("Cannot parse points from {!r}; use 'x1,x2;y1,y2'.".format(text))


def parse_steps(text):
    """'0.1,0.05' -> [0.1, 0.05]"""
    if text is None:
        return None
    try:
        return [float(a) for a in text.split(",")]
    except ValueError:
        raise ConfigError("Cannot parse steps from {!r}; use 'a1,a2,...'.".format(text))


def parse_domain(text):
    pair = parse_points(text)
    if pair is None:
        return None
    if len(pair) != 2:
        raise ConfigError("Domain needs 'lower;upper'.")
    return {'lower': pair[0], 'upper': pair[1]}


def resolve_config(args):
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    overrides = {
        'oracle': args.oracle,
        'expression': args.expression,
        'seed': args.seed,
        'eps_eq': args.eps_eq,
        'tol_t': args.tol_t,
        'trials': args.trials,
        'depth': args.depth,
        'workers': args.workers,
        'output_dir': args.output_dir,
        'domain': parse_domain(args.domain),
    }
    for name in ('delta', 'b', 'h', 'grid', 'affine_tol', 'dyadic_depth'):
        if hasattr(args, name):
            overrides[name] = getattr(args, name)
    for name in ('anchors', 'second_anchors', 'segment'):
        if hasattr(args, name):
            overrides[name] = parse_points(getattr(args, name))
    if hasattr(args, 'schedule'):
        overrides['schedule'] = parse_steps(args.schedule)
    for name in ('strict', 'roundtrip', 'full', 'reconstructed'):
        if getattr(args, name, False):
            overrides[name] = True
    return cfg.merged(overrides).validate()


def load_entry(cfg):
    if cfg.expression:
        try:
            return load_expression(read_json(cfg.expression))
        except DomainError as e:
            raise ConfigError("Bad expression file {}: {}".format(cfg.expression, e))
    return lookup(cfg.oracle)


def _setup(cfg):
    entry = load_entry(cfg)
    domain = BoxDomain.from_dict(cfg.domain) if cfg.domain else None
    oracle = make_oracle(entry, domain, cfg.eps_eq)
    logger.info("Using oracle: {}".format(entry.name))
    logger.info("Using domain: {}".format(oracle.domain.to_dict()))
    logger.info("Using seed: {}".format(cfg.seed))
    return entry, oracle


def _segment(cfg, entry, oracle):
    if cfg.segment:
        return Segment(*cfg.segment)
    reference = getattr(entry, 'reference', None)
    if reference is not None:
        return Segment(*reference)
    return Segment.diagonal(oracle.domain)


def _utility_entry(entry, command):
    if isinstance(entry, IntensitySpec):
        raise ConfigError("{} needs a utility oracle, {} is an intensity fixture.".format(command, entry.name))
    return entry


def cmd_verify(cfg):
    entry, oracle = _setup(cfg)
    reports = check_axiom_suite(oracle, uniform_sampler(oracle.domain), cfg.trials, cfg.delta,
                                cfg.seed, cfg.workers)
    for name, report in reports.items():
        doc = build_report('report', report.to_dict(), cfg.to_dict(), oracle)
        write_json(cfg.output_dir, "verify_{}.json".format(name), doc)
    failed = [name for name, r in reports.items() if not r.passed]
    if failed:
        logger.warning("Axioms failing: {}".format(", ".join(failed)))
        return EXIT_FAIL
    return EXIT_PASS


def cmd_reconstruct(cfg):
    entry, oracle = _setup(cfg)
    segment = _segment(cfg, entry, oracle)
    anchors = cfg.anchors or [segment.p.tolist(), segment.q.tolist()]
    recon = reconstruct(oracle, anchors[0], anchors[1], cfg.depth, cfg.tol_t, segment)
    sampler = uniform_sampler(oracle.domain)
    representation = check_representation(oracle, recon, sampler, cfg.trials, cfg.seed, cfg.workers)
    embedding = check_order_embedding(oracle, recon, sampler, cfg.trials, cfg.seed, cfg.workers)
    body = {
        'utility': recon.to_dict(),
        'representation': representation.to_dict(),
        'order_embedding': embedding.to_dict(),
    }
    ok = representation.passed and embedding.passed
    if cfg.second_anchors:
        fit = verify_affine_uniqueness(oracle, anchors, cfg.second_anchors, cfg.depth,
                                       samples=min(cfg.trials, 500), seed=cfg.seed,
                                       tol_t=cfg.tol_t, segment=segment)
        body['affine_fit'] = fit.to_dict()
        print("Affine fit residual: {:.3g} (threshold {:g}), alpha={:.6g}".format(
            fit.max_residual, cfg.affine_tol, fit.alpha))
        ok = ok and fit.positive and fit.max_residual < cfg.affine_tol
    write_json(cfg.output_dir, "reconstruction.json",
               build_report('reconstruction', body, cfg.to_dict(), oracle))
    write_csv(cfg.output_dir, "reconstruction.csv", tabulation_header(oracle.domain),
              tabulate(recon, cfg.grid))
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_concavity(cfg):
    entry, oracle = _setup(cfg)
    verdict = check_ggfl(oracle, trials=cfg.trials, seed=cfg.seed, strict=cfg.strict,
                         workers=cfg.workers)
    body = {'ggfl': verdict.to_dict()}
    ok = verdict.holds
    if cfg.roundtrip:
        spec = _utility_entry(entry, "concavity --roundtrip")
        roundtrip = theorem2_roundtrip(spec, oracle.domain, cfg.trials, cfg.seed, cfg.depth,
                                       cfg.eps_eq, cfg.workers, full=cfg.full,
                                       dyadic_depth=cfg.dyadic_depth if cfg.full else None)
        body['roundtrip'] = roundtrip.to_dict()
        ok = ok and roundtrip.agree
    write_json(cfg.output_dir, "concavity.json", build_report('concavity', body, cfg.to_dict(), oracle))
    print("Gossen law: {}".format(verdict.law))
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_smoothness(cfg):
    entry, oracle = _setup(cfg)
    line = line_smoothness_limit(oracle, cfg.b, schedule=cfg.schedule, tol_t=cfg.tol_t)
    proxy = debreu_smoothness_proxy(oracle, trials=cfg.trials, seed=cfg.seed, workers=cfg.workers)
    body = {'line': line.to_dict(), 'debreu_proxy': proxy.to_dict()}
    write_json(cfg.output_dir, "smoothness.json", build_report('smoothness', body, cfg.to_dict(), oracle))
    write_csv(cfg.output_dir, "smoothness.csv", ["a", "f", "quotient"], line.csv_rows())
    if line.estimate is not None:
        print("Line smoothness limit: {:.6g} +/- {:.2g} ({})".format(
            line.estimate, line.uncertainty, line.verdict))
    return EXIT_PASS if line.line_smooth and proxy.passed else EXIT_FAIL


def cmd_alep(cfg):
    entry, oracle = _setup(cfg)
    spec = _utility_entry(entry, "alep")
    if oracle.dim < 2:
        raise ConfigError("ALEP needs at least two commodities.")
    if cfg.reconstructed:
        u = reconstruct(oracle, depth=max(cfg.depth, MIN_ALEP_DEPTH), tol_t=cfg.tol_t,
                        segment=_segment(cfg, entry, oracle))
    else:
        u = spec
    points = interior_grid(oracle.domain, cfg.grid)
    rows, items = [], []
    for i in range(oracle.dim):
        for j in range(i + 1, oracle.dim):
            for c in alep_classify(u, points, (i, j), cfg.h, domain=oracle.domain):
                items.append(c.to_dict())
                rows.append(c.point + [i + 1, j + 1, c.estimate, c.label])
    header = ["x{:d}".format(k + 1) for k in range(oracle.dim)] + ["i", "j", "estimate", "label"]
    write_json(cfg.output_dir, "alep.json", build_report('alep', items, cfg.to_dict(), oracle))
    write_csv(cfg.output_dir, "alep.csv", header, rows)
    labels = sorted({item['label'] for item in items})
    print("ALEP labels: {}".format(", ".join(labels)))
    return EXIT_PASS


def cmd_catalog(cfg=None):
    for entry in catalog() + intensity_catalog():
        doc = entry.to_dict()
        print("{:<20s} {:<10s} n={:d} {}".format(entry.name, doc['kind'], entry.dimension,
                                                  doc.get('concavity', '-')))
    return EXIT_PASS


COMMANDS = {
    'verify': cmd_verify,
    'reconstruct': cmd_reconstruct,
    'concavity': cmd_concavity,
    'smoothness': cmd_smoothness,
    'alep': cmd_alep,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run config; flags override its fields")
    common.add_argument("--oracle", help="catalog name, see the catalog command")
    common.add_argument("--expression", help="JSON expression file for a custom utility")
    common.add_argument("--domain", help="box as 'lower;upper', e.g. '0.1,0.1;10,10'")
    common.add_argument("--seed", type=int)
    common.add_argument("--eps-eq", dest="eps_eq", type=float, help="relative equality tolerance")
    common.add_argument("--tol-t", dest="tol_t", type=float, help="bisection tolerance")
    common.add_argument("--trials", type=int)
    common.add_argument("--depth", type=int, help="ladder depth")
    common.add_argument("--workers", type=int)
    common.add_argument("--output-dir", dest="output_dir")
    common.add_argument("--log-level", dest="log_level")

    parser = argparse.ArgumentParser(prog="alt-utility",
                                     description="Check, rebuild and analyse cardinal utilities behind Alt systems.")
    sub = parser.add_subparsers(dest="command")
    sub.required = True
    p = sub.add_parser("verify", parents=[common], help="run the axiom checkers")
    p.add_argument("--delta", type=float, help="perturbation radius of the continuity proxy")
    p = sub.add_parser("reconstruct", parents=[common], help="build the dyadic ladder and tabulate the utility")
    p.add_argument("--anchors", help="'y*;x*' on the reference segment")
    p.add_argument("--second-anchors", dest="second_anchors", help="second anchor pair for the affine fit")
    p.add_argument("--segment", help="custom strictly ranked reference segment 'p;q'")
    p.add_argument("--grid", type=int, help="points per axis in the CSV table")
    p.add_argument("--affine-tol", dest="affine_tol", type=float)
    p = sub.add_parser("concavity", parents=[common], help="generalized Gossen law")
    p.add_argument("--strict", action="store_true", help="classify strictness")
    p.add_argument("--roundtrip", action="store_true", help="also check the reconstruction against the tag")
    p.add_argument("--full", action="store_true", help="sweep dyadic chord points in the round trip")
    p.add_argument("--dyadic-depth", dest="dyadic_depth", type=int, help="chord points m/2^l up to this l")
    p = sub.add_parser("smoothness", parents=[common], help="line smoothness and the Debreu proxy")
    p.add_argument("--b", type=float, help="diagonal scale")
    p.add_argument("--schedule", help="decreasing steps a, e.g. '0.1,0.05,0.025,0.0125'")
    p = sub.add_parser("alep", parents=[common], help="substitute/complement labels")
    p.add_argument("--h", type=float, help="finite-difference step")
    p.add_argument("--grid", type=int, help="points per axis")
    p.add_argument("--reconstructed", action="store_true", help="classify the reconstruction")
    p.add_argument("--segment", help="custom strictly ranked reference segment 'p;q'")
    sub.add_parser("catalog", parents=[common], help="list fixtures")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    if args.command == 'catalog':
        return cmd_catalog()
    try:
        cfg = resolve_config(args)
    except ConfigError as e:
        logger.error(str(e))
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](cfg)
    except (ConfigError, LookupError) as e:
        logger.error(str(e))
        return EXIT_CONFIG
    except AltError as e:
        logger.error("Precondition failed: {}".format(e))
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
