# -*- coding: utf-8 -*-
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from core import (
    AxiomReport, BoxDomain, DomainError, IntensityOrder, Preference, check_axiom_suite,
    check_consistency, check_continuity_proxy, check_crossover, check_monotonicity,
    check_second_consistency, check_weak_order, consistency_violation, crossover_violation,
    derive_preference, diagonal_sampler, grid_sampler, replay_witnesses, run_trials,
    second_consistency_violation, uniform_sampler,
)
from oracle_zoo import catalog, intensity_catalog, lookup, make_oracle

GREATER = IntensityOrder.GREATER
EQUAL = IntensityOrder.EQUAL
LESS = IntensityOrder.LESS

unit_floats = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)
IDENTITY = make_oracle(lookup("identity"))
COBB = make_oracle(lookup("cobb_douglas"))
ALL_FIXTURES = [e.name for e in catalog() + intensity_catalog()]
ORACLES = {name: make_oracle(lookup(name)) for name in ALL_FIXTURES}
CONTINUOUS_MONOTONE = ["linear", "cobb_douglas", "ces", "exp1d", "log_sum", "kinked_composite", "min",
                       "identity", "square", "cubic"]


def test_box_domain_faces():
    box = BoxDomain.cube(2, 0.0, 1.0, open_lower=True)
    assert box.contains([0.5, 1.0])
    assert not box.contains([0.0, 0.5])
    assert not box.contains([0.5])
    with pytest.raises(DomainError):
        box.check([2.0, 0.5])
    with pytest.raises(DomainError):
        BoxDomain([1.0, 0.0], [0.0, 1.0])
    rng = np.random.default_rng(3)
    assert all(box.contains(box.sample(rng)) for _ in range(100))


def test_box_domain_dict():
    box = BoxDomain.from_dict({'lower': [0.1, 0.2], 'upper': [3, 4]})
    assert box.dim == 2
    assert box.to_dict()['upper'] == [3.0, 4.0]
    assert box.margin([0.5, 3.5]) == pytest.approx(0.3)


def test_derive_preference():
    pref = derive_preference(IDENTITY)
    assert pref([0.7], [0.3]) is Preference.PREFER
    assert pref([0.3], [0.7]) is Preference.DISPREFER
    assert pref([0.4], [0.4]) is Preference.INDIFFERENT
    assert derive_preference(COBB)([1.0, 4.0], [2.0, 2.0]) is Preference.INDIFFERENT


def test_difference_oracle_examples():
    assert IDENTITY.compare([0.9], [0.1], [0.5], [0.2]) is GREATER
    assert COBB.compare([4, 4], [1, 1], [9, 1], [1, 1]) is GREATER
    assert COBB.compare([2, 3], [5, 1], [2, 3], [5, 1]) is EQUAL


def test_oracle_rejects_undefined_points(oracle_for):
    oracle = oracle_for("log_sum")
    with pytest.raises(DomainError):
        oracle.compare([-1.0, 1.0], [-1.0, 1.0], [1.0, 1.0], [1.0, 1.0])


def test_relaxed_shares_counter():
    oracle = make_oracle(lookup("identity"))
    wide = oracle.relaxed(10)
    wide.compare([0.1], [0.2], [0.3], [0.4])
    oracle.compare([0.1], [0.2], [0.3], [0.4])
    assert oracle.calls == 2
    assert wide.eps_eq == pytest.approx(10 * oracle.eps_eq)
    oracle.reset_calls()
    assert wide.calls == 0


@given(unit_floats, unit_floats, unit_floats, unit_floats)
@settings(max_examples=300, deadline=None)
def test_antisymmetry(x, y, z, w):
    assert IDENTITY.compare([x], [y], [z], [w]) is IDENTITY.compare([z], [w], [x], [y]).swapped()


@given(unit_floats, unit_floats)
@settings(max_examples=200, deadline=None)
def test_reflexivity(x, y):
    assert IDENTITY.compare([x], [y], [x], [y]) is EQUAL
    assert IDENTITY.compare([x], [x], [y], [y]) is EQUAL


@pytest.mark.parametrize("name", ALL_FIXTURES)
def test_antisymmetry_and_reflexivity_across_catalog(oracle_for, name):
    oracle = oracle_for(name)
    rng = np.random.default_rng(17)
    for _ in range(10000):
        x, y, z, w = (oracle.domain.sample(rng) for _ in range(4))
        assert oracle.compare(x, y, z, w) is oracle.compare(z, w, x, y).swapped()
        assert oracle.compare(x, y, x, y) is EQUAL


@given(st.sampled_from(ALL_FIXTURES), st.lists(unit_floats, min_size=8, max_size=8))
@settings(max_examples=300, deadline=None)
def test_antisymmetry_property(name, coords):
    oracle = ORACLES[name]
    box = oracle.domain
    n = box.dim
    x, y, z, w = (box.lower + np.array(coords[k * n:(k + 1) * n]) * box.extent for k in range(4))
    assert oracle.compare(x, y, z, w) is oracle.compare(z, w, x, y).swapped()


def test_consistency_passes_for_differences():
    report = check_consistency(COBB, uniform_sampler(COBB.domain), 500, seed=1)
    assert report.passed
    assert report.samples == 500


def test_consistency_fails_for_squared_gap(oracle_for):
    oracle = oracle_for("broken_consistency")
    assert consistency_violation(oracle, np.array([1.0]), np.array([2.0]), np.array([1.0])) is not None
    report = check_consistency(oracle, grid_sampler(oracle.domain, range(11)), 300)
    assert not report.passed
    assert report.violations[0]['case'] == 'consistency'


def test_trials_must_be_positive():
    with pytest.raises(DomainError):
        check_consistency(COBB, uniform_sampler(COBB.domain), 0)


def test_crossover_passes_for_differences():
    report = check_crossover(COBB, uniform_sampler(COBB.domain), 200, seed=2)
    assert report.passed
    assert report.params['matched_forward'] > 0
    assert report.params['matched_converse'] > 0


def test_crossover_witness_pattern(oracle_for):
    oracle = oracle_for("broken_crossover")
    out = crossover_violation(oracle, *[np.array([v]) for v in (4.0, 1.0, 2.0, 0.0)])
    assert out == [EQUAL, LESS]
    report = check_crossover(oracle, uniform_sampler(oracle.domain), 100)
    assert not report.passed
    assert {w['case'] for w in report.violations} & {'forward', 'converse', 'null'}


def test_constant_intensity_matches_every_quadruple(oracle_for):
    oracle = oracle_for("constant")
    report = check_crossover(oracle, uniform_sampler(oracle.domain), 20)
    assert report.passed
    assert report.params['matched_forward'] == 20


def test_second_consistency(oracle_for):
    square = oracle_for("square")
    assert check_second_consistency(square, uniform_sampler(square.domain), 400).passed
    broken = oracle_for("broken_consistency")
    assert second_consistency_violation(broken, *[np.array([v]) for v in (1.0, 2.0, 1.0)]) is not None
    report = check_second_consistency(broken, grid_sampler(broken.domain, range(11)), 300)
    assert not report.passed
    x = np.array([0.5])
    assert second_consistency_violation(square, x, x, np.array([2.0])) is None


def test_continuity_proxy(oracle_for):
    report = check_continuity_proxy(COBB, uniform_sampler(COBB.domain), 200, 0.05)
    assert report.passed
    assert report.proxy
    step = oracle_for("step")
    report = check_continuity_proxy(step, uniform_sampler(step.domain), 300, 0.05)
    assert not report.passed
    assert report.violations[0]['case'] == 'jump'
    with pytest.raises(DomainError):
        check_continuity_proxy(step, uniform_sampler(step.domain), 10, 0.0)


def test_monotonicity(oracle_for):
    for name in ("linear", "min"):
        oracle = oracle_for(name)
        assert check_monotonicity(oracle, uniform_sampler(oracle.domain), 300).passed
    oracle = oracle_for("decreasing")
    report = check_monotonicity(oracle, uniform_sampler(oracle.domain), 300)
    assert not report.passed
    assert report.violations[0]['oracle_outputs'] == ['LESS']


def test_weak_order():
    assert check_weak_order(COBB, uniform_sampler(COBB.domain), 300).passed


def test_weak_order_fails_for_squared_gap(oracle_for):
    oracle = oracle_for("broken_consistency")
    report = check_weak_order(oracle, uniform_sampler(oracle.domain), 50)
    assert not report.passed
    assert {w['case'] for w in report.violations} == {'completeness'}
    assert report.violations[0]['oracle_outputs'] == ['DISPREFER', 'DISPREFER']
    assert all(replay_witnesses(report, oracle))


def test_replay_needs_a_known_report_kind():
    with pytest.raises(DomainError):
        replay_witnesses(AxiomReport(axiom='made_up', trials=1, seed=0), IDENTITY)
    with pytest.raises(DomainError):
        replay_witnesses(AxiomReport(axiom='representation', trials=1, seed=0), IDENTITY)


@pytest.mark.parametrize("name", CONTINUOUS_MONOTONE)
def test_axiom_suite_on_difference_oracles(oracle_for, name):
    oracle = oracle_for(name)
    reports = check_axiom_suite(oracle, uniform_sampler(oracle.domain), 10000, seed=1)
    assert [n for n, r in reports.items() if not r.passed] == []
    assert check_weak_order(oracle, uniform_sampler(oracle.domain), 10000, seed=1).passed


def test_diagonal_sampler_stays_on_diagonal():
    sample = diagonal_sampler(COBB.domain)(np.random.default_rng(0))
    assert sample[0] == sample[1]


def test_run_trials_independent_of_workers():
    def _trial(rng):
        return rng.random()
    assert run_trials(_trial, 50, 7, workers=1) == run_trials(_trial, 50, 7, workers=4)


def test_replay_determinism(oracle_for):
    oracle = oracle_for("broken_crossover")
    sampler = uniform_sampler(oracle.domain)
    first = check_crossover(oracle, sampler, 60, seed=11, workers=1)
    second = check_crossover(oracle, sampler, 60, seed=11, workers=4)
    assert first.to_dict() == second.to_dict()
    assert all(replay_witnesses(first, oracle))


def test_lemma_one_chain(oracle_for):
    oracle = oracle_for("square")
    sampler = uniform_sampler(oracle.domain)
    passed = [check_consistency(oracle, sampler, 200, seed=5).passed,
              check_crossover(oracle, sampler, 200, seed=5).passed,
              check_continuity_proxy(oracle, sampler, 200, 0.05, seed=5).passed]
    assert all(passed)
    assert check_second_consistency(oracle, sampler, 200, seed=5).passed
