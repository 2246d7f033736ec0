# -*- coding: utf-8 -*-
import numpy as np
import pytest

from core import DomainError, RangeError, diagonal_sampler
from construct import reconstruct
from oracle_zoo import lookup
from smooth import (
    ALEP_RUNG_STEPS, INCONCLUSIVE, LINE_SMOOTH, NOT_LINE_SMOOTH, DiagonalPoint, alep_classify,
    calibrate, debreu_smoothness_proxy, default_schedule, diagonal_restriction, interior_grid,
    line_smoothness_limit, numeric_gradient, numeric_hessian, solve_f,
)


@pytest.mark.parametrize("a", [1e-2, 1e-3, 1e-4])
def test_solve_f_kinked_composite(oracle_for, a):
    assert abs(solve_f(oracle_for("kinked_composite"), a, 1.0) - (1.0 - a / 4.0)) < 1e-6


def test_solve_f_homogeneous(oracle_for):
    oracle = oracle_for("min")
    for a in (0.5, 0.1, 0.01):
        assert solve_f(oracle, a, 1.0) == pytest.approx(1.0, abs=1e-6)


def test_solve_f_preconditions(oracle_for):
    oracle = oracle_for("min")
    with pytest.raises(DomainError):
        solve_f(oracle, 1.0, 1.0)
    with pytest.raises(DomainError):
        solve_f(oracle, 0.5, 9.8)
    with pytest.raises(DomainError):
        DiagonalPoint(0.0)


def test_line_smoothness_kinked_composite(oracle_for):
    report = line_smoothness_limit(oracle_for("kinked_composite"), 1.0)
    assert report.estimate == pytest.approx(0.25, abs=1e-3)
    assert report.verdict == NOT_LINE_SMOOTH
    assert abs(report.estimate) > 3 * report.uncertainty
    assert len(report.csv_rows()) == len(default_schedule(1.0))
    # b >= f(a,b) >= b - a
    assert all(-1e-3 <= r['quotient'] <= 1.0 + 1e-3 for r in report.rows)
    assert not report.bound_violations


@pytest.mark.parametrize("name", ["min", "cobb_douglas", "linear"])
def test_line_smoothness_homogeneous(oracle_for, name):
    report = line_smoothness_limit(oracle_for(name), 1.0)
    assert abs(report.estimate) < 1e-3
    assert report.verdict == LINE_SMOOTH
    assert report.line_smooth


def test_line_smoothness_schedule_checks(oracle_for):
    oracle = oracle_for("min")
    with pytest.raises(DomainError):
        line_smoothness_limit(oracle, 1.0, schedule=[0.1, 0.2])
    with pytest.raises(DomainError):
        line_smoothness_limit(oracle, 1.0, schedule=[1.5, 0.1])


def test_line_smoothness_too_short_is_inconclusive(oracle_for):
    report = line_smoothness_limit(oracle_for("min"), 1.0, schedule=[0.1, 0.05])
    assert report.verdict == INCONCLUSIVE
    assert report.estimate is None


def test_calibrate(oracle_for):
    assert calibrate(oracle_for("cobb_douglas"), [4.0, 1.0]) == pytest.approx(2.0, abs=1e-7)
    assert calibrate(oracle_for("linear"), [3.0, 1.0]) == pytest.approx(2.0, abs=1e-7)
    assert calibrate(oracle_for("min"), [2.5, 2.5]) == pytest.approx(2.5, abs=1e-7)
    with pytest.raises(RangeError):
        # preference falls along the diagonal
        calibrate(oracle_for("decreasing"), [5.0, 5.0])


def test_debreu_proxy(oracle_for):
    assert debreu_smoothness_proxy(oracle_for("cobb_douglas"), trials=40).passed
    assert debreu_smoothness_proxy(oracle_for("kinked_composite"), trials=40).passed
    oracle = oracle_for("min")
    report = debreu_smoothness_proxy(oracle, sampler=diagonal_sampler(oracle.domain), trials=20)
    assert not report.passed
    assert report.failures > 0
    assert report.witnesses[0]['forward'] != pytest.approx(report.witnesses[0]['backward'])


def test_theorem_three_independence(oracle_for):
    verdicts = {}
    for name in ("kinked_composite", "min", "cobb_douglas"):
        oracle = oracle_for(name)
        proxy = debreu_smoothness_proxy(oracle, trials=60, seed=2)
        verdicts[name] = (proxy.passed, line_smoothness_limit(oracle, 1.0).line_smooth)
    assert verdicts == {name: (lookup(name).debreu, lookup(name).line) for name in verdicts}
    assert len(set(verdicts.values())) == 3


def test_numeric_gradient_and_hessian():
    cobb = lookup("cobb_douglas")
    domain = cobb.default_domain()
    np.testing.assert_allclose(numeric_gradient(cobb, [1.0, 1.0], domain=domain), [0.5, 0.5], atol=1e-8)
    hess = numeric_hessian(cobb, [1.0, 1.0], domain=domain)
    assert hess[0, 1] == pytest.approx(0.25, abs=1e-5)
    np.testing.assert_allclose(hess, cobb.hessian(np.array([1.0, 1.0])), atol=1e-5)
    linear = lookup("linear")
    assert np.max(np.abs(numeric_hessian(linear, [2.0, 3.0], domain=domain))) < 1e-6
    with pytest.raises(DomainError):
        numeric_gradient(cobb, [0.1, 5.0], domain=domain)


def test_gradient_converges_quadratically():
    cobb = lookup("cobb_douglas")
    x = np.array([2.0, 3.0])
    exact = cobb.gradient(x)
    coarse = np.max(np.abs(numeric_gradient(cobb, x, h=1e-2) - exact))
    fine = np.max(np.abs(numeric_gradient(cobb, x, h=5e-3) - exact))
    assert coarse / fine >= 3.0


def test_alep_labels():
    cobb = lookup("cobb_douglas")
    points = interior_grid(cobb.default_domain(), per_axis=4)
    labels = {c.label for c in alep_classify(cobb, points, domain=cobb.default_domain())}
    assert labels == {"complement"}
    for name in ("linear", "log_sum"):
        spec = lookup(name)
        labels = {c.label for c in alep_classify(spec, points, domain=spec.default_domain())}
        assert labels == {"neutral"}
    with pytest.raises(DomainError):
        alep_classify(cobb, points, pair=(1, 1))


def test_alep_needs_deep_reconstructions(oracle_for):
    recon = reconstruct(oracle_for("cobb_douglas"), depth=4)
    with pytest.raises(DomainError):
        alep_classify(recon, [[2.0, 2.0]])


def test_calibration_matches_diagonal_restriction(oracle_for):
    oracle = oracle_for("cobb_douglas")
    recon = reconstruct(oracle, depth=8)
    g = diagonal_restriction(recon)
    rng = np.random.default_rng(9)
    for _ in range(30):
        x = oracle.domain.sample(rng)
        assert recon(x) == pytest.approx(g(calibrate(oracle, x)), abs=2 * recon.budget)


def test_solve_f_tolerance_sources(oracle_for):
    oracle = oracle_for("kinked_composite")
    exact = 1.0 - 0.01 / 4.0
    assert solve_f(oracle, 0.01, 1.0, tol_t=1e-12) == pytest.approx(exact, abs=1e-7)
    assert solve_f(oracle, 0.01, 1.0, tol=1e-4) == pytest.approx(exact, abs=2e-4)


def test_line_smoothness_noise_follows_tol_t(oracle_for):
    oracle = oracle_for("cobb_douglas")
    schedule = [0.1, 0.05, 0.025, 0.0125, 0.00625]
    coarse = line_smoothness_limit(oracle, 1.0, schedule=schedule, tol_t=1e-7)
    fine = line_smoothness_limit(oracle, 1.0, schedule=schedule, tol_t=1e-10)
    assert fine.rows[0]['noise'] < coarse.rows[0]['noise']
    assert fine.verdict == LINE_SMOOTH


def test_alep_on_reconstruction_widens_step(oracle_for):
    recon = reconstruct(oracle_for("cobb_douglas"), depth=12)
    points = interior_grid(recon.domain, per_axis=3)
    out = alep_classify(recon, points, h=1e-3)
    assert {c.label for c in out} == {"complement"}
    assert all(c.h >= ALEP_RUNG_STEPS * recon.rung_spacing for c in out)


def test_reconstructed_gradient_matches_cobb_douglas(oracle_for):
    cobb = lookup("cobb_douglas")
    recon = reconstruct(oracle_for("cobb_douglas"), depth=10)
    domain = recon.domain
    # û = (u - u(lower)) / (u(upper) - u(lower)) along the diagonal
    expected = cobb.gradient(np.array([1.0, 1.0])) / (cobb(domain.upper) - cobb(domain.lower))
    grad = numeric_gradient(recon, [1.0, 1.0], h=0.05)
    np.testing.assert_allclose(grad, expected, atol=recon.budget)
