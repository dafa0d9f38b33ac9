# -*- coding: utf-8 -*-

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import exponential_model
from queuelab.checks import StabilityViolation, require_stable
from queuelab.model import (ModelSpec, ServiceDistribution, StabilityReport, classify, k2_radical,
                            k2_stability_condition, left_perron_vector, load_spec, offspring_matrix, perron_vector,
                            spectral_radius, validate)
from queuelab.model.offspring import is_irreducible, strong_components

Verdict = StabilityReport.Verdict


def positive_matrices(max_k=4):
    return st.integers(min_value=1, max_value=max_k).flatmap(
        lambda k: st.lists(st.lists(st.floats(min_value=0.01, max_value=2.0), min_size=k, max_size=k),
                           min_size=k, max_size=k)
    ).map(np.array)


def test_offspring_matrix(symmetric):
    offspring = offspring_matrix(symmetric)

    assert np.allclose(offspring.m, [[0.0, 0.5], [0.5, 0.0]])
    assert np.allclose(offspring.mu, [2.0, 2.0])
    assert offspring.rho == pytest.approx(0.5)
    assert offspring.irreducible
    assert offspring.positive_rows


def test_offspring_uses_parent_service():
    spec = exponential_model([[0.0, 4.0], [1.0, 0.0]], [2.0, 1.0])
    m = offspring_matrix(spec).m

    # row i is scaled by the mean service of class i
    assert np.allclose(m, [[0.0, 2.0], [1.0, 0.0]])


@pytest.mark.parametrize('lam, mu, rho, verdict', [
    ([[0.5]], [1.0], 0.5, Verdict.STABLE),
    ([[1.0]], [1.0], 1.0, Verdict.BOUNDARY),
    ([[0.0, 1.0], [1.0, 0.0]], [2.0, 2.0], 0.5, Verdict.STABLE),
    ([[0.0, 2.0], [2.0, 0.0]], [2.0, 2.0], 1.0, Verdict.BOUNDARY),
    ([[0.0, 3.0], [3.0, 0.0]], [2.0, 2.0], 1.5, Verdict.UNSTABLE),
])
def test_classify_examples(lam, mu, rho, verdict):
    report = classify(exponential_model(lam, mu))

    assert report.rho == pytest.approx(rho, abs=1e-12)
    assert report.verdict is verdict
    assert (report.drain_coefficients is not None) == (verdict is Verdict.STABLE)


def test_no_feedback_is_stable(no_feedback):
    report = classify(no_feedback)

    assert report.rho == 0.0
    assert report.verdict is Verdict.STABLE
    assert not report.positive_rows
    assert np.allclose(report.drain_coefficients, [1.0, 1 / 3])


def test_drain_coefficients(mm1, symmetric):
    assert classify(mm1).drain_coefficients == pytest.approx([2.0])

    # (I - H)^-1 e = 2e for the symmetric model, divided by mu = 2
    assert classify(symmetric).drain_coefficients == pytest.approx([1.0, 1.0])


def test_epsilon_band(mm1):
    report = classify(mm1.scaled(2.0 - 1e-6), epsilon=1e-3)
    assert report.verdict is Verdict.BOUNDARY

    report = classify(mm1.scaled(2.0 - 1e-6), epsilon=1e-9)
    assert report.verdict is Verdict.STABLE


def test_report_explanations(critical, supercritical):
    assert classify(critical).basis == 'weak-stability'
    assert classify(supercritical).basis == 'weak-instability'

    zero_row = exponential_model([[3.0, 0.0], [0.0, 0.0]], [2.0, 2.0])
    report = classify(zero_row)
    assert report.verdict is Verdict.UNSTABLE
    assert not report.positive_rows
    assert report.basis.startswith('none')
    assert report.to_dict()['verdict'] == 'Unstable'


def test_reducible_boundary():
    spec = exponential_model([[1.0, 0.0], [0.0, 0.5]], [1.0, 1.0])
    report = classify(spec)

    assert report.verdict is Verdict.BOUNDARY
    assert not report.irreducible
    assert report.basis == 'none (M reducible)'


@given(positive_matrices(max_k=4))
@settings(max_examples=60, deadline=None)
def test_spectral_radius_matches_eigenvalues(m):
    expected = float(np.max(np.abs(np.linalg.eigvals(m))))

    assert spectral_radius(m) == pytest.approx(expected, rel=1e-9, abs=1e-12)


@given(positive_matrices(max_k=4), st.floats(min_value=0.1, max_value=10.0))
@settings(max_examples=40, deadline=None)
def test_spectral_radius_is_homogeneous(m, c):
    assert spectral_radius(c * m) == pytest.approx(c * spectral_radius(m), rel=1e-9)


@given(positive_matrices(max_k=4))
@settings(max_examples=40, deadline=None)
def test_row_sums_bracket_spectral_radius(m):
    rho = spectral_radius(m)
    sums = m.sum(axis=1)

    assert sums.min() * (1 - 1e-9) <= rho <= sums.max() * (1 + 1e-9)


def test_k2_radical_against_eigenvalues():
    generator = np.random.default_rng(3)
    for _ in range(1000):
        m = generator.uniform(0, 2, size=(2, 2))
        assert k2_radical(m) == pytest.approx(float(np.max(np.abs(np.linalg.eigvals(m)))), rel=1e-10)


def test_k2_stability_condition(symmetric, supercritical):
    holds, radical = k2_stability_condition(symmetric)
    assert holds and radical == pytest.approx(0.5)

    holds, radical = k2_stability_condition(supercritical)
    assert not holds and radical == pytest.approx(1.5)

    with pytest.raises(ValueError):
        k2_stability_condition(exponential_model([[0.5]], [1.0]))


def test_spectral_radius_edge_cases():
    assert spectral_radius(np.zeros((3, 3))) == 0.0
    assert spectral_radius(np.diag([0.5, 0.2, 0.9])) == pytest.approx(0.9)

    # reducible, distinct diagonal blocks
    m = np.array([[0.3, 1.0, 0.0], [0.0, 0.7, 0.0], [0.0, 0.0, 0.2]])
    assert spectral_radius(m) == pytest.approx(0.7, rel=1e-9)

    with pytest.raises(ValueError):
        spectral_radius(np.array([[1.0, -1.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        spectral_radius(np.ones((2, 3)))


def test_periodic_matrix():
    m = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [8.0, 0.0, 0.0]])
    rho, right = perron_vector(m)

    assert spectral_radius(m) == pytest.approx(2.0, abs=1e-12)
    assert np.allclose(m @ right, rho * right, atol=1e-12)


JORDAN_CHAIN = [[1.0, 1.0, 0.0], [0.0, 1.0, 1.0], [0.0, 0.0, 1.0]]
STABLE_BESIDE_BOUNDARY = [
    [0.0, 0.5, 0.0, 0.0, 0.0],
    [0.5, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 1.0],
    [0.0, 0.0, 1.0, 0.0, 0.0],
]
STABLE_FEEDING_BOUNDARY = [row[:] for row in STABLE_BESIDE_BOUNDARY]
STABLE_FEEDING_BOUNDARY[0][2] = 0.7
ZERO_ROW = [[0.0, 2.0, 0.0], [0.0, 0.0, 0.0], [1.0, 1.0, 1.5]]


@pytest.mark.parametrize('lam, rho, verdict', [
    (JORDAN_CHAIN, 1.0, Verdict.BOUNDARY),
    ([[0.5 * v for v in row] for row in JORDAN_CHAIN], 0.5, Verdict.STABLE),
    (STABLE_BESIDE_BOUNDARY, 1.0, Verdict.BOUNDARY),
    (STABLE_FEEDING_BOUNDARY, 1.0, Verdict.BOUNDARY),
    (ZERO_ROW, 1.5, Verdict.UNSTABLE),
])
def test_reducible_offspring_matrices(lam, rho, verdict):
    spec = exponential_model(lam, [1.0] * len(lam))
    m = offspring_matrix(spec).m
    report = classify(spec)

    assert spectral_radius(m) == pytest.approx(rho, abs=1e-12)
    assert report.rho == pytest.approx(rho, abs=1e-12)
    assert report.verdict is verdict
    assert not report.irreducible

    found, right = perron_vector(m)
    left = left_perron_vector(m)
    assert found == pytest.approx(rho, abs=1e-12)
    assert np.all(right >= 0) and np.all(left >= 0)
    assert np.allclose(m @ right, rho * right, atol=1e-12)
    assert np.allclose(left @ m, rho * left, atol=1e-12)


def test_strong_components():
    count, labels = strong_components(np.array(STABLE_FEEDING_BOUNDARY))

    assert count == 2
    assert labels[0] == labels[1]
    assert len(set(labels[2:])) == 1
    assert strong_components(np.array(JORDAN_CHAIN))[0] == 3


def test_perron_vectors():
    m = np.array([[0.2, 0.4, 0.1], [0.3, 0.1, 0.5], [0.6, 0.2, 0.3]])
    rho, right = perron_vector(m)
    left = left_perron_vector(m)

    assert np.allclose(m @ right, rho * right, atol=1e-10)
    assert np.allclose(left @ m, rho * left, atol=1e-10)
    assert right.sum() == pytest.approx(1.0)
    assert left.sum() == pytest.approx(1.0)


def test_rho_of_h_equals_rho_of_m():
    spec = exponential_model([[0.1, 0.4, 0.0], [0.3, 0.0, 0.9], [0.2, 0.5, 0.1]], [1.0, 2.0, 0.5])
    offspring = offspring_matrix(spec)

    assert spectral_radius(offspring.h) == pytest.approx(offspring.rho, rel=1e-9)
    assert np.allclose(offspring.h, offspring.g @ offspring.m @ np.linalg.inv(offspring.g))


def test_permutation_invariance():
    spec = exponential_model([[0.1, 0.4, 0.0], [0.3, 0.0, 0.9], [0.2, 0.5, 0.1]], [1.0, 2.0, 0.5])
    for order in ([2, 0, 1], [1, 2, 0], [2, 1, 0]):
        permuted = classify(spec.permuted(order))
        original = classify(spec)
        assert permuted.rho == pytest.approx(original.rho, rel=1e-10)
        assert permuted.verdict is original.verdict
        assert permuted.drain_coefficients == pytest.approx(original.drain_coefficients[order])


def test_irreducibility():
    assert is_irreducible(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert not is_irreducible(np.array([[1.0, 1.0], [0.0, 1.0]]))
    assert is_irreducible(np.array([[0.5]]))


def test_require_stable(mm1, critical, supercritical):
    assert require_stable(mm1).verdict is Verdict.STABLE

    with pytest.raises(StabilityViolation) as excinfo:
        require_stable(critical)
    assert excinfo.value.rho == pytest.approx(1.0)

    assert require_stable(critical, strict=False).verdict is Verdict.BOUNDARY
    with pytest.raises(StabilityViolation):
        require_stable(supercritical, strict=False)


def test_validate_examples(symmetric):
    assert validate(symmetric).ok

    negative = exponential_model([[0.0, -1.0], [1.0, 0.0]], [2.0, 2.0])
    codes = [v.code for v in validate(negative).violations]
    assert codes == ['negative_rate']

    silent = exponential_model([[0.5]], [1.0], lam0=[0.0])
    result = validate(silent)
    assert [v.code for v in result.violations] == ['no_restart']
    assert result.blocking(sampling=False) == ()
    assert len(result.blocking(sampling=True)) == 1

    heavy = ModelSpec([[0.5]], [0.5], [ServiceDistribution.pareto(0.9, 1.0)])
    assert [v.code for v in validate(heavy).violations] == ['infinite_mean']

    infinite = exponential_model([[math.inf]], [1.0])
    assert [v.code for v in validate(infinite).violations] == ['non_finite']


def test_validate_records():
    good = {'k': 1, 'lambda': [[0.5]], 'lambda0': [0.5], 'service': [{'kind': 'exponential', 'rate': 1.0}]}
    assert validate(good).ok

    non_square = {**good, 'lambda': [[0.5, 0.1]]}
    assert [v.code for v in validate(non_square).violations] == ['non_square']

    mismatch = {**good, 'k': 2}
    assert [v.code for v in validate(mismatch).violations] == ['dimension']

    short_lambda0 = {**good, 'lambda0': [0.5, 0.5]}
    assert [v.code for v in validate(short_lambda0).violations] == ['dimension']

    missing = {'lambda': [[0.5]]}
    assert [v.code for v in validate(missing).violations] == ['missing']

    bad_service = {**good, 'service': [{'kind': 'nope'}]}
    assert [v.code for v in validate(bad_service).violations] == ['service']

    with pytest.raises(ModelSpec.Invalid):
        ModelSpec.from_record(non_square)


def test_record_round_trip(symmetric, tmp_path):
    path = tmp_path / 'model.json'
    path.write_text(symmetric.dumps())
    loaded = load_spec(str(path))

    assert np.array_equal(loaded.lam, symmetric.lam)
    assert np.array_equal(loaded.lam0, symmetric.lam0)
    assert loaded.service == symmetric.service


def test_yaml_model(tmp_path):
    path = tmp_path / 'model.yaml'
    path.write_text('lambda: [[0.5]]\nlambda0: [0.5]\nservice:\n  - kind: exponential\n    rate: 1\n')

    assert classify(load_spec(str(path))).rho == pytest.approx(0.5)


def test_model_helpers(symmetric):
    assert np.allclose(symmetric.lambda_bar, [1.0, 1.0])
    assert np.allclose(symmetric.means, [0.5, 0.5])
    assert classify(symmetric.scaled(2.0)).rho == pytest.approx(1.0)
    assert np.allclose(symmetric.with_lambda0([0.0, 1.0]).lam0, [0.0, 1.0])
    with pytest.raises(ValueError):
        symmetric.lam[0, 0] = 1.0
